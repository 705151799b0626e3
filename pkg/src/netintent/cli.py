"""Command-line front end: translate, activate, assure, detect, bench and sim."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from netintent.activation import LlmEngine, OracleEngine, activate
from netintent.assurance import (
    AssuranceConfig,
    EventKind,
    LiveTrafficDriver,
    SimTrafficDriver,
    assurance_loop,
)
from netintent.bench import BenchConfig, DatasetKind, bundled_path, echo_endpoint, load_dataset, run_benchmark
from netintent.conflict import OverlapSemantics, detect_conflict
from netintent.controllers import SimulatedController, Topology, make_controller
from netintent.errors import NetIntentError
from netintent.flow_model import ControllerDialect, flow_from_dict, load_json
from netintent.flow_model.codec import ENVELOPES
from netintent.llm import EchoBackend, LlmEndpoint, MockBackend
from netintent.llm.gateway import SamplingProfile
from netintent.llm.mmr import ContextExample
from netintent.store import DEFAULT_STORE_PATH, IntentStore
from netintent.translation import DEFAULT_SCHEDULE, TranslationConfig, translate_intent

CONFIG_ENV = "NETINTENT_CONFIG"
DEFAULT_SIM_STATE = "netintent_sim.json"

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class ConfigError(Exception):
    """Unusable configuration; reported with exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def emit(event: str, detail: Any = None) -> None:
    line = {"event": event, "ts": round(time.time(), 6), "detail": detail if detail is not None else {}}
    print(json.dumps(line, default=str), file=sys.stderr, flush=True)


def _out(doc: Any, compact: bool) -> None:
    print(json.dumps(doc, separators=(",", ":")) if compact else json.dumps(doc, indent=2))


# -- configuration ----------------------------------------------------------

def _endpoint(spec: dict, index: int, answers: Optional[dict] = None) -> LlmEndpoint:
    if not isinstance(spec, dict) or "model" not in spec:
        raise ConfigError(f"roster[{index}] needs a 'model' name")
    kind = spec.get("backend", "http")
    backend = None
    if kind == "mock":
        script = [s if isinstance(s, str) else json.dumps(s) for s in spec.get("script", [])]
        backend = MockBackend(script, repeat_last=bool(spec.get("repeat_last", False)))
    elif kind == "echo":
        pairs = spec.get("answers", answers or {})
        backend = EchoBackend({k: v if isinstance(v, str) else json.dumps(v) for k, v in pairs.items()})
    elif kind != "http":
        raise ConfigError(f"roster[{index}]: unknown backend {kind!r}")
    try:
        return LlmEndpoint(
            spec["model"], spec.get("base_url", "http://localhost:11434"),
            spec.get("temperature", 0.6), spec.get("top_p", 0.3), spec.get("rank", index + 1),
            spec.get("timeout_s", 120), backend=backend)
    except ValueError as exc:
        raise ConfigError(f"roster[{index}]: {exc}") from exc


@dataclass
class AppConfig:
    roster: list = field(default_factory=list)
    roster_specs: list = field(default_factory=list)
    dialect: ControllerDialect = ControllerDialect.ODL
    controller: dict = field(default_factory=lambda: {"kind": "sim"})
    context_schedule: tuple = DEFAULT_SCHEDULE
    sampling: SamplingProfile = SamplingProfile()
    assurance: AssuranceConfig = AssuranceConfig()
    topology_path: Optional[Path] = None
    store_path: Path = Path(DEFAULT_STORE_PATH)
    sim_state_path: Path = Path(DEFAULT_SIM_STATE)
    template_dir: Optional[Path] = None
    examples: list = field(default_factory=list)
    bench: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path: Optional[str]) -> "AppConfig":
        path = path or os.environ.get(CONFIG_ENV)
        if not path:
            return cls()
        p = Path(path)
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {p} is not JSON: {exc.msg} (line {exc.lineno})") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {p} must be a JSON object")
        return cls.from_json(doc, p.parent)

    @classmethod
    def from_json(cls, doc: dict, base_dir: Path = Path(".")) -> "AppConfig":
        def path_of(key, must_exist=True):
            raw = doc.get(key)
            if raw is None:
                return None
            p = Path(raw)
            p = p if p.is_absolute() else base_dir / p
            if must_exist and not p.exists():
                raise ConfigError(f"{key}: {p} does not exist")
            return p

        try:
            dialect = ControllerDialect.parse(doc.get("dialect", "odl"))
            sampling = SamplingProfile(**{k: tuple(v) if v is not None else None
                                          for k, v in doc.get("sampling", {}).items()})
            assurance = AssuranceConfig(**doc.get("assurance", {}))
        except (ValueError, TypeError, NetIntentError) as exc:
            raise ConfigError(str(exc)) from exc
        schedule = tuple(doc.get("context_schedule", DEFAULT_SCHEDULE))
        if not schedule or any(not isinstance(x, int) or x < 0 for x in schedule) \
                or any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise ConfigError(f"context_schedule must be strictly increasing non-negative integers: {schedule}")
        specs = doc.get("roster", [])
        if not isinstance(specs, list):
            raise ConfigError("roster must be a list")
        examples = []
        ex = doc.get("examples")
        if ex:
            # "examples": "<kind>" or {"kind": ..., "path": ...}
            ex = {"kind": ex} if isinstance(ex, str) else dict(ex)
            ex_path = Path(ex["path"]) if ex.get("path") else None
            if ex_path is not None and not ex_path.is_absolute():
                ex_path = base_dir / ex_path
            try:
                cases = load_dataset(ex.get("kind"), ex_path or bundled_path(ex.get("kind")))
            except (ValueError, OSError, NetIntentError) as exc:
                raise ConfigError(f"examples: {exc}") from exc
            examples = [ContextExample(c.intent, c.expected) for c in cases]
        controller = doc.get("controller", {"kind": "sim"})
        if not isinstance(controller, dict) or controller.get("kind", "sim") not in ("sim", "odl", "onos"):
            raise ConfigError("controller.kind must be sim, odl or onos")
        return cls(
            roster=[_endpoint(s, i) for i, s in enumerate(specs)], roster_specs=specs, dialect=dialect,
            controller=controller, context_schedule=schedule, sampling=sampling, assurance=assurance,
            topology_path=path_of("topology"),
            store_path=path_of("store", must_exist=False) or Path(DEFAULT_STORE_PATH),
            sim_state_path=path_of("sim_state", must_exist=False) or Path(DEFAULT_SIM_STATE),
            template_dir=path_of("template_dir"), examples=examples, bench=doc.get("bench", {}),
            base_dir=base_dir,
        )

    def topology(self) -> Topology:
        return Topology.load(self.topology_path) if self.topology_path else Topology.diamond()


class _Runtime:
    """Controller handle; a simulator is loaded from and saved back to its state file."""

    def __init__(self, cfg: AppConfig, kind: Optional[str]):
        self.cfg = cfg
        self.kind = (kind or cfg.controller.get("kind", "sim")).lower()
        self.topology = cfg.topology()
        if self.kind == "sim":
            state_path = cfg.sim_state_path
            if state_path.exists():
                try:
                    state = json.loads(state_path.read_text(encoding="utf-8"))
                except (OSError, json.JSONDecodeError) as exc:
                    raise ConfigError(f"simulator state {state_path} unreadable: {exc}") from exc
                self.controller = SimulatedController.from_state(state)
                self.topology = self.controller.topology
            else:
                self.controller = SimulatedController(self.topology, dialect=cfg.dialect)
        else:
            opts = self.cfg.controller
            if not opts.get("base_url"):
                raise ConfigError(f"controller.base_url is required for {self.kind}")
            creds = tuple(opts["credentials"]) if opts.get("credentials") else None
            self.controller = make_controller(self.kind, opts["base_url"], creds, cfg.dialect,
                                              timeout_s=opts.get("timeout_s", 10))

    def save(self) -> None:
        if isinstance(self.controller, SimulatedController):
            path = self.cfg.sim_state_path
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(self.controller.to_state(), indent=1), encoding="utf-8")

    def traffic(self):
        if isinstance(self.controller, SimulatedController):
            return SimTrafficDriver(self.controller)
        return LiveTrafficDriver(self.topology)


def _translation_config(cfg: AppConfig) -> TranslationConfig:
    if not cfg.roster:
        raise ConfigError("the roster is empty; add at least one model to the config")
    return TranslationConfig(roster=cfg.roster, dialect=cfg.dialect, context_schedule=cfg.context_schedule,
                             example_pool=cfg.examples, sampling=cfg.sampling, template_dir=cfg.template_dir)


def _engine(name: str, semantics: str, cfg: AppConfig):
    if name == "llm":
        if not cfg.roster:
            raise ConfigError("--engine llm needs a roster entry")
        return LlmEngine(sorted(cfg.roster, key=lambda e: e.rank)[0], cfg.dialect, cfg.sampling)
    return OracleEngine(OverlapSemantics(semantics))


# -- subcommands ------------------------------------------------------------

def _translate(args, cfg: AppConfig):
    outcome = translate_intent(args.intent, _translation_config(cfg))
    for i, attempt in enumerate(outcome.trace, 1):
        emit("attempt", {"n": i, **attempt.to_json()})
    if not outcome.ok:
        emit("translation_failed", outcome.result.to_json())
        return EXIT_FAILED, outcome
    return EXIT_OK, outcome


def cmd_translate(args, cfg: AppConfig) -> int:
    code, outcome = _translate(args, cfg)
    if code == EXIT_OK:
        _out(outcome.flow_json, args.json)
    return code


def cmd_activate(args, cfg: AppConfig) -> int:
    code, outcome = _translate(args, cfg)
    if code != EXIT_OK:
        return code
    rt = _Runtime(cfg, args.controller)
    store = IntentStore(cfg.store_path)
    try:
        result = activate(outcome.rule, args.intent, rt.controller, _engine(args.engine, args.semantics, cfg),
                          store, flow_json=outcome.flow_json)
    finally:
        rt.save()
    emit("activation", {"status": result.status.value, "report": result.report})
    _out(result.to_json(cfg.dialect), args.json)
    return EXIT_OK if result.installed else EXIT_FAILED


def cmd_assure(args, cfg: AppConfig) -> int:
    rt = _Runtime(cfg, args.controller)
    store = IntentStore(cfg.store_path)
    translation = _translation_config(cfg) if cfg.roster else None
    endpoint = sorted(cfg.roster, key=lambda e: e.rank)[0] if cfg.roster else None
    traffic = rt.traffic()
    summary: dict = {}
    passes = 0
    try:
        while True:
            passes += 1
            for event in assurance_loop(store, rt.controller, traffic, cfg.assurance, endpoint,
                                        rt.topology, translation):
                emit("assurance", event.to_json())
                summary[f"{event.device_id}/{event.flow_id}"] = event.kind.value
            rt.save()
            if not args.watch or (args.iterations and passes >= args.iterations):
                break
            time.sleep(args.interval)
    except KeyboardInterrupt:
        emit("interrupted", {"passes": passes})
    finally:
        rt.save()
    _out({"passes": passes, "final": summary}, args.json)
    bad = {EventKind.ESCALATED.value, EventKind.ERROR.value, EventKind.FAILED.value}
    return EXIT_FAILED if bad & set(summary.values()) else EXIT_OK


def _read_rule(path: str, dialect: ControllerDialect, device_id: Optional[str]):
    try:
        doc = load_json(Path(path).read_bytes())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    key = ENVELOPES[dialect]
    if isinstance(doc, dict) and key in doc:
        flows = doc[key]
        if not isinstance(flows, list) or not flows:
            raise ConfigError(f"{path}: {key!r} holds no flow")
        doc = flows[0]
    return flow_from_dict(dialect, doc, device_id=device_id)


def cmd_detect(args, cfg: AppConfig) -> int:
    dialect = ControllerDialect.parse(args.dialect) if args.dialect else cfg.dialect
    device = args.device or ("openflow:1" if dialect is ControllerDialect.ODL else None)
    r1 = _read_rule(args.flow1, dialect, device)
    r2 = _read_rule(args.flow2, dialect, device)
    if args.engine == "llm":
        verdict = _engine("llm", args.semantics, cfg).check(r1, r2)
    else:
        verdict = detect_conflict(r1, r2, OverlapSemantics(args.semantics))
    _out(verdict.to_json(), args.json)
    return EXIT_OK


def cmd_bench(args, cfg: AppConfig) -> int:
    b = cfg.bench
    if not b:
        raise ConfigError("the config has no 'bench' section")
    try:
        kind = DatasetKind(b.get("dataset", "intent2flow-odl"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    path = Path(b["path"]) if b.get("path") else bundled_path(kind)
    if not path.is_absolute() and b.get("path"):
        path = cfg.base_dir / path
    try:
        cases = load_dataset(kind, path)
    except OSError as exc:
        raise ConfigError(f"dataset {path}: {exc.strerror or exc}") from exc
    task = b.get("task", "conflict" if kind.is_conflict else "translate")
    roster = []
    for i, spec in enumerate(cfg.roster_specs):
        if spec.get("backend") == "echo" and "answers" not in spec:
            roster.append(echo_endpoint(cases, spec["model"], spec.get("rank", i + 1)))
        else:
            roster.append(cfg.roster[i])
    try:
        bench_cfg = BenchConfig(task, cases, roster, tuple(b.get("contexts", (0,))), b.get("engine", "llm"),
                                b.get("semantics", "wildcard"), cfg.sampling, b.get("parallelism", 1),
                                b.get("mmr_lambda", 0.5), cfg.template_dir, kind.value)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = run_benchmark(bench_cfg)
    out = Path(args.out or b.get("report", "bench_report.json"))
    if not out.is_absolute() and not args.out:
        out = cfg.base_dir / out
    table = out.with_suffix(".txt")
    report.write(out, table)
    emit("bench_report", {"json": str(out), "table": str(table), "rows": len(report.rows)})
    if args.json:
        _out(report.to_json(), True)
    else:
        print(report.render_table(), end="")
    return EXIT_OK


def cmd_sim(args, cfg: AppConfig) -> int:
    if args.topology:
        cfg.topology_path = Path(args.topology)
        if not cfg.topology_path.exists():
            raise ConfigError(f"topology {args.topology} does not exist")
    if args.state:
        cfg.sim_state_path = Path(args.state)
    if args.reset and cfg.sim_state_path.exists():
        cfg.sim_state_path.unlink()
    rt = _Runtime(cfg, "sim")
    if args.reset_counters:
        rt.controller.reset_counters()
    rt.save()
    sim = rt.controller
    doc = {
        "state": str(cfg.sim_state_path),
        "clock": sim.to_state().get("clock", 0.0),
        "devices": {d: len(sim.fetch_installed(d, None)) for d in sim.device_ids},
        "hosts": sorted(sim.topology.hosts),
    }
    emit("sim_ready", {"state": doc["state"]})
    _out(doc, args.json)
    return EXIT_OK


# -- dispatch ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    common.add_argument("--json", action="store_true", help="compact machine-readable stdout")

    p = _Parser(prog="netintent", description="Intent translation, activation and assurance for SDN.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("translate", parents=[common], help="intent to validated flow JSON")
    t.add_argument("intent")

    ctl = _Parser(add_help=False)
    ctl.add_argument("--controller", choices=("sim", "odl", "onos"), help="override controller.kind")

    eng = _Parser(add_help=False)
    eng.add_argument("--engine", choices=("oracle", "llm"), default="oracle")
    eng.add_argument("--semantics", choices=("wildcard", "strict"), default="strict")

    a = sub.add_parser("activate", parents=[common, ctl, eng], help="translate, check conflicts and install")
    a.add_argument("intent")

    s = sub.add_parser("assure", parents=[common, ctl], help="verify installed intents")
    s.add_argument("--watch", action="store_true", help="repeat until interrupted")
    s.add_argument("--interval", type=float, default=30.0, help="seconds between passes")
    s.add_argument("--iterations", type=int, default=0, help="stop after N passes (0: unbounded)")

    d = sub.add_parser("detect", parents=[common], help="conflict verdict for two flow files")
    d.add_argument("flow1")
    d.add_argument("flow2")
    d.add_argument("--engine", choices=("oracle", "llm"), default="oracle")
    d.add_argument("--semantics", choices=("wildcard", "strict"), default="wildcard")
    d.add_argument("--dialect", choices=("odl", "onos"))
    d.add_argument("--device", help="device id for ODL flows (default openflow:1)")

    b = sub.add_parser("bench", parents=[common], help="run the benchmark in the config's bench section")
    b.add_argument("--out", help="report path (a .txt table is written alongside)")

    m = sub.add_parser("sim", parents=[common], help="create or show the simulator state file")
    m.add_argument("--topology", help="topology JSON (default: bundled diamond)")
    m.add_argument("--state", help="state file path")
    m.add_argument("--reset", action="store_true", help="discard existing state")
    m.add_argument("--reset-counters", action="store_true")
    return p


COMMANDS = {"translate": cmd_translate, "activate": cmd_activate, "assure": cmd_assure,
            "detect": cmd_detect, "bench": cmd_bench, "sim": cmd_sim}


def cmd_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = AppConfig.load(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        emit("usage_error", {"message": str(exc)})
        return EXIT_USAGE
    except SystemExit as exc:   # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except NetIntentError as exc:
        emit("error", {"type": type(exc).__name__, "message": str(exc)})
        return EXIT_FAILED
    except Exception as exc:  # exit codes stay total even for bugs
        emit("error", {"type": type(exc).__name__, "message": str(exc)})
        return EXIT_FAILED


def main() -> None:
    sys.exit(cmd_dispatch())


if __name__ == "__main__":
    main()
