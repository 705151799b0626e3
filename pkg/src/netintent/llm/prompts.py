"""Prompt builders for translation, correction, conflict checks, slicing and remediation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from string import Template
from typing import Any, Optional, Sequence

from netintent.errors import TemplateMissing
from netintent.flow_model.types import ControllerDialect
from netintent.llm.gateway import PromptBundle, Role, Segment, Task
from netintent.llm.mmr import ContextExample


@lru_cache(maxsize=None)
def _packaged(name: str) -> Optional[str]:
    path = resources.files("netintent.llm") / "templates" / name
    return path.read_text(encoding="utf-8") if path.is_file() else None


def load_template(name: str, template_dir: Optional[Path] = None) -> Template:
    """Template ``name`` from ``template_dir`` if given there, else the packaged copy."""
    if template_dir is not None:
        candidate = Path(template_dir) / name
        if candidate.is_file():
            return Template(candidate.read_text(encoding="utf-8"))
    text = _packaged(name)
    if text is None:
        raise TemplateMissing(f"no prompt template named {name!r}")
    return Template(text)


def _render(name: str, template_dir: Optional[Path] = None, **values) -> str:
    return load_template(name, template_dir).substitute(**values).rstrip("\n")


def dump(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, indent=2, ensure_ascii=False)


def build_translation_prompt(intent: str, dialect, examples: Sequence[ContextExample] = (),
                             slice_meta=None, template_dir: Optional[Path] = None) -> PromptBundle:
    """Instructions, schema, examples, then the intent.

    Slicing metadata selects the queue-aware schema and adds a context line
    just before the intent.
    """
    d = ControllerDialect.parse(dialect).value
    schema = f"schema_{d}_qos.txt" if slice_meta is not None else f"schema_{d}.txt"
    segs = [
        Segment(Role.SYSTEM, _render(f"translate_{d}.txt", template_dir), "instructions"),
        Segment(Role.SYSTEM, _render(schema, template_dir), "schema"),
    ]
    for ex in examples:
        segs.append(Segment(Role.USER, _render("example.txt", template_dir, intent=ex.input_text,
                                               output=dump(ex.output_json)), "example"))
    if slice_meta is not None:
        segs.append(Segment(Role.USER, _render(
            "slice_context.txt", template_dir,
            **{k: "unknown" if v is None else v for k, v in slice_meta.as_dict().items()}), "slicing"))
    segs.append(Segment(Role.USER, _render("intent.txt", template_dir, intent=intent), "intent"))
    return PromptBundle(tuple(segs), Task.TRANSLATE)


def build_structured_prompt(template: str, intent: str, examples: Sequence[ContextExample] = (),
                            template_dir: Optional[Path] = None) -> PromptBundle:
    """Same layout as a flow-rule prompt for targets without a controller schema."""
    segs = [Segment(Role.SYSTEM, _render(template, template_dir), "instructions")]
    for ex in examples:
        segs.append(Segment(Role.USER, _render("example.txt", template_dir, intent=ex.input_text,
                                               output=dump(ex.output_json)), "example"))
    segs.append(Segment(Role.USER, _render("intent.txt", template_dir, intent=intent), "intent"))
    return PromptBundle(tuple(segs), Task.TRANSLATE)


def with_correction(bundle: PromptBundle, feedback_text: str, previous_output: str,
                    template_dir: Optional[Path] = None) -> PromptBundle:
    """Append the correction block carrying the last attempt's output and its errors."""
    return bundle.extended(Segment(Role.USER, _render("correction.txt", template_dir, previous=previous_output,
                                                      feedback=feedback_text), "correction"))


def build_conflict_prompt(f1: Any, f2: Any, dialect, template_dir: Optional[Path] = None) -> PromptBundle:
    d = ControllerDialect.parse(dialect).value
    text = _render(f"conflict_{d}.txt", template_dir, flow1=dump(f1), flow2=dump(f2))
    return PromptBundle((Segment(Role.USER, text, "conflict"),), Task.CONFLICT_DETECT)


def build_slicing_prompt(intent: str, template_dir: Optional[Path] = None) -> PromptBundle:
    return PromptBundle((Segment(Role.USER, _render("slicing.txt", template_dir, intent=intent), "slicing"),),
                        Task.SLICING_CLASSIFY)


@dataclass(frozen=True)
class RemediationContext:
    intent: str
    flow_rule: Any
    traffic_spec: Any
    deviation: Any
    installed_rules: Sequence[Any]
    queue_stats: Optional[Any]
    controller: str
    feedback: Sequence[Any] = field(default_factory=tuple)


NOT_APPLICABLE = "not applicable"


def build_remediation_prompt(ctx: RemediationContext, template_dir: Optional[Path] = None) -> PromptBundle:
    text = _render(
        "remediate.txt", template_dir,
        intent=ctx.intent,
        flow_rule=dump(ctx.flow_rule),
        traffic_spec=dump(ctx.traffic_spec) if ctx.traffic_spec is not None else NOT_APPLICABLE,
        deviation=dump(ctx.deviation),
        installed_rules=dump(list(ctx.installed_rules)),
        queue_stats=dump(ctx.queue_stats) if ctx.queue_stats else NOT_APPLICABLE,
        controller=ctx.controller,
        feedback=dump(list(ctx.feedback)) if ctx.feedback else "none",
    )
    return PromptBundle((Segment(Role.USER, text, "remediation"),), Task.REMEDIATE)
