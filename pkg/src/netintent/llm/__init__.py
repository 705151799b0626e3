from netintent.llm.extract import extract_json
from netintent.llm.gateway import (
    DEFAULT_SAMPLING,
    Completion,
    EchoBackend,
    HttpBackend,
    LlmEndpoint,
    MockBackend,
    PromptBundle,
    Role,
    SamplingProfile,
    Segment,
    Task,
    complete,
    ordered_roster,
)
from netintent.llm.mmr import ContextExample, select_examples_mmr, similarity, tokens
from netintent.llm.prompts import (
    RemediationContext,
    build_conflict_prompt,
    build_remediation_prompt,
    build_slicing_prompt,
    build_structured_prompt,
    build_translation_prompt,
    load_template,
    with_correction,
)
from netintent.llm.slicing import SliceMeta, classify_slicing, extract_slice_meta, mentions_slicing

__all__ = [
    "extract_json", "DEFAULT_SAMPLING", "Completion", "EchoBackend", "HttpBackend", "LlmEndpoint",
    "MockBackend", "PromptBundle", "Role", "SamplingProfile", "Segment", "Task", "complete",
    "ordered_roster", "ContextExample", "select_examples_mmr", "similarity", "tokens",
    "RemediationContext", "build_conflict_prompt", "build_remediation_prompt", "build_slicing_prompt", "build_structured_prompt",
    "build_translation_prompt", "load_template", "with_correction", "SliceMeta", "classify_slicing",
    "extract_slice_meta", "mentions_slicing",
]
