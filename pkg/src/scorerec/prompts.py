"""Prompt templates for assessment, basic and CI-augmented recommendation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

HISTORY = "<HistoryList>"
TARGET = "<TargetItem>"
BEHAVIORS = "<SimilarBehaviorList>"


class EmptyFieldError(ValueError):
    def __init__(self, field: str):
        super().__init__(f"empty prompt field: {field}")
        self.field = field


@dataclass(frozen=True)
class PromptBundle:
    # the CI template carries one <SimilarBehaviorList> slot expanded to K_s segments
    template_basic: str = (
        "The user has highly rated the following movies: <HistoryList>. "
        "Based on this information, predict whether the user would enjoy the movie titled <TargetItem>. "
        "Respond with either 'Yes' or 'No'."
    )
    template_ci: str = (
        "The user has highly rated the following movies: <HistoryList>. "
        "Other users with similar preferences have given high ratings to the movies: <SimilarBehaviorList>. "
        "Based on this information, predict whether the user would enjoy the movie titled <TargetItem>. "
        "Respond with either 'Yes' or 'No'."
    )
    template_assess: str = (
        "The user has watched the following movies: <HistoryList>. "
        "However, based on this list alone, it is not possible to confidently predict whether they would "
        "enjoy the movie <TargetItem>. What other genres or characteristics related to their preferences, "
        "apart from the given history, could help in making a more informed decision?"
    )

    def __post_init__(self):
        for name, tpl, slots in (
            ("template_basic", self.template_basic, (HISTORY, TARGET)),
            ("template_ci", self.template_ci, (HISTORY, BEHAVIORS, TARGET)),
            ("template_assess", self.template_assess, (HISTORY, TARGET)),
        ):
            for slot in slots:
                if tpl.count(slot) != 1:
                    raise ValueError(f"{name} must contain {slot} exactly once")


DEFAULT_PROMPTS = PromptBundle()


def _fill(template: str, **slots: str) -> str:
    # single pass so placeholder-like text inside titles is never re-expanded
    positions = sorted((template.index(k), k) for k in slots)
    pieces, last = [], 0
    for pos, key in positions:
        pieces.append(template[last:pos])
        pieces.append(slots[key])
        last = pos + len(key)
    pieces.append(template[last:])
    return "".join(pieces)


def _require(value: str, field: str) -> None:
    if not value:
        raise EmptyFieldError(field)


def assessment_prompt(history_text: str, target_item_text: str, prompts: PromptBundle = DEFAULT_PROMPTS) -> str:
    _require(history_text, "history")
    _require(target_item_text, "target_item")
    return _fill(prompts.template_assess, **{HISTORY: history_text, TARGET: target_item_text})


def basic_prompt(history_text: str, target_item_text: str, prompts: PromptBundle = DEFAULT_PROMPTS) -> str:
    _require(history_text, "history")
    _require(target_item_text, "target_item")
    return _fill(prompts.template_basic, **{HISTORY: history_text, TARGET: target_item_text})


def behavior_segment(text: str) -> str:
    return f"[{text}]"


def ci_prompt(
    history_text: str,
    behaviors: Sequence[str],
    target_item_text: str,
    prompts: PromptBundle = DEFAULT_PROMPTS,
) -> str:
    """Behaviors go in rerank order, each bracketed; no behaviors falls back to the basic prompt."""
    _require(history_text, "history")
    _require(target_item_text, "target_item")
    if not behaviors:
        return basic_prompt(history_text, target_item_text, prompts)
    for k, b in enumerate(behaviors, 1):
        _require(b, f"SimilarBehaviorList_{k}")
    joined = ", ".join(behavior_segment(b) for b in behaviors)
    return _fill(prompts.template_ci, **{HISTORY: history_text, BEHAVIORS: joined, TARGET: target_item_text})
