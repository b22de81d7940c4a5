"""Cascading filter programs: representation, evaluation, and the text grammar."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .music_db import AttributeCategory, AttributeTag, MusicDatabase


class FilterMode(str, Enum):
    INCLUDE = "include"
    EXCLUDE = "exclude"
    CONTINUE = "continue"


class ProgramError(ValueError):
    pass


class ParseError(ProgramError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class FilterStep:
    mode: FilterMode
    tag: Optional[AttributeTag] = None

    def __post_init__(self):
        if self.mode is FilterMode.CONTINUE:
            if self.tag is not None:
                raise ProgramError("continue step must not carry a tag")
        elif self.tag is None:
            raise ProgramError(f"{self.mode.value} step requires a tag")

    @classmethod
    def include(cls, category, value) -> "FilterStep":
        return cls(FilterMode.INCLUDE, AttributeTag.make(category, value))

    @classmethod
    def exclude(cls, category, value) -> "FilterStep":
        return cls(FilterMode.EXCLUDE, AttributeTag.make(category, value))

    @classmethod
    def continuation(cls) -> "FilterStep":
        return cls(FilterMode.CONTINUE)

    def as_dict(self) -> Optional[dict]:
        if self.mode is FilterMode.CONTINUE:
            return {"mode": "continue", "category": None, "value": None}
        return {
            "mode": self.mode.value,
            "category": self.tag.category.value,
            "value": self.tag.value,
        }


@dataclass(frozen=True)
class FilterProgram:
    steps: tuple[FilterStep, ...] = ()

    def __post_init__(self):
        seen: set[tuple[FilterMode, AttributeTag]] = set()
        for step in self.steps:
            if step.mode is FilterMode.CONTINUE:
                continue
            key = (step.mode, step.tag)
            if key in seen:
                raise ProgramError(
                    f"tag {step.tag.category.value}:{step.tag.value} repeated "
                    f"in {step.mode.value} steps"
                )
            seen.add(key)

    def extend(self, step: FilterStep) -> "FilterProgram":
        """New program with the step appended; duplicate include/exclude tags rejected."""
        return FilterProgram(self.steps + (step,))

    def tags(self) -> set[AttributeTag]:
        return {s.tag for s in self.steps if s.tag is not None}

    def evaluate(self, db: MusicDatabase) -> set[str]:
        """Apply steps in order starting from the full id set."""
        result = db.all_ids()
        for step in self.steps:
            if step.mode is FilterMode.INCLUDE:
                result &= db.posting_list(step.tag)
            elif step.mode is FilterMode.EXCLUDE:
                result -= db.posting_list(step.tag)
        return result

    def render(self) -> str:
        """Canonical nested-call text form; innermost term is "database"."""
        out = "database"
        for step in self.steps:
            if step.mode is FilterMode.CONTINUE:
                out = f"continue({out})"
            else:
                kw = "filter" if step.mode is FilterMode.INCLUDE else "exclude"
                out = f"{kw}({step.tag.category.value}:{step.tag.value}, {out})"
        return out


def evaluate(db: MusicDatabase, program: FilterProgram) -> set[str]:
    return program.evaluate(db)


def render(program: FilterProgram) -> str:
    return program.render()


_KEYWORD = re.compile(r"(filter|exclude|continue)\(")
_TAG = re.compile(r"([a-z_]+):([^,()]+), ")


def parse(text: str) -> FilterProgram:
    """Parse the canonical rendering back into a program."""
    steps_outer_first: list[FilterStep] = []
    pos = 0
    depth = 0
    while True:
        if text.startswith("database", pos):
            pos += len("database")
            break
        m = _KEYWORD.match(text, pos)
        if not m:
            raise ParseError("expected keyword or 'database'", pos)
        kw = m.group(1)
        pos = m.end()
        depth += 1
        if kw == "continue":
            steps_outer_first.append(FilterStep.continuation())
            continue
        tm = _TAG.match(text, pos)
        if not tm:
            raise ParseError("expected 'category:value, '", pos)
        try:
            category = AttributeCategory(tm.group(1))
        except ValueError:
            raise ParseError(f"unknown category {tm.group(1)!r}", pos) from None
        tag = AttributeTag.make(category, tm.group(2))
        mode = FilterMode.INCLUDE if kw == "filter" else FilterMode.EXCLUDE
        steps_outer_first.append(FilterStep(mode, tag))
        pos = tm.end()
    for _ in range(depth):
        if not text.startswith(")", pos):
            raise ParseError("expected ')'", pos)
        pos += 1
    if pos != len(text):
        raise ParseError("trailing input", pos)
    return FilterProgram(tuple(reversed(steps_outer_first)))


def steps_from_json(items: list[Optional[dict]]) -> FilterProgram:
    steps = []
    for item in items:
        if item is None:
            continue
        mode = FilterMode(item["mode"])
        if mode is FilterMode.CONTINUE:
            steps.append(FilterStep.continuation())
        else:
            steps.append(FilterStep(mode, AttributeTag.make(item["category"], item["value"])))
    return FilterProgram(tuple(steps))
