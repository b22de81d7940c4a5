"""Utterance generation: prompt building, template and remote backends, JSONL emit."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Protocol

import httpx

from .filters import FilterMode
from .music_db import AttributeTag, MusicDatabase
from .planner import DialoguePlan, SystemAction, TurnPlan, UserIntent


class GenerationError(RuntimeError):
    pass


@dataclass
class PromptBundle:
    system_prompt: str
    payload: str
    output_instructions: str

    def as_messages(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system_prompt},
            {"role": "user", "content": self.payload + "\n\n" + self.output_instructions},
        ]


@dataclass
class DialogueTurn:
    turn_index: int
    user_intents: list[UserIntent]
    system_actions: list[SystemAction]
    step: Optional[dict]
    program: str
    user_query: str
    system_response: str
    track_ids: list[str]


@dataclass
class DialogueRecord:
    dialogue_id: str
    seed: int
    backend: str
    turns: list[DialogueTurn]
    created_at: Optional[float] = None  # not serialized; emit schema is timestamp-free

    def as_dict(self) -> dict:
        return {
            "dialogue_id": self.dialogue_id,
            "seed": self.seed,
            "backend": self.backend,
            "turns": [
                {
                    "turn_index": t.turn_index,
                    "user_intents": [i.value for i in t.user_intents],
                    "system_actions": [a.value for a in t.system_actions],
                    "step": t.step,
                    "program": t.program,
                    "user_query": t.user_query,
                    "system_response": t.system_response,
                    "track_ids": t.track_ids,
                }
                for t in self.turns
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DialogueRecord":
        return cls(
            dialogue_id=obj["dialogue_id"],
            seed=obj["seed"],
            backend=obj["backend"],
            turns=[
                DialogueTurn(
                    turn_index=t["turn_index"],
                    user_intents=[UserIntent(i) for i in t["user_intents"]],
                    system_actions=[SystemAction(a) for a in t["system_actions"]],
                    step=t["step"],
                    program=t["program"],
                    user_query=t["user_query"],
                    system_response=t["system_response"],
                    track_ids=list(t["track_ids"]),
                )
                for t in obj["turns"]
            ],
        )


def _load_prompt() -> str:
    return resources.files("musicdialog").joinpath("prompts/dialogue_prompt.txt").read_text(
        encoding="utf-8"
    )


def build_prompt(plan: DialoguePlan, db: MusicDatabase) -> PromptBundle:
    """Deterministic prompt describing every turn of the plan, in order."""
    blocks = []
    for turn in plan.turns:
        for tid in turn.track_ids:
            if tid not in db.tracks:
                raise GenerationError(f"track id {tid!r} missing from database")
        lines = [f"Turn {turn.turn_index}:"]
        lines.append("  user intents: " + ", ".join(i.value for i in turn.user_intents))
        lines.append("  system actions: " + ", ".join(a.value for a in turn.system_actions))
        if turn.step is None:
            lines.append("  attribute step: none")
        elif turn.step.mode is FilterMode.CONTINUE:
            lines.append("  attribute step: continue (keep current constraints)")
        else:
            word = "add" if turn.step.mode is FilterMode.INCLUDE else "exclude"
            tag = turn.step.tag
            lines.append(f"  attribute step: {word} {tag.category.value}:{tag.value}")
        if turn.question is not None:
            qid, qtag = turn.question
            lines.append(
                f"  question about: {db.tracks[qid].title} "
                f"({qtag.category.value}:{qtag.value})"
            )
        lines.append(f"  program: {turn.program_after.render()}")
        tracks = ", ".join(
            f"{db.tracks[tid].title} by {db.tracks[tid].artist_name}"
            for tid in turn.track_ids
        )
        lines.append(f"  tracks shown: {tracks}")
        blocks.append("\n".join(lines))
    return PromptBundle(
        system_prompt=_load_prompt(),
        payload="\n\n".join(blocks),
        output_instructions=(
            f"Write exactly {len(plan.turns)} JSON objects, one per line, "
            'each {"user_query": "...", "system_response": "..."}.'
        ),
    )


class GenerationBackend(Protocol):
    name: str

    def generate_utterances(
        self, plan: DialoguePlan, db: MusicDatabase
    ) -> list[tuple[str, str]]:
        """Return one (user_query, system_response) pair per turn."""
        ...


def _tag_phrase(tag: AttributeTag) -> str:
    return f"{tag.value} {tag.category.value.replace('_', ' ')}"


class TemplateBackend:
    """Deterministic slot-filled utterances; offline test backend only."""

    name = "template"

    def generate_utterances(self, plan, db) -> list[tuple[str, str]]:
        out = []
        for turn in plan.turns:
            out.append((self._user(turn, db), self._system(turn, db)))
        return out

    def _user(self, turn: TurnPlan, db: MusicDatabase) -> str:
        parts = []
        if UserIntent.GREETING in turn.user_intents:
            parts.append("Hello!")
        if UserIntent.ACCEPT_RESPONSE in turn.user_intents:
            parts.append("Thanks, these are great.")
        if UserIntent.REJECT_RESPONSE in turn.user_intents:
            parts.append("These are not quite what I wanted.")
        if UserIntent.INITIAL_QUERY in turn.user_intents:
            parts.append("Hi, I want to make a playlist.")
        step = turn.step
        if step is not None and step.mode is FilterMode.INCLUDE:
            parts.append(f"Could you add some {_tag_phrase(step.tag)} to the playlist?")
        elif step is not None and step.mode is FilterMode.EXCLUDE:
            parts.append(f"Please leave out any {_tag_phrase(step.tag)} tracks.")
        elif UserIntent.CONTINUE in turn.user_intents:
            parts.append("Those are good. More like these would be great.")
        if UserIntent.ITEM_ATTRIBUTE_QUESTION in turn.user_intents:
            if turn.question is not None:
                qid, qtag = turn.question
                parts.append(
                    f"What is the {qtag.category.value.replace('_', ' ')} of "
                    f"{db.tracks[qid].title}?"
                )
            else:
                parts.append("Can you tell me more about one of these tracks?")
        return " ".join(parts)

    def _system(self, turn: TurnPlan, db: MusicDatabase) -> str:
        parts = []
        if SystemAction.SYMPATHETIC_RESPONSE in turn.system_actions:
            parts.append("Great choice!")
        step = turn.step
        if SystemAction.PARROTING_RESPONSE in turn.system_actions and step is not None and step.tag is not None:
            parts.append(f"Some {_tag_phrase(step.tag)} coming right up.")
        if SystemAction.ITEM_ATTRIBUTE_ANSWER in turn.system_actions and turn.question is not None:
            qid, qtag = turn.question
            parts.append(
                f"The {qtag.category.value.replace('_', ' ')} of "
                f"{db.tracks[qid].title} is {qtag.value}."
            )
        titles = ", ".join(db.tracks[tid].title for tid in turn.track_ids[:3])
        if SystemAction.ACTIVE_RECOMMENDATION in turn.system_actions:
            parts.append(f"I went ahead and added a few more: {titles}.")
        else:
            parts.append(f"Here are some picks: {titles}.")
        if SystemAction.FEEDBACK_REQUEST in turn.system_actions:
            parts.append("What do you think of these?")
        if SystemAction.DETAIL_ATTRIBUTE_REQUEST in turn.system_actions:
            parts.append("Any particular artist or mood you want next?")
        return " ".join(parts)


@dataclass
class RemoteBackendConfig:
    endpoint: str
    model: str
    timeout: float = 60.0
    temperature: float = 1.0
    max_retries: int = 3
    token_env: str = "MDGEN_LLM_TOKEN"


class RemoteBackend:
    """Chat-completion-compatible HTTP backend; one request per dialogue."""

    name = "llm"

    def __init__(self, config: RemoteBackendConfig, client: httpx.Client | None = None):
        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout)

    def generate_utterances(self, plan, db) -> list[tuple[str, str]]:
        prompt = build_prompt(plan, db)
        headers = {}
        token = os.environ.get(self.config.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        last_error: Exception | None = None
        for _ in range(self.config.max_retries):
            try:
                resp = self._client.post(
                    self.config.endpoint,
                    json={
                        "model": self.config.model,
                        "temperature": self.config.temperature,
                        "messages": prompt.as_messages(),
                    },
                    headers=headers,
                )
                resp.raise_for_status()
                content = resp.json()["choices"][0]["message"]["content"]
                return self._parse(content, len(plan.turns))
            except (httpx.HTTPError, GenerationError, KeyError, ValueError) as exc:
                last_error = exc
        raise GenerationError(f"remote generation failed after retries: {last_error}")

    @staticmethod
    def _parse(content: str, n_turns: int) -> list[tuple[str, str]]:
        pairs = []
        for line in content.splitlines():
            line = line.strip()
            if not line or not line.startswith("{"):
                continue
            obj = json.loads(line)
            pairs.append((str(obj["user_query"]), str(obj["system_response"])))
        if len(pairs) != n_turns:
            raise GenerationError(
                f"model returned {len(pairs)} turn objects, expected {n_turns}"
            )
        for u, s in pairs:
            if not u or not s:
                raise GenerationError("empty utterance in model output")
        return pairs


def generate(backend: GenerationBackend, plan: DialoguePlan, db: MusicDatabase) -> DialogueRecord:
    """Realize a plan into a dialogue record via the given backend."""
    pairs = backend.generate_utterances(plan, db)
    if len(pairs) != len(plan.turns):
        raise GenerationError("backend returned wrong number of turns")
    turns = []
    for turn, (user_query, system_response) in zip(plan.turns, pairs):
        turns.append(
            DialogueTurn(
                turn_index=turn.turn_index,
                user_intents=list(turn.user_intents),
                system_actions=list(turn.system_actions),
                step=turn.step.as_dict() if turn.step is not None else None,
                program=turn.program_after.render(),
                user_query=user_query,
                system_response=system_response,
                track_ids=list(turn.track_ids),
            )
        )
    return DialogueRecord(
        dialogue_id=plan.dialogue_id,
        seed=plan.seed,
        backend=backend.name,
        turns=turns,
        created_at=time.time(),
    )


@dataclass
class GenerationStats:
    requested: int = 0
    generated: int = 0
    dropped: int = 0


def generate_many(
    backend: GenerationBackend,
    plans: list[DialoguePlan],
    db: MusicDatabase,
    stats: GenerationStats | None = None,
) -> list[DialogueRecord]:
    """Generate records for many plans; failed dialogues are dropped and counted."""
    stats = stats if stats is not None else GenerationStats()
    records = []
    for plan in plans:
        stats.requested += 1
        try:
            records.append(generate(backend, plan, db))
            stats.generated += 1
        except GenerationError:
            stats.dropped += 1
    return records


def emit_jsonl(records: list[DialogueRecord], path: str) -> int:
    """One JSON object per line, stable field order, UTF-8."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.as_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n


def load_jsonl(path: str) -> list[DialogueRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(DialogueRecord.from_dict(json.loads(line)))
    return records
