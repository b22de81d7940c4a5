"""Symbolic dialogue planning: intent/action slots, attribute cascades, track sampling."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .filters import FilterMode, FilterProgram, FilterStep
from .music_db import AttributeTag, MusicDatabase


class UserIntent(str, Enum):
    INITIAL_QUERY = "initial_query"
    GREETING = "greeting"
    POSITIVE_FILTER = "positive_filter"
    NEGATIVE_FILTER = "negative_filter"
    CONTINUE = "continue"
    ITEM_ATTRIBUTE_QUESTION = "item_attribute_question"
    ACCEPT_RESPONSE = "accept_response"
    REJECT_RESPONSE = "reject_response"


class SystemAction(str, Enum):
    FEEDBACK_REQUEST = "feedback_request"
    DETAIL_ATTRIBUTE_REQUEST = "detail_attribute_request"
    PASSIVE_RECOMMENDATION = "passive_recommendation"
    ACTIVE_RECOMMENDATION = "active_recommendation"
    ITEM_ATTRIBUTE_ANSWER = "item_attribute_answer"
    PARROTING_RESPONSE = "parroting_response"
    SYMPATHETIC_RESPONSE = "sympathetic_response"


class PlanError(ValueError):
    pass


class AttributeExhausted(PlanError):
    """No unused attribute remains for the current candidate set."""


@dataclass
class IntentModel:
    """Per-slot occurrence rates driving turn sampling.

    Discovery rates are renormalized into a categorical over the four
    discovery intents; the remaining rates are independent per-slot draws.
    """

    p_greet: float = 0.65
    p_accept: float = 0.555
    p_reject: float = 0.060
    discovery_rates: dict[UserIntent, float] = field(
        default_factory=lambda: {
            UserIntent.POSITIVE_FILTER: 0.767,
            UserIntent.NEGATIVE_FILTER: 0.037,
            UserIntent.CONTINUE: 0.068,
            UserIntent.ITEM_ATTRIBUTE_QUESTION: 0.002,
        }
    )
    p_sympathetic: float = 0.572
    p_parroting: float = 0.254
    p_feedback_request: float = 0.128
    p_detail_request: float = 0.208

    def __post_init__(self):
        for p in (self.p_greet, self.p_accept, self.p_reject, self.p_sympathetic,
                  self.p_parroting, self.p_feedback_request, self.p_detail_request,
                  *self.discovery_rates.values()):
            if not (0.0 <= p <= 1.0):
                raise PlanError(f"rate {p} outside [0,1]")

    def discovery_categorical(self) -> list[tuple[UserIntent, float]]:
        total = sum(self.discovery_rates.values())
        if total <= 0:
            raise PlanError("discovery rates sum to zero")
        return [(intent, r / total) for intent, r in self.discovery_rates.items()]


@dataclass
class PlanConfig:
    min_turns: int = 3
    max_turns: int = 7
    tracks_per_turn: int = 10
    top_k: int = 20
    min_candidates: int = 3
    max_resample: int = 10
    min_initial_support: int = 20


@dataclass
class TurnPlan:
    turn_index: int
    user_intents: list[UserIntent]
    system_actions: list[SystemAction]
    step: Optional[FilterStep]
    program_after: FilterProgram
    candidate_count: int
    track_ids: list[str]
    question: Optional[tuple[str, AttributeTag]] = None  # (track_id, tag) for attribute questions


@dataclass
class DialoguePlan:
    dialogue_id: str
    seed: int
    turns: list[TurnPlan]


def sample_turn_tracks(candidates: set[str], n: int, rng: random.Random) -> list[str]:
    """min(n, |candidates|) distinct ids uniformly without replacement."""
    if not candidates:
        raise PlanError("cannot sample tracks from an empty candidate set")
    if n < 1:
        raise PlanError("n must be >= 1")
    pool = sorted(candidates)
    return rng.sample(pool, min(n, len(pool)))


def top_k_attribute_pool(
    db: MusicDatabase, candidates: set[str], used: set[AttributeTag], k: int
) -> list[AttributeTag]:
    """The k most frequent unused tags in the candidate set, deterministically ranked."""
    counts = db.attribute_frequencies(candidates, exclude=used)
    ranked = sorted(
        counts, key=lambda t: (-counts[t], t.category.value, t.value)
    )
    return ranked[:k]


def sample_next_attribute(
    db: MusicDatabase,
    candidates: set[str],
    used: set[AttributeTag],
    k: int,
    rng: random.Random,
) -> AttributeTag:
    """Uniform draw from the top-k co-occurring unused tags of the candidate set."""
    if not candidates:
        raise PlanError("candidate set is empty")
    pool = top_k_attribute_pool(db, candidates, used, k)
    if not pool:
        raise AttributeExhausted("no unused attributes remain for this candidate set")
    return rng.choice(pool)


def _weighted_choice(rng: random.Random, options: list[tuple[UserIntent, float]]) -> UserIntent:
    x = rng.random()
    cum = 0.0
    for intent, p in options:
        cum += p
        if x < cum:
            return intent
    return options[-1][0]


def _sample_discovery_step(
    db: MusicDatabase,
    candidates: set[str],
    program: FilterProgram,
    intent: UserIntent,
    cfg: PlanConfig,
    rng: random.Random,
) -> Optional[tuple[UserIntent, Optional[FilterStep], set[str]]]:
    """Resolve a discovery intent into a concrete step and the resulting candidate set.

    Returns None when a positive step cannot keep the candidate set above the
    minimum threshold (the dialogue then truncates). Infeasible negative steps
    fall back to a continue step.
    """
    used = program.tags()
    if intent is UserIntent.CONTINUE:
        return intent, FilterStep.continuation(), candidates
    if intent is UserIntent.ITEM_ATTRIBUTE_QUESTION:
        return intent, None, candidates

    mode = FilterMode.INCLUDE if intent is UserIntent.POSITIVE_FILTER else FilterMode.EXCLUDE
    # Resample within the same top-k pool so every chosen attribute stays a
    # member of the pre-step candidate set's top-k frequency ranking.
    pool = top_k_attribute_pool(db, candidates, used, cfg.top_k)
    for _ in range(cfg.max_resample):
        if not pool:
            break
        tag = rng.choice(pool)
        pool.remove(tag)
        posting = db.posting_list(tag)
        result = candidates & posting if mode is FilterMode.INCLUDE else candidates - posting
        if len(result) >= cfg.min_candidates:
            return intent, FilterStep(mode, tag), result
    if mode is FilterMode.EXCLUDE:
        return UserIntent.CONTINUE, FilterStep.continuation(), candidates
    return None


def _system_actions(
    model: IntentModel,
    user_intents: list[UserIntent],
    step: Optional[FilterStep],
    rng: random.Random,
) -> list[SystemAction]:
    actions: list[SystemAction] = []
    discovery = {
        UserIntent.INITIAL_QUERY,
        UserIntent.POSITIVE_FILTER,
        UserIntent.NEGATIVE_FILTER,
        UserIntent.CONTINUE,
    }
    asked_question = UserIntent.ITEM_ATTRIBUTE_QUESTION in user_intents
    has_query = any(i in discovery for i in user_intents)
    recommend = (
        SystemAction.PASSIVE_RECOMMENDATION if has_query else SystemAction.ACTIVE_RECOMMENDATION
    )
    x = rng.random()
    if x < model.p_sympathetic:
        actions.append(SystemAction.SYMPATHETIC_RESPONSE)
    elif x < model.p_sympathetic + model.p_parroting:
        actions.append(SystemAction.PARROTING_RESPONSE)
    actions.append(recommend)
    if asked_question:
        actions.append(SystemAction.ITEM_ATTRIBUTE_ANSWER)
    if rng.random() < model.p_feedback_request:
        actions.append(SystemAction.FEEDBACK_REQUEST)
    on_continue_or_active = (
        (step is not None and step.mode is FilterMode.CONTINUE)
        or recommend is SystemAction.ACTIVE_RECOMMENDATION
    )
    if on_continue_or_active and rng.random() < model.p_detail_request:
        actions.append(SystemAction.DETAIL_ATTRIBUTE_REQUEST)
    return actions


def sample_plan(
    db: MusicDatabase,
    model: IntentModel,
    cfg: PlanConfig,
    seed: int,
    dialogue_id: str = "",
) -> DialoguePlan:
    """Sample one complete symbolic dialogue plan; fully deterministic given seed."""
    if len(db) == 0:
        raise PlanError("database is empty")
    rng = random.Random(f"plan:{seed}")
    eligible = [
        tag for tag, ids in sorted(db.inverted.items())
        if len(ids) >= cfg.min_initial_support
    ]
    if not eligible:
        raise PlanError(
            f"no tag has posting-list support >= {cfg.min_initial_support}"
        )
    n_turns = rng.randint(cfg.min_turns, cfg.max_turns)

    initial_tag = rng.choice(eligible)
    program = FilterProgram().extend(FilterStep(FilterMode.INCLUDE, initial_tag))
    candidates = program.evaluate(db)
    intents = [UserIntent.INITIAL_QUERY]
    if rng.random() < model.p_greet:
        intents.insert(0, UserIntent.GREETING)
    turns = [
        TurnPlan(
            turn_index=1,
            user_intents=intents,
            system_actions=_system_actions(model, intents, program.steps[-1], rng),
            step=program.steps[-1],
            program_after=program,
            candidate_count=len(candidates),
            track_ids=sample_turn_tracks(candidates, cfg.tracks_per_turn, rng),
        )
    ]

    discovery_options = model.discovery_categorical()
    shown: list[str] = list(turns[0].track_ids)
    for turn_index in range(2, n_turns + 1):
        intents = []
        x = rng.random()
        if x < model.p_accept:
            intents.append(UserIntent.ACCEPT_RESPONSE)
        elif x < model.p_accept + model.p_reject:
            intents.append(UserIntent.REJECT_RESPONSE)
        discovery_intent = _weighted_choice(rng, discovery_options)
        resolved = _sample_discovery_step(
            db, candidates, program, discovery_intent, cfg, rng
        )
        if resolved is None:
            break  # cannot refine further; truncate the dialogue
        intent, step, new_candidates = resolved
        intents.append(intent)
        question = None
        if intent is UserIntent.ITEM_ATTRIBUTE_QUESTION:
            track_id = rng.choice(shown)
            track_tags = sorted(db.tracks[track_id].tags)
            if track_tags:
                question = (track_id, rng.choice(track_tags))
        if step is not None:
            program = program.extend(step)
        candidates = new_candidates
        track_ids = sample_turn_tracks(candidates, cfg.tracks_per_turn, rng)
        shown.extend(track_ids)
        turns.append(
            TurnPlan(
                turn_index=turn_index,
                user_intents=intents,
                system_actions=_system_actions(model, intents, step, rng),
                step=step,
                program_after=program,
                candidate_count=len(candidates),
                track_ids=track_ids,
                question=question,
            )
        )
    return DialoguePlan(dialogue_id=dialogue_id or f"dlg-{seed}", seed=seed, turns=turns)


def check_plan(plan: DialoguePlan, db: MusicDatabase) -> None:
    """Assert the structural invariants of a plan; raises PlanError on violation."""
    if not plan.turns:
        raise PlanError("plan has no turns")
    if UserIntent.INITIAL_QUERY not in plan.turns[0].user_intents:
        raise PlanError("turn 1 must contain initial_query")
    prev_program: Optional[FilterProgram] = None
    prev_count = None
    for turn in plan.turns:
        step = turn.step
        has = lambda i: i in turn.user_intents  # noqa: E731
        if step is not None and step.mode is FilterMode.INCLUDE:
            if not (has(UserIntent.POSITIVE_FILTER) or has(UserIntent.INITIAL_QUERY)):
                raise PlanError(f"turn {turn.turn_index}: include step without filter intent")
        if has(UserIntent.POSITIVE_FILTER) and (step is None or step.mode is not FilterMode.INCLUDE):
            raise PlanError(f"turn {turn.turn_index}: positive_filter without include step")
        if has(UserIntent.NEGATIVE_FILTER) != (step is not None and step.mode is FilterMode.EXCLUDE):
            raise PlanError(f"turn {turn.turn_index}: negative_filter/exclude mismatch")
        if has(UserIntent.CONTINUE) != (step is not None and step.mode is FilterMode.CONTINUE):
            raise PlanError(f"turn {turn.turn_index}: continue intent/step mismatch")
        if not turn.user_intents or not turn.system_actions:
            raise PlanError(f"turn {turn.turn_index}: empty intents or actions")
        candidates = turn.program_after.evaluate(db)
        if len(candidates) != turn.candidate_count:
            raise PlanError(f"turn {turn.turn_index}: stale candidate_count")
        if set(turn.track_ids) - candidates:
            raise PlanError(f"turn {turn.turn_index}: sampled tracks outside candidates")
        if len(set(turn.track_ids)) != len(turn.track_ids):
            raise PlanError(f"turn {turn.turn_index}: duplicate track ids")
        if prev_program is not None:
            if turn.program_after.steps[: len(prev_program.steps)] != prev_program.steps:
                raise PlanError(f"turn {turn.turn_index}: program not prefix-consistent")
            if turn.candidate_count > prev_count:
                raise PlanError(f"turn {turn.turn_index}: candidate set grew")
            if step is not None and step.mode is FilterMode.CONTINUE and turn.candidate_count != prev_count:
                raise PlanError(f"turn {turn.turn_index}: continue changed candidates")
        prev_program = turn.program_after
        prev_count = turn.candidate_count
