import random
from collections import Counter

import pytest

from musicdialog.filters import FilterMode
from musicdialog.planner import (
    AttributeExhausted,
    DialoguePlan,
    IntentModel,
    PlanConfig,
    PlanError,
    SystemAction,
    UserIntent,
    check_plan,
    sample_next_attribute,
    sample_plan,
    sample_turn_tracks,
    top_k_attribute_pool,
)
from conftest import tag

D0_CFG = PlanConfig(min_initial_support=1, min_candidates=1, tracks_per_turn=2)


class TestSampleTurnTracks:
    def test_clamp(self):
        rng = random.Random(0)
        assert sorted(sample_turn_tracks({"a", "b", "c", "d"}, 10, rng)) == ["a", "b", "c", "d"]

    def test_containment_and_distinct(self):
        rng = random.Random(1)
        pool = {f"t{i}" for i in range(100)}
        got = sample_turn_tracks(pool, 10, rng)
        assert len(got) == 10 and len(set(got)) == 10 and set(got) <= pool

    def test_deterministic(self):
        a = sample_turn_tracks({f"t{i}" for i in range(50)}, 5, random.Random(7))
        b = sample_turn_tracks({f"t{i}" for i in range(50)}, 5, random.Random(7))
        assert a == b

    def test_empty_candidates(self):
        with pytest.raises(PlanError):
            sample_turn_tracks(set(), 3, random.Random(0))


class TestSampleNextAttribute:
    def test_top2_of_d0_subset(self, d0):
        candidates = {"t1", "t2", "t3", "t6"}
        used = {tag("genre", "edm")}
        for seed in range(20):
            got = sample_next_attribute(d0, candidates, used, 2, random.Random(seed))
            assert got in {tag("tempo", "fast"), tag("theme", "party")}

    def test_large_k_any_unused(self, d0):
        candidates = {"t1", "t2"}
        got = sample_next_attribute(d0, candidates, set(), 1000, random.Random(3))
        freqs = d0.attribute_frequencies(candidates)
        assert got in freqs

    def test_exhaustion(self, d0):
        used = set(d0.tracks["t5"].tags)
        with pytest.raises(AttributeExhausted):
            sample_next_attribute(d0, {"t5"}, used, 5, random.Random(0))

    def test_pool_ranking_deterministic(self, d0):
        pool = top_k_attribute_pool(d0, {"t1", "t2", "t3", "t6"}, set(), 3)
        # genre:edm has count 4; fast (3) beats party (2)? fast=t1,t3,t6=3, party=2
        assert pool[0] == tag("genre", "edm")
        assert pool[1] == tag("tempo", "fast")


class TestSamplePlan:
    def test_d0_invariants_and_topk_membership(self, d0):
        cfg = PlanConfig(
            min_turns=2, max_turns=2, tracks_per_turn=2, min_candidates=1,
            min_initial_support=1,
        )
        model = IntentModel()
        for seed in range(30):
            plan = sample_plan(d0, model, cfg, seed)
            check_plan(plan, d0)
            if len(plan.turns) < 2:
                continue
            turn2 = plan.turns[1]
            if turn2.step is not None and turn2.step.tag is not None:
                pre = plan.turns[0].program_after.evaluate(d0)
                pool = top_k_attribute_pool(
                    d0, pre, plan.turns[0].program_after.tags(), cfg.top_k
                )
                assert turn2.step.tag in pool

    def test_single_turn_plan(self, d0):
        cfg = PlanConfig(min_turns=1, max_turns=1, min_initial_support=1, tracks_per_turn=2)
        plan = sample_plan(d0, IntentModel(), cfg, 5)
        assert len(plan.turns) == 1
        assert UserIntent.INITIAL_QUERY in plan.turns[0].user_intents

    def test_degenerate_all_positive(self, d0):
        model = IntentModel(
            p_accept=0.0,
            p_reject=0.0,
            discovery_rates={
                UserIntent.POSITIVE_FILTER: 1.0,
                UserIntent.NEGATIVE_FILTER: 0.0,
                UserIntent.CONTINUE: 0.0,
                UserIntent.ITEM_ATTRIBUTE_QUESTION: 0.0,
            },
        )
        cfg = PlanConfig(min_turns=3, max_turns=3, min_initial_support=1,
                         min_candidates=1, tracks_per_turn=2)
        for seed in range(10):
            plan = sample_plan(d0, model, cfg, seed)
            for turn in plan.turns[1:]:
                assert turn.step is not None and turn.step.mode is FilterMode.INCLUDE

    def test_deterministic(self, d0):
        a = sample_plan(d0, IntentModel(), D0_CFG, 42)
        b = sample_plan(d0, IntentModel(), D0_CFG, 42)
        assert a == b

    def test_empty_db_support_error(self, d0):
        cfg = PlanConfig(min_initial_support=100)
        with pytest.raises(PlanError):
            sample_plan(d0, IntentModel(), cfg, 0)

    def test_synth_plans_valid(self, synth_db):
        cfg = PlanConfig()
        model = IntentModel()
        for seed in range(50):
            plan = sample_plan(synth_db, model, cfg, seed)
            check_plan(plan, synth_db)

    def test_intent_rates_match_configured(self, synth_db):
        cfg = PlanConfig()
        model = IntentModel()
        counts = Counter()
        non_first_turns = 0
        for seed in range(400):
            plan = sample_plan(synth_db, model, cfg, seed)
            for turn in plan.turns[1:]:
                non_first_turns += 1
                for intent in turn.user_intents:
                    counts[intent] += 1
        expected = dict(model.discovery_categorical())
        for intent in (UserIntent.POSITIVE_FILTER, UserIntent.NEGATIVE_FILTER):
            observed = counts[intent] / non_first_turns
            assert abs(observed - expected[intent]) < 0.03
        assert abs(counts[UserIntent.ACCEPT_RESPONSE] / non_first_turns - model.p_accept) < 0.03

    def test_question_turns_reference_shown_tracks(self, synth_db):
        model = IntentModel(
            discovery_rates={
                UserIntent.POSITIVE_FILTER: 0.3,
                UserIntent.NEGATIVE_FILTER: 0.0,
                UserIntent.CONTINUE: 0.0,
                UserIntent.ITEM_ATTRIBUTE_QUESTION: 0.7,
            }
        )
        seen_question = False
        for seed in range(20):
            plan = sample_plan(synth_db, model, PlanConfig(), seed)
            shown = []
            for turn in plan.turns:
                if turn.question is not None:
                    seen_question = True
                    qid, qtag = turn.question
                    assert qid in shown
                    assert qtag in synth_db.tracks[qid].tags
                    assert SystemAction.ITEM_ATTRIBUTE_ANSWER in turn.system_actions
                shown.extend(turn.track_ids)
        assert seen_question


class TestIntentModel:
    def test_rate_validation(self):
        with pytest.raises(PlanError):
            IntentModel(p_greet=1.5)

    def test_categorical_normalizes(self):
        cat = IntentModel().discovery_categorical()
        assert sum(p for _, p in cat) == pytest.approx(1.0)
