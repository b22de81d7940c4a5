import random

import pytest
from hypothesis import given, settings, strategies as st

from musicdialog.filters import (
    FilterMode,
    FilterProgram,
    FilterStep,
    ParseError,
    ProgramError,
    parse,
    render,
)
from musicdialog.music_db import AttributeCategory, AttributeTag, MusicDatabase
from conftest import make_track, tag


def program(*steps):
    return FilterProgram(tuple(steps))


class TestEvaluate:
    def test_fig2_cascade(self, d0):
        p = program(
            FilterStep.include("genre", "edm"),
            FilterStep.include("theme", "party"),
            FilterStep.include("tempo", "fast"),
        )
        assert p.evaluate(d0) == {"t1"}

    def test_empty_program_is_identity(self, d0):
        assert program().evaluate(d0) == set(d0.tracks)

    def test_exclude(self, d0):
        p = program(FilterStep.include("genre", "edm"), FilterStep.exclude("theme", "party"))
        assert p.evaluate(d0) == {"t3", "t6"}

    def test_unknown_tag_yields_empty(self, d0):
        p = program(FilterStep.include("genre", "no such genre"))
        assert p.evaluate(d0) == set()

    def test_continue_is_noop(self, d0):
        base = program(FilterStep.include("genre", "edm"))
        extended = base.extend(FilterStep.continuation())
        assert base.evaluate(d0) == extended.evaluate(d0)

    def test_monotonicity(self, d0):
        p = FilterProgram()
        prev = p.evaluate(d0)
        for step in (
            FilterStep.include("genre", "edm"),
            FilterStep.exclude("theme", "workout"),
            FilterStep.continuation(),
            FilterStep.include("tempo", "fast"),
        ):
            p = p.extend(step)
            cur = p.evaluate(d0)
            assert cur <= prev
            if step.mode is FilterMode.CONTINUE:
                assert cur == prev
            prev = cur

    def test_include_order_independence(self, d0):
        steps = [
            FilterStep.include("genre", "edm"),
            FilterStep.include("tempo", "fast"),
            FilterStep.include("theme", "party"),
        ]
        results = {
            frozenset(program(*perm).evaluate(d0))
            for perm in (steps, steps[::-1], [steps[1], steps[0], steps[2]])
        }
        assert len(results) == 1


class TestExtend:
    def test_append(self):
        p = FilterProgram().extend(FilterStep.include("genre", "edm"))
        assert len(p.steps) == 1

    def test_value_semantics(self):
        p = FilterProgram()
        p.extend(FilterStep.include("genre", "edm"))
        assert p.steps == ()

    def test_duplicate_include_rejected(self):
        p = FilterProgram().extend(FilterStep.include("genre", "edm"))
        with pytest.raises(ProgramError):
            p.extend(FilterStep.include("genre", "edm"))

    def test_same_tag_include_and_exclude_allowed(self):
        p = FilterProgram().extend(FilterStep.include("genre", "edm"))
        p.extend(FilterStep.exclude("genre", "edm"))

    def test_continue_step_shape(self):
        with pytest.raises(ProgramError):
            FilterStep(FilterMode.CONTINUE, AttributeTag.make("genre", "edm"))
        with pytest.raises(ProgramError):
            FilterStep(FilterMode.INCLUDE, None)


class TestGrammar:
    def test_empty_renders_database(self):
        assert render(FilterProgram()) == "database"

    def test_paper_program_text(self):
        p = program(
            FilterStep.include("genre", "edm"),
            FilterStep.include("theme", "party"),
            FilterStep.include("tempo", "fast"),
        )
        assert render(p) == "filter(tempo:fast, filter(theme:party, filter(genre:edm, database)))"

    def test_parse_single(self):
        p = parse("filter(genre:edm, database)")
        assert p.steps == (FilterStep.include("genre", "edm"),)

    def test_exclude_and_continue_render(self):
        p = program(FilterStep.exclude("vocal", "female vocalists"), FilterStep.continuation())
        assert render(p) == "continue(exclude(vocal:female vocalists, database))"

    def test_parse_failure_offset(self):
        with pytest.raises(ParseError) as err:
            parse("filter(genre:edm, databas)")
        assert err.value.offset >= 0

    @given(
        st.lists(
            st.one_of(
                st.tuples(
                    st.sampled_from([FilterMode.INCLUDE, FilterMode.EXCLUDE]),
                    st.sampled_from(list(AttributeCategory)),
                    st.text(alphabet="abcdefghij ", min_size=1, max_size=8),
                ),
                st.none(),
            ),
            max_size=6,
        )
    )
    @settings(max_examples=200)
    def test_parse_render_round_trip(self, raw_steps):
        steps = []
        seen = set()
        for item in raw_steps:
            if item is None:
                steps.append(FilterStep.continuation())
                continue
            mode, category, value = item
            value = value.strip()
            if not value:
                continue
            a_tag = AttributeTag.make(category, value)
            if (mode, a_tag) in seen:
                continue
            seen.add((mode, a_tag))
            steps.append(FilterStep(mode, a_tag))
        p = program(*steps)
        assert parse(render(p)) == p


class TestBruteForceOracle:
    @staticmethod
    def brute_force(db, p):
        out = set()
        for tid, track in db.tracks.items():
            keep = True
            for step in p.steps:
                if step.mode is FilterMode.INCLUDE and step.tag not in track.tags:
                    keep = False
                elif step.mode is FilterMode.EXCLUDE and step.tag in track.tags:
                    keep = False
            if keep:
                out.add(tid)
        return out

    def test_random_programs_match_brute_force(self):
        rng = random.Random(99)
        vocab = [tag("genre", f"g{i}") for i in range(6)] + [
            tag("mood", f"m{i}") for i in range(6)
        ]
        for trial in range(30):
            tracks = [
                make_track(f"x{i}", set()) for i in range(rng.randint(5, 60))
            ]
            for t in tracks:
                t.tags.update(rng.sample(vocab, rng.randint(1, 6)))
            db = MusicDatabase(tracks)
            for _ in range(10):
                steps, seen = [], set()
                for _ in range(rng.randint(0, 5)):
                    mode = rng.choice([FilterMode.INCLUDE, FilterMode.EXCLUDE, FilterMode.CONTINUE])
                    if mode is FilterMode.CONTINUE:
                        steps.append(FilterStep.continuation())
                        continue
                    a_tag = rng.choice(vocab)
                    if (mode, a_tag) in seen:
                        continue
                    seen.add((mode, a_tag))
                    steps.append(FilterStep(mode, a_tag))
                p = program(*steps)
                assert p.evaluate(db) == self.brute_force(db, p)
