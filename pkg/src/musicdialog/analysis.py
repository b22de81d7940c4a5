"""Dataset statistics and inter-annotator agreement."""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Hashable, Mapping, Optional, Sequence

from .utterances import DialogueRecord


class AnalysisError(ValueError):
    pass


def krippendorff_alpha(data: Mapping[Hashable, Sequence[Optional[Hashable]]]) -> float:
    """Krippendorff's alpha for nominal labels via the coincidence matrix.

    `data` maps each unit to its per-rater labels (None = missing). Units with
    fewer than two labels are dropped. Returns 1.0 when expected disagreement
    is zero (a single category across the table).
    """
    units = []
    for labels in data.values():
        present = [lab for lab in labels if lab is not None]
        if len(present) >= 2:
            units.append(present)
    if not units:
        raise AnalysisError("no unit has two or more labels")

    coincidences: Counter = Counter()
    totals: Counter = Counter()
    for labels in units:
        m = len(labels)
        for i, a in enumerate(labels):
            for j, b in enumerate(labels):
                if i != j:
                    coincidences[(a, b)] += 1.0 / (m - 1)
    for (a, _b), w in coincidences.items():
        totals[a] += w
    n = sum(totals.values())
    observed_disagreement = sum(w for (a, b), w in coincidences.items() if a != b)
    expected_disagreement = sum(
        totals[a] * totals[b] for a in totals for b in totals if a != b
    ) / (n - 1)
    if expected_disagreement == 0:
        return 1.0
    return 1.0 - observed_disagreement / expected_disagreement


def load_agreement_csv(path: str) -> dict:
    """Read (unit, rater, label) CSV rows into the agreement table."""
    table: dict[str, dict[str, str]] = defaultdict(dict)
    raters: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 3:
                raise AnalysisError(f"expected 3 columns, got {row!r}")
            unit, rater, label = (c.strip() for c in row)
            table[unit][rater] = label
            if rater not in raters:
                raters.append(rater)
    if len(raters) < 2:
        raise AnalysisError("need at least two raters")
    return {
        unit: [cells.get(r) for r in raters] for unit, cells in table.items()
    }


@dataclass
class StatsReport:
    n_dialogues: int
    n_distinct_tracks: int
    vocabulary_size: int
    mean_turns: float
    mean_query_len: float
    mean_response_len: float
    attribute_ratios: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "n_dialogues": self.n_dialogues,
            "n_distinct_tracks": self.n_distinct_tracks,
            "vocabulary_size": self.vocabulary_size,
            "mean_turns": self.mean_turns,
            "mean_query_len": self.mean_query_len,
            "mean_response_len": self.mean_response_len,
            "attribute_ratios": self.attribute_ratios,
        }


def stats_report(dialogues: list[DialogueRecord]) -> StatsReport:
    """Corpus-level counts; utterance lengths in characters, vocabulary in lowercase tokens."""
    if not dialogues:
        raise AnalysisError("no dialogues to analyze")
    tracks: set[str] = set()
    vocab: set[str] = set()
    turn_counts = []
    query_lens = []
    response_lens = []
    category_counts: Counter = Counter()
    for record in dialogues:
        turn_counts.append(len(record.turns))
        for turn in record.turns:
            tracks.update(turn.track_ids)
            query_lens.append(len(turn.user_query))
            response_lens.append(len(turn.system_response))
            for utterance in (turn.user_query, turn.system_response):
                vocab.update(utterance.lower().split())
            step = turn.step
            if step is not None and step["mode"] in ("include", "exclude"):
                category_counts[step["category"]] += 1
    total_steps = sum(category_counts.values())
    ratios = (
        {cat: count / total_steps for cat, count in sorted(category_counts.items())}
        if total_steps
        else {}
    )
    return StatsReport(
        n_dialogues=len(dialogues),
        n_distinct_tracks=len(tracks),
        vocabulary_size=len(vocab),
        mean_turns=sum(turn_counts) / len(turn_counts),
        mean_query_len=sum(query_lens) / len(query_lens),
        mean_response_len=sum(response_lens) / len(response_lens),
        attribute_ratios=ratios,
    )
