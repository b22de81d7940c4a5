"""Multi-label music database: ingestion, quantization, and inverted indexing."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional


class AttributeCategory(str, Enum):
    TRACK = "track"
    ARTIST = "artist"
    YEAR = "year"
    POPULARITY = "popularity"
    CULTURE = "culture"
    SIMILAR_TRACK = "similar_track"
    SIMILAR_ARTIST = "similar_artist"
    USER = "user"
    THEME = "theme"
    MOOD = "mood"
    GENRE = "genre"
    INSTRUMENT = "instrument"
    VOCAL = "vocal"
    TEMPO = "tempo"
    KEY_MODE = "key_mode"


# Coarse grouping of the 15 categories; total over the enum.
CATEGORY_GROUPS: dict[AttributeCategory, str] = {
    AttributeCategory.TRACK: "metadata",
    AttributeCategory.ARTIST: "metadata",
    AttributeCategory.YEAR: "metadata",
    AttributeCategory.POPULARITY: "metadata",
    AttributeCategory.CULTURE: "metadata",
    AttributeCategory.SIMILAR_TRACK: "similar_entity",
    AttributeCategory.SIMILAR_ARTIST: "similar_entity",
    AttributeCategory.USER: "user_context",
    AttributeCategory.THEME: "user_context",
    AttributeCategory.MOOD: "user_context",
    AttributeCategory.GENRE: "content",
    AttributeCategory.INSTRUMENT: "content",
    AttributeCategory.VOCAL: "content",
    AttributeCategory.TEMPO: "content",
    AttributeCategory.KEY_MODE: "content",
}

_WS = re.compile(r"\s+")


class ValidationError(ValueError):
    """A record or field failed validation."""


def normalize_tag_value(value: str) -> str:
    """Lowercase, trim, and collapse internal whitespace to single spaces."""
    return _WS.sub(" ", value.strip().lower())


@dataclass(frozen=True, order=True)
class AttributeTag:
    category: AttributeCategory
    value: str

    def __post_init__(self):
        if not self.value:
            raise ValidationError("tag value must be non-empty")
        if "\t" in self.value or "\n" in self.value:
            raise ValidationError("tag value must not contain tabs or newlines")
        object.__setattr__(self, "_hash", hash((self.category, self.value)))

    def __hash__(self):  # cached; tags are hashed heavily during counting
        return self._hash

    @classmethod
    def make(cls, category: str | AttributeCategory, value: str) -> "AttributeTag":
        return cls(AttributeCategory(category), normalize_tag_value(value))

    def as_dict(self) -> dict:
        return {"category": self.category.value, "value": self.value}


@dataclass
class TrackRecord:
    track_id: str
    title: str
    artist_id: str
    artist_name: str
    year: Optional[int] = None
    familiarity_percentile: Optional[float] = None
    bpm: Optional[float] = None
    key_mode: Optional[str] = None
    tags: set[AttributeTag] = field(default_factory=set)

    def validate(self) -> None:
        if not self.track_id:
            raise ValidationError("track_id must be non-empty")
        if self.familiarity_percentile is not None and not (
            0.0 <= self.familiarity_percentile <= 1.0
        ):
            raise ValidationError("familiarity_percentile outside [0,1]")
        if self.bpm is not None and self.bpm <= 0:
            raise ValidationError("bpm must be positive")

    def as_dict(self) -> dict:
        out: dict = {
            "track_id": self.track_id,
            "title": self.title,
            "artist_id": self.artist_id,
            "artist_name": self.artist_name,
        }
        if self.year is not None:
            out["year"] = self.year
        if self.familiarity_percentile is not None:
            out["familiarity_percentile"] = self.familiarity_percentile
        if self.bpm is not None:
            out["bpm"] = self.bpm
        if self.key_mode is not None:
            out["key_mode"] = self.key_mode
        out["tags"] = [t.as_dict() for t in sorted(self.tags)]
        return out


@dataclass
class QuantizationConfig:
    """Quantization of raw metadata fields into tags."""

    popularity_fill_gap: bool = False  # map [0.30, 0.70) to "mid" instead of no tag


def quantize_year(year: int) -> AttributeTag:
    """Map a release year to its decade tag, e.g. 1994 -> (year, "1990s")."""
    if not (1000 <= year <= 2999):
        raise ValidationError(f"year {year} out of range [1000, 2999]")
    decade = (year // 10) * 10
    return AttributeTag(AttributeCategory.YEAR, f"{decade}s")


def quantize_popularity(
    p: float, fill_gap: bool = False
) -> Optional[AttributeTag]:
    """Map an artist-familiarity percentile (0 = most familiar) to a popularity tag.

    Percentiles in [0.30, 0.70) get no tag unless fill_gap is set.
    """
    if not (0.0 <= p <= 1.0):
        raise ValidationError(f"familiarity percentile {p} outside [0,1]")
    if p < 0.10:
        value = "high"
    elif p < 0.30:
        value = "mid"
    elif p >= 0.70:
        value = "low"
    elif fill_gap:
        value = "mid"
    else:
        return None
    return AttributeTag(AttributeCategory.POPULARITY, value)


def quantize_tempo(bpm: float) -> AttributeTag:
    """Map BPM to slow (<70), moderate (70..130 inclusive), or fast (>130)."""
    if bpm <= 0:
        raise ValidationError(f"bpm {bpm} must be positive")
    if bpm < 70:
        value = "slow"
    elif bpm <= 130:
        value = "moderate"
    else:
        value = "fast"
    return AttributeTag(AttributeCategory.TEMPO, value)


@dataclass
class IngestSummary:
    ingested: int = 0
    skipped: int = 0
    skipped_reasons: list[str] = field(default_factory=list)


class MusicDatabase:
    """Immutable-after-build forward and inverted index over track records."""

    def __init__(self, tracks: Iterable[TrackRecord]):
        self.tracks: dict[str, TrackRecord] = {}
        for t in tracks:
            if t.track_id in self.tracks:
                raise ValidationError(f"duplicate track_id {t.track_id!r}")
            self.tracks[t.track_id] = t
        self.inverted: dict[AttributeTag, list[str]] = {}
        for tid in sorted(self.tracks):
            for tag in self.tracks[tid].tags:
                self.inverted.setdefault(tag, []).append(tid)
        # interned tag tuples: one canonical instance per tag so Counter
        # lookups hit the dict identity fast path during frequency counting
        canonical = {tag: tag for tag in self.inverted}
        self._tag_lists: dict[str, tuple[AttributeTag, ...]] = {
            tid: tuple(canonical[tag] for tag in t.tags)
            for tid, t in self.tracks.items()
        }

    def __len__(self) -> int:
        return len(self.tracks)

    def all_ids(self) -> set[str]:
        return set(self.tracks)

    @property
    def vocabulary(self) -> list[tuple[AttributeTag, int]]:
        return sorted(
            ((tag, len(ids)) for tag, ids in self.inverted.items()),
            key=lambda kv: kv[0],
        )

    def posting_list(self, tag: AttributeTag) -> set[str]:
        """Set of track ids carrying the tag; empty for unknown tags."""
        return set(self.inverted.get(tag, ()))

    def attribute_frequencies(
        self,
        track_set: set[str],
        exclude: set[AttributeTag] = frozenset(),
    ) -> dict[AttributeTag, int]:
        """Per-tag count of tracks in track_set, omitting excluded and zero tags."""
        unknown = track_set - self.tracks.keys()
        if unknown:
            raise ValidationError(f"unknown track ids: {sorted(unknown)[:5]}")
        counts: Counter = Counter()
        tag_lists = self._tag_lists
        for tid in track_set:
            counts.update(tag_lists[tid])
        for tag in exclude:
            counts.pop(tag, None)
        return dict(counts)


def parse_track_line(line: str, config: QuantizationConfig) -> TrackRecord:
    """Parse one Track DB JSONL line, validate it, and add quantized tags."""
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValidationError("record is not an object")
    for key in ("track_id", "title", "artist_id", "artist_name"):
        if not isinstance(obj.get(key), str):
            raise ValidationError(f"missing or non-string field {key!r}")
    tags = set()
    for raw in obj.get("tags", []):
        tags.add(AttributeTag.make(raw["category"], raw["value"]))
    rec = TrackRecord(
        track_id=obj["track_id"],
        title=obj["title"],
        artist_id=obj["artist_id"],
        artist_name=obj["artist_name"],
        year=obj.get("year"),
        familiarity_percentile=obj.get("familiarity_percentile"),
        bpm=obj.get("bpm"),
        key_mode=obj.get("key_mode"),
        tags=tags,
    )
    rec.validate()
    if rec.year is not None:
        rec.tags.add(quantize_year(rec.year))
    if rec.familiarity_percentile is not None:
        tag = quantize_popularity(rec.familiarity_percentile, config.popularity_fill_gap)
        if tag is not None:
            rec.tags.add(tag)
    if rec.bpm is not None:
        rec.tags.add(quantize_tempo(rec.bpm))
    return rec


def ingest_tracks(
    path: str, config: QuantizationConfig | None = None
) -> tuple[MusicDatabase, IngestSummary]:
    """Ingest a Track DB JSONL file; invalid or duplicate lines are skipped and counted."""
    config = config or QuantizationConfig()
    summary = IngestSummary()
    records: dict[str, TrackRecord] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = parse_track_line(line, config)
            except (ValidationError, ValueError, KeyError, TypeError) as exc:
                summary.skipped += 1
                summary.skipped_reasons.append(f"line {lineno}: {exc}")
                continue
            if rec.track_id in records:
                summary.skipped += 1
                summary.skipped_reasons.append(
                    f"line {lineno}: duplicate track_id {rec.track_id!r}"
                )
                continue
            records[rec.track_id] = rec
            summary.ingested += 1
    if not records:
        raise ValidationError(f"no valid records in {path}")
    return MusicDatabase(records.values()), summary


def write_tracks(db: MusicDatabase, path: str) -> int:
    """Write the database back out as Track DB JSONL (quantized tags materialized)."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for tid in sorted(db.tracks):
            fh.write(json.dumps(db.tracks[tid].as_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n
