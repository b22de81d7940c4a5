import random

import pytest

from musicdialog.music_db import AttributeTag, MusicDatabase, TrackRecord


def tag(category, value):
    return AttributeTag.make(category, value)


def make_track(track_id, tags, title=None, artist="artist-x"):
    return TrackRecord(
        track_id=track_id,
        title=title or f"song {track_id}",
        artist_id=f"a-{artist}",
        artist_name=artist,
        tags={tag(c, v) for c, v in tags},
    )


D0_TAGS = {
    "t1": [("genre", "edm"), ("theme", "party"), ("tempo", "fast")],
    "t2": [("genre", "edm"), ("theme", "party"), ("tempo", "moderate")],
    "t3": [("genre", "edm"), ("mood", "happy"), ("tempo", "fast")],
    "t4": [("genre", "rock"), ("theme", "party")],
    "t5": [("genre", "rock"), ("mood", "sad"), ("tempo", "slow")],
    "t6": [("genre", "edm"), ("theme", "workout"), ("tempo", "fast")],
}


@pytest.fixture
def d0():
    return MusicDatabase(make_track(tid, tags) for tid, tags in D0_TAGS.items())


GENRES = ["edm", "rock", "pop", "jazz", "folk", "metal", "soul", "blues", "punk", "disco"]
THEMES = ["party", "workout", "study", "driving", "sleep", "summer", "rainy day", "cooking"]
MOODS = ["happy", "sad", "calm", "angry", "romantic", "dark", "uplifting", "nostalgic"]
INSTRUMENTS = ["guitar", "piano", "synth", "drums", "saxophone", "violin"]
VOCALS = ["male vocalists", "female vocalists", "instrumental"]
CULTURES = ["american", "british", "korean", "brazilian", "nigerian"]


def synthetic_database(n_tracks=10_000, seed=7, n_artists=40):
    """Deterministic synthetic catalog with correlated tag co-occurrence."""
    rng = random.Random(f"synthdb:{seed}")
    genre_themes = {g: rng.sample(THEMES, 4) for g in GENRES}
    genre_moods = {g: rng.sample(MOODS, 4) for g in GENRES}
    genre_instruments = {g: rng.sample(INSTRUMENTS, 3) for g in GENRES}
    artists = [f"artist {i:03d}" for i in range(n_artists)]
    tracks = []
    for i in range(n_tracks):
        genre = GENRES[i % len(GENRES)]
        tags = {("genre", genre)}
        for _ in range(2):
            pool = genre_themes[genre] if rng.random() < 0.8 else THEMES
            tags.add(("theme", rng.choice(pool)))
        for _ in range(2):
            pool = genre_moods[genre] if rng.random() < 0.8 else MOODS
            tags.add(("mood", rng.choice(pool)))
        tags.add(("instrument", rng.choice(genre_instruments[genre])))
        tags.add(("vocal", rng.choice(VOCALS)))
        tags.add(("culture", rng.choice(CULTURES)))
        artist = rng.choice(artists)
        tags.add(("artist", artist))
        rec = TrackRecord(
            track_id=f"s{i:05d}",
            title=f"tune {i:05d}",
            artist_id=artist.replace(" ", "-"),
            artist_name=artist,
            year=rng.randint(1960, 2009),
            bpm=rng.uniform(60, 180),
            familiarity_percentile=rng.random(),
            tags={tag(c, v) for c, v in tags},
        )
        from musicdialog.music_db import quantize_popularity, quantize_tempo, quantize_year

        rec.tags.add(quantize_year(rec.year))
        rec.tags.add(quantize_tempo(rec.bpm))
        pop = quantize_popularity(rec.familiarity_percentile)
        if pop is not None:
            rec.tags.add(pop)
        tracks.append(rec)
    return MusicDatabase(tracks)


@pytest.fixture(scope="session")
def synth_db():
    return synthetic_database()
