"""Reward providers and feedback records.

The simulated rater is the deterministic stand-in for a human listener; the
evaluation store captures the separate 1-5 questionnaire scores, which are
never fed back into training.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from statistics import fmean
from typing import Callable

from .track import REST, TrackArray

EXPERTISE_LEVELS = ("None", "Beginner", "Intermediate", "Expert")


def simulated_rater(track: TrackArray) -> int:
    """Deterministic 1..10 rating of a track.

    Rewards melodic smoothness, few rests, and rhythmic consistency:

        rating = clamp(round(10 - 2*s1 - 5*s2 - 2*s3), 1, 10)

    where s1 is the mean absolute degree step between successive sounded
    notes (rests are skipped over; 0 when fewer than two notes sound), s2 is
    the fraction of rests, and s3 is (distinct durations - 1) / 3. Rounding
    is half-up. Every term is reachable by some edit action, so ratings can
    climb under training.
    """
    sounded = [note.degree for note in track.melody if note.degree is not REST]
    if len(sounded) < 2:
        smoothness = 0.0
    else:
        smoothness = fmean(abs(b - a) for a, b in zip(sounded, sounded[1:]))
    rests = sum(1 for note in track.melody if note.degree is REST) / len(track.melody)
    variety = (len({note.duration_q for note in track.melody}) - 1) / 3
    score = 10 - 2 * smoothness - 5 * rests - 2 * variety
    return max(1, min(10, math.floor(score + 0.5)))


@dataclass(frozen=True)
class RatingFeedback:
    """One human (or simulated) reward observation."""

    session_id: str
    episode: int
    step: int
    rating: int
    timestamp: float

    def __post_init__(self) -> None:
        if not isinstance(self.rating, int) or isinstance(self.rating, bool):
            raise ValueError("rating must be an integer")
        if not 1 <= self.rating <= 10:
            raise ValueError("rating must be in [1, 10]")


@dataclass(frozen=True)
class EvaluationFeedback:
    """Questionnaire scores collected after a session; stored, never trained on."""

    session_id: str
    musicality: int
    novelty: int
    coherence: int
    comment: str = ""
    expertise: str = "None"

    def validate(self) -> None:
        for name in ("musicality", "novelty", "coherence"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 5:
                raise ValueError(f"{name} must be an integer in [1, 5]")
        if self.expertise not in EXPERTISE_LEVELS:
            raise ValueError(f"expertise must be one of {EXPERTISE_LEVELS}")


class EvaluationStore:
    """Append-only JSON-lines store of evaluation feedback."""

    def __init__(self, path: str | Path, clock: Callable[[], float] = time.time):
        self.path = Path(path)
        self._clock = clock
        self._lock = threading.Lock()
        self._next_id = self._count_records() + 1

    def _count_records(self) -> int:
        if not self.path.exists():
            return 0
        with self.path.open("r", encoding="utf-8") as handle:
            return sum(1 for line in handle if line.strip())

    def append(self, feedback: EvaluationFeedback) -> int:
        """Validate and persist one record, returning its id."""
        feedback.validate()
        with self._lock:
            record_id = self._next_id
            self._next_id += 1
            record = {"id": record_id, **asdict(feedback), "recorded_at": self._clock()}
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record) + "\n")
        return record_id

    def for_session(self, session_id: str) -> list[dict]:
        """All records for a session, in submission order."""
        if not self.path.exists():
            return []
        records = []
        with self.path.open("r", encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                record = json.loads(line)
                if record.get("session_id") == session_id:
                    records.append(record)
        return records
