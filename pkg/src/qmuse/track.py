"""Track arrays: the composition state the agent edits, plus state encoding."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .theory import SCALE_INTERVALS, Scale, generate_scale, parse_note

# Degree sentinel for a removed melody note. Rests keep their duration and
# cannot be restored; pitch actions on them are no-ops.
REST = None

ACTIONS = (0, 1, 2, 3, 4, 5)

# The two allowed percussion voices: General MIDI kick and snare.
PERC_PITCHES = (36, 38)

MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class MelodyNote:
    """One melody slot: a scale degree (or REST) and a duration.

    Durations are stored as quarter-beat integers 1..4 so equality and state
    encoding never touch floating point; `duration` renders the 0.25-step
    beat value.
    """

    degree: int | None
    duration_q: int

    @property
    def duration(self) -> float:
        return self.duration_q / 4

    def __post_init__(self) -> None:
        if self.duration_q not in (1, 2, 3, 4):
            raise ValueError(f"duration_q must be 1..4, got {self.duration_q}")
        if self.degree is not REST and self.degree < 0:
            raise ValueError(f"degree must be >= 0 or REST, got {self.degree}")


@dataclass(frozen=True)
class TrackArray:
    """A full composition state: scale, melody slots, percussion selectors."""

    scale: Scale
    melody: tuple[MelodyNote, ...]
    percussion: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.percussion) != 2 * len(self.melody):
            raise ValueError("percussion length must be twice the melody length")
        for note in self.melody:
            if note.degree is not REST and note.degree >= len(self.scale.pitches):
                raise ValueError(f"degree {note.degree} outside the scale")
        for selector in self.percussion:
            if selector not in (0, 1):
                raise ValueError(f"percussion selector must be 0 or 1, got {selector}")


@dataclass(frozen=True)
class GenConfig:
    """User-facing generation parameters."""

    base_note: str = "C4"
    scale_type: str = "major"
    track_length: int = 8
    tempo_bpm: int = 120
    volume: int = 100
    seed: int = 0

    def validate(self) -> None:
        parse_note(self.base_note)
        if self.scale_type not in SCALE_INTERVALS:
            raise ValueError(
                f"scale_type must be one of {sorted(SCALE_INTERVALS)}, got {self.scale_type!r}"
            )
        if not isinstance(self.track_length, int) or self.track_length < 1:
            raise ValueError("track_length must be a positive integer")
        if not isinstance(self.tempo_bpm, int) or not 20 <= self.tempo_bpm <= 300:
            raise ValueError("tempo_bpm must be an integer in [20, 300]")
        if not isinstance(self.volume, int) or not 0 <= self.volume <= 127:
            raise ValueError("volume must be an integer in [0, 127]")
        if not isinstance(self.seed, int) or not 0 <= self.seed <= MAX_SEED:
            raise ValueError("seed must be an unsigned 64-bit integer")


def init_track(config: GenConfig, rng: random.Random) -> TrackArray:
    """Generate a starting track: uniform degrees and durations, no rests.

    The draw order (degree then duration per slot, then all percussion
    selectors) is part of the determinism contract; changing it changes
    every seeded run.
    """
    config.validate()
    scale = generate_scale(parse_note(config.base_note), config.scale_type)
    melody = []
    for _ in range(config.track_length):
        degree = rng.randrange(len(scale.pitches))
        duration_q = rng.randrange(1, 5)
        melody.append(MelodyNote(degree, duration_q))
    percussion = tuple(rng.randrange(2) for _ in range(2 * config.track_length))
    return TrackArray(scale, tuple(melody), percussion)


def apply_action(track: TrackArray, cursor: int, action: int) -> TrackArray:
    """Apply one edit action at the cursor, returning a new track.

    0/1 step the degree up/down (clamped, no-op on a rest), 2/3 step the
    duration by 0.25 beats (capped at 1.0 and 0.25), 4 toggles the percussion
    slot aligned with the cursor, 5 removes the note (degree becomes REST,
    duration kept).
    """
    if not 0 <= cursor < len(track.melody):
        raise IndexError(f"cursor {cursor} out of range for track length {len(track.melody)}")
    if action not in ACTIONS:
        raise ValueError(f"unknown action: {action}")
    melody = list(track.melody)
    percussion = list(track.percussion)
    note = melody[cursor]
    if action == 0:
        if note.degree is not REST:
            top = len(track.scale.pitches) - 1
            melody[cursor] = MelodyNote(min(note.degree + 1, top), note.duration_q)
    elif action == 1:
        if note.degree is not REST:
            melody[cursor] = MelodyNote(max(note.degree - 1, 0), note.duration_q)
    elif action == 2:
        melody[cursor] = MelodyNote(note.degree, min(note.duration_q + 1, 4))
    elif action == 3:
        melody[cursor] = MelodyNote(note.degree, max(note.duration_q - 1, 1))
    elif action == 4:
        percussion[2 * cursor] ^= 1
    else:
        melody[cursor] = MelodyNote(REST, note.duration_q)
    return TrackArray(track.scale, tuple(melody), tuple(percussion))


def encode_state(track: TrackArray, cursor: int) -> str:
    """Canonical state key: degrees | durations | percussion | cursor.

    Comma-free by construction so keys embed directly in CSV logs. Degrees
    are dot-separated with "R" marking rests; durations are the quarter-beat
    digits; percussion is the selector bit string.
    """
    if not 0 <= cursor < len(track.melody):
        raise IndexError(f"cursor {cursor} out of range for track length {len(track.melody)}")
    degrees = ".".join(
        "R" if note.degree is REST else str(note.degree) for note in track.melody
    )
    durations = "".join(str(note.duration_q) for note in track.melody)
    percussion = "".join(str(selector) for selector in track.percussion)
    return f"{degrees}|{durations}|{percussion}|{cursor}"


def state_space_size(
    scale_size: int,
    melody_len: int,
    rhythm_factor: int = 1,
    perc_pitch_count: int = 1,
    perc_slots: int = 0,
) -> int:
    """Exact number of track permutations, in big-integer arithmetic.

    Computes scale_size^melody_len * rhythm_factor * perc_pitch_count^perc_slots.
    The degenerate arguments (rhythm_factor=1, perc_pitch_count=1, perc_slots=0)
    reduce the count to melodies alone.
    """
    if scale_size < 1 or melody_len < 1 or rhythm_factor < 1 or perc_pitch_count < 1:
        raise ValueError("scale_size, melody_len, rhythm_factor, perc_pitch_count must be >= 1")
    if perc_slots < 0:
        raise ValueError("perc_slots must be >= 0")
    return scale_size**melody_len * rhythm_factor * perc_pitch_count**perc_slots
