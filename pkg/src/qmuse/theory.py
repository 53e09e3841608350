"""Music-theory primitives: note names, pitch numbers, scale generation."""

from __future__ import annotations

import re
from dataclasses import dataclass

LETTER_OFFSETS = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}

ACCIDENTAL_OFFSETS = {"": 0, "#": 1, "b": -1}

# Interval tables complete the octave (they sum to 12); the final interval is
# dropped when generating so the octave repetition is excluded.
SCALE_INTERVALS = {
    "major": (2, 2, 1, 2, 2, 2, 1),
    "minor": (2, 1, 2, 2, 1, 2, 2),
    "diminished": (2, 1, 2, 1, 2, 1, 2, 1),
}

_NOTE_RE = re.compile(r"([A-G])([#b]?)([0-9])\Z")


@dataclass(frozen=True)
class NoteName:
    """A note spelled as letter, optional accidental, and octave digit."""

    letter: str
    accidental: str  # "", "#", or "b"
    octave: int

    def render(self) -> str:
        return f"{self.letter}{self.accidental}{self.octave}"


def parse_note(text: str) -> NoteName:
    """Parse a note name such as "C4", "F#3", or "Bb5"."""
    match = _NOTE_RE.fullmatch(text)
    if match is None:
        raise ValueError(f"invalid note name: {text!r}")
    letter, accidental, octave = match.groups()
    return NoteName(letter, accidental, int(octave))


def note_to_pitch(name: NoteName) -> int:
    """MIDI pitch number of a note, with C4 = 60."""
    pitch = (
        12 * (name.octave + 1)
        + LETTER_OFFSETS[name.letter]
        + ACCIDENTAL_OFFSETS[name.accidental]
    )
    if not 0 <= pitch <= 127:
        raise ValueError(f"pitch {pitch} for {name.render()} is outside [0, 127]")
    return pitch


@dataclass(frozen=True)
class Scale:
    """An ordered one-octave pitch set rooted at a base note."""

    base: NoteName
    kind: str
    pitches: tuple[int, ...]


def generate_scale(base: NoteName, kind: str) -> Scale:
    """Build the scale of the given kind rooted at the base note.

    Major and minor scales carry 7 pitches, diminished carries 8; the octave
    repetition of the root is excluded.
    """
    if kind not in SCALE_INTERVALS:
        raise ValueError(f"unknown scale type: {kind!r}")
    root = note_to_pitch(base)
    if root + 12 > 127:
        raise ValueError(f"scale rooted at {base.render()} would exceed the MIDI range")
    pitches = [root]
    for interval in SCALE_INTERVALS[kind][:-1]:
        pitches.append(pitches[-1] + interval)
    return Scale(base, kind, tuple(pitches))
