"""Shared helpers for the test suite."""

from __future__ import annotations

from qmuse.theory import generate_scale, parse_note
from qmuse.track import MelodyNote, TrackArray


def sequence_provider(ratings):
    """A reward provider that replays a fixed rating sequence."""
    iterator = iter(ratings)

    def provider(track):
        return next(iterator)

    return provider


def make_track(degrees, durations=None, percussion=None, base="C4", kind="major"):
    """Build a TrackArray by hand; None in degrees means REST."""
    scale = generate_scale(parse_note(base), kind)
    if durations is None:
        durations = [4] * len(degrees)
    melody = tuple(MelodyNote(d, q) for d, q in zip(degrees, durations))
    if percussion is None:
        percussion = (0,) * (2 * len(degrees))
    return TrackArray(scale, melody, tuple(percussion))
