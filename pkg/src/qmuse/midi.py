"""Standard MIDI File rendering and the JSON wire form for browser playback.

Layout: SMF format 1, three tracks (tempo meta, melody on channel 0,
percussion on channel 9), 480 ticks per quarter note. Rendering is a pure
function of (track, config), so equal inputs give identical bytes.
"""

from __future__ import annotations

from .theory import generate_scale, parse_note
from .track import GenConfig, MelodyNote, PERC_PITCHES, REST, TrackArray

TICKS_PER_QUARTER = 480
TICKS_PER_DURATION_UNIT = TICKS_PER_QUARTER // 4  # duration_q quarter-quarters
PERCUSSION_CHANNEL = 9
PERCUSSION_TICKS = 120

_OFF = 0  # note-offs sort before note-ons at the same tick
_ON = 1
_END = 2


def _vlq(value: int) -> bytes:
    """Variable-length quantity used for SMF delta times."""
    if value < 0:
        raise ValueError("delta time must be non-negative")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def _track_chunk(events: list[tuple[int, int, bytes]]) -> bytes:
    data = bytearray()
    last = 0
    for tick, _, payload in sorted(events, key=lambda e: (e[0], e[1])):
        data += _vlq(tick - last)
        data += payload
        last = tick
    return b"MTrk" + len(data).to_bytes(4, "big") + bytes(data)


def melody_total_ticks(track: TrackArray) -> int:
    return sum(note.duration_q for note in track.melody) * TICKS_PER_DURATION_UNIT


def export_midi(track: TrackArray, config: GenConfig) -> bytes:
    """Render the track to SMF bytes.

    Melody notes play back to back for duration_q * 120 ticks each; rests
    advance time silently. Percussion slot i starts at i/len of the melody
    span and lasts 120 ticks, clamped so nothing sounds past the melody's
    end. All velocities are config.volume.
    """
    tempo = round(60_000_000 / config.tempo_bpm)
    volume = config.volume
    total = melody_total_ticks(track)

    tempo_events = [
        (0, _ON, bytes((0xFF, 0x51, 0x03)) + tempo.to_bytes(3, "big")),
        (0, _END, bytes((0xFF, 0x2F, 0x00))),
    ]

    melody_events: list[tuple[int, int, bytes]] = []
    tick = 0
    for note in track.melody:
        span = note.duration_q * TICKS_PER_DURATION_UNIT
        if note.degree is not REST:
            pitch = track.scale.pitches[note.degree]
            melody_events.append((tick, _ON, bytes((0x90, pitch, volume))))
            melody_events.append((tick + span, _OFF, bytes((0x80, pitch, volume))))
        tick += span
    melody_events.append((total, _END, bytes((0xFF, 0x2F, 0x00))))

    perc_events: list[tuple[int, int, bytes]] = []
    slots = len(track.percussion)
    for i, selector in enumerate(track.percussion):
        pitch = PERC_PITCHES[selector]
        start = i * total // slots
        span = min(PERCUSSION_TICKS, total - start)
        perc_events.append((start, _ON, bytes((0x90 | PERCUSSION_CHANNEL, pitch, volume))))
        perc_events.append((start + span, _OFF, bytes((0x80 | PERCUSSION_CHANNEL, pitch, volume))))
    perc_events.append((total, _END, bytes((0xFF, 0x2F, 0x00))))

    header = (
        b"MThd"
        + (6).to_bytes(4, "big")
        + (1).to_bytes(2, "big")
        + (3).to_bytes(2, "big")
        + TICKS_PER_QUARTER.to_bytes(2, "big")
    )
    return (
        header
        + _track_chunk(tempo_events)
        + _track_chunk(melody_events)
        + _track_chunk(perc_events)
    )


def to_wire(track: TrackArray, config: GenConfig) -> dict:
    """JSON-ready description of a track for the browser synthesizer."""
    return {
        "scale": {
            "base": track.scale.base.render(),
            "kind": track.scale.kind,
            "pitches": list(track.scale.pitches),
        },
        "melody": [
            {
                "degree": "rest" if note.degree is REST else note.degree,
                "duration": note.duration,
            }
            for note in track.melody
        ],
        "percussion": list(track.percussion),
        "tempo_bpm": config.tempo_bpm,
        "volume": config.volume,
    }


def from_wire(doc: dict) -> TrackArray:
    """Rebuild a TrackArray from its wire form (inverse of to_wire)."""
    scale_doc = doc["scale"]
    scale = generate_scale(parse_note(scale_doc["base"]), scale_doc["kind"])
    if list(scale.pitches) != list(scale_doc["pitches"]):
        raise ValueError("wire scale pitches do not match the named scale")
    melody = []
    for item in doc["melody"]:
        raw_degree = item["degree"]
        degree = REST if raw_degree == "rest" else raw_degree
        quarters = item["duration"] * 4
        if quarters != int(quarters):
            raise ValueError(f"duration {item['duration']!r} is not a multiple of 0.25")
        melody.append(MelodyNote(degree, int(quarters)))
    return TrackArray(scale, tuple(melody), tuple(doc["percussion"]))
