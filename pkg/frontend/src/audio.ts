/** Pure scheduling for client-side playback.
 *
 * buildSchedule turns a wire track into a list of time-stamped events; the
 * caller feeds them to WebAudio (or anything else). Scheduling is a pure
 * function of the track, so replaying the same track yields an identical
 * schedule.
 */

import type { WireTrack } from "./types.js";

export interface ToneEvent {
  kind: "tone";
  startSec: number;
  durationSec: number;
  frequency: number;
  gain: number;
}

export interface DrumEvent {
  kind: "drum";
  timbre: "low" | "high";
  startSec: number;
  durationSec: number;
  gain: number;
}

export type AudioEvent = ToneEvent | DrumEvent;

/** One percussion hit lasts a quarter beat, clamped to the melody's end. */
const DRUM_BEATS = 0.25;

export function midiToFrequency(pitch: number): number {
  return 440 * 2 ** ((pitch - 69) / 12);
}

export function totalBeats(track: WireTrack): number {
  return track.melody.reduce((sum, note) => sum + note.duration, 0);
}

export function scheduleLengthSec(track: WireTrack): number {
  return totalBeats(track) * (60 / track.tempo_bpm);
}

export function buildSchedule(track: WireTrack): AudioEvent[] {
  const secondsPerBeat = 60 / track.tempo_bpm;
  const gain = track.volume / 127;
  const events: AudioEvent[] = [];

  let beat = 0;
  for (const note of track.melody) {
    if (note.degree !== "rest") {
      const pitch = track.scale.pitches[note.degree];
      if (pitch === undefined) {
        throw new Error(`degree ${note.degree} is outside the scale`);
      }
      events.push({
        kind: "tone",
        startSec: beat * secondsPerBeat,
        durationSec: note.duration * secondsPerBeat,
        frequency: midiToFrequency(pitch),
        gain,
      });
    }
    beat += note.duration;
  }

  const total = beat;
  const slots = track.percussion.length;
  track.percussion.forEach((selector, index) => {
    const startBeat = (index * total) / slots;
    const spanBeats = Math.min(DRUM_BEATS, total - startBeat);
    events.push({
      kind: "drum",
      timbre: selector === 0 ? "low" : "high",
      startSec: startBeat * secondsPerBeat,
      durationSec: spanBeats * secondsPerBeat,
      gain,
    });
  });

  return events;
}

/** Realize a schedule on a WebAudio context; resolves when playback ends. */
export function playSchedule(context: AudioContext, events: AudioEvent[]): Promise<void> {
  const origin = context.currentTime + 0.05;
  let end = origin;
  for (const event of events) {
    const start = origin + event.startSec;
    const stop = start + event.durationSec;
    end = Math.max(end, stop);
    const envelope = context.createGain();
    envelope.gain.setValueAtTime(event.gain, start);
    envelope.gain.linearRampToValueAtTime(0, stop);
    envelope.connect(context.destination);
    const oscillator = context.createOscillator();
    if (event.kind === "tone") {
      oscillator.type = "triangle";
      oscillator.frequency.value = event.frequency;
    } else {
      oscillator.type = "square";
      oscillator.frequency.value = event.timbre === "low" ? 80 : 180;
    }
    oscillator.connect(envelope);
    oscillator.start(start);
    oscillator.stop(stop);
  }
  return new Promise((resolve) => {
    setTimeout(resolve, Math.max(0, (end - context.currentTime) * 1000));
  });
}
