/** Client-side validation mirroring the service's parameter ranges exactly,
 * so the form rejects a value if and only if the service would.
 */

export interface ConfigForm {
  baseNote: string;
  scaleType: string;
  trackLength: number;
  tempoBpm: number;
  volume: number;
  seed: number;
}

export interface HyperForm {
  alpha: number;
  gamma: number;
  epsilon: number;
  episodes: number;
  stepsPerEpisode: number | null;
}

export const SCALE_TYPES = ["major", "minor", "diminished"] as const;

export const DEFAULT_CONFIG: ConfigForm = {
  baseNote: "C4",
  scaleType: "major",
  trackLength: 8,
  tempoBpm: 120,
  volume: 100,
  seed: 0,
};

export const DEFAULT_HYPERPARAMS: HyperForm = {
  alpha: 0.1,
  gamma: 0.9,
  epsilon: 0.5,
  episodes: 10,
  stepsPerEpisode: null,
};

const NOTE_RE = /^([A-G])([#b]?)([0-9])$/;
const LETTER_OFFSETS: Record<string, number> = { C: 0, D: 2, E: 4, F: 5, G: 7, A: 9, B: 11 };
const MAX_SEED = 2 ** 64 - 1;

/** MIDI pitch of a note name (C4 = 60), or null if unparseable/out of range. */
export function notePitch(name: string): number | null {
  const match = NOTE_RE.exec(name);
  if (!match) {
    return null;
  }
  const [, letter, accidental, octave] = match;
  const offset = LETTER_OFFSETS[letter as string];
  if (offset === undefined) {
    return null;
  }
  const pitch =
    12 * (Number(octave) + 1) + offset + (accidental === "#" ? 1 : accidental === "b" ? -1 : 0);
  return pitch >= 0 && pitch <= 127 ? pitch : null;
}

function isInt(value: number): boolean {
  return Number.isInteger(value);
}

export type Errors<T> = Partial<Record<keyof T, string>>;

export function validateConfig(form: ConfigForm): Errors<ConfigForm> {
  const errors: Errors<ConfigForm> = {};
  const pitch = notePitch(form.baseNote);
  if (pitch === null) {
    errors.baseNote = "note name like C4, F#3, or Bb5";
  } else if (pitch + 12 > 127) {
    errors.baseNote = "too high: the scale must fit below the MIDI ceiling";
  }
  if (!SCALE_TYPES.includes(form.scaleType as (typeof SCALE_TYPES)[number])) {
    errors.scaleType = "one of major, minor, diminished";
  }
  if (!isInt(form.trackLength) || form.trackLength < 1) {
    errors.trackLength = "a positive whole number";
  }
  if (!isInt(form.tempoBpm) || form.tempoBpm < 20 || form.tempoBpm > 300) {
    errors.tempoBpm = "a whole number from 20 to 300";
  }
  if (!isInt(form.volume) || form.volume < 0 || form.volume > 127) {
    errors.volume = "a whole number from 0 to 127";
  }
  if (!isInt(form.seed) || form.seed < 0 || form.seed > MAX_SEED) {
    errors.seed = "a non-negative whole number";
  }
  return errors;
}

export function validateHyperparams(form: HyperForm): Errors<HyperForm> {
  const errors: Errors<HyperForm> = {};
  if (!(form.alpha > 0 && form.alpha <= 1)) {
    errors.alpha = "a number in (0, 1]";
  }
  if (!(form.gamma >= 0 && form.gamma < 1)) {
    errors.gamma = "a number in [0, 1)";
  }
  if (!(form.epsilon >= 0 && form.epsilon <= 1)) {
    errors.epsilon = "a number in [0, 1]";
  }
  if (!isInt(form.episodes) || form.episodes < 1) {
    errors.episodes = "a positive whole number";
  }
  if (form.stepsPerEpisode !== null && (!isInt(form.stepsPerEpisode) || form.stepsPerEpisode < 1)) {
    errors.stepsPerEpisode = "empty, or a positive whole number";
  }
  return errors;
}

/** Request-body form of the config (service field names). */
export function wireConfig(form: ConfigForm): Record<string, unknown> {
  return {
    base_note: form.baseNote,
    scale_type: form.scaleType,
    track_length: form.trackLength,
    tempo_bpm: form.tempoBpm,
    volume: form.volume,
    seed: form.seed,
  };
}

/** Request-body form of the hyperparameters (service field names). */
export function wireHyperparams(form: HyperForm): Record<string, unknown> {
  return {
    alpha: form.alpha,
    gamma: form.gamma,
    epsilon: form.epsilon,
    episodes: form.episodes,
    steps_per_episode: form.stepsPerEpisode,
  };
}
