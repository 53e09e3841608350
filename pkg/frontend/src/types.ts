/** Wire types mirroring the service's JSON schemas, field for field. */

export type Phase = "idle" | "awaiting_rating" | "between_episodes" | "completed";

export interface WireScale {
  base: string;
  kind: string;
  pitches: number[];
}

export interface WireNote {
  degree: number | "rest";
  /** Length in beats (quarter notes); always a multiple of 0.25. */
  duration: number;
}

export interface WireTrack {
  scale: WireScale;
  melody: WireNote[];
  percussion: number[];
  tempo_bpm: number;
  volume: number;
}

export interface Progress {
  episode_means: number[];
  exploration_fraction: number | null;
  episodes_completed: number;
  total_steps: number;
  episode: number;
  step: number;
  phase: Phase;
}

export interface SessionCreated {
  session_id: string;
  phase: Phase;
  episode: number;
  step: number;
  track: WireTrack | null;
  midi_url: string | null;
}

export interface AppliedStep {
  episode: number;
  step: number;
  action: number;
  explored: boolean;
  reward: number;
}

export interface RatingResponse {
  session_id: string;
  phase: Phase;
  applied: AppliedStep;
  episode_done: { episode: number; mean_reward: number } | null;
  training_done: { episodes_completed: number; total_steps: number } | null;
  episode: number;
  step: number;
  progress: Progress;
  track: WireTrack | null;
  midi_url: string | null;
}

export interface SessionDetail extends SessionCreated {
  config: Record<string, unknown>;
  hyperparams: Record<string, unknown>;
  cursor: number | null;
  qtable_stats: {
    visited_states: number;
    nonzero_entries: number;
    max_q: number;
    min_q: number;
  };
  progress: Progress;
}

export interface ModelSummary {
  name: string;
  saved_at: string | null;
  episodes_completed?: number;
  error?: string;
}

export interface SavedModel {
  name: string;
  episodes_completed: number;
  total_steps: number;
}

export interface EvaluationForm {
  musicality: number;
  novelty: number;
  coherence: number;
  comment: string;
  expertise: "None" | "Beginner" | "Intermediate" | "Expert";
}

export type SessionEvent =
  | { type: "track_ready"; seq: number; payload: {
      session_id: string; episode: number; step: number;
      track: WireTrack | null; midi_url: string | null;
    } }
  | { type: "episode_done"; seq: number; payload: {
      session_id: string; episode: number; mean_reward: number;
    } }
  | { type: "training_done"; seq: number; payload: {
      session_id: string; episodes_completed: number; total_steps: number;
    } };
