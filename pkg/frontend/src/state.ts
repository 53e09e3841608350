/** Session view state: a pure reducer over service responses and events.
 *
 * Nothing here is fabricated: every field is copied from a service response,
 * and the step log grows only by `applied` records the service returned.
 * WebSocket events carry sequence numbers; stale or replayed events (seq at
 * or below the last applied one) are ignored, which makes reconnects safe.
 */

import type {
  AppliedStep,
  Phase,
  RatingResponse,
  SessionCreated,
  SessionEvent,
  WireTrack,
} from "./types.js";

export interface UiSessionView {
  sessionId: string;
  phase: Phase;
  track: WireTrack | null;
  midiUrl: string | null;
  episode: number;
  step: number;
  episodeMeans: number[];
  /** Per-step records accumulated from rating responses, oldest first. */
  applied: AppliedStep[];
  exploredCount: number;
  totalSteps: number;
  lastSeq: number;
}

export function viewFromCreated(body: SessionCreated): UiSessionView {
  return {
    sessionId: body.session_id,
    phase: body.phase,
    track: body.track,
    midiUrl: body.midi_url,
    episode: body.episode,
    step: body.step,
    episodeMeans: [],
    applied: [],
    exploredCount: 0,
    totalSteps: 0,
    lastSeq: -1,
  };
}

export function ratingEnabled(view: UiSessionView): boolean {
  return view.phase === "awaiting_rating";
}

export function applyRating(view: UiSessionView, response: RatingResponse): UiSessionView {
  return {
    ...view,
    phase: response.progress.phase,
    track: response.track,
    midiUrl: response.midi_url,
    episode: response.progress.episode,
    step: response.progress.step,
    episodeMeans: [...response.progress.episode_means],
    applied: [...view.applied, response.applied],
    exploredCount: view.exploredCount + (response.applied.explored ? 1 : 0),
    totalSteps: response.progress.total_steps,
  };
}

export function applyEvent(view: UiSessionView, event: SessionEvent): UiSessionView {
  if (event.seq <= view.lastSeq) {
    return view;
  }
  const next = { ...view, lastSeq: event.seq };
  switch (event.type) {
    case "track_ready":
      return {
        ...next,
        track: event.payload.track,
        midiUrl: event.payload.midi_url,
        episode: event.payload.episode,
        step: event.payload.step,
        phase: "awaiting_rating",
      };
    case "episode_done": {
      const means = [...next.episodeMeans];
      means[event.payload.episode - 1] = event.payload.mean_reward;
      return { ...next, episodeMeans: means };
    }
    case "training_done":
      return { ...next, phase: "completed", totalSteps: event.payload.total_steps };
  }
}
