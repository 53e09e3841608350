"""Tabular Q-learning agent and the episodic training loop.

One stepping engine (EpisodeRunner) drives both the batch loop
(run_episode / run_training) and the interactive service (TrainingSession),
so logs produced either way agree exactly.
"""

from __future__ import annotations

import random
import warnings
from dataclasses import dataclass, field
from statistics import fmean
from typing import Callable

from .track import (
    GenConfig,
    MAX_SEED,
    MelodyNote,
    REST,
    TrackArray,
    apply_action,
    encode_state,
    init_track,
)
from .theory import generate_scale, parse_note

N_ACTIONS = 6

CSV_HEADER = "episode,step,state_key,action,explored,reward"

RewardProvider = Callable[[TrackArray], int]

# Phase names for TrainingSession.
IDLE = "idle"
AWAITING_RATING = "awaiting_rating"
BETWEEN_EPISODES = "between_episodes"
COMPLETED = "completed"

_MIX_MULTIPLIER = 6364136223846793005
_MIX_INCREMENT = 1442695040888963407


def episode_seed(seed: int, episode_index: int) -> int:
    """Decorrelated per-episode stream seed.

    Explicit integer mixing keeps every episode's policy stream reproducible
    from (seed, episode_index) alone, with no RNG state threaded between
    episodes and no reliance on hashing.
    """
    return (seed * _MIX_MULTIPLIER + episode_index * _MIX_INCREMENT) & MAX_SEED


@dataclass(frozen=True)
class HyperParams:
    """Learning-loop parameters."""

    alpha: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.5
    episodes: int = 10
    steps_per_episode: int | None = None  # None: one pass over the track
    seed: int = 0

    def validate(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must be in [0, 1]")
        if not isinstance(self.episodes, int) or self.episodes < 1:
            raise ValueError("episodes must be a positive integer")
        if self.steps_per_episode is not None and (
            not isinstance(self.steps_per_episode, int) or self.steps_per_episode < 1
        ):
            raise ValueError("steps_per_episode must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed <= MAX_SEED:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def steps_for(self, config: GenConfig) -> int:
        if self.steps_per_episode is not None:
            return self.steps_per_episode
        return config.track_length


class QTable:
    """State-key to action-value map; absent states read as all zeros."""

    def __init__(self, entries: dict[str, list[float]] | None = None):
        self.entries: dict[str, list[float]] = {}
        if entries:
            for key, values in entries.items():
                values = [float(v) for v in values]
                if len(values) != N_ACTIONS:
                    raise ValueError(f"action vector for {key!r} must have {N_ACTIONS} slots")
                self.entries[key] = values

    def lookup(self, state: str) -> tuple[float, ...]:
        """Values for a state; zeros for unvisited states, without inserting."""
        values = self.entries.get(state)
        if values is None:
            return (0.0,) * N_ACTIONS
        return tuple(values)

    def copy(self) -> "QTable":
        return QTable({key: list(values) for key, values in self.entries.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QTable):
            return NotImplemented
        return self.entries == other.entries


def q_update(
    q: QTable, s: str, a: int, r: int, s_next: str, alpha: float, gamma: float
) -> QTable:
    """One Bellman update: Q(s,a) += alpha * (r + gamma * max Q(s') - Q(s,a)).

    Mutates and returns the given table; no other entry changes. A zero
    learning rate leaves the table untouched, so it records no visit either.
    """
    if alpha == 0:
        return q
    values = q.entries.setdefault(s, [0.0] * N_ACTIONS)
    values[a] += alpha * (r + gamma * max(q.lookup(s_next)) - values[a])
    return q


def select_action(
    q: QTable, state: str, epsilon: float, rng: random.Random
) -> tuple[int, bool]:
    """Epsilon-greedy pick: explore uniformly, else argmax over the 6 values.

    Ties in the argmax are broken uniformly at random from the same stream,
    so no action is systematically favoured. Returns (action, explored).
    """
    if rng.random() < epsilon:
        return rng.randrange(N_ACTIONS), True
    values = q.lookup(state)
    best = max(values)
    candidates = [a for a, v in enumerate(values) if v == best]
    if len(candidates) == 1:
        return candidates[0], False
    return candidates[rng.randrange(len(candidates))], False


def qtable_stats(q: QTable) -> dict:
    """Counts and extremes over stored entries."""
    values = [v for vector in q.entries.values() for v in vector]
    if not values:
        return {"visited_states": 0, "nonzero_entries": 0, "max_q": 0.0, "min_q": 0.0}
    return {
        "visited_states": len(q.entries),
        "nonzero_entries": sum(1 for v in values if v != 0.0),
        "max_q": max(values),
        "min_q": min(values),
    }


@dataclass(frozen=True)
class StepRecord:
    """One rated training step."""

    episode: int  # 1-based
    step: int  # 1-based within the episode
    state: str
    action: int
    explored: bool
    reward: int
    next_state: str


@dataclass
class TrainingLog:
    """All step records plus the per-episode mean reward series."""

    records: list[StepRecord] = field(default_factory=list)
    episode_means: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.records:
            explored = "true" if r.explored else "false"
            lines.append(f"{r.episode},{r.step},{r.state},{r.action},{explored},{r.reward}")
        return "\n".join(lines) + "\n"

    def exploration_fraction(self) -> float | None:
        if not self.records:
            return None
        return sum(1 for r in self.records if r.explored) / len(self.records)


@dataclass(frozen=True)
class PendingStep:
    """A prepared step whose edited track is out for rating."""

    state: str
    action: int
    explored: bool
    next_track: TrackArray
    next_cursor: int


class EpisodeRunner:
    """Incremental driver for one episode: prepare a step, then rate it.

    Each episode regenerates its starting track from config.seed alone, so
    states recur across episodes and learned values carry over; the policy
    stream is derived from (hp.seed, episode_index).
    """

    def __init__(self, config: GenConfig, hp: HyperParams, q: QTable, episode_index: int):
        self.config = config
        self.hp = hp
        self.q = q
        self.episode_index = episode_index  # 0-based
        self.rng = random.Random(episode_seed(hp.seed, episode_index))
        self.track = init_track(config, random.Random(config.seed))
        self.cursor = 0
        self.step_index = 0  # 0-based count of completed preparations
        self.steps = hp.steps_for(config)
        self.pending: PendingStep | None = None

    @property
    def done(self) -> bool:
        return self.step_index >= self.steps and self.pending is None

    def prepare(self) -> PendingStep:
        """Pick the next action and build the track the rater should hear."""
        if self.pending is not None:
            raise RuntimeError("a step is already awaiting a rating")
        if self.step_index >= self.steps:
            raise RuntimeError("episode is complete")
        state = encode_state(self.track, self.cursor)
        action, explored = select_action(self.q, state, self.hp.epsilon, self.rng)
        next_track = apply_action(self.track, self.cursor, action)
        next_cursor = (self.step_index + 1) % self.config.track_length
        self.pending = PendingStep(state, action, explored, next_track, next_cursor)
        return self.pending

    def rate(self, rating: int) -> StepRecord:
        """Apply the reward for the pending step and advance the cursor."""
        if self.pending is None:
            raise RuntimeError("no step is awaiting a rating")
        if not isinstance(rating, int) or isinstance(rating, bool) or not 1 <= rating <= 10:
            raise ValueError("rating must be an integer in [1, 10]")
        p = self.pending
        next_state = encode_state(p.next_track, p.next_cursor)
        q_update(self.q, p.state, p.action, rating, next_state, self.hp.alpha, self.hp.gamma)
        record = StepRecord(
            episode=self.episode_index + 1,
            step=self.step_index + 1,
            state=p.state,
            action=p.action,
            explored=p.explored,
            reward=rating,
            next_state=next_state,
        )
        self.track = p.next_track
        self.cursor = p.next_cursor
        self.step_index += 1
        self.pending = None
        return record


class EpisodeAborted(Exception):
    """The reward provider failed mid-episode.

    Carries the records completed before the failure; every update already
    applied stays in the Q-table, so training can resume.
    """

    def __init__(self, cause: BaseException, records: list[StepRecord]):
        super().__init__(f"episode aborted after {len(records)} rated steps: {cause}")
        self.cause = cause
        self.records = records


class TrainingAborted(Exception):
    """An episode aborted during run_training.

    Carries the Q-table, the log of fully completed episodes, the failed
    episode's index, and its partial records. Resume by calling run_training
    again with q=exc.qtable, log=exc.log, start_episode=exc.episode_index;
    the failed episode restarts from its beginning (updates it already
    applied remain in the table).
    """

    def __init__(
        self,
        cause: BaseException,
        qtable: QTable,
        log: TrainingLog,
        episode_index: int,
        partial_records: list[StepRecord],
    ):
        super().__init__(f"training aborted in episode {episode_index + 1}: {cause}")
        self.cause = cause
        self.qtable = qtable
        self.log = log
        self.episode_index = episode_index
        self.partial_records = partial_records


def run_episode(
    config: GenConfig,
    hp: HyperParams,
    q: QTable,
    reward_provider: RewardProvider,
    episode_index: int,
) -> tuple[QTable, list[StepRecord]]:
    """Run one full episode, collecting a rating for every step.

    episode_index counts from 0; the emitted records are 1-based.
    """
    runner = EpisodeRunner(config, hp, q, episode_index)
    records: list[StepRecord] = []
    while not runner.done:
        pending = runner.prepare()
        try:
            rating = reward_provider(pending.next_track)
            records.append(runner.rate(rating))
        except Exception as exc:
            raise EpisodeAborted(exc, records) from exc
    return q, records


def run_training(
    config: GenConfig,
    hp: HyperParams,
    reward_provider: RewardProvider,
    q: QTable | None = None,
    log: TrainingLog | None = None,
    start_episode: int = 0,
) -> tuple[QTable, TrainingLog]:
    """Run hp.episodes episodes sequentially over one shared Q-table."""
    config.validate()
    hp.validate()
    if hp.episodes < 10:
        warnings.warn(
            f"training for {hp.episodes} episodes; runs shorter than 10 rarely show a trend",
            stacklevel=2,
        )
    q = q if q is not None else QTable()
    log = log if log is not None else TrainingLog()
    for episode_index in range(start_episode, hp.episodes):
        try:
            _, records = run_episode(config, hp, q, reward_provider, episode_index)
        except EpisodeAborted as exc:
            raise TrainingAborted(exc.cause, q, log, episode_index, exc.records) from exc
        log.records.extend(records)
        log.episode_means.append(fmean(r.reward for r in records))
    return q, log


@dataclass(frozen=True)
class RatingOutcome:
    """What one accepted rating produced."""

    record: StepRecord
    pending: PendingStep | None  # next step out for rating, None when completed
    episode_done: tuple[int, float] | None  # (episode, mean reward)
    training_done: tuple[int, int] | None  # (episodes completed, total steps)
    phase: str


class PhaseError(RuntimeError):
    """An operation was attempted in the wrong session phase."""


class TrainingSession:
    """Interactive training driver with an explicit phase machine.

    Phases: idle -> awaiting_rating (one per step) -> between_episodes
    (transient; the next episode's first step is prepared immediately) ->
    ... -> completed. Exactly one step is ever out for rating.
    """

    def __init__(
        self,
        config: GenConfig,
        hp: HyperParams,
        q: QTable | None = None,
        baseline_episodes: int = 0,
        baseline_steps: int = 0,
        on_phase: Callable[[str], None] | None = None,
    ):
        config.validate()
        hp.validate()
        self.config = config
        self.hp = hp
        self.q = q if q is not None else QTable()
        self.log = TrainingLog()
        self.steps = hp.steps_for(config)
        self.phase = IDLE
        self.episode_index = 0  # 0-based index of the episode in progress
        self.runner: EpisodeRunner | None = None
        self.final_track: TrackArray | None = None
        self._episode_rewards: list[int] = []
        self.baseline_episodes = baseline_episodes
        self.baseline_steps = baseline_steps
        self.on_phase = on_phase

    def _set_phase(self, phase: str) -> None:
        self.phase = phase
        if self.on_phase is not None:
            self.on_phase(phase)

    def start(self) -> PendingStep:
        """Begin episode 1 and prepare its first step."""
        if self.phase != IDLE:
            raise PhaseError(f"session already started (phase: {self.phase})")
        self.runner = EpisodeRunner(self.config, self.hp, self.q, self.episode_index)
        pending = self.runner.prepare()
        self._set_phase(AWAITING_RATING)
        return pending

    def rate(self, rating: int, checkpoint: Callable[[dict], None] | None = None) -> RatingOutcome:
        """Apply one rating, advance, and prepare the next step.

        `checkpoint` (if given) receives a snapshot taken after the update is
        applied but before the next step is prepared, so a restored session
        re-prepares the same step the live one went on to present.
        """
        if self.phase != AWAITING_RATING:
            raise PhaseError(f"no rating expected in phase {self.phase}")
        assert self.runner is not None
        record = self.runner.rate(rating)
        self.log.records.append(record)
        self._episode_rewards.append(record.reward)

        episode_done: tuple[int, float] | None = None
        training_done: tuple[int, int] | None = None
        pending: PendingStep | None = None

        if self.runner.done:
            mean = fmean(self._episode_rewards)
            self.log.episode_means.append(mean)
            self._episode_rewards = []
            episode_done = (self.episode_index + 1, mean)
            self.final_track = self.runner.track
            self.episode_index += 1
            if self.episode_index >= self.hp.episodes:
                self.runner = None
                self._set_phase(COMPLETED)
                training_done = (len(self.log.episode_means), len(self.log.records))
                if checkpoint is not None:
                    checkpoint(self.snapshot())
            else:
                self._set_phase(BETWEEN_EPISODES)
                if checkpoint is not None:
                    checkpoint(self.snapshot())
                self.runner = EpisodeRunner(self.config, self.hp, self.q, self.episode_index)
                pending = self.runner.prepare()
                self._set_phase(AWAITING_RATING)
        else:
            if checkpoint is not None:
                checkpoint(self.snapshot())
            pending = self.runner.prepare()
            self._set_phase(AWAITING_RATING)

        return RatingOutcome(record, pending, episode_done, training_done, self.phase)

    # -- views ------------------------------------------------------------

    @property
    def current_episode(self) -> int:
        """1-based episode number of the step being rated (or just finished)."""
        return min(self.episode_index + 1, self.hp.episodes)

    @property
    def current_step(self) -> int:
        """1-based step number of the step being rated."""
        if self.runner is None:
            return self.steps if self.phase == COMPLETED else 0
        if self.runner.pending is not None:
            return self.runner.step_index + 1
        return self.runner.step_index

    def current_track(self) -> TrackArray | None:
        """The track most recently presented for rating (or the final track)."""
        if self.runner is not None and self.runner.pending is not None:
            return self.runner.pending.next_track
        if self.runner is not None:
            return self.runner.track
        return self.final_track

    # -- persistence ------------------------------------------------------

    def snapshot(self) -> dict:
        """JSON-serializable session state at a step boundary (no pending step).

        Captures the mid-episode RNG state, so restoring and preparing again
        replays the exact step the session would have presented next.
        """
        if self.runner is not None and self.runner.pending is not None:
            raise RuntimeError("cannot snapshot while a step is awaiting a rating")
        runner_state = None
        # A finished runner carries nothing the next episode needs; the next
        # runner is rebuilt from (config, hp, episode_index) alone.
        if self.runner is not None and not self.runner.done:
            version, internal, gauss = self.runner.rng.getstate()
            runner_state = {
                "cursor": self.runner.cursor,
                "step_index": self.runner.step_index,
                "rng_state": [version, list(internal), gauss],
                "melody": [
                    [note.degree, note.duration_q] for note in self.runner.track.melody
                ],
                "percussion": list(self.runner.track.percussion),
            }
        return {
            "config": {
                "base_note": self.config.base_note,
                "scale_type": self.config.scale_type,
                "track_length": self.config.track_length,
                "tempo_bpm": self.config.tempo_bpm,
                "volume": self.config.volume,
                "seed": self.config.seed,
            },
            "runner": runner_state,
            "hyperparams": {
                "alpha": self.hp.alpha,
                "gamma": self.hp.gamma,
                "epsilon": self.hp.epsilon,
                "episodes": self.hp.episodes,
                "steps_per_episode": self.hp.steps_per_episode,
                "seed": self.hp.seed,
            },
            "phase": self.phase,
            "episode_index": self.episode_index,
            "baseline_episodes": self.baseline_episodes,
            "baseline_steps": self.baseline_steps,
            "episode_rewards": list(self._episode_rewards),
            "episode_means": list(self.log.episode_means),
            "records": [
                [r.episode, r.step, r.state, r.action, r.explored, r.reward, r.next_state]
                for r in self.log.records
            ],
            "final_melody": None
            if self.final_track is None
            else [[note.degree, note.duration_q] for note in self.final_track.melody],
            "final_percussion": None
            if self.final_track is None
            else list(self.final_track.percussion),
            "qtable": {key: list(values) for key, values in self.q.entries.items()},
        }

    @classmethod
    def from_snapshot(cls, doc: dict) -> "TrainingSession":
        """Rebuild a session from a snapshot; call resume() to re-present."""
        config = GenConfig(**doc["config"])
        hp = HyperParams(**doc["hyperparams"])
        session = cls(config, hp, q=QTable(doc["qtable"]),
                      baseline_episodes=doc["baseline_episodes"],
                      baseline_steps=doc["baseline_steps"])
        session.phase = doc["phase"]
        session.episode_index = doc["episode_index"]
        session._episode_rewards = list(doc["episode_rewards"])
        session.log.episode_means = list(doc["episode_means"])
        session.log.records = [
            StepRecord(ep, st, state, action, explored, reward, next_state)
            for ep, st, state, action, explored, reward, next_state in doc["records"]
        ]
        scale = generate_scale(parse_note(config.base_note), config.scale_type)
        if doc["final_melody"] is not None:
            session.final_track = TrackArray(
                scale,
                tuple(MelodyNote(d, q) for d, q in doc["final_melody"]),
                tuple(doc["final_percussion"]),
            )
        runner_state = doc.get("runner")
        if runner_state is not None:
            runner = EpisodeRunner(config, hp, session.q, session.episode_index)
            runner.cursor = runner_state["cursor"]
            runner.step_index = runner_state["step_index"]
            version, internal, gauss = runner_state["rng_state"]
            runner.rng.setstate((version, tuple(internal), gauss))
            runner.track = TrackArray(
                scale,
                tuple(MelodyNote(d, q) for d, q in runner_state["melody"]),
                tuple(runner_state["percussion"]),
            )
            session.runner = runner
        return session

    def resume(self) -> PendingStep | None:
        """Prepare the next step after a restore (None when completed)."""
        if self.phase == COMPLETED:
            return None
        if self.phase == IDLE:
            return self.start()
        if self.runner is None:
            self.runner = EpisodeRunner(self.config, self.hp, self.q, self.episode_index)
        if self.runner.pending is None:
            pending = self.runner.prepare()
        else:
            pending = self.runner.pending
        self._set_phase(AWAITING_RATING)
        return pending
