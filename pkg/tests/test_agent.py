import itertools
import random
from statistics import fmean

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import sequence_provider
from qmuse.agent import (
    AWAITING_RATING,
    BETWEEN_EPISODES,
    COMPLETED,
    CSV_HEADER,
    EpisodeAborted,
    HyperParams,
    PhaseError,
    QTable,
    StepRecord,
    TrainingAborted,
    TrainingLog,
    TrainingSession,
    episode_seed,
    q_update,
    qtable_stats,
    run_episode,
    run_training,
    select_action,
)
from qmuse.rater import simulated_rater
from qmuse.track import GenConfig, encode_state, init_track

# -- hyperparameters ----------------------------------------------------------


def test_hyperparam_defaults():
    hp = HyperParams()
    assert (hp.alpha, hp.gamma, hp.epsilon, hp.episodes) == (0.1, 0.9, 0.5, 10)
    assert hp.steps_per_episode is None


def test_steps_default_to_track_length():
    assert HyperParams().steps_for(GenConfig(track_length=5)) == 5
    assert HyperParams(steps_per_episode=12).steps_for(GenConfig(track_length=5)) == 12


@pytest.mark.parametrize(
    "field,value",
    [
        ("alpha", 0.0),
        ("alpha", 1.1),
        ("gamma", 1.0),
        ("gamma", -0.1),
        ("epsilon", -0.1),
        ("epsilon", 1.1),
        ("episodes", 0),
        ("steps_per_episode", 0),
        ("seed", -1),
        ("seed", 2**64),
    ],
)
def test_hyperparam_validation(field, value):
    with pytest.raises(ValueError, match=field):
        HyperParams(**{field: value}).validate()


def test_hyperparam_boundaries_accepted():
    HyperParams(alpha=1.0, gamma=0.0, epsilon=0.0).validate()
    HyperParams(epsilon=1.0, seed=2**64 - 1).validate()


# -- QTable -------------------------------------------------------------------


def test_lookup_of_absent_key_is_zero_vector_and_does_not_insert():
    q = QTable()
    assert q.lookup("nowhere") == (0.0,) * 6
    assert q.entries == {}


def test_qtable_rejects_wrong_vector_width():
    with pytest.raises(ValueError):
        QTable({"s": [1.0, 2.0]})


def test_qtable_copy_is_independent():
    q = QTable({"s": [1, 0, 0, 0, 0, 0]})
    clone = q.copy()
    clone.entries["s"][0] = 99.0
    assert q.entries["s"][0] == 1.0


# -- q_update -----------------------------------------------------------------


def test_update_from_zero_priors():
    q = QTable()
    q_update(q, "s", 0, 5, "t", 0.1, 0.9)
    assert abs(q.entries["s"][0] - 0.5) <= 1e-12


def test_update_with_bootstrap_term():
    q = QTable({"s": [0.5, 0, 0, 0, 0, 0], "t": [0.5, 0, 0, 0, 0, 0]})
    q_update(q, "s", 0, 8, "t", 0.1, 0.9)
    assert abs(q.entries["s"][0] - 1.295) <= 1e-12


def test_zero_alpha_leaves_table_unchanged():
    q = QTable({"s": [0.5, 0, 0, 0, 0, 0]})
    before = {key: list(v) for key, v in q.entries.items()}
    q_update(q, "s", 0, 10, "t", 0.0, 0.9)
    q_update(q, "fresh", 3, 10, "s", 0.0, 0.9)
    assert q.entries == before


def test_update_touches_exactly_one_slot():
    q = QTable({"s": [1, 2, 3, 4, 5, 6], "t": [9, 0, 0, 0, 0, 0]})
    before = {key: list(v) for key, v in q.entries.items()}
    q_update(q, "s", 2, 7, "t", 0.5, 0.9)
    diffs = [
        (key, index)
        for key in q.entries
        for index in range(6)
        if q.entries[key][index] != before.get(key, [0.0] * 6)[index]
    ]
    assert diffs == [("s", 2)]


def test_gamma_zero_closed_form():
    for r in (1, 7, 10):
        q = QTable()
        for k in range(1, 101):
            q_update(q, "s", 0, r, "t", 0.1, 0.0)
            expected = r * (1 - 0.9**k)
            assert abs(q.entries["s"][0] - expected) <= 1e-12, (r, k)


def test_gamma_zero_converges_monotonically():
    q = QTable()
    previous = 0.0
    for _ in range(200):
        q_update(q, "s", 0, 8, "t", 0.1, 0.0)
        value = q.entries["s"][0]
        assert previous < value <= 8.0
        previous = value


# -- select_action ------------------------------------------------------------


def test_unique_argmax_selected_without_exploration():
    q = QTable({"s": [1, 0, 0, 0, 0, 0]})
    action, explored = select_action(q, "s", 0.0, random.Random(0))
    assert (action, explored) == (0, False)


def test_epsilon_one_always_explores():
    q = QTable({"s": [5, 0, 0, 0, 0, 0]})
    rng = random.Random(1)
    for _ in range(50):
        _, explored = select_action(q, "s", 1.0, rng)
        assert explored


def test_all_zero_tie_break_is_reproducible():
    # Pinned: Random(0) draws u then randrange(6) over the 6-way tie.
    action, explored = select_action(QTable(), "s", 0.0, random.Random(0))
    assert (action, explored) == (3, False)
    oracle = random.Random(0)
    oracle.random()
    assert action == oracle.randrange(6)


def test_unique_argmax_consumes_exactly_one_draw():
    q = QTable({"s": [0, 3, 0, 0, 0, 0]})
    rng, ref = random.Random(7), random.Random(7)
    action, explored = select_action(q, "s", 0.0, rng)
    ref.random()
    assert (action, explored) == (1, False)
    assert rng.getstate() == ref.getstate()


def test_tie_break_consumes_exactly_two_draws():
    q = QTable({"s": [1.0, 1.0, 0, 0, 0, 0]})
    rng, ref = random.Random(7), random.Random(7)
    action, _ = select_action(q, "s", 0.0, rng)
    ref.random()
    ref.randrange(2)
    assert action in (0, 1)
    assert rng.getstate() == ref.getstate()


def test_explore_consumes_exactly_two_draws():
    rng, ref = random.Random(3), random.Random(3)
    action, explored = select_action(QTable(), "s", 1.0, rng)
    ref.random()
    assert (action, explored) == (ref.randrange(6), True)
    assert rng.getstate() == ref.getstate()


def test_tie_break_covers_all_tied_candidates_and_no_others():
    q = QTable({"s": [2.0, 0.0, 2.0, 0.0, 2.0, 0.0]})
    rng = random.Random(11)
    chosen = {select_action(q, "s", 0.0, rng)[0] for _ in range(300)}
    assert chosen == {0, 2, 4}


def test_exploration_covers_all_actions():
    rng = random.Random(5)
    chosen = {select_action(QTable(), "s", 1.0, rng)[0] for _ in range(300)}
    assert chosen == set(range(6))


@given(
    st.lists(st.floats(-50, 50), min_size=6, max_size=6),
    st.floats(0.1, 100),
    st.integers(0, 2**32),
)
def test_argmax_invariant_under_positive_scaling(values, factor, seed):
    q = QTable({"s": values})
    scaled = QTable({"s": [v * factor for v in values]})
    action, _ = select_action(q, "s", 0.0, random.Random(seed))
    best = max(values)
    argmax_set = {i for i, v in enumerate(values) if v == best}
    scaled_best = max(scaled.entries["s"])
    scaled_argmax_set = {
        i for i, v in enumerate(scaled.entries["s"]) if v == scaled_best
    }
    assert action in argmax_set
    assert argmax_set <= scaled_argmax_set


# -- episode_seed -------------------------------------------------------------


def test_episode_seed_is_deterministic_and_decorrelated():
    assert episode_seed(0, 0) == episode_seed(0, 0)
    seen = {episode_seed(s, e) for s in range(4) for e in range(64)}
    assert len(seen) == 4 * 64
    assert all(0 <= value < 2**64 for value in seen)


# -- logs ---------------------------------------------------------------------


def _record(episode, step, action=0, explored=False, reward=5):
    return StepRecord(episode, step, f"k{episode}.{step}", action, explored, reward, "n")


def test_csv_schema_and_rows():
    log = TrainingLog(records=[_record(1, 1, 3, False, 5), _record(1, 2, 4, True, 7)])
    assert log.to_csv() == (
        "episode,step,state_key,action,explored,reward\n"
        "1,1,k1.1,3,false,5\n"
        "1,2,k1.2,4,true,7\n"
    )
    assert CSV_HEADER == "episode,step,state_key,action,explored,reward"


def test_exploration_fraction():
    records = [_record(1, i, explored=(i <= 40)) for i in range(1, 81)]
    assert TrainingLog(records=records).exploration_fraction() == 0.5
    assert TrainingLog().exploration_fraction() is None


# -- run_episode --------------------------------------------------------------


def test_episode_emits_exactly_steps_records():
    q, records = run_episode(GenConfig(), HyperParams(), QTable(), lambda t: 5, 0)
    assert len(records) == 8
    assert [r.step for r in records] == list(range(1, 9))
    assert all(r.episode == 1 for r in records)


def test_episode_is_deterministic():
    first = run_episode(GenConfig(seed=9), HyperParams(seed=9), QTable(), lambda t: 5, 0)[1]
    second = run_episode(GenConfig(seed=9), HyperParams(seed=9), QTable(), lambda t: 5, 0)[1]
    assert first == second


def test_episode_state_chain_is_consistent():
    _, records = run_episode(GenConfig(), HyperParams(), QTable(), simulated_rater, 0)
    for current, following in zip(records, records[1:]):
        assert current.next_state == following.state


def test_episode_starts_from_the_seeded_track():
    config = GenConfig(seed=77)
    _, records = run_episode(config, HyperParams(seed=77), QTable(), lambda t: 5, 0)
    start = init_track(config, random.Random(config.seed))
    assert records[0].state == encode_state(start, 0)


def test_every_episode_starts_from_the_same_track():
    config = GenConfig(seed=4)
    hp = HyperParams(seed=4)
    first = run_episode(config, hp, QTable(), lambda t: 5, 0)[1]
    later = run_episode(config, hp, QTable(), lambda t: 5, 6)[1]
    assert first[0].state == later[0].state


def test_cursor_wraps_round_robin():
    config = GenConfig(track_length=3, seed=2)
    hp = HyperParams(steps_per_episode=7, seed=2)
    _, records = run_episode(config, hp, QTable(), lambda t: 5, 0)
    cursors = [int(r.state.rsplit("|", 1)[1]) for r in records]
    assert cursors == [0, 1, 2, 0, 1, 2, 0]


def test_first_update_on_unvisited_pair_is_alpha_times_reward():
    config = GenConfig(seed=3)
    hp = HyperParams(steps_per_episode=1, seed=3)
    q, records = run_episode(config, hp, QTable(), lambda t: 7, 0)
    (record,) = records
    assert q.entries[record.state][record.action] == pytest.approx(0.7, abs=1e-12)


def test_reward_outside_range_rejected():
    with pytest.raises(EpisodeAborted) as info:
        run_episode(GenConfig(), HyperParams(), QTable(), lambda t: 11, 0)
    assert isinstance(info.value.cause, ValueError)


def test_provider_failure_aborts_with_partial_records():
    ratings = sequence_provider([5, 5, 5])
    q = QTable()
    with pytest.raises(EpisodeAborted) as info:
        run_episode(GenConfig(seed=1), HyperParams(seed=1), q, ratings, 0)
    assert len(info.value.records) == 3
    assert qtable_stats(q)["visited_states"] >= 1


# -- run_training -------------------------------------------------------------


def test_training_counts_and_means():
    q, log = run_training(GenConfig(), HyperParams(), lambda t: 5)
    assert len(log.records) == 80
    assert log.episode_means == [5.0] * 10
    assert [r.episode for r in log.records] == [e for e in range(1, 11) for _ in range(8)]


def test_means_match_records():
    _, log = run_training(GenConfig(seed=6), HyperParams(seed=6), simulated_rater)
    for episode in range(1, 11):
        rewards = [r.reward for r in log.records if r.episode == episode]
        assert log.episode_means[episode - 1] == fmean(rewards)


def test_short_runs_warn():
    with pytest.warns(UserWarning, match="10"):
        run_training(GenConfig(), HyperParams(episodes=3), lambda t: 5)


def test_ten_episode_runs_do_not_warn(recwarn):
    run_training(GenConfig(), HyperParams(episodes=10), lambda t: 5)
    assert not [w for w in recwarn if issubclass(w.category, UserWarning)]


def test_full_run_determinism():
    runs = [run_training(GenConfig(seed=13), HyperParams(seed=13), simulated_rater) for _ in range(2)]
    assert runs[0][1].records == runs[1][1].records
    assert runs[0][0].entries == runs[1][0].entries
    assert runs[0][1].to_csv() == runs[1][1].to_csv()


def test_q_values_bounded_for_defaults():
    q, _ = run_training(GenConfig(seed=8), HyperParams(episodes=40, seed=8), simulated_rater)
    values = [v for vector in q.entries.values() for v in vector]
    assert values
    assert all(0.0 <= v <= 100.0 for v in values)


def test_training_abort_carries_resume_state():
    provider = sequence_provider([5] * 20)  # dies in episode 3 (file ends)
    with pytest.raises(TrainingAborted) as info:
        run_training(GenConfig(seed=2), HyperParams(seed=2), provider)
    exc = info.value
    assert exc.episode_index == 2
    assert len(exc.log.records) == 16
    assert len(exc.log.episode_means) == 2
    assert len(exc.partial_records) == 4


def test_training_resumes_after_abort():
    provider = sequence_provider([5] * 20)
    try:
        run_training(GenConfig(seed=2), HyperParams(seed=2), provider)
    except TrainingAborted as exc:
        q, log = run_training(
            GenConfig(seed=2),
            HyperParams(seed=2),
            lambda t: 5,
            q=exc.qtable,
            log=exc.log,
            start_episode=exc.episode_index,
        )
    assert len(log.records) == 80
    assert len(log.episode_means) == 10
    assert [r.episode for r in log.records] == [e for e in range(1, 11) for _ in range(8)]


def test_golden_seed_zero_dynamics():
    # Regression pin for the full default pipeline on seed 0.
    _, log = run_training(GenConfig(), HyperParams(), simulated_rater)
    assert log.episode_means == [4.75, 4.5, 4.625, 5.0, 4.75, 4.875, 3.75, 4.125, 4.625, 5.375]
    first = log.records[0]
    assert first.state == "6.6.0.4.3.3.4.4|44343322|1001010011011101|0"
    assert (first.action, first.explored, first.reward) == (3, False, 5)


# -- qtable_stats -------------------------------------------------------------


def test_stats_empty_table():
    assert qtable_stats(QTable()) == {
        "visited_states": 0,
        "nonzero_entries": 0,
        "max_q": 0.0,
        "min_q": 0.0,
    }


def test_stats_single_entry():
    stats = qtable_stats(QTable({"s": [0.5, 0, 0, 0, 0, 0]}))
    assert stats == {"visited_states": 1, "nonzero_entries": 1, "max_q": 0.5, "min_q": 0.0}


def test_stats_after_chained_update_example():
    q = QTable({"s": [0.5, 0, 0, 0, 0, 0], "t": [0.5, 0, 0, 0, 0, 0]})
    q_update(q, "s", 0, 8, "t", 0.1, 0.9)
    assert qtable_stats(q)["max_q"] == pytest.approx(1.295, abs=1e-12)


# -- TrainingSession ----------------------------------------------------------


def _drive(session, ratings, checkpoint=None):
    outcomes = []
    session.start()
    for rating in ratings:
        outcomes.append(session.rate(rating, checkpoint=checkpoint))
    return outcomes


def test_session_requires_start_before_rating():
    session = TrainingSession(GenConfig(), HyperParams())
    with pytest.raises(PhaseError):
        session.rate(5)


def test_session_rejects_double_start():
    session = TrainingSession(GenConfig(), HyperParams())
    session.start()
    with pytest.raises(PhaseError):
        session.start()


def test_session_rejects_rating_after_completion():
    session = TrainingSession(GenConfig(track_length=2), HyperParams(episodes=1))
    _drive(session, [5, 5])
    assert session.phase == COMPLETED
    with pytest.raises(PhaseError):
        session.rate(5)


def test_session_rejects_out_of_range_rating():
    session = TrainingSession(GenConfig(), HyperParams())
    session.start()
    with pytest.raises(ValueError):
        session.rate(11)
    assert session.phase == AWAITING_RATING
    session.rate(10)


@pytest.mark.parametrize("episodes,steps", [(1, 1), (1, 2), (2, 1), (2, 2), (3, 2)])
def test_session_phase_traces_exhaustively(episodes, steps):
    trace = []
    session = TrainingSession(
        GenConfig(track_length=2),
        HyperParams(episodes=episodes, steps_per_episode=steps),
        on_phase=trace.append,
    )
    _drive(session, [5] * (episodes * steps))
    expected = [AWAITING_RATING]
    for episode in range(episodes):
        expected.extend([AWAITING_RATING] * (steps - 1))
        if episode < episodes - 1:
            expected.extend([BETWEEN_EPISODES, AWAITING_RATING])
        else:
            expected.append(COMPLETED)
    assert trace == expected


def test_session_counters_never_decrease():
    session = TrainingSession(GenConfig(track_length=2), HyperParams(episodes=3, steps_per_episode=2))
    seen = [(session.current_episode, len(session.log.records))]
    session.start()
    for _ in range(6):
        session.rate(5)
        seen.append((session.current_episode, len(session.log.records)))
    assert seen == sorted(seen)


def test_session_matches_run_training_exactly():
    ratings = [7, 3, 5, 9, 2, 8, 4, 6, 1, 10] * 8
    config = GenConfig(seed=21)
    hp = HyperParams(seed=21)
    q_ref, log_ref = run_training(config, hp, sequence_provider(ratings))
    session = TrainingSession(config, hp)
    _drive(session, ratings)
    assert session.log.records == log_ref.records
    assert session.log.episode_means == log_ref.episode_means
    assert session.log.to_csv() == log_ref.to_csv()
    assert session.q.entries == q_ref.entries


def test_session_presents_the_post_action_track():
    session = TrainingSession(GenConfig(seed=5), HyperParams(seed=5))
    pending = session.start()
    assert session.current_track() == pending.next_track
    outcome = session.rate(5)
    assert session.current_track() == outcome.pending.next_track


def test_snapshot_restore_round_trip_at_every_step():
    ratings = [6, 2, 9, 4, 7, 5, 3, 8] * 4  # 2 episodes x 16 steps
    config = GenConfig(seed=31, track_length=8)
    hp = HyperParams(episodes=2, steps_per_episode=16, seed=31)

    reference = TrainingSession(config, hp)
    _drive(reference, ratings)

    session = TrainingSession(config, hp)
    session.start()
    for rating in ratings:
        captured = {}
        session.rate(rating, checkpoint=captured.update)
        session = TrainingSession.from_snapshot(captured)
        session.resume()
    assert session.phase == COMPLETED
    assert session.log.records == reference.log.records
    assert session.log.episode_means == reference.log.episode_means
    assert session.q.entries == reference.q.entries


def test_snapshot_restores_identical_pending_step():
    config = GenConfig(seed=17)
    hp = HyperParams(seed=17)
    session = TrainingSession(config, hp)
    session.start()
    captured = {}
    session.rate(5, checkpoint=captured.update)
    live_pending = session.runner.pending

    restored = TrainingSession.from_snapshot(captured)
    restored_pending = restored.resume()
    assert restored_pending.action == live_pending.action
    assert restored_pending.explored == live_pending.explored
    assert restored_pending.next_track == live_pending.next_track
    assert restored_pending.state == live_pending.state


def test_snapshot_of_idle_session_resumes_to_first_step():
    config = GenConfig(seed=23)
    hp = HyperParams(seed=23)
    fresh = TrainingSession(config, hp)
    snap = fresh.snapshot()
    restored = TrainingSession.from_snapshot(snap)
    pending = restored.resume()
    direct = TrainingSession(config, hp).start()
    assert pending.next_track == direct.next_track


def test_snapshot_refused_while_step_pending():
    session = TrainingSession(GenConfig(), HyperParams())
    session.start()
    with pytest.raises(RuntimeError):
        session.snapshot()


def test_completed_snapshot_round_trip():
    session = TrainingSession(GenConfig(track_length=2), HyperParams(episodes=1))
    _drive(session, [5, 5])
    restored = TrainingSession.from_snapshot(session.snapshot())
    assert restored.phase == COMPLETED
    assert restored.resume() is None
    assert restored.log.records == session.log.records
    assert restored.final_track == session.final_track


def test_session_baselines_flow_into_counts():
    session = TrainingSession(
        GenConfig(track_length=2),
        HyperParams(episodes=1),
        baseline_episodes=7,
        baseline_steps=56,
    )
    _drive(session, [5, 5])
    assert session.baseline_episodes + len(session.log.episode_means) == 8
    assert session.baseline_steps + len(session.log.records) == 58
