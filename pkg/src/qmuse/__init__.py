"""qmuse: human-in-the-loop Q-learning music generation.

Episodic tabular Q-learning over short melody tracks, rated step by step
either by a person (through the HTTP service and web UI) or by a built-in
simulated rater for headless runs.
"""

from .agent import (
    HyperParams,
    QTable,
    StepRecord,
    TrainingLog,
    TrainingSession,
    q_update,
    qtable_stats,
    run_episode,
    run_training,
    select_action,
)
from .midi import export_midi, from_wire, to_wire
from .persist import ModelFile, list_models, load_model, save_model
from .rater import EvaluationFeedback, EvaluationStore, simulated_rater
from .theory import NoteName, Scale, generate_scale, note_to_pitch, parse_note
from .track import (
    GenConfig,
    MelodyNote,
    REST,
    TrackArray,
    apply_action,
    encode_state,
    init_track,
    state_space_size,
)

__version__ = "0.1.0"

__all__ = [
    "EvaluationFeedback",
    "EvaluationStore",
    "GenConfig",
    "HyperParams",
    "MelodyNote",
    "ModelFile",
    "NoteName",
    "QTable",
    "REST",
    "Scale",
    "StepRecord",
    "TrackArray",
    "TrainingLog",
    "TrainingSession",
    "apply_action",
    "encode_state",
    "export_midi",
    "from_wire",
    "generate_scale",
    "init_track",
    "list_models",
    "load_model",
    "note_to_pitch",
    "parse_note",
    "q_update",
    "qtable_stats",
    "run_episode",
    "run_training",
    "save_model",
    "select_action",
    "simulated_rater",
    "state_space_size",
    "to_wire",
    "__version__",
]
