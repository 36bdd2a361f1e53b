"""Terra Nova: a six-agent, turn-based, partially observable 4X strategy
environment with balanced procedural hex maps, factorized masked actions,
deterministic batched simulation, replays, and a session service."""

from .actions import (
    ActionMaskSet,
    ActionPlan,
    ActionSpaceRegistry,
    action_space_report,
    all_pass_plan,
    decode_plan,
    encode_plan,
    sanitize_plan,
)
from .engine import (
    accrue_culture_and_tourism,
    advance_state,
    check_victory,
    compute_reward,
    convene_world_congress,
    legal_action_masks,
    resolve_combat,
    run_city_turn,
)
from .mapgen import balance_report, generate_map, new_game, partition_regions
from .observation import Observation, ObservationRegistry, build_observation
from .replay import ReplayRecorder, demographics, load_replay, seek
from .runtime import SimHandle, build_simulator, run_selfplay_batch
from .serialize import (
    load_gamestate,
    read_gamestate,
    save_gamestate,
    state_digest,
    state_to_json,
    write_gamestate,
)
from .state import GameConfig, GameMap, GameState, VictoryStatus
from .visibility import compute_visibility

__version__ = "0.1.0"

__all__ = [
    "ActionMaskSet", "ActionPlan", "ActionSpaceRegistry", "GameConfig",
    "GameMap", "GameState", "Observation", "ObservationRegistry",
    "ReplayRecorder", "SimHandle", "VictoryStatus",
    "accrue_culture_and_tourism", "action_space_report", "advance_state",
    "all_pass_plan", "balance_report", "build_observation", "build_simulator",
    "check_victory", "compute_reward", "compute_visibility",
    "convene_world_congress", "decode_plan", "demographics", "encode_plan",
    "generate_map", "legal_action_masks", "load_gamestate", "load_replay",
    "new_game", "partition_regions", "read_gamestate", "resolve_combat",
    "run_city_turn", "run_selfplay_batch", "sanitize_plan", "save_gamestate",
    "seek", "state_digest", "state_to_json", "write_gamestate",
]
