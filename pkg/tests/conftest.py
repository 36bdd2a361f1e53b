"""Shared fixtures: a handcrafted flat test world (full control, fast) and
seeded random-rollout helpers."""

from __future__ import annotations

import numpy as np
import pytest

from terranova import engine, mapgen
from terranova.actions import ActionSpaceRegistry, all_pass_plan, sanitize_plan
from terranova.hexgrid import grid_for
from terranova.rng import RandomStream
from terranova.state import (
    FLAT, GameConfig, GameMap, GRASSLAND, NO_FEATURE, OCEAN, PLAINS,
)

# Default fixture starts: comfortably spaced on a 30x20 flat world.
FIXTURE_STARTS = [
    7 * 30 + 5, 7 * 30 + 15, 7 * 30 + 24,
    14 * 30 + 5, 14 * 30 + 15, 14 * 30 + 24,
]
FIXTURE_CS = [4 * 30 + 8, 4 * 30 + 20]


def build_flat_map(width: int = 30, height: int = 20, overrides: dict | None = None,
                   starts: list[int] | None = None,
                   cs_positions: list[int] | None = None) -> GameMap:
    """All-grassland interior with a 2-tile ocean border; `overrides` maps
    tile -> (terrain, elevation, feature) for targeted scenarios."""
    n = width * height
    terrain = np.full(n, GRASSLAND, dtype=np.uint8)
    for row in range(height):
        for col in range(width):
            if row < 2 or row >= height - 2 or col < 2 or col >= width - 2:
                terrain[row * width + col] = OCEAN
    elevation = np.zeros(n, dtype=np.uint8)
    feature = np.full(n, NO_FEATURE, dtype=np.int8)
    resource = np.full(n, -1, dtype=np.int8)
    for tile, (terr, elev, feat) in (overrides or {}).items():
        terrain[tile] = terr
        elevation[tile] = elev
        feature[tile] = feat
    mapgen._mark_coast(terrain, grid_for(width, height))
    m = GameMap(width, height, seed=0,
                terrain=terrain, elevation=elevation, feature=feature,
                resource=resource,
                natural_wonder=np.full(n, -1, dtype=np.int8),
                region=np.full(n, -1, dtype=np.int8),
                improvement=np.full(n, -1, dtype=np.int8),
                owner=np.full(n, -1, dtype=np.int8))
    land = [t for t in range(n) if m.is_land(t)]
    # Six vertical stripes as regions.
    for t in land:
        col = t % width
        m.region[t] = min(5, (col - 2) * 6 // (width - 4))
    m.start_positions = list(starts or FIXTURE_STARTS)
    m.city_state_positions = list(cs_positions if cs_positions is not None else FIXTURE_CS)
    return m


def make_flat_state(overrides: dict | None = None, config: GameConfig | None = None,
                    seed: int = 1234):
    config = config or GameConfig(map_width=30, map_height=20, num_city_states=2)
    m = build_flat_map(config.map_width, config.map_height, overrides,
                       cs_positions=FIXTURE_CS[:config.num_city_states])
    return mapgen.new_game(m, config, seed)


def random_rollout(state, steps: int, seed: int = 0, registry=None):
    """Step with uniformly random (unmasked) actions through sanitize."""
    registry = registry or ActionSpaceRegistry(state.config)
    stream = RandomStream.from_seed(seed, "rollout")
    for _ in range(steps):
        if state.victory.terminal:
            break
        agent = state.active_agent
        masks = engine.legal_action_masks(state, agent, registry)
        raw = [stream.randrange(size) for size in registry.sizes]
        plan, _sel = sanitize_plan(raw, masks)
        engine.advance_state_inplace(state, agent, plan, masks)
    return state


def pass_steps(state, steps: int, registry=None):
    registry = registry or ActionSpaceRegistry(state.config)
    for _ in range(steps):
        engine.advance_state_inplace(state, state.active_agent,
                                     all_pass_plan(registry))
    return state


@pytest.fixture(scope="session")
def generated_state():
    """One real generated map + initial state, shared read-only."""
    config = GameConfig()
    game_map = mapgen.generate_map(42, config)
    return mapgen.new_game(game_map, config, 42)


@pytest.fixture()
def flat_state():
    return make_flat_state()


@pytest.fixture()
def registry():
    return ActionSpaceRegistry(GameConfig(map_width=30, map_height=20,
                                          num_city_states=2))
