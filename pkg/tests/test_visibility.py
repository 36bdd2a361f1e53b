from terranova import visibility
from terranova.actions import ActionSpaceRegistry
from terranova.state import FLAT, FOREST, GRASSLAND, HILL, MOUNTAIN

from conftest import FIXTURE_STARTS, build_flat_map, make_flat_state, random_rollout


def test_flat_ground_unit_sees_19_tile_disc(flat_state):
    # Radius-2 sight on open grassland: the full 19-tile disc, no shadows.
    start = FIXTURE_STARTS[0]
    seen = visibility.sight_from(flat_state.map, start, 2)
    assert sorted(seen) == sorted(flat_state.map.grid.disc(start, 2))
    assert len(seen) == 19


def test_mountain_blocks_but_is_itself_visible():
    start = FIXTURE_STARTS[0]
    grid = build_flat_map().grid
    east = grid.neighbors[start][0]         # first cube direction: due east
    behind = grid.neighbors[east][0]
    state = make_flat_state(overrides={int(east): (GRASSLAND, MOUNTAIN, -1)})
    seen = set(visibility.sight_from(state.map, start, 2))
    assert int(east) in seen                # the blocker is visible
    assert int(behind) not in seen          # the tile behind it is shadowed


def test_forest_blocks_for_ground_but_not_hill_observers():
    start = FIXTURE_STARTS[0]
    grid = build_flat_map().grid
    east = int(grid.neighbors[start][0])
    behind = int(grid.neighbors[east][0])
    ground = make_flat_state(overrides={east: (GRASSLAND, FLAT, FOREST)})
    assert behind not in visibility.sight_from(ground.map, start, 2)
    elevated = make_flat_state(overrides={east: (GRASSLAND, FLAT, FOREST),
                                          start: (GRASSLAND, HILL, -1)})
    assert behind in visibility.sight_from(elevated.map, start, 2)


def test_hill_observer_gets_extended_radius():
    start = FIXTURE_STARTS[0]
    state = make_flat_state(overrides={start: (GRASSLAND, HILL, -1)})
    seen = visibility.sight_from(state.map, start, 2)
    disc3 = set(state.map.grid.disc(start, 3))
    assert set(seen) == disc3
    assert len(seen) == 37


def test_city_tiles_always_visible_to_owner(flat_state):
    registry = ActionSpaceRegistry(flat_state.config)
    from test_engine_core import found_first_city
    found_first_city(flat_state, registry)
    city = next(c for c in flat_state.cities.values() if c.owner == 0)
    # Move both units far away conceptually: delete them outright.
    for uid in [u.id for u in flat_state.units.values() if u.owner == 0]:
        flat_state.units.pop(uid)
    flat_state.rebuild_indexes()
    vis = visibility.compute_visibility(flat_state, 0)
    for t in city.border_tiles:
        assert vis[t] == visibility.VISIBLE


def test_explored_never_shrinks_over_random_game(flat_state):
    registry = ActionSpaceRegistry(flat_state.config)
    explored_counts = [flat_state.explored[a].sum() for a in range(6)]
    prev_sets = [flat_state.explored[a].copy() for a in range(6)]
    for burst in range(8):
        random_rollout(flat_state, 25, seed=burst, registry=registry)
        for a in range(6):
            now = flat_state.explored[a]
            assert bool((prev_sets[a] & ~now).any()) is False
            prev_sets[a] = now.copy()
        if flat_state.victory.terminal:
            break


def test_visibility_states_are_three_valued(flat_state):
    vis = visibility.compute_visibility(flat_state, 0)
    assert set(vis.tolist()) <= {visibility.UNEXPLORED, visibility.EXPLORED,
                                 visibility.VISIBLE}
    # At spawn, the unit's surroundings are visible and the far map is not.
    assert vis[FIXTURE_STARTS[0]] == visibility.VISIBLE
    assert (vis == visibility.UNEXPLORED).sum() > 0
