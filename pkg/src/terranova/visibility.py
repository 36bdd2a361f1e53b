"""Line of sight and per-agent three-state tile knowledge.

Visibility states: 0 = unexplored (everything hidden), 1 = explored
(static layers known), 2 = visible (dynamic layers known too). Explored is
persisted per agent on the game state and only ever grows; visible is
recomputed from current unit/city positions.

Sight rules: units project a disc of radius `config.sight_radius`
(+1 when standing on a hill); cities see all tiles they own plus a disc
around the city center. A tile on the line between viewer and target
blocks sight if it is a mountain, or — when the viewer is not elevated —
a hill or forest/jungle. The blocking tile itself is visible.
"""

from __future__ import annotations

import numpy as np

from .state import FOREST, GameState, HILL, JUNGLE, MOUNTAIN

UNEXPLORED, EXPLORED, VISIBLE = 0, 1, 2


def _blocks(game_map, tile: int, elevated: bool) -> bool:
    elev = int(game_map.elevation[tile])
    if elev == MOUNTAIN:
        return True
    if elevated:
        return False
    return elev == HILL or int(game_map.feature[tile]) in (FOREST, JUNGLE)


def sight_from(game_map, origin: int, radius: int) -> list[int]:
    """Tiles visible from one origin tile, shadow-blocking applied."""
    grid = game_map.grid
    elevated = int(game_map.elevation[origin]) == HILL
    if elevated:
        radius += 1
    out = [origin]
    elevation = game_map.elevation
    feature = game_map.feature
    for target, intermediates in grid.sight_lines(origin, radius):
        blocked = False
        for mid in intermediates:
            elev = elevation[mid]
            if elev == MOUNTAIN or (not elevated and
                                    (elev == HILL or feature[mid] in (FOREST, JUNGLE))):
                blocked = True
                break
        if not blocked:
            out.append(target)
    return out


def visible_tiles(state: GameState, agent: int) -> np.ndarray:
    """Boolean mask of tiles currently within the agent's line of sight."""
    mask = np.zeros(state.map.n_tiles, dtype=bool)
    radius = state.config.sight_radius
    for u in state.units.values():
        if u.owner == agent:
            mask[sight_from(state.map, u.position, radius)] = True
    for c in state.cities.values():
        if c.owner == agent:
            if c.border_tiles:
                mask[c.border_tiles] = True
            mask[sight_from(state.map, c.position, radius)] = True
    return mask


def compute_visibility(state: GameState, agent: int) -> np.ndarray:
    """Per-tile visibility state (0/1/2) for one agent."""
    vis = np.zeros(state.map.n_tiles, dtype=np.int8)
    vis[state.explored[agent]] = EXPLORED
    vis[visible_tiles(state, agent)] = VISIBLE
    return vis


def update_explored(state: GameState, agent: int) -> None:
    """Fold the agent's current sight into its persistent explored set."""
    state.explored[agent] |= visible_tiles(state, agent)
