"""Per-tile rules shared by the map generator and the rules engine:
yields, terrain/feature compatibility, and movement costs.

Yields are 6-tuples ordered like rules.YIELD_KEYS:
(food, production, gold, science, culture, tourism).
"""

from __future__ import annotations

from .rules import RuleTables
from .state import (
    COAST, DESERT, FLAT, FLOOD_PLAINS, FOREST, GameMap, GRASSLAND, HILL,
    JUNGLE, MARSH, MOUNTAIN, NO_FEATURE, OASIS, OCEAN, PLAINS, SNOW, TUNDRA,
)

TERRAIN_YIELDS = {
    OCEAN: (1, 0, 0),
    COAST: (1, 0, 1),
    GRASSLAND: (2, 0, 0),
    PLAINS: (1, 1, 0),
    DESERT: (0, 0, 0),
    TUNDRA: (1, 0, 0),
    SNOW: (0, 0, 0),
}

# feature -> (food, production, gold) deltas
FEATURE_YIELDS = {
    FOREST: (0, 1, 0),
    JUNGLE: (1, 0, 0),
    MARSH: (-1, 0, 0),
    OASIS: (3, 0, 1),
    FLOOD_PLAINS: (2, 0, 0),
}

# feature -> (allowed terrains, allowed elevations)
FEATURE_COMPAT = {
    FOREST: ({GRASSLAND, PLAINS, TUNDRA}, {FLAT, HILL}),
    JUNGLE: ({GRASSLAND, PLAINS}, {FLAT, HILL}),
    MARSH: ({GRASSLAND}, {FLAT}),
    OASIS: ({DESERT}, {FLAT}),
    FLOOD_PLAINS: ({DESERT}, {FLAT}),
}

NATURAL_WONDER_YIELDS = (0, 0, 2, 0, 2, 0)

IMPASSABLE_COST = -1


def feature_allowed(feature: int, terrain: int, elevation: int) -> bool:
    if elevation == MOUNTAIN:
        return False
    terrains, elevations = FEATURE_COMPAT[feature]
    return terrain in terrains and elevation in elevations


def base_tile_yields(game_map: GameMap, tile: int, rules: RuleTables) -> tuple[int, ...]:
    """Yields from terrain, elevation, feature, resource, and natural wonder
    (improvements are added by the engine when present)."""
    terrain = int(game_map.terrain[tile])
    elev = int(game_map.elevation[tile])
    if elev == MOUNTAIN:
        return (0, 0, 0, 0, 0, 0)
    food, prod, gold = TERRAIN_YIELDS[terrain]
    if elev == HILL:
        food = max(0, food - 1)
        prod += 1
    feat = int(game_map.feature[tile])
    if feat != NO_FEATURE:
        df, dp, dg = FEATURE_YIELDS[feat]
        food = max(0, food + df)
        prod += dp
        gold += dg
    science = culture = tourism = 0
    res = int(game_map.resource[tile])
    if res >= 0:
        ry = rules.resources[res].yields
        food += ry[0]
        prod += ry[1]
        gold += ry[2]
        science += ry[3]
        culture += ry[4]
        tourism += ry[5]
    if int(game_map.natural_wonder[tile]) >= 0:
        food += NATURAL_WONDER_YIELDS[0]
        prod += NATURAL_WONDER_YIELDS[1]
        gold += NATURAL_WONDER_YIELDS[2]
        science += NATURAL_WONDER_YIELDS[3]
        culture += NATURAL_WONDER_YIELDS[4]
        tourism += NATURAL_WONDER_YIELDS[5]
    return (food, prod, gold, science, culture, tourism)


def worked_tile_yields(game_map: GameMap, tile: int, rules: RuleTables) -> tuple[int, ...]:
    """Yields including any improvement on the tile."""
    y = base_tile_yields(game_map, tile, rules)
    imp = int(game_map.improvement[tile])
    if imp >= 0:
        iy = rules.improvements[imp].yields
        y = tuple(a + b for a, b in zip(y, iy))
    return y


def movement_cost(game_map: GameMap, tile: int) -> int:
    """Cost to enter a tile for land units; IMPASSABLE_COST if forbidden."""
    terrain = int(game_map.terrain[tile])
    if terrain <= COAST:
        return IMPASSABLE_COST
    elev = int(game_map.elevation[tile])
    if elev == MOUNTAIN:
        return IMPASSABLE_COST
    feat = int(game_map.feature[tile])
    if elev == HILL or feat in (FOREST, JUNGLE, MARSH):
        return 2
    return 1


def resource_fits_tile(game_map: GameMap, tile: int, res_idx: int,
                       rules: RuleTables, allow_feature_add: bool = False) -> int | None:
    """Check resource/tile compatibility.

    Returns NO_FEATURE when the tile fits as-is, a feature code when it fits
    provided that feature is added (only if `allow_feature_add`), or None
    when incompatible.
    """
    r = rules.resources[res_idx]
    from .rules import ELEVATIONS, TERRAINS  # late import keeps module load light
    terrain = TERRAINS[int(game_map.terrain[tile])]
    elev_code = int(game_map.elevation[tile])
    if elev_code == MOUNTAIN or int(game_map.natural_wonder[tile]) >= 0:
        return None
    if terrain not in r.terrains or ELEVATIONS[elev_code] not in r.elevations:
        return None
    feat = int(game_map.feature[tile])
    feat_name = None if feat == NO_FEATURE else _feature_name(feat)
    if feat_name in r.features or (feat == NO_FEATURE and None in r.features):
        return NO_FEATURE
    if allow_feature_add and feat == NO_FEATURE:
        for fname in r.features:
            if fname is None:
                continue
            fcode = _feature_code(fname)
            if feature_allowed(fcode, int(game_map.terrain[tile]), elev_code):
                return fcode
    return None


_FEATURE_NAMES = ["forest", "jungle", "marsh", "oasis", "flood_plains"]


def _feature_name(code: int) -> str:
    return _FEATURE_NAMES[code]


def _feature_code(name: str) -> int:
    return _FEATURE_NAMES.index(name)
