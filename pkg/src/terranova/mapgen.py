"""Seeded procedural generation of balanced six-region hex maps.

Pipeline: fractal landmass mask -> latitude-banded terrain -> elevation
noise -> features -> region partition -> balanced resource placement ->
natural wonders -> start selection -> city-state placement. The whole
pipeline is a pure function of (seed, config); constraint failures retry
with derived seeds (seed + i * 0x9E3779B9) up to a fixed budget and then
raise instead of looping silently.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import visibility
from .rng import MASK64, RandomStream, combine
from .rules import RuleTables
from .state import (
    CITY_STATE_OWNER_BASE, COAST, DESERT, FLAT, FLOOD_PLAINS, FOREST,
    GRASSLAND, HILL, JUNGLE, MARSH, MOUNTAIN, NO_FEATURE, OASIS, OCEAN,
    PLAINS, SNOW, TUNDRA, City, CityStateInfo, EmpireState, GameConfig,
    GameMap, GameState, Unit, make_rng_streams,
)
from .tiles import base_tile_yields, feature_allowed, movement_cost, resource_fits_tile

BORDER_RING = 2          # ocean ring thickness at the map edge
MIN_START_SPACING = 8
MAX_ATTEMPTS = 20
RETRY_STRIDE = 0x9E3779B9
LAND_FRACTION_BAND = (0.35, 0.55)
START_SCORE_SPREAD = 0.25


class MapTooSmall(ValueError):
    pass


class GenerationFailed(RuntimeError):
    pass


class DisconnectedLandmass(RuntimeError):
    pass


class NoValidStart(RuntimeError):
    pass


def _value_noise(stream: RandomStream, width: int, height: int, cell: int) -> np.ndarray:
    """Bilinear-interpolated random grid; one noise octave."""
    gw = width // cell + 2
    gh = height // cell + 2
    grid = np.array([[stream.random() for _ in range(gw)] for _ in range(gh)])
    ys = np.arange(height) / cell
    xs = np.arange(width) / cell
    y0 = ys.astype(int)
    x0 = xs.astype(int)
    ty = (ys - y0)[:, None]
    tx = (xs - x0)[None, :]
    g00 = grid[np.ix_(y0, x0)]
    g01 = grid[np.ix_(y0, x0 + 1)]
    g10 = grid[np.ix_(y0 + 1, x0)]
    g11 = grid[np.ix_(y0 + 1, x0 + 1)]
    top = g00 * (1 - tx) + g01 * tx
    bot = g10 * (1 - tx) + g11 * tx
    return top * (1 - ty) + bot * ty


def fractal_noise(stream: RandomStream, width: int, height: int,
                  scale: int = 8, octaves: int = 3) -> np.ndarray:
    """Fractal value noise normalized to [0, 1]."""
    total = np.zeros((height, width))
    amp = 1.0
    norm = 0.0
    for o in range(octaves):
        cell = max(2, scale >> o)
        total += amp * _value_noise(stream, width, height, cell)
        norm += amp
        amp *= 0.5
    total /= norm
    lo, hi = total.min(), total.max()
    return (total - lo) / max(hi - lo, 1e-9)


def _largest_component(member: np.ndarray, grid) -> np.ndarray:
    """Largest connected component of `member` tiles (hex adjacency)."""
    seen = np.zeros_like(member)
    best: list[int] = []
    for t in np.flatnonzero(member):
        if seen[t]:
            continue
        comp = []
        q = deque([int(t)])
        seen[t] = True
        while q:
            cur = q.popleft()
            comp.append(cur)
            for nb in grid.neighbors[cur]:
                if nb >= 0 and member[nb] and not seen[nb]:
                    seen[nb] = True
                    q.append(int(nb))
        if len(comp) > len(best):
            best = comp
    mask = np.zeros_like(member)
    mask[best] = True
    return mask


def _build_landmass(stream: RandomStream, width: int, height: int) -> np.ndarray:
    noise = fractal_noise(stream, width, height, scale=10, octaves=3)
    rows = (np.arange(height)[:, None] - (height - 1) / 2) / (height / 2 - BORDER_RING)
    cols = (np.arange(width)[None, :] - (width - 1) / 2) / (width / 2 - BORDER_RING)
    radial = 1.0 - np.sqrt(rows ** 2 + cols ** 2).clip(0, 1.4) ** 2
    score = 0.55 * noise + 0.45 * radial
    score[:BORDER_RING, :] = -1
    score[-BORDER_RING:, :] = -1
    score[:, :BORDER_RING] = -1
    score[:, -BORDER_RING:] = -1
    target = 0.42 + 0.06 * stream.random()
    n_land = int(round(target * width * height))
    flat = score.ravel()
    order = np.argsort(-flat, kind="stable")
    land = np.zeros(width * height, dtype=bool)
    land[order[:n_land]] = True
    return land


def _assign_terrain(stream: RandomStream, land: np.ndarray, width: int, height: int) -> np.ndarray:
    terrain = np.full(width * height, OCEAN, dtype=np.uint8)
    lat = np.abs((np.arange(height) - (height - 1) / 2) / ((height - 1) / 2))
    lat_by_tile = np.repeat(lat, width)
    wet = fractal_noise(stream, width, height, scale=6, octaves=2).ravel()
    mix = fractal_noise(stream, width, height, scale=5, octaves=2).ravel()
    for t in np.flatnonzero(land):
        l = lat_by_tile[t]
        if l >= 0.86:
            terrain[t] = SNOW
        elif l >= 0.66:
            terrain[t] = TUNDRA
        elif l <= 0.38 and wet[t] > 0.64:
            terrain[t] = DESERT
        elif mix[t] > 0.52:
            terrain[t] = PLAINS
        else:
            terrain[t] = GRASSLAND
    return terrain


def _mark_coast(terrain: np.ndarray, grid) -> None:
    land = terrain >= GRASSLAND
    for t in np.flatnonzero(terrain == OCEAN):
        for nb in grid.neighbors[t]:
            if nb >= 0 and land[nb]:
                terrain[t] = COAST
                break


def _assign_elevation(stream: RandomStream, land: np.ndarray,
                      width: int, height: int) -> np.ndarray:
    elev = np.full(width * height, FLAT, dtype=np.uint8)
    noise = fractal_noise(stream, width, height, scale=5, octaves=3).ravel()
    land_ids = np.flatnonzero(land)
    vals = noise[land_ids]
    mountain_cut = np.quantile(vals, 0.94)
    hill_cut = np.quantile(vals, 0.76)
    elev[land_ids[vals >= mountain_cut]] = MOUNTAIN
    elev[land_ids[(vals >= hill_cut) & (vals < mountain_cut)]] = HILL
    return elev


def _assign_features(stream: RandomStream, terrain: np.ndarray, elev: np.ndarray,
                     width: int, height: int) -> np.ndarray:
    feature = np.full(width * height, NO_FEATURE, dtype=np.int8)
    f1 = fractal_noise(stream, width, height, scale=4, octaves=2).ravel()
    f2 = fractal_noise(stream, width, height, scale=4, octaves=2).ravel()
    lat = np.abs((np.arange(height) - (height - 1) / 2) / ((height - 1) / 2))
    lat_by_tile = np.repeat(lat, width)
    for t in range(width * height):
        terr, el = int(terrain[t]), int(elev[t])
        if terr < GRASSLAND or el == MOUNTAIN:
            continue
        if lat_by_tile[t] < 0.28 and f1[t] > 0.60 and feature_allowed(JUNGLE, terr, el):
            feature[t] = JUNGLE
        elif f1[t] > 0.62 and feature_allowed(FOREST, terr, el):
            feature[t] = FOREST
        elif f2[t] > 0.90 and feature_allowed(MARSH, terr, el):
            feature[t] = MARSH
        elif terr == DESERT and el == FLAT:
            if f2[t] > 0.88:
                feature[t] = OASIS
            elif f2[t] < 0.16:
                feature[t] = FLOOD_PLAINS
    return feature


def partition_regions(game_map: GameMap) -> list[list[int]]:
    """Split the landmass into six near-equal regions via balanced
    multi-source growth from farthest-point seeds; size spread <= 2."""
    grid = game_map.grid
    land = game_map.terrain >= GRASSLAND
    land_ids = [int(t) for t in np.flatnonzero(land)]
    if not land_ids:
        raise DisconnectedLandmass("no land to partition")
    comp = _largest_component(land, grid)
    if comp.sum() != land.sum():
        raise DisconnectedLandmass("landmass is not connected")

    # Farthest-point seeds, starting from the westernmost land tile.
    seeds = [min(land_ids, key=lambda t: (t % game_map.width, t))]
    dist = _bfs_distance(grid, land, seeds[0])
    for _ in range(5):
        nxt = max(land_ids, key=lambda t: (dist[t], -t))
        seeds.append(nxt)
        dist = np.minimum(dist, _bfs_distance(grid, land, nxt))

    region = np.full(game_map.n_tiles, -1, dtype=np.int8)
    frontiers = []
    sizes = [0] * 6
    for i, s in enumerate(seeds):
        region[s] = i
        sizes[i] = 1
        frontiers.append(deque([s]))
    remaining = int(land.sum()) - 6
    while remaining > 0:
        grew = False
        for i in sorted(range(6), key=lambda i: (sizes[i], i)):
            f = frontiers[i]
            claimed = False
            while f and not claimed:
                cur = f[0]
                for nb in grid.neighbors[cur]:
                    if nb >= 0 and land[nb] and region[nb] == -1:
                        region[nb] = i
                        sizes[i] += 1
                        f.append(int(nb))
                        remaining -= 1
                        claimed = True
                        break
                else:
                    f.popleft()
            if claimed:
                grew = True
                break
        if not grew:
            break
    # Safety net: claim any orphans for the smallest adjacent region.
    for t in land_ids:
        if region[t] == -1:
            nbr_regions = [int(region[nb]) for nb in grid.neighbors[t]
                           if nb >= 0 and region[nb] >= 0]
            tgt = min(nbr_regions, key=lambda rr: (sizes[rr], rr)) if nbr_regions \
                else min(range(6), key=lambda rr: (sizes[rr], rr))
            region[t] = tgt
            sizes[tgt] += 1
    _equalize_regions(game_map, region, sizes, grid, land)
    game_map.region[:] = region
    return [sorted(int(t) for t in np.flatnonzero(region == i)) for i in range(6)]


def _bfs_distance(grid, member: np.ndarray, source: int) -> np.ndarray:
    dist = np.full(member.shape[0], 1 << 30, dtype=np.int32)
    dist[source] = 0
    q = deque([source])
    while q:
        cur = q.popleft()
        for nb in grid.neighbors[cur]:
            if nb >= 0 and member[nb] and dist[nb] > dist[cur] + 1:
                dist[nb] = dist[cur] + 1
                q.append(int(nb))
    return dist


def _equalize_regions(game_map, region, sizes, grid, land) -> None:
    """Move border tiles from the largest to the smallest region until the
    size spread is <= 2. Transfers prefer tiles adjacent to the receiver."""
    for _ in range(game_map.n_tiles):
        big = max(range(6), key=lambda i: (sizes[i], -i))
        small = min(range(6), key=lambda i: (sizes[i], i))
        if sizes[big] - sizes[small] <= 2:
            return
        candidate = -1
        for t in np.flatnonzero(region == big):
            if any(nb >= 0 and region[nb] == small for nb in grid.neighbors[t]):
                candidate = int(t)
                break
        if candidate < 0:
            # No shared border; take the big-region tile with fewest
            # same-region neighbors (least disruptive detachment).
            members = np.flatnonzero(region == big)
            candidate = int(min(
                members,
                key=lambda t: (sum(1 for nb in grid.neighbors[t]
                                   if nb >= 0 and region[nb] == big), t)))
        region[candidate] = small
        sizes[big] -= 1
        sizes[small] += 1


def place_resources_balanced(game_map: GameMap, regions: list[list[int]],
                             stream: RandomStream, rules: RuleTables) -> dict:
    """Assign each region a distinct regional luxury (6-10 in-region spawns,
    at most 1 in each foreign region), guarantee >= 2 aluminum deposits per
    region, then sprinkle the remaining strategics and bonus resources."""
    lux_pool = [i for i, r in enumerate(rules.resources) if r.klass == "luxury" and r.regional]
    stream.shuffle(lux_pool)
    assignment: dict[int, int] = {}
    for rid in range(6):
        chosen = -1
        for res in lux_pool:
            if res in assignment.values():
                continue
            fits = [t for t in regions[rid]
                    if resource_fits_tile(game_map, t, res, rules, allow_feature_add=True) is not None
                    and game_map.resource[t] < 0]
            if len(fits) >= 6:
                chosen = res
                break
        if chosen < 0:
            raise GenerationFailed(f"region {rid}: no luxury with 6 compatible tiles")
        assignment[rid] = chosen
        count = stream.randint(6, 10)
        _spawn_resource(game_map, regions[rid], chosen, count, stream, rules)
    for rid in range(6):
        for other in range(6):
            if other == rid:
                continue
            if stream.random() < 0.35:
                _spawn_resource(game_map, regions[other], assignment[rid], 1, stream, rules)

    aluminum = rules.resource_idx["aluminum"]
    for rid in range(6):
        placed = _spawn_resource(game_map, regions[rid], aluminum, 2, stream, rules)
        if placed < 2:
            placed += _spawn_resource(game_map, regions[rid], aluminum, 2 - placed,
                                      stream, rules, relax=True)
        if placed < 2:
            raise GenerationFailed(f"region {rid}: could not seat 2 aluminum deposits")

    per_region_strategics = [("horses", 2), ("iron", 2), ("coal", 1), ("oil", 1), ("uranium", 1)]
    for rid in range(6):
        for res_id, count in per_region_strategics:
            _spawn_resource(game_map, regions[rid], rules.resource_idx[res_id],
                            count, stream, rules)
    bonus_pool = [i for i, r in enumerate(rules.resources) if r.klass == "bonus"]
    for rid in range(6):
        budget = max(3, len(regions[rid]) // 12)
        for _ in range(budget):
            res = bonus_pool[stream.randrange(len(bonus_pool))]
            _spawn_resource(game_map, regions[rid], res, 1, stream, rules)
        fish = rules.resource_idx["fish"]
        coast_ring = sorted({int(nb) for t in regions[rid]
                             for nb in game_map.grid.neighbors[t]
                             if nb >= 0 and game_map.terrain[nb] == COAST})
        _spawn_resource(game_map, coast_ring, fish, 2, stream, rules)
    return assignment


def _spawn_resource(game_map: GameMap, tiles: list[int], res: int, count: int,
                    stream: RandomStream, rules: RuleTables, relax: bool = False) -> int:
    pool = [t for t in tiles if game_map.resource[t] < 0]
    fits: list[tuple[int, int]] = []
    for t in pool:
        verdict = resource_fits_tile(game_map, t, res, rules, allow_feature_add=True)
        if verdict is not None:
            fits.append((t, verdict))
        elif relax and game_map.passable(t):
            fits.append((t, NO_FEATURE))
    stream.shuffle(fits)
    placed = 0
    for t, feat in fits[:count]:
        game_map.resource[t] = res
        if feat != NO_FEATURE:
            game_map.feature[t] = feat
        placed += 1
    return placed


def _place_natural_wonders(game_map: GameMap, stream: RandomStream) -> None:
    count = stream.randint(2, 4)
    candidates = [int(t) for t in np.flatnonzero(
        (game_map.elevation == MOUNTAIN) | ((game_map.elevation == HILL)
                                            & (game_map.resource < 0)))
        if game_map.is_land(t)]
    stream.shuffle(candidates)
    chosen: list[int] = []
    for t in candidates:
        if len(chosen) >= count:
            break
        if all(game_map.grid.distance(t, c) >= 5 for c in chosen):
            chosen.append(t)
    for i, t in enumerate(sorted(chosen)):
        game_map.natural_wonder[t] = i
        game_map.resource[t] = -1
    game_map.natural_wonder_positions = sorted(chosen)


def start_score(game_map: GameMap, tile: int, rules: RuleTables) -> int:
    """Documented settling score: food+production over the radius-2 disc,
    +3 for an adjacent coast, +2 for adjacent fresh water (oasis/marsh/
    flood plains)."""
    score = 0
    for t in game_map.grid.disc(tile, 2):
        y = base_tile_yields(game_map, t, rules)
        score += y[0] + y[1]
    nbrs = [nb for nb in game_map.grid.neighbors[tile] if nb >= 0]
    if any(game_map.terrain[nb] == COAST for nb in nbrs):
        score += 3
    if any(int(game_map.feature[nb]) in (OASIS, MARSH, FLOOD_PLAINS) for nb in nbrs):
        score += 2
    return score


def select_start_positions(game_map: GameMap, regions: list[list[int]],
                           rules: RuleTables) -> list[int]:
    """One start per region maximizing start_score subject to pairwise
    spacing >= MIN_START_SPACING, with picks clustered near the weakest
    region's best score so the fairness band holds. All starts land on one
    walkable component; ties break toward the lowest tile id."""
    grid = game_map.grid
    walkable = np.array([movement_cost(game_map, t) > 0 for t in range(game_map.n_tiles)])
    main = _largest_component(walkable, grid)
    scored: list[list[tuple[int, int]]] = []
    for rid in range(6):
        cand = [(start_score(game_map, t, rules), -t) for t in regions[rid]
                if main[t] and game_map.natural_wonder[t] < 0]
        cand.sort(reverse=True)
        if not cand:
            raise NoValidStart(f"region {rid} has no walkable start candidate")
        scored.append([(s, -negt) for s, negt in cand])
    # The weakest region's reachable maximum caps what fairness allows;
    # aim every pick at that target score.
    target = min(cands[0][0] for cands in scored)
    ranked: list[list[tuple[int, int]]] = []
    for rid in range(6):
        ranked.append(sorted(scored[rid][:120],
                             key=lambda st: (abs(st[0] - target), -st[0], st[1])))
    order = sorted(range(6), key=lambda rid: (scored[rid][0][0], rid))
    chosen: dict[int, int] = {}
    chosen_scores: dict[int, int] = {}

    def place(idx: int) -> bool:
        if idx == len(order):
            return True
        rid = order[idx]
        for s, t in ranked[rid]:
            if all(grid.distance(t, c) >= MIN_START_SPACING for c in chosen.values()):
                chosen[rid] = t
                chosen_scores[rid] = s
                if place(idx + 1):
                    return True
                del chosen[rid]
                del chosen_scores[rid]
        return False

    if not place(0):
        raise NoValidStart("could not satisfy start spacing constraint")
    best = max(chosen_scores.values())
    if best > 0 and (best - min(chosen_scores.values())) > START_SCORE_SPREAD * best:
        raise NoValidStart("start score spread above fairness band")
    return [chosen[rid] for rid in range(6)]


def _place_city_states(game_map: GameMap, starts: list[int], count: int,
                       stream: RandomStream) -> list[int]:
    grid = game_map.grid
    placed: list[int] = []
    for spacing_starts, spacing_cs in ((5, 4), (4, 3)):
        placed = []
        for rid in range(6):
            if len(placed) >= count:
                break
            cands = [int(t) for t in np.flatnonzero(game_map.region == rid)
                     if game_map.passable(t)
                     and all(grid.distance(t, s) >= spacing_starts for s in starts)
                     and all(grid.distance(t, c) >= spacing_cs for c in placed)]
            if cands:
                placed.append(cands[stream.randrange(len(cands))])
        rest = [int(t) for t in np.flatnonzero(game_map.region >= 0)
                if game_map.passable(t)
                and all(grid.distance(t, s) >= spacing_starts for s in starts)
                and all(grid.distance(t, c) >= spacing_cs for c in placed)]
        stream.shuffle(rest)
        placed.extend(rest[:count - len(placed)])
        if len(placed) >= count:
            return placed[:count]
    raise GenerationFailed("could not place city-states")


def generate_map(seed: int, config: GameConfig) -> GameMap:
    """Deterministic map build; retries with derived seeds on constraint
    failure, raising GenerationFailed when the budget runs out."""
    if config.map_width < 30 or config.map_height < 20:
        raise MapTooSmall("map must be at least 30x20")
    last_err: Exception | None = None
    for attempt in range(MAX_ATTEMPTS):
        attempt_seed = (seed + attempt * RETRY_STRIDE) & MASK64
        try:
            return _generate_once(seed, attempt_seed, config)
        except (GenerationFailed, DisconnectedLandmass, NoValidStart) as err:
            last_err = err
    raise GenerationFailed(f"map generation failed after {MAX_ATTEMPTS} attempts "
                           f"(seed {seed}): {last_err}")


def _generate_once(public_seed: int, attempt_seed: int, config: GameConfig) -> GameMap:
    stream = RandomStream.from_seed(attempt_seed, "mapgen")
    width, height = config.map_width, config.map_height
    rules = config.rule_tables
    land = _build_landmass(stream, width, height)
    grid_probe = GameMap(width, height, public_seed,
                         terrain=np.full(width * height, OCEAN, dtype=np.uint8),
                         elevation=np.zeros(width * height, dtype=np.uint8),
                         feature=np.full(width * height, NO_FEATURE, dtype=np.int8),
                         resource=np.full(width * height, -1, dtype=np.int8),
                         natural_wonder=np.full(width * height, -1, dtype=np.int8),
                         region=np.full(width * height, -1, dtype=np.int8),
                         improvement=np.full(width * height, -1, dtype=np.int8),
                         owner=np.full(width * height, -1, dtype=np.int8))
    game_map = grid_probe
    land = _largest_component(land, game_map.grid)
    frac = land.sum() / land.shape[0]
    if not (LAND_FRACTION_BAND[0] <= frac <= LAND_FRACTION_BAND[1]):
        raise GenerationFailed(f"land fraction {frac:.2f} outside band")
    game_map.terrain = _assign_terrain(stream, land, width, height)
    _mark_coast(game_map.terrain, game_map.grid)
    game_map.elevation = _assign_elevation(stream, land, width, height)
    game_map.feature = _assign_features(stream, game_map.terrain, game_map.elevation,
                                        width, height)
    regions = partition_regions(game_map)
    place_resources_balanced(game_map, regions, stream, rules)
    _place_natural_wonders(game_map, stream)
    starts = select_start_positions(game_map, regions, rules)
    game_map.start_positions = starts
    game_map.city_state_positions = _place_city_states(
        game_map, starts, config.num_city_states, stream)
    return game_map


def new_game(game_map: GameMap, config: GameConfig, seed: int) -> GameState:
    """Initial state: one Settler and one Warrior per agent at its start,
    city-states founded, fog limited to spawn line of sight."""
    state = GameState(config=config, map=game_map.clone())
    state.rng = make_rng_streams(combine(seed, 0xA11CE))
    state.explored = np.zeros((6, game_map.n_tiles), dtype=bool)
    rules = config.rule_tables
    settler = rules.unit_idx["settler"]
    warrior = rules.unit_idx["warrior"]
    for agent in range(6):
        e = EmpireState(agent=agent)
        e.cs_influence = [0] * config.num_city_states
        e.unit_slot_ids = [-1] * config.unit_slots
        e.city_slot_ids = [-1] * config.city_slots
        state.empires.append(e)
    for agent in range(6):
        start = game_map.start_positions[agent]
        for kind in (settler, warrior):
            uid = state.next_unit_id
            state.next_unit_id += 1
            u = Unit(uid, agent, kind, position=start,
                     moves_left=float(rules.units[kind].moves))
            state.units[uid] = u
            slot = state.empires[agent].unit_slot_ids.index(-1)
            state.empires[agent].unit_slot_ids[slot] = uid
    for k, pos in enumerate(game_map.city_state_positions):
        cid = state.next_city_id
        state.next_city_id += 1
        owner = CITY_STATE_OWNER_BASE + k
        city = City(cid, owner, owner, pos, population=3, hp=200)
        border = sorted({pos, *[int(nb) for nb in game_map.grid.neighbors[pos]
                                if nb >= 0 and game_map.is_land(int(nb))]})
        city.border_tiles = border
        state.cities[cid] = city
        state.city_states.append(CityStateInfo(k, pos, cid))
        for t in border:
            state.map.owner[t] = owner
    state.rebuild_indexes()
    for agent in range(6):
        visibility.update_explored(state, agent)
    return state


@dataclass
class BalanceMetrics:
    seed: int
    land_tiles: int
    land_fraction: float
    region_sizes: list[int]
    regional_resources: list[str]
    regional_in_counts: list[int]
    regional_leakage_max: list[int]   # worst single foreign-region count, per region
    aluminum_counts: list[int]
    start_scores: list[int]
    natural_wonders: int
    extras: dict = field(default_factory=dict)

    def to_row(self) -> dict:
        row = {
            "seed": self.seed,
            "land_tiles": self.land_tiles,
            "land_fraction": round(self.land_fraction, 4),
            "region_size_spread": max(self.region_sizes) - min(self.region_sizes),
            "natural_wonders": self.natural_wonders,
        }
        for i in range(6):
            row[f"region_{i}_size"] = self.region_sizes[i]
            row[f"region_{i}_resource"] = self.regional_resources[i]
            row[f"region_{i}_in_count"] = self.regional_in_counts[i]
            row[f"region_{i}_leak_max"] = self.regional_leakage_max[i]
            row[f"region_{i}_aluminum"] = self.aluminum_counts[i]
            row[f"region_{i}_start_score"] = self.start_scores[i]
        return row


def corpus_summary(rows: list[dict]) -> list[dict]:
    """Aggregate per-map balance rows into mean/min/max per numeric metric."""
    if not rows:
        return []
    numeric = [k for k, v in rows[0].items() if isinstance(v, (int, float))]
    out = []
    for key in numeric:
        values = [row[key] for row in rows]
        out.append({
            "metric": key,
            "mean": round(sum(values) / len(values), 4),
            "min": min(values),
            "max": max(values),
        })
    return out


def balance_report(game_map: GameMap, rules: RuleTables) -> BalanceMetrics:
    """Measured per-region balance metrics for one map."""
    region_sizes = [int((game_map.region == i).sum()) for i in range(6)]
    land = int((game_map.region >= 0).sum())
    regional_res: list[int] = []
    for rid in range(6):
        counts: dict[int, int] = {}
        for t in np.flatnonzero(game_map.region == rid):
            res = int(game_map.resource[t])
            if res >= 0 and rules.resources[res].klass == "luxury":
                counts[res] = counts.get(res, 0) + 1
        regional_res.append(max(counts, key=lambda r: (counts[r], -r)) if counts else -1)
    in_counts, leak_max, alu_counts = [], [], []
    aluminum = rules.resource_idx["aluminum"]
    for rid in range(6):
        res = regional_res[rid]
        inside = sum(1 for t in np.flatnonzero(game_map.region == rid)
                     if int(game_map.resource[t]) == res)
        worst = max(sum(1 for t in np.flatnonzero(game_map.region == other)
                        if int(game_map.resource[t]) == res)
                    for other in range(6) if other != rid) if res >= 0 else 0
        in_counts.append(inside)
        leak_max.append(worst)
        alu_counts.append(sum(1 for t in np.flatnonzero(game_map.region == rid)
                              if int(game_map.resource[t]) == aluminum))
    return BalanceMetrics(
        seed=game_map.seed,
        land_tiles=land,
        land_fraction=land / game_map.n_tiles,
        region_sizes=region_sizes,
        regional_resources=[rules.resources[r].id if r >= 0 else "none" for r in regional_res],
        regional_in_counts=in_counts,
        regional_leakage_max=leak_max,
        aluminum_counts=alu_counts,
        start_scores=[start_score(game_map, t, rules) for t in game_map.start_positions],
        natural_wonders=len(game_map.natural_wonder_positions),
    )
