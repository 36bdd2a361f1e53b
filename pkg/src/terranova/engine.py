"""The rules engine: state transition, legality masks, combat, cities,
congress, culture/tourism accrual, victory evaluation, and rewards.

One step advances one agent's complete composite turn; six steps make one
game turn. Everything here is deterministic: iteration orders are fixed
(slot order, sorted ids), and all randomness comes from the state's named
RNG substreams (combat only, at present).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from . import visibility
from .actions import (
    ABILITY_FORTIFY, ABILITY_FOUND_CITY, ABILITY_IMPROVE, ActionMaskSet,
    ActionPlan, ActionSpaceRegistry, MOVE_DISC_RADIUS, MOVE_TARGETS,
    opponents_of,
)
from .state import (
    CITY_STATE_OWNER_BASE, City, Event, FOREST, GameState, HILL, JUNGLE,
    PendingDeal, TerminalState, TradeDeal, TradeRoute, Unit,
    UnsanitizedPlan, VictoryStatus, WrongAgent,
)
from .tiles import base_tile_yields, movement_cost, worked_tile_yields

UNIT_MAX_HP = 100
CITY_MAX_HP = 200
CAPTURE_HP = 50
FORTIFY_BONUS = 4
HILL_DEFENSE = 3
COVER_DEFENSE = 3          # forest / jungle
CITY_BASE_STRENGTH = 10
UNIT_HEAL_FRIENDLY = 10
UNIT_HEAL_NEUTRAL = 5
CITY_HEAL = 10
OVERFLOW_CAP = 100
WONDER_REFUND_NUM, WONDER_REFUND_DEN = 1, 2     # 50% refund on a lost wonder race
TRADE_ROUTE_GOLD = 4
TRADE_ROUTE_TURNS = 30
MAX_TRADE_ROUTES = 2
DEAL_LUX_GOLD = 45
DEAL_TURNS = 30
PEACE_TREATY_TURNS = 10
CS_ALLY_THRESHOLD = 60
CS_INFLUENCE_DECAY = 1
GOLD_PER_INFLUENCE = 10
IMPROVE_TURNS = 3
MIN_CITY_SPACING = 3
# Palace yields in the original capital while its founder holds it.
CAPITAL_BONUS = (0, 1, 2, 1, 1, 0)
FOCUS_WEIGHTS = {
    1: (2, 2, 1, 1, 1, 0),   # balanced
    2: (4, 1, 1, 1, 1, 0),   # food
    3: (1, 4, 1, 1, 1, 0),   # production
    4: (1, 1, 4, 1, 1, 0),   # gold
    5: (1, 1, 1, 4, 1, 0),   # science
}


class NotAtWar(Exception):
    pass


class NoAttacksLeft(Exception):
    pass


class ModeUnknown(ValueError):
    pass


class NotDue(Exception):
    pass


class CongressInactive(Exception):
    pass


def growth_threshold(population: int) -> int:
    return 15 + 8 * (population - 1) + int((population - 1) ** 1.5)


def policy_cost(policies_owned: int) -> int:
    return 25 + 22 * policies_owned + 3 * policies_owned * policies_owned


def border_threshold(tiles_acquired: int) -> int:
    return 20 + 15 * tiles_acquired


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


# ---------------------------------------------------------------------------
# Movement


def reachable_targets(state: GameState, unit: Unit) -> dict[int, tuple]:
    """Targets a unit can act on this step, within the radius-3 move disc.

    Returns tile -> ("move", cost, path) | ("attack", cost, path_to_adjacent)
    | ("ranged", 0, []). Paths exclude the start tile. Expansion never
    passes through foreign units or cities; own units allow pass-through
    but not stacking within a category.
    """
    rules = state.rules
    mover = rules.units[unit.kind]
    budget = unit.moves_left
    if budget <= 0:
        return {}
    m = state.map
    grid = m.grid
    disc = set(grid.disc(unit.position, MOVE_DISC_RADIUS))
    empire = state.empires[unit.owner]
    best: dict[int, float] = {unit.position: 0.0}
    prev: dict[int, int] = {}
    heap: list[tuple[float, int]] = [(0.0, unit.position)]
    results: dict[int, tuple] = {}

    def path_to(t: int) -> list[int]:
        path = []
        while t != unit.position:
            path.append(t)
            t = prev[t]
        path.reverse()
        return path

    def hostile(owner: int) -> bool:
        return owner < CITY_STATE_OWNER_BASE and owner != unit.owner and empire.is_at_war(owner)

    while heap:
        cost, cur = heapq.heappop(heap)
        if cost > best.get(cur, 1e9):
            continue
        for nb in grid.neighbors[cur]:
            if nb < 0 or nb not in disc:
                continue
            nb = int(nb)
            step = movement_cost(m, nb)
            if step < 0:
                continue
            city = state.city_at(nb)
            mil = state.unit_at(nb, True)
            civ = state.unit_at(nb, False)
            foreign_city = city is not None and city.owner != unit.owner
            foreign_unit = (mil is not None and mil.owner != unit.owner) or \
                           (civ is not None and civ.owner != unit.owner)
            if foreign_city or foreign_unit:
                # Attack node (melee): requires a war, a military mover, and
                # one movement point left at the adjacent tile.
                owner = city.owner if foreign_city else (mil.owner if mil and mil.owner != unit.owner else civ.owner)
                if (not mover.civilian and hostile(owner) and cost < budget
                        and nb not in results):
                    results[nb] = ("attack", cost + 1, path_to(cur) if cur != unit.position else [])
                continue
            new_cost = cost + step
            if new_cost > budget or new_cost >= best.get(nb, 1e9):
                continue
            best[nb] = new_cost
            prev[nb] = cur
            heapq.heappush(heap, (new_cost, nb))
            same_slot = civ if mover.civilian else mil
            if same_slot is None and nb != unit.position:
                entry = results.get(nb)
                if entry is None or entry[0] != "move" or new_cost < entry[1]:
                    results[nb] = ("move", new_cost, path_to(nb))
    if mover.ranged_strength > 0 and budget >= 1:
        for t in grid.disc(unit.position, mover.attack_range):
            if t == unit.position:
                continue
            city = state.city_at(t)
            mil = state.unit_at(t, True)
            civ = state.unit_at(t, False)
            target_owner = -1
            if city is not None and city.owner != unit.owner:
                target_owner = city.owner
            elif mil is not None and mil.owner != unit.owner:
                target_owner = mil.owner
            elif civ is not None and civ.owner != unit.owner:
                target_owner = civ.owner
            if target_owner >= 0 and hostile(target_owner):
                results[t] = ("ranged", 0, [])
    return results


# ---------------------------------------------------------------------------
# Combat


@dataclass
class CombatResult:
    damage_to_defender: int
    damage_to_attacker: int
    defender_killed: bool = False
    attacker_killed: bool = False
    city_captured: bool = False


def _unit_strength(state: GameState, unit: Unit, ranged: bool, defending: bool) -> float:
    d = state.rules.units[unit.kind]
    base = d.ranged_strength if (ranged and not defending) else d.combat_strength
    s = base * (0.5 + 0.5 * unit.hp / UNIT_MAX_HP)
    if defending:
        tile = unit.position
        if int(state.map.elevation[tile]) == HILL:
            s += HILL_DEFENSE
        if int(state.map.feature[tile]) in (FOREST, JUNGLE):
            s += COVER_DEFENSE
        if unit.fortified:
            s += FORTIFY_BONUS
    return s


def _city_strength(state: GameState, city: City) -> float:
    defense = sum(state.rules.buildings[i].defense
                  for i in range(len(state.rules.buildings)) if city.buildings >> i & 1)
    return (CITY_BASE_STRENGTH + city.population + defense) * (0.5 + 0.5 * city.hp / CITY_MAX_HP)


def combat_damage(strength_attacker: float, strength_defender: float, roll: float) -> int:
    """round(30 * exp(0.04 * (S_a - S_d)) * u), half away from zero."""
    return _round_half_up(30.0 * math.exp(0.04 * (strength_attacker - strength_defender)) * roll)


def resolve_combat(state: GameState, attacker: Unit, defender, ranged: bool,
                   events: list[Event]) -> CombatResult:
    """Resolve one strike. `defender` is a Unit or a City. Mutates hp,
    removes dead units, and captures cities at hp <= 0 during a war."""
    defender_is_city = isinstance(defender, City)
    defender_owner = defender.owner
    if defender_owner >= CITY_STATE_OWNER_BASE or \
            not state.empires[attacker.owner].is_at_war(defender_owner):
        raise NotAtWar("attacker and defender are not at war")
    if attacker.moves_left < 1:
        raise NoAttacksLeft("unit has no movement left to attack")
    stream = state.rng["combat"]
    s_att = _unit_strength(state, attacker, ranged, defending=False)
    if defender_is_city:
        s_def = _city_strength(state, defender)
    else:
        s_def = _unit_strength(state, defender, False, defending=True)
    roll = stream.uniform(0.75, 1.25)
    dmg = combat_damage(s_att, s_def, roll)
    counter = 0
    if not ranged:
        counter = combat_damage(s_def, s_att, stream.uniform(0.75, 1.25))
    result = CombatResult(dmg, counter)
    if defender_is_city:
        defender.hp -= dmg
        if ranged:
            defender.hp = max(1, defender.hp)   # cities fall to melee only
        attacker.hp -= counter
        if defender.hp <= 0:
            result.city_captured = True
        events.append(Event("combat", attacker.owner, defender.position,
                            {"target": "city", "damage": dmg, "counter": counter}))
    else:
        defender.hp -= dmg
        attacker.hp -= counter
        if defender.hp <= 0:
            result.defender_killed = True
            if attacker.hp <= 0:
                attacker.hp = 1     # both-die tiebreak: defender falls first
        elif attacker.hp <= 0:
            result.attacker_killed = True
        events.append(Event("combat", attacker.owner, defender.position,
                            {"target": "unit", "damage": dmg, "counter": counter}))
    attacker.moves_left = 0.0
    attacker.acted = True
    attacker.fortified = False
    return result


# ---------------------------------------------------------------------------
# Empire helpers


def policy_totals(state: GameState, agent: int) -> dict[str, int]:
    totals = {"gold": 0, "science": 0, "culture": 0, "tourism": 0, "delegates": 0}
    e = state.empires[agent]
    for i, p in enumerate(state.rules.policies):
        if e.policies >> i & 1:
            for k, v in p.effects.items():
                totals[k] += v
    return totals


def building_delegates(state: GameState, agent: int) -> int:
    total = 0
    for cid in sorted(state.cities):
        c = state.cities[cid]
        if c.owner != agent:
            continue
        for i, b in enumerate(state.rules.buildings):
            if c.buildings >> i & 1:
                total += b.delegates
    return total


def city_state_allies(state: GameState) -> list[int]:
    """For each city-state, the agent with strictly-highest influence >= 60,
    or -1 when tied/low."""
    allies = []
    for cs in state.city_states:
        best_agent, best_val, tied = -1, CS_ALLY_THRESHOLD - 1, False
        for a in range(6):
            v = state.empires[a].cs_influence[cs.id]
            if v > best_val:
                best_agent, best_val, tied = a, v, False
            elif v == best_val and best_agent >= 0:
                tied = True
        allies.append(-1 if tied or best_val < CS_ALLY_THRESHOLD else best_agent)
    return allies


def delegate_count(state: GameState, agent: int) -> int:
    """Base delegate + wonder/policy grants + one per allied city-state."""
    if state.empires[agent].eliminated:
        return 0
    total = 1 + building_delegates(state, agent) + policy_totals(state, agent)["delegates"]
    total += sum(1 for ally in city_state_allies(state) if ally == agent)
    return total


def refresh_connected_resources(state: GameState, agent: int) -> None:
    """Connected resource counts: owned border tiles carrying a resource
    whose matching improvement is built."""
    rules = state.rules
    counts: dict[int, int] = {}
    for cid in sorted(state.cities):
        c = state.cities[cid]
        if c.owner != agent:
            continue
        for t in c.border_tiles:
            res = int(state.map.resource[t])
            if res < 0:
                continue
            need = rules.resources[res].improvement
            if need is None:
                continue
            if int(state.map.improvement[t]) == rules.improvement_idx[need]:
                counts[res] = counts.get(res, 0) + 1
    state.empires[agent].strategic_resources = counts


def connected_count(state: GameState, agent: int, resource_id: str) -> int:
    idx = state.rules.resource_idx[resource_id]
    return state.empires[agent].strategic_resources.get(idx, 0)


def connected_luxuries(state: GameState, agent: int) -> list[int]:
    rules = state.rules
    return sorted(res for res, n in state.empires[agent].strategic_resources.items()
                  if n > 0 and rules.resources[res].klass == "luxury")


def built_wonders_mask(state: GameState) -> int:
    mask = 0
    for c in state.cities.values():
        mask |= c.buildings
    wonder_bits = 0
    for i, b in enumerate(state.rules.buildings):
        if b.world_wonder and mask >> i & 1:
            wonder_bits |= 1 << i
    return wonder_bits


def session_pending(state: GameState) -> bool:
    cg = state.congress
    return (cg.active and cg.first_session_turn > 0
            and state.turn >= cg.first_session_turn
            and (state.turn - cg.first_session_turn)
            % state.config.congress_interval_turns == 0)


def improvement_for_tile(state: GameState, agent: int, tile: int) -> int:
    """Improvement a worker would build here, or -1. Resource-matching
    improvements win; otherwise generic farm/mine rules apply."""
    rules = state.rules
    e = state.empires[agent]
    current = int(state.map.improvement[tile])
    res = int(state.map.resource[tile])
    if res >= 0:
        need = rules.resources[res].improvement
        if need is not None:
            idx = rules.improvement_idx[need]
            d = rules.improvements[idx]
            if current != idx and (d.prereq_tech is None or e.has_tech(rules.tech_idx[d.prereq_tech])):
                return idx
        return -1
    from .rules import ELEVATIONS, TERRAINS
    terr = TERRAINS[int(state.map.terrain[tile])]
    elev = ELEVATIONS[int(state.map.elevation[tile])]
    feat_code = int(state.map.feature[tile])
    from .tiles import _FEATURE_NAMES
    feat = None if feat_code < 0 else _FEATURE_NAMES[feat_code]
    for idx, d in enumerate(rules.improvements):
        g = d.generic
        if g is None or current == idx:
            continue
        if d.prereq_tech is not None and not e.has_tech(rules.tech_idx[d.prereq_tech]):
            continue
        if terr in g["terrains"] and elev in g["elevations"] and feat in g["features"]:
            return idx
    return -1


def valid_city_site(state: GameState, agent: int, tile: int) -> bool:
    if not state.map.passable(tile):
        return False
    owner = int(state.map.owner[tile])
    if owner not in (-1, agent):
        return False
    for c in state.cities.values():
        if state.map.grid.distance(tile, c.position) < MIN_CITY_SPACING:
            return False
    return True


# ---------------------------------------------------------------------------
# Legality masks


def legal_action_masks(state: GameState, agent: int,
                       registry: ActionSpaceRegistry | None = None) -> ActionMaskSet:
    """One bitmask per sub-space. Pass (index 0) is always legal; a decided
    game or an eliminated agent collapses every mask to pass-only."""
    registry = registry or ActionSpaceRegistry(state.config)
    masks = ActionMaskSet(registry)
    e = state.empires[agent]
    if state.victory.terminal or e.eliminated:
        return masks
    rules = state.rules
    cfg = state.config

    unit_count = sum(1 for uid in e.unit_slot_ids if uid >= 0)
    city_count = sum(1 for cid in e.city_slot_ids if cid >= 0)

    for slot in range(cfg.unit_slots):
        uid = e.unit_slot_ids[slot]
        if uid < 0:
            continue
        unit = state.units[uid]
        space = registry.index[f"unit_{slot}"]
        disc = state.map.grid.disc_slots(unit.position, MOVE_DISC_RADIUS)
        targets = reachable_targets(state, unit)
        for di, tile in enumerate(disc):
            if di == 0 or tile < 0:
                continue    # disc slot 0 is the unit's own tile
            if tile in targets:
                masks.allow(space, 1 + di)
        d = rules.units[unit.kind]
        if d.id == "settler" and city_count < cfg.city_slots and \
                valid_city_site(state, agent, unit.position):
            masks.allow(space, 1 + MOVE_TARGETS + ABILITY_FOUND_CITY)
        if d.id == "worker" and int(state.map.owner[unit.position]) == agent and \
                state.city_at(unit.position) is None and \
                improvement_for_tile(state, agent, unit.position) >= 0:
            masks.allow(space, 1 + MOVE_TARGETS + ABILITY_IMPROVE)
        if not d.civilian and not unit.fortified:
            masks.allow(space, 1 + MOVE_TARGETS + ABILITY_FORTIFY)

    wonders_built = built_wonders_mask(state)
    have_free_unit_slot = unit_count < cfg.unit_slots
    aluminum_ok = connected_count(state, agent, "aluminum") >= 1
    for slot in range(cfg.city_slots):
        cid = e.city_slot_ids[slot]
        if cid < 0:
            continue
        city = state.cities[cid]
        space = registry.index[f"city_prod_{slot}"]
        if have_free_unit_slot:
            for ui, ud in enumerate(rules.units):
                if ud.prereq_tech is None or e.has_tech(rules.tech_idx[ud.prereq_tech]):
                    masks.allow(space, registry.prod_index("unit", ui))
        for bi, bd in enumerate(rules.buildings):
            if city.buildings >> bi & 1:
                continue
            if bd.world_wonder and wonders_built >> bi & 1:
                continue
            if bd.prereq_tech is None or e.has_tech(rules.tech_idx[bd.prereq_tech]):
                masks.allow(space, registry.prod_index("building", bi))
        for pi, pd in enumerate(rules.projects):
            if pd.shuttle_part:
                part_no = sum(1 for q in rules.projects[:pi] if q.shuttle_part)
                if e.shuttle_parts_built >> part_no & 1:
                    continue
            elif e.apollo_built:
                continue
            if pd.requires_apollo and not e.apollo_built:
                continue
            if pd.requires_aluminum and not aluminum_ok:
                continue
            if all(e.has_tech(rules.tech_idx[t]) for t in pd.prereq_techs):
                masks.allow(space, registry.prod_index("project", pi))
        focus_space = registry.index[f"city_focus_{slot}"]
        for i in range(1, registry.sizes[focus_space]):
            masks.allow(focus_space, i)

    research_space = registry.index["research"]
    for ti in range(len(rules.techs)):
        if e.has_tech(ti):
            continue
        if all(e.has_tech(p) for p in
               (rules.tech_idx[x] for x in rules.techs[ti].prereq_ids)):
            masks.allow(research_space, 1 + ti)

    policy_space = registry.index["policy"]
    owned = bin(e.policies).count("1")
    cost = policy_cost(owned)
    if e.culture_stock >= cost:
        for pi, pd in enumerate(rules.policies):
            if e.has_policy(pi):
                continue
            if pd.slot > 0:
                prev = next(j for j, q in enumerate(rules.policies)
                            if q.tree == pd.tree and q.slot == pd.slot - 1)
                if not e.has_policy(prev):
                    continue
            masks.allow(policy_space, 1 + pi)

    for o, opp in enumerate(opponents_of(agent)):
        space = registry.index[f"deal_{o}"]
        other = state.empires[opp]
        if not e.has_met(opp) or other.eliminated:
            continue
        at_war = e.is_at_war(opp)
        pending_out = any(p.from_agent == agent and p.to_agent == opp
                          for p in state.pending_deals)
        pending_in = [p for p in state.pending_deals
                      if p.from_agent == opp and p.to_agent == agent]
        if not at_war and state.turn >= e.peace_treaty_until[opp]:
            masks.allow(space, 1)          # declare_war
        if at_war and not pending_out:
            masks.allow(space, 2)          # propose_peace
        if not at_war and not pending_out and connected_luxuries(state, agent):
            masks.allow(space, 3)          # propose_lux_for_gold
        if (not at_war and e.has_tech(rules.tech_idx["currency"])
                and len(e.trade_routes) < MAX_TRADE_ROUTES
                and not any(tr.dest_agent == opp for tr in e.trade_routes)
                and e.original_capital_id >= 0
                and state.cities.get(e.original_capital_id) is not None
                and any(c.owner == opp for c in state.cities.values())):
            masks.allow(space, 4)          # establish_trade_route
        if pending_in:
            deal = pending_in[0]
            affordable = deal.kind != "lux_for_gold" or e.gold >= deal.gold
            if affordable:
                masks.allow(space, 5)      # accept_pending
            masks.allow(space, 6)          # reject_pending

    for k in range(cfg.num_city_states):
        if not (e.met_city_states >> k & 1):
            continue
        space = registry.index[f"cs_gift_{k}"]
        if e.gold >= 100:
            masks.allow(space, 1)
        if e.gold >= 250:
            masks.allow(space, 2)

    if session_pending(state):
        space = registry.index["congress_vote"]
        for cand in range(6):
            if not state.empires[cand].eliminated:
                masks.allow(space, 1 + cand)

    masks.allow(registry.index["end_turn"], 1)
    return masks


# ---------------------------------------------------------------------------
# Cities


def assign_worked_tiles(state: GameState, city: City) -> None:
    weights = FOCUS_WEIGHTS.get(city.focus, FOCUS_WEIGHTS[1])
    scored = []
    for t in city.border_tiles:
        if t == city.position:
            continue
        y = worked_tile_yields(state.map, t, state.rules)
        scored.append((-sum(w * v for w, v in zip(weights, y)), t))
    scored.sort()
    city.worked_tiles = [t for _, t in scored[:city.population]]


def city_output(state: GameState, city: City) -> tuple[int, ...]:
    """Current per-turn yields: city center (floored at 2 food / 1
    production), worked tiles, buildings, one science per two population,
    and the palace bonus in a held original capital."""
    rules = state.rules
    center = list(base_tile_yields(state.map, city.position, rules))
    center[0] = max(2, center[0])
    center[1] = max(1, center[1])
    total = center
    for t in city.worked_tiles:
        y = worked_tile_yields(state.map, t, rules)
        total = [a + b for a, b in zip(total, y)]
    for i, b in enumerate(rules.buildings):
        if city.buildings >> i & 1:
            total = [a + v for a, v in zip(total, b.yields)]
    total[3] += city.population // 2
    if city.owner < CITY_STATE_OWNER_BASE and \
            state.empires[city.owner].original_capital_id == city.id:
        total = [a + v for a, v in zip(total, CAPITAL_BONUS)]
    return tuple(total)


def _spawn_unit(state: GameState, owner: int, kind: int, near: int) -> Unit | None:
    rules = state.rules
    civilian = rules.units[kind].civilian
    e = state.empires[owner]
    if -1 not in e.unit_slot_ids:
        return None
    for tile in [near, *[int(t) for t in state.map.grid.neighbors[near] if t >= 0]]:
        if movement_cost(state.map, tile) < 0:
            continue
        # No stacking within a category, no spawning onto foreign tiles.
        if state.unit_at(tile, military=not civilian) is not None:
            continue
        city = state.city_at(tile)
        if city is not None and city.owner != owner:
            continue
        if any(u is not None and u.owner != owner
               for u in (state.unit_at(tile, True), state.unit_at(tile, False))):
            continue
        uid = state.next_unit_id
        state.next_unit_id += 1
        unit = Unit(uid, owner, kind, position=tile, moves_left=0.0, acted=True)
        state.units[uid] = unit
        slot = e.unit_slot_ids.index(-1)
        e.unit_slot_ids[slot] = uid
        arr = state.civ_by_tile if civilian else state.mil_by_tile
        arr[tile] = uid
        return unit
    return None


def run_city_turn(state: GameState, city: City, events: list[Event]) -> tuple[int, ...]:
    """Growth, production, and border expansion for one owned city.
    Returns the city's yield tuple for empire-level accumulation."""
    rules = state.rules
    owner = city.owner
    e = state.empires[owner]
    assign_worked_tiles(state, city)
    out = city_output(state, city)
    # Growth.
    city.food_stock += out[0] - 2 * city.population
    threshold = growth_threshold(city.population)
    if city.food_stock >= threshold:
        city.food_stock -= threshold
        city.population += 1
        events.append(Event("population_grown", owner, city.position,
                            {"city": city.id, "population": city.population}))
    elif city.food_stock < 0:
        city.food_stock = 0
        if city.population > 1:
            city.population -= 1
            events.append(Event("starvation", owner, city.position, {"city": city.id}))
    # Production.
    prod = out[1] + city.production_overflow
    city.production_overflow = 0
    item = city.production_item
    if item is not None and item[0] == "building" and \
            rules.buildings[item[1]].world_wonder and \
            built_wonders_mask(state) >> item[1] & 1:
        invested = city.production_progress.pop(item, 0)
        refund = invested * WONDER_REFUND_NUM // WONDER_REFUND_DEN
        prod += refund      # refund joins this turn's production pool
        city.production_item = None
        events.append(Event("wonder_lost", owner, city.position,
                            {"building": rules.buildings[item[1]].id, "refund": refund}))
        item = None
    if item is None:
        city.production_overflow = min(OVERFLOW_CAP, prod)
    else:
        invested = city.production_progress.get(item, 0) + prod
        cost = _item_cost(rules, item)
        done = invested >= cost and _complete_item(state, city, item, events)
        if done:
            city.production_overflow = min(OVERFLOW_CAP, invested - cost)
            city.production_progress.pop(item, None)
            city.production_item = None
        else:
            # Not finished, or completion is blocked (no spawn room / severed
            # aluminum link): hold invested production at the cost cap.
            city.production_progress[item] = min(invested, cost)
    # Border growth.
    city.border_stock += out[4]
    need = border_threshold(city.tiles_acquired)
    if city.border_stock >= need:
        new_tile = _border_candidate(state, city)
        if new_tile >= 0:
            city.border_stock -= need
            city.tiles_acquired += 1
            city.border_tiles = sorted(set(city.border_tiles) | {new_tile})
            state.map.owner[new_tile] = owner
            events.append(Event("border_expanded", owner, new_tile, {"city": city.id}))
        else:
            city.border_stock = need    # hold at threshold until a tile frees up
    return out


def _item_cost(rules, item: tuple[str, int]) -> int:
    kind, idx = item
    if kind == "unit":
        return rules.units[idx].production_cost
    if kind == "building":
        return rules.buildings[idx].production_cost
    return rules.projects[idx].production_cost


def _complete_item(state: GameState, city: City, item: tuple[str, int],
                   events: list[Event]) -> bool:
    """Apply a finished production item. Returns False when completion must
    wait (no spawn room, or a shuttle part's aluminum link was severed)."""
    rules = state.rules
    kind, idx = item
    owner = city.owner
    e = state.empires[owner]
    if kind == "unit":
        unit = _spawn_unit(state, owner, idx, city.position)
        if unit is None:
            return False
        events.append(Event("unit_built", owner, unit.position,
                            {"unit": rules.units[idx].id, "city": city.id}))
        return True
    if kind == "building":
        bd = rules.buildings[idx]
        city.buildings |= 1 << idx
        events.append(Event("wonder_built" if bd.world_wonder else "building_built",
                            owner, city.position, {"building": bd.id, "city": city.id}))
        if bd.delegates:
            events.append(Event("congress_delegate_gained", owner, city.position,
                                {"source": bd.id, "count": bd.delegates}))
        return True
    pd = rules.projects[idx]
    if pd.requires_aluminum and connected_count(state, owner, "aluminum") < 1:
        return False
    if pd.shuttle_part:
        part_no = sum(1 for q in rules.projects[:idx] if q.shuttle_part)
        e.shuttle_parts_built |= 1 << part_no
        events.append(Event("shuttle_part_built", owner, city.position,
                            {"project": pd.id, "parts_done": bin(e.shuttle_parts_built).count("1")}))
    else:
        e.apollo_built = True
        events.append(Event("project_built", owner, city.position, {"project": pd.id}))
    return True


def _border_candidate(state: GameState, city: City) -> int:
    grid = state.map.grid
    seen: set[int] = set()
    best_score, best_tile = -1, -1
    for t in city.border_tiles:
        for nb in grid.neighbors[t]:
            nb = int(nb)
            if nb < 0 or nb in seen:
                continue
            seen.add(nb)
            if int(state.map.owner[nb]) != -1 or not state.map.is_land(nb):
                continue
            if grid.distance(city.position, nb) > 3:
                continue
            y = base_tile_yields(state.map, nb, state.rules)
            score = sum(y[:3]) + (3 if int(state.map.resource[nb]) >= 0 else 0)
            if score > best_score or (score == best_score and nb < best_tile):
                best_score, best_tile = score, nb
    return best_tile


# ---------------------------------------------------------------------------
# Congress


def convene_world_congress(state: GameState, events: list[Event] | None = None):
    """Resolve a due session: tally pending votes weighted by delegates,
    elect a World Leader on a strict majority >= the vote threshold."""
    cg = state.congress
    if not cg.active:
        raise CongressInactive("the congress has not been founded yet")
    if not session_pending(state):
        raise NotDue(f"no session due at turn {state.turn}")
    events = events if events is not None else []
    tally = [0] * 6
    for a in range(6):
        delegates = delegate_count(state, a)
        state.empires[a].delegates = delegates
        cand = cg.pending_votes[a]
        if 0 <= cand < 6:
            tally[cand] += delegates
    winner = -1
    top = max(tally)
    if top >= state.config.diplo_votes_to_win and tally.count(top) == 1:
        winner = tally.index(top)
    cg.last_votes = tally
    cg.last_winner = winner
    cg.last_session_turn = state.turn
    cg.sessions_held += 1
    cg.pending_votes = [-1] * 6
    events.append(Event("congress_session", -1, -1,
                        {"turn": state.turn, "votes": list(tally), "winner": winner}))
    return state, {"votes": tally, "winner": winner}


def _maybe_found_congress(state: GameState, events: list[Event]) -> None:
    if state.congress.active:
        return
    printing = state.rules.tech_idx["printing_press"]
    everyone = (1 << 6) - 1
    for a in range(6):
        e = state.empires[a]
        if e.eliminated:
            continue
        if (e.met_agents | 1 << a) == everyone and e.has_tech(printing):
            state.congress.active = True
            state.congress.first_session_turn = state.turn + 1
            events.append(Event("congress_founded", a, -1,
                                {"first_session_turn": state.congress.first_session_turn}))
            return


# ---------------------------------------------------------------------------
# Culture / tourism


def accrue_culture_and_tourism(state: GameState,
                               events: list[Event] | None = None) -> GameState:
    """Turn-boundary accrual: lifetime culture per agent, and pairwise
    tourism with a +25% modifier against trade-route partners."""
    for a in range(6):
        e = state.empires[a]
        if e.eliminated:
            continue
        culture = 0
        tourism = 0
        for cid in sorted(state.cities):
            c = state.cities[cid]
            if c.owner == a:
                out = city_output(state, c)
                culture += out[4]
                tourism += out[5]
        pol = policy_totals(state, a)
        culture += pol["culture"]
        tourism += pol["tourism"]
        e.culture_stock += culture
        e.culture_lifetime += culture
        routed = {tr.dest_agent for tr in e.trade_routes}
        for j in range(6):
            if j == a:
                continue
            boosted = (tourism * 5 + 2) // 4 if j in routed else tourism
            e.tourism_accumulated_vs[j] += boosted
    return state


# ---------------------------------------------------------------------------
# Victory


def check_victory(state: GameState) -> VictoryStatus:
    """Evaluate win conditions in fixed priority order:
    Domination -> Science -> Culture -> Diplomatic."""
    if state.victory.decided:
        return state.victory
    # Domination: hold your own original capital while every other founded
    # original capital is held by someone other than its founder.
    capitals = {a: state.empires[a].original_capital_id for a in range(6)
                if state.empires[a].original_capital_id >= 0}
    if len(capitals) >= 2:
        for a in range(6):
            own = capitals.get(a)
            if own is None or state.cities.get(own) is None or state.cities[own].owner != a:
                continue
            others = [j for j in capitals if j != a]
            if others and all(state.cities[capitals[j]].owner != j for j in others):
                return VictoryStatus("domination", a, state.turn)
    for a in range(6):
        e = state.empires[a]
        if e.apollo_built and e.shuttle_parts_built == 0b111111:
            return VictoryStatus("science", a, state.turn)
    for a in range(6):
        e = state.empires[a]
        if e.eliminated:
            continue
        if all(e.tourism_accumulated_vs[j] > state.empires[j].culture_lifetime
               for j in range(6) if j != a):
            return VictoryStatus("culture", a, state.turn)
    if state.congress.last_winner >= 0:
        return VictoryStatus("diplomatic", state.congress.last_winner, state.turn)
    status = VictoryStatus()
    if state.turn > state.config.max_game_turns:
        status.turn_limit_reached = True
    return status


# ---------------------------------------------------------------------------
# Rewards


def compute_reward(prev: GameState, plan, next_state: GameState, mode: str,
                   agent: int) -> float:
    """Sparse: indicator that this step decided the game for `agent`.
    Dense: weighted sum over the step's event deltas."""
    if mode == "sparse":
        return 1.0 if (next_state.victory.decided and not prev.victory.decided
                       and next_state.victory.winner == agent) else 0.0
    if mode == "dense":
        weights = next_state.config.reward_weights
        return float(sum(weights.get(ev.kind, 0.0)
                         for ev in next_state.event_log if ev.agent == agent))
    raise ModeUnknown(f"unknown reward mode {mode!r}")


# ---------------------------------------------------------------------------
# The transition function


def advance_state(state: GameState, agent: int, plan: ActionPlan,
                  masks: ActionMaskSet | None = None) -> tuple[GameState, list[Event]]:
    """Pure transition: clones the state, then applies the plan."""
    nxt = state.clone()
    events = advance_state_inplace(nxt, agent, plan, masks=None)
    return nxt, events


def advance_state_inplace(state: GameState, agent: int, plan: ActionPlan,
                          masks: ActionMaskSet | None = None,
                          verify: bool = True) -> list[Event]:
    """In-place variant used by the batching runtime and replay playback.
    `verify=False` skips the mask check for action logs that are already
    sanitized (replay playback)."""
    if state.victory.terminal:
        raise TerminalState("the game is already decided")
    if agent != state.active_agent:
        raise WrongAgent(f"agent {agent} acted on agent {state.active_agent}'s step")
    registry = plan.registry
    if verify:
        masks = masks or legal_action_masks(state, agent, registry)
        for k, v in enumerate(plan.flat):
            if not masks.legal(k, v):
                raise UnsanitizedPlan(
                    f"sub-action {registry.subspaces[k].name}={v} is outside its mask; "
                    "run sanitize_plan first")
    events: list[Event] = []
    state.event_log = events
    e = state.empires[agent]
    rules = state.rules

    if not e.eliminated:
        _apply_research_choice(state, agent, plan)
        _apply_policy_choice(state, agent, plan, events)
        _apply_deals(state, agent, plan, events)
        _apply_cs_gifts(state, agent, plan, events)
        cand = plan.congress_candidate()
        if cand is not None and session_pending(state):
            state.congress.pending_votes[agent] = cand
        _apply_unit_orders(state, agent, plan, events)
        _apply_city_choices(state, agent, plan)
        science = gold = 0
        for slot in range(state.config.city_slots):
            cid = e.city_slot_ids[slot]
            if cid < 0:
                continue
            city = state.cities.get(cid)
            if city is None or city.owner != agent:
                continue
            out = run_city_turn(state, city, events)
            science += out[3]
            gold += out[2]
        pol = policy_totals(state, agent)
        science += pol["science"]
        gold += pol["gold"] + TRADE_ROUTE_GOLD * len(e.trade_routes)
        e.gold += gold
        _apply_research_progress(state, agent, science, events)
        refresh_connected_resources(state, agent)
        vis = visibility.visible_tiles(state, agent)
        _update_meetings(state, agent, vis)
        state.explored[agent] |= vis

    state.step_index += 1
    state.active_agent = state.step_index % 6
    if state.step_index % 6 == 0:
        _turn_boundary(state, events)
    verdict = check_victory(state)
    if verdict.decided:
        state.victory = verdict
        events.append(Event("victory", verdict.winner, -1,
                            {"kind": verdict.kind, "turn": verdict.turn_decided}))
    elif verdict.turn_limit_reached:
        state.victory.turn_limit_reached = True
        events.append(Event("turn_limit", -1, -1, {"turn": state.turn}))
    return events


def _apply_research_choice(state: GameState, agent: int, plan: ActionPlan) -> None:
    choice = plan.research_choice()
    if choice is not None:
        state.empires[agent].current_tech = choice


def _apply_research_progress(state: GameState, agent: int, science: int,
                             events: list[Event]) -> None:
    e = state.empires[agent]
    tech = e.current_tech
    if tech < 0 or e.has_tech(tech):
        return
    rules = state.rules
    acc = e.science_progress.get(tech, 0) + science
    cost = rules.techs[tech].science_cost
    if acc >= cost:
        e.unlocked_techs |= 1 << tech
        e.science_progress[tech] = cost
        e.current_tech = -1
        events.append(Event("tech_finished", agent, -1, {"tech": rules.techs[tech].id}))
    else:
        e.science_progress[tech] = acc


def _apply_policy_choice(state: GameState, agent: int, plan: ActionPlan,
                         events: list[Event]) -> None:
    choice = plan.policy_choice()
    if choice is None:
        return
    e = state.empires[agent]
    cost = policy_cost(bin(e.policies).count("1"))
    e.culture_stock -= cost
    e.policies |= 1 << choice
    pd = state.rules.policies[choice]
    events.append(Event("policy_adopted", agent, -1, {"policy": pd.id, "cost": cost}))
    if pd.effects.get("delegates"):
        events.append(Event("congress_delegate_gained", agent, -1,
                            {"source": pd.id, "count": pd.effects["delegates"]}))


def _apply_deals(state: GameState, agent: int, plan: ActionPlan,
                 events: list[Event]) -> None:
    e = state.empires[agent]
    for o, opp in enumerate(opponents_of(agent)):
        verb = plan.deal_verb(o)
        if verb == "pass":
            continue
        other = state.empires[opp]
        if verb == "declare_war":
            e.at_war_with |= 1 << opp
            other.at_war_with |= 1 << agent
            state.pending_deals = [p for p in state.pending_deals
                                   if {p.from_agent, p.to_agent} != {agent, opp}]
            events.append(Event("war_declared", agent, -1, {"target": opp}))
        elif verb == "propose_peace":
            state.pending_deals.append(PendingDeal("peace", agent, opp))
            events.append(Event("deal_proposed", agent, -1, {"kind": "peace", "to": opp}))
        elif verb == "propose_lux_for_gold":
            luxes = connected_luxuries(state, agent)
            if not luxes:
                continue
            counts = state.empires[agent].strategic_resources
            lux = max(luxes, key=lambda r: (counts.get(r, 0), -r))
            state.pending_deals.append(
                PendingDeal("lux_for_gold", agent, opp, resource=lux, gold=DEAL_LUX_GOLD))
            events.append(Event("deal_proposed", agent, -1,
                                {"kind": "lux_for_gold", "to": opp,
                                 "resource": state.rules.resources[lux].id}))
        elif verb == "establish_trade_route":
            dest = _capital_or_first_city(state, opp)
            if dest is None or e.original_capital_id < 0:
                continue
            origin = state.cities.get(e.original_capital_id)
            if origin is None or origin.owner != agent:
                continue
            e.trade_routes.append(TradeRoute(origin.id, dest.id, opp, state.turn))
            events.append(Event("trade_route_established", agent, dest.position,
                                {"to": opp}))
        elif verb in ("accept_pending", "reject_pending"):
            pending = [p for p in state.pending_deals
                       if p.from_agent == opp and p.to_agent == agent]
            if not pending:
                continue
            deal = pending[0]
            state.pending_deals.remove(deal)
            if verb == "reject_pending":
                events.append(Event("deal_rejected", agent, -1, {"from": opp, "kind": deal.kind}))
                continue
            if deal.kind == "peace":
                e.at_war_with &= ~(1 << opp)
                other.at_war_with &= ~(1 << agent)
                until = state.turn + PEACE_TREATY_TURNS
                e.peace_treaty_until[opp] = until
                other.peace_treaty_until[agent] = until
            elif deal.kind == "lux_for_gold":
                if e.gold < deal.gold:
                    continue
                e.gold -= deal.gold
                other.gold += deal.gold
            record = TradeDeal(deal.kind, deal.from_agent, deal.to_agent,
                               deal.resource, deal.gold, state.turn)
            e.deals.append(record)
            other.deals.append(record.clone())
            events.append(Event("deal_accepted", agent, -1, {"from": opp, "kind": deal.kind}))


def _capital_or_first_city(state: GameState, agent: int) -> City | None:
    oc = state.empires[agent].original_capital_id
    if oc >= 0:
        city = state.cities.get(oc)
        if city is not None and city.owner == agent:
            return city
    mine = [state.cities[cid] for cid in sorted(state.cities)
            if state.cities[cid].owner == agent]
    return mine[0] if mine else None


def _apply_cs_gifts(state: GameState, agent: int, plan: ActionPlan,
                    events: list[Event]) -> None:
    e = state.empires[agent]
    for k in range(state.config.num_city_states):
        amount = plan.cs_gift(k)
        if amount <= 0 or e.gold < amount:
            continue
        e.gold -= amount
        e.cs_influence[k] += amount // GOLD_PER_INFLUENCE
        events.append(Event("cs_gift", agent, -1,
                            {"city_state": k, "gold": amount,
                             "influence": e.cs_influence[k]}))


def _apply_unit_orders(state: GameState, agent: int, plan: ActionPlan,
                       events: list[Event]) -> None:
    e = state.empires[agent]
    for slot in range(state.config.unit_slots):
        uid = e.unit_slot_ids[slot]
        if uid < 0:
            continue
        unit = state.units.get(uid)
        if unit is None or unit.owner != agent:
            continue
        order = plan.unit_order(slot)
        if order is None:
            _continue_orders(state, unit, events)
            continue
        if order[0] == "move":
            unit.orders = None
            disc = state.map.grid.disc_slots(unit.position, MOVE_DISC_RADIUS)
            target = disc[order[1]]
            if target < 0:
                continue
            _execute_move(state, unit, target, events)
        else:
            ability = order[1]
            if ability == ABILITY_FOUND_CITY:
                _found_city(state, unit, events)
            elif ability == ABILITY_IMPROVE:
                imp = improvement_for_tile(state, agent, unit.position)
                if imp >= 0 and int(state.map.owner[unit.position]) == agent:
                    unit.orders = ("improve", imp, IMPROVE_TURNS)
                    _continue_orders(state, unit, events)
            elif ability == ABILITY_FORTIFY:
                unit.fortified = True
                unit.moves_left = 0.0


def _continue_orders(state: GameState, unit: Unit, events: list[Event]) -> None:
    if unit.orders is None or unit.orders[0] != "improve":
        return
    _, imp, turns_left = unit.orders
    turns_left -= 1
    if turns_left > 0:
        unit.orders = ("improve", imp, turns_left)
        return
    tile = unit.position
    state.map.improvement[tile] = imp
    unit.orders = None
    events.append(Event("tile_improved", unit.owner, tile,
                        {"improvement": state.rules.improvements[imp].id}))


def _execute_move(state: GameState, unit: Unit, target: int,
                  events: list[Event]) -> None:
    targets = reachable_targets(state, unit)
    action = targets.get(target)
    if action is None:
        return      # plan was mask-legal, but an earlier order changed the board
    kind, cost, path = action
    rules = state.rules
    if kind == "ranged":
        defender = state.city_at(target) or state.unit_at(target, True) or \
            state.unit_at(target, False)
        if defender is None:
            return
        result = resolve_combat(state, unit, defender, ranged=True, events=events)
        _apply_combat_outcome(state, unit, defender, target, result, events, entered=False)
        return
    # Walk the path (movement points were validated by the search).
    civilian = rules.units[unit.kind].civilian
    arr = state.civ_by_tile if civilian else state.mil_by_tile
    for tile in path:
        arr[unit.position] = -1
        unit.position = tile
        arr[tile] = unit.id
        unit.moves_left -= movement_cost(state.map, tile)
    unit.acted = True
    unit.fortified = False
    if kind == "attack":
        defender = state.city_at(target)
        if defender is None:
            defender = state.unit_at(target, True) or state.unit_at(target, False)
        if defender is None:
            return
        if isinstance(defender, Unit) and rules.units[defender.kind].civilian and \
                state.unit_at(target, True) is None:
            # Undefended civilian: captured outright, attacker advances.
            _remove_unit(state, defender, events)
            events.append(Event("enemy_unit_killed", unit.owner, target,
                                {"unit": rules.units[defender.kind].id, "captured": True}))
            _advance_into(state, unit, target)
            return
        result = resolve_combat(state, unit, defender, ranged=False, events=events)
        _apply_combat_outcome(state, unit, defender, target, result, events, entered=True)


def _apply_combat_outcome(state: GameState, attacker: Unit, defender, target: int,
                          result: CombatResult, events: list[Event],
                          entered: bool) -> None:
    rules = state.rules
    if result.attacker_killed:
        events.append(Event("enemy_unit_killed", defender.owner, attacker.position,
                            {"unit": rules.units[attacker.kind].id}))
        _remove_unit(state, attacker, events)
        return
    if isinstance(defender, Unit):
        if result.defender_killed:
            events.append(Event("enemy_unit_killed", attacker.owner, target,
                                {"unit": rules.units[defender.kind].id}))
            _remove_unit(state, defender, events)
            civ = state.unit_at(target, False)
            if civ is not None and civ.owner != attacker.owner and \
                    state.empires[attacker.owner].is_at_war(civ.owner):
                _remove_unit(state, civ, events)
                events.append(Event("enemy_unit_killed", attacker.owner, target,
                                    {"unit": rules.units[civ.kind].id, "captured": True}))
            if entered:
                _advance_into(state, attacker, target)
    else:
        if result.city_captured:
            _capture_city(state, defender, attacker.owner, events)
            if entered:
                _advance_into(state, attacker, target)


def _advance_into(state: GameState, unit: Unit, tile: int) -> None:
    civilian = state.rules.units[unit.kind].civilian
    arr = state.civ_by_tile if civilian else state.mil_by_tile
    if (state.unit_at(tile, not civilian) or state.unit_at(tile, civilian)) is not None:
        return
    arr[unit.position] = -1
    unit.position = tile
    arr[tile] = unit.id
    unit.moves_left = 0.0


def _remove_unit(state: GameState, unit: Unit, events: list[Event]) -> None:
    state.units.pop(unit.id, None)
    arr = state.civ_by_tile if state.rules.units[unit.kind].civilian else state.mil_by_tile
    if arr[unit.position] == unit.id:
        arr[unit.position] = -1
    if unit.owner < CITY_STATE_OWNER_BASE:
        slots = state.empires[unit.owner].unit_slot_ids
        for i, uid in enumerate(slots):
            if uid == unit.id:
                slots[i] = -1
                break
        _maybe_eliminate(state, unit.owner, events)


def _capture_city(state: GameState, city: City, new_owner: int,
                  events: list[Event]) -> None:
    old_owner = city.owner
    city.hp = CAPTURE_HP
    city.population = max(1, city.population * 3 // 4)
    city.production_item = None
    city.production_progress = {}
    city.production_overflow = 0
    city.owner = new_owner
    for t in city.border_tiles:
        state.map.owner[t] = new_owner
    if old_owner < CITY_STATE_OWNER_BASE:
        slots = state.empires[old_owner].city_slot_ids
        for i, cid in enumerate(slots):
            if cid == city.id:
                slots[i] = -1
                break
    new_slots = state.empires[new_owner].city_slot_ids
    if city.id not in new_slots and -1 in new_slots:
        new_slots[new_slots.index(-1)] = city.id
    events.append(Event("city_captured", new_owner, city.position,
                        {"city": city.id, "from": old_owner,
                         "original_owner": city.original_owner}))
    refresh_connected_resources(state, new_owner)
    if old_owner < CITY_STATE_OWNER_BASE:
        refresh_connected_resources(state, old_owner)
        _maybe_eliminate(state, old_owner, events)


def _maybe_eliminate(state: GameState, agent: int, events: list[Event]) -> None:
    e = state.empires[agent]
    if e.eliminated:
        return
    has_city = any(c.owner == agent for c in state.cities.values())
    if has_city:
        return
    settler = state.rules.unit_idx["settler"]
    has_settler = any(u.owner == agent and u.kind == settler
                      for u in state.units.values())
    if has_settler:
        return
    e.eliminated = True
    for uid in sorted(state.units):
        u = state.units.get(uid)
        if u is not None and u.owner == agent:
            state.units.pop(uid)
            arr = state.civ_by_tile if state.rules.units[u.kind].civilian else state.mil_by_tile
            if arr[u.position] == u.id:
                arr[u.position] = -1
    e.unit_slot_ids = [-1] * state.config.unit_slots
    events.append(Event("agent_eliminated", agent))


def _found_city(state: GameState, unit: Unit, events: list[Event]) -> None:
    agent = unit.owner
    if not valid_city_site(state, agent, unit.position):
        return
    e = state.empires[agent]
    if -1 not in e.city_slot_ids:
        return
    cid = state.next_city_id
    state.next_city_id += 1
    city = City(cid, agent, agent, unit.position, population=1, hp=CITY_MAX_HP)
    grid = state.map.grid
    border = {unit.position}
    for nb in grid.neighbors[unit.position]:
        nb = int(nb)
        if nb >= 0 and state.map.is_land(nb) and int(state.map.owner[nb]) == -1:
            border.add(nb)
    city.border_tiles = sorted(border)
    for t in city.border_tiles:
        state.map.owner[t] = agent
    if e.original_capital_id < 0:
        e.original_capital_id = cid
        city.is_capital = True
    state.cities[cid] = city
    state.city_by_tile[unit.position] = cid
    e.city_slot_ids[e.city_slot_ids.index(-1)] = cid
    events.append(Event("city_founded", agent, unit.position,
                        {"city": cid, "capital": city.is_capital}))
    _remove_unit(state, unit, events)


def _apply_city_choices(state: GameState, agent: int, plan: ActionPlan) -> None:
    e = state.empires[agent]
    registry = plan.registry
    for slot in range(state.config.city_slots):
        cid = e.city_slot_ids[slot]
        if cid < 0:
            continue
        city = state.cities.get(cid)
        if city is None or city.owner != agent:
            continue
        choice = plan.city_production(slot)
        if choice is not None:
            city.production_item = choice
        focus = plan.city_focus(slot)
        if focus > 0:
            city.focus = focus


def _update_meetings(state: GameState, agent: int, vis=None) -> None:
    if vis is None:
        vis = visibility.visible_tiles(state, agent)
    e = state.empires[agent]
    for u in state.units.values():
        if u.owner != agent and u.owner < CITY_STATE_OWNER_BASE and vis[u.position]:
            e.met_agents |= 1 << u.owner
            state.empires[u.owner].met_agents |= 1 << agent
    for c in state.cities.values():
        if vis[c.position]:
            if c.owner < CITY_STATE_OWNER_BASE and c.owner != agent:
                e.met_agents |= 1 << c.owner
                state.empires[c.owner].met_agents |= 1 << agent
            elif c.owner >= CITY_STATE_OWNER_BASE:
                e.met_city_states |= 1 << (c.owner - CITY_STATE_OWNER_BASE)


def _turn_boundary(state: GameState, events: list[Event]) -> None:
    rules = state.rules
    # Healing, then movement refresh.
    for uid in sorted(state.units):
        u = state.units[uid]
        if not u.acted and u.hp < UNIT_MAX_HP:
            friendly = int(state.map.owner[u.position]) == u.owner
            u.hp = min(UNIT_MAX_HP, u.hp + (UNIT_HEAL_FRIENDLY if friendly else UNIT_HEAL_NEUTRAL))
        u.moves_left = float(rules.units[u.kind].moves)
        u.acted = False
    for cid in sorted(state.cities):
        c = state.cities[cid]
        if c.hp < CITY_MAX_HP:
            c.hp = min(CITY_MAX_HP, c.hp + CITY_HEAL)
    # City-state influence decay.
    for a in range(6):
        e = state.empires[a]
        e.cs_influence = [max(0, v - CS_INFLUENCE_DECAY) for v in e.cs_influence]
    accrue_culture_and_tourism(state, events)
    # Expire trade routes and timed deals.
    for a in range(6):
        e = state.empires[a]
        e.trade_routes = [tr for tr in e.trade_routes
                          if state.turn - tr.start_turn < TRADE_ROUTE_TURNS]
        e.deals = [d for d in e.deals if state.turn - d.turn_made < DEAL_TURNS]
    if session_pending(state):
        convene_world_congress(state, events)
    _maybe_found_congress(state, events)
    for a in range(6):
        refresh_connected_resources(state, a)
    state.turn += 1
