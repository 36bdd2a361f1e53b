"""Agent observations: fog-masked map layers plus scalar/vector elements.

The element inventory is a registry derived from the config alone, so
consumers (service, replay tooling, bindings) can agree on the exact wire
layout before seeing any state. Map layers use -1 as the UNKNOWN sentinel;
scalar and vector elements carry a parallel validity bit.

Fog rules (three-state knowledge):
 - unexplored tiles: every layer UNKNOWN;
 - explored tiles: static layers (terrain, elevation, feature, resource,
   natural wonder, region) truthful, dynamic layers UNKNOWN;
 - visible tiles: everything truthful.
Tech knowledge aggregates globally: per-tech unlock counts, never
per-opponent attribution.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import engine, visibility
from .actions import opponents_of
from .state import GameConfig, GameState

UNKNOWN = -1
OBS_FORMAT_VERSION = 1

STATIC_LAYERS = ("terrain", "elevation", "feature", "resource", "natural_wonder", "region")
DYNAMIC_LAYERS = ("improvement", "owner", "city_owner", "city_population",
                  "unit_military_kind", "unit_military_owner",
                  "unit_civilian_kind", "unit_civilian_owner")

_PENDING_DEAL_CODES = {"none": 0, "peace": 1, "lux_for_gold": 2}
_PROD_KIND_CODES = {None: 0, "unit": 1, "building": 2, "project": 3}


@dataclass(frozen=True)
class ObsElement:
    name: str
    kind: str        # map | scalar | vector
    length: int      # n_tiles for maps, 1 for scalars


class ObservationRegistry:
    """Named element inventory; order defines the binary layout."""

    def __init__(self, config: GameConfig) -> None:
        rt = config.rule_tables
        n_tiles = config.map_width * config.map_height
        el: list[ObsElement] = []

        def map_layer(name: str) -> None:
            el.append(ObsElement(f"map_{name}", "map", n_tiles))

        def scalar(name: str) -> None:
            el.append(ObsElement(name, "scalar", 1))

        def vector(name: str, length: int) -> None:
            el.append(ObsElement(name, "vector", length))

        for name in STATIC_LAYERS:
            map_layer(name)
        for name in DYNAMIC_LAYERS:
            map_layer(name)
        map_layer("visibility")

        for name in ("turn", "step_index", "agent_id", "active_agent",
                     "max_game_turns", "map_width", "map_height",
                     "congress_interval_turns", "diplo_votes_to_win",
                     "gold", "gold_rate", "science_rate", "culture_rate",
                     "tourism_rate", "culture_stock", "culture_lifetime",
                     "policy_cost_next", "era", "current_tech",
                     "current_tech_progress", "current_tech_cost",
                     "num_techs_unlocked", "num_policies", "num_cities",
                     "num_units", "delegates_last", "congress_active",
                     "congress_session_pending", "congress_first_session_turn",
                     "congress_sessions_held", "congress_last_winner",
                     "apollo_built", "shuttle_parts_count", "aluminum_connected",
                     "eliminated", "at_war_any", "tiles_owned", "tiles_explored",
                     "tiles_visible", "trade_routes_active",
                     "pending_deals_incoming", "unit_slot_capacity",
                     "city_slot_capacity"):
            scalar(name)

        for name in ("opp_met", "opp_at_war", "opp_peace_treaty_until",
                     "opp_has_trade_route_to", "opp_pending_deal_kind",
                     "opp_tourism_vs", "opp_culture_lifetime", "opp_delegates_last"):
            vector(name, 5)
        vector("congress_votes_last", 6)
        for name in ("cs_influence", "cs_met", "cs_ally_agent", "cs_tile"):
            vector(name, config.num_city_states)
        for name in ("tech_unlocked", "tech_available", "tech_progress",
                     "tech_global_unlock_counts"):
            vector(name, len(rt.techs))
        vector("policy_adopted", len(rt.policies))
        vector("policy_affordable", len(rt.policies))
        vector("shuttle_parts_mine", 6)
        vector("shuttle_parts_global_counts", 6)
        for name in ("city_present", "city_tile", "city_population", "city_hp",
                     "city_food_stock", "city_growth_threshold",
                     "city_production_kind", "city_production_item",
                     "city_production_progress", "city_production_cost",
                     "city_is_original_capital", "city_border_stock",
                     "city_border_threshold", "city_focus", "city_food_out",
                     "city_production_out", "city_gold_out", "city_science_out",
                     "city_culture_out", "city_tourism_out"):
            vector(name, config.city_slots)
        for name in ("unit_present", "unit_tile", "unit_kind", "unit_hp",
                     "unit_moves_left", "unit_fortified", "unit_acted",
                     "unit_working"):
            vector(name, config.unit_slots)

        self.elements = el
        self.index = {e.name: i for i, e in enumerate(el)}
        self.n_tiles = n_tiles

    def __len__(self) -> int:
        return len(self.elements)

    def descriptor(self) -> list[dict]:
        return [{"name": e.name, "kind": e.kind, "length": e.length}
                for e in self.elements]


@dataclass
class Observation:
    registry: ObservationRegistry
    values: dict      # name -> np.int32 array (shape (length,))
    valid: dict       # name -> np.uint8 array; maps use the -1 sentinel instead

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]


def build_observation(state: GameState, agent: int,
                      registry: ObservationRegistry | None = None) -> Observation:
    registry = registry or ObservationRegistry(state.config)
    cfg = state.config
    rt = state.rules
    m = state.map
    n = m.n_tiles
    e = state.empires[agent]
    vis = visibility.compute_visibility(state, agent)
    explored = vis >= visibility.EXPLORED
    visible = vis >= visibility.VISIBLE
    values: dict[str, np.ndarray] = {}
    valid: dict[str, np.ndarray] = {}

    def masked_static(arr) -> np.ndarray:
        out = np.where(explored, arr.astype(np.int32), UNKNOWN)
        return out.astype(np.int32)

    def masked_dynamic(arr) -> np.ndarray:
        out = np.where(visible, arr.astype(np.int32), UNKNOWN)
        return out.astype(np.int32)

    values["map_terrain"] = masked_static(m.terrain)
    values["map_elevation"] = masked_static(m.elevation)
    values["map_feature"] = masked_static(m.feature)
    values["map_resource"] = masked_static(m.resource)
    values["map_natural_wonder"] = masked_static(m.natural_wonder)
    values["map_region"] = masked_static(m.region)
    values["map_improvement"] = masked_dynamic(m.improvement)
    values["map_owner"] = masked_dynamic(m.owner)
    city_owner = np.full(n, UNKNOWN, dtype=np.int32)
    city_pop = np.full(n, UNKNOWN, dtype=np.int32)
    for c in state.cities.values():
        city_owner[c.position] = c.owner
        city_pop[c.position] = c.population
    values["map_city_owner"] = masked_dynamic(city_owner)
    values["map_city_population"] = masked_dynamic(city_pop)
    mk = np.full(n, UNKNOWN, dtype=np.int32)
    mo = np.full(n, UNKNOWN, dtype=np.int32)
    ck = np.full(n, UNKNOWN, dtype=np.int32)
    co = np.full(n, UNKNOWN, dtype=np.int32)
    for u in state.units.values():
        if rt.units[u.kind].civilian:
            ck[u.position] = u.kind
            co[u.position] = u.owner
        else:
            mk[u.position] = u.kind
            mo[u.position] = u.owner
    values["map_unit_military_kind"] = masked_dynamic(mk)
    values["map_unit_military_owner"] = masked_dynamic(mo)
    values["map_unit_civilian_kind"] = masked_dynamic(ck)
    values["map_unit_civilian_owner"] = masked_dynamic(co)
    values["map_visibility"] = vis.astype(np.int32)

    outputs = [engine.city_output(state, state.cities[cid])
               if (cid := e.city_slot_ids[s]) >= 0 and cid in state.cities
               and state.cities[cid].owner == agent else None
               for s in range(cfg.city_slots)]
    pol = engine.policy_totals(state, agent)
    science_rate = sum(o[3] for o in outputs if o) + pol["science"]
    gold_rate = sum(o[2] for o in outputs if o) + pol["gold"] + \
        engine.TRADE_ROUTE_GOLD * len(e.trade_routes)
    culture_rate = sum(o[4] for o in outputs if o) + pol["culture"]
    tourism_rate = sum(o[5] for o in outputs if o) + pol["tourism"]
    n_policies = bin(e.policies).count("1")
    era = max([rt.era_index(t) for t in range(len(rt.techs)) if e.has_tech(t)],
              default=0)
    my_cities = [c for c in state.cities.values() if c.owner == agent]
    my_units = [u for u in state.units.values() if u.owner == agent]

    def put_scalar(name: str, v, known: bool = True) -> None:
        values[name] = np.array([int(v)], dtype=np.int32)
        valid[name] = np.array([1 if known else 0], dtype=np.uint8)

    put_scalar("turn", state.turn)
    put_scalar("step_index", state.step_index)
    put_scalar("agent_id", agent)
    put_scalar("active_agent", state.active_agent)
    put_scalar("max_game_turns", cfg.max_game_turns)
    put_scalar("map_width", cfg.map_width)
    put_scalar("map_height", cfg.map_height)
    put_scalar("congress_interval_turns", cfg.congress_interval_turns)
    put_scalar("diplo_votes_to_win", cfg.diplo_votes_to_win)
    put_scalar("gold", e.gold)
    put_scalar("gold_rate", gold_rate)
    put_scalar("science_rate", science_rate)
    put_scalar("culture_rate", culture_rate)
    put_scalar("tourism_rate", tourism_rate)
    put_scalar("culture_stock", e.culture_stock)
    put_scalar("culture_lifetime", e.culture_lifetime)
    put_scalar("policy_cost_next", engine.policy_cost(n_policies))
    put_scalar("era", era)
    put_scalar("current_tech", e.current_tech)
    put_scalar("current_tech_progress",
               e.science_progress.get(e.current_tech, 0) if e.current_tech >= 0 else 0)
    put_scalar("current_tech_cost",
               rt.techs[e.current_tech].science_cost if e.current_tech >= 0 else 0)
    put_scalar("num_techs_unlocked", bin(e.unlocked_techs).count("1"))
    put_scalar("num_policies", n_policies)
    put_scalar("num_cities", len(my_cities))
    put_scalar("num_units", len(my_units))
    put_scalar("delegates_last", e.delegates)
    put_scalar("congress_active", state.congress.active)
    put_scalar("congress_session_pending", engine.session_pending(state))
    put_scalar("congress_first_session_turn", state.congress.first_session_turn)
    put_scalar("congress_sessions_held", state.congress.sessions_held)
    put_scalar("congress_last_winner", state.congress.last_winner)
    put_scalar("apollo_built", e.apollo_built)
    put_scalar("shuttle_parts_count", bin(e.shuttle_parts_built).count("1"))
    put_scalar("aluminum_connected", engine.connected_count(state, agent, "aluminum"))
    put_scalar("eliminated", e.eliminated)
    put_scalar("at_war_any", e.at_war_with != 0)
    put_scalar("tiles_owned", int((m.owner == agent).sum()))
    put_scalar("tiles_explored", int(explored.sum()))
    put_scalar("tiles_visible", int(visible.sum()))
    put_scalar("trade_routes_active", len(e.trade_routes))
    put_scalar("pending_deals_incoming",
               sum(1 for p in state.pending_deals if p.to_agent == agent))
    put_scalar("unit_slot_capacity", cfg.unit_slots)
    put_scalar("city_slot_capacity", cfg.city_slots)

    def put_vector(name: str, vals, mask=None) -> None:
        values[name] = np.asarray(list(vals), dtype=np.int32)
        if mask is None:
            valid[name] = np.ones(len(values[name]), dtype=np.uint8)
        else:
            valid[name] = np.asarray([1 if x else 0 for x in mask], dtype=np.uint8)

    opponents = opponents_of(agent)
    met = [e.has_met(o) for o in opponents]
    put_vector("opp_met", [int(x) for x in met])
    put_vector("opp_at_war", [int(e.is_at_war(o)) for o in opponents])
    put_vector("opp_peace_treaty_until", [e.peace_treaty_until[o] for o in opponents])
    put_vector("opp_has_trade_route_to",
               [int(any(tr.dest_agent == o for tr in e.trade_routes)) for o in opponents])
    pend = {}
    for p in state.pending_deals:
        if p.to_agent == agent:
            pend.setdefault(p.from_agent, _PENDING_DEAL_CODES[p.kind])
    put_vector("opp_pending_deal_kind", [pend.get(o, 0) for o in opponents])
    put_vector("opp_tourism_vs", [e.tourism_accumulated_vs[o] for o in opponents])
    put_vector("opp_culture_lifetime",
               [state.empires[o].culture_lifetime if e.has_met(o) else 0 for o in opponents],
               mask=met)
    held = state.congress.sessions_held > 0
    put_vector("opp_delegates_last",
               [state.empires[o].delegates if held else 0 for o in opponents],
               mask=[held] * 5)
    put_vector("congress_votes_last", state.congress.last_votes,
               mask=[held] * 6)
    cs_met = [bool(e.met_city_states >> k & 1) for k in range(cfg.num_city_states)]
    allies = engine.city_state_allies(state)
    put_vector("cs_influence", e.cs_influence, mask=cs_met)
    put_vector("cs_met", [int(x) for x in cs_met])
    put_vector("cs_ally_agent", [allies[k] if cs_met[k] else -1 for k in range(cfg.num_city_states)],
               mask=cs_met)
    put_vector("cs_tile",
               [state.city_states[k].position if cs_met[k] else -1
                for k in range(cfg.num_city_states)], mask=cs_met)
    n_techs = len(rt.techs)
    put_vector("tech_unlocked", [int(e.has_tech(t)) for t in range(n_techs)])
    put_vector("tech_available",
               [int(not e.has_tech(t) and all(e.has_tech(rt.tech_idx[p])
                                              for p in rt.techs[t].prereq_ids))
                for t in range(n_techs)])
    put_vector("tech_progress", [e.science_progress.get(t, 0) for t in range(n_techs)])
    put_vector("tech_global_unlock_counts",
               [sum(1 for a in range(6) if state.empires[a].has_tech(t))
                for t in range(n_techs)])
    put_vector("policy_adopted", [int(e.has_policy(p)) for p in range(len(rt.policies))])
    cost_next = engine.policy_cost(n_policies)
    afford = e.culture_stock >= cost_next
    put_vector("policy_affordable",
               [int(afford and not e.has_policy(p)) for p in range(len(rt.policies))])
    put_vector("shuttle_parts_mine",
               [int(e.shuttle_parts_built >> i & 1) for i in range(6)])
    put_vector("shuttle_parts_global_counts",
               [sum(state.empires[a].shuttle_parts_built >> i & 1 for a in range(6))
                for i in range(6)])

    c_present = []
    rows: dict[str, list[int]] = {name: [] for name in (
        "city_tile", "city_population", "city_hp", "city_food_stock",
        "city_growth_threshold", "city_production_kind", "city_production_item",
        "city_production_progress", "city_production_cost",
        "city_is_original_capital", "city_border_stock", "city_border_threshold",
        "city_focus", "city_food_out", "city_production_out", "city_gold_out",
        "city_science_out", "city_culture_out", "city_tourism_out")}
    for s in range(cfg.city_slots):
        cid = e.city_slot_ids[s]
        city = state.cities.get(cid) if cid >= 0 else None
        if city is None or city.owner != agent:
            c_present.append(0)
            for name in rows:
                rows[name].append(0)
            continue
        c_present.append(1)
        out = outputs[s] or engine.city_output(state, city)
        item = city.production_item
        rows["city_tile"].append(city.position)
        rows["city_population"].append(city.population)
        rows["city_hp"].append(city.hp)
        rows["city_food_stock"].append(city.food_stock)
        rows["city_growth_threshold"].append(engine.growth_threshold(city.population))
        rows["city_production_kind"].append(_PROD_KIND_CODES[item[0] if item else None])
        rows["city_production_item"].append(item[1] if item else -1)
        rows["city_production_progress"].append(
            city.production_progress.get(item, 0) if item else 0)
        rows["city_production_cost"].append(
            engine._item_cost(rt, item) if item else 0)
        rows["city_is_original_capital"].append(
            int(e.original_capital_id == city.id))
        rows["city_border_stock"].append(city.border_stock)
        rows["city_border_threshold"].append(engine.border_threshold(city.tiles_acquired))
        rows["city_focus"].append(city.focus)
        rows["city_food_out"].append(out[0])
        rows["city_production_out"].append(out[1])
        rows["city_gold_out"].append(out[2])
        rows["city_science_out"].append(out[3])
        rows["city_culture_out"].append(out[4])
        rows["city_tourism_out"].append(out[5])
    put_vector("city_present", c_present)
    for name, vals in rows.items():
        put_vector(name, vals, mask=c_present)

    u_present = []
    urows: dict[str, list[int]] = {name: [] for name in (
        "unit_tile", "unit_kind", "unit_hp", "unit_moves_left",
        "unit_fortified", "unit_acted", "unit_working")}
    for s in range(cfg.unit_slots):
        uid = e.unit_slot_ids[s]
        unit = state.units.get(uid) if uid >= 0 else None
        if unit is None or unit.owner != agent:
            u_present.append(0)
            for name in urows:
                urows[name].append(0)
            continue
        u_present.append(1)
        urows["unit_tile"].append(unit.position)
        urows["unit_kind"].append(unit.kind)
        urows["unit_hp"].append(unit.hp)
        urows["unit_moves_left"].append(int(unit.moves_left))
        urows["unit_fortified"].append(int(unit.fortified))
        urows["unit_acted"].append(int(unit.acted))
        urows["unit_working"].append(int(unit.orders is not None))
    put_vector("unit_present", u_present)
    for name, vals in urows.items():
        put_vector(name, vals, mask=u_present)

    return Observation(registry, values, valid)


def encode_observation(obs: Observation) -> bytes:
    """Versioned binary layout: registry order, int32 values little-endian,
    validity bytes preceding non-map elements."""
    parts = [struct.pack("<HI", OBS_FORMAT_VERSION, len(obs.registry))]
    for el in obs.registry.elements:
        v = obs.values[el.name].astype("<i4")
        if el.kind != "map":
            parts.append(obs.valid[el.name].astype("<u1").tobytes())
        parts.append(v.tobytes())
    return b"".join(parts)


def decode_observation(data: bytes, registry: ObservationRegistry) -> Observation:
    version, count = struct.unpack_from("<HI", data, 0)
    if version != OBS_FORMAT_VERSION or count != len(registry):
        raise ValueError("observation blob does not match registry")
    pos = 6
    values: dict[str, np.ndarray] = {}
    valid: dict[str, np.ndarray] = {}
    for el in registry.elements:
        if el.kind != "map":
            valid[el.name] = np.frombuffer(data, dtype=np.uint8,
                                           count=el.length, offset=pos).copy()
            pos += el.length
        values[el.name] = np.frombuffer(data, dtype="<i4",
                                        count=el.length, offset=pos).copy()
        pos += 4 * el.length
    return Observation(registry, values, valid)
