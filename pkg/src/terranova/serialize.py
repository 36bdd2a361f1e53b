"""Canonical binary encoding of game state.

One byte layout, fixed field order, little-endian scalars: the same bytes
feed state digests, `.gamestate` files, and replay keyframes, which is what
makes "bit-identical" checks meaningful across processes and platforms.

The per-turn event log and the derived occupancy indexes are deliberately
outside the encoding: the former is step output already captured by
replays, the latter is rebuilt on decode.

`.gamestate` container: magic ``TNGS``, format version u16, u32 payload
length, payload = canonical state encoding.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .rng import RandomStream
from .rules import RuleTables, load_default
from .state import (
    NUM_AGENTS,
    RNG_STREAM_NAMES,
    City,
    CityStateInfo,
    CongressState,
    EmpireState,
    GameConfig,
    GameMap,
    GameState,
    PendingDeal,
    TradeDeal,
    TradeRoute,
    Unit,
    VictoryStatus,
)

GAMESTATE_MAGIC = b"TNGS"
FORMAT_VERSION = 1


class CodecError(Exception):
    pass


class VersionUnsupported(CodecError):
    pass


class DigestMismatch(CodecError):
    pass


class Writer:
    def __init__(self) -> None:
        self.parts: list[bytes] = []

    def u8(self, v: int) -> None:
        self.parts.append(struct.pack("<B", v))

    def i8(self, v: int) -> None:
        self.parts.append(struct.pack("<b", v))

    def u16(self, v: int) -> None:
        self.parts.append(struct.pack("<H", v))

    def i32(self, v: int) -> None:
        self.parts.append(struct.pack("<i", v))

    def u32(self, v: int) -> None:
        self.parts.append(struct.pack("<I", v))

    def u64(self, v: int) -> None:
        self.parts.append(struct.pack("<Q", v))

    def i64(self, v: int) -> None:
        self.parts.append(struct.pack("<q", v))

    def f64(self, v: float) -> None:
        self.parts.append(struct.pack("<d", v))

    def blob(self, b: bytes) -> None:
        self.u32(len(b))
        self.parts.append(b)

    def text(self, s: str) -> None:
        self.blob(s.encode("utf-8"))

    def i32_list(self, xs) -> None:
        self.u32(len(xs))
        self.parts.append(np.asarray(list(xs), dtype="<i4").tobytes())

    def done(self) -> bytes:
        return b"".join(self.parts)


class Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CodecError("truncated state blob")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self._take(1))[0]

    def i8(self) -> int:
        return struct.unpack("<b", self._take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def i32(self) -> int:
        return struct.unpack("<i", self._take(4))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self._take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def blob(self) -> bytes:
        return self._take(self.u32())

    def text(self) -> str:
        return self.blob().decode("utf-8")

    def i32_list(self) -> list[int]:
        n = self.u32()
        return np.frombuffer(self._take(4 * n), dtype="<i4").tolist()


def _put_array_i8(w: Writer, arr: np.ndarray) -> None:
    w.blob(arr.astype(np.int8).tobytes())


def _get_array_i8(r: Reader, n: int) -> np.ndarray:
    b = r.blob()
    if len(b) != n:
        raise CodecError("array length mismatch")
    return np.frombuffer(b, dtype=np.int8).copy()


def _put_unit(w: Writer, u: Unit) -> None:
    w.u32(u.id)
    w.i8(u.owner)
    w.u8(u.kind)
    w.i32(u.hp)
    w.f64(u.moves_left)
    w.i32(u.position)
    w.u8((u.embarked << 2) | (u.fortified << 1) | u.acted)
    if u.orders is None:
        w.u8(0)
    else:
        w.u8(1)
        w.text(u.orders[0])
        w.i32_list([int(x) for x in u.orders[1:]])


def _get_unit(r: Reader) -> Unit:
    uid = r.u32()
    owner = r.i8()
    kind = r.u8()
    hp = r.i32()
    moves = r.f64()
    pos = r.i32()
    flags = r.u8()
    orders = None
    if r.u8():
        tag = r.text()
        rest = r.i32_list()
        orders = (tag, *rest)
    return Unit(uid, owner, kind, hp, moves, pos,
                embarked=bool(flags >> 2 & 1), fortified=bool(flags >> 1 & 1),
                acted=bool(flags & 1), orders=orders)


def _put_city(w: Writer, c: City) -> None:
    w.u32(c.id)
    w.i8(c.owner)
    w.i8(c.original_owner)
    w.i32(c.position)
    w.i32(c.population)
    w.i32(c.hp)
    w.i32(c.food_stock)
    w.u64(c.buildings)
    w.i32_list(c.worked_tiles)
    w.i32_list(c.border_tiles)
    w.u8(c.is_capital)
    if c.production_item is None:
        w.u8(0)
    else:
        w.u8(1)
        w.text(c.production_item[0])
        w.i32(c.production_item[1])
    items = sorted(c.production_progress.items())
    w.u32(len(items))
    for (kind, idx), invested in items:
        w.text(kind)
        w.i32(idx)
        w.i32(invested)
    w.i32(c.production_overflow)
    w.i32(c.border_stock)
    w.i32(c.tiles_acquired)
    w.u8(c.focus)


def _get_city(r: Reader) -> City:
    c = City(r.u32(), r.i8(), r.i8(), r.i32())
    c.population = r.i32()
    c.hp = r.i32()
    c.food_stock = r.i32()
    c.buildings = r.u64()
    c.worked_tiles = r.i32_list()
    c.border_tiles = r.i32_list()
    c.is_capital = bool(r.u8())
    if r.u8():
        kind = r.text()
        c.production_item = (kind, r.i32())
    n = r.u32()
    for _ in range(n):
        kind = r.text()
        idx = r.i32()
        c.production_progress[(kind, idx)] = r.i32()
    c.production_overflow = r.i32()
    c.border_stock = r.i32()
    c.tiles_acquired = r.i32()
    c.focus = r.u8()
    return c


def _put_empire(w: Writer, e: EmpireState) -> None:
    w.u8(e.agent)
    w.i64(e.gold)
    items = sorted(e.science_progress.items())
    w.u32(len(items))
    for tech, acc in items:
        w.i32(tech)
        w.i32(acc)
    w.i32(e.current_tech)
    w.u64(e.unlocked_techs)
    w.u64(e.policies)
    w.i64(e.culture_stock)
    w.i64(e.culture_lifetime)
    w.i32_list(e.tourism_accumulated_vs)
    res = sorted(e.strategic_resources.items())
    w.u32(len(res))
    for idx, cnt in res:
        w.i32(idx)
        w.i32(cnt)
    w.u32(len(e.trade_routes))
    for tr in e.trade_routes:
        w.i32(tr.origin_city)
        w.i32(tr.dest_city)
        w.i8(tr.dest_agent)
        w.i32(tr.start_turn)
    w.u32(len(e.deals))
    for d in e.deals:
        w.text(d.kind)
        w.i8(d.from_agent)
        w.i8(d.to_agent)
        w.i32(d.resource)
        w.i32(d.gold)
        w.i32(d.turn_made)
    w.u8(e.at_war_with)
    w.u8(e.met_agents)
    w.u16(e.met_city_states)
    w.i32_list(e.peace_treaty_until)
    w.i32_list(e.cs_influence)
    w.i32(e.delegates)
    w.u8(e.apollo_built)
    w.u8(e.shuttle_parts_built)
    w.i32(e.original_capital_id)
    w.u8(e.eliminated)
    w.i32_list(e.unit_slot_ids)
    w.i32_list(e.city_slot_ids)


def _get_empire(r: Reader) -> EmpireState:
    e = EmpireState(agent=r.u8())
    e.gold = r.i64()
    for _ in range(r.u32()):
        tech = r.i32()
        e.science_progress[tech] = r.i32()
    e.current_tech = r.i32()
    e.unlocked_techs = r.u64()
    e.policies = r.u64()
    e.culture_stock = r.i64()
    e.culture_lifetime = r.i64()
    e.tourism_accumulated_vs = r.i32_list()
    for _ in range(r.u32()):
        idx = r.i32()
        e.strategic_resources[idx] = r.i32()
    for _ in range(r.u32()):
        e.trade_routes.append(TradeRoute(r.i32(), r.i32(), r.i8(), r.i32()))
    for _ in range(r.u32()):
        kind = r.text()
        e.deals.append(TradeDeal(kind, r.i8(), r.i8(), r.i32(), r.i32(), r.i32()))
    e.at_war_with = r.u8()
    e.met_agents = r.u8()
    e.met_city_states = r.u16()
    e.peace_treaty_until = r.i32_list()
    e.cs_influence = r.i32_list()
    e.delegates = r.i32()
    e.apollo_built = bool(r.u8())
    e.shuttle_parts_built = r.u8()
    e.original_capital_id = r.i32()
    e.eliminated = bool(r.u8())
    e.unit_slot_ids = r.i32_list()
    e.city_slot_ids = r.i32_list()
    return e


def encode_state(state: GameState) -> bytes:
    w = Writer()
    w.u16(FORMAT_VERSION)
    w.text(json.dumps(state.config.public_dict(), sort_keys=True, separators=(",", ":")))
    m = state.map
    w.u16(m.width)
    w.u16(m.height)
    w.u64(m.seed)
    for arr in (m.terrain, m.elevation, m.feature, m.resource, m.natural_wonder,
                m.region, m.improvement, m.owner):
        _put_array_i8(w, arr)
    w.i32_list(m.start_positions)
    w.i32_list(m.city_state_positions)
    w.i32_list(m.natural_wonder_positions)
    w.u32(state.turn)
    w.u32(state.step_index)
    w.u8(state.active_agent)
    w.u32(len(state.units))
    for uid in sorted(state.units):
        _put_unit(w, state.units[uid])
    w.u32(len(state.cities))
    for cid in sorted(state.cities):
        _put_city(w, state.cities[cid])
    for e in state.empires:
        _put_empire(w, e)
    w.u32(len(state.city_states))
    for cs in state.city_states:
        w.u8(cs.id)
        w.i32(cs.position)
        w.i32(cs.city_id)
    cg = state.congress
    w.u8(cg.active)
    w.i32(cg.first_session_turn)
    w.i32(cg.sessions_held)
    w.i32_list(cg.pending_votes)
    w.i32_list(cg.last_votes)
    w.i32(cg.last_winner)
    w.i32(cg.last_session_turn)
    v = state.victory
    w.text(v.kind)
    w.i32(v.winner)
    w.i32(v.turn_decided)
    w.u8(v.turn_limit_reached)
    for name in RNG_STREAM_NAMES:
        w.u64(state.rng[name].state)
    w.u32(len(state.pending_deals))
    for d in state.pending_deals:
        w.text(d.kind)
        w.i8(d.from_agent)
        w.i8(d.to_agent)
        w.i32(d.resource)
        w.i32(d.gold)
    w.blob(np.packbits(state.explored.astype(np.uint8), axis=None).tobytes())
    w.u32(state.next_unit_id)
    w.u32(state.next_city_id)
    return w.done()


def decode_state(data: bytes, rule_tables: RuleTables | None = None) -> GameState:
    r = Reader(data)
    version = r.u16()
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"state format {version} not supported")
    cfg_doc = json.loads(r.text())
    rules = rule_tables or load_default()
    if cfg_doc["rules_digest"] != rules.digest():
        raise DigestMismatch("state was encoded under different rule tables")
    cfg = GameConfig(
        max_game_turns=cfg_doc["max_game_turns"],
        map_width=cfg_doc["map_width"],
        map_height=cfg_doc["map_height"],
        num_city_states=cfg_doc["num_city_states"],
        congress_interval_turns=cfg_doc["congress_interval_turns"],
        diplo_votes_to_win=cfg_doc["diplo_votes_to_win"],
        reward_mode=cfg_doc["reward_mode"],
        unit_slots=cfg_doc["unit_slots"],
        city_slots=cfg_doc["city_slots"],
        sight_radius=cfg_doc["sight_radius"],
        reward_weights=dict(cfg_doc["reward_weights"]),
        rule_tables=rules,
    )
    width = r.u16()
    height = r.u16()
    seed = r.u64()
    n = width * height
    arrays = [_get_array_i8(r, n) for _ in range(8)]
    m = GameMap(width, height, seed,
                terrain=arrays[0].astype(np.uint8), elevation=arrays[1].astype(np.uint8),
                feature=arrays[2], resource=arrays[3], natural_wonder=arrays[4],
                region=arrays[5], improvement=arrays[6], owner=arrays[7])
    m.start_positions = r.i32_list()
    m.city_state_positions = r.i32_list()
    m.natural_wonder_positions = r.i32_list()
    state = GameState(config=cfg, map=m)
    state.turn = r.u32()
    state.step_index = r.u32()
    state.active_agent = r.u8()
    for _ in range(r.u32()):
        u = _get_unit(r)
        state.units[u.id] = u
    for _ in range(r.u32()):
        c = _get_city(r)
        state.cities[c.id] = c
    state.empires = [_get_empire(r) for _ in range(NUM_AGENTS)]
    for _ in range(r.u32()):
        state.city_states.append(CityStateInfo(r.u8(), r.i32(), r.i32()))
    cg = CongressState()
    cg.active = bool(r.u8())
    cg.first_session_turn = r.i32()
    cg.sessions_held = r.i32()
    cg.pending_votes = r.i32_list()
    cg.last_votes = r.i32_list()
    cg.last_winner = r.i32()
    cg.last_session_turn = r.i32()
    state.congress = cg
    state.victory = VictoryStatus(r.text(), r.i32(), r.i32(), bool(r.u8()))
    state.rng = {name: RandomStream(r.u64()) for name in RNG_STREAM_NAMES}
    for _ in range(r.u32()):
        kind = r.text()
        state.pending_deals.append(PendingDeal(kind, r.i8(), r.i8(), r.i32(), r.i32()))
    bits = np.frombuffer(r.blob(), dtype=np.uint8)
    state.explored = np.unpackbits(bits)[:NUM_AGENTS * n].reshape(NUM_AGENTS, n).astype(bool)
    state.next_unit_id = r.u32()
    state.next_city_id = r.u32()
    state.rebuild_indexes()
    return state


def state_digest(state: GameState) -> str:
    return hashlib.sha256(encode_state(state)).hexdigest()


def write_gamestate(state: GameState) -> bytes:
    """Serialize into the `.gamestate` container format."""
    payload = encode_state(state)
    return GAMESTATE_MAGIC + struct.pack("<H", FORMAT_VERSION) + struct.pack("<I", len(payload)) + payload


def read_gamestate(blob: bytes, rule_tables: RuleTables | None = None) -> GameState:
    if blob[:4] != GAMESTATE_MAGIC:
        raise CodecError("not a .gamestate container (bad magic)")
    version = struct.unpack("<H", blob[4:6])[0]
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"gamestate container version {version}")
    (length,) = struct.unpack("<I", blob[6:10])
    payload = blob[10:10 + length]
    if len(payload) != length:
        raise CodecError("truncated .gamestate container")
    return decode_state(payload, rule_tables)


def save_gamestate(state: GameState, path: str) -> None:
    with open(path, "wb") as f:
        f.write(write_gamestate(state))


def load_gamestate(path: str, rule_tables: RuleTables | None = None) -> GameState:
    with open(path, "rb") as f:
        return read_gamestate(f.read(), rule_tables)


def state_to_json(state: GameState) -> dict:
    """Lossless JSON view of the full state, for debugging and tooling."""
    m = state.map
    rt = state.rules
    return {
        "format": FORMAT_VERSION,
        "config": state.config.public_dict(),
        "map": {
            "width": m.width, "height": m.height, "seed": m.seed,
            "terrain": m.terrain.tolist(), "elevation": m.elevation.tolist(),
            "feature": m.feature.tolist(), "resource": m.resource.tolist(),
            "natural_wonder": m.natural_wonder.tolist(), "region": m.region.tolist(),
            "improvement": m.improvement.tolist(), "owner": m.owner.tolist(),
            "start_positions": m.start_positions,
            "city_state_positions": m.city_state_positions,
            "natural_wonder_positions": m.natural_wonder_positions,
        },
        "turn": state.turn,
        "step_index": state.step_index,
        "active_agent": state.active_agent,
        "units": [{
            "id": u.id, "owner": u.owner, "kind": rt.units[u.kind].id, "hp": u.hp,
            "moves_left": u.moves_left, "position": u.position, "embarked": u.embarked,
            "fortified": u.fortified, "acted": u.acted,
            "orders": list(u.orders) if u.orders else None,
        } for _, u in sorted(state.units.items())],
        "cities": [{
            "id": c.id, "owner": c.owner, "original_owner": c.original_owner,
            "position": c.position, "population": c.population, "hp": c.hp,
            "food_stock": c.food_stock,
            "buildings": [rt.buildings[i].id for i in range(len(rt.buildings))
                          if c.buildings >> i & 1],
            "worked_tiles": c.worked_tiles, "border_tiles": c.border_tiles,
            "is_capital": c.is_capital, "production_item": c.production_item,
            "production_progress": [[k, i, v] for (k, i), v in sorted(c.production_progress.items())],
            "production_overflow": c.production_overflow,
            "border_stock": c.border_stock, "tiles_acquired": c.tiles_acquired,
            "focus": c.focus,
        } for _, c in sorted(state.cities.items())],
        "empires": [{
            "agent": e.agent, "gold": e.gold,
            "science_progress": {rt.techs[t].id: v for t, v in sorted(e.science_progress.items())},
            "current_tech": rt.techs[e.current_tech].id if e.current_tech >= 0 else None,
            "unlocked_techs": [rt.techs[i].id for i in range(len(rt.techs))
                               if e.unlocked_techs >> i & 1],
            "policies": [rt.policies[i].id for i in range(len(rt.policies))
                         if e.policies >> i & 1],
            "culture_stock": e.culture_stock, "culture_lifetime": e.culture_lifetime,
            "tourism_accumulated_vs": e.tourism_accumulated_vs,
            "strategic_resources": {rt.resources[k].id: v
                                    for k, v in sorted(e.strategic_resources.items())},
            "trade_routes": [[tr.origin_city, tr.dest_city, tr.dest_agent, tr.start_turn]
                             for tr in e.trade_routes],
            "deals": [[d.kind, d.from_agent, d.to_agent, d.resource, d.gold, d.turn_made]
                      for d in e.deals],
            "at_war_with": e.at_war_with, "met_agents": e.met_agents,
            "met_city_states": e.met_city_states,
            "peace_treaty_until": e.peace_treaty_until,
            "cs_influence": e.cs_influence, "delegates": e.delegates,
            "apollo_built": e.apollo_built, "shuttle_parts_built": e.shuttle_parts_built,
            "original_capital_id": e.original_capital_id, "eliminated": e.eliminated,
            "unit_slot_ids": e.unit_slot_ids, "city_slot_ids": e.city_slot_ids,
        } for e in state.empires],
        "city_states": [{"id": cs.id, "position": cs.position, "city_id": cs.city_id}
                        for cs in state.city_states],
        "congress": {
            "active": state.congress.active,
            "first_session_turn": state.congress.first_session_turn,
            "sessions_held": state.congress.sessions_held,
            "pending_votes": state.congress.pending_votes,
            "last_votes": state.congress.last_votes,
            "last_winner": state.congress.last_winner,
            "last_session_turn": state.congress.last_session_turn,
        },
        "victory": {
            "kind": state.victory.kind, "winner": state.victory.winner,
            "turn_decided": state.victory.turn_decided,
            "turn_limit_reached": state.victory.turn_limit_reached,
        },
        "rng": {name: state.rng[name].state for name in RNG_STREAM_NAMES},
        "pending_deals": [[d.kind, d.from_agent, d.to_agent, d.resource, d.gold]
                          for d in state.pending_deals],
        "explored": [np.flatnonzero(state.explored[a]).tolist() for a in range(NUM_AGENTS)],
        "next_unit_id": state.next_unit_id,
        "next_city_id": state.next_city_id,
    }
