"""Core state types for the six-agent game.

`GameState` is the full Markov state: map, units, cities, empires,
city-states, congress, named RNG substreams, and victory status. States are
self-contained values; `clone()` produces an independent copy cheaply
(static map layers are shared, every mutable container is copied).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .hexgrid import HexGrid, grid_for
from .rng import RandomStream
from .rules import RuleTables, load_default

NUM_AGENTS = 6

# Terrain / elevation codes (indices into rules.TERRAINS / ELEVATIONS).
OCEAN, COAST, GRASSLAND, PLAINS, DESERT, TUNDRA, SNOW = range(7)
FLAT, HILL, MOUNTAIN = range(3)
# Feature codes; NO_FEATURE == -1 in the map layer.
NO_FEATURE = -1
FOREST, JUNGLE, MARSH, OASIS, FLOOD_PLAINS = range(5)

# Owner codes in map/owner layers: -1 unowned, 0..5 agents, 6+ city-states.
UNOWNED = -1
CITY_STATE_OWNER_BASE = 6

RNG_STREAM_NAMES = ("combat", "mapgen", "congress", "misc")

DEFAULT_REWARD_WEIGHTS = {
    "city_founded": 1.0,
    "population_grown": 0.25,
    "tech_finished": 0.5,
    "wonder_built": 1.0,
    "building_built": 0.1,
    "policy_adopted": 0.5,
    "enemy_unit_killed": 0.5,
    "city_captured": 2.0,
    "shuttle_part_built": 2.0,
    "congress_delegate_gained": 0.25,
}


class StateError(Exception):
    """Base class for rule/contract violations raised by the engine."""


class TerminalState(StateError):
    pass


class WrongAgent(StateError):
    pass


class UnsanitizedPlan(StateError):
    pass


@dataclass
class GameConfig:
    num_agents: int = NUM_AGENTS
    max_game_turns: int = 500
    map_width: int = 42
    map_height: int = 26
    num_city_states: int = 6
    congress_interval_turns: int = 30
    diplo_votes_to_win: int = 12
    reward_mode: str = "dense"              # dense | sparse
    unit_slots: int = 40                    # per-agent action slots
    city_slots: int = 12
    sight_radius: int = 2
    reward_weights: dict = field(default_factory=lambda: dict(DEFAULT_REWARD_WEIGHTS))
    rule_tables: RuleTables = field(default_factory=load_default)

    def __post_init__(self) -> None:
        if self.num_agents != NUM_AGENTS:
            raise ValueError("games are always played between six agents")
        if self.congress_interval_turns <= 0 or self.diplo_votes_to_win <= 0:
            raise ValueError("congress parameters must be positive")
        if self.max_game_turns <= 0:
            raise ValueError("max_game_turns must be positive")
        if self.reward_mode not in ("dense", "sparse"):
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")

    def public_dict(self) -> dict:
        """Config as plain data (rule tables represented by their digest)."""
        return {
            "num_agents": self.num_agents,
            "max_game_turns": self.max_game_turns,
            "map_width": self.map_width,
            "map_height": self.map_height,
            "num_city_states": self.num_city_states,
            "congress_interval_turns": self.congress_interval_turns,
            "diplo_votes_to_win": self.diplo_votes_to_win,
            "reward_mode": self.reward_mode,
            "unit_slots": self.unit_slots,
            "city_slots": self.city_slots,
            "sight_radius": self.sight_radius,
            "reward_weights": dict(sorted(self.reward_weights.items())),
            "rules_digest": self.rule_tables.digest(),
        }


@dataclass
class GameMap:
    width: int
    height: int
    seed: int
    # Static layers (shared between clones, never mutated after generation).
    terrain: np.ndarray          # u8
    elevation: np.ndarray        # u8
    feature: np.ndarray          # i8, -1 = none
    resource: np.ndarray         # i8, -1 = none
    natural_wonder: np.ndarray   # i8, -1 = none
    region: np.ndarray           # i8, -1 = water
    # Mutable layers (copied on clone).
    improvement: np.ndarray      # i8, -1 = none
    owner: np.ndarray            # i8, -1 = unowned
    start_positions: list[int] = field(default_factory=list)
    city_state_positions: list[int] = field(default_factory=list)
    natural_wonder_positions: list[int] = field(default_factory=list)

    @property
    def grid(self) -> HexGrid:
        return grid_for(self.width, self.height)

    @property
    def n_tiles(self) -> int:
        return self.width * self.height

    def is_land(self, tile: int) -> bool:
        return self.terrain[tile] >= GRASSLAND

    def is_water(self, tile: int) -> bool:
        return self.terrain[tile] <= COAST

    def passable(self, tile: int) -> bool:
        return self.terrain[tile] >= GRASSLAND and self.elevation[tile] != MOUNTAIN

    def clone(self) -> "GameMap":
        return replace(self, improvement=self.improvement.copy(), owner=self.owner.copy(),
                       start_positions=list(self.start_positions),
                       city_state_positions=list(self.city_state_positions),
                       natural_wonder_positions=list(self.natural_wonder_positions))


@dataclass
class Unit:
    id: int
    owner: int
    kind: int                    # index into rules.units
    hp: int = 100
    moves_left: float = 0.0
    position: int = -1
    embarked: bool = False       # reserved; naval movement is out of scope
    fortified: bool = False
    acted: bool = False          # moved/attacked since last turn boundary
    orders: tuple | None = None  # ("improve", improvement_idx, turns_left)

    def clone(self) -> "Unit":
        return Unit(self.id, self.owner, self.kind, self.hp, self.moves_left,
                    self.position, self.embarked, self.fortified, self.acted, self.orders)


@dataclass
class City:
    id: int
    owner: int                   # agent id or CITY_STATE_OWNER_BASE + k
    original_owner: int
    position: int
    population: int = 1
    hp: int = 200
    food_stock: int = 0
    buildings: int = 0           # bitmask over rules.buildings
    worked_tiles: list[int] = field(default_factory=list)
    border_tiles: list[int] = field(default_factory=list)   # sorted tile ids
    is_capital: bool = False
    production_item: tuple | None = None    # ("unit"|"building"|"project", idx)
    production_progress: dict = field(default_factory=dict)  # item -> invested
    production_overflow: int = 0
    border_stock: int = 0
    tiles_acquired: int = 0
    focus: int = 0               # work-allocation preset, see actions.FOCUS_NAMES

    def clone(self) -> "City":
        return City(self.id, self.owner, self.original_owner, self.position,
                    self.population, self.hp, self.food_stock, self.buildings,
                    list(self.worked_tiles), list(self.border_tiles), self.is_capital,
                    self.production_item, dict(self.production_progress),
                    self.production_overflow, self.border_stock, self.tiles_acquired,
                    self.focus)


@dataclass
class CityStateInfo:
    id: int                      # 0..num_city_states-1
    position: int
    city_id: int

    def clone(self) -> "CityStateInfo":
        return CityStateInfo(self.id, self.position, self.city_id)


@dataclass
class TradeRoute:
    origin_city: int
    dest_city: int
    dest_agent: int
    start_turn: int

    def clone(self) -> "TradeRoute":
        return TradeRoute(self.origin_city, self.dest_city, self.dest_agent, self.start_turn)


@dataclass
class TradeDeal:
    kind: str                    # "lux_for_gold" | "peace"
    from_agent: int
    to_agent: int
    resource: int = -1
    gold: int = 0
    turn_made: int = 0

    def clone(self) -> "TradeDeal":
        return TradeDeal(self.kind, self.from_agent, self.to_agent, self.resource,
                         self.gold, self.turn_made)


@dataclass
class PendingDeal:
    kind: str
    from_agent: int
    to_agent: int
    resource: int = -1
    gold: int = 0

    def clone(self) -> "PendingDeal":
        return PendingDeal(self.kind, self.from_agent, self.to_agent, self.resource, self.gold)


@dataclass
class CongressState:
    active: bool = False
    first_session_turn: int = -1
    sessions_held: int = 0
    pending_votes: list[int] = field(default_factory=lambda: [-1] * NUM_AGENTS)
    last_votes: list[int] = field(default_factory=lambda: [0] * NUM_AGENTS)
    last_winner: int = -1
    last_session_turn: int = -1

    def clone(self) -> "CongressState":
        return CongressState(self.active, self.first_session_turn, self.sessions_held,
                             list(self.pending_votes), list(self.last_votes),
                             self.last_winner, self.last_session_turn)


VICTORY_KINDS = ("none", "science", "domination", "culture", "diplomatic")


@dataclass
class VictoryStatus:
    kind: str = "none"
    winner: int = -1
    turn_decided: int = -1
    turn_limit_reached: bool = False

    @property
    def decided(self) -> bool:
        return self.kind != "none"

    @property
    def terminal(self) -> bool:
        return self.decided or self.turn_limit_reached

    def clone(self) -> "VictoryStatus":
        return VictoryStatus(self.kind, self.winner, self.turn_decided,
                             self.turn_limit_reached)


@dataclass
class EmpireState:
    agent: int
    gold: int = 50
    science_progress: dict = field(default_factory=dict)   # tech idx -> accumulated
    current_tech: int = -1
    unlocked_techs: int = 0          # bitmask over rules.techs
    policies: int = 0                # bitmask over rules.policies
    culture_stock: int = 0
    culture_lifetime: int = 0
    tourism_accumulated_vs: list[int] = field(default_factory=lambda: [0] * NUM_AGENTS)
    strategic_resources: dict = field(default_factory=dict)  # resource idx -> connected count
    trade_routes: list[TradeRoute] = field(default_factory=list)
    deals: list[TradeDeal] = field(default_factory=list)
    at_war_with: int = 0             # agent-id bitmask
    met_agents: int = 0              # agent-id bitmask
    met_city_states: int = 0         # city-state bitmask
    peace_treaty_until: list[int] = field(default_factory=lambda: [0] * NUM_AGENTS)
    cs_influence: list[int] = field(default_factory=list)
    delegates: int = 0               # delegates at the most recent tally
    apollo_built: bool = False
    shuttle_parts_built: int = 0     # bitmask over the 6 shuttle parts
    original_capital_id: int = -1
    eliminated: bool = False
    unit_slot_ids: list[int] = field(default_factory=list)   # slot -> unit id or -1
    city_slot_ids: list[int] = field(default_factory=list)   # slot -> city id or -1

    def has_tech(self, tech: int) -> bool:
        return bool(self.unlocked_techs >> tech & 1)

    def has_policy(self, policy: int) -> bool:
        return bool(self.policies >> policy & 1)

    def is_at_war(self, other: int) -> bool:
        return bool(self.at_war_with >> other & 1)

    def has_met(self, other: int) -> bool:
        return bool(self.met_agents >> other & 1)

    def clone(self) -> "EmpireState":
        return EmpireState(
            self.agent, self.gold, dict(self.science_progress), self.current_tech,
            self.unlocked_techs, self.policies, self.culture_stock, self.culture_lifetime,
            list(self.tourism_accumulated_vs), dict(self.strategic_resources),
            [r.clone() for r in self.trade_routes], [d.clone() for d in self.deals],
            self.at_war_with, self.met_agents, self.met_city_states,
            list(self.peace_treaty_until), list(self.cs_influence), self.delegates,
            self.apollo_built, self.shuttle_parts_built, self.original_capital_id,
            self.eliminated, list(self.unit_slot_ids), list(self.city_slot_ids))


@dataclass
class Event:
    kind: str
    agent: int = -1
    tile: int = -1
    data: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "agent": self.agent}
        if self.tile >= 0:
            out["tile"] = self.tile
        if self.data:
            out["data"] = self.data
        return out


@dataclass
class GameState:
    config: GameConfig
    map: GameMap
    turn: int = 1
    step_index: int = 0
    active_agent: int = 0
    units: dict = field(default_factory=dict)      # id -> Unit
    cities: dict = field(default_factory=dict)     # id -> City
    empires: list[EmpireState] = field(default_factory=list)
    city_states: list[CityStateInfo] = field(default_factory=list)
    congress: CongressState = field(default_factory=CongressState)
    victory: VictoryStatus = field(default_factory=VictoryStatus)
    rng: dict = field(default_factory=dict)        # name -> RandomStream
    pending_deals: list[PendingDeal] = field(default_factory=list)
    explored: np.ndarray | None = None             # bool (6, n_tiles)
    next_unit_id: int = 1
    next_city_id: int = 1
    event_log: list[Event] = field(default_factory=list)   # current-turn events
    # Derived occupancy indexes, rebuilt on decode; not part of the canonical encoding.
    mil_by_tile: np.ndarray | None = None
    civ_by_tile: np.ndarray | None = None
    city_by_tile: np.ndarray | None = None

    @property
    def rules(self) -> RuleTables:
        return self.config.rule_tables

    def rebuild_indexes(self) -> None:
        n = self.map.n_tiles
        self.mil_by_tile = np.full(n, -1, dtype=np.int32)
        self.civ_by_tile = np.full(n, -1, dtype=np.int32)
        self.city_by_tile = np.full(n, -1, dtype=np.int32)
        rt = self.rules
        for u in self.units.values():
            arr = self.civ_by_tile if rt.units[u.kind].civilian else self.mil_by_tile
            arr[u.position] = u.id
        for c in self.cities.values():
            self.city_by_tile[c.position] = c.id

    def unit_at(self, tile: int, military: bool) -> Unit | None:
        arr = self.mil_by_tile if military else self.civ_by_tile
        uid = int(arr[tile])
        return self.units.get(uid) if uid >= 0 else None

    def city_at(self, tile: int) -> City | None:
        cid = int(self.city_by_tile[tile])
        return self.cities.get(cid) if cid >= 0 else None

    def clone(self) -> "GameState":
        s = GameState(
            config=self.config,
            map=self.map.clone(),
            turn=self.turn,
            step_index=self.step_index,
            active_agent=self.active_agent,
            units={k: u.clone() for k, u in self.units.items()},
            cities={k: c.clone() for k, c in self.cities.items()},
            empires=[e.clone() for e in self.empires],
            city_states=[cs.clone() for cs in self.city_states],
            congress=self.congress.clone(),
            victory=self.victory.clone(),
            rng={k: v.clone() for k, v in self.rng.items()},
            pending_deals=[d.clone() for d in self.pending_deals],
            explored=None if self.explored is None else self.explored.copy(),
            next_unit_id=self.next_unit_id,
            next_city_id=self.next_city_id,
            event_log=list(self.event_log),
        )
        s.rebuild_indexes()
        return s


def make_rng_streams(seed: int) -> dict[str, RandomStream]:
    return {name: RandomStream.from_seed(seed, name) for name in RNG_STREAM_NAMES}
