"""Factorized composite action space: registry, plans, masks, sanitization.

One composite action is one index per sub-space, in the fixed registry
order. Index 0 of every sub-space is pass/no-op, so a mask is never
all-false and any raw index vector can be repaired by substitution.

Sub-space layout (per acting agent), sizes under the default config:
  unit_<s>        x unit_slots   1 pass + 37 disc targets + 3 abilities (41)
  city_prod_<s>   x city_slots   1 pass + units + buildings + projects  (53)
  city_focus_<s>  x city_slots   1 pass + 5 work-allocation presets      (6)
  research                       1 pass + one per tech                  (60)
  policy                         1 pass + one per policy                (26)
  deal_<o>        x 5 opponents  7 diplomatic verbs                      (7)
  cs_gift_<k>     x city_states  1 pass + 2 gift sizes                   (3)
  congress_vote                  1 abstain + one per candidate           (7)
  end_turn                       2                                       (2)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .hexgrid import disc_offsets
from .state import GameConfig, GameState

MOVE_DISC_RADIUS = 3
MOVE_TARGETS = len(disc_offsets(MOVE_DISC_RADIUS))            # 37
ABILITY_FOUND_CITY, ABILITY_IMPROVE, ABILITY_FORTIFY = range(3)
UNIT_ABILITIES = 3
UNIT_SPACE = 1 + MOVE_TARGETS + UNIT_ABILITIES

FOCUS_NAMES = ["keep", "balanced", "food", "production", "gold", "science"]

DEAL_VERBS = ["pass", "declare_war", "propose_peace", "propose_lux_for_gold",
              "establish_trade_route", "accept_pending", "reject_pending"]
GIFT_AMOUNTS = [0, 100, 250]


class ShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SubSpace:
    name: str
    kind: str       # unit | city_prod | city_focus | research | policy | deal | cs_gift | congress | end_turn
    slot: int       # slot / opponent-offset / city-state index; -1 for singletons
    size: int


class ActionSpaceRegistry:
    """Derives the sub-space inventory from a config's rule tables."""

    def __init__(self, config: GameConfig) -> None:
        rt = config.rule_tables
        self.config = config
        self.n_units = len(rt.units)
        self.n_buildings = len(rt.buildings)
        self.n_projects = len(rt.projects)
        self.prod_space = 1 + self.n_units + self.n_buildings + self.n_projects
        self.research_space = 1 + len(rt.techs)
        self.policy_space = 1 + len(rt.policies)
        self.congress_space = 1 + 6
        subspaces: list[SubSpace] = []
        for s in range(config.unit_slots):
            subspaces.append(SubSpace(f"unit_{s}", "unit", s, UNIT_SPACE))
        for s in range(config.city_slots):
            subspaces.append(SubSpace(f"city_prod_{s}", "city_prod", s, self.prod_space))
        for s in range(config.city_slots):
            subspaces.append(SubSpace(f"city_focus_{s}", "city_focus", s, len(FOCUS_NAMES)))
        subspaces.append(SubSpace("research", "research", -1, self.research_space))
        subspaces.append(SubSpace("policy", "policy", -1, self.policy_space))
        for o in range(5):
            subspaces.append(SubSpace(f"deal_{o}", "deal", o, len(DEAL_VERBS)))
        for k in range(config.num_city_states):
            subspaces.append(SubSpace(f"cs_gift_{k}", "cs_gift", k, len(GIFT_AMOUNTS)))
        subspaces.append(SubSpace("congress_vote", "congress", -1, self.congress_space))
        subspaces.append(SubSpace("end_turn", "end_turn", -1, 2))
        self.subspaces = subspaces
        self.sizes = [s.size for s in subspaces]
        self.index = {s.name: i for i, s in enumerate(subspaces)}

    def __len__(self) -> int:
        return len(self.subspaces)

    # --- production item codecs -------------------------------------------
    def prod_index(self, kind: str, idx: int) -> int:
        if kind == "unit":
            return 1 + idx
        if kind == "building":
            return 1 + self.n_units + idx
        if kind == "project":
            return 1 + self.n_units + self.n_buildings + idx
        raise ValueError(kind)

    def prod_item(self, index: int) -> tuple[str, int] | None:
        if index <= 0:
            return None
        index -= 1
        if index < self.n_units:
            return ("unit", index)
        index -= self.n_units
        if index < self.n_buildings:
            return ("building", index)
        return ("project", index - self.n_buildings)


def opponents_of(agent: int) -> list[int]:
    """Deal sub-space slot -> opponent agent id (ascending, skipping self)."""
    return [a for a in range(6) if a != agent]


@dataclass
class ActionPlan:
    """Structured view over one flat composite action."""
    registry: ActionSpaceRegistry
    flat: list[int]

    def __post_init__(self) -> None:
        if len(self.flat) != len(self.registry):
            raise ShapeMismatch(
                f"plan has {len(self.flat)} sub-actions, registry expects {len(self.registry)}")

    def sub(self, name: str) -> int:
        return self.flat[self.registry.index[name]]

    def unit_order(self, slot: int) -> tuple | None:
        """None (pass), ("move", disc_slot), or ("ability", code)."""
        v = self.sub(f"unit_{slot}")
        if v == 0:
            return None
        if v <= MOVE_TARGETS:
            return ("move", v - 1)
        return ("ability", v - 1 - MOVE_TARGETS)

    def city_production(self, slot: int) -> tuple[str, int] | None:
        return self.registry.prod_item(self.sub(f"city_prod_{slot}"))

    def city_focus(self, slot: int) -> int:
        return self.sub(f"city_focus_{slot}")

    def research_choice(self) -> int | None:
        v = self.sub("research")
        return v - 1 if v > 0 else None

    def policy_choice(self) -> int | None:
        v = self.sub("policy")
        return v - 1 if v > 0 else None

    def deal_verb(self, opp_slot: int) -> str:
        return DEAL_VERBS[self.sub(f"deal_{opp_slot}")]

    def cs_gift(self, k: int) -> int:
        return GIFT_AMOUNTS[self.sub(f"cs_gift_{k}")]

    def congress_candidate(self) -> int | None:
        v = self.sub("congress_vote")
        return v - 1 if v > 0 else None

    def is_all_pass(self) -> bool:
        return all(v == 0 for v in self.flat)


def all_pass_plan(registry: ActionSpaceRegistry) -> ActionPlan:
    return ActionPlan(registry, [0] * len(registry))


def decode_plan(registry: ActionSpaceRegistry, flat: list[int]) -> ActionPlan:
    return ActionPlan(registry, list(flat))


def encode_plan(plan: ActionPlan) -> list[int]:
    return list(plan.flat)


class ActionMaskSet:
    """One legality bitmask per sub-space (bit i == index i is legal)."""

    def __init__(self, registry: ActionSpaceRegistry, bits: list[int] | None = None) -> None:
        self.registry = registry
        self.bits = bits if bits is not None else [1] * len(registry)  # pass always legal

    def allow(self, space: int, index: int) -> None:
        self.bits[space] |= 1 << index

    def legal(self, space: int, index: int) -> bool:
        return 0 <= index < self.registry.sizes[space] and bool(self.bits[space] >> index & 1)

    def legal_indices(self, space: int) -> list[int]:
        b = self.bits[space]
        return [i for i in range(self.registry.sizes[space]) if b >> i & 1]

    def legal_count(self, space: int) -> int:
        return bin(self.bits[space]).count("1")

    def by_name(self, name: str) -> list[int]:
        return self.legal_indices(self.registry.index[name])

    def to_lists(self) -> list[list[int]]:
        """0/1 rows per sub-space; JSON-safe (no >53-bit integers)."""
        return [[(self.bits[k] >> i) & 1 for i in range(self.registry.sizes[k])]
                for k in range(len(self.registry))]

    @classmethod
    def from_lists(cls, registry: ActionSpaceRegistry, rows: list[list[int]]) -> "ActionMaskSet":
        if len(rows) != len(registry):
            raise ShapeMismatch("mask row count does not match registry")
        bits = []
        for k, row in enumerate(rows):
            if len(row) != registry.sizes[k]:
                raise ShapeMismatch(f"mask row {k} has wrong size")
            b = 0
            for i, v in enumerate(row):
                if v:
                    b |= 1 << i
            bits.append(b)
        return cls(registry, bits)


def sanitize_plan(raw, masks: ActionMaskSet) -> tuple[ActionPlan, list[int]]:
    """Replace every masked-out sub-action with that sub-space's pass index.

    Accepts a flat index vector or an ActionPlan; returns the executable
    plan plus its flat encoding (the `selected_actions` echo).
    """
    registry = masks.registry
    flat = list(raw.flat) if isinstance(raw, ActionPlan) else list(raw)
    if len(flat) != len(registry):
        raise ShapeMismatch(
            f"expected {len(registry)} sub-actions, got {len(flat)}")
    selected = [v if masks.legal(k, v) else 0 for k, v in enumerate(flat)]
    return ActionPlan(registry, selected), selected


def action_space_report(config: GameConfig, state: GameState | None = None,
                        masks: ActionMaskSet | None = None) -> dict:
    """Sub-space count, size histogram, and log10 of the joint size.

    With a state/mask pair the report also covers the currently legal
    action space (product of per-sub-space legal counts).
    """
    registry = ActionSpaceRegistry(config)
    sizes = registry.sizes
    hist: dict[int, int] = {}
    for s in sizes:
        hist[s] = hist.get(s, 0) + 1
    report = {
        "subspace_count": len(sizes),
        "size_min": min(sizes),
        "size_max": max(sizes),
        "size_histogram": dict(sorted(hist.items())),
        "log10_total": sum(math.log10(s) for s in sizes),
    }
    if masks is not None:
        legal = [masks.legal_count(k) for k in range(len(registry))]
        report["legal_min"] = min(legal)
        report["legal_log10_total"] = sum(math.log10(c) for c in legal)
    return report
