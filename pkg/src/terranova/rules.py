"""Rule tables: tech tree, units, buildings, policies, resources, projects.

Content ships as a versioned JSON document (`data/rules.v1.json`). The
engine works with integer indices into these tables; string ids appear at
serialization and UI boundaries. `RuleTables.validate()` enforces the
structural contracts the engine relies on (acyclic tech tree, mandatory
named entries, the space-program project set).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

TERRAINS = ["ocean", "coast", "grassland", "plains", "desert", "tundra", "snow"]
ELEVATIONS = ["flat", "hill", "mountain"]
FEATURES = ["forest", "jungle", "marsh", "oasis", "flood_plains"]
YIELD_KEYS = ["food", "production", "gold", "science", "culture", "tourism"]

# Named techs every rule set must contain.
REQUIRED_TECHS = [
    "archery", "animal_husbandry", "the_wheel", "mathematics", "mining",
    "masonry", "construction", "engineering", "printing_press", "rocketry",
    "advanced_ballistics", "particle_physics", "satellites", "nanotechnology",
]
ENGINEERING_PREREQ_CLOSURE = {
    "archery", "animal_husbandry", "the_wheel", "mathematics",
    "mining", "masonry", "construction",
}
SHUTTLE_PART_IDS = [
    "shuttle_booster_1", "shuttle_booster_2", "shuttle_booster_3",
    "shuttle_engine", "shuttle_cockpit", "shuttle_stasis_chamber",
]


class RuleValidationError(ValueError):
    pass


@dataclass(frozen=True)
class TechDef:
    id: str
    era: str
    science_cost: int
    prereq_ids: tuple[str, ...]


@dataclass(frozen=True)
class UnitDef:
    id: str
    combat_strength: int
    ranged_strength: int
    attack_range: int
    moves: int
    production_cost: int
    prereq_tech: str | None
    civilian: bool


@dataclass(frozen=True)
class BuildingDef:
    id: str
    production_cost: int
    prereq_tech: str | None
    yields: tuple[int, ...]          # order follows YIELD_KEYS
    delegates: int
    defense: int
    world_wonder: bool


@dataclass(frozen=True)
class PolicyDef:
    id: str
    tree: str
    slot: int
    effects: dict[str, int]          # gold/science/culture/tourism/delegates


@dataclass(frozen=True)
class ResourceDef:
    id: str
    klass: str                       # bonus | strategic | luxury
    regional: bool
    terrains: tuple[str, ...]
    elevations: tuple[str, ...]
    features: tuple[str | None, ...]
    yields: tuple[int, ...]
    improvement: str | None


@dataclass(frozen=True)
class ImprovementDef:
    id: str
    prereq_tech: str | None
    yields: tuple[int, ...]
    generic: dict | None             # tile rule when no resource drives it


@dataclass(frozen=True)
class ProjectDef:
    id: str
    production_cost: int
    prereq_techs: tuple[str, ...]
    shuttle_part: bool
    requires_apollo: bool
    requires_aluminum: bool


def _yields_tuple(d: dict) -> tuple[int, ...]:
    return tuple(int(d.get(k, 0)) for k in YIELD_KEYS)


@dataclass
class RuleTables:
    version: str
    eras: list[str]
    techs: list[TechDef]
    units: list[UnitDef]
    buildings: list[BuildingDef]
    policies: list[PolicyDef]
    resources: list[ResourceDef]
    improvements: list[ImprovementDef]
    projects: list[ProjectDef]
    raw: dict = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        self.tech_idx = {t.id: i for i, t in enumerate(self.techs)}
        self.unit_idx = {u.id: i for i, u in enumerate(self.units)}
        self.building_idx = {b.id: i for i, b in enumerate(self.buildings)}
        self.policy_idx = {p.id: i for i, p in enumerate(self.policies)}
        self.resource_idx = {r.id: i for i, r in enumerate(self.resources)}
        self.improvement_idx = {m.id: i for i, m in enumerate(self.improvements)}
        self.project_idx = {p.id: i for i, p in enumerate(self.projects)}
        self.policy_trees = sorted({p.tree for p in self.policies})
        self._closure_cache: dict[int, frozenset[int]] = {}

    @classmethod
    def from_json(cls, doc: dict) -> "RuleTables":
        techs = [TechDef(t["id"], t["era"], t["science_cost"], tuple(t["prereq_ids"]))
                 for t in doc["techs"]]
        units = [UnitDef(u["id"], u["combat_strength"], u["ranged_strength"],
                         u["attack_range"], u["moves"], u["production_cost"],
                         u["prereq_tech"], u["civilian"]) for u in doc["units"]]
        buildings = [BuildingDef(b["id"], b["production_cost"], b["prereq_tech"],
                                 _yields_tuple(b["yields"]), b["delegates"],
                                 b["defense"], b["world_wonder"]) for b in doc["buildings"]]
        policies = [PolicyDef(p["id"], p["tree"], p["slot"], dict(p["effects"]))
                    for p in doc["policies"]]
        resources = [ResourceDef(r["id"], r["klass"], r["regional"], tuple(r["terrains"]),
                                 tuple(r["elevations"]), tuple(r["features"]),
                                 _yields_tuple(r["yields"]), r["improvement"])
                     for r in doc["resources"]]
        improvements = [ImprovementDef(m["id"], m["prereq_tech"],
                                       _yields_tuple(m["yields"]), m["generic"])
                        for m in doc["improvements"]]
        projects = [ProjectDef(p["id"], p["production_cost"], tuple(p["prereq_techs"]),
                               p["shuttle_part"], p["requires_apollo"],
                               p["requires_aluminum"]) for p in doc["projects"]]
        rt = cls(doc["version"], list(doc["eras"]), techs, units, buildings,
                 policies, resources, improvements, projects, raw=doc)
        rt.validate()
        return rt

    def validate(self) -> None:
        for t in self.techs:
            if t.science_cost <= 0:
                raise RuleValidationError(f"tech {t.id}: cost must be positive")
            for p in t.prereq_ids:
                if p not in self.tech_idx:
                    raise RuleValidationError(f"tech {t.id}: unknown prereq {p}")
            if t.era not in self.eras:
                raise RuleValidationError(f"tech {t.id}: unknown era {t.era}")
        self._check_acyclic()
        for name in REQUIRED_TECHS:
            if name not in self.tech_idx:
                raise RuleValidationError(f"required tech missing: {name}")
        closure = {self.techs[i].id for i in self.tech_closure(self.tech_idx["engineering"])}
        if closure != ENGINEERING_PREREQ_CLOSURE:
            raise RuleValidationError(f"engineering prereq closure is {sorted(closure)}")
        if "apollo_program" not in self.project_idx:
            raise RuleValidationError("apollo_program project missing")
        parts = [p.id for p in self.projects if p.shuttle_part]
        if sorted(parts) != sorted(SHUTTLE_PART_IDS):
            raise RuleValidationError(f"shuttle parts must be exactly {SHUTTLE_PART_IDS}, got {parts}")
        for coll, what in ((self.units, "unit"), (self.buildings, "building")):
            for item in coll:
                if item.production_cost <= 0:
                    raise RuleValidationError(f"{what} {item.id}: cost must be positive")
                if item.prereq_tech is not None and item.prereq_tech not in self.tech_idx:
                    raise RuleValidationError(f"{what} {item.id}: unknown tech {item.prereq_tech}")
        trees: dict[str, set[int]] = {}
        for p in self.policies:
            trees.setdefault(p.tree, set()).add(p.slot)
        for tree, slots in trees.items():
            if slots != set(range(5)):
                raise RuleValidationError(f"policy tree {tree} must have slots 0..4")
        if len(trees) != 5:
            raise RuleValidationError("expected exactly 5 policy trees")
        if "aluminum" not in self.resource_idx:
            raise RuleValidationError("aluminum resource missing")

    def _check_acyclic(self) -> None:
        state: dict[str, int] = {}

        def visit(tid: str, trail: list[str]) -> None:
            st = state.get(tid, 0)
            if st == 1:
                raise RuleValidationError(f"tech cycle: {' -> '.join(trail + [tid])}")
            if st == 2:
                return
            state[tid] = 1
            for p in self.techs[self.tech_idx[tid]].prereq_ids:
                visit(p, trail + [tid])
            state[tid] = 2

        for t in self.techs:
            visit(t.id, [])

    def tech_closure(self, tech: int) -> frozenset[int]:
        """Transitive prerequisite closure of a tech (excluding itself)."""
        cached = self._closure_cache.get(tech)
        if cached is not None:
            return cached
        out: set[int] = set()
        stack = [self.tech_idx[p] for p in self.techs[tech].prereq_ids]
        while stack:
            x = stack.pop()
            if x not in out:
                out.add(x)
                stack.extend(self.tech_idx[p] for p in self.techs[x].prereq_ids)
        result = frozenset(out)
        self._closure_cache[tech] = result
        return result

    def era_index(self, tech: int) -> int:
        return self.eras.index(self.techs[tech].era)

    def digest(self) -> str:
        """Stable content hash; replays refuse to load under different rules."""
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


_DEFAULT: RuleTables | None = None


def load_default() -> RuleTables:
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("terranova").joinpath("data/rules.v1.json").read_text()
        _DEFAULT = RuleTables.from_json(json.loads(text))
    return _DEFAULT


def load_file(path: str) -> RuleTables:
    with open(path) as f:
        return RuleTables.from_json(json.load(f))
