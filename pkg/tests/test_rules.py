import copy

import pytest

from terranova.rules import (
    ENGINEERING_PREREQ_CLOSURE, REQUIRED_TECHS, RuleTables,
    RuleValidationError, SHUTTLE_PART_IDS, load_default,
)


@pytest.fixture(scope="module")
def rules():
    return load_default()


def test_required_techs_present(rules):
    for name in REQUIRED_TECHS:
        assert name in rules.tech_idx


def test_engineering_closure_is_exactly_the_seven(rules):
    closure = {rules.techs[i].id
               for i in rules.tech_closure(rules.tech_idx["engineering"])}
    assert closure == ENGINEERING_PREREQ_CLOSURE


def test_tech_tree_is_a_dag_with_positive_costs(rules):
    for t in rules.techs:
        assert t.science_cost > 0
        for p in t.prereq_ids:
            assert p in rules.tech_idx
    # Era ordering sanity: a tech never requires a strictly later era.
    for t in rules.techs:
        for p in t.prereq_ids:
            assert rules.eras.index(rules.techs[rules.tech_idx[p]].era) <= \
                rules.eras.index(t.era)


def test_projects_are_apollo_plus_six_parts(rules):
    assert "apollo_program" in rules.project_idx
    parts = [p.id for p in rules.projects if p.shuttle_part]
    assert sorted(parts) == sorted(SHUTTLE_PART_IDS)
    boosters = [p for p in parts if "booster" in p]
    assert len(boosters) == 3
    assert any("engine" in p for p in parts)
    assert any("cockpit" in p for p in parts)
    assert any("stasis" in p for p in parts)
    for p in rules.projects:
        if p.shuttle_part:
            assert p.requires_apollo and p.requires_aluminum
            assert set(p.prereq_techs) == {"rocketry", "advanced_ballistics",
                                           "particle_physics", "satellites",
                                           "nanotechnology"}


def test_policy_trees_are_five_by_five(rules):
    assert len(rules.policy_trees) == 5
    for tree in rules.policy_trees:
        slots = {p.slot for p in rules.policies if p.tree == tree}
        assert slots == set(range(5))


def test_delegate_sources_exist(rules):
    wonder_delegates = sum(b.delegates for b in rules.buildings if b.world_wonder)
    policy_delegates = sum(p.effects.get("delegates", 0) for p in rules.policies)
    assert wonder_delegates >= 2
    assert policy_delegates >= 2


def test_resources_have_classes_and_regional_pool(rules):
    classes = {r.klass for r in rules.resources}
    assert classes == {"bonus", "strategic", "luxury"}
    regional = [r for r in rules.resources if r.regional]
    assert len(regional) >= 6
    assert all(r.klass == "luxury" for r in regional)
    assert rules.resources[rules.resource_idx["aluminum"]].klass == "strategic"


def test_validation_rejects_cycles_and_bad_refs(rules):
    doc = copy.deepcopy(rules.raw)
    doc["techs"][0]["prereq_ids"] = [doc["techs"][0]["id"]]
    with pytest.raises(RuleValidationError):
        RuleTables.from_json(doc)
    doc = copy.deepcopy(rules.raw)
    doc["techs"][3]["prereq_ids"] = ["no_such_tech"]
    with pytest.raises(RuleValidationError):
        RuleTables.from_json(doc)
    doc = copy.deepcopy(rules.raw)
    doc["techs"][5]["science_cost"] = 0
    with pytest.raises(RuleValidationError):
        RuleTables.from_json(doc)


def test_digest_changes_with_content(rules):
    doc = copy.deepcopy(rules.raw)
    doc["techs"][0]["science_cost"] += 1
    assert RuleTables.from_json(doc).digest() != rules.digest()
