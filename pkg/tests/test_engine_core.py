import pytest

from terranova import engine
from terranova.actions import (
    ActionSpaceRegistry, MOVE_TARGETS, all_pass_plan, decode_plan,
)
from terranova.serialize import state_digest
from terranova.state import (
    FLAT, FOREST, GameConfig, GRASSLAND, TerminalState, UnsanitizedPlan,
    WrongAgent,
)

from conftest import (
    FIXTURE_STARTS, build_flat_map, make_flat_state, pass_steps, random_rollout,
)


def plan_with(registry, **subs):
    flat = [0] * len(registry)
    for name, idx in subs.items():
        flat[registry.index[name]] = idx
    return decode_plan(registry, flat)


def settler_slot(state, agent=0):
    e = state.empires[agent]
    settler = state.rules.unit_idx["settler"]
    for slot, uid in enumerate(e.unit_slot_ids):
        if uid >= 0 and state.units[uid].kind == settler:
            return slot
    raise AssertionError("no settler")


# --- turn structure -----------------------------------------------------


def test_all_pass_step_is_identity_like(flat_state, registry):
    positions = {u.id: u.position for u in flat_state.units.values()}
    research = [e.current_tech for e in flat_state.empires]
    nxt, events = engine.advance_state(flat_state, 0, all_pass_plan(registry))
    assert nxt.step_index == flat_state.step_index + 1
    assert nxt.active_agent == 1
    assert {u.id: u.position for u in nxt.units.values()} == positions
    assert [e.current_tech for e in nxt.empires] == research
    # advance_state is pure: the input state is untouched.
    assert flat_state.step_index == 0


def test_six_passes_advance_one_turn(flat_state, registry):
    pass_steps(flat_state, 6, registry)
    assert flat_state.turn == 2
    assert flat_state.step_index == 6
    assert flat_state.active_agent == 0


def test_turn_structure_invariant_over_random_play(flat_state, registry):
    for _ in range(120):
        if flat_state.victory.terminal:
            break
        assert flat_state.turn == 1 + flat_state.step_index // 6
        assert flat_state.active_agent == flat_state.step_index % 6
        random_rollout(flat_state, 1, seed=flat_state.step_index, registry=registry)


def test_wrong_agent_rejected(flat_state, registry):
    with pytest.raises(WrongAgent):
        engine.advance_state(flat_state, 3, all_pass_plan(registry))


def test_unsanitized_plan_rejected(flat_state, registry):
    plan = plan_with(registry, research=1 + flat_state.rules.tech_idx["engineering"])
    with pytest.raises(UnsanitizedPlan):
        engine.advance_state(flat_state, 0, plan)


def test_determinism_bit_identical_replays(registry):
    a = random_rollout(make_flat_state(), 90, seed=77)
    b = random_rollout(make_flat_state(), 90, seed=77)
    assert state_digest(a) == state_digest(b)


# --- founding and cities --------------------------------------------------


def found_first_city(state, registry, agent=0):
    slot = settler_slot(state, agent)
    plan = plan_with(registry, **{f"unit_{slot}": 1 + MOVE_TARGETS + 0})
    events = engine.advance_state_inplace(state, agent, plan)
    return events


def test_settler_founds_capital(flat_state, registry):
    events = found_first_city(flat_state, registry)
    kinds = [e.kind for e in events]
    assert "city_founded" in kinds
    cities = [c for c in flat_state.cities.values() if c.owner == 0]
    assert len(cities) == 1
    city = cities[0]
    assert city.population == 1
    assert city.is_capital
    assert city.position == FIXTURE_STARTS[0]
    assert flat_state.empires[0].original_capital_id == city.id
    settler = flat_state.rules.unit_idx["settler"]
    assert not any(u.kind == settler and u.owner == 0
                   for u in flat_state.units.values())


def test_growth_threshold_formula():
    # threshold(pop) = 15 + 8*(pop-1) + floor((pop-1)^1.5)
    assert engine.growth_threshold(1) == 15
    assert engine.growth_threshold(2) == 15 + 8 + 1
    assert engine.growth_threshold(3) == 15 + 16 + 2
    assert engine.growth_threshold(5) == 15 + 32 + 8


def test_city_grows_at_threshold(flat_state, registry):
    found_first_city(flat_state, registry)
    city = next(c for c in flat_state.cities.values() if c.owner == 0)
    # Capital on flat grassland: center 2 food + one worked grassland tile
    # 2 food - 2 consumption = +2 surplus per own step.
    for _ in range(8 * 6):
        if flat_state.victory.terminal:
            break
        pass_steps(flat_state, 1, registry)
    assert city.population >= 2


def test_empty_queue_accumulates_capped_overflow(flat_state, registry):
    found_first_city(flat_state, registry)
    city = next(c for c in flat_state.cities.values() if c.owner == 0)
    for _ in range(80):
        pass_steps(flat_state, 6, registry)
        if flat_state.victory.terminal:
            break
    assert city.production_item is None
    assert 0 < city.production_overflow <= engine.OVERFLOW_CAP


def test_worked_tiles_within_borders_and_population(flat_state, registry):
    found_first_city(flat_state, registry)
    state = random_rollout(flat_state, 120, seed=3, registry=registry)
    for c in state.cities.values():
        if c.owner >= 6:
            continue
        assert len(c.worked_tiles) <= c.population
        border = set(c.border_tiles)
        for t in c.worked_tiles:
            assert t in border
            assert state.map.grid.distance(c.position, t) <= 3


def test_wonder_race_refund(registry):
    state = make_flat_state()
    monument_like = state.rules.building_idx["pyramids"]
    found_first_city(state, registry, agent=0)      # step 0
    found_first_city(state, registry, agent=1)      # step 1
    pass_steps(state, 4, registry)                  # finish the turn; agent 0 next
    c0 = next(c for c in state.cities.values() if c.owner == 0)
    c1 = next(c for c in state.cities.values() if c.owner == 1)
    for c in (c0, c1):
        state.empires[c.owner].unlocked_techs |= \
            1 << state.rules.tech_idx["masonry"]
    # Agent 0 is about to finish; agent 1 has partial investment.
    c0.production_item = ("building", monument_like)
    c0.production_progress[("building", monument_like)] = 184
    c1.production_item = ("building", monument_like)
    c1.production_progress[("building", monument_like)] = 100
    events0 = engine.advance_state_inplace(state, 0, all_pass_plan(registry))
    assert any(e.kind == "wonder_built" for e in events0)
    events1 = engine.advance_state_inplace(state, 1, all_pass_plan(registry))
    lost = [e for e in events1 if e.kind == "wonder_lost"]
    assert len(lost) == 1
    assert lost[0].data["refund"] == 100 * engine.WONDER_REFUND_NUM // engine.WONDER_REFUND_DEN
    assert c1.production_item is None
    assert c1.production_overflow >= lost[0].data["refund"]


# --- masks ----------------------------------------------------------------


def test_turn_one_settler_mask_open_terrain(flat_state, registry):
    masks = engine.legal_action_masks(flat_state, 0, registry)
    slot = settler_slot(flat_state)
    legal = set(masks.by_name(f"unit_{slot}"))
    # Flat grassland, 2 moves: every tile within distance 2 is reachable.
    disc = flat_state.map.grid.disc_slots(FIXTURE_STARTS[0], 3)
    expected_moves = set()
    for di, tile in enumerate(disc):
        if di == 0 or tile < 0:
            continue
        if flat_state.map.grid.distance(FIXTURE_STARTS[0], tile) <= 2:
            expected_moves.add(1 + di)
    assert legal == {0, 1 + MOVE_TARGETS} | expected_moves
    assert len(expected_moves) == 18


def test_turn_one_settler_mask_forest_ring():
    # Spawn ringed by forest: each neighbor costs 2, so exactly the six
    # neighbors are reachable and the second ring is not.
    start = FIXTURE_STARTS[0]
    grid = build_flat_map().grid
    overrides = {nb: (GRASSLAND, FLAT, FOREST) for nb in grid.neighbors_of(start)}
    state = make_flat_state(overrides=overrides)
    registry = ActionSpaceRegistry(state.config)
    masks = engine.legal_action_masks(state, 0, registry)
    slot = settler_slot(state)
    legal = set(masks.by_name(f"unit_{slot}"))
    moves = {i for i in legal if 1 <= i <= MOVE_TARGETS}
    assert len(moves) == 6
    assert 1 + MOVE_TARGETS in legal      # found_city on the spawn tile
    assert 0 in legal


def test_turn_one_warrior_mask(flat_state, registry):
    masks = engine.legal_action_masks(flat_state, 0, registry)
    warrior = flat_state.rules.unit_idx["warrior"]
    slot = next(s for s, uid in enumerate(flat_state.empires[0].unit_slot_ids)
                if uid >= 0 and flat_state.units[uid].kind == warrior)
    legal = set(masks.by_name(f"unit_{slot}"))
    assert 0 in legal
    assert 1 + MOVE_TARGETS + 2 in legal          # fortify
    assert 1 + MOVE_TARGETS not in legal          # no found_city
    assert 1 + MOVE_TARGETS + 1 not in legal      # no improve
    assert len([i for i in legal if 1 <= i <= MOVE_TARGETS]) == 18


def test_turn_one_research_mask_is_prereq_satisfied_set(flat_state, registry):
    masks = engine.legal_action_masks(flat_state, 0, registry)
    rt = flat_state.rules
    legal = set(masks.by_name("research"))
    roots = {1 + i for i, t in enumerate(rt.techs) if not t.prereq_ids}
    assert legal == {0} | roots


def test_research_mask_never_offers_engineering_early(flat_state, registry):
    rt = flat_state.rules
    eng = rt.tech_idx["engineering"]
    e = flat_state.empires[0]
    # Unlock six of the seven prerequisites; engineering must stay masked.
    seven = sorted(rt.tech_closure(eng))
    for t in seven[:-1]:
        e.unlocked_techs |= 1 << t
    masks = engine.legal_action_masks(flat_state, 0, registry)
    assert 1 + eng not in masks.by_name("research")
    e.unlocked_techs |= 1 << seven[-1]
    masks = engine.legal_action_masks(flat_state, 0, registry)
    assert 1 + eng in masks.by_name("research")


def test_terminal_masks_collapse_to_pass_only(flat_state, registry):
    flat_state.victory.kind = "science"
    flat_state.victory.winner = 2
    flat_state.victory.turn_decided = flat_state.turn
    masks = engine.legal_action_masks(flat_state, 0, registry)
    for k in range(len(registry)):
        assert masks.legal_indices(k) == [0]
    with pytest.raises(TerminalState):
        engine.advance_state(flat_state, 0, all_pass_plan(registry))


# --- research -------------------------------------------------------------


def test_research_progress_and_unlock(flat_state, registry):
    rt = flat_state.rules
    agri = rt.tech_idx["agriculture"]     # cost 20
    found_first_city(flat_state, registry)
    pass_steps(flat_state, 5, registry)
    plan = plan_with(registry, research=1 + agri)
    engine.advance_state_inplace(flat_state, 0, plan)
    e = flat_state.empires[0]
    assert e.current_tech == agri
    assert e.science_progress[agri] > 0
    guard = 0
    while not e.has_tech(agri) and guard < 200:
        pass_steps(flat_state, 6, registry)
        guard += 1
    assert e.has_tech(agri)
    assert e.current_tech == -1
    assert e.science_progress[agri] == rt.techs[agri].science_cost


def test_tech_closure_invariant_over_random_play(flat_state, registry):
    state = random_rollout(flat_state, 240, seed=13, registry=registry)
    rt = state.rules
    for e in state.empires:
        for t in range(len(rt.techs)):
            if e.has_tech(t):
                for p in rt.tech_closure(t):
                    assert e.has_tech(p), \
                        f"agent {e.agent} has {rt.techs[t].id} without {rt.techs[p].id}"


# --- conservation ---------------------------------------------------------


def test_gold_never_negative_and_tiles_partition(flat_state, registry):
    state = flat_state
    for burst in range(8):
        state = random_rollout(state, 30, seed=burst, registry=registry)
        for e in state.empires:
            assert e.gold >= 0
        owned = 0
        for owner_code in range(12):
            owned += int((state.map.owner == owner_code).sum())
        unowned = int((state.map.owner == -1).sum())
        assert owned + unowned == state.map.n_tiles
        if state.victory.terminal:
            break
