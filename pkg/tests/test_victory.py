import pytest

from terranova import engine
from terranova.actions import ActionSpaceRegistry, all_pass_plan
from terranova.state import TerminalState

from conftest import make_flat_state, pass_steps


def found_all_capitals(state, registry):
    from test_engine_core import found_first_city
    for agent in range(6):
        found_first_city(state, registry, agent=agent)
    assert state.turn == 2 and state.active_agent == 0
    return state


def brute_force_culture_winner(state):
    """Independent oracle: direct per-pair comparison over all opponents."""
    winners = []
    for i in range(6):
        if state.empires[i].eliminated:
            continue
        beats_all = all(
            state.empires[i].tourism_accumulated_vs[j] >
            state.empires[j].culture_lifetime
            for j in range(6) if j != i)
        if beats_all:
            winners.append(i)
    return winners


def test_fresh_state_has_no_victory(flat_state):
    v = engine.check_victory(flat_state)
    assert v.kind == "none"
    assert v.winner == -1
    assert not v.terminal


def test_science_victory_apollo_plus_all_parts(flat_state):
    e = flat_state.empires[0]
    e.apollo_built = True
    e.shuttle_parts_built = 0b111111
    v = engine.check_victory(flat_state)
    assert v.kind == "science"
    assert v.winner == 0
    e.shuttle_parts_built = 0b011111     # one part missing
    v = engine.check_victory(flat_state)
    assert v.kind == "none"


def test_science_victory_through_production_pipeline():
    # The last shuttle part completes through the normal city pipeline and
    # the engine stamps the victory on that same step.
    state = make_flat_state()
    registry = ActionSpaceRegistry(state.config)
    from test_engine_core import found_first_city
    found_first_city(state, registry, agent=0)
    pass_steps(state, 5, registry)
    rt = state.rules
    e = state.empires[0]
    for name in ("rocketry", "advanced_ballistics", "particle_physics",
                 "satellites", "nanotechnology"):
        tech = rt.tech_idx[name]
        e.unlocked_techs |= 1 << tech
        for p in rt.tech_closure(tech):
            e.unlocked_techs |= 1 << p
    e.apollo_built = True
    e.shuttle_parts_built = 0b011111      # stasis chamber still missing
    city = next(c for c in state.cities.values() if c.owner == 0)
    part = rt.project_idx["shuttle_stasis_chamber"]
    city.production_item = ("project", part)
    cost = rt.projects[part].production_cost
    city.production_progress[("project", part)] = cost - 1
    # Part completion re-checks the aluminum link, so wire up a real
    # improved aluminum tile inside the city's borders.
    alu_tile = city.border_tiles[0]
    state.map.resource[alu_tile] = rt.resource_idx["aluminum"]
    state.map.improvement[alu_tile] = rt.improvement_idx["mine"]
    engine.refresh_connected_resources(state, 0)
    assert engine.connected_count(state, 0, "aluminum") == 1
    events = engine.advance_state_inplace(state, 0, all_pass_plan(registry))
    assert any(ev.kind == "shuttle_part_built" for ev in events)
    assert state.victory.kind == "science"
    assert state.victory.winner == 0
    assert any(ev.kind == "victory" for ev in events)


def test_domination_requires_holding_own_and_sacking_all_founded(flat_state, registry):
    state = found_all_capitals(flat_state, registry)
    caps = {a: state.empires[a].original_capital_id for a in range(6)}
    # Hand every foreign original capital to agent 0.
    for a in range(1, 6):
        state.cities[caps[a]].owner = 0
    v = engine.check_victory(state)
    assert v.kind == "domination"
    assert v.winner == 0
    # If agent 0 loses its own original capital, nobody dominates.
    state.cities[caps[0]].owner = 3
    v = engine.check_victory(state)
    assert v.kind != "domination"


def test_domination_capitals_sacked_by_different_agents(flat_state, registry):
    state = found_all_capitals(flat_state, registry)
    caps = {a: state.empires[a].original_capital_id for a in range(6)}
    # Capitals fall to a mix of captors; agent 2 keeps its own.
    state.cities[caps[0]].owner = 1
    state.cities[caps[1]].owner = 2
    state.cities[caps[3]].owner = 4
    state.cities[caps[4]].owner = 2
    state.cities[caps[5]].owner = 0
    v = engine.check_victory(state)
    assert v.kind == "domination"
    assert v.winner == 2


def test_culture_victory_strict_per_pair_inequality(flat_state):
    state = flat_state
    for j in range(6):
        state.empires[j].culture_lifetime = 40 + j
    winner = 1
    for j in range(6):
        if j != winner:
            state.empires[winner].tourism_accumulated_vs[j] = \
                state.empires[j].culture_lifetime + 1
    assert brute_force_culture_winner(state) == [winner]
    v = engine.check_victory(state)
    assert v.kind == "culture" and v.winner == winner
    # Dropping one pair by 2 breaks the strict inequality.
    state.empires[winner].tourism_accumulated_vs[4] -= 2
    assert brute_force_culture_winner(state) == []
    assert engine.check_victory(state).kind == "none"


def test_diplomatic_victory_on_twelve_votes(flat_state):
    state = flat_state
    cg = state.congress
    cg.active = True
    cg.first_session_turn = state.turn
    cg.pending_votes = [2, 2, 2, 2, 2, 2]
    for a in range(6):
        state.empires[a].delegates = 0
    # Give each agent 2 delegates via direct tally: base 1 + 1 consulates.
    consulates = state.rules.policy_idx["consulates"]
    for a in range(6):
        state.empires[a].policies |= 1 << consulates
    engine.convene_world_congress(state)
    assert cg.last_votes[2] == 12
    assert cg.last_winner == 2
    v = engine.check_victory(state)
    assert v.kind == "diplomatic" and v.winner == 2


def test_below_threshold_no_winner(flat_state):
    state = flat_state
    cg = state.congress
    cg.active = True
    cg.first_session_turn = state.turn
    cg.pending_votes = [0, 0, -1, -1, -1, 1]
    engine.convene_world_congress(state)
    assert cg.last_votes[0] == 2 and cg.last_votes[1] == 1
    assert cg.last_winner == -1
    assert engine.check_victory(state).kind == "none"


def test_priority_domination_over_science(flat_state, registry):
    state = found_all_capitals(flat_state, registry)
    caps = {a: state.empires[a].original_capital_id for a in range(6)}
    for a in range(1, 6):
        state.cities[caps[a]].owner = 0
    state.empires[3].apollo_built = True
    state.empires[3].shuttle_parts_built = 0b111111
    v = engine.check_victory(state)
    assert v.kind == "domination" and v.winner == 0


def test_victory_is_terminal_and_exclusive(flat_state, registry):
    state = flat_state
    state.empires[4].apollo_built = True
    state.empires[4].shuttle_parts_built = 0b111111
    engine.advance_state_inplace(state, 0, all_pass_plan(registry))
    assert state.victory.kind == "science" and state.victory.winner == 4
    with pytest.raises(TerminalState):
        engine.advance_state_inplace(state, state.active_agent,
                                     all_pass_plan(registry))
    masks = engine.legal_action_masks(state, state.active_agent, registry)
    assert all(masks.legal_indices(k) == [0] for k in range(len(registry)))


def test_turn_limit_terminates_without_winner():
    state = make_flat_state(config=None)
    state.config.max_game_turns = 2
    registry = ActionSpaceRegistry(state.config)
    pass_steps(state, 12, registry)       # completes turns 1 and 2
    assert state.turn == 3
    assert state.victory.kind == "none"
    assert state.victory.turn_limit_reached
    with pytest.raises(TerminalState):
        engine.advance_state_inplace(state, state.active_agent,
                                     all_pass_plan(registry))
