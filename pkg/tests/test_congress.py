import pytest

from terranova import engine
from terranova.actions import ActionSpaceRegistry, all_pass_plan, decode_plan
from terranova.state import GameConfig

from conftest import make_flat_state, pass_steps


def trigger_congress(state) -> None:
    """Agent 0 meets everyone and owns the printing press."""
    rt = state.rules
    press = rt.tech_idx["printing_press"]
    e = state.empires[0]
    e.unlocked_techs |= 1 << press
    for other in range(1, 6):
        e.met_agents |= 1 << other
        state.empires[other].met_agents |= 1


def test_congress_founds_on_trigger_at_boundary(flat_state, registry):
    state = flat_state
    assert not state.congress.active
    trigger_congress(state)
    pass_steps(state, 6, registry)      # turn boundary runs
    assert state.congress.active
    assert state.congress.first_session_turn == 2   # the following turn
    # Once active, stays active.
    pass_steps(state, 6, registry)
    assert state.congress.active


def test_sessions_every_thirty_turns():
    state = make_flat_state()
    registry = ActionSpaceRegistry(state.config)
    trigger_congress(state)
    pass_steps(state, 6, registry)
    t0 = state.congress.first_session_turn
    session_turns = []
    guard = 0
    while len(session_turns) < 3 and guard < 70 * 6:
        before = state.congress.sessions_held
        pass_steps(state, 1, registry)
        guard += 1
        if state.congress.sessions_held > before:
            session_turns.append(state.congress.last_session_turn)
    assert session_turns == [t0, t0 + 30, t0 + 60]


def test_vote_mask_live_only_during_session_turn(flat_state, registry):
    state = flat_state
    trigger_congress(state)
    masks = engine.legal_action_masks(state, 0, registry)
    assert masks.by_name("congress_vote") == [0]    # not yet founded
    pass_steps(state, 6, registry)
    masks = engine.legal_action_masks(state, 0, registry)
    assert len(masks.by_name("congress_vote")) == 7   # session turn: all six + abstain
    pass_steps(state, 6, registry)                    # past the session turn
    masks = engine.legal_action_masks(state, 0, registry)
    assert masks.by_name("congress_vote") == [0]


def test_votes_cast_through_plans_are_tallied(flat_state, registry):
    state = flat_state
    trigger_congress(state)
    pass_steps(state, 6, registry)
    # Every agent votes for agent 3 during the session turn.
    for _ in range(6):
        agent = state.active_agent
        flat = [0] * len(registry)
        flat[registry.index["congress_vote"]] = 1 + 3
        engine.advance_state_inplace(state, agent, decode_plan(registry, flat))
    assert state.congress.sessions_held == 1
    assert state.congress.last_votes[3] == 6        # six base delegates
    assert state.congress.last_winner == -1         # below the 12-vote bar


def test_delegate_count_sources(flat_state):
    state = flat_state
    rt = state.rules
    e = state.empires[0]
    assert engine.delegate_count(state, 0) == 1     # base delegate
    e.policies |= 1 << rt.policy_idx["consulates"]          # +1
    e.policies |= 1 << rt.policy_idx["merchant_confederacy"]  # +2
    assert engine.delegate_count(state, 0) == 4
    # A wonder with delegate grants, via a real city.
    from test_engine_core import found_first_city
    found_first_city(state, ActionSpaceRegistry(state.config), agent=0)
    city = next(c for c in state.cities.values() if c.owner == 0)
    city.buildings |= 1 << rt.building_idx["forbidden_palace"]   # +2
    assert engine.delegate_count(state, 0) == 6
    # One allied city-state: strictly highest influence >= 60.
    e.cs_influence[0] = 60
    assert engine.delegate_count(state, 0) == 7


def test_city_state_ally_requires_strict_lead(flat_state):
    state = flat_state
    state.empires[0].cs_influence[0] = 60
    state.empires[1].cs_influence[0] = 60
    assert engine.city_state_allies(state)[0] == -1   # tie: nobody
    state.empires[0].cs_influence[0] = 61
    assert engine.city_state_allies(state)[0] == 0
    state.empires[0].cs_influence[0] = 59
    state.empires[1].cs_influence[0] = 40
    assert engine.city_state_allies(state)[0] == -1   # below threshold


def test_convene_errors_when_not_due(flat_state):
    with pytest.raises(engine.CongressInactive):
        engine.convene_world_congress(flat_state)
    flat_state.congress.active = True
    flat_state.congress.first_session_turn = flat_state.turn + 7
    with pytest.raises(engine.NotDue):
        engine.convene_world_congress(flat_state)


def test_config_constants_default_to_paper_values():
    config = GameConfig()
    assert config.congress_interval_turns == 30
    assert config.diplo_votes_to_win == 12
    assert config.num_agents == 6
