"""Acceptance suite: one test per release criterion, exact tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion. Paper-scale magnitudes (10k-map corpora, the full action-space
size) are out of scope by design; these checks pin the structural
properties and the small rule constants instead.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from terranova import engine, mapgen, replay as replay_mod, runtime, visibility
from terranova.actions import (
    ActionSpaceRegistry, action_space_report, all_pass_plan, decode_plan,
    sanitize_plan,
)
from terranova.observation import (
    DYNAMIC_LAYERS, ObservationRegistry, STATIC_LAYERS, UNKNOWN,
    build_observation,
)
from terranova.policies import make_policy
from terranova.rng import RandomStream
from terranova.rules import load_default
from terranova.serialize import state_digest
from terranova.state import GameConfig

from conftest import make_flat_state, pass_steps


def report(name: str, detail: str = "") -> None:
    print(f"\nACCEPTANCE PASS: {name}" + (f" ({detail})" if detail else ""))


def small_config(**kw) -> GameConfig:
    return GameConfig(map_width=30, map_height=20, num_city_states=2, **kw)


@pytest.fixture(scope="module")
def corpus_state():
    config = small_config()
    return mapgen.new_game(mapgen.generate_map(7, config), config, 7)


# -------------------------------------------------------------------------
# Criterion 1: turn structure over 1000 random-policy steps.


def test_acceptance_turn_structure(corpus_state):
    state = corpus_state.clone()
    registry = ActionSpaceRegistry(state.config)
    stream = RandomStream.from_seed(1, "acc1")
    for step in range(1000):
        assert state.turn == 1 + state.step_index // 6
        assert state.active_agent == state.step_index % 6
        masks = engine.legal_action_masks(state, state.active_agent, registry)
        raw = [stream.randrange(s) for s in registry.sizes]
        plan, _ = sanitize_plan(raw, masks)
        engine.advance_state_inplace(state, state.active_agent, plan, masks)
        if state.victory.terminal:
            break
    report("turn structure", f"{state.step_index} steps, turn {state.turn}")


# -------------------------------------------------------------------------
# Criterion 2: determinism across serial/serial/worker-pool(8),
# 64 games x 100 turns.


def test_acceptance_determinism_serial_vs_pool():
    t0 = time.time()
    config = small_config()
    templates = []
    for i in range(64):
        game_map = mapgen.generate_map(5000 + i, config)
        templates.append(mapgen.new_game(game_map, config, 5000 + i))
    digests = {}
    for label, strategy in (("serial_a", "serial"), ("serial_b", "serial"),
                            ("pool", "worker-pool(8)")):
        states = [t.clone() for t in templates]
        handle, _obs = runtime.build_simulator(states, strategy, seed=99)
        try:
            runtime.run_selfplay_batch(handle, make_policy("random", 42),
                                       num_steps=100)
            digests[label] = handle.digests()
        finally:
            handle.close()
    assert digests["serial_a"] == digests["serial_b"]
    assert digests["serial_a"] == digests["pool"]
    report("determinism", f"64 games x 100 turns x 3 runs in {time.time()-t0:.0f}s, "
           f"{len(set(digests['serial_a']))} distinct trajectories")


# -------------------------------------------------------------------------
# Criterion 3: all four victory conditions through the engine.


def _founded_world():
    state = make_flat_state()
    registry = ActionSpaceRegistry(state.config)
    from test_engine_core import found_first_city
    for agent in range(6):
        found_first_city(state, registry, agent=agent)
    return state, registry


def test_acceptance_victory_science():
    from test_victory import test_science_victory_through_production_pipeline
    test_science_victory_through_production_pipeline()
    report("science victory",
           "Apollo + 6 parts, 5 named techs, aluminum link enforced")


def test_acceptance_victory_domination():
    state, registry = _founded_world()
    caps = {a: state.empires[a].original_capital_id for a in range(6)}
    for a in range(2, 6):
        state.cities[caps[a]].owner = 0     # multiple captors over the game
    # The last foreign original capital falls through real combat.
    target = state.cities[caps[1]]
    target.hp = 20
    from test_combat import declare_war, place_unit
    attacker = place_unit(state, 0, "rifleman", target.position - 1)
    declare_war(state, 0, 1)
    slot = state.empires[0].unit_slot_ids.index(attacker.id)
    disc = state.map.grid.disc_slots(attacker.position, 3)
    move_idx = 1 + disc.index(target.position)
    flat = [0] * len(registry)
    flat[registry.index[f"unit_{slot}"]] = move_idx
    events = engine.advance_state_inplace(state, 0, decode_plan(registry, flat))
    assert any(e.kind == "city_captured" for e in events)
    assert state.victory.kind == "domination"
    assert state.victory.winner == 0
    report("domination victory", "all foreign original capitals sacked")


def test_acceptance_victory_culture():
    state, registry = _founded_world()
    from test_victory import brute_force_culture_winner
    winner = 4
    for j in range(6):
        state.empires[j].culture_lifetime = 30 + j
        if j != winner:
            state.empires[winner].tourism_accumulated_vs[j] = 31 + j
    assert brute_force_culture_winner(state) == [winner]
    engine.advance_state_inplace(state, 0, all_pass_plan(registry))
    assert state.victory.kind == "culture"
    assert state.victory.winner == winner
    report("culture victory", "strict per-pair inequality, brute-force verified")


def test_acceptance_victory_diplomatic():
    state, registry = _founded_world()
    config = state.config
    assert config.congress_interval_turns == 30
    assert config.diplo_votes_to_win == 12
    rt = state.rules
    # Trigger: one agent has met everyone and owns the Printing Press.
    press = rt.tech_idx["printing_press"]
    state.empires[0].unlocked_techs |= 1 << press
    for other in range(1, 6):
        state.empires[0].met_agents |= 1 << other
        state.empires[other].met_agents |= 1
    consulates = rt.policy_idx["consulates"]
    for a in range(6):
        state.empires[a].policies |= 1 << consulates    # 2 delegates each
    pass_steps(state, 6, registry)      # next boundary founds the congress
    assert state.congress.active
    session_turn = state.congress.first_session_turn
    while state.turn < session_turn:
        pass_steps(state, 6, registry)
    # Everyone votes for agent 1 during the session turn.
    for _ in range(6):
        flat = [0] * len(registry)
        flat[registry.index["congress_vote"]] = 1 + 1
        engine.advance_state_inplace(state, state.active_agent,
                                     decode_plan(registry, flat))
    assert state.congress.last_votes[1] == 12
    assert state.victory.kind == "diplomatic"
    assert state.victory.winner == 1
    report("diplomatic victory",
           f"12 votes at the turn-{session_turn} session")


# -------------------------------------------------------------------------
# Criterion 4: tech DAG safety.


def test_acceptance_tech_dag(corpus_state):
    rules = load_default()
    eng_idx = rules.tech_idx["engineering"]
    closure = {rules.techs[i].id for i in rules.tech_closure(eng_idx)}
    assert closure == {"archery", "animal_husbandry", "the_wheel",
                       "mathematics", "mining", "masonry", "construction"}
    state = corpus_state.clone()
    registry = ActionSpaceRegistry(state.config)
    stream = RandomStream.from_seed(4, "acc4")
    for step in range(900):
        if state.victory.terminal:
            break
        masks = engine.legal_action_masks(state, state.active_agent, registry)
        raw = [stream.randrange(s) for s in registry.sizes]
        plan, _ = sanitize_plan(raw, masks)
        engine.advance_state_inplace(state, state.active_agent, plan, masks)
        if step % 60 == 0:
            for e in state.empires:
                for t in range(len(rules.techs)):
                    if e.has_tech(t):
                        assert all(e.has_tech(p) for p in rules.tech_closure(t))
    report("tech DAG", "no unlock precedes its prerequisites; closure exact")


# -------------------------------------------------------------------------
# Criterion 5: fog soundness over a 200-turn fuzz.


def test_acceptance_fog_soundness(corpus_state):
    state = corpus_state.clone()
    state.config = small_config(max_game_turns=1000)
    registry = ActionSpaceRegistry(state.config)
    obs_registry = ObservationRegistry(state.config)
    stream = RandomStream.from_seed(5, "acc5")
    prev_explored = [state.explored[a].copy() for a in range(6)]
    checks = 0
    for step in range(200 * 6):
        if state.victory.terminal:
            break
        masks = engine.legal_action_masks(state, state.active_agent, registry)
        raw = [stream.randrange(s) for s in registry.sizes]
        plan, _ = sanitize_plan(raw, masks)
        engine.advance_state_inplace(state, state.active_agent, plan, masks)
        for a in range(6):
            assert not (prev_explored[a] & ~state.explored[a]).any(), \
                "explored set shrank"
            prev_explored[a] = state.explored[a].copy()
        if step % 60 != 0:
            continue
        for a in range(6):
            obs = build_observation(state, a, obs_registry)
            vis = obs["map_visibility"]
            unexplored = np.flatnonzero(vis == visibility.UNEXPLORED)
            explored = np.flatnonzero(vis >= visibility.EXPLORED)
            fogged = np.flatnonzero(vis < visibility.VISIBLE)
            for layer in STATIC_LAYERS + tuple(DYNAMIC_LAYERS):
                assert (obs[f"map_{layer}"][unexplored] == UNKNOWN).all()
            for layer in STATIC_LAYERS:
                truth = getattr(state.map, layer if layer != "natural_wonder"
                                else "natural_wonder")
                assert (obs[f"map_{layer}"][explored] ==
                        truth.astype(np.int32)[explored]).all()
            for layer in DYNAMIC_LAYERS:
                assert (obs[f"map_{layer}"][fogged] == UNKNOWN).all()
            truth_counts = [sum(1 for e in state.empires if e.has_tech(t))
                            for t in range(len(state.rules.techs))]
            assert obs["tech_global_unlock_counts"].tolist() == truth_counts
            checks += 1
    assert not any(el.name.startswith("opp_tech")
                   for el in obs_registry.elements)
    report("fog soundness", f"{checks} full observation audits")


# -------------------------------------------------------------------------
# Criterion 6: mask/sanitize safety, 10,000 uniform random actions.


def test_acceptance_mask_sanitize_safety(corpus_state):
    stream = RandomStream.from_seed(6, "acc6")
    total = 0
    game_seed = 0
    while total < 10_000:
        config = small_config(max_game_turns=1000)
        state = mapgen.new_game(corpus_state.map.clone(), config,
                                9000 + game_seed)
        registry = ActionSpaceRegistry(config)
        game_seed += 1
        while total < 10_000 and not state.victory.terminal:
            agent = state.active_agent
            masks = engine.legal_action_masks(state, agent, registry)
            raw = [stream.randrange(s) for s in registry.sizes]
            plan, selected = sanitize_plan(raw, masks)
            for k, idx in enumerate(selected):
                assert masks.legal(k, idx), "selected action outside mask"
            engine.advance_state_inplace(state, agent, plan, masks)
            total += 1
    report("mask/sanitize safety", f"{total} random composite actions")


# -------------------------------------------------------------------------
# Criterion 7: 100-seed map balance corpus.


def test_acceptance_map_balance_corpus():
    from collections import deque

    from terranova.tiles import movement_cost
    config = small_config()
    rules = config.rule_tables
    digests = set()
    t0 = time.time()
    for seed in range(100, 200):
        game_map = mapgen.generate_map(seed, config)
        rep = mapgen.balance_report(game_map, rules)
        assert max(rep.region_sizes) - min(rep.region_sizes) <= 2, seed
        for rid in range(6):
            assert rep.regional_in_counts[rid] >= 6, (seed, rid)
            assert rep.regional_leakage_max[rid] <= 1, (seed, rid)
            assert rep.aluminum_counts[rid] >= 2, (seed, rid)
        walkable = [movement_cost(game_map, t) > 0
                    for t in range(game_map.n_tiles)]
        src = game_map.start_positions[0]
        seen = {src}
        q = deque([src])
        while q:
            cur = q.popleft()
            for nb in game_map.grid.neighbors[cur]:
                if nb >= 0 and walkable[nb] and int(nb) not in seen:
                    seen.add(int(nb))
                    q.append(int(nb))
        assert all(s in seen for s in game_map.start_positions), seed
        digests.add(state_digest(mapgen.new_game(game_map, config, seed)))
    assert len(digests) == 100      # all seeds distinct
    report("map balance", f"100 seeds in {time.time()-t0:.0f}s, all constraints exact")


# -------------------------------------------------------------------------
# Criterion 8: replay round trip over 10 recorded random games.


def test_acceptance_replay_round_trip():
    from test_replay import record_random_game
    t0 = time.time()
    for i in range(10):
        recorder, final = record_random_game(turns=40, seed=300 + i,
                                             max_turns=38)
        blob = recorder.finalize()
        rep = replay_mod.load_replay(blob)
        for turn, digest in rep.keyframe_digests.items():
            assert state_digest(replay_mod.seek(rep, turn)) == digest, (i, turn)
        assert state_digest(replay_mod.final_state(rep)) == rep.final_digest, i
        recomputed = replay_mod.demographics_from_playback(rep)
        for stat in replay_mod.DEMOGRAPHICS_STATS:
            assert replay_mod.demographics(rep, stat) == recomputed[stat], (i, stat)
    report("replay round trip", f"10 games in {time.time()-t0:.0f}s, "
           "keyframe + footer digests and demographics exact")


# -------------------------------------------------------------------------
# Criterion 9: observation registry and action-space size audits.


def test_acceptance_registry_audits():
    config = GameConfig()       # the default desk-scale config
    obs_registry = ObservationRegistry(config)
    assert len(obs_registry) >= 100
    rep = action_space_report(config)
    assert rep["size_min"] >= 2
    assert rep["log10_total"] >= 100.0
    report("registry audits",
           f"{len(obs_registry)} observation elements, "
           f"{rep['subspace_count']} sub-spaces, "
           f"log10 joint size {rep['log10_total']:.1f}")


# -------------------------------------------------------------------------
# Criterion 10: throughput report, workers in {1, 4}.
# The >= 2.8x band is informational per the acceptance terms; the numbers
# are measured and reported either way (this host has 2 CPU cores).


def test_acceptance_throughput_report():
    import os
    config = small_config()
    templates = []
    for i in range(64):
        game_map = mapgen.generate_map(7000 + i, config)
        templates.append(mapgen.new_game(game_map, config, 7000 + i))
    rates = {}
    for workers in (1, 4):
        states = [t.clone() for t in templates]
        handle, _obs = runtime.build_simulator(states, f"worker-pool({workers})",
                                               seed=55)
        try:
            rep = runtime.run_selfplay_batch(handle, make_policy("random", 5),
                                             num_steps=12)
            rates[workers] = rep.steps_per_sec
            util = ", ".join(f"{u:.2f}" for u in rep.worker_utilization)
        finally:
            handle.close()
        print(f"\n  workers={workers}: {rep.steps_per_sec:.0f} game-steps/s "
              f"(utilization {util})")
    speedup = rates[4] / rates[1]
    cores = os.cpu_count()
    band_met = speedup >= 2.8
    print(f"  speedup at 4 workers: {speedup:.2f}x on {cores} cores "
          f"(band >= 2.8x {'met' if band_met else 'not met; informational'})")
    assert rates[1] > 0 and rates[4] > 0
    report("throughput report",
           f"{rates[1]:.0f} -> {rates[4]:.0f} steps/s, speedup {speedup:.2f}x")
