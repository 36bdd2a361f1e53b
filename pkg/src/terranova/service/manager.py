"""Sessions: live human-play games, headless batches, and replay browsing.

Fog soundness at the boundary: play-mode view payloads are derived from
`build_observation` output only (`fogged_view` takes the Observation, never
the raw state), plus a filtered public event stream. Replay sessions serve
the omniscient view.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field

from .. import engine, mapgen, replay as replay_mod, runtime
from ..actions import ActionSpaceRegistry, sanitize_plan
from ..observation import (
    Observation, ObservationRegistry, build_observation, encode_observation,
)
from ..policies import greedy_flat_action, random_flat_action
from ..rules import YIELD_KEYS
from ..serialize import read_gamestate, state_digest
from ..state import Event, GameConfig, GameState
from . import protocol

# Event kinds that are global news; everything else reaches a subscriber
# only when it involves their agent or a tile they can currently see.
PUBLIC_EVENT_KINDS = {
    "war_declared", "congress_founded", "congress_session", "victory",
    "turn_limit", "wonder_built", "wonder_lost", "agent_eliminated",
    "city_captured", "shuttle_part_built", "project_built",
}
# Never streamed in play mode: would attribute anonymized knowledge.
SUPPRESSED_EVENT_KINDS = {"tech_finished"}


class SessionError(Exception):
    code = "BadRequest"


class BadRequest(SessionError):
    code = "BadRequest"


class UnknownSession(SessionError):
    code = "UnknownSession"


class NotYourTurn(SessionError):
    code = "NotYourTurn"


class SessionTerminal(SessionError):
    code = "SessionTerminal"


class ReplayLoadError(SessionError):
    code = "ReplayLoadError"


def fogged_view(obs: Observation) -> dict:
    """Play-mode view: a pure projection of one observation."""
    v = obs.values
    width = int(v["map_width"][0])
    height = int(v["map_height"][0])
    layers = {name[len("map_"):]: v[name].tolist()
              for name in v if name.startswith("map_")}
    cities = []
    for s in range(int(v["city_slot_capacity"][0])):
        if not v["city_present"][s]:
            continue
        cities.append({
            "slot": s,
            "tile": int(v["city_tile"][s]),
            "population": int(v["city_population"][s]),
            "hp": int(v["city_hp"][s]),
            "food_stock": int(v["city_food_stock"][s]),
            "growth_threshold": int(v["city_growth_threshold"][s]),
            "production_kind": int(v["city_production_kind"][s]),
            "production_item": int(v["city_production_item"][s]),
            "production_progress": int(v["city_production_progress"][s]),
            "production_cost": int(v["city_production_cost"][s]),
            "is_original_capital": bool(v["city_is_original_capital"][s]),
            "border_stock": int(v["city_border_stock"][s]),
            "border_threshold": int(v["city_border_threshold"][s]),
            "focus": int(v["city_focus"][s]),
            "yields": {k: int(v[f"city_{n}_out"][s]) for k, n in
                       zip(YIELD_KEYS, ["food", "production", "gold",
                                        "science", "culture", "tourism"])},
        })
    units = []
    for s in range(int(v["unit_slot_capacity"][0])):
        if not v["unit_present"][s]:
            continue
        units.append({
            "slot": s,
            "tile": int(v["unit_tile"][s]),
            "kind": int(v["unit_kind"][s]),
            "hp": int(v["unit_hp"][s]),
            "moves_left": int(v["unit_moves_left"][s]),
            "fortified": bool(v["unit_fortified"][s]),
            "working": bool(v["unit_working"][s]),
        })
    scalars = {name: int(v[name][0]) for name in v
               if not name.startswith("map_") and v[name].shape == (1,)}
    vectors = {name: v[name].tolist() for name in v
               if not name.startswith("map_") and v[name].shape != (1,)
               and not name.startswith(("city_", "unit_"))}
    valid = {name: obs.valid[name].tolist() for name in vectors}
    return {"mode": "fogged", "width": width, "height": height,
            "layers": layers, "own_cities": cities, "own_units": units,
            "scalars": scalars, "vectors": vectors, "vector_valid": valid}


def omniscient_view(state: GameState) -> dict:
    """Replay-mode view: full visibility of the game."""
    m = state.map
    rt = state.rules
    layers = {
        "terrain": m.terrain.tolist(),
        "elevation": m.elevation.tolist(),
        "feature": m.feature.tolist(),
        "resource": m.resource.tolist(),
        "natural_wonder": m.natural_wonder.tolist(),
        "region": m.region.tolist(),
        "improvement": m.improvement.tolist(),
        "owner": m.owner.tolist(),
    }
    cities = [{
        "id": c.id, "owner": c.owner, "tile": c.position,
        "population": c.population, "hp": c.hp,
        "is_capital": c.is_capital, "original_owner": c.original_owner,
        "buildings": [rt.buildings[i].id for i in range(len(rt.buildings))
                      if c.buildings >> i & 1],
    } for _, c in sorted(state.cities.items())]
    units = [{
        "id": u.id, "owner": u.owner, "tile": u.position,
        "kind": rt.units[u.kind].id, "hp": u.hp,
    } for _, u in sorted(state.units.items())]
    empires = [{
        "agent": e.agent, "gold": e.gold,
        "culture_lifetime": e.culture_lifetime,
        "tourism_accumulated_vs": e.tourism_accumulated_vs,
        "techs": [rt.techs[i].id for i in range(len(rt.techs))
                  if e.unlocked_techs >> i & 1],
        "current_tech": rt.techs[e.current_tech].id if e.current_tech >= 0 else None,
        "policies": [rt.policies[i].id for i in range(len(rt.policies))
                     if e.policies >> i & 1],
        "delegates": engine.delegate_count(state, e.agent),
        "apollo_built": e.apollo_built,
        "shuttle_parts_built": [bool(e.shuttle_parts_built >> i & 1) for i in range(6)],
        "eliminated": e.eliminated,
        "at_war_with": [j for j in range(6) if e.at_war_with >> j & 1],
    } for e in state.empires]
    return {
        "mode": "omniscient", "width": m.width, "height": m.height,
        "turn": state.turn, "step_index": state.step_index,
        "active_agent": state.active_agent,
        "layers": layers, "cities": cities, "units": units,
        "empires": empires,
        "congress": {
            "active": state.congress.active,
            "first_session_turn": state.congress.first_session_turn,
            "sessions_held": state.congress.sessions_held,
            "last_votes": state.congress.last_votes,
            "last_winner": state.congress.last_winner,
        },
        "victory": {"kind": state.victory.kind, "winner": state.victory.winner,
                    "turn_decided": state.victory.turn_decided},
        "demographics_row": replay_mod.demographics_row(state),
    }


def filter_event_for(state: GameState, agent: int, ev: Event,
                     visible) -> dict | None:
    """Public-event filter for play-mode streaming."""
    if ev.kind in SUPPRESSED_EVENT_KINDS:
        return None
    involved = ev.agent == agent or ev.data.get("to") == agent or \
        ev.data.get("target") == agent or ev.data.get("from") == agent
    if involved or ev.kind in PUBLIC_EVENT_KINDS or \
            (ev.tile >= 0 and bool(visible[ev.tile])):
        return ev.to_json()
    return None


@dataclass
class Session:
    id: str
    mode: str                       # human_play | headless | replay
    config: GameConfig | None = None
    state: GameState | None = None
    replay: replay_mod.Replay | None = None
    agent_slot: int = 0
    policy: str = "greedy"
    seed: int = 0
    registry: ActionSpaceRegistry | None = None
    obs_registry: ObservationRegistry | None = None
    handle: runtime.SimHandle | None = None
    subscribers: list = field(default_factory=list)
    step_count: int = 0
    demographics_rows: list = field(default_factory=list)
    last_turn: int = 1

    @property
    def terminal(self) -> bool:
        return self.state is not None and self.state.victory.terminal


class SessionManager:
    """Transport-agnostic request handler; one instance per service."""

    def __init__(self) -> None:
        self.sessions: dict[str, Session] = {}
        self._push_seq = 0

    # -- plumbing -----------------------------------------------------------

    def _session(self, env: dict) -> Session:
        sid = env.get("session")
        sess = self.sessions.get(sid) if sid else None
        if sess is None:
            raise UnknownSession(f"unknown session {sid!r}")
        return sess

    def _push(self, sess: Session, payload: dict) -> None:
        self._push_seq += 1
        env = {"type": "event", "session": sess.id, "seq": self._push_seq,
               "payload": payload}
        for callback in list(sess.subscribers):
            callback(env)

    def handle(self, env: dict, subscriber=None) -> dict:
        """Process one envelope, returning the reply envelope."""
        try:
            kind = env["type"]
            if kind == "hello":
                from ..rules import load_default
                return protocol.make_reply(env, "hello_ok", {
                    "protocol": protocol.PROTOCOL_VERSION,
                    "version": 1,
                    "rules_digest": load_default().digest(),
                })
            if kind == "rules":
                from ..rules import load_default
                return protocol.make_reply(env, "rules_payload",
                                           {"rules": load_default().raw})
            if kind == "create_session":
                return self._create_session(env)
            if kind == "submit_action":
                return self._submit_action(env)
            if kind == "fetch_state":
                return self._fetch_state(env)
            if kind == "demographics":
                return self._demographics(env)
            if kind == "subscribe":
                sess = self._session(env)
                if subscriber is not None:
                    sess.subscribers.append(subscriber)
                return protocol.make_reply(env, "subscribed", {})
            if kind == "batch_create":
                return self._batch_create(env)
            if kind == "batch_step":
                return self._batch_step(env)
            if kind == "batch_digests":
                sess = self._session(env)
                if sess.handle is None:
                    raise BadRequest("not a batch session")
                return protocol.make_reply(env, "batch_digests_payload",
                                           {"digests": sess.handle.digests()})
            if kind == "close_session":
                sess = self._session(env)
                if sess.handle is not None:
                    sess.handle.close()
                self.sessions.pop(sess.id, None)
                return protocol.make_reply(env, "session_closed", {})
            raise BadRequest(f"unknown message type {kind!r}")
        except SessionError as err:
            return protocol.make_error(env, err.code, str(err))
        except runtime.ShapeMismatch as err:
            return protocol.make_error(env, "ShapeMismatch", str(err))
        except protocol.ProtocolError as err:
            return protocol.make_error(env, "ProtocolError", str(err))

    # -- session lifecycle --------------------------------------------------

    def _new_id(self) -> str:
        sid = secrets.token_hex(8)
        while sid in self.sessions:
            sid = secrets.token_hex(8)
        return sid

    def _create_session(self, env: dict) -> dict:
        p = env["payload"]
        mode = p.get("mode")
        if mode == "replay":
            blob = p.get("replay_b64")
            if not blob:
                raise BadRequest("replay mode needs replay_b64")
            try:
                rep = replay_mod.load_replay(protocol.unb64(blob))
            except replay_mod.ReplayError as err:
                raise ReplayLoadError(str(err)) from None
            sess = Session(self._new_id(), "replay", replay=rep)
            self.sessions[sess.id] = sess
            state = replay_mod.seek(rep, 1)
            sess.state = state
            return protocol.make_reply(env, "session_created", {
                "session": sess.id, "mode": "replay",
                "turns": rep.recorded_turns,
                "final_victory": rep.final_victory,
                "view": omniscient_view(state),
                "demographics_stats": replay_mod.DEMOGRAPHICS_STATS,
            })
        if mode not in ("human_play", "headless"):
            raise BadRequest(f"unknown mode {mode!r}")
        overrides = p.get("config") or {}
        config = GameConfig(
            max_game_turns=int(overrides.get("max_game_turns", 500)),
            reward_mode=overrides.get("reward_mode", "dense"),
        )
        seed = int(p.get("seed", 0))
        if p.get("map_b64"):
            state = read_gamestate(protocol.unb64(p["map_b64"]))
            state.config.max_game_turns = config.max_game_turns
            state.config.reward_mode = config.reward_mode
            config = state.config
        else:
            game_map = mapgen.generate_map(seed, config)
            state = mapgen.new_game(game_map, config, seed)
        sess = Session(self._new_id(), mode, config=config, state=state,
                       agent_slot=int(p.get("agent_slot", 0)),
                       policy=p.get("policy", "greedy"), seed=seed,
                       registry=ActionSpaceRegistry(config),
                       obs_registry=ObservationRegistry(config))
        sess.demographics_rows = []
        sess.last_turn = state.turn
        self.sessions[sess.id] = sess
        obs = build_observation(state, sess.agent_slot, sess.obs_registry)
        masks = engine.legal_action_masks(state, sess.agent_slot, sess.registry)
        return protocol.make_reply(env, "session_created", {
            "session": sess.id, "mode": mode, "agent_slot": sess.agent_slot,
            "turn": state.turn,
            "observation_b64": protocol.b64(encode_observation(obs)),
            "masks": masks.to_lists(),
            "view": fogged_view(obs),
            "obs_space": sess.obs_registry.descriptor(),
            "action_sizes": list(sess.registry.sizes),
        })

    # -- play ---------------------------------------------------------------

    def _auto_step(self, sess: Session, events_out: list) -> None:
        """Advance scripted agents until it is the human's turn again."""
        state = sess.state
        while not state.victory.terminal and state.active_agent != sess.agent_slot:
            agent = state.active_agent
            masks = engine.legal_action_masks(state, agent, sess.registry)
            if sess.policy == "random":
                raw = random_flat_action(sess.seed, agent, 0, state.step_index,
                                         sess.registry.sizes)
            else:
                raw = greedy_flat_action(sess.seed, agent, 0, state.step_index, masks)
            plan, _sel = sanitize_plan(raw, masks)
            events = engine.advance_state_inplace(state, agent, plan, masks)
            events_out.extend(events)
            self._note_turn(sess)

    def _note_turn(self, sess: Session) -> None:
        if sess.state.turn != sess.last_turn:
            sess.demographics_rows.append(replay_mod.demographics_row(sess.state))
            sess.last_turn = sess.state.turn

    def _submit_action(self, env: dict) -> dict:
        sess = self._session(env)
        if sess.mode != "human_play":
            raise BadRequest("submit_action requires a human_play session")
        if sess.terminal:
            raise SessionTerminal("the game is over")
        state = sess.state
        if state.active_agent != sess.agent_slot:
            raise NotYourTurn(f"it is agent {state.active_agent}'s step")
        action = env["payload"].get("action")
        if action is None:
            action = [0] * len(sess.registry)
        masks = engine.legal_action_masks(state, sess.agent_slot, sess.registry)
        plan, selected = sanitize_plan(action, masks)
        prev_decided = state.victory.decided
        events = engine.advance_state_inplace(state, sess.agent_slot, plan, masks)
        if state.config.reward_mode == "sparse":
            reward = 1.0 if (state.victory.decided and not prev_decided
                             and state.victory.winner == sess.agent_slot) else 0.0
        else:
            weights = state.config.reward_weights
            reward = float(sum(weights.get(ev.kind, 0.0) for ev in events
                               if ev.agent == sess.agent_slot))
        self._note_turn(sess)
        all_events = list(events)
        self._auto_step(sess, all_events)
        sess.step_count += 1
        from ..visibility import visible_tiles
        vis = visible_tiles(state, sess.agent_slot)
        public = [e for ev in all_events
                  if (e := filter_event_for(state, sess.agent_slot, ev, vis))]
        for ev in public:
            self._push(sess, {"kind": "game_event", "event": ev,
                              "turn": state.turn})
        obs = build_observation(state, sess.agent_slot, sess.obs_registry)
        next_masks = engine.legal_action_masks(state, sess.agent_slot, sess.registry)
        return protocol.make_reply(env, "step_result", {
            "selected_actions": selected,
            "reward": reward,
            "done": state.victory.terminal,
            "turn": state.turn,
            "victory": {"kind": state.victory.kind, "winner": state.victory.winner},
            "observation_b64": protocol.b64(encode_observation(obs)),
            "masks": next_masks.to_lists(),
            "view": fogged_view(obs),
            "events": public,
        })

    def _fetch_state(self, env: dict) -> dict:
        sess = self._session(env)
        if sess.mode == "replay":
            turn = env["payload"].get("turn", 1)
            state = replay_mod.seek(sess.replay, int(turn))
            return protocol.make_reply(env, "state_payload", {
                "view": omniscient_view(state),
                "digest": state_digest(state),
            })
        obs = build_observation(sess.state, sess.agent_slot, sess.obs_registry)
        return protocol.make_reply(env, "state_payload",
                                   {"view": fogged_view(obs)})

    def _demographics(self, env: dict) -> dict:
        sess = self._session(env)
        stat = env["payload"].get("stat", "population")
        if stat not in replay_mod.DEMOGRAPHICS_STATS:
            raise BadRequest(f"unknown statistic {stat!r}; registry: "
                             f"{', '.join(replay_mod.DEMOGRAPHICS_STATS)}")
        if sess.mode == "replay":
            series = replay_mod.demographics(sess.replay, stat)
        else:
            series = [[row[stat][a] for row in sess.demographics_rows]
                      for a in range(6)]
        return protocol.make_reply(env, "demographics_payload",
                                   {"stat": stat, "series": series})

    # -- batches ------------------------------------------------------------

    def _batch_create(self, env: dict) -> dict:
        p = env["payload"]
        blobs = p.get("games_b64") or []
        if not blobs:
            raise BadRequest("batch_create needs at least one game")
        states = [read_gamestate(protocol.unb64(b)) for b in blobs]
        handle, obs = runtime.build_simulator(
            states, p.get("strategy"), int(p.get("seed", 0)),
            compute_digests=False)
        sess = Session(self._new_id(), "headless", handle=handle,
                       registry=handle.registry, obs_registry=handle.obs_registry)
        self.sessions[sess.id] = sess
        return protocol.make_reply(env, "batch_created", {
            "session": sess.id,
            "obs_b64": [protocol.b64(o) for o in obs],
            "players_turn_id": list(handle.players_turn_id),
            "obs_space": handle.obs_registry.descriptor(),
            "action_sizes": list(handle.registry.sizes),
            "metrics": self._batch_metrics(sess),
        })

    def _batch_metrics(self, sess: Session) -> dict:
        handle = sess.handle
        return {
            "num_games": handle.num_games,
            "env_steps": handle.env_steps,
            "episodes_completed": [s.episode for s in handle.slots],
            "episode_log": list(handle.episode_log),
            "returns": handle.current_returns(),
        }

    def _batch_step(self, env: dict) -> dict:
        sess = self._session(env)
        if sess.handle is None:
            raise BadRequest("not a batch session")
        actions = env["payload"].get("actions")
        if actions is None:
            raise BadRequest("batch_step needs actions")
        obs, rewards, dones, selected, turn_ids = sess.handle.env_step(actions)
        return protocol.make_reply(env, "batch_step_result", {
            "obs_b64": [protocol.b64(o) for o in obs],
            "rewards": rewards,
            "dones": dones,
            "selected_actions": selected,
            "players_turn_id": turn_ids,
            "metrics": self._batch_metrics(sess),
        })
