import json
import re
import subprocess
import sys

import numpy as np
import pytest

from terranova import replay as replay_mod
from terranova.observation import UNKNOWN, decode_observation
from terranova.service import protocol
from terranova.service.manager import SessionManager, fogged_view
from terranova.visibility import VISIBLE

from test_replay import record_random_game


def req(manager, type_, payload=None, session=None, subscriber=None):
    env = {"type": type_, "session": session, "seq": 1, "payload": payload or {}}
    return manager.handle(env, subscriber=subscriber)


@pytest.fixture()
def manager():
    return SessionManager()


@pytest.fixture()
def play_session(manager):
    reply = req(manager, "create_session",
                {"mode": "human_play", "seed": 6, "policy": "greedy",
                 "config": {"max_game_turns": 60}})
    assert reply["type"] == "session_created"
    return reply["payload"]


def test_hello_handshake(manager):
    reply = req(manager, "hello", {"protocol": 1})
    assert reply["type"] == "hello_ok"
    assert reply["payload"]["protocol"] == protocol.PROTOCOL_VERSION
    assert len(reply["payload"]["rules_digest"]) == 64


def test_human_play_session_initial_payload(play_session):
    assert play_session["agent_slot"] == 0
    assert play_session["turn"] == 1
    assert len(play_session["masks"]) == len(play_session["action_sizes"])
    view = play_session["view"]
    assert view["mode"] == "fogged"
    assert len(view["own_units"]) == 2      # settler + warrior


def test_malformed_mode_rejected(manager):
    reply = req(manager, "create_session", {"mode": "spectator"})
    assert reply["type"] == "error"
    assert reply["payload"]["code"] == "BadRequest"


def test_unknown_session_rejected(manager):
    reply = req(manager, "fetch_state", {}, session="deadbeef")
    assert reply["type"] == "error"
    assert reply["payload"]["code"] == "UnknownSession"


def test_all_pass_submission_advances_full_turn(manager, play_session):
    sid = play_session["session"]
    reply = req(manager, "submit_action", {"action": None}, session=sid)
    assert reply["type"] == "step_result"
    assert reply["payload"]["turn"] == 2        # six POSG steps ran
    assert reply["payload"]["done"] is False


def test_illegal_submission_echoes_pass_substitution(manager, play_session):
    sid = play_session["session"]
    sizes = play_session["action_sizes"]
    masks = play_session["masks"]
    flat = [0] * len(sizes)
    # Find the research sub-space: it is the one sized 1 + n_techs whose
    # mask currently allows only root techs; pick an illegal index.
    sess = manager.sessions[sid]
    k = sess.registry.index["research"]
    eng = sess.state.rules.tech_idx["engineering"]
    flat[k] = 1 + eng
    assert masks[k][1 + eng] == 0
    reply = req(manager, "submit_action", {"action": flat}, session=sid)
    selected = reply["payload"]["selected_actions"]
    assert selected[k] == 0
    assert selected == [0] * len(sizes)


def test_submission_after_terminal_rejected(manager):
    created = req(manager, "create_session",
                  {"mode": "human_play", "seed": 2,
                   "config": {"max_game_turns": 1}})
    sid = created["payload"]["session"]
    reply = req(manager, "submit_action", {"action": None}, session=sid)
    assert reply["payload"]["done"] is True
    reply = req(manager, "submit_action", {"action": None}, session=sid)
    assert reply["type"] == "error"
    assert reply["payload"]["code"] == "SessionTerminal"


def test_play_view_is_pure_projection_of_observation(manager, play_session):
    sid = play_session["session"]
    sess = manager.sessions[sid]
    reply = req(manager, "fetch_state", {}, session=sid)
    view = reply["payload"]["view"]
    from terranova.observation import ObservationRegistry, build_observation
    obs = build_observation(sess.state, 0, sess.obs_registry)
    assert json.dumps(view, sort_keys=True) == \
        json.dumps(fogged_view(obs), sort_keys=True)


def test_play_view_hides_fogged_dynamic_layers(manager, play_session):
    sid = play_session["session"]
    for _ in range(3):
        req(manager, "submit_action", {"action": None}, session=sid)
    view = req(manager, "fetch_state", {}, session=sid)["payload"]["view"]
    vis = view["layers"]["visibility"]
    sess = manager.sessions[sid]
    hidden_units = 0
    for name in ("unit_military_kind", "unit_military_owner",
                 "unit_civilian_kind", "unit_civilian_owner",
                 "city_owner", "city_population", "improvement", "owner"):
        layer = view["layers"][name]
        for t, value in enumerate(layer):
            if vis[t] < VISIBLE:
                assert value == UNKNOWN
    # There is information to hide: other agents' units exist out of sight.
    for u in sess.state.units.values():
        if u.owner != 0 and vis[u.position] < VISIBLE:
            hidden_units += 1
    assert hidden_units > 0


def test_replay_session_full_visibility_and_seek_parity(manager):
    recorder, final = record_random_game(turns=30)
    blob = recorder.finalize()
    created = req(manager, "create_session",
                  {"mode": "replay", "replay_b64": protocol.b64(blob)})
    payload = created["payload"]
    assert payload["mode"] == "replay"
    view = payload["view"]
    assert view["mode"] == "omniscient"
    assert len(view["empires"]) == 6        # all six empires at once
    sid = payload["session"]
    rep = replay_mod.load_replay(blob)
    fetched = req(manager, "fetch_state", {"turn": 26}, session=sid)
    from terranova.serialize import state_digest
    assert fetched["payload"]["digest"] == \
        state_digest(replay_mod.seek(rep, 26))


def test_replay_demographics_match_cli_csv(manager, tmp_path, capsys):
    recorder, _final = record_random_game(turns=20)
    blob = recorder.finalize()
    path = tmp_path / "game.tnrp"
    path.write_bytes(blob)
    created = req(manager, "create_session",
                  {"mode": "replay", "replay_b64": protocol.b64(blob)})
    sid = created["payload"]["session"]
    series = req(manager, "demographics", {"stat": "population"},
                 session=sid)["payload"]["series"]
    from terranova.cli import main
    rc = main(["stats", "--replay", str(path), "--stat", "population"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().split("\n")[1:]
    csv_series = [[] for _ in range(6)]
    for line in lines:
        cells = [int(x) for x in line.split(",")[1:]]
        for a in range(6):
            csv_series[a].append(cells[a])
    assert series == csv_series


def test_bad_replay_payload(manager):
    reply = req(manager, "create_session",
                {"mode": "replay", "replay_b64": protocol.b64(b"garbage")})
    assert reply["type"] == "error"
    assert reply["payload"]["code"] == "ReplayLoadError"


def test_session_isolation(manager):
    a = req(manager, "create_session", {"mode": "human_play", "seed": 5})
    b = req(manager, "create_session", {"mode": "human_play", "seed": 5})
    sa, sb = a["payload"]["session"], b["payload"]["session"]
    assert sa != sb
    req(manager, "submit_action", {"action": None}, session=sa)
    from terranova.serialize import state_digest
    assert manager.sessions[sa].state.turn == 2
    assert manager.sessions[sb].state.turn == 1
    # The untouched session still matches a fresh seed-5 game.
    c = req(manager, "create_session", {"mode": "human_play", "seed": 5})
    sc = c["payload"]["session"]
    assert state_digest(manager.sessions[sb].state) == \
        state_digest(manager.sessions[sc].state)


def test_subscription_streams_own_events(manager):
    pushed = []
    created = req(manager, "create_session",
                  {"mode": "human_play", "seed": 6, "policy": "greedy"})
    sid = created["payload"]["session"]
    sess = manager.sessions[sid]
    req(manager, "subscribe", {}, session=sid, subscriber=pushed.append)
    # The human founds their capital: that event involves them and streams.
    settler = sess.state.rules.unit_idx["settler"]
    slot = next(s for s, uid in enumerate(sess.state.empires[0].unit_slot_ids)
                if uid >= 0 and sess.state.units[uid].kind == settler)
    flat = [0] * len(sess.registry)
    flat[sess.registry.index[f"unit_{slot}"]] = 1 + 37      # found_city
    req(manager, "submit_action", {"action": flat}, session=sid)
    kinds = [env["payload"]["event"]["kind"] for env in pushed]
    assert "city_founded" in kinds
    for env in pushed:
        assert env["type"] == "event"
        assert env["session"] == sid


def test_hidden_opponent_events_not_streamed(manager):
    pushed = []
    created = req(manager, "create_session",
                  {"mode": "human_play", "seed": 6, "policy": "greedy"})
    sid = created["payload"]["session"]
    req(manager, "subscribe", {}, session=sid, subscriber=pushed.append)
    for _ in range(3):
        req(manager, "submit_action", {"action": None}, session=sid)
    # Greedy opponents founded cities out of sight: none may be streamed.
    for env in pushed:
        ev = env["payload"]["event"]
        assert not (ev["kind"] == "city_founded" and ev["agent"] != 0)


def test_batch_session_round_trip(manager, tmp_path):
    from terranova.cli import main
    out = tmp_path / "maps"
    main(["genmaps", "--count", "2", "--seed", "31", "--out", str(out),
          "--width", "30", "--height", "20"])
    blobs = []
    for name in sorted(out.iterdir()):
        if name.suffix == ".gamestate":
            blobs.append(protocol.b64(name.read_bytes()))
    created = req(manager, "batch_create",
                  {"games_b64": blobs, "strategy": "serial", "seed": 12})
    payload = created["payload"]
    sid = payload["session"]
    assert payload["players_turn_id"] == [0, 0]
    sizes = payload["action_sizes"]
    stepped = req(manager, "batch_step",
                  {"actions": [[0] * len(sizes)] * 2}, session=sid)
    sp = stepped["payload"]
    assert sp["players_turn_id"] == [1, 1]
    assert sp["rewards"] == [0.0, 0.0]
    assert sp["selected_actions"] == [[0] * len(sizes)] * 2
    digests = req(manager, "batch_digests", {}, session=sid)
    assert len(digests["payload"]["digests"]) == 2
    req(manager, "close_session", {}, session=sid)


def test_tcp_transport_end_to_end():
    proc = subprocess.Popen(
        [sys.executable, "-m", "terranova.cli", "serve", "--listen", "127.0.0.1:0"],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
    try:
        line = proc.stdout.readline().strip()
        m = re.match(r"TERRA_SERVICE_LISTENING (\S+):(\d+)", line)
        assert m, line
        from terranova.service.client import ServiceClient
        with ServiceClient(m.group(1), int(m.group(2))) as client:
            hello = client.expect("hello", {"protocol": 1})
            assert hello["type"] == "hello_ok"
            created = client.expect("create_session",
                                    {"mode": "human_play", "seed": 8})
            sid = created["payload"]["session"]
            client.expect("subscribe", {}, session=sid)
            result = client.expect("submit_action", {"action": None}, session=sid)
            assert result["payload"]["turn"] == 2
    finally:
        proc.terminate()
        proc.wait(timeout=10)
