"""Wire protocol: length-prefixed JSON envelopes over a persistent stream.

Every message is one JSON object (the envelope):

    {"type": str, "session": str|null, "seq": int, "payload": {...}}

Transports: raw TCP frames each envelope as `u32 little-endian length +
UTF-8 JSON`; the WebSocket bridge carries one envelope per text frame.
Binary blobs (observations, `.gamestate`/`.tnrp` payloads) are base64
strings inside the payload.

Message catalog (client -> server, with the server's response type):

  hello {protocol}                            -> hello_ok {protocol, version, rules_digest}
  rules {}                                    -> rules_payload {rules}
  create_session {mode, seed?, map_b64?, replay_b64?, agent_slot?, policy?,
                  config? {max_game_turns?, reward_mode?}}
                                              -> session_created {session, mode,
                                                 agent_slot, turn, observation_b64,
                                                 masks, view, obs_space, action_sizes}
  submit_action {action: [int]|null}          -> step_result {selected_actions, reward,
                                                 done, turn, observation_b64, masks,
                                                 view, events}
  fetch_state {turn?}                         -> state_payload {view}
  demographics {stat}                         -> demographics_payload {stat, series}
  subscribe {}                                -> subscribed {}; then pushed
                                                 event {event: {...}} envelopes
  batch_create {games_b64: [..], strategy, seed, num_steps_default?}
                                              -> batch_created {session, obs_b64: [..],
                                                 players_turn_id, obs_space,
                                                 action_sizes, metrics}
  batch_step {actions: [[int]]}               -> batch_step_result {obs_b64, rewards,
                                                 dones, selected_actions,
                                                 players_turn_id, metrics}
  close_session {}                            -> session_closed {}

Errors come back as `error { code, message }` with machine-readable codes:
BadRequest, UnknownSession, NotYourTurn, SessionTerminal, ReplayLoadError,
ShapeMismatch, ProtocolError.
"""

from __future__ import annotations

import base64
import json
import struct

PROTOCOL_VERSION = 1
MAX_FRAME = 64 * 1024 * 1024


class ProtocolError(Exception):
    pass


def encode_envelope(env: dict) -> bytes:
    blob = json.dumps(env, separators=(",", ":"), sort_keys=True).encode("utf-8")
    if len(blob) > MAX_FRAME:
        raise ProtocolError("envelope exceeds frame limit")
    return struct.pack("<I", len(blob)) + blob


def decode_frame(blob: bytes) -> dict:
    try:
        env = json.loads(blob)
    except json.JSONDecodeError as err:
        raise ProtocolError(f"bad JSON envelope: {err}") from None
    if not isinstance(env, dict) or "type" not in env:
        raise ProtocolError("envelope must be an object with a 'type'")
    env.setdefault("session", None)
    env.setdefault("seq", 0)
    env.setdefault("payload", {})
    return env


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


def make_reply(req: dict, type_: str, payload: dict) -> dict:
    return {"type": type_, "session": req.get("session"),
            "seq": req.get("seq", 0), "payload": payload}


def make_error(req: dict, code: str, message: str) -> dict:
    return {"type": "error", "session": req.get("session"),
            "seq": req.get("seq", 0),
            "payload": {"code": code, "message": message}}
