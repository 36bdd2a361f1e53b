"""Compressed game recordings with bit-exact playback.

A replay is an action log plus periodic keyframes, leaning on engine
determinism: replaying the recorded selected actions from any keyframe
reproduces every later state exactly. Keyframes are start-of-turn
snapshots every KEYFRAME_INTERVAL game turns (turns 1, 26, 51, ...).

`.tnrp` container layout:
  magic "TNRP" | u16 format version | u8 codec id (1 = zlib)
  | header JSON blob | compressed body blob | compressed footer blob
  | 32-byte sha256 over everything before it
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib

import numpy as np

from . import engine
from .actions import ActionPlan, ActionSpaceRegistry
from .serialize import Reader, Writer, decode_state, encode_state, state_digest
from .state import Event, GameState

REPLAY_MAGIC = b"TNRP"
REPLAY_VERSION = 1
CODEC_ZLIB = 1
KEYFRAME_INTERVAL = 25

DEMOGRAPHICS_STATS = ["population", "gold", "science_rate", "culture_lifetime",
                      "tourism", "cities", "units", "techs_unlocked", "delegates"]


class ReplayError(Exception):
    pass


class OutOfOrderStep(ReplayError):
    pass


class ChecksumMismatch(ReplayError):
    pass


class VersionUnsupported(ReplayError):
    pass


class DigestMismatch(ReplayError):
    pass


class UnknownStatistic(KeyError):
    pass


def demographics_row(state: GameState) -> dict[str, list[int]]:
    """One demographics sample per agent, measured at a turn boundary."""
    rows: dict[str, list[int]] = {}
    pops, golds, sci, cul, tour, ncity, nunit, ntech, dele = \
        [], [], [], [], [], [], [], [], []
    for a in range(6):
        e = state.empires[a]
        cities = [c for c in state.cities.values() if c.owner == a]
        science = sum(engine.city_output(state, c)[3] for c in cities) + \
            engine.policy_totals(state, a)["science"]
        pops.append(sum(c.population for c in cities))
        golds.append(e.gold)
        sci.append(science)
        cul.append(e.culture_lifetime)
        tour.append(sum(e.tourism_accumulated_vs))
        ncity.append(len(cities))
        nunit.append(sum(1 for u in state.units.values() if u.owner == a))
        ntech.append(bin(e.unlocked_techs).count("1"))
        dele.append(engine.delegate_count(state, a))
    rows["population"] = pops
    rows["gold"] = golds
    rows["science_rate"] = sci
    rows["culture_lifetime"] = cul
    rows["tourism"] = tour
    rows["cities"] = ncity
    rows["units"] = nunit
    rows["techs_unlocked"] = ntech
    rows["delegates"] = dele
    return rows


class ReplayRecorder:
    """Accumulates one game's step records; O(1) amortized per step."""

    def __init__(self, initial_state: GameState) -> None:
        self.config_doc = initial_state.config.public_dict()
        self.rules_digest = initial_state.rules.digest()
        self.map_seed = initial_state.map.seed
        self.initial_digest = state_digest(initial_state)
        self.steps: list[tuple[int, int, list[int], float, list[dict]]] = []
        self.keyframes: dict[int, bytes] = {1: encode_state(initial_state)}
        self.keyframe_digests: dict[int, str] = {1: self.initial_digest}
        self.demographics: list[dict[str, list[int]]] = []
        self._expected_step = initial_state.step_index
        self._last_turn = initial_state.turn
        self._final_digest: str | None = None
        self._final_victory: dict | None = None

    def record_step(self, step_index: int, agent: int, selected: list[int],
                    reward: float, events: list[Event], next_state: GameState) -> None:
        if step_index != self._expected_step:
            raise OutOfOrderStep(
                f"expected step {self._expected_step}, got {step_index}")
        self._expected_step += 1
        self.steps.append((step_index, agent, list(selected), float(reward),
                           [ev.to_json() for ev in events]))
        if next_state.turn != self._last_turn:
            # A turn boundary just ran: sample demographics for the completed
            # turn and snapshot the new turn when it is a keyframe turn.
            self.demographics.append(demographics_row(next_state))
            self._last_turn = next_state.turn
            if (next_state.turn - 1) % KEYFRAME_INTERVAL == 0:
                self.keyframes[next_state.turn] = encode_state(next_state)
                self.keyframe_digests[next_state.turn] = state_digest(next_state)
        self._final_digest = state_digest(next_state)
        self._final_victory = {
            "kind": next_state.victory.kind,
            "winner": next_state.victory.winner,
            "turn_decided": next_state.victory.turn_decided,
            "turn_limit_reached": next_state.victory.turn_limit_reached,
        }

    def finalize(self, truncated: bool = False) -> bytes:
        header = json.dumps({
            "config": self.config_doc,
            "rules_digest": self.rules_digest,
            "map_seed": self.map_seed,
            "initial_digest": self.initial_digest,
            "steps": len(self.steps),
        }, sort_keys=True, separators=(",", ":")).encode()

        body = Writer()
        body.u32(len(self.steps))
        for step_index, agent, selected, reward, events in self.steps:
            body.u32(step_index)
            body.u8(agent)
            body.i32_list(selected)
            body.f64(reward)
            body.text(json.dumps(events, sort_keys=True, separators=(",", ":")))
        body.u32(len(self.keyframes))
        for turn in sorted(self.keyframes):
            body.u32(turn)
            body.text(self.keyframe_digests[turn])
            body.blob(self.keyframes[turn])

        footer = Writer()
        victory = self._final_victory or {"kind": "none", "winner": -1,
                                          "turn_decided": -1, "turn_limit_reached": False}
        footer.text(json.dumps(victory, sort_keys=True, separators=(",", ":")))
        footer.text(self._final_digest or self.initial_digest)
        footer.u8(1 if truncated else 0)
        footer.u32(len(self.demographics))
        for stat in DEMOGRAPHICS_STATS:
            for row in self.demographics:
                footer.parts.append(np.asarray(row[stat], dtype="<i4").tobytes())

        out = bytearray()
        out += REPLAY_MAGIC
        out += struct.pack("<HB", REPLAY_VERSION, CODEC_ZLIB)
        out += struct.pack("<I", len(header)) + header
        cbody = zlib.compress(body.done(), 6)
        out += struct.pack("<I", len(cbody)) + cbody
        cfooter = zlib.compress(footer.done(), 6)
        out += struct.pack("<I", len(cfooter)) + cfooter
        out += hashlib.sha256(bytes(out)).digest()
        return bytes(out)


class Replay:
    def __init__(self, header: dict, steps, keyframes, keyframe_digests,
                 footer: dict) -> None:
        self.header = header
        self.steps = steps
        self.keyframes = keyframes
        self.keyframe_digests = keyframe_digests
        self.final_victory = footer["victory"]
        self.final_digest = footer["final_digest"]
        self.truncated = footer["truncated"]
        self.demographics_table = footer["demographics"]

    @property
    def recorded_turns(self) -> int:
        return len(next(iter(self.demographics_table.values()))) \
            if self.demographics_table else 0


def load_replay(blob: bytes, rule_tables=None) -> Replay:
    if blob[:4] != REPLAY_MAGIC:
        raise ReplayError("not a .tnrp replay (bad magic)")
    if hashlib.sha256(blob[:-32]).digest() != blob[-32:]:
        raise ChecksumMismatch("replay checksum does not validate")
    version, codec = struct.unpack_from("<HB", blob, 4)
    if version != REPLAY_VERSION:
        raise VersionUnsupported(f"replay format {version}")
    pos = 7
    (hlen,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    header = json.loads(blob[pos:pos + hlen])
    pos += hlen
    (blen,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    body = zlib.decompress(blob[pos:pos + blen])
    pos += blen
    (flen,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    footer_raw = zlib.decompress(blob[pos:pos + flen])

    from .rules import load_default
    rules = rule_tables or load_default()
    if header["config"]["rules_digest"] != rules.digest():
        raise DigestMismatch("replay was recorded under different rule tables")

    r = Reader(body)
    steps = []
    for _ in range(r.u32()):
        step_index = r.u32()
        agent = r.u8()
        selected = r.i32_list()
        reward = r.f64()
        events = json.loads(r.text())
        steps.append((step_index, agent, selected, reward, events))
    keyframes: dict[int, bytes] = {}
    keyframe_digests: dict[int, str] = {}
    for _ in range(r.u32()):
        turn = r.u32()
        keyframe_digests[turn] = r.text()
        keyframes[turn] = r.blob()

    fr = Reader(footer_raw)
    victory = json.loads(fr.text())
    final_digest = fr.text()
    truncated = bool(fr.u8())
    n_turns = fr.u32()
    demo: dict[str, list[list[int]]] = {}
    for stat in DEMOGRAPHICS_STATS:
        rows = []
        for _ in range(n_turns):
            rows.append(np.frombuffer(fr._take(4 * 6), dtype="<i4").tolist())
        demo[stat] = rows
    footer = {"victory": victory, "final_digest": final_digest,
              "truncated": truncated, "demographics": demo}
    return Replay(header, steps, keyframes, keyframe_digests, footer)


def load_replay_file(path: str, rule_tables=None) -> Replay:
    with open(path, "rb") as f:
        return load_replay(f.read(), rule_tables)


def _replay_from(replay: Replay, state: GameState, registry: ActionSpaceRegistry,
                 stop_turn: int | None) -> GameState:
    start = state.step_index
    for step_index, agent, selected, _reward, _events in replay.steps[start:]:
        if stop_turn is not None and state.turn >= stop_turn:
            break
        plan = ActionPlan(registry, selected)
        engine.advance_state_inplace(state, agent, plan, verify=False)
    return state


def seek(replay: Replay, turn: int, rule_tables=None) -> GameState:
    """State at the start of `turn`, reconstructed from the nearest keyframe.
    Turns past the end of the recording yield the final state."""
    candidates = [t for t in replay.keyframes if t <= turn]
    if not candidates:
        raise ReplayError(f"turn {turn} precedes the recording")
    base = max(candidates)
    state = decode_state(replay.keyframes[base], rule_tables)
    registry = ActionSpaceRegistry(state.config)
    return _replay_from(replay, state, registry, stop_turn=turn)


def final_state(replay: Replay, rule_tables=None) -> GameState:
    base = max(replay.keyframes)
    state = decode_state(replay.keyframes[base], rule_tables)
    registry = ActionSpaceRegistry(state.config)
    return _replay_from(replay, state, registry, stop_turn=None)


def demographics(replay: Replay, statistic: str) -> list[list[int]]:
    """Per-agent series (list of 6 lists, one value per recorded turn)."""
    if statistic not in DEMOGRAPHICS_STATS:
        raise UnknownStatistic(
            f"unknown statistic {statistic!r}; known: {', '.join(DEMOGRAPHICS_STATS)}")
    table = replay.demographics_table[statistic]
    return [[row[a] for row in table] for a in range(6)]


def demographics_from_playback(replay: Replay, rule_tables=None) -> dict[str, list[list[int]]]:
    """Recompute the demographics table by re-stepping the whole game;
    the differential oracle for the footer table."""
    state = decode_state(replay.keyframes[1], rule_tables)
    registry = ActionSpaceRegistry(state.config)
    rows: list[dict[str, list[int]]] = []
    last_turn = state.turn
    for step_index, agent, selected, _reward, _events in replay.steps:
        plan = ActionPlan(registry, selected)
        engine.advance_state_inplace(state, agent, plan, verify=False)
        if state.turn != last_turn:
            rows.append(demographics_row(state))
            last_turn = state.turn
    return {stat: [[row[stat][a] for row in rows] for a in range(6)]
            for stat in DEMOGRAPHICS_STATS}


def demographics_csv(replay: Replay, statistic: str) -> str:
    series = demographics(replay, statistic)
    lines = ["turn," + ",".join(f"agent_{a}" for a in range(6))]
    for t in range(len(series[0])):
        lines.append(f"{t + 1}," + ",".join(str(series[a][t]) for a in range(6)))
    return "\n".join(lines) + "\n"
