"""Batched, deterministic multi-game stepping.

A `SimHandle` owns a batch of games and steps them one agent at a time:
sanitize -> advance -> reward -> next agent's observation. Finished games
auto-reset to a fresh copy of their initial state with RNG substreams
re-derived from (master seed, slot, episode), so no stream is ever reused.

Parallelism is game-level: the worker-pool strategy forks one process per
worker, each owning a fixed slice of the batch. Per-game stepping is the
same code serial and pooled, which is what makes the two execution modes
trajectory-identical.
"""

from __future__ import annotations

import multiprocessing as mp
import os
import time
from dataclasses import dataclass, field

from . import engine, replay as replay_mod
from .actions import ActionMaskSet, ActionSpaceRegistry, sanitize_plan
from .observation import ObservationRegistry, build_observation, encode_observation
from .rng import combine
from .serialize import state_digest
from .state import GameState, make_rng_streams


class EmptyBatch(ValueError):
    pass


class BadStrategy(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class PolicyFailure(RuntimeError):
    pass


def parse_strategy(strategy) -> int:
    """Strategy descriptor -> worker count. Accepts "serial",
    "worker-pool(n)", or a positive integer."""
    if strategy is None:
        return int(os.environ.get("TERRA_WORKERS", "1"))
    if isinstance(strategy, int):
        if strategy < 1:
            raise BadStrategy(f"worker count must be >= 1, got {strategy}")
        return strategy
    text = str(strategy).strip().lower()
    if text in ("serial", "", "1"):
        return 1
    if text.startswith("worker-pool(") and text.endswith(")"):
        try:
            n = int(text[len("worker-pool("):-1])
        except ValueError:
            raise BadStrategy(f"bad worker-pool descriptor {strategy!r}") from None
        if n < 1:
            raise BadStrategy("worker-pool needs at least one worker")
        return n
    raise BadStrategy(f"unknown strategy {strategy!r} (serial | worker-pool(n))")


@dataclass
class StepResult:
    obs_bytes: bytes
    reward: float
    done: bool
    selected: list[int]
    turn_id: int
    turn: int
    step_index: int
    episode: int
    events: list[dict]
    mask_bits: list[int]
    finished_episode: dict | None = None
    digest: str | None = None


@dataclass
class GameSlot:
    """One game owned by one worker (or the serial loop)."""
    index: int
    template: GameState
    master_seed: int
    reward_mode: str
    registry: ActionSpaceRegistry
    obs_registry: ObservationRegistry
    record_dir: str | None = None
    compute_digests: bool = False
    state: GameState = None
    episode: int = 0
    returns: list[float] = field(default_factory=lambda: [0.0] * 6)
    recorder: replay_mod.ReplayRecorder | None = None
    _mask_cache: tuple | None = None     # (step_index, ActionMaskSet)

    def __post_init__(self) -> None:
        if self.state is None:
            self.state = self.template.clone()
        if self.record_dir:
            self.recorder = replay_mod.ReplayRecorder(self.state)

    def reset(self) -> None:
        self.episode += 1
        fresh = self.template.clone()
        fresh.rng = make_rng_streams(combine(self.master_seed, self.index, self.episode))
        self.state = fresh
        self.returns = [0.0] * 6
        self._mask_cache = None
        if self.record_dir:
            self.recorder = replay_mod.ReplayRecorder(self.state)

    def masks(self) -> ActionMaskSet:
        cached = self._mask_cache
        if cached is not None and cached[0] == self.state.step_index:
            return cached[1]
        masks = engine.legal_action_masks(self.state, self.state.active_agent,
                                          self.registry)
        self._mask_cache = (self.state.step_index, masks)
        return masks

    def finalize_recording(self) -> str | None:
        """Flush an in-progress recording as a truncated replay."""
        if self.recorder is None or not self.recorder.steps:
            return None
        blob = self.recorder.finalize(truncated=True)
        path = os.path.join(self.record_dir,
                            f"game_{self.index:03d}_ep{self.episode:03d}_partial.tnrp")
        with open(path, "wb") as f:
            f.write(blob)
        return path

    def step(self, flat_action: list[int]) -> StepResult:
        state = self.state
        agent = state.active_agent
        masks = self.masks()
        plan, selected = sanitize_plan(flat_action, masks)
        prev_decided = state.victory.decided
        step_index = state.step_index
        events = engine.advance_state_inplace(state, agent, plan, masks)
        reward = _reward_from_events(state, agent, self.reward_mode, prev_decided)
        self.returns[agent] += reward
        done = state.victory.terminal
        if self.recorder is not None:
            self.recorder.record_step(step_index, agent, selected, reward,
                                      events, state)
        finished = None
        if done:
            finished = {
                "slot": self.index,
                "episode": self.episode,
                "turns": state.turn,
                "victory": state.victory.kind,
                "winner": state.victory.winner,
                "returns": list(self.returns),
                "final_digest": state_digest(state),
            }
            if self.recorder is not None:
                blob = self.recorder.finalize()
                path = os.path.join(self.record_dir,
                                    f"game_{self.index:03d}_ep{self.episode:03d}.tnrp")
                with open(path, "wb") as f:
                    f.write(blob)
                finished["replay"] = path
            self.reset()
        nxt = self.state
        next_masks = self.masks()
        obs = build_observation(nxt, nxt.active_agent, self.obs_registry)
        return StepResult(
            obs_bytes=encode_observation(obs),
            reward=reward,
            done=done,
            selected=selected,
            turn_id=nxt.active_agent,
            turn=nxt.turn,
            step_index=nxt.step_index,
            episode=self.episode,
            events=[ev.to_json() for ev in events],
            mask_bits=list(next_masks.bits),
            finished_episode=finished,
            digest=state_digest(nxt) if self.compute_digests else None,
        )


def _reward_from_events(state: GameState, agent: int, mode: str,
                        prev_decided: bool) -> float:
    if mode == "sparse":
        return 1.0 if (state.victory.decided and not prev_decided
                       and state.victory.winner == agent) else 0.0
    weights = state.config.reward_weights
    return float(sum(weights.get(ev.kind, 0.0)
                     for ev in state.event_log if ev.agent == agent))


def _worker_main(conn, slots: list[GameSlot]) -> None:
    games = {s.index: s for s in slots}
    while True:
        try:
            cmd, payload = conn.recv()
        except EOFError:
            return
        if cmd == "step":
            t0 = time.perf_counter()
            out = [(idx, games[idx].step(flat)) for idx, flat in payload]
            busy = time.perf_counter() - t0
            conn.send(("ok", (out, busy)))
        elif cmd == "masks":
            conn.send(("ok", [(idx, list(games[idx].masks().bits)) for idx in payload]))
        elif cmd == "digest":
            conn.send(("ok", [(idx, state_digest(games[idx].state)) for idx in payload]))
        elif cmd == "returns":
            conn.send(("ok", [(idx, list(games[idx].returns)) for idx in payload]))
        elif cmd == "finalize_replays":
            conn.send(("ok", [(idx, games[idx].finalize_recording()) for idx in payload]))
        elif cmd == "snapshot":
            from .serialize import encode_state
            conn.send(("ok", [(idx, encode_state(games[idx].state)) for idx in payload]))
        elif cmd == "stop":
            conn.send(("ok", None))
            return


@dataclass
class MetricsReport:
    num_games: int
    workers: int
    env_steps: int
    wall_time: float
    steps_per_sec: float
    worker_utilization: list[float]
    episodes: list[dict]
    final_digests: list[str]
    per_agent_returns: list[list[float]]

    def to_json(self) -> dict:
        return {
            "num_games": self.num_games,
            "workers": self.workers,
            "env_steps": self.env_steps,
            "wall_time": round(self.wall_time, 4),
            "steps_per_sec": round(self.steps_per_sec, 2),
            "worker_utilization": [round(u, 4) for u in self.worker_utilization],
            "episodes": self.episodes,
            "final_digests": self.final_digests,
            "per_agent_returns": self.per_agent_returns,
        }

    def digest(self) -> str:
        import hashlib
        import json
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True)
                              .encode()).hexdigest()


class SimHandle:
    """A batch of games plus the machinery to step them."""

    def __init__(self, initial_states: list[GameState], workers: int, seed: int,
                 record_dir: str | None = None, compute_digests: bool = False) -> None:
        if not initial_states:
            raise EmptyBatch("need at least one initial state")
        self.config = initial_states[0].config
        self.registry = ActionSpaceRegistry(self.config)
        self.obs_registry = ObservationRegistry(self.config)
        self.master_seed = seed
        self.num_games = len(initial_states)
        self.workers = max(1, min(workers, self.num_games))
        self.record_dir = record_dir
        if record_dir:
            os.makedirs(record_dir, exist_ok=True)
        self.slots = [GameSlot(i, st, seed, self.config.reward_mode,
                               self.registry, self.obs_registry,
                               record_dir, compute_digests)
                      for i, st in enumerate(initial_states)]
        self.players_turn_id = [s.state.active_agent for s in self.slots]
        self.episode_log: list[dict] = []
        self.obs_cache: list[bytes] = []        # most recent observation batch
        self.last_masks: list[list[int]] = [list(s.masks().bits) for s in self.slots]
        self.env_steps = 0
        self.busy_time: list[float] = [0.0] * self.workers
        self._procs: list = []
        self._conns: list = []
        self._assignment: list[list[int]] = []
        if self.workers > 1:
            self._spawn_workers()

    def _spawn_workers(self) -> None:
        ctx = mp.get_context("fork")
        chunks: list[list[GameSlot]] = [[] for _ in range(self.workers)]
        self._assignment = [[] for _ in range(self.workers)]
        for i, slot in enumerate(self.slots):
            w = i % self.workers
            chunks[w].append(slot)
            self._assignment[w].append(i)
        for w in range(self.workers):
            parent, child = ctx.Pipe()
            proc = ctx.Process(target=_worker_main, args=(child, chunks[w]),
                               daemon=True)
            proc.start()
            child.close()
            self._conns.append(parent)
            self._procs.append(proc)

    def initial_observations(self) -> list[bytes]:
        self.obs_cache = [encode_observation(
            build_observation(s.state, s.state.active_agent, self.obs_registry))
            for s in self.slots]
        return list(self.obs_cache)

    def env_step(self, actions: list[list[int]]):
        """One POSG step for every game. Returns (obs, rewards, dones,
        selected_actions, players_turn_id)."""
        if len(actions) != self.num_games:
            raise ShapeMismatch(
                f"need {self.num_games} actions, got {len(actions)}")
        for a in actions:
            if len(a) != len(self.registry):
                raise ShapeMismatch(
                    f"each action needs {len(self.registry)} sub-actions")
        results: list[StepResult | None] = [None] * self.num_games
        if self.workers == 1:
            t0 = time.perf_counter()
            for i, slot in enumerate(self.slots):
                results[i] = slot.step(actions[i])
            self.busy_time[0] += time.perf_counter() - t0
        else:
            for w, conn in enumerate(self._conns):
                payload = [(i, actions[i]) for i in self._assignment[w]]
                conn.send(("step", payload))
            for w, conn in enumerate(self._conns):
                status, (out, busy) = conn.recv()
                self.busy_time[w] += busy
                for idx, res in out:
                    results[idx] = res
                    # Mirror episode/returns bookkeeping on the coordinator.
                    self.slots[idx].episode = res.episode
        self.env_steps += 1
        obs, rewards, dones, selected = [], [], [], []
        for i, res in enumerate(results):
            obs.append(res.obs_bytes)
            rewards.append(res.reward)
            dones.append(res.done)
            selected.append(res.selected)
            self.players_turn_id[i] = res.turn_id
            self.last_masks[i] = res.mask_bits
            if res.finished_episode:
                self.episode_log.append(res.finished_episode)
        self.obs_cache = obs
        return obs, rewards, dones, selected, list(self.players_turn_id)

    def digests(self) -> list[str]:
        if self.workers == 1:
            return [state_digest(s.state) for s in self.slots]
        return self._gather("digest", "")

    def current_returns(self) -> list[list[float]]:
        if self.workers == 1:
            return [list(s.returns) for s in self.slots]
        return self._gather("returns", [0.0] * 6)

    def _gather(self, cmd: str, default):
        out = [default] * self.num_games
        for w, conn in enumerate(self._conns):
            conn.send((cmd, self._assignment[w]))
            _status, pairs = conn.recv()
            for idx, value in pairs:
                out[idx] = value
        return out

    def finalize_recordings(self) -> list[str]:
        """Write truncated replays for games still in flight."""
        if not self.record_dir:
            return []
        if self.workers == 1:
            return [p for slot in self.slots
                    if (p := slot.finalize_recording()) is not None]
        return [p for p in self._gather("finalize_replays", None) if p]

    def close(self) -> None:
        for conn in self._conns:
            try:
                conn.send(("stop", None))
                conn.recv()
            except (BrokenPipeError, EOFError):
                pass
        for proc in self._procs:
            proc.join(timeout=5)
        self._conns = []
        self._procs = []

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def build_simulator(initial_states: list[GameState], strategy=None, seed: int = 0,
                    record_dir: str | None = None, compute_digests: bool = False):
    """Returns (handle, initial observation batch for each game's first agent)."""
    workers = parse_strategy(strategy)
    handle = SimHandle(initial_states, workers, seed, record_dir, compute_digests)
    return handle, handle.initial_observations()


@dataclass
class PolicyBatch:
    """What a policy callback sees each step."""
    slots: list[int]
    episodes: list[int]
    step_indices: list[int]
    turn_ids: list[int]
    obs: list[bytes]
    masks: list[ActionMaskSet]
    sizes: list[int]


def run_selfplay_batch(handle: SimHandle, policy, num_steps: int = 300) -> MetricsReport:
    """Drive the canonical loop: num_steps game turns x 6 agent steps.
    Deterministic whenever the policy is."""
    obs = handle.initial_observations()
    episodes = [s.episode for s in handle.slots]
    step_indices = [s.state.step_index if handle.workers == 1 else 0
                    for s in handle.slots]
    t0 = time.perf_counter()
    handle.busy_time = [0.0] * handle.workers
    total_env_steps = 0
    for _game_step in range(num_steps):
        for _agent_step in range(6):
            batch = PolicyBatch(
                slots=list(range(handle.num_games)),
                episodes=list(episodes),
                step_indices=list(step_indices),
                turn_ids=list(handle.players_turn_id),
                obs=obs,
                masks=[ActionMaskSet(handle.registry, bits)
                       for bits in handle.last_masks],
                sizes=list(handle.registry.sizes),
            )
            try:
                actions = policy(batch)
            except Exception as err:
                raise PolicyFailure(f"policy failed on step {total_env_steps}: {err}") from err
            if len(actions) != handle.num_games:
                raise PolicyFailure(
                    f"policy returned {len(actions)} actions for {handle.num_games} games")
            obs, rewards, dones, selected, turn_ids = handle.env_step(actions)
            for i in range(handle.num_games):
                if dones[i]:
                    episodes[i] += 1
                    step_indices[i] = 0
                else:
                    step_indices[i] += 1
            total_env_steps += 1
    wall = time.perf_counter() - t0
    per_agent = [[round(r, 6) for r in rs] for rs in handle.current_returns()]
    report = MetricsReport(
        num_games=handle.num_games,
        workers=handle.workers,
        env_steps=total_env_steps,
        wall_time=wall,
        steps_per_sec=total_env_steps * handle.num_games / wall if wall > 0 else 0.0,
        worker_utilization=[b / wall if wall > 0 else 0.0 for b in handle.busy_time],
        episodes=list(handle.episode_log),
        final_digests=handle.digests(),
        per_agent_returns=per_agent,
    )
    return report
