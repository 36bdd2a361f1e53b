"""`build_simulator` and the step function, shaped like the canonical
training-loop snippet:

    (env_step_fn, games, obs_spaces, episode_metrics,
     players_turn_id, obs, GLOBAL_MESH, sharding) = build_simulator(...)
    ...
    (games, obs_spaces, episode_metrics, new_players_turn_id,
     next_obs, rewards, done_flags, selected_actions) = env_step_fn(
        games, actions, obs_spaces, episode_metrics, players_turn_id)

Observations arrive as dicts of numpy arrays matching the service's
observation registry. GLOBAL_MESH and sharding are None placeholders: this
build batches on CPU workers, not device meshes.
"""

from __future__ import annotations

import struct

import numpy as np

from ._mix import random_flat_action
from ._wire import WireClient, b64, connect_service, shutdown_spawned

OBS_FORMAT_VERSION = 1


class SimulatorHandle:
    """Connection + session pair backing one simulator."""

    def __init__(self, client: WireClient, session: str, obs_space: list[dict],
                 action_sizes: list[int], seed: int) -> None:
        self.client = client
        self.session = session
        self.obs_space = obs_space
        self.action_sizes = action_sizes
        self.seed = seed

    def step(self, actions) -> dict:
        reply = self.client.request("batch_step",
                                    {"actions": [list(map(int, a)) for a in actions]},
                                    session=self.session)
        return reply["payload"]

    def digests(self) -> list[str]:
        reply = self.client.request("batch_digests", {}, session=self.session)
        return reply["payload"]["digests"]

    def close(self) -> None:
        try:
            self.client.request("close_session", {}, session=self.session)
        except (RuntimeError, ConnectionError):
            pass
        self.client.close()


def _normalize_seed(seed) -> int:
    """Accept a plain int or an RNG-key-shaped array (uses its last word)."""
    if isinstance(seed, int):
        return seed
    try:
        return int(seed)
    except (TypeError, ValueError):
        pass
    arr = np.asarray(seed).ravel()
    return int(arr[-1])


def _normalize_game(payload) -> bytes:
    if isinstance(payload, (bytes, bytearray)):
        return bytes(payload)
    raise TypeError(f"a loaded .gamestate payload must be bytes, got {type(payload)!r}")


def decode_observation(blob: bytes, obs_space: list[dict]) -> dict:
    """Registry-ordered binary layout -> dict of numpy arrays. Non-map
    elements also carry a `<name>__valid` mask array."""
    version, count = struct.unpack_from("<HI", blob, 0)
    if version != OBS_FORMAT_VERSION or count != len(obs_space):
        raise ValueError("observation blob does not match the registry")
    pos = 6
    out: dict[str, np.ndarray] = {}
    for el in obs_space:
        n = el["length"]
        if el["kind"] != "map":
            out[el["name"] + "__valid"] = np.frombuffer(
                blob, dtype=np.uint8, count=n, offset=pos).copy()
            pos += n
        out[el["name"]] = np.frombuffer(blob, dtype="<i4", count=n,
                                        offset=pos).copy()
        pos += 4 * n
    return out


def build_simulator(games, distributed_strategy=None, seed=0):
    """Load a batch of games into the service and return the loop bundle."""
    if not games:
        raise ValueError("need at least one loaded .gamestate payload")
    seed_int = _normalize_seed(seed)
    blobs = [b64(_normalize_game(g)) for g in games]
    client = connect_service()
    client.request("hello", {"protocol": 1})
    created = client.request("batch_create", {
        "games_b64": blobs,
        "strategy": distributed_strategy,
        "seed": seed_int,
    })
    payload = created["payload"]
    handle = SimulatorHandle(client, payload["session"], payload["obs_space"],
                             payload["action_sizes"], seed_int)
    obs_spaces = {
        "elements": payload["obs_space"],
        "action_sizes": payload["action_sizes"],
        "seed": seed_int,
        "session": payload["session"],
    }
    episode_metrics = payload["metrics"]
    players_turn_id = payload["players_turn_id"]
    obs = [decode_observation(_unb64(o), payload["obs_space"])
           for o in payload["obs_b64"]]
    game_tokens = list(range(len(games)))

    def env_step_fn(games_arg, actions, obs_spaces_arg, episode_metrics_arg,
                    players_turn_id_arg):
        result = handle.step(actions)
        next_obs = [decode_observation(_unb64(o), handle.obs_space)
                    for o in result["obs_b64"]]
        return (games_arg, obs_spaces_arg, result["metrics"],
                result["players_turn_id"], next_obs, result["rewards"],
                result["dones"], result["selected_actions"])

    env_step_fn.handle = handle
    return (env_step_fn, game_tokens, obs_spaces, episode_metrics,
            players_turn_id, obs, None, None)


def _unb64(text: str) -> bytes:
    import base64
    return base64.b64decode(text.encode("ascii"))


def sample_random_actions(obs_spaces: dict, obs: list[dict],
                          episode_metrics: dict) -> list[list[int]]:
    """The uniform random baseline, derived exactly like the native CLI's
    `--policy random`: mix(seed, slot, episode, step_index, sub-space) over
    the full sub-space size, relying on sanitization for legality."""
    sizes = obs_spaces["action_sizes"]
    seed = obs_spaces["seed"]
    episodes = episode_metrics["episodes_completed"]
    actions = []
    for slot, ob in enumerate(obs):
        step_index = int(ob["step_index"][0])
        actions.append(random_flat_action(seed, slot, episodes[slot],
                                          step_index, sizes))
    return actions


def shutdown_all_services() -> None:
    shutdown_spawned()
