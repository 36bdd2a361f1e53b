"""Scripted baseline policies for self-play harnesses.

These live with the operator tooling, not the rules engine: the engine
stays policy-free. Both baselines are pure functions of their inputs, so
runs are reproducible under any batching strategy.

The random baseline draws each sub-action uniformly from the *full*
sub-space (not the mask) and relies on sanitization's pass substitution;
its derivation `mix(seed, slot, episode, step, subspace) % size` is part
of the cross-component contract (the environment bindings reproduce it).
"""

from __future__ import annotations

from .rng import combine

RANDOM_POLICY_TAG = 0x52506F6C          # namespaces the policy's RNG domain


def random_flat_action(seed: int, slot: int, episode: int, step_index: int,
                       sizes: list[int]) -> list[int]:
    return [combine(RANDOM_POLICY_TAG, seed, slot, episode, step_index, k) % size
            for k, size in enumerate(sizes)]


def greedy_flat_action(seed: int, slot: int, episode: int, step_index: int,
                       masks) -> list[int]:
    """Expansion-minded scripted baseline: founds cities when possible,
    researches the cheapest available tech, keeps cities producing, and
    otherwise falls back to seeded random legal choices."""
    registry = masks.registry
    flat = [0] * len(registry)
    for k, sub in enumerate(registry.subspaces):
        legal = masks.legal_indices(k)
        if len(legal) == 1:
            continue
        choice = 0
        if sub.kind == "unit":
            found = 1 + 37 + 0      # found_city ability index
            if found in legal:
                choice = found
            else:
                moves = [i for i in legal if 1 <= i <= 37]
                if moves:
                    r = combine(RANDOM_POLICY_TAG + 1, seed, slot, episode, step_index, k)
                    choice = moves[r % len(moves)]
        elif sub.kind == "city_prod":
            choice = legal[1]       # first eligible item, stable order
        elif sub.kind == "research":
            rt = registry.config.rule_tables
            choice = min(legal[1:], key=lambda i: (rt.techs[i - 1].science_cost, i))
        elif sub.kind == "policy":
            choice = legal[1]
        elif sub.kind == "congress":
            choice = 1 + slot % 6 if (1 + slot % 6) in legal else legal[1]
        flat[k] = choice
    return flat


def make_policy(name: str, seed: int):
    """Policy callback for run_selfplay_batch: batch -> list of flat actions."""
    if name == "random":
        def random_policy(batch):
            return [random_flat_action(seed, batch.slots[i], batch.episodes[i],
                                       batch.step_indices[i], batch.sizes)
                    for i in range(len(batch.slots))]
        return random_policy
    if name == "greedy":
        def greedy_policy(batch):
            return [greedy_flat_action(seed, batch.slots[i], batch.episodes[i],
                                       batch.step_indices[i], batch.masks[i])
                    for i in range(len(batch.slots))]
        return greedy_policy
    raise ValueError(f"unknown policy {name!r} (expected random|greedy)")
