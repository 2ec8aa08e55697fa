"""Suffix-K observation-memory controller with softmax action outputs.

Memory states are the observation strings of length at most K; reading an
observation keeps the last K symbols. The policy parameter is one real
number per (memory state, action), and the output distribution at a memory
state is the softmax over its action block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Sequence

import numpy as np

from .errors import ConfigError, InputError

MEMORY_STATE_CAP = 100_000


@dataclass(eq=False)
class FscPolicy:
    """Finite-state controller over observation suffixes of length <= k.

    theta has one row per memory state and one column per action;
    mem_next[x, o] is the deterministic memory transition table.
    """

    k: int
    observations: tuple[str, ...]
    actions: tuple[str, ...]
    theta: np.ndarray
    mem_states: tuple[tuple[int, ...], ...] = field(repr=False)
    mem_index: dict = field(repr=False)
    mem_next: np.ndarray = field(repr=False)

    @property
    def n_memory(self) -> int:
        return len(self.mem_states)

    def obs_index(self, name: str) -> int:
        try:
            return self.observations.index(name)
        except ValueError:
            raise InputError(f"unknown observation {name!r}") from None


def make_policy(k: int, observations: Sequence[str], actions: Sequence[str],
                cap: int = MEMORY_STATE_CAP) -> FscPolicy:
    """Policy with all-zero parameters (uniform action distributions).

    Materializes every observation string of length <= k; refuses when the
    count would exceed ``cap``.
    """
    if k < 0:
        raise ConfigError("memory length k must be >= 0")
    no = len(observations)
    count = sum(no ** j for j in range(k + 1))
    if count > cap:
        raise ConfigError(
            f"suffix memory needs {count} states for k={k}, |O|={no}; cap is {cap}")
    mem_states: list[tuple[int, ...]] = []
    for j in range(k + 1):
        mem_states.extend(iproduct(range(no), repeat=j))
    mem_index = {x: i for i, x in enumerate(mem_states)}
    mem_next = np.empty((len(mem_states), no), dtype=np.intp)
    for x, xs in enumerate(mem_states):
        for o in range(no):
            mem_next[x, o] = mem_index[(xs + (o,))[-k:] if k else ()]
    theta = np.zeros((len(mem_states), len(actions)))
    return FscPolicy(k=k, observations=tuple(observations), actions=tuple(actions),
                     theta=theta, mem_states=tuple(mem_states), mem_index=mem_index,
                     mem_next=mem_next)


def _resolve_memory(pol: FscPolicy, x: Sequence[str] | tuple[int, ...]) -> int:
    key = tuple(pol.obs_index(o) if isinstance(o, str) else int(o) for o in x)
    try:
        return pol.mem_index[key]
    except KeyError:
        raise InputError(f"unknown memory state {tuple(x)!r}") from None


def memory_update(pol: FscPolicy, x: Sequence[str], o: str) -> tuple[str, ...]:
    """Next memory state: the last (up to) k observations of x . o."""
    xi = _resolve_memory(pol, x)
    nxt = pol.mem_states[pol.mem_next[xi, pol.obs_index(o)]]
    return tuple(pol.observations[i] for i in nxt)


def softmax_table(theta: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    z = theta - theta.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def action_dist(pol: FscPolicy, x: Sequence[str]) -> np.ndarray:
    """Softmax action distribution psi(. | x)."""
    return softmax_table(pol.theta[_resolve_memory(pol, x)])


def policy_prob(pol: FscPolicy, history: Sequence[str]) -> np.ndarray:
    """Action distribution after folding an observation history from the root."""
    xi = 0
    for o in history:
        xi = pol.mem_next[xi, pol.obs_index(o)]
    return softmax_table(pol.theta[xi])


def memory_path(pol: FscPolicy, obs: Sequence[int]) -> np.ndarray:
    """Memory-state index before each decision: x_0, then after o_0, o_1, ..."""
    path = np.empty(len(obs) + 1, dtype=np.intp)
    path[0] = 0
    xi = 0
    for t, o in enumerate(obs):
        xi = pol.mem_next[xi, o]
        path[t + 1] = xi
    return path


def score(pol: FscPolicy, obs: Sequence[int], acts: Sequence[int]) -> np.ndarray:
    """Gradient of the log-probability of the action choices along (obs, acts).

    At each step the visited memory state's block receives the softmax
    score: indicator of the chosen action minus the action distribution.
    The observation/action sum decomposes per step because the memory
    transition is deterministic.
    """
    if len(obs) != len(acts):
        raise InputError(f"observation/action length mismatch: {len(obs)} vs {len(acts)}")
    na = len(pol.actions)
    for t, a in enumerate(acts):
        if not 0 <= a < na:
            raise InputError(f"unknown action index {a} at step {t}")
    path = memory_path(pol, obs)[:-1]
    psi = softmax_table(pol.theta)
    out = np.zeros_like(pol.theta)
    np.add.at(out, (path, np.asarray(acts, dtype=np.intp)), 1.0)
    counts = np.zeros(pol.n_memory)
    np.add.at(counts, path, 1.0)
    out -= counts[:, None] * psi
    return out


def save_policy(pol: FscPolicy, path: str) -> None:
    """Write the checkpoint JSON; memory states are space-joined observation names."""
    theta = {}
    for x, xs in enumerate(pol.mem_states):
        name = " ".join(pol.observations[i] for i in xs)
        theta[name] = {a: float(pol.theta[x, ai]) for ai, a in enumerate(pol.actions)}
    raw = {"k": pol.k, "observations": list(pol.observations),
           "actions": list(pol.actions), "theta": theta}
    with open(path, "w") as fh:
        json.dump(raw, fh, indent=1)
        fh.write("\n")


def load_policy(path: str) -> FscPolicy:
    with open(path) as fh:
        raw = json.load(fh)
    try:
        pol = make_policy(raw["k"], raw["observations"], raw["actions"])
        for name, block in raw["theta"].items():
            xs = tuple(name.split()) if name else ()
            xi = _resolve_memory(pol, xs)
            for a, val in block.items():
                try:
                    ai = pol.actions.index(a)
                except ValueError:
                    raise ConfigError(f"{path}: unknown action {a!r} in theta") from None
                pol.theta[xi, ai] = float(val)
    except KeyError as exc:
        raise ConfigError(f"{path}: missing required policy field {exc}") from None
    except InputError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return pol
