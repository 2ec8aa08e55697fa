"""Seeded generative rollouts of the closed-loop process and batch sampling.

Trajectory j of iteration tau draws from the substream keyed by
(master_seed, tau, j), so a sampled batch is independent of batch size,
worker count, and execution order. The generative convention: the
observation is emitted at the source state under the chosen action, then
the state transitions.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .model import ProductPomdp
from .oomodel import ObservableOperators
from .policy import FscPolicy, softmax_table


@dataclass(frozen=True)
class RngSpec:
    """Master seed plus the substream derivation rule."""

    master_seed: int

    def stream(self, tau: int, j: int) -> np.random.Generator:
        return np.random.default_rng((self.master_seed, tau, j))


@dataclass(frozen=True)
class TrajectoryRecord:
    """One sampled run; the post-horizon state is kept for diagnostics only."""

    vstates: tuple[int, ...]   # v_0 .. v_{T+1}
    acts: tuple[int, ...]      # a_0 .. a_T
    obs: tuple[int, ...]       # o_0 .. o_T
    log_policy: float


@dataclass(frozen=True, eq=False)
class SamplingTables:
    """Cumulative kernels in source-major layout for inverse-CDF draws."""

    cum_init: np.ndarray    # (N,)
    cum_trans: np.ndarray   # (N, A, N), cumulative over the target axis
    cum_emit: np.ndarray    # (N, A, O), cumulative over observations

    @staticmethod
    def from_product(p: ProductPomdp) -> "SamplingTables":
        return SamplingTables(cum_init=p.init.cumsum(),
                              cum_trans=p.trans.cumsum(axis=-1),
                              cum_emit=p.emit.cumsum(axis=-1))

    @staticmethod
    def from_operators(oo: ObservableOperators) -> "SamplingTables":
        return SamplingTables(cum_init=oo.init.cumsum(),
                              cum_trans=np.ascontiguousarray(
                                  oo.trans.transpose(2, 0, 1)).cumsum(axis=-1),
                              cum_emit=np.ascontiguousarray(
                                  oo.obs.transpose(2, 0, 1)).cumsum(axis=-1))


def _draw(cum: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cum, u, side="right")), len(cum) - 1)


def _sample_range(tables: SamplingTables, psi: np.ndarray, mem_next: np.ndarray,
                  T: int, master_seed: int, tau: int, j0: int, j1: int,
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Sample trajectories j0..j1-1; the core shared by every execution mode."""
    m = j1 - j0
    vstates = np.empty((m, T + 2), dtype=np.intp)
    acts = np.empty((m, T + 1), dtype=np.intp)
    obs = np.empty((m, T + 1), dtype=np.intp)
    logpi = np.zeros(m)
    cum_psi = psi.cumsum(axis=-1)
    with np.errstate(divide="ignore"):   # zero-probability actions are never drawn
        log_psi = np.log(psi)
    for row, j in enumerate(range(j0, j1)):
        rng = np.random.default_rng((master_seed, tau, j))
        u0 = rng.random()
        us = rng.random((T + 1, 3))
        v = _draw(tables.cum_init, u0)
        x = 0
        lp = 0.0
        for t in range(T + 1):
            a = _draw(cum_psi[x], us[t, 0])
            o = _draw(tables.cum_emit[v, a], us[t, 1])
            v2 = _draw(tables.cum_trans[v, a], us[t, 2])
            lp += log_psi[x, a]
            vstates[row, t] = v
            acts[row, t] = a
            obs[row, t] = o
            x = mem_next[x, o]
            v = v2
        vstates[row, T + 1] = v
        logpi[row] = lp
    return vstates, acts, obs, logpi


_WORKER_STATE: dict = {}


def _worker_init(tables: SamplingTables, mem_next: np.ndarray, T: int,
                 master_seed: int) -> None:
    _WORKER_STATE.update(tables=tables, mem_next=mem_next, T=T, master_seed=master_seed)


def _worker_task(args):
    psi, tau, j0, j1 = args
    s = _WORKER_STATE
    return _sample_range(s["tables"], psi, s["mem_next"], s["T"], s["master_seed"],
                         tau, j0, j1)


class BatchSampler:
    """Reusable sampler bound to one model, horizon, and master seed.

    With workers > 1 a process pool holds the static tables; per batch only
    the current action-distribution table crosses the process boundary.
    Chunk boundaries never affect the draws, so every worker count yields
    the same batch.
    """

    def __init__(self, tables: SamplingTables, pol: FscPolicy, T: int,
                 rng: RngSpec, workers: int = 1):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.tables = tables
        self.mem_next = pol.mem_next
        self.T = T
        self.rng = rng
        self.workers = workers
        self._pool = None
        if workers > 1:
            self._pool = ProcessPoolExecutor(
                max_workers=workers, initializer=_worker_init,
                initargs=(tables, pol.mem_next, T, rng.master_seed))

    def sample(self, psi: np.ndarray, tau: int, M: int):
        """Arrays (vstates, acts, obs, log_policy) for trajectories 0..M-1."""
        if self._pool is None:
            return _sample_range(self.tables, psi, self.mem_next, self.T,
                                 self.rng.master_seed, tau, 0, M)
        bounds = np.linspace(0, M, self.workers + 1, dtype=int)
        chunks = [(psi, tau, int(a), int(b)) for a, b in zip(bounds, bounds[1:]) if b > a]
        parts = list(self._pool.map(_worker_task, chunks))
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self) -> "BatchSampler":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def sample_trajectory(pol: FscPolicy, p: ProductPomdp, T: int,
                      stream: np.random.Generator) -> TrajectoryRecord:
    """One rollout: v0 ~ init; per step draw action, observation, successor.

    ``stream`` should come from RngSpec.stream so reruns are bit-identical.
    """
    if T < 0:
        raise ValueError("horizon T must be >= 0")
    tables = SamplingTables.from_product(p)
    psi = softmax_table(pol.theta)
    cum_psi = psi.cumsum(axis=-1)
    with np.errstate(divide="ignore"):
        log_psi = np.log(psi)
    u0 = stream.random()
    us = stream.random((T + 1, 3))
    v = _draw(tables.cum_init, u0)
    x = 0
    vstates, acts, obs = [v], [], []
    lp = 0.0
    for t in range(T + 1):
        a = _draw(cum_psi[x], us[t, 0])
        o = _draw(tables.cum_emit[v, a], us[t, 1])
        v2 = _draw(tables.cum_trans[v, a], us[t, 2])
        lp += log_psi[x, a]
        acts.append(a)
        obs.append(o)
        x = pol.mem_next[x, o]
        v = v2
        vstates.append(v)
    return TrajectoryRecord(vstates=tuple(vstates), acts=tuple(acts),
                            obs=tuple(obs), log_policy=float(lp))


def sample_batch(pol: FscPolicy, p: ProductPomdp, T: int, M: int, rng: RngSpec,
                 tau: int, workers: int = 1) -> list[TrajectoryRecord]:
    """M trajectories from independent substreams, ordered by index."""
    if M < 1:
        raise ValueError("batch size M must be >= 1")
    tables = SamplingTables.from_product(p)
    psi = softmax_table(pol.theta)
    with BatchSampler(tables, pol, T, rng, workers=workers) as sampler:
        vstates, acts, obs, logpi = sampler.sample(psi, tau, M)
    return [TrajectoryRecord(vstates=tuple(int(v) for v in vstates[k]),
                             acts=tuple(int(a) for a in acts[k]),
                             obs=tuple(int(o) for o in obs[k]),
                             log_policy=float(logpi[k]))
            for k in range(M)]


def dump_trajectories(records: Sequence[TrajectoryRecord], fh: IO[str]) -> None:
    """One JSON object per line: {"v": [...], "a": [...], "o": [...], "logpi": x}."""
    for r in records:
        fh.write(json.dumps({"v": list(r.vstates), "a": list(r.acts),
                             "o": list(r.obs), "logpi": r.log_policy}))
        fh.write("\n")
