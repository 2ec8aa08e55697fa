"""Exact and sampled objective gradients, plus the gradient-descent loop.

Both gradient routes weight the score of each record by its per-record
entropy (or success posterior): exactly over all records, or as a batch
mean over sampled trajectories. The training loop is plain fixed-step
descent on entropy minus alpha times success probability, with fresh
batches every iteration and per-iteration report rows.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import IO, Sequence

import numpy as np

from .errors import ConfigError, EvidenceImpossibleError, NonFiniteGradientError
from .objective import ENUMERATION_CAP, entropy_given_y, enumerate_records
from .oomodel import ObservableOperators, forward_batch
from .policy import FscPolicy, score, softmax_table
from .sampler import BatchSampler, RngSpec, SamplingTables, TrajectoryRecord


@dataclass(frozen=True)
class GradientEstimate:
    """Gradient tables aligned with theta plus their linear combination."""

    entropy_grad: np.ndarray
    success_grad: np.ndarray
    combined: np.ndarray
    batch_size: int
    estimator: str


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    horizon: int
    batch_size: int
    iterations: int
    step_size: float
    alpha: float = 1.0
    seed: int = 0
    log_base: str = "e"
    estimator: str = "sampled"
    workers: int = 1
    enumeration_cap: int = ENUMERATION_CAP

    def __post_init__(self):
        if self.horizon < 0:
            raise ConfigError("horizon must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")
        if self.iterations < 1:
            raise ConfigError("iteration count must be >= 1")
        if self.step_size <= 0:
            raise ConfigError("step size must be > 0")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.log_base not in ("e", "2"):
            raise ConfigError(f"log base must be 'e' or '2', got {self.log_base!r}")
        if self.estimator not in ("sampled", "exact"):
            raise ConfigError(f"estimator must be 'sampled' or 'exact', got {self.estimator!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class TrainReportRow:
    """Pre-update estimates of iteration tau, from iteration tau's batch."""

    iteration: int
    entropy: float
    success: float
    objective: float
    grad_norm: float
    wallclock_ms: float


def _binary_entropy_vec(p: np.ndarray, log_base: str) -> np.ndarray:
    p = np.clip(p, 0.0, 1.0)
    h = np.zeros_like(p)
    for q in (p, 1.0 - p):
        m = q > 0.0
        h[m] -= q[m] * np.log(q[m])
    if log_base == "2":
        h /= math.log(2.0)
    return np.maximum(h, 0.0)


def _batch_posteriors(oo: ObservableOperators, obs: np.ndarray, acts: np.ndarray,
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Secret and success posteriors for every trajectory in the batch.

    The forward pass stops before the last step; the last emission
    reweights the result, so the posterior is the masked share of that
    reweighted vector.
    """
    T = obs.shape[1] - 1
    fvecs, _ = forward_batch(oo, obs, acts, steps=T)
    w = oo.obs[acts[:, T], obs[:, T]] * fvecs
    denom = w.sum(axis=1)
    if (denom <= 0.0).any():
        bad = int(np.argmax(denom <= 0.0))
        raise EvidenceImpossibleError(f"trajectory {bad} has zero-probability evidence")
    sec = np.clip((w * oo.secret_mask).sum(axis=1) / denom, 0.0, 1.0)
    fin = np.clip((w * oo.final_mask).sum(axis=1) / denom, 0.0, 1.0)
    return sec, fin


def _memory_paths(pol: FscPolicy, obs: np.ndarray) -> np.ndarray:
    """Memory-state index at each decision point, for a whole batch."""
    m, steps = obs.shape
    paths = np.empty((m, steps), dtype=np.intp)
    xs = np.zeros(m, dtype=np.intp)
    for t in range(steps):
        paths[:, t] = xs
        xs = pol.mem_next[xs, obs[:, t]]
    return paths


def _weighted_score_mean(pol: FscPolicy, obs: np.ndarray, acts: np.ndarray,
                         weights: np.ndarray) -> np.ndarray:
    """(1/M) sum_k weights[k] * score(y_k), accumulated in index order."""
    psi = softmax_table(pol.theta)
    paths = _memory_paths(pol, obs)
    table = np.zeros_like(pol.theta)
    counts = np.zeros(pol.n_memory)
    m, steps = obs.shape
    for t in range(steps):
        np.add.at(table, (paths[:, t], acts[:, t]), weights)
        np.add.at(counts, paths[:, t], weights)
    table -= counts[:, None] * psi
    return table / m


def _records_to_arrays(batch: Sequence[TrajectoryRecord]) -> tuple[np.ndarray, np.ndarray]:
    obs = np.asarray([r.obs for r in batch], dtype=np.intp)
    acts = np.asarray([r.acts for r in batch], dtype=np.intp)
    return obs, acts


def entropy_grad_sampled(pol: FscPolicy, oo: ObservableOperators,
                         batch: Sequence[TrajectoryRecord],
                         log_base: str = "e") -> np.ndarray:
    """Batch-mean estimate of the conditional-entropy gradient."""
    if not batch:
        raise ConfigError("empty batch")
    obs, acts = _records_to_arrays(batch)
    sec, _ = _batch_posteriors(oo, obs, acts)
    return _weighted_score_mean(pol, obs, acts, _binary_entropy_vec(sec, log_base))


def success_grad_sampled(pol: FscPolicy, oo: ObservableOperators,
                         batch: Sequence[TrajectoryRecord]) -> np.ndarray:
    """Batch-mean estimate of the task-success-probability gradient."""
    if not batch:
        raise ConfigError("empty batch")
    obs, acts = _records_to_arrays(batch)
    _, fin = _batch_posteriors(oo, obs, acts)
    return _weighted_score_mean(pol, obs, acts, fin)


def entropy_grad_exact(pol: FscPolicy, oo: ObservableOperators, T: int,
                       log_base: str = "e", cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Exact conditional-entropy gradient by record enumeration."""
    table = np.zeros_like(pol.theta)
    for y, p, p_sec, _ in enumerate_records(pol, oo, T, cap):
        h = entropy_given_y(p_sec, log_base)
        if p and h:
            table += p * h * score(pol, y.obs, y.acts)
    return table


def success_grad_exact(pol: FscPolicy, oo: ObservableOperators, T: int,
                       cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Exact gradient of the task-success probability."""
    table = np.zeros_like(pol.theta)
    for y, p, _, p_fin in enumerate_records(pol, oo, T, cap):
        if p and p_fin:
            table += p * p_fin * score(pol, y.obs, y.acts)
    return table


def _check_finite(pol: FscPolicy, combined: np.ndarray, tau: int) -> None:
    if not np.isfinite(combined).all():
        x, a = np.argwhere(~np.isfinite(combined))[0]
        mem = " ".join(pol.observations[i] for i in pol.mem_states[x]) or "<initial>"
        raise NonFiniteGradientError(
            f"non-finite gradient at iteration {tau}, memory state {mem!r}, "
            f"action {pol.actions[a]!r}", iteration=tau, coordinate=(int(x), int(a)))


def train(cfg: TrainConfig, pol: FscPolicy, oo: ObservableOperators,
          ) -> tuple[FscPolicy, list[TrainReportRow]]:
    """Fixed-step gradient descent; returns the final policy and the report.

    Each iteration evaluates before updating: the reported entropy and
    success values always come from the batch (or exact sweep) computed at
    the pre-update parameters.
    """
    pol = replace(pol, theta=pol.theta.copy())
    rows: list[TrainReportRow] = []
    sampler = None
    if cfg.estimator == "sampled":
        sampler = BatchSampler(SamplingTables.from_operators(oo), pol, cfg.horizon,
                               RngSpec(cfg.seed), workers=cfg.workers)
    try:
        for tau in range(cfg.iterations):
            t0 = time.perf_counter()
            if cfg.estimator == "sampled":
                psi = softmax_table(pol.theta)
                _, acts, obs, _ = sampler.sample(psi, tau, cfg.batch_size)
                sec, fin = _batch_posteriors(oo, obs, acts)
                hvals = _binary_entropy_vec(sec, cfg.log_base)
                g_h = _weighted_score_mean(pol, obs, acts, hvals)
                g_w = _weighted_score_mean(pol, obs, acts, fin)
                entropy_est = float(hvals.mean())
                success_est = float(fin.mean())
                batch_size = cfg.batch_size
            else:
                entropy_est = success_est = 0.0
                g_h = np.zeros_like(pol.theta)
                g_w = np.zeros_like(pol.theta)
                for y, p, p_sec, p_fin in enumerate_records(
                        pol, oo, cfg.horizon, cfg.enumeration_cap):
                    h = entropy_given_y(p_sec, cfg.log_base)
                    entropy_est += p * h
                    success_est += p * p_fin
                    sc = score(pol, y.obs, y.acts)
                    g_h += p * h * sc
                    g_w += p * p_fin * sc
                batch_size = 0
            combined = g_h - cfg.alpha * g_w
            _check_finite(pol, combined, tau)
            est = GradientEstimate(entropy_grad=g_h, success_grad=g_w,
                                   combined=combined, batch_size=batch_size,
                                   estimator=cfg.estimator)
            pol.theta -= cfg.step_size * est.combined
            wall = (time.perf_counter() - t0) * 1e3
            rows.append(TrainReportRow(
                iteration=tau, entropy=entropy_est, success=success_est,
                objective=entropy_est - cfg.alpha * success_est,
                grad_norm=float(np.linalg.norm(est.combined)), wallclock_ms=wall))
    finally:
        if sampler is not None:
            sampler.close()
    return pol, rows


def write_report_csv(rows: Sequence[TrainReportRow], fh: IO[str],
                     timings: bool = False) -> None:
    """Training report CSV.

    The wallclock_ms column is written as 0 unless ``timings`` is set:
    measured times would break the byte-level reproducibility contract of
    the report file. Real timings live beside it (see the cli module).
    """
    fh.write("iter,entropy,success,objective,grad_norm,wallclock_ms\n")
    for r in rows:
        wall = f"{r.wallclock_ms:.3f}" if timings else "0"
        fh.write(f"{r.iteration},{r.entropy!r},{r.success!r},{r.objective!r},"
                 f"{r.grad_norm!r},{wall}\n")
