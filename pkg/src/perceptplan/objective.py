"""Secret/success posteriors, binary entropy, and exact objective evaluation.

The posterior of the horizon event given an observation/action record is
policy-independent: the last step's emission weights the forward vector,
and the final/secret mass of that reweighting is the posterior. Exact
objective values enumerate every observation/action sequence of positive
probability; the enumeration cap keeps this to desk-scale models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import EnumerationInfeasibleError, EvidenceImpossibleError, InputError
from .oomodel import FilterState, ObservableOperators, log_seq_prob
from .policy import FscPolicy, memory_path, softmax_table

ENUMERATION_CAP = 10 ** 7


@dataclass(frozen=True)
class ObservationRecord:
    """An agent-visible record: observation and action index sequences."""

    obs: tuple[int, ...]
    acts: tuple[int, ...]

    def __post_init__(self):
        if len(self.obs) != len(self.acts):
            raise InputError(
                f"observation/action length mismatch: {len(self.obs)} vs {len(self.acts)}")
        if len(self.obs) == 0:
            raise InputError("empty record; the horizon T must be >= 0")

    @property
    def horizon(self) -> int:
        return len(self.obs) - 1


@dataclass(frozen=True)
class ObjectiveReport:
    """Evaluated objective: entropy minus alpha times success probability."""

    entropy: float
    success_prob: float
    objective: float
    alpha: float
    entropy_se: float | None = None
    success_se: float | None = None
    n_samples: int | None = None


def _log(p: float, base: str) -> float:
    return math.log2(p) if base == "2" else math.log(p)


def entropy_given_y(p_secret: float, log_base: str = "e") -> float:
    """Binary entropy of a posterior, with the 0 log 0 = 0 convention."""
    if not 0.0 <= p_secret <= 1.0:
        raise InputError(f"posterior {p_secret} outside [0, 1]")
    h = 0.0
    for p in (p_secret, 1.0 - p_secret):
        if p > 0.0:
            h -= p * _log(p, log_base)
    return max(h, 0.0)


def _event_posterior(oo: ObservableOperators, y: ObservationRecord,
                     mask: np.ndarray) -> float:
    """Posterior mass of ``mask`` at the horizon given the record.

    The forward pass consumes all but the last observation; the last
    step's emission column-weights the result. The shared normalization of
    the filter cancels in the ratio.
    """
    fs = FilterState(vec=oo.init.copy())
    for o, a in zip(y.obs[:-1], y.acts[:-1]):
        fs = fs.advance(oo.ops[a, o])
    w = oo.obs[y.acts[-1], y.obs[-1]] * fs.vec
    denom = w.sum()
    if denom <= 0.0 or fs.log_scale == -math.inf:
        raise EvidenceImpossibleError("evidence has probability zero")
    return float(np.clip(w[mask].sum() / denom, 0.0, 1.0))


def secret_posterior(oo: ObservableOperators, y: ObservationRecord) -> float:
    """P(Z_T = 1 | y): probability the horizon state is secret."""
    return _event_posterior(oo, y, oo.secret_mask)


def success_posterior(oo: ObservableOperators, y: ObservationRecord) -> float:
    """P(W_T = 1 | y): probability the horizon state satisfies the task."""
    return _event_posterior(oo, y, oo.final_mask)


def traj_prob(pol: FscPolicy, oo: ObservableOperators, y: ObservationRecord) -> float:
    """P_theta(y) = P(o_{0:T} | a_{0:T}) * prod_t pi_theta(a_t | o_{0:t-1}).

    Returns 0 for impossible observation sequences.
    """
    lp = log_seq_prob(oo, y.obs, y.acts)
    if lp == -math.inf:
        return 0.0
    psi = softmax_table(pol.theta)
    path = memory_path(pol, y.obs)[:-1]
    return math.exp(lp) * float(np.prod(psi[path, list(y.acts)]))


def enumerate_records(pol: FscPolicy, oo: ObservableOperators, T: int,
                      cap: int = ENUMERATION_CAP,
                      ) -> Iterator[tuple[ObservationRecord, float, float, float]]:
    """All records y of horizon T with P_theta(y) > 0.

    Yields (y, P_theta(y), P(Z_T=1|y), P(W_T=1|y)). Probability factors are
    accumulated incrementally, so a full sweep costs one operator
    application per tree node rather than per leaf.
    """
    no, na = len(oo.observations), len(oo.actions)
    required = (no * na) ** (T + 1)
    if required > cap:
        raise EnumerationInfeasibleError(
            f"exact enumeration needs {required} sequences, cap is {cap}; "
            "use the sampled estimator", required=required, cap=cap)
    psi = softmax_table(pol.theta)
    sec_mask, fin_mask = oo.secret_mask, oo.final_mask

    def rec(t: int, fvec: np.ndarray, x: int, p_acts: float,
            obs: tuple[int, ...], acts: tuple[int, ...]):
        for a in range(na):
            pa = p_acts * psi[x, a]
            if t == T:
                w = oo.obs[a] * fvec            # (|O|, N)
                denoms = w.sum(axis=1)
                for o in range(no):
                    if denoms[o] > 0.0:
                        y = ObservationRecord(obs + (o,), acts + (a,))
                        p_sec = float(np.clip(w[o][sec_mask].sum() / denoms[o], 0, 1))
                        p_fin = float(np.clip(w[o][fin_mask].sum() / denoms[o], 0, 1))
                        yield y, pa * float(denoms[o]), p_sec, p_fin
            else:
                for o in range(no):
                    nxt = oo.ops[a, o] @ fvec
                    if nxt.any():
                        yield from rec(t + 1, nxt, pol.mem_next[x, o], pa,
                                       obs + (o,), acts + (a,))

    yield from rec(0, oo.init.copy(), 0, 1.0, (), ())


def exact_conditional_entropy(pol: FscPolicy, oo: ObservableOperators, T: int,
                              log_base: str = "e", cap: int = ENUMERATION_CAP) -> float:
    """H(Z_T | Y; theta) by full enumeration of positive-probability records."""
    return sum(p * entropy_given_y(p_sec, log_base)
               for _, p, p_sec, _ in enumerate_records(pol, oo, T, cap))


def exact_success_prob(pol: FscPolicy, oo: ObservableOperators, T: int,
                       cap: int = ENUMERATION_CAP) -> float:
    """P_theta(W_T = 1) as the record-weighted success posterior."""
    return sum(p * p_fin for _, p, _, p_fin in enumerate_records(pol, oo, T, cap))


def exact_secret_prob(pol: FscPolicy, oo: ObservableOperators, T: int,
                      cap: int = ENUMERATION_CAP) -> float:
    """P_theta(Z_T = 1); prior mass of the secret event at the horizon."""
    return sum(p * p_sec for _, p, p_sec, _ in enumerate_records(pol, oo, T, cap))
