"""Action-indexed observable operators: likelihoods and smoothing.

One operator per (observation, action) pair couples the emission at the
source state with the transition out of it; chaining operators along a
trajectory computes sequence likelihoods with one matrix-vector product
per step. All recursions normalize the running vector each step and
accumulate the log of the extracted factors, so long sequences neither
underflow nor overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .automata import LabelDistributionSequence, Symbol
from .errors import EvidenceImpossibleError, InputError
from .model import ProductPomdp


@dataclass(frozen=True, eq=False)
class ObservableOperators:
    """Operator family of a product POMDP.

    ops[a, o] is the N x N matrix whose (i, j) entry is the probability of
    emitting o at state j under action a and moving to state i, i.e.
    trans[a] with column j scaled by obs[a, o, j]. init is the initial
    distribution as a column vector.
    """

    ops: np.ndarray          # (|A|, |O|, N, N)
    trans: np.ndarray        # (|A|, N, N), [a, i, j] = P(i | j, a)
    obs: np.ndarray          # (|A|, |O|, N), [a, o, j] = E(o | j, a)
    init: np.ndarray         # (N,)
    final_mask: np.ndarray   # (N,) bool
    secret_mask: np.ndarray  # (N,) bool
    observations: tuple[str, ...]
    actions: tuple[str, ...]
    vlabel: tuple[Symbol, ...]

    @property
    def n_states(self) -> int:
        return self.init.shape[0]


@dataclass
class FilterState:
    """Normalized forward vector plus the log of the factors taken out.

    exp(log_scale) * vec.sum() recovers the unnormalized mass; when the
    evidence so far is impossible, vec is all zeros and log_scale is -inf.
    """

    vec: np.ndarray
    log_scale: float = 0.0

    def advance(self, op: np.ndarray) -> "FilterState":
        nxt = op @ self.vec
        total = nxt.sum()
        if total <= 0.0:
            return FilterState(vec=np.zeros_like(nxt), log_scale=-math.inf)
        return FilterState(vec=nxt / total, log_scale=self.log_scale + math.log(total))

    @property
    def log_mass(self) -> float:
        total = self.vec.sum()
        return self.log_scale + math.log(total) if total > 0 else -math.inf


def build_operators(p: ProductPomdp) -> ObservableOperators:
    """Precompute the full operator family of a product POMDP."""
    trans = np.ascontiguousarray(p.trans.transpose(1, 2, 0))   # (A, V', V) -> P(v'|v,a)
    obs = np.ascontiguousarray(p.emit.transpose(1, 2, 0))      # (A, O, V)
    ops = trans[:, None, :, :] * obs[:, :, None, :]
    return ObservableOperators(ops=ops, trans=trans, obs=obs, init=p.init.copy(),
                               final_mask=p.final.copy(), secret_mask=p.secret.copy(),
                               observations=p.observations, actions=p.actions,
                               vlabel=p.vlabel)


def _check_lengths(oo: ObservableOperators, obs: Sequence[int], acts: Sequence[int]) -> None:
    if len(obs) != len(acts):
        raise InputError(f"observation/action length mismatch: {len(obs)} vs {len(acts)}")
    if len(obs) == 0:
        raise InputError("empty observation sequence")
    no, na = len(oo.observations), len(oo.actions)
    for t, (o, a) in enumerate(zip(obs, acts)):
        if not 0 <= o < no:
            raise InputError(f"unknown observation index {o} at step {t}")
        if not 0 <= a < na:
            raise InputError(f"unknown action index {a} at step {t}")


def forward_states(oo: ObservableOperators, obs: Sequence[int],
                   acts: Sequence[int]) -> list[FilterState]:
    """Filter states f_0 .. f_{T+1}; f_t carries P(V_t = ., o_{0:t-1} | a_{0:t-1})."""
    _check_lengths(oo, obs, acts)
    fs = FilterState(vec=oo.init.copy())
    out = [fs]
    for o, a in zip(obs, acts):
        fs = fs.advance(oo.ops[a, o])
        out.append(fs)
    return out


def log_seq_prob(oo: ObservableOperators, obs: Sequence[int], acts: Sequence[int]) -> float:
    """log P(o_{0:T} | a_{0:T}); -inf when the evidence is impossible."""
    return forward_states(oo, obs, acts)[-1].log_mass


def seq_prob(oo: ObservableOperators, obs: Sequence[int], acts: Sequence[int]) -> float:
    """P(o_{0:T} | a_{0:T}) as a chained operator product."""
    return math.exp(log_seq_prob(oo, obs, acts))


def joint_state_seq_prob(oo: ObservableOperators, v_next: int, obs: Sequence[int],
                         acts: Sequence[int]) -> float:
    """P(V_{T+1} = v_next, o_{0:T} | a_{0:T})."""
    if not 0 <= v_next < oo.n_states:
        raise InputError(f"state index {v_next} out of range")
    last = forward_states(oo, obs, acts)[-1]
    if last.vec[v_next] == 0.0:
        return 0.0
    return math.exp(last.log_scale) * float(last.vec[v_next])


def _backward_vectors(oo: ObservableOperators, obs: Sequence[int],
                      acts: Sequence[int]) -> list[np.ndarray]:
    """Normalized row vectors b_t with b_t[i] proportional to P(o_{t:T} | a_{t:T}, V_t=i)."""
    n = oo.n_states
    vec = np.ones(n)
    out = [vec]
    for o, a in zip(reversed(obs), reversed(acts)):
        vec = vec @ oo.ops[a, o]
        total = vec.sum()
        if total > 0.0:
            vec = vec / total
        out.append(vec)
    out.reverse()
    return out


def smooth(oo: ObservableOperators, obs: Sequence[int], acts: Sequence[int],
           t: int) -> np.ndarray:
    """Posterior P(V_t = . | o_{0:T}, a_{0:T}); forward-backward product.

    The forward factor consumes observations before t and the backward
    factor consumes those from t on, so each observation enters once.
    """
    _check_lengths(oo, obs, acts)
    horizon = len(obs) - 1
    if not 0 <= t <= horizon:
        raise InputError(f"time index {t} outside [0, {horizon}]")
    fwd = forward_states(oo, obs, acts)
    if fwd[-1].log_mass == -math.inf:
        raise EvidenceImpossibleError("evidence has probability zero")
    bwd = _backward_vectors(oo, obs, acts)
    w = fwd[t].vec * bwd[t]
    return w / w.sum()


def label_distribution_from_smoothing(oo: ObservableOperators, obs: Sequence[int],
                                      acts: Sequence[int]):
    """Push each step's smoothed state posterior through the labeling function.

    Returns a LabelDistributionSequence; the diagnostic bridge from beliefs
    to the weighted-automaton acceptance of the automata module.
    """
    dists = []
    for t in range(len(obs)):
        post = smooth(oo, obs, acts, t)
        acc: dict[Symbol, float] = {}
        for v, p in enumerate(post):
            if p:
                sym = oo.vlabel[v]
                acc[sym] = acc.get(sym, 0.0) + float(p)
        total = sum(acc.values())
        dists.append({sym: p / total for sym, p in acc.items()})
    return LabelDistributionSequence(tuple(dists))


def forward_batch(oo: ObservableOperators, obs: np.ndarray, acts: np.ndarray,
                  steps: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run the forward recursion for a whole batch of trajectories at once.

    obs and acts are (M, L) integer arrays. Applies the first ``steps``
    operators (default: all L) and returns (vecs, log_scales) where
    vecs[k] is trajectory k's normalized forward vector and
    exp(log_scales[k]) * vecs[k] the unnormalized one. Rows are grouped by
    (action, observation) so each step is a few dense matrix products.
    """
    m, length = obs.shape
    if steps is None:
        steps = length
    vecs = np.broadcast_to(oo.init, (m, oo.n_states)).copy()
    log_scales = np.zeros(m)
    no = len(oo.observations)
    for t in range(steps):
        key = acts[:, t] * no + obs[:, t]
        nxt = np.empty_like(vecs)
        for pair in np.unique(key):
            rows = key == pair
            op = oo.ops[pair // no, pair % no]
            nxt[rows] = vecs[rows] @ op.T
        totals = nxt.sum(axis=1)
        alive = totals > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            vecs = np.where(alive[:, None], nxt / totals[:, None], 0.0)
            log_scales = np.where(alive, log_scales + np.log(totals), -np.inf)
    return vecs, log_scales
