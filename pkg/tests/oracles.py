"""Independent brute-force oracles.

Everything here computes by exhaustive enumeration (words, hidden paths,
observation/action records) or by central finite differences, never
through the operator-chain code paths it is used to check.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from perceptplan.automata import Dfa, dfa_run
from perceptplan.model import ProductPomdp


def words_of_length(alphabet, length):
    return itertools.product(alphabet, repeat=length)


def weighted_acceptance_by_words(dfa: Dfa, dists, target: str = "final") -> float:
    """Sum of acceptance over every word, weighted by independent step probs."""
    targets = dfa.final if target == "final" else dfa.secret
    total = 0.0
    for word in words_of_length(dfa.alphabet, len(dists)):
        p = 1.0
        for sigma, dist in zip(word, dists):
            p *= dist.get(sigma, 0.0)
        if p and dfa_run(dfa, word) in targets:
            total += p
    return total


def _path_weights(p: ProductPomdp, obs, acts) -> tuple[np.ndarray, np.ndarray]:
    """All hidden paths v_0..v_T and their joint weight with the evidence."""
    n = p.init.shape[0]
    steps = len(obs)
    paths = np.array(list(itertools.product(range(n), repeat=steps)), dtype=np.intp)
    w = p.init[paths[:, 0]].copy()
    for t in range(steps):
        w *= p.emit[paths[:, t], acts[t], obs[t]]
        if t + 1 < steps:
            w *= p.trans[paths[:, t], acts[t], paths[:, t + 1]]
    return paths, w


def seq_prob_by_paths(p: ProductPomdp, obs, acts) -> float:
    _, w = _path_weights(p, obs, acts)
    return float(w.sum())


def joint_state_seq_prob_by_paths(p: ProductPomdp, v_next: int, obs, acts) -> float:
    paths, w = _path_weights(p, obs, acts)
    return float((w * p.trans[paths[:, -1], acts[-1], v_next]).sum())


def smooth_by_paths(p: ProductPomdp, obs, acts, t: int) -> np.ndarray:
    paths, w = _path_weights(p, obs, acts)
    out = np.zeros(p.init.shape[0])
    np.add.at(out, paths[:, t], w)
    return out / out.sum()


def event_posterior_by_paths(p: ProductPomdp, obs, acts, mask: np.ndarray) -> float:
    paths, w = _path_weights(p, obs, acts)
    return float(w[mask[paths[:, -1]]].sum() / w.sum())


def policy_seq_prob(pol, obs, acts) -> float:
    """Product of per-step softmax action probabilities, computed naively."""
    prob = 1.0
    x: tuple[int, ...] = ()
    for o, a in zip(obs, acts):
        row = pol.theta[pol.mem_index[x]]
        exps = [math.exp(v) for v in row]
        prob *= exps[a] / sum(exps)
        x = (x + (o,))[-pol.k:] if pol.k else ()
    return prob


def traj_prob_by_paths(pol, p: ProductPomdp, obs, acts) -> float:
    return seq_prob_by_paths(p, obs, acts) * policy_seq_prob(pol, obs, acts)


def all_records(no: int, na: int, T: int):
    for acts in itertools.product(range(na), repeat=T + 1):
        for obs in itertools.product(range(no), repeat=T + 1):
            yield obs, acts


def exact_entropy_by_records(pol, p: ProductPomdp, T: int, base: str = "e") -> float:
    """H(Z_T | Y) from scratch: path-sum posteriors under record enumeration."""
    total = 0.0
    for obs, acts in all_records(len(p.observations), len(p.actions), T):
        py = traj_prob_by_paths(pol, p, obs, acts)
        if py <= 0.0:
            continue
        q = event_posterior_by_paths(p, obs, acts, p.secret)
        h = 0.0
        for v in (q, 1.0 - q):
            if v > 0.0:
                h -= v * (math.log2(v) if base == "2" else math.log(v))
        total += py * h
    return total


def exact_success_by_records(pol, p: ProductPomdp, T: int) -> float:
    total = 0.0
    for obs, acts in all_records(len(p.observations), len(p.actions), T):
        py = traj_prob_by_paths(pol, p, obs, acts)
        if py > 0.0:
            total += py * event_posterior_by_paths(p, obs, acts, p.final)
    return total


def finite_difference(fun, theta: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of fun(theta), one coordinate at a time."""
    grad = np.zeros_like(theta)
    flat = grad.reshape(-1)
    base = theta.copy().reshape(-1)
    for i in range(base.size):
        bumped = base.copy()
        bumped[i] = base[i] + eps
        hi = fun(bumped.reshape(theta.shape))
        bumped[i] = base[i] - eps
        lo = fun(bumped.reshape(theta.shape))
        flat[i] = (hi - lo) / (2.0 * eps)
    return grad
