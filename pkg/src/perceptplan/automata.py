"""Complete DFAs with final/secret state sets and their matrix encoding.

A symbol is a set of atomic propositions, canonicalized as a sorted tuple
of names so that {a, tau} and {tau, a} compare equal. The matrix view
(one 0/1 matrix per symbol, plus initial/final indicator vectors) turns
acceptance of a word into a chain of matrix products, and acceptance of a
sequence of per-step label distributions into the same chain with each
step's matrix replaced by the distribution-weighted mixture of symbol
matrices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, InputError

Symbol = tuple[str, ...]


def canon_symbol(aps: Iterable[str]) -> Symbol:
    """Canonical form of a label symbol: sorted, de-duplicated AP names."""
    return tuple(sorted(set(aps)))


@dataclass(frozen=True)
class Dfa:
    """Deterministic finite automaton with a final set and a secret set.

    ``delta`` maps (state, symbol) to the successor state. It may be
    partial at construction time; ``dfa_complete`` produces a total one.
    """

    states: tuple[str, ...]
    alphabet: tuple[Symbol, ...]
    delta: Mapping[tuple[str, Symbol], str]
    initial: str
    final: frozenset[str]
    secret: frozenset[str] = frozenset()

    def __post_init__(self):
        known = set(self.states)
        if self.initial not in known:
            raise ConfigError(f"initial state {self.initial!r} not among states")
        for name, subset in (("final", self.final), ("secret", self.secret)):
            extra = set(subset) - known
            if extra:
                raise ConfigError(f"{name} set contains unknown states {sorted(extra)}")
        symbols = set(self.alphabet)
        for (q, sigma), q2 in self.delta.items():
            if q not in known or q2 not in known:
                raise ConfigError(f"transition ({q!r}, {sigma!r}) -> {q2!r} uses unknown state")
            if sigma not in symbols:
                raise ConfigError(f"transition from {q!r} uses unknown symbol {sigma!r}")

    def is_complete(self) -> bool:
        return all((q, s) in self.delta for q in self.states for s in self.alphabet)


def dfa_step(dfa: Dfa, q: str, sigma: Iterable[str] | Symbol) -> str:
    """One transition delta(q, sigma)."""
    if q not in dfa.states:
        raise InputError(f"unknown DFA state {q!r}")
    sym = canon_symbol(sigma)
    if sym not in dfa.alphabet:
        raise InputError(f"unknown symbol {sym!r}")
    try:
        return dfa.delta[(q, sym)]
    except KeyError:
        raise InputError(f"transition undefined for ({q!r}, {sym!r}); complete the DFA first") from None


def dfa_run(dfa: Dfa, word: Sequence[Iterable[str]]) -> str:
    """Extended transition from the initial state; the empty word stays put."""
    q = dfa.initial
    for sigma in word:
        q = dfa_step(dfa, q, sigma)
    return q


def dfa_complete(dfa: Dfa, sink_name: str = "sink") -> Dfa:
    """Make delta total by absorbing undefined transitions in a fresh sink.

    Already-total automata are returned unchanged (same object). The sink
    is neither final nor secret, so completion preserves the language.
    """
    if dfa.is_complete():
        return dfa
    sink = sink_name
    while sink in dfa.states:
        sink = sink + "_"
    states = dfa.states + (sink,)
    delta = dict(dfa.delta)
    for q in states:
        for sigma in dfa.alphabet:
            delta.setdefault((q, sigma), sink)
    return Dfa(states=states, alphabet=dfa.alphabet, delta=delta,
               initial=dfa.initial, final=dfa.final, secret=dfa.secret)


@dataclass(frozen=True)
class DfaMatrices:
    """Matrix encoding of a complete DFA.

    ``alpha`` is the initial-state indicator row vector, ``beta`` /
    ``beta_sec`` the column indicators of the final and secret sets, and
    ``trans[sigma]`` the 0/1 transition matrix with entry [i, j] = 1 iff
    delta(q_i, sigma) = q_j (one 1 per row).
    """

    alpha: np.ndarray
    beta: np.ndarray
    beta_sec: np.ndarray
    trans: Mapping[Symbol, np.ndarray]
    state_index: Mapping[str, int] = field(repr=False, default_factory=dict)


def dfa_matrices(dfa: Dfa) -> DfaMatrices:
    """Build the (alpha, beta, {M_sigma}) view of a complete DFA."""
    if not dfa.is_complete():
        raise ConfigError("dfa_matrices requires a complete DFA; apply dfa_complete first")
    idx = {q: i for i, q in enumerate(dfa.states)}
    n = len(dfa.states)
    alpha = np.zeros(n)
    alpha[idx[dfa.initial]] = 1.0
    beta = np.zeros(n)
    for q in dfa.final:
        beta[idx[q]] = 1.0
    beta_sec = np.zeros(n)
    for q in dfa.secret:
        beta_sec[idx[q]] = 1.0
    trans = {}
    for sigma in dfa.alphabet:
        m = np.zeros((n, n))
        for q in dfa.states:
            m[idx[q], idx[dfa.delta[(q, sigma)]]] = 1.0
        trans[sigma] = m
    return DfaMatrices(alpha=alpha, beta=beta, beta_sec=beta_sec, trans=trans, state_index=idx)


@dataclass(frozen=True)
class LabelDistributionSequence:
    """One probability map over symbols per time step."""

    dists: tuple[Mapping[Symbol, float], ...]

    def __post_init__(self):
        for t, dist in enumerate(self.dists):
            total = sum(dist.values())
            if abs(total - 1.0) > 1e-9:
                raise InputError(f"label distribution at step {t} sums to {total}, not 1")
            if any(p < 0 or p > 1 for p in dist.values()):
                raise InputError(f"label distribution at step {t} has entries outside [0, 1]")

    @staticmethod
    def from_maps(maps: Sequence[Mapping[Iterable[str], float]]) -> "LabelDistributionSequence":
        return LabelDistributionSequence(
            tuple({canon_symbol(s): float(p) for s, p in m.items()} for m in maps))


def weighted_acceptance(mats: DfaMatrices, dists: LabelDistributionSequence,
                        target: str = "final") -> float:
    """Probability that a per-step-independent random label sequence is accepted.

    Computes alpha . M_{L_0} ... M_{L_T} . beta_target where each M_{L_t}
    is the mixture of symbol matrices weighted by the step's distribution.
    Valid as an acceptance probability only when the per-step label
    distributions are independent; used for tests and diagnostics.
    """
    if target == "final":
        beta = mats.beta
    elif target == "secret":
        beta = mats.beta_sec
    else:
        raise InputError(f"target must be 'final' or 'secret', got {target!r}")
    vec = mats.alpha.copy()
    for t, dist in enumerate(dists.dists):
        mixed = np.zeros_like(next(iter(mats.trans.values())))
        for sigma, p in dist.items():
            if sigma not in mats.trans:
                raise InputError(f"step {t} assigns mass to unknown symbol {sigma!r}")
            if p:
                mixed += p * mats.trans[sigma]
        vec = vec @ mixed
    return float(vec @ beta)


def load_dfa(path: str) -> tuple[Dfa, bool]:
    """Load a DFA from its JSON file; returns (dfa, whether a sink was added).

    Schema: {"states": [...], "alphabet": [[ap, ...], ...], "initial": name,
    "final": [...], "secret": [...], "delta": [{"from": name, "on": [ap, ...],
    "to": name}, ...]}. Missing transitions are permitted and absorbed by a
    fresh sink.
    """
    with open(path) as fh:
        raw = json.load(fh)
    try:
        states = tuple(raw["states"])
        alphabet = tuple(canon_symbol(s) for s in raw["alphabet"])
        if len(set(alphabet)) != len(alphabet):
            raise ConfigError(f"{path}: alphabet has duplicate symbols after canonicalization")
        delta = {}
        for edge in raw["delta"]:
            key = (edge["from"], canon_symbol(edge["on"]))
            if key in delta and delta[key] != edge["to"]:
                raise ConfigError(f"{path}: conflicting transitions for {key}")
            delta[key] = edge["to"]
        dfa = Dfa(states=states, alphabet=alphabet, delta=delta,
                  initial=raw["initial"], final=frozenset(raw["final"]),
                  secret=frozenset(raw.get("secret", [])))
    except KeyError as exc:
        raise ConfigError(f"{path}: missing required DFA field {exc}") from None
    completed = dfa_complete(dfa)
    return completed, completed is not dfa


def save_dfa(dfa: Dfa, path: str) -> None:
    raw = {
        "states": list(dfa.states),
        "alphabet": [list(s) for s in dfa.alphabet],
        "initial": dfa.initial,
        "final": sorted(dfa.final),
        "secret": sorted(dfa.secret),
        "delta": [{"from": q, "on": list(sigma), "to": q2}
                  for (q, sigma), q2 in sorted(dfa.delta.items())],
    }
    with open(path, "w") as fh:
        json.dump(raw, fh, indent=1)
        fh.write("\n")
