"""Labeled POMDP representation, validation, and the DFA product construction.

The product state (s, q) is flattened to the index v = s * |Q| + q, and
unreachable pairs are kept so matrix shapes are always |S|*|Q|. The product
emission ignores the automaton component.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .automata import Dfa, Symbol, canon_symbol, dfa_step
from .errors import ConfigError

ROW_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LabeledPomdp:
    """Finite POMDP whose states carry atomic-proposition labels.

    trans[s, a, s'] = P(s'|s, a); emit[s, a, o] = E(o|s, a); init[s] = mu0(s);
    label[s] is the canonical symbol L(s).
    """

    states: tuple[str, ...]
    observations: tuple[str, ...]
    actions: tuple[str, ...]
    trans: np.ndarray
    emit: np.ndarray
    init: np.ndarray
    aps: frozenset[str]
    label: tuple[Symbol, ...]

    def state_index(self, name: str) -> int:
        return self.states.index(name)


def validate_pomdp(m: LabeledPomdp) -> list[str]:
    """All invariant violations as human-readable strings; empty iff valid."""
    bad = []
    ns, na, no = len(m.states), len(m.actions), len(m.observations)
    if m.trans.shape != (ns, na, ns):
        bad.append(f"trans has shape {m.trans.shape}, expected {(ns, na, ns)}")
        return bad
    if m.emit.shape != (ns, na, no):
        bad.append(f"emit has shape {m.emit.shape}, expected {(ns, na, no)}")
        return bad
    for s in range(ns):
        for a in range(na):
            row = m.trans[s, a]
            if (row < 0).any():
                bad.append(f"trans({m.states[s]}, {m.actions[a]}) has a negative entry")
            elif abs(row.sum() - 1.0) > ROW_TOL:
                bad.append(f"trans({m.states[s]}, {m.actions[a]}) sums to {row.sum():.12g}")
            erow = m.emit[s, a]
            if (erow < 0).any():
                bad.append(f"emit({m.states[s]}, {m.actions[a]}) has a negative entry")
            elif abs(erow.sum() - 1.0) > ROW_TOL:
                bad.append(f"emit({m.states[s]}, {m.actions[a]}) sums to {erow.sum():.12g}")
    if (m.init < 0).any():
        bad.append("init has a negative entry")
    elif abs(m.init.sum() - 1.0) > ROW_TOL:
        bad.append(f"init sums to {m.init.sum():.12g}")
    for s, sym in enumerate(m.label):
        if not set(sym) <= m.aps:
            bad.append(f"label({m.states[s]}) = {sym} uses propositions outside the AP set")
    return bad


@dataclass(frozen=True, eq=False)
class ProductPomdp:
    """Synchronous product of a labeled POMDP with a complete DFA.

    State v = s * |Q| + q. trans[v, a, v'] is the product kernel, emit and
    init are lifted from the base model, and final/secret are boolean masks
    of S x F and S x F_sec. vlabel[v] is the label of v's base state.
    """

    base_states: tuple[str, ...]
    dfa_states: tuple[str, ...]
    observations: tuple[str, ...]
    actions: tuple[str, ...]
    trans: np.ndarray
    emit: np.ndarray
    init: np.ndarray
    final: np.ndarray
    secret: np.ndarray
    vlabel: tuple[Symbol, ...]

    @property
    def n_states(self) -> int:
        return len(self.base_states) * len(self.dfa_states)

    def vindex(self, s: int, q: int) -> int:
        return s * len(self.dfa_states) + q

    def vname(self, v: int) -> str:
        nq = len(self.dfa_states)
        return f"({self.base_states[v // nq]},{self.dfa_states[v % nq]})"


@dataclass(frozen=True)
class EventIndicators:
    """Index sets behind the horizon indicators: task success and secret."""

    w_set: frozenset[int]
    z_set: frozenset[int]


def build_product(m: LabeledPomdp, dfa: Dfa) -> ProductPomdp:
    """Product POMDP with q' = delta(q, L(s')) synchronization.

    Requires a complete DFA whose alphabet covers every state label.
    """
    if not dfa.is_complete():
        raise ConfigError("build_product requires a complete DFA")
    symbols = set(dfa.alphabet)
    for s, sym in zip(m.states, m.label):
        if sym not in symbols:
            raise ConfigError(f"label {sym} of state {s!r} is not in the DFA alphabet")
    qidx = {q: i for i, q in enumerate(dfa.states)}
    ns, nq = len(m.states), len(dfa.states)
    na, no = len(m.actions), len(m.observations)
    nv = ns * nq

    # successor automaton state is a function of the successor base state
    qsucc = np.empty((nq, ns), dtype=np.intp)
    for q in dfa.states:
        for s2 in range(ns):
            qsucc[qidx[q], s2] = qidx[dfa_step(dfa, q, m.label[s2])]

    trans = np.zeros((nv, na, nv))
    for s in range(ns):
        for q in range(nq):
            v = s * nq + q
            for a in range(na):
                for s2 in range(ns):
                    p = m.trans[s, a, s2]
                    if p:
                        trans[v, a, s2 * nq + qsucc[q, s2]] = p

    emit = np.repeat(m.emit, nq, axis=0)

    init = np.zeros(nv)
    q0 = qidx[dfa.initial]
    for s in range(ns):
        if m.init[s]:
            init[s * nq + qsucc[q0, s]] += m.init[s]

    final = np.zeros(nv, dtype=bool)
    secret = np.zeros(nv, dtype=bool)
    for q in dfa.final:
        final[qidx[q]::nq] = True
    for q in dfa.secret:
        secret[qidx[q]::nq] = True

    vlabel = tuple(m.label[v // nq] for v in range(nv))
    return ProductPomdp(base_states=m.states, dfa_states=dfa.states,
                        observations=m.observations, actions=m.actions,
                        trans=trans, emit=emit, init=init,
                        final=final, secret=secret, vlabel=vlabel)


def event_indicators(p: ProductPomdp) -> EventIndicators:
    return EventIndicators(w_set=frozenset(np.flatnonzero(p.final).tolist()),
                           z_set=frozenset(np.flatnonzero(p.secret).tolist()))


def load_pomdp(path: str) -> LabeledPomdp:
    """Load a labeled POMDP from JSON; every (s, a) row must be listed.

    Schema: {"states": [...], "actions": [...], "observations": [...],
    "aps": [...], "label": {state: [ap, ...]}, "init": {state: prob},
    "trans": [{"s": .., "a": .., "dist": {s2: p}}], "emit": [{"s": ..,
    "a": .., "dist": {o: p}}]}.
    """
    with open(path) as fh:
        raw = json.load(fh)
    try:
        states = tuple(raw["states"])
        actions = tuple(raw["actions"])
        observations = tuple(raw["observations"])
        aps = frozenset(raw["aps"])
        sidx = {s: i for i, s in enumerate(states)}
        aidx = {a: i for i, a in enumerate(actions)}
        oidx = {o: i for i, o in enumerate(observations)}
        label = tuple(canon_symbol(raw["label"].get(s, [])) for s in states)
        init = np.zeros(len(states))
        for s, p in raw["init"].items():
            init[_key(sidx, s, path, "init state")] = p
        trans = np.full((len(states), len(actions), len(states)), np.nan)
        for row in raw["trans"]:
            dist = np.zeros(len(states))
            for s2, p in row["dist"].items():
                dist[_key(sidx, s2, path, "trans target")] = p
            trans[_key(sidx, row["s"], path, "trans state"),
                  _key(aidx, row["a"], path, "trans action")] = dist
        emit = np.full((len(states), len(actions), len(observations)), np.nan)
        for row in raw["emit"]:
            dist = np.zeros(len(observations))
            for o, p in row["dist"].items():
                dist[_key(oidx, o, path, "emit observation")] = p
            emit[_key(sidx, row["s"], path, "emit state"),
                 _key(aidx, row["a"], path, "emit action")] = dist
    except KeyError as exc:
        raise ConfigError(f"{path}: missing required POMDP field {exc}") from None
    for name, arr in (("trans", trans), ("emit", emit)):
        missing = np.argwhere(np.isnan(arr).any(axis=-1))
        if len(missing):
            s, a = missing[0]
            raise ConfigError(
                f"{path}: {name} row for ({states[s]!r}, {actions[a]!r}) is not listed "
                f"({len(missing)} missing rows; no implicit defaults)")
    return LabeledPomdp(states=states, observations=observations, actions=actions,
                        trans=trans, emit=emit, init=init, aps=aps, label=label)


def _key(index: dict, name: str, path: str, what: str) -> int:
    try:
        return index[name]
    except KeyError:
        raise ConfigError(f"{path}: unknown {what} {name!r}") from None


def save_pomdp(m: LabeledPomdp, path: str) -> None:
    raw = {
        "states": list(m.states), "actions": list(m.actions),
        "observations": list(m.observations), "aps": sorted(m.aps),
        "label": {s: list(sym) for s, sym in zip(m.states, m.label)},
        "init": {s: float(p) for s, p in zip(m.states, m.init) if p},
        "trans": [{"s": m.states[s], "a": m.actions[a],
                   "dist": {m.states[s2]: float(p)
                            for s2, p in enumerate(m.trans[s, a]) if p}}
                  for s in range(len(m.states)) for a in range(len(m.actions))],
        "emit": [{"s": m.states[s], "a": m.actions[a],
                  "dist": {m.observations[o]: float(p)
                           for o, p in enumerate(m.emit[s, a]) if p}}
                 for s in range(len(m.states)) for a in range(len(m.actions))],
    }
    with open(path, "w") as fh:
        json.dump(raw, fh, indent=1)
        fh.write("\n")
