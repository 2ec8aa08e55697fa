import numpy as np
import pytest

from perceptplan.automata import Dfa, canon_symbol
from perceptplan.model import LabeledPomdp, build_product
from perceptplan.oomodel import build_operators

EMPTY = canon_symbol([])
P_SYM = canon_symbol(["p"])


def reach_a_dfa() -> Dfa:
    """Two-state automaton accepting any word containing symbol {a}."""
    a, b = canon_symbol(["a"]), canon_symbol(["b"])
    return Dfa(states=("q0", "q1"), alphabet=(a, b),
               delta={("q0", a): "q1", ("q0", b): "q0",
                      ("q1", a): "q1", ("q1", b): "q1"},
               initial="q0", final=frozenset({"q1"}))


def reach_p_dfa() -> Dfa:
    return Dfa(states=("q0", "q1"), alphabet=(EMPTY, P_SYM),
               delta={("q0", EMPTY): "q0", ("q0", P_SYM): "q1",
                      ("q1", EMPTY): "q1", ("q1", P_SYM): "q1"},
               initial="q0", final=frozenset({"q1"}), secret=frozenset({"q1"}))


def two_room_model() -> LabeledPomdp:
    """Two hidden rooms, identity dynamics, one noisy 'look' sensor.

    Looking emits 'blip' with probability 0.8 in the labeled room and 0.1
    in the other; 'stay' always emits 'null'.
    """
    trans = np.zeros((2, 2, 2))
    trans[0, :, 0] = 1.0
    trans[1, :, 1] = 1.0
    emit = np.zeros((2, 2, 2))
    emit[:, 0, 1] = 1.0
    emit[0, 1, 0], emit[0, 1, 1] = 0.1, 0.9
    emit[1, 1, 0], emit[1, 1, 1] = 0.8, 0.2
    return LabeledPomdp(states=("s0", "s1"), observations=("blip", "null"),
                        actions=("stay", "look"), trans=trans, emit=emit,
                        init=np.array([0.5, 0.5]), aps=frozenset({"p"}),
                        label=(EMPTY, P_SYM))


@pytest.fixture
def two_room():
    return two_room_model()


@pytest.fixture
def two_room_product():
    return build_product(two_room_model(), reach_p_dfa())


@pytest.fixture
def two_room_oo(two_room_product):
    return build_operators(two_room_product)


def random_dist(rng: np.random.Generator, n: int) -> np.ndarray:
    w = rng.random(n) + 1e-3
    return w / w.sum()


def random_pomdp(rng: np.random.Generator, ns: int, na: int, no: int,
                 n_aps: int = 1) -> LabeledPomdp:
    aps = tuple(f"x{i}" for i in range(n_aps))
    trans = np.stack([[random_dist(rng, ns) for _ in range(na)] for _ in range(ns)])
    emit = np.stack([[random_dist(rng, no) for _ in range(na)] for _ in range(ns)])
    label = tuple(canon_symbol([ap for ap in aps if rng.random() < 0.5])
                  for _ in range(ns))
    return LabeledPomdp(states=tuple(f"s{i}" for i in range(ns)),
                        observations=tuple(f"o{i}" for i in range(no)),
                        actions=tuple(f"a{i}" for i in range(na)),
                        trans=trans, emit=emit, init=random_dist(rng, ns),
                        aps=frozenset(aps), label=label)


def random_complete_dfa(rng: np.random.Generator, nq: int, n_aps: int = 1,
                        with_secret: bool = True) -> Dfa:
    aps = [f"x{i}" for i in range(n_aps)]
    alphabet = tuple(sorted({canon_symbol([ap for i, ap in enumerate(aps)
                                           if mask >> i & 1])
                             for mask in range(2 ** n_aps)}))
    states = tuple(f"q{i}" for i in range(nq))
    delta = {(q, s): states[rng.integers(nq)] for q in states for s in alphabet}
    n_final = int(rng.integers(1, nq + 1))
    final = frozenset(rng.choice(nq, size=n_final, replace=False).tolist())
    final = frozenset(states[i] for i in final)
    if with_secret:
        n_sec = int(rng.integers(0, nq + 1))
        secret = frozenset(states[i] for i in
                           rng.choice(nq, size=n_sec, replace=False).tolist())
    else:
        secret = frozenset()
    return Dfa(states=states, alphabet=alphabet, delta=delta,
               initial=states[int(rng.integers(nq))], final=final, secret=secret)


def random_product(seed: int, ns: int = 3, nq: int = 2, na: int = 2, no: int = 2,
                   n_aps: int = 1):
    """A random labeled POMDP, a random complete DFA, and their product."""
    rng = np.random.default_rng(seed)
    m = random_pomdp(rng, ns, na, no, n_aps)
    dfa = random_complete_dfa(rng, nq, n_aps)
    return m, dfa, build_product(m, dfa)
