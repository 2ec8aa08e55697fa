from dataclasses import replace

import numpy as np
import pytest

from perceptplan.automata import Dfa, canon_symbol
from perceptplan.errors import ConfigError
from perceptplan.model import (EventIndicators, build_product, event_indicators,
                               load_pomdp, save_pomdp, validate_pomdp)

from conftest import (EMPTY, P_SYM, random_pomdp, random_product, reach_p_dfa,
                      two_room_model)


def test_validate_clean(two_room):
    assert validate_pomdp(two_room) == []


def test_validate_flags_bad_trans_row(two_room):
    broken = np.array(two_room.trans, copy=True)
    broken[0, 1, 0] = 0.9
    broken[0, 1, 1] = 0.0
    m = replace(two_room, trans=broken)
    issues = validate_pomdp(m)
    assert len(issues) == 1 and "trans(s0, look)" in issues[0]


def test_validate_flags_negative_emission(two_room):
    broken = np.array(two_room.emit, copy=True)
    broken[1, 0, 0] = -0.25
    broken[1, 0, 1] = 1.25
    m = replace(two_room, emit=broken)
    issues = validate_pomdp(m)
    assert len(issues) == 1 and "negative" in issues[0]


def test_product_size_identity():
    m, dfa, prod = random_product(seed=0, ns=6, nq=5)
    assert prod.n_states == 30
    assert prod.trans.shape == (30, len(m.actions), 30)


def test_product_with_trivial_dfa_preserves_dynamics():
    rng = np.random.default_rng(1)
    m = random_pomdp(rng, ns=3, na=2, no=2)
    one = Dfa(states=("q",), alphabet=tuple(sorted({EMPTY, *m.label})),
              delta={("q", s): "q" for s in sorted({EMPTY, *m.label})},
              initial="q", final=frozenset({"q"}))
    prod = build_product(m, one)
    assert np.allclose(prod.trans[:, :, :], m.trans)
    assert prod.final.all()


def test_product_initial_distribution(two_room_product):
    prod = two_room_product
    dist = {prod.vname(v): p for v, p in enumerate(prod.init) if p}
    assert dist == {"(s0,q0)": 0.5, "(s1,q1)": 0.5}


def test_product_label_mismatch_is_config_error():
    m = two_room_model()
    a = canon_symbol(["a"])
    dfa = Dfa(states=("q0",), alphabet=(a,), delta={("q0", a): "q0"},
              initial="q0", final=frozenset({"q0"}))
    with pytest.raises(ConfigError, match="s0"):
        build_product(m, dfa)


def test_event_indicators(two_room_product):
    ev = event_indicators(two_room_product)
    assert isinstance(ev, EventIndicators)
    prod = two_room_product
    assert ev.z_set == {prod.vindex(0, 1), prod.vindex(1, 1)}
    assert ev.w_set == ev.z_set  # F_sec = F for this automaton


def test_event_indicators_empty_secret():
    dfa = reach_p_dfa()
    no_secret = Dfa(states=dfa.states, alphabet=dfa.alphabet, delta=dfa.delta,
                    initial=dfa.initial, final=dfa.final, secret=frozenset())
    prod = build_product(two_room_model(), no_secret)
    assert event_indicators(prod).z_set == frozenset()


@pytest.mark.parametrize("seed", range(10))
def test_product_rows_stochastic_and_marginalize(seed):
    rng = np.random.default_rng(1000 + seed)
    m, dfa, prod = random_product(seed=1000 + seed,
                                  ns=int(rng.integers(2, 7)),
                                  nq=int(rng.integers(1, 5)),
                                  na=int(rng.integers(1, 4)),
                                  no=int(rng.integers(1, 4)))
    sums = prod.trans.sum(axis=-1)
    assert np.abs(sums - 1.0).max() < 1e-9
    nq = len(dfa.states)
    # summing over q' recovers the base kernel exactly
    for s in range(len(m.states)):
        for q in range(nq):
            marg = prod.trans[s * nq + q].reshape(len(m.actions), len(m.states), nq).sum(-1)
            assert np.array_equal(marg, m.trans[s])


def test_path_probability_preserved_by_product():
    # enumerate base paths (T <= 3) and compare with the induced product path
    m, dfa, prod = random_product(seed=5, ns=3, nq=3, na=2, no=2)
    from perceptplan.automata import dfa_step
    qidx = {q: i for i, q in enumerate(dfa.states)}
    nq = len(dfa.states)
    import itertools
    for path in itertools.product(range(3), repeat=4):
        for acts in itertools.product(range(2), repeat=3):
            base_p = m.init[path[0]]
            for t in range(3):
                base_p *= m.trans[path[t], acts[t], path[t + 1]]
            q = qidx[dfa_step(dfa, dfa.initial, m.label[path[0]])]
            prod_p = prod.init[path[0] * nq + q]
            for t in range(3):
                q2 = qidx[dfa_step(dfa, dfa.states[q], m.label[path[t + 1]])]
                prod_p *= prod.trans[path[t] * nq + q, acts[t], path[t + 1] * nq + q2]
                q = q2
            assert prod_p == pytest.approx(base_p, abs=1e-12)


def test_pomdp_json_round_trip(tmp_path, two_room):
    path = tmp_path / "two_room.json"
    save_pomdp(two_room, str(path))
    loaded = load_pomdp(str(path))
    assert loaded.states == two_room.states
    assert np.allclose(loaded.trans, two_room.trans)
    assert np.allclose(loaded.emit, two_room.emit)
    assert loaded.label == two_room.label


def test_pomdp_json_missing_row_is_error(tmp_path, two_room):
    import json
    path = tmp_path / "broken.json"
    save_pomdp(two_room, str(path))
    raw = json.loads(path.read_text())
    raw["trans"] = raw["trans"][:-1]
    path.write_text(json.dumps(raw))
    with pytest.raises(ConfigError, match="not listed"):
        load_pomdp(str(path))
