import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perceptplan.automata import (Dfa, LabelDistributionSequence, canon_symbol,
                                  dfa_complete, dfa_matrices, dfa_run, dfa_step,
                                  load_dfa, save_dfa, weighted_acceptance)
from perceptplan.errors import ConfigError, InputError

from conftest import random_complete_dfa, reach_a_dfa
from oracles import weighted_acceptance_by_words

A = canon_symbol(["a"])
B = canon_symbol(["b"])


def test_canon_symbol_order_independent():
    assert canon_symbol(["tau", "a"]) == canon_symbol(["a", "tau"]) == ("a", "tau")
    assert canon_symbol(["a", "a"]) == ("a",)


def test_dfa_step_examples():
    dfa = reach_a_dfa()
    assert dfa_step(dfa, "q0", B) == "q0"
    assert dfa_step(dfa, "q0", A) == "q1"
    assert dfa_step(dfa, "q1", B) == "q1"


def test_dfa_step_rejects_unknown_tokens():
    dfa = reach_a_dfa()
    with pytest.raises(InputError, match="q7"):
        dfa_step(dfa, "q7", A)
    with pytest.raises(InputError, match="zzz"):
        dfa_step(dfa, "q0", ["zzz"])


def test_dfa_run_examples():
    dfa = reach_a_dfa()
    assert dfa_run(dfa, []) == "q0"
    assert dfa_run(dfa, [B, B, A]) == "q1"
    assert dfa_run(dfa, [B, B, B]) == "q0"


def test_dfa_complete_total_input_unchanged():
    dfa = reach_a_dfa()
    assert dfa_complete(dfa) is dfa


def test_dfa_complete_adds_one_sink():
    dfa = reach_a_dfa()
    partial = Dfa(states=dfa.states, alphabet=dfa.alphabet,
                  delta={k: v for k, v in dfa.delta.items() if k[0] != "q1"},
                  initial="q0", final=dfa.final)
    done = dfa_complete(partial)
    assert len(done.states) == 3
    assert done.final == dfa.final
    sink = done.states[-1]
    assert all(done.delta[(sink, s)] == sink for s in done.alphabet)


def test_dfa_complete_preserves_language_on_defined_paths():
    # completion oracle: enumerate all words up to length 4 on both automata
    dfa = reach_a_dfa()
    partial = Dfa(states=dfa.states, alphabet=dfa.alphabet,
                  delta={k: v for k, v in dfa.delta.items() if k[0] != "q1"},
                  initial="q0", final=dfa.final)
    done = dfa_complete(partial)
    for length in range(5):
        for word in itertools.product(dfa.alphabet, repeat=length):
            q = "q0"
            defined = True
            for sigma in word:
                if (q, sigma) not in partial.delta:
                    defined = False
                    break
                q = partial.delta[(q, sigma)]
            if defined:
                assert (dfa_run(done, word) in done.final) == (q in dfa.final)


def test_dfa_matrices_single_symbols():
    mats = dfa_matrices(reach_a_dfa())
    assert mats.alpha @ mats.trans[A] @ mats.beta == 1.0
    assert mats.alpha @ mats.trans[B] @ mats.beta == 0.0


def test_dfa_matrices_structure():
    mats = dfa_matrices(reach_a_dfa())
    assert mats.alpha.sum() == 1.0 and set(np.unique(mats.alpha)) <= {0.0, 1.0}
    for m in mats.trans.values():
        assert (m.sum(axis=1) == 1.0).all()
        assert set(np.unique(m)) <= {0.0, 1.0}


def test_dfa_matrices_requires_complete():
    dfa = reach_a_dfa()
    partial = Dfa(states=dfa.states, alphabet=dfa.alphabet,
                  delta={k: v for k, v in dfa.delta.items() if k[0] != "q1"},
                  initial="q0", final=dfa.final)
    with pytest.raises(ConfigError):
        dfa_matrices(partial)


@pytest.mark.parametrize("seed", range(6))
def test_matrix_acceptance_matches_run_membership(seed):
    # exhaustive: every word up to length 5, alphabets up to size 4
    rng = np.random.default_rng(seed)
    dfa = random_complete_dfa(rng, nq=int(rng.integers(2, 5)), n_aps=2)
    mats = dfa_matrices(dfa)
    for length in range(6):
        for word in itertools.product(dfa.alphabet, repeat=length):
            vec = mats.alpha.copy()
            for sigma in word:
                vec = vec @ mats.trans[sigma]
            assert vec @ mats.beta == (1.0 if dfa_run(dfa, word) in dfa.final else 0.0)


def test_weighted_acceptance_point_mass_word():
    dfa = reach_a_dfa()
    mats = dfa_matrices(dfa)
    dists = LabelDistributionSequence.from_maps([{("b",): 1.0}, {("b",): 1.0}, {("a",): 1.0}])
    assert weighted_acceptance(mats, dists) == 1.0


def test_weighted_acceptance_uniform_two_steps():
    # accepted words of length 2 over {a, b}: aa, ab, ba -> 3/4
    dfa = reach_a_dfa()
    mats = dfa_matrices(dfa)
    uniform = {("a",): 0.5, ("b",): 0.5}
    dists = LabelDistributionSequence.from_maps([uniform, uniform])
    assert weighted_acceptance(mats, dists) == pytest.approx(0.75, abs=1e-12)


def test_weighted_acceptance_all_final():
    rng = np.random.default_rng(3)
    dfa = random_complete_dfa(rng, nq=3, n_aps=1)
    dfa = Dfa(states=dfa.states, alphabet=dfa.alphabet, delta=dfa.delta,
              initial=dfa.initial, final=frozenset(dfa.states))
    mats = dfa_matrices(dfa)
    uniform = {s: 1.0 / len(dfa.alphabet) for s in dfa.alphabet}
    dists = LabelDistributionSequence.from_maps([uniform] * 3)
    assert weighted_acceptance(mats, dists) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_weighted_acceptance_matches_word_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    dfa = random_complete_dfa(rng, nq=int(rng.integers(2, 5)), n_aps=1)
    steps = int(rng.integers(1, 5))
    maps = []
    for _ in range(steps):
        w = rng.random(len(dfa.alphabet))
        w /= w.sum()
        maps.append({s: float(p) for s, p in zip(dfa.alphabet, w)})
    dists = LabelDistributionSequence.from_maps(maps)
    for target in ("final", "secret"):
        got = weighted_acceptance(dfa_matrices(dfa), dists, target)
        want = weighted_acceptance_by_words(dfa, [dict(d) for d in dists.dists], target)
        assert got == pytest.approx(want, abs=1e-10)
        assert -1e-12 <= got <= 1.0 + 1e-12


@given(lam=st.floats(0.0, 1.0))
@settings(max_examples=25, deadline=None)
def test_weighted_acceptance_linear_in_first_step(lam):
    dfa = reach_a_dfa()
    mats = dfa_matrices(dfa)
    d1 = {("a",): 0.9, ("b",): 0.1}
    d2 = {("a",): 0.2, ("b",): 0.8}
    tail = {("a",): 0.5, ("b",): 0.5}
    mix = {s: lam * d1[s] + (1 - lam) * d2[s] for s in d1}
    v_mix = weighted_acceptance(mats, LabelDistributionSequence.from_maps([mix, tail]))
    v1 = weighted_acceptance(mats, LabelDistributionSequence.from_maps([d1, tail]))
    v2 = weighted_acceptance(mats, LabelDistributionSequence.from_maps([d2, tail]))
    assert v_mix == pytest.approx(lam * v1 + (1 - lam) * v2, abs=1e-12)


def test_label_distribution_validation():
    with pytest.raises(InputError):
        LabelDistributionSequence.from_maps([{("a",): 0.7, ("b",): 0.7}])


def test_load_dfa_reports_sink(tmp_path):
    dfa = reach_a_dfa()
    full = tmp_path / "full.json"
    save_dfa(dfa, str(full))
    loaded, added = load_dfa(str(full))
    assert not added
    assert dfa_run(loaded, [B, A]) == "q1"

    partial = Dfa(states=dfa.states, alphabet=dfa.alphabet,
                  delta={k: v for k, v in dfa.delta.items() if k[0] != "q1"},
                  initial="q0", final=dfa.final)
    part = tmp_path / "partial.json"
    save_dfa(partial, str(part))
    loaded, added = load_dfa(str(part))
    assert added and loaded.is_complete()


def test_load_dfa_missing_field(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"states": ["q0"]}')
    with pytest.raises(ConfigError, match="missing required"):
        load_dfa(str(path))
