import networkx as nx
import numpy as np
import pytest

from helpers import DPPC, DPPC_BASELINE, decodable_graphs, nx_isomorphic, to_networkx
from molrl.molgraph import (
    aromatic_rings, canonical_form, cyclomatic_number, exact_match, molecular_weight, permute, ring_info, sssr,
    structural_info,
)
from molrl.selfies import decode_selfies


def test_methane_weight():
    assert molecular_weight(decode_selfies("[C]")) == pytest.approx(12.011 + 4 * 1.008, abs=0.01)


def test_appendix_weights(thio, asp):
    assert molecular_weight(thio) == pytest.approx(112.15, abs=0.05)
    assert molecular_weight(asp) == pytest.approx(149.22, abs=0.05)


def test_appendix_ring_info(thio, asp):
    assert ring_info(asp) == (1, 0)
    assert ring_info(thio) == (1, 1)
    assert ring_info(decode_selfies("[C][C][C][C][C][C]")) == (0, 0)


def test_prompt_sentences(asp):
    assert structural_info(asp).sentences() == [
        "The molecule has 1 ring(s), including 0 aromatic ring(s).",
        "The molecular weight is approximately 149.22 g/mol.",
    ]


@pytest.mark.parametrize("text,aromatic", [
    ("[C][=C][C][=C][C][=C][Ring1][=Branch1]", 1),  # benzene
    ("[C][=C][O][C][=C][Ring1][Branch1]", 1),  # furan
    ("[C][=C][NH1][C][=C][Ring1][Branch1]", 1),  # pyrrole
    ("[C][=C][C][=C][Ring1][Ring1]", 0),  # cyclobutadiene, 4 pi electrons
    ("[C][C][C][C][C][C][Ring1][=Branch1]", 0),  # cyclohexane
])
def test_aromaticity(text, aromatic):
    assert len(aromatic_rings(decode_selfies(text))) == aromatic


def test_canonical_determinism_and_methanol():
    assert canonical_form(decode_selfies(DPPC)) == canonical_form(decode_selfies(DPPC))
    co, oc = decode_selfies("[C][O]"), decode_selfies("[O][C]")
    assert nx_isomorphic(co, oc)
    assert canonical_form(co) == canonical_form(oc)
    assert canonical_form(decode_selfies("[C]")) != canonical_form(decode_selfies("[C][C]"))


def test_case_one_baseline_is_wrong():
    gold, base = decode_selfies(DPPC), decode_selfies(DPPC_BASELINE)
    assert exact_match(gold, gold)
    assert not exact_match(gold, base)


def test_canonical_form_matches_isomorphism():
    rng = np.random.default_rng(3)
    graphs = [g for _, g in decodable_graphs(rng, 120, max_len=8, max_atoms=8)]
    for i in range(0, len(graphs) - 1, 2):
        a, b = graphs[i], graphs[i + 1]
        assert (canonical_form(a) == canonical_form(b)) == nx_isomorphic(a, b)


def test_permutation_invariance_small(rng):
    for _, g in decodable_graphs(rng, 40, max_len=10, max_atoms=8):
        perm = rng.permutation(len(g.atoms))
        h = permute(g, perm)
        assert exact_match(g, h)


@pytest.mark.slow
def test_thousand_permutations(rng):
    for text in (DPPC, "[O][=C][Branch1][C][O-1][C][C][S][S][C][Ring1][Branch1]"):
        g = decode_selfies(text)
        ref = canonical_form(g)
        for _ in range(1000):
            assert canonical_form(permute(g, rng.permutation(len(g.atoms)))) == ref


def test_exact_match_equivalence(rng):
    graphs = [g for _, g in decodable_graphs(rng, 30, max_len=6)]
    for a in graphs:
        assert exact_match(a, a)
        for b in graphs:
            assert exact_match(a, b) == exact_match(b, a)
            if exact_match(a, b):
                assert all(exact_match(a, c) == exact_match(b, c) for c in graphs)


def test_ring_count_vs_cycle_basis(rng):
    for _, g in decodable_graphs(rng, 300, max_len=16, max_atoms=12):
        basis = nx.cycle_basis(to_networkx(g))
        assert cyclomatic_number(g) == len(basis) == ring_info(g)[0]
        assert ring_info(g)[1] <= ring_info(g)[0]
        assert len(sssr(g)) == len(basis)
