import io
from math import comb, log2

import numpy as np
import pytest

from statemerge.errors import BadInputError, DimensionCapError, TypicalityError
from statemerge.qlin import basis_state, maximally_entangled, random_pure_state, tensor
from statemerge.typ import (
    certify_c1_to_c6,
    merge_parameters,
    n_copies,
    sequence_surprisals,
    sweep,
    tail_union_bound,
    truncate,
    typical_projector,
    write_sweep_csv,
)

# binomial type-class sums for p = (0.2, 0.8), delta = 0.1 (k = 3, 4, 5 at n = 20; k = 2 at n = 10)
RANK_20, WEIGHT_20 = 21489, 0.5981230665110763
RANK_10, WEIGHT_10 = 45, 0.3019898880000002


def _binomial_oracle(p, n, delta):
    s_rate = -(p * log2(p) + (1 - p) * log2(1 - p))
    rank, weight = 0, 0.0
    for k in range(n + 1):
        s = -(k * log2(p) + (n - k) * log2(1 - p))
        if abs(s - n * s_rate) <= n * delta:
            rank += comb(n, k)
            weight += comb(n, k) * p ** k * (1 - p) ** (n - k)
    return rank, weight


def test_frozen_values_match_oracle():
    assert _binomial_oracle(0.2, 20, 0.1) == (RANK_20, pytest.approx(WEIGHT_20))
    assert _binomial_oracle(0.2, 10, 0.1) == (RANK_10, pytest.approx(WEIGHT_10))


def test_enumerated_projector_p02():
    tp = typical_projector([0.2, 0.8], 20, 0.1, mode="enumerate")
    assert tp.explicit
    assert tp.rank == RANK_20
    assert tp.weight == pytest.approx(WEIGHT_20, abs=1e-12)
    assert tp.mask().sum() == RANK_20


def test_count_mode_agrees_with_enumeration():
    for p, n in [([0.2, 0.8], 12), ([0.5, 0.3, 0.2], 6), ([0.1, 0.2, 0.3, 0.4], 5)]:
        a = typical_projector(p, n, 0.15, mode="enumerate")
        b = typical_projector(p, n, 0.15, mode="count")
        assert (a.rank, a.max_eigenvalue, a.min_eigenvalue) == (b.rank, pytest.approx(b.max_eigenvalue),
                                                                 pytest.approx(b.min_eigenvalue))
        assert a.weight == pytest.approx(b.weight, abs=1e-12)


def test_auto_switches_to_counting():
    tp = typical_projector([0.2, 0.8], 40, 0.1)
    assert not tp.explicit
    assert tp.rank == _binomial_oracle(0.2, 40, 0.1)[0]
    with pytest.raises(BadInputError):
        typical_projector([0.2, 0.8], 40, 0.1, mode="enumerate")


def test_uniform_spectrum_full_rank():
    tp = typical_projector([0.5, 0.5], 10, 0.1)
    assert tp.rank == 1024
    assert tp.weight == pytest.approx(1.0)
    assert all(certify_c1_to_c6(tp).values())


def test_certificates_p02():
    tp = typical_projector([0.2, 0.8], 20, 0.1)
    cert = certify_c1_to_c6(tp)
    assert all(cert.values())
    assert tp.weight > typical_projector([0.2, 0.8], 10, 0.1).weight


def test_membership_predicate():
    tp = typical_projector([0.2, 0.8], 10, 0.1)
    seq = [0] * 2 + [1] * 8
    assert tp.contains(seq)
    assert not tp.contains([1] * 10)
    idx = np.ravel_multi_index(seq, (2,) * 10)
    assert tp.mask()[idx]


def test_projector_matrix_is_idempotent_diagonal():
    tp = typical_projector([0.3, 0.7], 6, 0.2)
    m = tp.matrix()
    np.testing.assert_array_equal(m @ m, m)
    np.testing.assert_array_equal(m, np.diag(np.diag(m)))


def test_surprisals_and_validation():
    s = sequence_surprisals([0.5, 0.25, 0.25], 2)
    assert s[0] == pytest.approx(2.0)
    assert s[-1] == pytest.approx(4.0)
    with pytest.raises(BadInputError):
        typical_projector([0.5, 0.6], 4)
    with pytest.raises(BadInputError):
        typical_projector([0.5, 0.5], 0)


def test_sweep_csv():
    rows = sweep([0.2, 0.8], [10, 20], 0.1)
    text = write_sweep_csv(rows)
    lines = text.strip().split("\n")
    assert lines[0] == "n,delta,rank,weight"
    assert lines[2].startswith(f"20,0.1,{RANK_20},")
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    assert buf.getvalue() == text


def test_n_copies_layout_and_marginals(rng):
    psi = random_pure_state([("A", 2), ("B", 2)], rng)
    big = n_copies(psi, 3)
    assert big.layout.parts == (("A", 8), ("B", 8))
    one = psi.reduced(["A"]).matrix
    want = np.kron(np.kron(one, one), one)
    np.testing.assert_allclose(big.reduced(["A"]).matrix, want, atol=1e-12)
    with pytest.raises(DimensionCapError):
        n_copies(psi, 10, cap=2 ** 16)


def test_truncate_maximally_mixed_is_exact():
    psi = tensor(maximally_entangled(2, ("A", "B")), basis_state([("R", 1)], [0]))
    ts = truncate(psi, 4, 0.1)
    assert ts.overlap == pytest.approx(1.0)
    assert ts.trace_distance == pytest.approx(0.0, abs=1e-7)


def test_truncate_random_state_bounds(rng):
    psi = random_pure_state([("A", 2), ("B", 2), ("R", 2)], rng)
    ts = truncate(psi, 4, 0.6, min_overlap=0.3)
    assert ts.trace_distance <= ts.gentle_bound + 1e-9
    assert ts.overlap >= tail_union_bound(ts) - 1e-9
    basis = ts.typical_basis("A")
    np.testing.assert_allclose(basis.conj().T @ basis, np.eye(basis.shape[1]), atol=1e-10)
    params = merge_parameters(ts, ("A", "B", "R"))
    assert params.bracketed


def test_truncate_raises_when_overlap_small(rng):
    psi = random_pure_state([("A", 2), ("B", 2), ("R", 2)], rng)
    with pytest.raises(TypicalityError):
        truncate(psi, 4, 0.0, min_overlap=0.99)
