import math

import numpy as np
import pytest

from statemerge.errors import BadInputError, DimensionCapError
from statemerge.merge import (
    build_instrument,
    classical_cost_check,
    decode_outcomes,
    entanglement_ledger_check,
    lemma3_average_check,
    merge_target,
    post_measurement,
    prepare_merge_state,
    qe_bound,
    qe_scaling,
    quantum_error,
    run_merging,
    twirl_analytic,
    twirl_coefficients,
    twirl_monte_carlo,
)
from statemerge.qlin import (
    basis_state,
    maximally_entangled,
    random_density,
    random_pure_state,
    swap_and_projectors,
    tensor,
)


def epr_state():
    return tensor(maximally_entangled(2, ("A", "B")), basis_state([("R", 1)], [0]))


def epr_ar_state():
    return tensor(maximally_entangled(2, ("A", "R")), basis_state([("B", 2)], [0])).permute(["A", "B", "R"])


def test_instrument_counting(rng):
    inst = build_instrument(6, 4, rng)
    assert (inst.N, inst.L_rem, inst.num_outcomes) == (1, 2, 2)
    inst = build_instrument(4, 1, rng)
    assert (inst.N, inst.L_rem) == (4, 0)
    inst = build_instrument(5, 5, rng)
    assert (inst.N, inst.L_rem, inst.num_outcomes) == (1, 0, 1)
    for d, L in [(6, 4), (7, 2), (8, 3), (4, 4)]:
        assert build_instrument(d, L, rng).completeness_error() < 1e-12
    with pytest.raises(BadInputError):
        build_instrument(3, 4, rng)
    with pytest.raises(BadInputError):
        build_instrument(3, 1, rng).element(5)


def test_remainder_is_zero_padded(rng):
    inst = build_instrument(6, 4, rng)
    rem = inst.element(0)
    assert rem.shape == (4, 6)
    np.testing.assert_allclose(rem[2:], 0)
    np.testing.assert_allclose(rem[:2], inst.unitary[4:])


def test_post_measurement_epr_rank_one(rng):
    meas = post_measurement(epr_state(), build_instrument(2, 1, rng))
    assert [o.probability for o in meas.outcomes] == pytest.approx([0.5, 0.5])
    assert meas.total_probability == pytest.approx(1.0)


def test_post_measurement_product_full_rank(rng):
    psi = tensor(basis_state([("A", 3)], [1]), random_pure_state([("B", 2), ("R", 2)], rng))
    inst = build_instrument(3, 3, rng)
    meas = post_measurement(psi, inst)
    assert len(meas.outcomes) == 1
    assert meas.outcomes[0].probability == pytest.approx(1.0)
    want = inst.unitary @ np.eye(3)[1]
    got = meas.outcomes[0].state.matrix(["A1"])
    np.testing.assert_allclose(got, np.outer(want, psi.matrix(["A"])[1]), atol=1e-12)


def test_probabilities_sum_to_one(rng):
    for _ in range(20):
        psi = random_pure_state([("A", 6), ("B", 2), ("R", 2)], rng)
        meas = post_measurement(psi, build_instrument(6, 4, rng))
        assert meas.total_probability == pytest.approx(1.0, abs=1e-12)


def test_quantum_error_examples(rng):
    psi = random_pure_state([("A", 4), ("B", 4)], rng)
    psi = tensor(psi, basis_state([("R", 1)], [0]))
    meas = post_measurement(psi, build_instrument(4, 2, rng))
    rho_R = psi.reduced(["R"])
    direct = sum(o.probability * np.sum(np.abs(np.linalg.eigvalsh(
        o.state.reduced(["A1"]).matrix - np.eye(2) / 2))) for o in meas.outcomes)
    assert quantum_error(meas, 2, rho_R) == pytest.approx(direct)
    # EPR with L = 1: every outcome is a product, error 0
    meas = post_measurement(epr_state(), build_instrument(2, 1, rng))
    assert quantum_error(meas, 1, epr_state().reduced(["R"])) == pytest.approx(0.0, abs=1e-12)


def test_qe_bound_values():
    assert qe_bound(4, 64, 1, 64) == pytest.approx(0.625)
    assert qe_bound(1, 8, 1e-12, 1.0) == pytest.approx(2 / 8, abs=1e-5)
    with pytest.raises(BadInputError):
        qe_bound(0, 4, 1, 1)
    # exponent form agrees with the direct bound
    n, sa, sb, sab, r = 6, 1.0, 1.0, 0.0, 1 / 3
    direct = qe_bound(2 ** (n * r), 2 ** (n * sa), 2 ** (n * sab), 2 ** (n * sb))
    assert qe_scaling(n, sa, sb, sab, r) == pytest.approx(direct)


def test_twirl_analytic_values():
    f, _, _ = swap_and_projectors(2)
    np.testing.assert_allclose(twirl_analytic(2, 1), (np.eye(4) + f) / 6, atol=1e-15)
    for d in (2, 3, 4):
        np.testing.assert_allclose(twirl_analytic(d, d), swap_and_projectors(d)[0], atol=1e-15)
        for L in range(1, d + 1):
            assert np.trace(twirl_analytic(d, L)) == pytest.approx(L)
    assert twirl_coefficients(3, 3) == pytest.approx((0.0, 1.0))
    with pytest.raises(BadInputError):
        twirl_coefficients(1, 1)


def test_twirl_monte_carlo_close():
    mc = twirl_monte_carlo(3, 2, 1500, 11)
    assert np.max(np.abs(mc - twirl_analytic(3, 2))) < 0.03
    assert np.trace(mc).real == pytest.approx(2.0)


def test_partial_isometry_average_pure_full_rank_is_deterministic(rng):
    psi = random_pure_state([("A", 4), ("R", 2)], rng)
    chk = lemma3_average_check(psi.dm(), 4, 50, rng)
    assert chk.stderr == pytest.approx(0.0, abs=1e-12)
    assert chk.mc_mean == pytest.approx(chk.exact_mean, abs=1e-12)
    assert chk.bound == pytest.approx(1.0)


def test_partial_isometry_average_monte_carlo_matches_exact(rng):
    for _ in range(5):
        rho = random_density([("A", 4), ("R", 2)], rng)
        chk = lemma3_average_check(rho, 2, 1000, rng)
        assert abs(chk.mc_mean - chk.exact_mean) <= 4 * chk.stderr + 1e-12
        assert chk.holds
        assert chk.exact_mean <= chk.bound + 1e-12


def test_merge_target_layout():
    t = merge_target(epr_state(), 2)
    assert t.layout.labels == ("A1", "B1", "Bp", "B", "R")
    np.testing.assert_allclose(t.reduced(["A1"]).matrix, np.eye(2) / 2, atol=1e-12)


def test_decode_zero_error_outcomes(rng):
    psi = epr_state()
    meas = post_measurement(psi, build_instrument(2, 1, rng))
    fids = decode_outcomes(meas, 1, merge_target(psi, 1))
    assert fids == pytest.approx([1.0, 1.0])


def test_decode_state_transport(rng):
    # trivial reference and L = 1: Bob only has to rebuild Alice's share
    psi = tensor(random_pure_state([("A", 3), ("B", 2)], rng), basis_state([("R", 1)], [0]))
    meas = post_measurement(psi, build_instrument(3, 1, rng))
    assert min(decode_outcomes(meas, 1, merge_target(psi, 1))) == pytest.approx(1.0, abs=1e-9)


def test_fidelity_vs_quantum_error_random(rng):
    for seed in range(8):
        psi = random_pure_state([("A", 4), ("B", 3), ("R", 2)], np.random.default_rng(seed))
        rep = run_merging(psi, 1, 2, trials=2, rng=seed)
        assert rep.bound_chain()["infidelity_vs_qe"]


def test_run_merging_epr_small():
    rep = run_merging(epr_state(), 2, 2, trials=3, rng=0)
    assert rep.ebits_out == pytest.approx(1.0)
    assert rep.ebits_in == 0.0
    assert rep.cbits == pytest.approx(math.log2(3))
    assert rep.mean_fidelity > 0.99
    assert rep.bound_chain() == {"infidelity_vs_qe": True, "qe_vs_bound": True}
    assert len(rep.trial_q_e) == 3


def test_run_merging_seed_reproducible():
    a = run_merging(epr_state(), 2, 2, trials=2, rng=3)
    b = run_merging(epr_state(), 2, 2, trials=2, rng=3)
    assert a.to_json() == b.to_json()


def test_prepare_with_borrowed_entanglement():
    st, dist = prepare_merge_state(epr_ar_state(), 1, K=2)
    assert st.layout.parts == (("A", 4), ("B", 4), ("R", 2))
    assert dist == 0.0
    # S(B) = 1 from the borrowed pair alone
    evals = np.linalg.eigvalsh(st.reduced(["B"]).matrix)
    assert np.sort(evals)[-2:] == pytest.approx([0.5, 0.5])


def test_cap_and_argument_errors():
    with pytest.raises(DimensionCapError):
        run_merging(epr_state(), 9, 1)
    with pytest.raises(BadInputError):
        run_merging(epr_state(), 1, 3)
    with pytest.raises(BadInputError):
        run_merging(epr_state(), 0, 1)


def test_ledger_and_classical_cost():
    psi = epr_state()
    rep = run_merging(psi, 2, 4, trials=2, rng=1)
    led = entanglement_ledger_check(rep, psi)
    assert led.holds
    # perfect run: log L + n S(AB) <= n S(B) + log K
    assert led.nominal_out <= led.e_in + 1e-12
    rate, iar, note = classical_cost_check(rep, psi)
    assert iar == pytest.approx(0.0, abs=1e-12)
    assert rate == pytest.approx(rep.cbits / 2)
    assert "no violation" in note


def test_product_state_needs_no_entanglement(rng):
    psi = tensor(basis_state([("A", 2)], [0]), random_pure_state([("B", 2), ("R", 2)], rng))
    rep = run_merging(psi, 1, 1, trials=2, rng=0)
    assert rep.mean_fidelity == pytest.approx(1.0, abs=1e-9)
    assert rep.ebits_out - rep.ebits_in == 0.0
    led = entanglement_ledger_check(rep, psi)
    assert led.holds


def test_positive_partial_information_needs_more_borrowed_pairs():
    # at K = 4 the borrowed pairs only just cover n S(A|B) = 2; doubling twice clears 0.9
    low = run_merging(epr_ar_state(), 2, 1, K=4, trials=10, rng=5)
    high = run_merging(epr_ar_state(), 2, 1, K=16, trials=10, rng=5)
    assert low.mean_fidelity < 0.9 <= high.mean_fidelity
    assert high.ebits_in == 4.0
