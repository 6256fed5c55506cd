"""Feasibility recovery, isometry constants, and the golfing certificate."""

import numpy as np
import pytest

from psdlift import (
    CertificateReport,
    GolfingParams,
    GolfingStageError,
    InfeasibleError,
    MeasurementSet,
    MomentCoefficients,
    Spectrum,
    SymMatrix,
    check_certificate,
    deterministic_guarantee,
    expectation_operator,
    fro_norm,
    golfing_certificate,
    golfing_depth,
    haar_batch,
    hs_basis,
    hs_inner,
    isometry_constants,
    load_measurements,
    measure,
    r_operator,
    rank1,
    rng_for,
    save_measurements,
    solve_feasibility,
    tangent_basis,
    TangentAnchor,
    tangent_decompose,
    tangent_project,
    truncated_r,
)

E1_6 = Spectrum.projector(6, 1)


def unit_vector(rng, d):
    x = rng.standard_normal(d)
    return x / np.linalg.norm(x)


# --- measurements -----------------------------------------------------------


def test_measure_values_are_quadratic_forms():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(4)
    stack = haar_batch(Spectrum.projector(4, 2), 5, rng)
    m = measure(x, stack)
    assert m.size == 5
    assert m.dim == 4
    for p, b in zip(m.matrices, m.values):
        assert b == pytest.approx(x @ p.entries @ x, rel=1e-12)
    assert m.trace_value == pytest.approx(x @ x, rel=1e-12)


def test_measurement_set_validation():
    p = SymMatrix(np.eye(2))
    with pytest.raises(ValueError):
        MeasurementSet((p,), np.array([1.0, 2.0]), 1.0)  # length mismatch
    with pytest.raises(ValueError):
        MeasurementSet((p,), np.array([1.0]), -0.5)  # negative trace


def test_measurements_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.standard_normal(3)
    m = measure(x, haar_batch(Spectrum.projector(3, 1), 4, rng))
    path = tmp_path / "meas.txt"
    save_measurements(path, m)
    loaded = load_measurements(path)
    assert loaded.size == m.size
    assert np.array_equal(loaded.values, m.values)
    assert loaded.trace_value == m.trace_value
    for a, b in zip(loaded.matrices, m.matrices):
        assert np.array_equal(a.entries, b.entries)


# --- feasibility solver -------------------------------------------------------


def test_recovery_with_many_measurements_is_exact():
    rng = rng_for(21, 0)
    x = unit_vector(rng, 6)
    m = measure(x, haar_batch(E1_6, 40, rng))
    res = solve_feasibility(m, tol=1e-9, max_iter=5000)
    assert res.converged
    err = fro_norm(SymMatrix(res.X_hat.entries - np.outer(x, x)))
    assert err < 1e-6
    assert res.spectral_gap > 0.9
    assert min(np.linalg.norm(res.extracted_x - x),
               np.linalg.norm(res.extracted_x + x)) < 1e-3


def test_recovery_scales_with_input_norm():
    rng = rng_for(21, 1)
    x = 3.0 * unit_vector(rng, 5)
    m = measure(x, haar_batch(Spectrum.projector(5, 1), 30, rng))
    res = solve_feasibility(m, tol=1e-9, max_iter=5000)
    err = fro_norm(SymMatrix(res.X_hat.entries - np.outer(x, x)))
    assert err < 1e-5 * (x @ x)


def test_recovery_reports_iterations_and_residual():
    rng = rng_for(21, 2)
    x = unit_vector(rng, 5)
    m = measure(x, haar_batch(Spectrum.projector(5, 1), 12, rng))
    res = solve_feasibility(m, tol=1e-7, max_iter=4000)
    assert res.iterations >= 1
    assert res.feasibility_residual >= 0.0
    if res.converged:
        assert res.feasibility_residual <= 1e-7 * max(1.0, abs(m.trace_value))


def test_zero_trace_shortcut():
    p = SymMatrix(np.eye(3) / 3)
    m = MeasurementSet((p,), np.array([0.0]), 0.0)
    res = solve_feasibility(m)
    assert np.array_equal(res.X_hat.entries, np.zeros((3, 3)))
    assert res.converged
    with pytest.raises(InfeasibleError):
        solve_feasibility(MeasurementSet((p,), np.array([0.5]), 0.0))


def test_inconsistent_values_raise():
    # same matrix listed twice with contradictory values
    p = SymMatrix(np.diag([1.0, 0.0]))
    m = MeasurementSet((p, p), np.array([0.3, 0.6]), 1.0)
    with pytest.raises(InfeasibleError):
        solve_feasibility(m)


def test_solver_accepts_matrix_list_or_stack():
    rng = rng_for(21, 3)
    x = unit_vector(rng, 4)
    stack = haar_batch(Spectrum.projector(4, 1), 20, rng)
    a = solve_feasibility(measure(x, stack), tol=1e-8)
    b = solve_feasibility(measure(x, [SymMatrix(s) for s in stack]), tol=1e-8)
    assert np.allclose(a.X_hat.entries, b.X_hat.entries, atol=1e-12)


# --- isometry constants ---------------------------------------------------------


def test_isometry_constants_against_direct_gram():
    rng = rng_for(22, 0)
    d = 5
    x = unit_vector(rng, d)
    stack = haar_batch(Spectrum.projector(d, 1), 60, rng)
    iso = isometry_constants(stack, x)

    tb = tangent_basis(TangentAnchor(x))
    inner_t = np.array([[hs_inner(SymMatrix(p), b) for b in tb] for p in stack])
    gram_t = inner_t.T @ inner_t / len(stack)
    fb = hs_basis(d)
    inner_f = np.array([[hs_inner(SymMatrix(p), b) for b in fb] for p in stack])
    gram_f = inner_f.T @ inner_f / len(stack)

    assert iso.alpha == pytest.approx(np.linalg.eigvalsh(gram_t).min(), rel=1e-9, abs=1e-12)
    assert iso.beta_exact == pytest.approx(np.linalg.eigvalsh(gram_f).max(), rel=1e-9)
    assert iso.alpha <= iso.beta_exact + 1e-12
    assert iso.beta_bound == 1  # rank-one atoms


def test_isometry_beta_bound_counts_atom_rank():
    rng = rng_for(22, 1)
    x = unit_vector(rng, 5)
    stack = haar_batch(Spectrum.projector(5, 2), 30, rng)
    assert isometry_constants(stack, x).beta_bound == 2


def test_guarantee_truth_table():
    assert deterministic_guarantee(alpha=1.0, beta=1.0, gamma=0.0, delta=0.0)
    assert not deterministic_guarantee(alpha=0.0, beta=1.0, gamma=0.0, delta=0.0)
    assert not deterministic_guarantee(alpha=1.0, beta=1.0, gamma=0.1, delta=1.0)
    # strict inequality at the threshold sqrt(beta/alpha) = (1 - delta)/gamma
    assert not deterministic_guarantee(alpha=1.0, beta=4.0, gamma=0.25, delta=0.5)
    assert deterministic_guarantee(alpha=1.0, beta=4.0, gamma=0.24, delta=0.5)


# --- frame operator --------------------------------------------------------------


def test_r_operator_is_scaled_sample_average():
    rng = rng_for(23, 0)
    d = 4
    coeffs = MomentCoefficients.from_spectrum(Spectrum.projector(d, 1))
    stack = haar_batch(Spectrum.projector(d, 1), 9, rng)
    z = SymMatrix(np.diag([1.0, -1.0, 0.5, 0.0]))
    acc = np.zeros((d, d))
    for p in stack:
        acc += np.tensordot(p, z.entries) * p
    want = coeffs.a1 * acc / len(stack)
    got = r_operator(stack, coeffs, z).entries
    assert np.allclose(got, want, atol=1e-12)


def test_r_operator_concentrates_on_first_order_map():
    rng = rng_for(23, 1)
    d = 4
    lam = Spectrum.projector(d, 1)
    coeffs = MomentCoefficients.from_spectrum(lam)
    z = SymMatrix(np.diag([2.0, 1.0, 0.0, -1.0]))
    stack = haar_batch(lam, 200_000, rng)
    got = r_operator(stack, coeffs, z).entries
    want = coeffs.a1 * expectation_operator(coeffs, z).entries
    assert np.allclose(got, want, atol=0.05)


def tangent_probe(rng, anchor, d):
    g = rng.standard_normal((d, d))
    return tangent_project(anchor, SymMatrix(g + g.T))


def test_truncated_r_with_huge_threshold_keeps_everything():
    rng = rng_for(23, 2)
    d = 5
    lam = Spectrum.projector(d, 1)
    coeffs = MomentCoefficients.from_spectrum(lam)
    anchor = TangentAnchor(unit_vector(rng, d))
    stack = haar_batch(lam, 12, rng)
    z = tangent_probe(rng, anchor, d)
    full = r_operator(stack, coeffs, z).entries
    kept = truncated_r(stack, coeffs, anchor, z, s=1e6, t=3, r_rate=1 / 3, X=z).entries
    assert np.allclose(kept, full, atol=1e-12)


def test_truncated_r_with_negative_threshold_drops_everything():
    rng = rng_for(23, 3)
    d = 5
    lam = Spectrum.projector(d, 1)
    coeffs = MomentCoefficients.from_spectrum(lam)
    anchor = TangentAnchor(unit_vector(rng, d))
    stack = haar_batch(lam, 12, rng)
    z = tangent_probe(rng, anchor, d)
    out = truncated_r(stack, coeffs, anchor, z, s=-1.0, t=3, r_rate=1 / 3, X=z).entries
    assert np.array_equal(out, np.zeros((d, d)))


def test_truncated_r_drops_only_heavy_atoms():
    rng = rng_for(23, 4)
    d = 6
    lam = Spectrum.projector(d, 1)
    coeffs = MomentCoefficients.from_spectrum(lam)
    anchor = TangentAnchor(unit_vector(rng, d))
    z = tangent_probe(rng, anchor, d)
    # one atom aligned with the anchor (huge inner product), the rest generic
    aligned = np.outer(anchor.unit_x, anchor.unit_x)[None]
    stack = np.concatenate([aligned, haar_batch(lam, 11, rng)], axis=0)
    _, zhat = tangent_decompose(anchor, z)
    thr_small = 0.9  # keeps generic atoms (inner products O(1/sqrt(d))), drops the aligned one
    s_for = lambda thr: thr / (3 * 1) * d ** (1 / 3) - 1  # invert (s+1) t k d^-r = thr
    out = truncated_r(stack, coeffs, anchor, z, s=s_for(thr_small), t=3,
                      r_rate=1 / 3, X=z).entries
    manual = np.zeros((d, d))
    uu = np.outer(anchor.unit_x, anchor.unit_x)
    zz = np.outer(zhat, zhat)
    for p in stack:
        if abs(np.tensordot(p, uu)) <= thr_small and abs(np.tensordot(p, zz)) <= thr_small:
            manual += np.tensordot(p, z.entries) * p
    manual *= coeffs.a1 / len(stack)
    assert np.allclose(out, manual, atol=1e-12)
    full = r_operator(stack, coeffs, z).entries
    assert not np.allclose(out, full, atol=1e-6)


# --- golfing ----------------------------------------------------------------------


def test_golfing_depth_formula():
    from math import ceil, log
    for d in (4, 8, 16, 50):
        for c0 in (2.0, 6.0, 10.0):
            want = ceil(log(d) / log(c0 / np.sqrt(2.0))) + 2
            assert golfing_depth(d, c0) == want


def test_golfing_params_resolution():
    s, r_rate, batch = GolfingParams(c0=6.0).resolved(d=8, t=3)
    assert s == pytest.approx(6.0)
    assert r_rate == pytest.approx(1.0 / 3.0)
    assert batch >= 1
    explicit = GolfingParams(c0=6.0, s=2.0, r_rate=0.5, batch_size=17)
    assert explicit.resolved(d=8, t=3) == (2.0, 0.5, 17)
    with pytest.raises(ValueError):
        GolfingParams(c0=1.0).resolved(d=8)  # decay base must exceed sqrt(2)


def test_golfing_certificate_from_orbit_source():
    rng = rng_for(24, 0)
    d = 8
    x = unit_vector(rng, d)
    params = GolfingParams(c0=6.0, batch_mult=1.0, max_repeats=60)
    rep = golfing_certificate(x, Spectrum.projector(d, 1), params, rng)
    assert isinstance(rep, CertificateReport)
    depth = golfing_depth(d, 6.0)
    assert rep.batches_used == depth
    assert len(rep.q_norms) == depth + 1
    assert len(rep.repeats) == depth
    # each accepted stage contracts the tangent residual by sqrt(2)/c0
    ratios = np.array(rep.q_norms[1:]) / np.array(rep.q_norms[:-1])
    assert np.all(ratios <= np.sqrt(2.0) / 6.0 + 1e-12)
    assert rep.in_span
    assert 0 <= rep.delta_measured < 1.0
    assert rep.gamma_measured >= 0.0
    # reported numbers are the tangent Frobenius gap and off-tangent operator norm
    anchor = TangentAnchor(x)
    y_tan = tangent_project(anchor, rep.Y)
    tan_gap = fro_norm(SymMatrix(y_tan.entries - np.outer(x, x)))
    off_op = np.abs(np.linalg.eigvalsh(rep.Y.entries - y_tan.entries)).max()
    assert tan_gap == pytest.approx(rep.gamma_measured, rel=1e-9, abs=1e-12)
    assert off_op == pytest.approx(rep.delta_measured, rel=1e-9, abs=1e-12)


def test_golfing_certificate_scales_with_anchor_norm():
    d = 8
    params = GolfingParams(c0=6.0, batch_mult=1.0, max_repeats=60)
    rng = rng_for(24, 9)
    x = unit_vector(rng, d)
    rep_unit = golfing_certificate(x, Spectrum.projector(d, 1), params, rng_for(24, 10))
    rep_scaled = golfing_certificate(3.0 * x, Spectrum.projector(d, 1), params, rng_for(24, 10))
    # same atom stream, certificate rescaled by |x|^2
    assert np.allclose(rep_scaled.Y.entries, 9.0 * rep_unit.Y.entries, atol=1e-10)
    assert rep_scaled.gamma_measured == pytest.approx(9.0 * rep_unit.gamma_measured, rel=1e-9)


def test_golfing_certificate_checks_out():
    rng = rng_for(24, 1)
    d = 10
    x = unit_vector(rng, d)
    params = GolfingParams(c0=6.0, batch_mult=1.0, max_repeats=60)
    rep = golfing_certificate(x, Spectrum.projector(d, 1), params, rng)
    chk = check_certificate(rep.Y, x, rep.atoms, gamma=rep.gamma_measured + 1e-12,
                            delta=rep.delta_measured + 1e-12)
    assert chk.passes
    assert chk.in_span
    # claiming tighter constants than measured must fail
    tight = check_certificate(rep.Y, x, rep.atoms, gamma=rep.gamma_measured / 10,
                              delta=rep.delta_measured / 10)
    assert not tight.passes


def test_golfing_certificate_from_finite_ensemble():
    from psdlift import construct_cubature
    rng = rng_for(24, 2)
    d = 5
    ens = construct_cubature(Spectrum.projector(d, 1), 3, pool_size=900,
                             target_residual=1e-8, rng=rng)
    x = unit_vector(rng, d)
    params = GolfingParams(c0=6.0, batch_mult=2.0, max_repeats=80)
    rep = golfing_certificate(x, ens, params, rng)
    assert rep.in_span
    assert rep.delta_measured < 1.0
    iso = isometry_constants(rep.atoms, x)
    assert deterministic_guarantee(iso.alpha, iso.beta_exact,
                                   rep.gamma_measured, rep.delta_measured)


def test_golfing_exhausted_budget_raises_with_context():
    rng = rng_for(24, 3)
    d = 8
    x = unit_vector(rng, d)
    # a two-atom batch cannot approximate the frame operator; force failure
    params = GolfingParams(c0=6.0, batch_size=2, max_repeats=3)
    with pytest.raises(GolfingStageError) as exc_info:
        golfing_certificate(x, Spectrum.projector(d, 1), params, rng)
    err = exc_info.value
    assert err.stage >= 0
    assert err.attempts == 3
    assert err.off_tangent > 0 or err.tangent_gap > 0


def test_guarantee_and_recovery_agree_end_to_end():
    rng = rng_for(24, 4)
    d = 8
    x = unit_vector(rng, d)
    params = GolfingParams(c0=6.0, batch_mult=1.0, max_repeats=60)
    rep = golfing_certificate(x, Spectrum.projector(d, 1), params, rng)
    iso = isometry_constants(rep.atoms, x)
    assert deterministic_guarantee(iso.alpha, iso.beta_exact,
                                   rep.gamma_measured, rep.delta_measured)
    res = solve_feasibility(measure(x, rep.atoms), tol=1e-8, max_iter=10000)
    err = fro_norm(SymMatrix(res.X_hat.entries - np.outer(x, x)))
    assert err < 1e-5
