"""Eigen-partitions, the adapted frame, warped-product checks and the verdict tree."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affinelab.blaschke import blaschke_point
from affinelab.classify import (DEFAULT_TOL, PointRecord, Tolerances, analyze, analyze_point, classify,
                                eigen_partition, frame_identities, sample_points, structure_frame, verdict,
                                warp_constant, warped_structure_check)
from affinelab.curvature import curvature_pack
from affinelab.dsl import parse_immersion
from affinelab.families import DEFAULT_C, FamilyParams, builtin, fiber_spec

EXPECTED = {
    "Quadric_Ellipsoid": "Quadric", "Quadric_Hyperboloid": "Quadric", "Quadric_Paraboloid": "Quadric",
    "Calabi_1_2": "CalabiType_1_2", "Lorentz_1_3": "LorentzSphere_1_3",
    **{f"W{i}": f"WarpedFamily_{i}" for i in range(1, 7)},
    "PerturbedCubic": "Unclassified",
}


def test_partition_of_diagonal_operator():
    pp = eigen_partition(np.diag([2.0, 1.0, 1.0, 1.0]), np.eye(4))
    assert pp.m == 2 and pp.confident
    assert sorted(pp.multiplicities) == [1, 3]
    assert pp.values == pytest.approx([1.0, 2.0])


def test_partition_flags_ambiguous_gap():
    pp = eigen_partition(np.diag([1.0, 1.0 + 5e-9, 2.0]), np.eye(3))
    assert not pp.confident
    assert pp.m_range == (2, 3)


@given(st.lists(st.sampled_from([-1.0, 0.5, 3.0]), min_size=2, max_size=6))
@settings(max_examples=30, deadline=None)
def test_partition_recovers_multiplicities_in_any_metric(vals):
    rng = np.random.default_rng(len(vals))
    n = len(vals)
    B = rng.normal(size=(n, n)) + 3 * np.eye(n)
    h = B.T @ B
    # A is h-self-adjoint with the given spectrum: A = E D E^-1 with E h-orthonormal
    L = np.linalg.cholesky(h)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    E = np.linalg.solve(L.T, Q)
    A = E @ np.diag(vals) @ np.linalg.inv(E)
    pp = eigen_partition(A, h)
    assert pp.confident
    distinct = sorted(set(vals))
    assert pp.values == pytest.approx(distinct, abs=1e-9)
    assert pp.multiplicities == [vals.count(v) for v in distinct]
    for F in pp.frames:
        assert np.allclose(F.T @ h @ F, np.eye(F.shape[1]), atol=1e-9)


def _frame(fid, n, p):
    bp = blaschke_point(builtin(fid, n), p)
    cp = curvature_pack(bp)
    return bp, cp, structure_frame(bp, cp, eigen_partition(cp.P, bp.h))


@pytest.mark.parametrize("fid", ["W1", "W2", "W3", "W4", "W5", "W6"])
def test_frame_identities_on_warped_families(fid):
    bp, cp, fr = _frame(fid, 3, np.array([1.2, 0.1, -0.2]))
    checks = frame_identities(bp, cp, fr, affine_sphere=False)
    assert max(checks.values()) < 1e-9, checks
    assert warp_constant(fr) == pytest.approx(DEFAULT_C[fid], abs=1e-9)


@pytest.mark.parametrize("fid, t", [("W3", 0.8), ("W4", 1.7), ("W6", 1.1)])
def test_linear_warp_reads_off_the_parameter(fid, t):
    _, _, fr = _frame(fid, 3, np.array([t, 0.05, 0.1]))
    assert fr.f_tag == "f=t"
    assert -1 / fr.alpha == pytest.approx(t, rel=1e-9)


@pytest.mark.parametrize("n", [3, 4])
def test_lorentz_sphere_scalar_identities(n):
    bp, cp, fr = _frame("Lorentz_1_3", n, np.full(n, 0.1))
    checks = frame_identities(bp, cp, fr, affine_sphere=True)
    for key in ("H_lambda2", "r_H", "J_H", "traceless_ricci", "ricci_inequality_equality"):
        assert checks[key] < 1e-9, key
    assert checks["ricci_inequality_excess"] < 1e-9


@pytest.mark.parametrize("fid", ["W1", "W4", "W5"])
def test_warped_structure_residuals(fid):
    spec, fib = builtin(fid, 3), fiber_spec(fid, 3, DEFAULT_C[fid])
    out = warped_structure_check(spec, [1.3, 0.1, -0.1], fiber=fib)
    for key in ("T_alpha", "T_lambda2", "T_mu2"):
        assert out[key] < 1e-7, key
    for key in ("sectional_TX", "sectional_XX", "L2", "block_htt", "block_offdiag", "block_fiber"):
        assert out[key] < 1e-9, key
    assert out["T_tangent_to_t"] < 1e-9


def test_samples_are_deterministic_and_inside_the_box():
    spec = builtin("W2", 3)
    a, b = sample_points(spec, 25, 0), sample_points(spec, 25, 0)
    assert np.array_equal(a, b)
    box = spec.box()
    assert np.all((a >= box[:, 0]) & (a <= box[:, 1]))


def test_failed_point_is_recorded_not_raised():
    spec = parse_immersion("n=2; F = (u1, u2, u1*u2)")
    rec = analyze_point(spec, [0.1, 0.2])
    assert not rec.ok and rec.error_code == "not_convex"
    rep = verdict([rec], 2)
    assert rep.verdict == "Unclassified" and not rep.convexity_ok


def test_parallel_analysis_matches_serial():
    spec = builtin("W3", 3)
    pts = sample_points(spec, 4)
    a = analyze(spec, pts, workers=1)
    b = analyze(spec, pts, workers=2)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


@pytest.mark.parametrize("fid", list(EXPECTED))
def test_verdicts_on_builtins(fid):
    rep, _, _ = classify(builtin(fid, 3), count=8)
    assert rep.verdict == EXPECTED[fid], rep.verdict_evidence


def test_custom_warp_constant_changes_nothing_but_c():
    rep, _, _ = classify(builtin("W3", 3, FamilyParams("W3", 3, c=1.3)), count=6)
    assert rep.verdict == "WarpedFamily_3"
    assert rep.c == pytest.approx(1.3, rel=1e-6)


def test_tight_identity_tolerance_forces_unclassified():
    rep, _, _ = classify(builtin("Lorentz_1_3", 3), count=4, tol=Tolerances(identity=1e-30))
    assert rep.verdict == "Unclassified"


def test_default_tolerances():
    assert (DEFAULT_TOL.identity, DEFAULT_TOL.zero, DEFAULT_TOL.relative, DEFAULT_TOL.fd) == (1e-7, 1e-6, 1e-5, 1e-4)
