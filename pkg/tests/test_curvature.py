"""Curvature of the affine metric and the action of curvature on the cubic form."""

import numpy as np
import pytest

from affinelab.blaschke import blaschke_point
from affinelab.curvature import (action_on_cubic, action_on_difference, bianchi_residual, curvature_pack,
                                 hnorm, kulkarni_operator, orthonormal_frame, schouten_weyl,
                                 sectional_curvature, semiparallel_commutator, semiparallel_residual)
from affinelab.errors import DimensionError, OrderError
from affinelab.families import builtin


def _christoffel_fd(spec, p, step=1e-4):
    """Levi-Civita symbols from finite differences of the pointwise affine metric."""
    n = len(p)
    h = blaschke_point(spec, p, 4).h
    dh = np.zeros((n, n, n))
    for l in range(n):
        e = np.eye(n)[l] * step
        hp = blaschke_point(spec, p + e, 4).h
        hm = blaschke_point(spec, p - e, 4).h
        dh[l] = (hp - hm) / (2 * step)
    low = dh.transpose(0, 1, 2) + dh.transpose(1, 0, 2) - dh.transpose(1, 2, 0)
    return 0.5 * np.einsum("ijl,kl->ijk", low, np.linalg.inv(h))


@pytest.mark.parametrize("fid", ["PerturbedCubic", "W2", "Lorentz_1_3"])
def test_levi_civita_matches_finite_differences(fid):
    spec = builtin(fid, 3)
    p = spec.box().mean(axis=1) + np.array([0.1, 0.05, -0.1])
    G = blaschke_point(spec, p).GammaHat
    assert np.allclose(G, _christoffel_fd(spec, p), atol=1e-7)


def test_sphere_curvature_closed_form():
    c = 0.7
    bp = blaschke_point(builtin("Quadric_Ellipsoid", 3, {"c": c}), [0.2, -0.1, 0.3])
    cp = curvature_pack(bp)
    h = bp.h
    expect = c * (np.einsum("jk,il->ijkl", h, np.eye(3)) - np.einsum("ik,jl->ijkl", h, np.eye(3)))
    assert np.allclose(cp.Riem, expect, atol=1e-12)
    X, Y = np.array([1.0, 0.2, 0]), np.array([0, 1.0, -0.5])
    assert sectional_curvature(cp.Riem, h, X, Y) == pytest.approx(c, rel=1e-12)
    assert np.allclose(cp.P, c / 2 * np.eye(3), atol=1e-12)


def test_bianchi_and_ricci_symmetry():
    cp = curvature_pack(blaschke_point(builtin("PerturbedCubic", 4), [0.1, 0.2, -0.1, 0.05]))
    assert np.abs(bianchi_residual(cp.Riem)).max() < 1e-12
    assert np.allclose(cp.Ric, cp.Ric.T, atol=1e-12)


def test_weyl_vanishes_in_dimension_three():
    bp = blaschke_point(builtin("PerturbedCubic", 3), [0.3, -0.2, 0.1])
    cp = curvature_pack(bp)
    assert cp.weyl_norm < 1e-12


def test_weyl_does_not_vanish_generically_in_dimension_four():
    cp = curvature_pack(blaschke_point(builtin("PerturbedCubic", 4), [0.3, -0.2, 0.1, 0.2]))
    assert cp.weyl_norm > 1e-4


def test_schouten_needs_three_dimensions():
    with pytest.raises(DimensionError):
        schouten_weyl(np.zeros((2, 2, 2, 2)), np.eye(2))


def test_orthonormal_frame():
    h = np.array([[2.0, 0.3, 0], [0.3, 1.0, 0.1], [0, 0.1, 0.5]])
    E = orthonormal_frame(h)
    assert np.allclose(E.T @ h @ E, np.eye(3))
    v = np.array([1.0, -2.0, 0.5])
    assert hnorm(v, h, "u") == pytest.approx(np.sqrt(v @ h @ v))


def test_kulkarni_of_identity_is_constant_curvature_form():
    h = np.diag([1.0, 2.0, 3.0])
    T = kulkarni_operator(0.5 * np.eye(3), h)
    expect = np.einsum("jk,il->ijkl", h, np.eye(3)) - np.einsum("ik,jl->ijkl", h, np.eye(3))
    assert np.allclose(T, expect)


@pytest.mark.parametrize("fid, n", [("PerturbedCubic", 3), ("W4", 3), ("Lorentz_1_3", 4)])
def test_three_routes_to_curvature_action_agree(fid, n):
    spec = builtin(fid, n)
    p = spec.box().mean(axis=1) + 0.07
    bp = blaschke_point(spec, p)
    cp = curvature_pack(bp)
    scale = max(1.0, hnorm(cp.RC_action, bp.h))
    assert hnorm(cp.RC_comm - cp.RC_action, bp.h) / scale < 1e-9
    via_K = action_on_difference(cp.Riem, bp.K, bp.h)
    assert hnorm(via_K - action_on_cubic(cp.Riem, bp.C), bp.h) / scale < 1e-12


def test_commutator_route_needs_order_five():
    bp = blaschke_point(builtin("PerturbedCubic", 3), [0.1, 0.2, 0.3], order=4)
    cp = curvature_pack(bp)
    assert semiparallel_residual(bp, cp)[1] is None
    with pytest.raises(OrderError):
        semiparallel_commutator(bp, cp)


def test_negative_control_is_not_semiparallel():
    bp = blaschke_point(builtin("PerturbedCubic", 3), [0.2, 0.3, -0.1])
    action, gap = semiparallel_residual(bp, curvature_pack(bp))
    assert action > 1e-3 and gap < 1e-9
