"""Equiaffine (Blaschke) structure of a hypersurface at a chart point.

Starting from the Euclidean normal as a seed transversal, the affine metric
is obtained by the volume normalization
``h = |det h~|^(-1/(n+2)) |theta|^(2/(n+2)) h~``, the affine normal by
``xi = Laplacian_h(F) / n``, and everything else by re-decomposing the
derivatives of ``F`` against the frame ``(F_1, ..., F_n, xi)``.  All fields
are carried as jets so that downstream modules can differentiate them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curvature import CurvaturePack, covariant_derivative, hnorm, kulkarni_operator, levi_civita
from .dsl import ImmersionSpec, eval_jet
from .errors import ConvexityError, DegenerateFrameError, OrderError
from .jets import Jet, contract, jet_apply, jet_det, jet_matrix_inverse, jet_solve

DEFAULT_ORDER = 5


@dataclass
class TentativeFrame:
    Fi: Jet  # Fi[i, a] = d_i F^a
    Fij: Jet  # Fij[i, j, a]
    xi_seed: Jet  # Euclidean normal, oriented so that h_seed > 0
    h_seed: Jet
    Gamma_seed: Jet
    theta: Jet  # det[F_1, ..., F_n, xi_seed]


@dataclass
class BlaschkePoint:
    n: int
    point: np.ndarray
    order: int
    h: np.ndarray
    xi: np.ndarray
    S: np.ndarray
    Gamma: np.ndarray
    GammaHat: np.ndarray
    K: np.ndarray
    C: np.ndarray
    frame: np.ndarray  # (n+1, n), columns F_i
    jets: dict = field(default_factory=dict, repr=False)

    @property
    def hinv(self) -> np.ndarray:
        return np.linalg.inv(self.h)


def _frame_matrix(Fi: Jet, transversal: Jet) -> Jet:
    """``[F_1, ..., F_n, v]`` with ambient index first."""
    Fi, transversal = Fi.truncate(min(Fi.order, transversal.order)), transversal.truncate(
        min(Fi.order, transversal.order))
    cols = [Fi[i] for i in range(Fi.shape[0])] + [transversal]
    return Jet.stack(cols, axis=1)


def tentative_frame(F: Jet) -> TentativeFrame:
    """Decompose second derivatives against the Euclidean normal of the frame."""
    n = F.shape[0] - 1
    if F.order < 2:
        raise OrderError("the tentative frame needs jets of order >= 2")
    Fi = F.grad()
    Fij = Fi.grad()
    FiT = Fi.transpose()  # (n+1, n)
    cof = []
    for a in range(n + 1):
        rows = [b for b in range(n + 1) if b != a]
        minor = Jet.stack([FiT[b] for b in rows])
        sign = -1.0 if (a + n) % 2 else 1.0
        cof.append(sign * jet_det(minor))
    xi_seed = Jet.stack(cof)
    theta = contract("a,a->", xi_seed, xi_seed)
    scale = float(np.prod(np.sum(Fi.value ** 2, axis=1)))
    if theta.value <= 1e-14 * max(scale, 1e-300):
        raise DegenerateFrameError("tangent vectors are linearly dependent at this point")

    M = _frame_matrix(Fi, xi_seed)
    sol = jet_solve(M, Fij.transpose(2, 0, 1))  # sol[k, i, j]
    Gamma_seed = sol[:n].transpose(1, 2, 0)
    h_seed = sol[n]
    eig = np.linalg.eigvalsh(h_seed.value)
    tol = 1e-12 * max(1.0, np.abs(eig).max())
    if np.all(eig < -tol):
        xi_seed, h_seed, theta = -xi_seed, -h_seed, -theta
    elif not np.all(eig > tol):
        raise ConvexityError(
            f"second fundamental form is indefinite or degenerate (eigenvalues {eig.tolist()})")
    return TentativeFrame(Fi, Fij, xi_seed, h_seed, Gamma_seed, theta)


def affine_metric(h_seed: Jet, theta: Jet) -> Jet:
    """Blaschke metric from a seed decomposition: invariant under rescaling the seed."""
    n = h_seed.shape[0]
    theta = theta.truncate(h_seed.order)
    det = jet_det(h_seed)
    if det.value <= 0:
        raise ConvexityError("seed metric is not positive definite")
    abs_theta = theta if theta.value > 0 else -theta
    factor = jet_apply("pow", det, -1.0 / (n + 2)) * jet_apply("pow", abs_theta, 2.0 / (n + 2))
    return h_seed * factor


def affine_normal(Fi: Jet, Fij: Jet, h: Jet, GammaHat: Jet | None = None,
                  hinv: Jet | None = None) -> Jet:
    """``xi = (1/n) h^{ij} (F_ij - GammaHat^k_ij F_k)``."""
    if h.order < 1:
        raise OrderError("the affine normal needs immersion jets of order >= 3")
    n = h.shape[0]
    if GammaHat is None:
        GammaHat = levi_civita(h, hinv)
    if hinv is None:
        hinv = jet_matrix_inverse(h)
    o = GammaHat.order
    hess = Fij.truncate(o) - contract("ijk,ka->ija", GammaHat, Fi.truncate(o))
    return contract("ij,ija->a", hinv.truncate(o), hess) / n


def blaschke_from_jets(F: Jet, point: Sequence[float] | None = None) -> BlaschkePoint:
    n = F.shape[0] - 1
    if F.order < 4:
        raise OrderError(f"Blaschke structure needs jet order >= 4, got {F.order}")
    tf = tentative_frame(F)
    h = affine_metric(tf.h_seed, tf.theta)  # order N-2
    hinv = jet_matrix_inverse(h)
    GammaHat = levi_civita(h, hinv)  # order N-3
    xi = affine_normal(tf.Fi, tf.Fij, h, GammaHat, hinv)  # order N-3

    # Gauss formula against the affine normal
    M = _frame_matrix(tf.Fi, xi)
    sol = jet_solve(M, tf.Fij.truncate(xi.order).transpose(2, 0, 1))
    Gamma = sol[:n].transpose(1, 2, 0)
    h_gauss = sol[n]

    # Weingarten formula: d_i xi = -S^k_i F_k + tau_i xi
    dxi = xi.grad()  # dxi[i, a], order N-4
    sol = jet_solve(_frame_matrix(tf.Fi, xi.truncate(dxi.order)), dxi.transpose())
    S = -sol[:n]
    tau = sol[n]

    K = Gamma - GammaHat
    hK = h.truncate(K.order)
    C = -2.0 * contract("ijl,lk->ijk", K, hK)
    C_nabla = covariant_derivative(h, Gamma, "ll").truncate(K.order)
    volume = jet_det(M)

    jets = dict(F=F, Fi=tf.Fi, Fij=tf.Fij, xi_seed=tf.xi_seed, h_seed=tf.h_seed, theta=tf.theta,
                h=h, hinv=hinv, GammaHat=GammaHat, xi=xi, Gamma=Gamma, h_gauss=h_gauss,
                S=S, tau=tau, K=K, C=C, C_nabla=C_nabla, volume=volume)
    return BlaschkePoint(
        n=n,
        point=np.zeros(n) if point is None else np.asarray(point, dtype=float),
        order=F.order,
        h=h.value, xi=xi.value, S=S.value, Gamma=Gamma.value, GammaHat=GammaHat.value,
        K=K.value, C=C.value, frame=tf.Fi.value.T, jets=jets,
    )


def blaschke_point(spec: ImmersionSpec, point: Sequence[float], order: int = DEFAULT_ORDER) -> BlaschkePoint:
    """Full Blaschke data of ``spec`` at ``point``, carried to jet order ``order``."""
    if order < 4:
        raise OrderError(f"Blaschke structure needs jet order >= 4, got {order}")
    return blaschke_from_jets(eval_jet(spec, point, order), point)


# --------------------------------------------------------------------------
# scalar invariants and residuals

def pick_invariant(bp: BlaschkePoint) -> float:
    """``J = h(K, K) / (n (n - 1))``."""
    n = bp.n
    return hnorm(bp.K, bp.h, "llu") ** 2 / (n * (n - 1))


def mean_curvature(bp: BlaschkePoint) -> float:
    return float(np.trace(bp.S)) / bp.n


def blaschke_invariants(bp: BlaschkePoint) -> dict[str, float]:
    """Residuals of the defining properties of the Blaschke structure."""
    J = bp.jets
    h = bp.h
    det_h = np.linalg.det(h)
    vol = J["volume"].value
    K = bp.K
    Klow = np.tensordot(K, h, axes=([2], [0]))
    return {
        "symmetric_metric": float(np.abs(h - h.T).max()),
        "volume": abs(vol ** 2 - det_h) / det_h,
        "metric_consistency": hnorm(J["h_gauss"].value - h, h),
        "equiaffine": float(np.abs(J["tau"].value).max()),
        "K_symmetry": hnorm(K - K.transpose(1, 0, 2), h, "llu"),
        "K_total_symmetry": hnorm(Klow - Klow.transpose(0, 2, 1), h),
        "apolarity": float(np.linalg.norm(np.einsum("ikk->i", K))),
        "cubic_form": hnorm(bp.C - J["C_nabla"].value, h),
        "shape_self_adjoint": hnorm(h @ bp.S - (h @ bp.S).T, h),
    }


def structure_residuals(bp: BlaschkePoint, cp: CurvaturePack) -> dict[str, float | None]:
    """Apolarity, Gauss, both Codazzi equations and ``chi = H + J``.

    ``codazziS`` is None when the jets are too short to differentiate S.
    """
    h, S, K = bp.h, bp.S, bp.K
    gauss_rhs = 0.5 * kulkarni_operator(S, h, +1.0) - (
        np.einsum("jkm,iml->ijkl", K, K) - np.einsum("ikm,jml->ijkl", K, K))
    codK_lhs = cp.gradK - cp.gradK.transpose(1, 0, 2, 3)
    codK_rhs = 0.5 * kulkarni_operator(S, h, -1.0)
    codS = None
    if cp.gradS is not None:
        D = cp.gradS.transpose(0, 2, 1)  # D[i, j, l] = (nabla_i S)^l_j
        lhs = D - D.transpose(1, 0, 2)
        rhs = np.einsum("mi,mjl->ijl", S, K) - np.einsum("mj,mil->ijl", S, K)
        codS = hnorm(lhs - rhs, h, "llu")
    H = mean_curvature(bp)
    J = pick_invariant(bp)
    return {
        "apolarity": float(np.linalg.norm(np.einsum("ikk->i", K))),
        "gauss": hnorm(cp.Riem - gauss_rhs, h, "lllu"),
        "codazziK": hnorm(codK_lhs - codK_rhs, h, "lllu"),
        "codazziS": codS,
        "chi_identity": abs(cp.chi - H - J),
    }
