"""Intrinsic curvature of the affine metric and the action of curvature on the cubic form.

Index conventions (coordinate frame ``e_i = d/du_i``):

* connection coefficients ``G[i, j, k]``: ``nabla_{e_i} e_j = G[i, j, k] e_k``
* curvature ``R[i, j, k, l]``: ``R(e_i, e_j) e_k = R[i, j, k, l] e_l`` with
  ``R(X, Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X, Y]``
* (1,1) operators ``A[l, i]``: ``A e_i = A[l, i] e_l``
* the cubic form ``C[i, j, k]`` and the 5-index tensor
  ``RC[u, v, x, y, z] = (R(e_u, e_v) . C)(e_x, e_y, e_z)`` are fully covariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import DimensionError, OrderError
from .jets import Jet, contract, common_order, jet_matrix_inverse

if TYPE_CHECKING:
    from .blaschke import BlaschkePoint

_SLOTS = "bcdefghi"


# --------------------------------------------------------------------------
# tensor helpers

def covariant_derivative(T: Jet, Gamma: Jet, variance: str) -> Jet:
    """``nabla T`` with the derivative index first.

    ``variance`` has one letter per slot of ``T``: ``"l"`` (covariant) or
    ``"u"`` (contravariant).
    """
    if len(variance) != len(T.shape):
        raise DimensionError(f"variance '{variance}' does not match tensor rank {len(T.shape)}")
    if T.order == 0:
        raise OrderError("covariant derivative needs a jet of order >= 1")
    D = T.grad()
    T, Gamma = common_order(T.truncate(D.order), Gamma.truncate(min(Gamma.order, D.order)))
    D = D.truncate(T.order)
    letters = _SLOTS[: len(variance)]
    out = "a" + letters
    for s, kind in enumerate(variance):
        tsub = letters[:s] + "m" + letters[s + 1:]
        if kind == "l":
            D = D - contract(f"a{letters[s]}m,{tsub}->{out}", Gamma, T)
        else:
            D = D + contract(f"am{letters[s]},{tsub}->{out}", Gamma, T)
    return D


def orthonormal_frame(h: np.ndarray) -> np.ndarray:
    """Columns ``E[:, a]`` with ``E.T @ h @ E = I``."""
    L = np.linalg.cholesky(h)
    return np.linalg.inv(L).T


def to_orthonormal(T: np.ndarray, h: np.ndarray, variance: str) -> np.ndarray:
    """Components of ``T`` in an h-orthonormal frame."""
    E = orthonormal_frame(h)
    Einv = np.linalg.inv(E)
    out = np.asarray(T, dtype=float)
    for s, kind in enumerate(variance):
        M = E if kind == "l" else Einv.T
        out = np.moveaxis(np.tensordot(out, M, axes=([s], [0])), -1, s)
    return out


def hnorm(T: np.ndarray, h: np.ndarray, variance: str | None = None) -> float:
    """Tensorial norm with indices raised/lowered by ``h``."""
    T = np.asarray(T, dtype=float)
    if T.ndim == 0:
        return float(abs(T))
    variance = variance or "l" * T.ndim
    return float(np.sqrt(np.sum(to_orthonormal(T, h, variance) ** 2)))


def lower_last(T: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.tensordot(T, h, axes=([-1], [0]))


# --------------------------------------------------------------------------
# connection and curvature

def levi_civita(h: Jet, hinv: Jet | None = None) -> Jet:
    """Christoffel symbols ``G[i, j, k]`` of the metric jet ``h``."""
    if h.order < 1:
        raise OrderError("Levi-Civita connection needs the metric to jet order >= 1")
    dh = h.grad()  # dh[l, i, j] = d_l h_ij
    if hinv is None:
        hinv = jet_matrix_inverse(h)
    hinv = hinv.truncate(dh.order)
    lowered = dh.transpose(0, 1, 2) + dh.transpose(1, 0, 2) - dh.transpose(1, 2, 0)
    # lowered[i, j, l] = d_i h_jl + d_j h_il - d_l h_ij
    return 0.5 * contract("ijl,kl->ijk", lowered, hinv)


def riemann(Gamma: Jet) -> Jet:
    """Curvature ``R[i, j, k, l]`` of a torsion-free connection."""
    if Gamma.order < 1:
        raise OrderError("curvature needs connection coefficients to jet order >= 1")
    dG = Gamma.grad()  # dG[a, i, j, k] = d_a G[i, j, k]
    G = Gamma.truncate(dG.order)
    R = dG - dG.transpose(1, 0, 2, 3)
    R = R + contract("jkm,iml->ijkl", G, G) - contract("ikm,jml->ijkl", G, G)
    return R


def ricci(R):
    """``Ric[j, k] = sum_i R[i, j, k, i]``; works for jets and arrays."""
    if isinstance(R, Jet):
        return Jet(R.space, np.einsum("ijki...->jk...", R.coeffs))
    return np.einsum("ijki->jk", R)


def schouten_weyl(R: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Schouten operator ``P[l, i]`` and Weyl tensor ``W[i, j, k, l]``."""
    n = h.shape[0]
    if n < 3:
        raise DimensionError("Schouten/Weyl decomposition needs n >= 3")
    Ric = ricci(R)
    Q = np.linalg.solve(h, Ric)
    r = np.trace(Q)
    P = Q / (n - 2) - r / (2 * (n - 1) * (n - 2)) * np.eye(n)
    W = R - kulkarni_operator(P, h)
    return P, W


def schouten_jet(Rj: Jet, hinv: Jet) -> Jet:
    """Schouten operator ``P[l, i]`` as a jet, from a curvature jet."""
    n = Rj.shape[0]
    Ric = ricci(Rj)
    Q = contract("lm,mi->li", hinv.truncate(Ric.order), Ric)
    r = Jet(Q.space, np.einsum("ii...->...", Q.coeffs))
    eye = Jet.constant(Q.space, np.eye(n))
    return Q / (n - 2) - eye * (r / (2 * (n - 1) * (n - 2)))


def bianchi_residual(R: np.ndarray) -> np.ndarray:
    """First Bianchi sum ``R(X,Y)Z + R(Y,Z)X + R(Z,X)Y``."""
    return R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)


def kulkarni_operator(A: np.ndarray, h: np.ndarray, sign: float = 1.0) -> np.ndarray:
    """``h(Y,Z) A X - h(X,Z) A Y + s (h(AY,Z) X - h(AX,Z) Y)`` as ``T[i, j, k, l]``."""
    n = h.shape[0]
    I = np.eye(n)
    Al = h @ A  # Al[j, k] = h(A e_k, e_j), symmetric for h-self-adjoint A
    T = np.einsum("jk,li->ijkl", h, A) - np.einsum("ik,lj->ijkl", h, A)
    T = T + sign * (np.einsum("kj,il->ijkl", Al, I) - np.einsum("ki,jl->ijkl", Al, I))
    return T


def action_on_cubic(R: np.ndarray, C: np.ndarray) -> np.ndarray:
    """``(R(e_u, e_v) . C)(e_x, e_y, e_z)`` as a derivation."""
    return -(np.einsum("uvxm,myz->uvxyz", R, C)
             + np.einsum("uvym,xmz->uvxyz", R, C)
             + np.einsum("uvzm,xym->uvxyz", R, C))


def action_on_difference(R: np.ndarray, K: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``-2 h((R(e_u, e_v) . K)(e_x, e_y), e_z)``."""
    RK = (np.einsum("xym,uvml->uvxyl", K, R)
          - np.einsum("uvxm,myl->uvxyl", R, K)
          - np.einsum("uvym,xml->uvxyl", R, K))
    return -2.0 * lower_last(RK, h)


# --------------------------------------------------------------------------
# the curvature stack at a point

@dataclass
class CurvaturePack:
    n: int
    Riem: np.ndarray
    Ric: np.ndarray
    Q: np.ndarray
    r: float
    chi: float
    P: np.ndarray | None
    W: np.ndarray | None
    gradC: np.ndarray | None
    grad2C: np.ndarray | None
    RC_action: np.ndarray
    RC_comm: np.ndarray | None
    gradK: np.ndarray | None = None
    gradS: np.ndarray | None = None
    gradh: np.ndarray | None = None
    gradP: np.ndarray | None = None
    jets: dict = field(default_factory=dict, repr=False)

    h: np.ndarray | None = None

    @property
    def weyl_norm(self) -> float | None:
        """h-norm of the Weyl tensor (None for n < 3)."""
        if self.W is None:
            return None
        return hnorm(self.W, self.h, "lllu") if self.h is not None else float(np.linalg.norm(self.W))


def curvature_pack(bp: "BlaschkePoint") -> CurvaturePack:
    """Curvature, Schouten/Weyl, covariant derivatives of C and both R.C routes."""
    J = bp.jets
    n = bp.n
    Gh = J["GammaHat"]
    Rj = riemann(Gh)
    R = Rj.value
    h = bp.h
    Ric = ricci(R)
    Q = np.linalg.solve(h, Ric)
    r = float(np.trace(Q))
    chi = r / (n * (n - 1))
    P = W = None
    if n >= 3:
        P, W = schouten_weyl(R, h)

    C = J["C"]
    gradC = covariant_derivative(C, Gh, "lll")
    grad2C = None
    RC_comm = None
    if gradC.order >= 1:
        g2 = covariant_derivative(gradC, Gh, "llll")
        grad2C = g2.value
        RC_comm = grad2C - grad2C.transpose(1, 0, 2, 3, 4)
    gradK = covariant_derivative(J["K"], Gh, "llu")
    gradS = covariant_derivative(J["S"], Gh, "ul") if J["S"].order >= 1 else None
    gradh = covariant_derivative(J["h"], Gh, "ll")
    gradP = None
    if n >= 3 and Rj.order >= 1:
        gradP = covariant_derivative(schouten_jet(Rj, J["hinv"]), Gh, "ul").value
    return CurvaturePack(
        n=n, Riem=R, Ric=Ric, Q=Q, r=r, chi=chi, P=P, W=W,
        gradC=gradC.value, grad2C=grad2C,
        RC_action=action_on_cubic(R, bp.C), RC_comm=RC_comm,
        gradK=gradK.value, gradS=None if gradS is None else gradS.value, gradh=gradh.value,
        gradP=gradP, jets={"Riem": Rj}, h=h,
    )


def semiparallel_action(bp: "BlaschkePoint", cp: CurvaturePack) -> np.ndarray:
    return cp.RC_action


def semiparallel_commutator(bp: "BlaschkePoint", cp: CurvaturePack) -> np.ndarray:
    if cp.RC_comm is None:
        raise OrderError("the commutator route needs jet order >= 5")
    return cp.RC_comm


def semiparallel_residual(bp: "BlaschkePoint", cp: CurvaturePack) -> tuple[float, float | None]:
    """``(|R.C|_h, |RC_comm - RC_action|_h)``; the second is None below order 5."""
    action = hnorm(cp.RC_action, bp.h)
    if cp.RC_comm is None:
        return action, None
    return action, hnorm(cp.RC_comm - cp.RC_action, bp.h)


def sectional_curvature(R: np.ndarray, h: np.ndarray, X: np.ndarray, Y: np.ndarray) -> float:
    RXYY = np.einsum("ijkl,i,j,k->l", R, X, Y, Y)
    num = RXYY @ h @ X
    den = (X @ h @ X) * (Y @ h @ Y) - (X @ h @ Y) ** 2
    return float(num / den)
