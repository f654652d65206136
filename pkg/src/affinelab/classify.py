"""Eigenstructure detection, structure identities and the classification verdict.

The pipeline runs pointwise (:func:`analyze_point`) over a quasi-random sample
of the chart domain and then folds the per-point records into a single
:class:`StructureReport` (:func:`verdict`).  The fold is order independent,
so points may be processed by a worker pool.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .blaschke import (DEFAULT_ORDER, BlaschkePoint, blaschke_invariants, blaschke_point,
                       mean_curvature, pick_invariant, structure_residuals)
from .curvature import (CurvaturePack, bianchi_residual, curvature_pack, hnorm, sectional_curvature,
                        semiparallel_residual)
from .dsl import ImmersionSpec
from .errors import AffineLabError, StructureMismatchError

VERDICTS = ("Quadric", "FlatMetric", "CalabiType_1_2", "LorentzSphere_1_3",
            "WarpedFamily_1", "WarpedFamily_2", "WarpedFamily_3", "WarpedFamily_4",
            "WarpedFamily_5", "WarpedFamily_6", "Unclassified")

FD_STEP = 1e-3
_FD_WEIGHTS = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


@dataclass(frozen=True)
class Tolerances:
    identity: float = 1e-7  # structure equations, dual route
    zero: float = 1e-6  # "is this quantity zero" decisions
    relative: float = 1e-5  # scalar identities between nonzero quantities
    fd: float = 1e-4  # finite-difference ODE residuals
    gap_factor: float = 10.0
    gap_floor: float = 1e-8


DEFAULT_TOL = Tolerances()


def _rel(a: float, b: float, *terms: float) -> float:
    """``|a - b|`` relative to the largest of ``a``, ``b`` and the terms that make them up."""
    scale = max(abs(a), abs(b), *(abs(t) for t in terms)) if terms else max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


# --------------------------------------------------------------------------
# eigen-partitions

@dataclass
class EigenPartition:
    values: list[float]
    multiplicities: list[int]
    frames: list[np.ndarray]  # h-orthonormal eigenvectors, columns, per cluster
    gap_ratio: float
    confident: bool
    m_range: tuple[int, int]
    selfadjoint_residual: float

    @property
    def m(self) -> int:
        return len(self.values)


def eigen_partition(A: np.ndarray, h: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> EigenPartition:
    """Cluster the eigenvalues of an h-self-adjoint operator ``A[l, i]``.

    Neighbouring eigenvalues closer than ``gap_floor * max(1, |A|)`` are
    merged.  ``gap_ratio`` compares the smallest separating gap with the
    largest within-cluster spread (floored at the same scale); a partition
    is confident when that ratio exceeds ``gap_factor`` and no gap sits
    within a factor ``gap_factor`` of the merge threshold.
    """
    hA = h @ A
    sa = float(np.abs(hA - hA.T).max() / max(1.0, np.abs(hA).max()))
    w, V = scipy.linalg.eigh(0.5 * (hA + hA.T), h)
    scale = max(1.0, float(np.abs(w).max()))
    floor = tol.gap_floor * scale
    gaps = np.diff(w)
    split = gaps > floor
    bounds = [0] + [i + 1 for i in np.nonzero(split)[0]] + [len(w)]
    values, mults, frames, spread = [], [], [], floor
    for a, b in zip(bounds[:-1], bounds[1:]):
        values.append(float(np.mean(w[a:b])))
        mults.append(int(b - a))
        frames.append(V[:, a:b])
        spread = max(spread, float(w[b - 1] - w[a]))
    sep = gaps[split]
    ratio = float(sep.min() / spread) if sep.size else math.inf
    f = tol.gap_factor
    gray = np.any((gaps > floor / f) & (gaps <= floor)) or np.any((gaps > floor) & (gaps <= f * floor))
    confident = ratio > f and not gray
    m_lo = 1 + int(np.sum(gaps > f * floor))
    m_hi = 1 + int(np.sum(gaps > floor / f))
    m_range = (len(values), len(values)) if confident else (m_lo, m_hi)
    return EigenPartition(values, mults, frames, ratio, bool(confident), m_range, sa)


# --------------------------------------------------------------------------
# the adapted frame of an m = 2 point

@dataclass
class StructureFrame:
    T: np.ndarray  # coordinate components, h(T, T) = 1
    X: np.ndarray  # (n, n-1), h-orthonormal basis of the other eigenspace
    lambda1: float
    lambda2: float
    mu1: float
    mu2: float
    nu1: float
    nu2: float
    alpha: float | None  # -T(ln f); None when jets are too short
    f_tag: str | None  # "f=1" or "f=t"


def _Kvec(K, a, b):
    return np.einsum("ijk,i,j->k", K, a, b)


def structure_frame(bp: BlaschkePoint, cp: CurvaturePack, pp: EigenPartition,
                    tol: Tolerances = DEFAULT_TOL) -> StructureFrame | None:
    """Frame ``{T, X_i}`` when P has two eigenvalues with multiplicities ``(1, n-1)``."""
    n = bp.n
    if pp.m != 2 or sorted(pp.multiplicities) != [1, n - 1]:
        return None
    simple = 0 if pp.multiplicities[0] == 1 else 1
    T = pp.frames[simple][:, 0].copy()
    X = pp.frames[1 - simple]
    h = bp.h
    if (h @ T)[0] < 0:  # orient along increasing first chart coordinate
        T = -T
    nu1, nu2 = pp.values[simple], pp.values[1 - simple]
    K, S = bp.K, bp.S
    lam1 = float(_Kvec(K, T, T) @ h @ T)
    lam2 = float(np.mean([_Kvec(K, T, X[:, i]) @ h @ X[:, i] for i in range(n - 1)]))
    mu1 = float((S @ T) @ h @ T)
    mu2 = float(np.mean([(S @ X[:, i]) @ h @ X[:, i] for i in range(n - 1)]))
    alpha = f_tag = None
    if cp.gradP is not None:
        # h(nabla_X T, X) = -h((nabla_X P) T, X) / (nu2 - nu1) for a simple eigenvalue nu1
        terms = [(np.einsum("alm,m,a->l", cp.gradP, T, X[:, i]) @ h @ X[:, i]) for i in range(n - 1)]
        alpha = float(np.sum(terms) / ((n - 1) * (nu2 - nu1)))
        f_tag = "f=1" if abs(alpha) < tol.zero * max(1.0, abs(lam2)) else "f=t"
    return StructureFrame(T, X, lam1, lam2, mu1, mu2, nu1, nu2, alpha, f_tag)


def warp_constant(fr: StructureFrame) -> float | None:
    """Curvature c of the fiber: ``mu2 - lambda2^2`` (f=1) or ``1 + (mu2 - lambda2^2) t^2``
    with ``t = -1/alpha`` (f=t)."""
    if fr.f_tag is None:
        return None
    base = fr.mu2 - fr.lambda2 ** 2
    return base if fr.f_tag == "f=1" else 1.0 + base / fr.alpha ** 2


# --------------------------------------------------------------------------
# pointwise identities

def traceless_ricci_norm_sq(cp: CurvaturePack, h: np.ndarray) -> float:
    n = h.shape[0]
    return hnorm(cp.Ric - cp.r / n * h, h) ** 2


def frame_identities(bp: BlaschkePoint, cp: CurvaturePack, fr: StructureFrame | None,
                 affine_sphere: bool) -> dict[str, float]:
    """Residuals of the m = 2 frame identities and, for affine spheres, the scalar identities.

    Checks that do not apply to the detected structure are omitted.
    """
    n, h, K, S = bp.n, bp.h, bp.K, bp.S
    H, J, r = mean_curvature(bp), pick_invariant(bp), cp.r
    out: dict[str, float] = {}
    if fr is not None:
        T, X = fr.T, fr.X
        vn = lambda v: float(np.sqrt(max(v @ h @ v, 0.0)))
        worst = vn(_Kvec(K, T, T) - fr.lambda1 * T)
        Q = cp.Q
        qt = vn(Q @ T)
        qx, l2, sx = 0.0, 0.0, 0.0
        for i in range(n - 1):
            Xi = X[:, i]
            worst = max(worst, vn(_Kvec(K, T, Xi) - fr.lambda2 * Xi))
            qx = max(qx, vn(Q @ Xi - r / (n - 1) * Xi))
            sx = max(sx, vn(S @ Xi - fr.mu2 * Xi))
            for j in range(n - 1):
                l2 = max(l2, vn(_Kvec(K, Xi, X[:, j]) - fr.lambda2 * (i == j) * T))
        worst = max(worst, l2)
        out["K_frame"] = float(worst / max(1.0, abs(fr.lambda1)))
        out["L2"] = float(l2)
        out["lambda1_lambda2"] = _rel(fr.lambda1, -(n - 1) * fr.lambda2)
        out["nu1_nu2"] = _rel(fr.nu1, -fr.nu2)
        out["ricci_T"] = float(qt / max(1.0, abs(r)))
        out["ricci_X"] = float(qx / max(1.0, abs(r)))
        out["nu2_scalar"] = _rel(fr.nu2, r / (2 * (n - 1) * (n - 2)))
        out["shape_T"] = float(vn(S @ T - fr.mu1 * T) / max(1.0, abs(fr.mu1)))
        out["shape_X"] = float(sx / max(1.0, abs(fr.mu2)))
        out["mu2_identity"] = _rel(fr.mu2, 2 * fr.nu2 + fr.lambda2 ** 2, 2 * fr.nu2, fr.lambda2 ** 2)
        out["mu_sum_identity"] = _rel(fr.mu1 + fr.mu2, -2 * n * fr.lambda2 ** 2, fr.mu1, fr.mu2)
        if affine_sphere:
            out["H_lambda2"] = _rel(H, -n * fr.lambda2 ** 2)
            out["r_H"] = _rel(r, (n * n - 1) * (n - 2) * H / n)
            out["J_H"] = _rel(J, -(n + 2) * H / n ** 2)
            out["traceless_ricci"] = _rel(traceless_ricci_norm_sq(cp, h), r * r / (n * (n - 1)))
    if affine_sphere and n >= 3:
        lhs = traceless_ricci_norm_sq(cp, h)
        rhs = -(n + 1) * (n - 2) / (n + 2) * J * r
        out["ricci_inequality_excess"] = max(0.0, lhs - rhs)
        out["ricci_inequality_equality"] = _rel(lhs, rhs)
    return out


def point_residuals(bp: BlaschkePoint, cp: CurvaturePack) -> dict[str, float | None]:
    """Every identity that holds on any Blaschke hypersurface, plus the dual R.C route."""
    out: dict[str, float | None] = dict(blaschke_invariants(bp))
    out.update(structure_residuals(bp, cp))
    out["bianchi"] = hnorm(bianchi_residual(cp.Riem), bp.h, "lllu")
    out["metricity"] = hnorm(cp.gradh, bp.h)
    out["semiparallel_dual_route"] = semiparallel_residual(bp, cp)[1]
    return out


IDENTITY_KEYS = ("symmetric_metric", "volume", "metric_consistency", "equiaffine", "K_symmetry",
                 "K_total_symmetry", "apolarity", "cubic_form", "shape_self_adjoint", "gauss",
                 "codazziK", "codazziS", "chi_identity", "bianchi", "metricity",
                 "semiparallel_dual_route")


# --------------------------------------------------------------------------
# per-point record

@dataclass
class PointRecord:
    index: int
    point: list[float]
    ok: bool = True
    error: str | None = None
    error_code: str | None = None
    H: float | None = None
    J: float | None = None
    chi: float | None = None
    r: float | None = None
    C_norm: float | None = None
    R_norm: float | None = None
    weyl_norm: float | None = None
    semiparallel: float | None = None
    shape_umbilic: float | None = None
    residuals: dict = field(default_factory=dict)
    P_values: list | None = None
    P_mult: list | None = None
    P_confident: bool | None = None
    P_m_range: list | None = None
    S_values: list | None = None
    S_mult: list | None = None
    S_confident: bool | None = None
    frame: dict | None = None
    frame_checks: dict | None = None
    h: list | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def analyze_blaschke(bp: BlaschkePoint, cp: CurvaturePack, index: int = 0,
                     tol: Tolerances = DEFAULT_TOL) -> tuple[PointRecord, StructureFrame | None]:
    n, h = bp.n, bp.h
    H = mean_curvature(bp)
    rec = PointRecord(index, [float(x) for x in bp.point])
    rec.H, rec.J, rec.chi, rec.r = H, pick_invariant(bp), cp.chi, cp.r
    rec.C_norm = hnorm(bp.C, h)
    rec.R_norm = hnorm(cp.Riem, h, "lllu")
    rec.weyl_norm = cp.weyl_norm
    rec.semiparallel = semiparallel_residual(bp, cp)[0]
    rec.shape_umbilic = hnorm(bp.S - H * np.eye(n), h, "ul")
    rec.residuals = point_residuals(bp, cp)
    rec.h = h.tolist()
    fr = None
    if n >= 3:
        pp = eigen_partition(cp.P, h, tol)
        rec.P_values, rec.P_mult = pp.values, pp.multiplicities
        rec.P_confident, rec.P_m_range = pp.confident, list(pp.m_range)
        fr = structure_frame(bp, cp, pp, tol)
    sp = eigen_partition(bp.S, h, tol)
    rec.S_values, rec.S_mult, rec.S_confident = sp.values, sp.multiplicities, sp.confident
    sphere = rec.shape_umbilic < tol.zero * max(1.0, abs(H))
    if fr is not None or sphere:
        rec.frame_checks = frame_identities(bp, cp, fr, sphere)
    if fr is not None:
        rec.frame = {"T": fr.T.tolist(), "lambda1": fr.lambda1, "lambda2": fr.lambda2,
                     "mu1": fr.mu1, "mu2": fr.mu2, "nu1": fr.nu1, "nu2": fr.nu2,
                     "alpha": fr.alpha, "f_tag": fr.f_tag, "c": warp_constant(fr)}
    return rec, fr


def analyze_point(spec: ImmersionSpec, point: Sequence[float], order: int = DEFAULT_ORDER,
                  index: int = 0, tol: Tolerances = DEFAULT_TOL) -> PointRecord:
    """Blaschke data, curvature and eigenstructure at one chart point.

    Numerical failures (non-convex point, degenerate frame, domain errors)
    are captured in the record rather than raised.
    """
    try:
        bp = blaschke_point(spec, point, order)
        cp = curvature_pack(bp)
        rec, fr = analyze_blaschke(bp, cp, index, tol)
    except AffineLabError as exc:
        return PointRecord(index, [float(x) for x in point], ok=False, error=str(exc),
                           error_code=exc.code)
    return rec


# --------------------------------------------------------------------------
# derivatives along T

def _frame_at(spec, p, order, tol):
    bp = blaschke_point(spec, p, order)
    cp = curvature_pack(bp)
    pp = eigen_partition(cp.P, bp.h, tol)
    fr = structure_frame(bp, cp, pp, tol)
    if fr is None:
        raise StructureMismatchError(f"two-eigenvalue structure lost near {list(map(float, p))}")
    return bp, cp, fr


def warped_structure_check(spec: ImmersionSpec, point: Sequence[float], order: int = DEFAULT_ORDER,
                           tol: Tolerances = DEFAULT_TOL, step: float = FD_STEP,
                           fiber: ImmersionSpec | None = None) -> dict[str, float | None]:
    """Residuals of the warped-product structure at ``point``.

    Derivatives along T use a 5-point central difference on the chart line
    ``p + s T(p)``; the directional derivative at ``s = 0`` equals ``T(.)``.
    When T is tangent to the first coordinate line, the block shape of the
    metric ``h = dt^2 + f(t)^2 g`` is also checked; ``fiber`` supplies the
    fiber metric ``g`` (the chart must then be ``(t, x)``).
    """
    p = np.asarray(point, dtype=float)
    bp, cp, fr = _frame_at(spec, p, order, tol)
    n = bp.n
    if fr.alpha is None:
        raise StructureMismatchError("T-derivatives need jet order >= 5")
    samples = []
    for k in (-2, -1, 0, 1, 2):
        if k == 0:
            samples.append(fr)
            continue
        q = p + k * step * fr.T
        _, _, fq = _frame_at(spec, q, order, tol)
        samples.append(fq)
    d = lambda name: float(_FD_WEIGHTS @ np.array([getattr(s, name) for s in samples]) / step)
    Ta, Tl, Tm = d("alpha"), d("lambda2"), d("mu2")
    a, l2, m1, m2 = fr.alpha, fr.lambda2, fr.mu1, fr.mu2

    def res(lhs, rhs, *terms):
        return abs(lhs - rhs) / max(1.0, *map(abs, (lhs, rhs) + terms))

    out: dict[str, float | None] = {
        "T_alpha": res(Ta, a * a),
        "T_lambda2": res(Tl, (n + 1) * l2 * a + 0.5 * (m1 - m2), (n + 1) * l2 * a, m1, m2),
        "T_mu2": res(Tm, (m2 - m1) * (a - l2), m2 * a, m1 * l2),
    }
    # the warping function: f = 1 means alpha = 0, f = t means alpha = -1/t with t = -1/alpha
    c = warp_constant(fr)
    out["c"] = c
    # sectional curvatures of a warped product over a constant-curvature fiber
    r = cp.r
    kfib = r / ((n - 1) * (n - 2))
    scale = max(1.0, abs(kfib))
    out["sectional_TX"] = abs(sectional_curvature(cp.Riem, bp.h, fr.T, fr.X[:, 0])) / scale
    out["sectional_XX"] = (abs(sectional_curvature(cp.Riem, bp.h, fr.X[:, 0], fr.X[:, 1]) - kfib) / scale
                           if n >= 3 else None)
    out["L2"] = frame_identities(bp, cp, fr, False)["L2"]
    out.update(_block_shape(bp, fr, p, fiber, tol))
    return out


def _block_shape(bp, fr, p, fiber, tol) -> dict[str, float | None]:
    h = bp.h
    e1 = np.zeros(bp.n)
    e1[0] = 1.0 / math.sqrt(h[0, 0])
    tangent = float(np.linalg.norm(fr.T - e1))
    out: dict[str, float | None] = {"T_tangent_to_t": tangent, "block_htt": None, "block_offdiag": None,
                                    "block_fiber": None, "warp_t": None}
    if tangent > tol.zero:
        return out
    out["block_htt"] = abs(h[0, 0] - 1.0)
    out["block_offdiag"] = float(np.abs(h[0, 1:]).max())
    t = float(p[0])
    f = 1.0 if fr.f_tag == "f=1" else t
    if fr.f_tag == "f=t":
        out["warp_t"] = abs(-1.0 / fr.alpha - t) / t
    if fiber is not None:
        g = blaschke_point(fiber, p[1:], 4).h
        out["block_fiber"] = float(np.abs(h[1:, 1:] - f * f * g).max() / np.abs(g).max())
    return out


# --------------------------------------------------------------------------
# sampling and the verdict

def sample_points(spec: ImmersionSpec, count: int = 25, seed: int = 0) -> np.ndarray:
    """Scrambled Sobol points in the domain box of ``spec``."""
    import warnings

    from scipy.stats import qmc

    box = spec.box()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # balance warning for non powers of two
        unit = qmc.Sobol(d=spec.chart_dim, scramble=True, seed=seed).random(count)
    return box[:, 0] + unit * (box[:, 1] - box[:, 0])


@dataclass
class StructureReport:
    n: int
    convexity_ok: bool
    is_affine_sphere: bool
    m: int | None
    sigma: int | None
    weyl_norm: float | None
    semiparallel_residual: float | None
    identity_residuals: dict
    verdict: str
    verdict_evidence: str
    m_multiplicities: list | None = None
    c: float | None = None
    f_tag: str | None = None
    errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _max(values):
    vals = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    return max(vals) if vals else None


def _spread(values):
    vals = np.array([v for v in values if v is not None], dtype=float)
    if vals.size == 0:
        return None
    return float((vals.max() - vals.min()) / max(np.abs(vals).max(), 1e-300)) if np.abs(vals).max() > 0 else 0.0


def verdict(records: Sequence[PointRecord], n: int, tol: Tolerances = DEFAULT_TOL,
            warped: Sequence[dict] = ()) -> StructureReport:
    """Fold per-point records (and warped-check residuals) into a classification.

    The tree: C = 0 gives a quadric.  Otherwise R.C = 0 and, for n >= 4,
    W = 0 must hold at every point.  Then m = 1 leads to flat metrics
    (the Calabi type when the hypersurface is a hyperbolic affine sphere),
    m = 2 with sigma = 1 to the Lorentz-type sphere and m = sigma = 2 to the
    warped families, distinguished by the warping function and the sign of c.
    """
    recs = sorted(records, key=lambda r: r.index)
    good = [r for r in recs if r.ok]
    errors = [{"index": r.index, "code": r.error_code, "message": r.error} for r in recs if not r.ok]
    ident = {k: _max(r.residuals.get(k) for r in good) for k in IDENTITY_KEYS}
    base = dict(n=n, convexity_ok=not any(e["code"] == "not_convex" for e in errors),
                identity_residuals=ident, errors=errors)

    def report(v, why, **kw):
        fields = dict(is_affine_sphere=False, m=None, sigma=None, weyl_norm=None,
                      semiparallel_residual=None)
        fields.update(kw)
        return StructureReport(verdict=v, verdict_evidence=why, **base, **fields)

    if errors or not good:
        return report("Unclassified", f"{len(errors)} sample point(s) failed: {errors[0]['message'] if errors else 'no points'}")

    semi = _max(r.semiparallel for r in good)
    weyl = _max(r.weyl_norm for r in good) if n >= 3 else None
    Hs = [r.H for r in good]
    umb = _max(r.shape_umbilic for r in good)
    H_spread = _spread(Hs)
    sphere = umb < tol.zero * max(1.0, max(abs(h) for h in Hs)) and (H_spread is None or H_spread < tol.zero
                                                                      or max(abs(h) for h in Hs) < tol.zero)
    ms = {len(r.P_values) for r in good} if n >= 3 else set()
    sigmas = {len(r.S_values) for r in good}
    m = ms.pop() if len(ms) == 1 else None
    sigma = sigmas.pop() if len(sigmas) == 1 else None
    common = dict(is_affine_sphere=bool(sphere), m=m, sigma=sigma, weyl_norm=weyl, semiparallel_residual=semi)
    bad_ident = {k: v for k, v in ident.items() if v is not None and v >= tol.identity}
    if bad_ident:
        return report("Unclassified", f"structure identities fail: {sorted(bad_ident)}", **common)

    cmax = _max(r.C_norm for r in good)
    if cmax < tol.zero:
        return report("Quadric", f"max |C|_h = {cmax:.3g} < {tol.zero:g} (Pick-Berwald)", **common)
    if semi >= tol.zero:
        return report("Unclassified", f"not semi-parallel: max |R.C|_h = {semi:.3g}", **common)
    if n >= 4 and weyl >= tol.zero:
        return report("Unclassified", f"Weyl tensor does not vanish: max |W|_h = {weyl:.3g}", **common)
    if n < 3:
        return report("Unclassified", "classification needs n >= 3", **common)
    if m is None or any(not r.P_confident for r in good):
        return report("Unclassified", f"Schouten eigenvalue count unstable across points: {sorted({len(r.P_values) for r in good})}", **common)
    mults = good[0].P_mult
    common["m_multiplicities"] = mults

    if m == 1:
        rmax = _max(r.R_norm for r in good)
        if rmax >= tol.zero:
            return report("Unclassified", f"m = 1 but metric is not flat (|R|_h = {rmax:.3g}) while C != 0", **common)
        H = float(np.mean(Hs))
        if sphere and H < -tol.zero:
            jh = _max(_rel(r.J, -r.H) for r in good)
            if jh < tol.zero:
                return report("CalabiType_1_2", f"flat hyperbolic affine sphere, H = {H:.9g}, J = -H to {jh:.2g}", **common)
            return report("Unclassified", f"flat hyperbolic sphere with J != -H ({jh:.3g})", **common)
        return report("FlatMetric", f"flat metric with C != 0, sigma = {sigma}", **common)

    if m != 2 or sorted(mults) != [1, n - 1]:
        return report("Unclassified", f"m = {m} with multiplicities {mults}", **common)
    if sigma is None or any(not r.S_confident for r in good):
        return report("Unclassified", "shape-operator eigenvalue count unstable", **common)

    frame_res = {}
    for r in good:
        for k, v in (r.frame_checks or {}).items():
            frame_res[k] = max(frame_res.get(k, 0.0), v)
    base["identity_residuals"] = {**ident, **{f"frame.{k}": v for k, v in frame_res.items()}}
    bad = {k: v for k, v in frame_res.items() if not k.startswith("ricci_inequality") and v >= tol.relative}
    if bad:
        return report("Unclassified", f"frame identities fail: {sorted(bad)}", **common)

    if sigma == 1:
        if not sphere:
            return report("Unclassified", "sigma = 1 but S is not a constant multiple of the identity", **common)
        return report("LorentzSphere_1_3", "m = 2, sigma = 1: hyperbolic affine sphere satisfying the scalar "
                      f"and traceless-Ricci identities (H = {np.mean(Hs):.9g})", **common)
    if sigma != 2:
        return report("Unclassified", f"m = 2 with sigma = {sigma}", **common)

    tags = {r.frame["f_tag"] for r in good}
    if len(tags) != 1 or None in tags:
        return report("Unclassified", f"warping function undetermined: {sorted(map(str, tags))}", **common)
    f_tag = tags.pop()
    cs = [r.frame["c"] for r in good]
    c = float(np.mean(cs))
    cscale = max(abs(x) for x in cs)
    c_spread = (max(cs) - min(cs)) / cscale if cscale > tol.zero else 0.0
    common.update(c=c, f_tag=f_tag)
    if c_spread >= tol.zero:
        return report("Unclassified", f"fiber curvature c not constant (spread {c_spread:.3g})", **common)
    wmax = {}
    for w in warped:
        for k, v in w.items():
            if k in ("c",) or v is None:
                continue
            wmax[k] = max(wmax.get(k, 0.0), v)
    base["identity_residuals"].update({f"warped.{k}": v for k, v in wmax.items()})
    fd_bad = [k for k in ("T_alpha", "T_lambda2", "T_mu2") if wmax.get(k, 0.0) >= tol.fd]
    geo_bad = [k for k in ("L2", "sectional_TX", "sectional_XX", "block_htt", "block_offdiag",
                           "block_fiber", "warp_t") if wmax.get(k, 0.0) >= tol.zero]
    if fd_bad or geo_bad:
        return report("Unclassified", f"warped-product checks fail: {fd_bad + geo_bad}", **common)

    if f_tag == "f=1":
        if abs(c) < tol.zero:
            return report("Unclassified", "f = 1 with c = 0 is excluded (r != 0)", **common)
        fam = 1 if c > 0 else 2
    elif abs(c) < tol.zero:
        stat = _max(r.frame["mu2"] ** 2 + (r.frame["alpha"] - r.frame["lambda2"]) ** 2 for r in good)
        fam = 6 if stat < tol.zero else 5
    else:
        if c > 0 and abs(c - 1) < tol.zero:
            return report("Unclassified", "f = t with c = 1 is excluded (r != 0)", **common)
        fam = 3 if c > 0 else 4
    return report(f"WarpedFamily_{fam}", f"m = sigma = 2, {f_tag}, c = {c:.9g}", **common)


def _analyze_star(args):
    return analyze_point(*args)


def analyze(spec: ImmersionSpec, points: np.ndarray, order: int = DEFAULT_ORDER,
            tol: Tolerances = DEFAULT_TOL, workers: int = 1) -> list[PointRecord]:
    """Per-point records, in point order regardless of ``workers``."""
    jobs = [(spec, list(map(float, p)), order, i, tol) for i, p in enumerate(points)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            recs = list(pool.map(_analyze_star, jobs))
    else:
        recs = [_analyze_star(j) for j in jobs]
    return sorted(recs, key=lambda r: r.index)


def _warped_candidate(records: Sequence[PointRecord], n: int) -> bool:
    return (n >= 3 and all(r.ok and r.frame is not None and r.frame["alpha"] is not None
                           and len(r.S_values) == 2 for r in records))


def classify(spec: ImmersionSpec, points: np.ndarray | None = None, *, count: int = 25, seed: int = 0,
             order: int = DEFAULT_ORDER, tol: Tolerances = DEFAULT_TOL, workers: int = 1,
             fiber: ImmersionSpec | None = None) -> tuple[StructureReport, list[PointRecord], list[dict]]:
    """Analyze ``spec`` on a sample and return ``(report, records, warped_checks)``.

    The warped-product checks run only when every point shows the
    two-eigenvalue structure with two affine principal curvatures.
    """
    if points is None:
        points = sample_points(spec, count, seed)
    records = analyze(spec, points, order, tol, workers)
    warped: list[dict] = []
    if _warped_candidate(records, spec.chart_dim):
        for r in records:
            try:
                warped.append(warped_structure_check(spec, r.point, order, tol, fiber=fiber))
            except AffineLabError as exc:
                warped.append({"error": None})
                r.ok, r.error, r.error_code = False, f"warped check: {exc}", exc.code
    return verdict(records, spec.chart_dim, tol, warped), records, warped
