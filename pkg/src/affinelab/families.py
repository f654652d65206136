"""Catalog of built-in immersions.

Every entry is generated as DSL text and parsed, so a built-in spec is
indistinguishable from a user-written one and can be emitted as ``.sdl``.

Warped families use the chart ``(t, x_1, ..., x_{n-1}) = (u1, u2, ..., un)``
with ``t`` in ``[1/2, 2]`` and each ``x_i`` in ``[-1/2, 1/2]``; constants of
integration are fixed by ``gamma(t_lo) = 0`` at the left end of the t-range.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .dsl import ImmersionSpec, ProfileDef, format_number, parse_immersion, profile_taylor
from .errors import ParameterError

QUADRICS = ("Quadric_Ellipsoid", "Quadric_Hyperboloid", "Quadric_Paraboloid")
WARPED = ("W1", "W2", "W3", "W4", "W5", "W6")
FAMILY_IDS = QUADRICS + ("Calabi_1_2", "Lorentz_1_3") + WARPED + ("PerturbedCubic",)

DEFAULT_T_RANGE = (0.5, 2.0)
DEFAULT_C = {
    "Quadric_Ellipsoid": 1.0, "Quadric_Hyperboloid": -1.0,
    "W1": 0.25, "W2": -0.5, "W3": 0.5, "W4": -0.5, "W5": 0.0, "W6": 0.0,
}
DEFAULT_CONSTANTS = {
    "W1": {"c1": 1.0, "c2": 1.0},
    "W2": {"c1": 1.0, "c2": 1.0},
    "W3": {"c2": 1.0, "c3": 1.0},
    "W4": {"c2": 1.0, "c3": 1.0},
    "W5": {"c1": 1.0},
    "PerturbedCubic": {"epsilon": 0.1},
}
# expected warping function of each warped family
WARP_TAG = {"W1": "f=1", "W2": "f=1", "W3": "f=t", "W4": "f=t", "W5": "f=t", "W6": "f=t"}

_ALIASES = {fid.lower(): fid for fid in FAMILY_IDS}
_ALIASES.update({"ellipsoid": "Quadric_Ellipsoid", "hyperboloid": "Quadric_Hyperboloid",
                 "paraboloid": "Quadric_Paraboloid", "calabi": "Calabi_1_2",
                 "lorentz": "Lorentz_1_3", "perturbed_cubic": "PerturbedCubic"})


def canonical_id(spec_id: str) -> str:
    key = spec_id.strip().lower()
    if key not in _ALIASES:
        raise ParameterError(f"unknown family '{spec_id}'; known: {', '.join(FAMILY_IDS)}")
    return _ALIASES[key]


@dataclass
class FamilyParams:
    family_id: str
    n: int = 3
    c: float | None = None
    constants: dict = field(default_factory=dict)
    t_range: tuple[float, float] = DEFAULT_T_RANGE

    def __post_init__(self):
        self.family_id = canonical_id(self.family_id)
        if self.c is None:
            self.c = DEFAULT_C.get(self.family_id)
        merged = dict(DEFAULT_CONSTANTS.get(self.family_id, {}))
        merged.update(self.constants)
        self.constants = merged

    def const(self, name: str) -> float:
        return float(self.constants[name])


def _lit(x: float) -> str:
    s = format_number(abs(float(x)))
    return f"(-{s})" if x < 0 else s


def _check_n(n: int):
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ParameterError(f"dimension n must be an integer >= 2, got {n}")


# --------------------------------------------------------------------------
# quadrics

def quadric_radius_sq(d: int, c: float) -> float:
    """Squared radius of the round sphere in R^{d+1} whose affine metric has curvature c."""
    return c ** (-(d + 2) / (d + 1))


def fiber_quadric(kind: str, d: int, c: float, xs: list[str]) -> list[str]:
    """Components (as DSL text over ``xs``) of a d-dimensional quadric in R^{d+1}.

    ``F1`` is the ellipsoid (stereographic chart, ``c > 0``), ``F2`` the
    hyperboloid graph (``c < 0``) and ``paraboloid_graph`` the flat
    paraboloid ``(x, |x|^2/2)`` (``c = 0``).  Each has constant sectional
    curvature ``c`` and, for ``c != 0``, affine normal ``-c F``.
    """
    if len(xs) != d:
        raise ParameterError(f"need {d} fiber variables, got {len(xs)}")
    sq = " + ".join(f"{x}^2" for x in xs) if xs else "0"
    if kind == "F1":
        if not c > 0:
            raise ParameterError(f"ellipsoid fiber needs c > 0, got {c}")
        rad = _lit(math.sqrt(quadric_radius_sq(d, c)))
        den = f"(1 + {sq})"
        comps = [f"{rad}*2*{x}/{den}" for x in xs]
        comps.append(f"{rad}*({sq} - 1)/{den}")
        return comps
    if kind == "F2":
        if not c < 0:
            raise ParameterError(f"hyperboloid fiber needs c < 0, got {c}")
        off = _lit(quadric_radius_sq(d, -c))
        return list(xs) + [f"sqrt({sq} + {off})"]
    if kind == "paraboloid_graph":
        if c != 0:
            raise ParameterError(f"paraboloid fiber is flat, got c = {c}")
        return list(xs) + [f"({sq})/2"]
    raise ParameterError(f"unknown fiber kind '{kind}'")


# --------------------------------------------------------------------------
# the profile k(t)

@dataclass
class KProfile:
    """Positive solution k of ``f^2 k'' - (n+1) f f' k' + (n+1) c k = 0``.

    ``expr`` is the DSL right-hand side of ``let k(s) = ...``.
    """

    n: int
    c: float
    warp: str  # "f=1" or "f=t"
    mode: str  # "closed_form" or "numeric"
    expr: str
    positivity: tuple[float, float] | None = None

    def profile(self) -> ProfileDef:
        spec = parse_immersion(f"n=1; let k(s) = {self.expr}; F = (u1, k(u1));")
        return spec.profiles[0]

    def taylor(self, t: float, order: int = 2) -> np.ndarray:
        pdef = self.profile()
        return profile_taylor(pdef, t, order, {pdef.name: pdef})

    def residual(self, ts) -> float:
        """Largest ODE residual on ``ts``, relative to the size of its terms."""
        pdef = self.profile()
        worst = 0.0
        for t in np.atleast_1d(ts):
            k0, k1, k2 = profile_taylor(pdef, float(t), 2, {pdef.name: pdef})
            k2 *= 2.0
            f, df = (1.0, 0.0) if self.warp == "f=1" else (float(t), 1.0)
            terms = np.array([f * f * k2, (self.n + 1) * f * df * k1, (self.n + 1) * self.c * k0])
            res = terms[0] - terms[1] + terms[2]
            worst = max(worst, abs(res) / max(1.0, np.abs(terms).max()))
        return worst


def power_exponents(n: int, c: float) -> tuple[float, float] | None:
    """Roots of ``tau^2 - (n+2) tau + (n+1) c = 0``; None when complex."""
    disc = (n + 2) ** 2 - 4 * (n + 1) * c
    if disc < 0:
        return None
    r = math.sqrt(disc)
    return ((n + 2 + r) / 2, (n + 2 - r) / 2)


def solve_k(n: int, c: float, mode: str = "auto", params: Mapping[str, float] | None = None,
            t_range: tuple[float, float] = DEFAULT_T_RANGE, warp: str | None = None) -> KProfile:
    """Profile ``k`` for warped families.

    ``warp`` defaults to ``f=1``.  Closed forms: exponential/trigonometric for
    ``f=1`` and power functions for ``f=t`` (with ``c <= (n+2)^2/(4(n+1))``).
    ``mode="numeric"`` integrates the ODE from ``(s0, k0, dk0)`` given in
    ``params`` (defaults: left end of ``t_range``, ``k0 = 1``, ``dk0 = 0``).
    """
    params = dict(params or {})
    warp = warp or "f=1"
    if warp not in ("f=1", "f=t"):
        raise ParameterError(f"warp must be 'f=1' or 'f=t', got {warp}")
    if c == 0:
        raise ParameterError("the k-equation needs c != 0")
    if mode not in ("auto", "closed_form", "numeric"):
        raise ParameterError(f"unknown mode '{mode}'")
    boundary = (n + 2) ** 2 / (4 * (n + 1))
    closed_ok = warp == "f=1" or c <= boundary
    if mode == "auto":
        mode = "numeric" if ("k0" in params or not closed_ok) else "closed_form"
    if mode == "closed_form" and not closed_ok:
        raise ParameterError(f"no power solution for c > {boundary}; use numeric mode")

    if mode == "closed_form":
        c1, c2, c3 = (float(params.get(k, 1.0)) for k in ("c1", "c2", "c3"))
        if warp == "f=1":
            w = _lit(math.sqrt((n + 1) * abs(c)))
            if c > 0:
                expr = f"{_lit(c1)}*cos({w}*s) + {_lit(c2)}*sin({w}*s)"
            else:
                expr = f"{_lit(c1)}*exp({w}*s) + {_lit(c2)}*exp(-{w}*s)"
        elif abs(c - boundary) <= 1e-14 * boundary:
            expr = f"{_lit(c1)}*s^{_lit((n + 2) / 2)}"
        else:
            tau1, tau2 = power_exponents(n, c)
            expr = f"{_lit(c2)}*s^{_lit(tau1)} + {_lit(c3)}*s^{_lit(tau2)}"
    else:
        s0 = float(params.get("s0", t_range[0]))
        k0 = float(params.get("k0", 1.0))
        dk0 = float(params.get("dk0", 0.0))
        m = n + 1
        if warp == "f=1":
            p, q = "0", _lit(-m * c)
        else:
            p, q = f"{m}/s", f"{_lit(-m * c)}/s^2"
        expr = f"linode({p}, {q}, {format_number(s0)}, {format_number(k0)}, {format_number(dk0)})"

    prof = KProfile(n, c, warp, mode, expr)
    prof.positivity = _positivity(prof, t_range)
    return prof


def _positivity(prof: KProfile, t_range) -> tuple[float, float]:
    """Largest sub-interval around the left end on which k stays positive."""
    pdef = prof.profile()
    ts = np.linspace(t_range[0], t_range[1], 65)
    vals = [profile_taylor(pdef, float(t), 0, {pdef.name: pdef})[0] for t in ts]
    if vals[0] <= 0:
        raise ParameterError(f"k is not positive at t = {ts[0]}")
    bad = [i for i, v in enumerate(vals) if v <= 0]
    if bad:
        hi = float(ts[bad[0] - 1])
        warnings.warn(f"k vanishes inside the t-range; positive on [{ts[0]}, {hi}]", RuntimeWarning)
        return (float(ts[0]), hi)
    return (float(ts[0]), float(ts[-1]))


# --------------------------------------------------------------------------
# profiles of the warped families

def _profile_lets(fid: str, p: FamilyParams) -> tuple[list[str], str, str]:
    """``let`` lines plus the DSL names of gamma_1 and gamma_2."""
    n, c, t0 = p.n, p.c, p.t_range[0]
    if fid in ("W1", "W2", "W3", "W4"):
        warp = WARP_TAG[fid]
        prof = solve_k(n, c, "auto", p.constants, p.t_range, warp)
        if prof.positivity[1] < p.t_range[1]:
            raise ParameterError(f"k is not positive on the whole t-range {p.t_range}")
        lets = [f"let k(s) = {prof.expr};", f"let g2(s) = k(s)^(1/{n + 1});"]
        weight = "" if warp == "f=1" else f"s^{n + 1}*"
        lets.append(f"let g1(s) = integral({weight}g2(s)^(-{n}), {format_number(t0)});")
        return lets, "g1", "g2"
    if fid == "W6":
        return [f"let g1(s) = -log(s)/{n + 2};", f"let g2(s) = s^{n + 2}/{n + 2};"], "g1", "g2"
    if fid == "W5":
        c1 = p.const("c1")
        lets = [
            f"let g1(s) = ({n + 1}/{n + 2}*s^{n + 2} + {_lit(c1)})^(1/{n + 1});",
            f"let dg1(s) = s^{n + 1}*g1(s)^(-{n});",
            f"let g2(s) = integral({n + 1}/{n + 2}*dg1(s)*log(s) - g1(s)/({n + 2}*s), "
            f"{format_number(t0)});",
        ]
        return lets, "g1", "g2"
    raise ParameterError(f"{fid} has no quadrature profile")


def profile_quadrature(family_id: str, params: FamilyParams | None = None) -> tuple[Callable, Callable]:
    """``(gamma_1, gamma_2)`` as functions ``t -> Taylor coefficients`` up to a given order."""
    fid = canonical_id(family_id)
    p = params or FamilyParams(fid)
    lets, a, b = _profile_lets(fid, p)
    spec = parse_immersion(f"n=1; {' '.join(lets)} F = (u1, u1);")
    table = spec.profile_table

    def make(name):
        return lambda t, order=1: profile_taylor(table[name], float(t), order, table)

    return make(a), make(b)


# --------------------------------------------------------------------------
# catalog

def _check_constraints(fid: str, p: FamilyParams):
    c = p.c
    need = {"W1": c is not None and c > 0, "W2": c is not None and c < 0,
            "W3": c is not None and c > 0 and c != 1, "W4": c is not None and c < 0,
            "W5": c == 0, "W6": c == 0,
            "Quadric_Ellipsoid": c is not None and c > 0,
            "Quadric_Hyperboloid": c is not None and c < 0}
    if fid in need and not need[fid]:
        rule = {"W1": "c > 0", "W2": "c < 0", "W3": "c > 0 and c != 1", "W4": "c < 0",
                "W5": "c = 0", "W6": "c = 0", "Quadric_Ellipsoid": "c > 0",
                "Quadric_Hyperboloid": "c < 0"}[fid]
        raise ParameterError(f"{fid} requires {rule}, got c = {c}")
    lo, hi = p.t_range
    if fid in WARPED and not 0 < lo < hi:
        raise ParameterError(f"t-range must satisfy 0 < t_lo < t_hi, got {p.t_range}")
    if fid in ("W1", "W2", "W3", "W4", "W5", "W6", "Lorentz_1_3", "Calabi_1_2") and p.n < 3:
        raise ParameterError(f"{fid} is defined for n >= 3")


def family_text(spec_id: str, n: int = 3, params: FamilyParams | Mapping | None = None) -> str:
    """DSL source of a built-in immersion."""
    _check_n(n)
    fid = canonical_id(spec_id)
    if isinstance(params, FamilyParams):
        p = params
        p.n = n
    else:
        p = FamilyParams(fid, n, **dict(params or {}))
    _check_constraints(fid, p)
    us = [f"u{i + 1}" for i in range(n)]
    xs = us[1:]
    lets: list[str] = []
    box = [(-0.5, 0.5)] * n
    if fid in WARPED:
        box[0] = tuple(p.t_range)

    if fid == "Quadric_Ellipsoid":
        comps = fiber_quadric("F1", n, p.c, us)
    elif fid == "Quadric_Hyperboloid":
        comps = fiber_quadric("F2", n, p.c, us)
    elif fid == "Quadric_Paraboloid":
        comps = fiber_quadric("paraboloid_graph", n, 0.0, us)
    elif fid == "PerturbedCubic":
        eps = p.const("epsilon")
        comps = us + [f"({' + '.join(f'{u}^2' for u in us)})/2 + {_lit(eps)}*u1^3*u2"]
    elif fid == "Calabi_1_2":
        comps = [f"exp({u})" for u in us] + ["exp(-(" + " + ".join(us) + "))"]
    elif fid == "Lorentz_1_3":
        # x = e^s (v, sqrt(1 + |v|^2)), x_{n+1} = e^{-n s}
        s, vs = us[0], us[1:]
        root = f"sqrt(1 + {' + '.join(f'{v}^2' for v in vs)})"
        comps = [f"exp({s})*{v}" for v in vs] + [f"exp({s})*{root}", f"exp(-{n}*{s})"]
    elif fid in ("W1", "W3"):
        lets, a, b = _profile_lets(fid, p)
        comps = [f"{a}(u1)"] + [f"{b}(u1)*({e})" for e in fiber_quadric("F1", n - 1, p.c, xs)]
    elif fid in ("W2", "W4"):
        lets, a, b = _profile_lets(fid, p)
        comps = [f"{a}(u1)"] + [f"{b}(u1)*({e})" for e in fiber_quadric("F2", n - 1, p.c, xs)]
    elif fid == "W5":
        lets, a, b = _profile_lets(fid, p)
        half = fiber_quadric("paraboloid_graph", n - 1, 0.0, xs)[-1]
        comps = [f"{a}(u1)*{x}" for x in xs] + [f"{a}(u1)*{half} + {b}(u1)", f"{a}(u1)"]
    else:  # W6
        half = fiber_quadric("paraboloid_graph", n - 1, 0.0, xs)[-1]
        comps = list(xs) + [f"{half} - log(u1)/{n + 2}", f"u1^{n + 2}/{n + 2}"]

    dom = ", ".join(f"u{i + 1} = [{format_number(lo)}, {format_number(hi)}]"
                    for i, (lo, hi) in enumerate(box))
    lines = [f"n = {n};", f'name = "{fid}";', f"domain {dom};"] + lets
    lines.append("F = (" + ",\n     ".join(comps) + ");")
    return "\n".join(lines) + "\n"


def builtin(spec_id: str, n: int = 3, params: FamilyParams | Mapping | None = None) -> ImmersionSpec:
    """Parsed built-in immersion; see :data:`FAMILY_IDS`."""
    return parse_immersion(family_text(spec_id, n, params))


def fiber_spec(family_id: str, n: int, c: float) -> ImmersionSpec | None:
    """The (n-1)-dimensional fiber quadric of a warped family, as a standalone spec."""
    fid = canonical_id(family_id)
    kind = {"W1": "F1", "W3": "F1", "W2": "F2", "W4": "F2"}.get(fid, "paraboloid_graph")
    if fid not in WARPED:
        return None
    d = n - 1
    xs = [f"u{i + 1}" for i in range(d)]
    comps = fiber_quadric(kind, d, c if kind != "paraboloid_graph" else 0.0, xs)
    return parse_immersion(f"n = {d}; F = ({', '.join(comps)});")


def default_suite(n_values=(3,)) -> list[tuple[str, int]]:
    """(family id, n) pairs covering every built-in."""
    return [(fid, n) for n in n_values for fid in FAMILY_IDS]
