"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` stores the Taylor coefficients ``d^a f / a!`` of a function
of ``nvars`` variables at a base point, for every multi-index ``a`` with
``|a| <= order``.  Coefficients live densely in the last axis of a numpy
array, ranked graded-lexicographically, so a jet of order ``M`` is a prefix
of the same jet at any order ``N > M``.  Leading axes make a jet
tensor-valued: a ``Jet`` of shape ``(3, 3)`` is a 3x3 matrix of jets.

Jets are immutable; every operation returns a new one.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateFrameError, DimensionError, EvaluationError, OrderError

MAX_ORDER = 8


def _multi_indices(nvars: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree ``degree``, lexicographically descending."""
    out = []
    for combo in itertools.combinations_with_replacement(range(nvars), degree):
        alpha = [0] * nvars
        for v in combo:
            alpha[v] += 1
        out.append(tuple(alpha))
    return sorted(set(out), reverse=True)


class JetSpace:
    """Index bookkeeping for jets in ``nvars`` variables truncated at ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1:
            raise DimensionError(f"jets need at least one variable, got {nvars}")
        if order < 0:
            raise OrderError(f"jet order must be non-negative, got {order}")
        if order > MAX_ORDER:
            raise OrderError(f"jet order {order} exceeds the supported maximum {MAX_ORDER}")
        self.nvars = nvars
        self.order = order
        self.multi: list[tuple[int, ...]] = []
        for d in range(order + 1):
            self.multi.extend(_multi_indices(nvars, d))
        self.size = len(self.multi)
        self.rank = {a: i for i, a in enumerate(self.multi)}
        self.degree = np.array([sum(a) for a in self.multi])
        self.factorial = np.array([math.prod(math.factorial(k) for k in a) for a in self.multi], dtype=float)

        # product table: all (i, j) with multi[i] + multi[j] = multi[k], sorted by k
        pi, pj, pk = [], [], []
        for k, gamma in enumerate(self.multi):
            for i, alpha in enumerate(self.multi):
                if sum(alpha) > sum(gamma):
                    break
                beta = tuple(g - a for g, a in zip(gamma, alpha))
                if min(beta) >= 0:
                    pi.append(i)
                    pj.append(self.rank[beta])
                    pk.append(k)
        self.pi = np.array(pi)
        self.pj = np.array(pj)
        self.starts = np.flatnonzero(np.r_[True, np.diff(pk) != 0])

    def __repr__(self) -> str:
        return f"JetSpace(nvars={self.nvars}, order={self.order})"

    @lru_cache(maxsize=None)
    def _deriv_table(self, var: int) -> tuple[np.ndarray, np.ndarray]:
        """Source ranks and factors such that (d/du_var f)_a = (a_var + 1) f_{a + e_var}."""
        lower = jet_space(self.nvars, self.order - 1)
        src = np.empty(lower.size, dtype=int)
        fac = np.empty(lower.size)
        for r, alpha in enumerate(lower.multi):
            up = list(alpha)
            up[var] += 1
            src[r] = self.rank[tuple(up)]
            fac[r] = up[var]
        return src, fac


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


class Jet:
    """A (possibly tensor-valued) truncated Taylor expansion."""

    __slots__ = ("space", "coeffs")
    __array_priority__ = 100

    def __init__(self, space: JetSpace, coeffs):
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.ndim == 0 or coeffs.shape[-1] != space.size:
            raise DimensionError(f"coefficient axis must have length {space.size} for {space}")
        coeffs.setflags(write=False)
        self.space = space
        self.coeffs = coeffs

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, space: JetSpace, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (space.size,))
        c[..., 0] = value
        return cls(space, c)

    @classmethod
    def variable(cls, space: JetSpace, var: int, value: float = 0.0) -> "Jet":
        if not 0 <= var < space.nvars:
            raise DimensionError(f"variable index {var} out of range for {space}")
        c = np.zeros(space.size)
        c[0] = value
        if space.order >= 1:
            e = [0] * space.nvars
            e[var] = 1
            c[space.rank[tuple(e)]] = 1.0
        return cls(space, c)

    @classmethod
    def from_dict(cls, space: JetSpace, terms: dict[tuple[int, ...], float]) -> "Jet":
        c = np.zeros(space.size)
        for alpha, v in terms.items():
            if sum(alpha) <= space.order:
                c[space.rank[tuple(alpha)]] += v
        return cls(space, c)

    @staticmethod
    def stack(jets: Sequence["Jet"], axis: int = 0) -> "Jet":
        jets = list(jets)
        space = jets[0].space
        for j in jets:
            _check_same(space, j.space)
        if axis < 0:
            axis -= 1
        return Jet(space, np.stack([j.coeffs for j in jets], axis=axis))

    # properties ---------------------------------------------------------
    @property
    def nvars(self) -> int:
        return self.space.nvars

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def value(self) -> np.ndarray | float:
        v = self.coeffs[..., 0]
        return float(v) if v.ndim == 0 else v.copy()

    def coefficient(self, alpha: Sequence[int]):
        alpha = tuple(alpha)
        if sum(alpha) > self.order:
            return np.zeros(self.shape) if self.shape else 0.0
        v = self.coeffs[..., self.space.rank[alpha]]
        return float(v) if v.ndim == 0 else v.copy()

    def partial(self, alpha: Sequence[int]):
        """The partial derivative ``d^alpha f`` at the base point."""
        alpha = tuple(alpha)
        scale = math.prod(math.factorial(k) for k in alpha)
        return self.coefficient(alpha) * scale

    def first_derivatives(self) -> np.ndarray:
        """Gradient at the base point, derivative index last."""
        out = np.zeros(self.shape + (self.nvars,))
        for i in range(self.nvars):
            e = [0] * self.nvars
            e[i] = 1
            out[..., i] = self.coefficient(e)
        return out

    def evaluate(self, dx) -> np.ndarray | float:
        """Evaluate the Taylor polynomial at displacement ``dx``."""
        dx = np.asarray(dx, dtype=float)
        mono = np.array([np.prod(dx ** np.array(a)) for a in self.space.multi])
        v = self.coeffs @ mono
        return float(v) if np.ndim(v) == 0 else v

    def __len__(self) -> int:
        if not self.shape:
            raise TypeError("scalar jet has no length")
        return self.shape[0]

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx) or len(idx) > len(self.shape):
            raise IndexError("jets support plain indexing of their spatial axes only")
        return Jet(self.space, self.coeffs[idx])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __repr__(self) -> str:
        return f"Jet(nvars={self.nvars}, order={self.order}, shape={self.shape})"

    # structural ---------------------------------------------------------
    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise OrderError(f"cannot raise jet order from {self.order} to {order}")
        if order == self.order:
            return self
        sp = jet_space(self.nvars, order)
        return Jet(sp, self.coeffs[..., : sp.size])

    def deriv(self, var: int) -> "Jet":
        """Partial derivative in variable ``var``; the result has order one lower."""
        if self.order == 0:
            raise OrderError("cannot differentiate an order-0 jet")
        src, fac = self.space._deriv_table(var)
        return Jet(jet_space(self.nvars, self.order - 1), self.coeffs[..., src] * fac)

    def grad(self) -> "Jet":
        """All first partials, stacked along a new leading axis."""
        return Jet.stack([self.deriv(i) for i in range(self.nvars)], axis=0)

    def transpose(self, *axes: int) -> "Jet":
        nd = len(self.shape)
        if not axes:
            axes = tuple(reversed(range(nd)))
        return Jet(self.space, np.transpose(self.coeffs, tuple(axes) + (nd,)))

    def sum(self, axis=None) -> "Jet":
        nd = len(self.shape)
        if axis is None:
            axis = tuple(range(nd))
        return Jet(self.space, self.coeffs.sum(axis=axis))

    def reshape(self, *shape: int) -> "Jet":
        return Jet(self.space, self.coeffs.reshape(tuple(shape) + (self.space.size,)))

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            _check_same(self.space, other.space)
            return other.coeffs
        other = np.asarray(other, dtype=float)
        c = np.zeros(other.shape + (self.space.size,))
        c[..., 0] = other
        return c

    def __add__(self, other) -> "Jet":
        return Jet(self.space, self.coeffs + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        return Jet(self.space, self.coeffs - self._coerce(other))

    def __rsub__(self, other) -> "Jet":
        return Jet(self.space, self._coerce(other) - self.coeffs)

    def __neg__(self) -> "Jet":
        return Jet(self.space, -self.coeffs)

    def __pos__(self) -> "Jet":
        return self

    def __mul__(self, other) -> "Jet":
        if isinstance(other, Jet):
            _check_same(self.space, other.space)
            return Jet(self.space, _mul(self.space, self.coeffs, other.coeffs))
        other = np.asarray(other, dtype=float)
        return Jet(self.space, self.coeffs * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return self * other.reciprocal()
        other = np.asarray(other, dtype=float)
        return Jet(self.space, self.coeffs / other[..., None])

    def __rtruediv__(self, other) -> "Jet":
        return self.reciprocal() * other

    def __pow__(self, p) -> "Jet":
        if isinstance(p, (int, np.integer)) or (isinstance(p, float) and p.is_integer()):
            return _int_pow(self, int(p))
        return jet_apply("pow", self, float(p))

    def reciprocal(self) -> "Jet":
        """``1/a`` by Newton iteration ``x <- x (2 - a x)`` on the truncated ring."""
        a0 = self.coeffs[..., 0]
        if np.any(a0 == 0.0):
            raise EvaluationError("reciprocal of a jet with zero constant term")
        x = Jet.constant(self.space, 1.0 / a0)
        valid = 1
        while valid <= self.order:
            x = x * (2.0 - self * x)
            valid *= 2
        return x


def _check_same(a: JetSpace, b: JetSpace) -> None:
    if a is not b and (a.nvars != b.nvars or a.order != b.order):
        raise DimensionError(f"jet spaces differ: {a} vs {b}")


def _mul(space: JetSpace, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    prod = a[..., space.pi] * b[..., space.pj]
    return np.add.reduceat(prod, space.starts, axis=-1)


def _int_pow(a: Jet, p: int) -> Jet:
    if p < 0:
        return _int_pow(a.reciprocal(), -p)
    result = Jet.constant(a.space, np.ones(a.shape))
    base = a
    while p:
        if p & 1:
            result = result * base
        p >>= 1
        if p:
            base = base * base
    return result


def common_order(*jets: Jet) -> list[Jet]:
    """Truncate all jets to the lowest order among them."""
    order = min(j.order for j in jets)
    return [j.truncate(order) for j in jets]


# public operations ---------------------------------------------------------

def jet_add(a: Jet, b: Jet) -> Jet:
    return a + b


def jet_mul(a: Jet, b: Jet) -> Jet:
    return a * b


def jet_scale(a: Jet, s: float) -> Jet:
    return a * float(s)


def contract(subscripts: str, a, b) -> Jet:
    """``einsum``-style contraction of two jet tensors over their spatial axes.

    Either operand may be a plain array (a constant tensor); jet operands are
    first truncated to a common order.
    """
    inputs, out = subscripts.replace(" ", "").split("->")
    sa, sb = inputs.split(",")
    free = next(ch for ch in "ZYXWVUTSRQ" if ch not in subscripts)
    if not isinstance(a, Jet):
        return Jet(b.space, np.einsum(f"{sa},{sb}{free}->{out}{free}", np.asarray(a, float), b.coeffs))
    if not isinstance(b, Jet):
        return Jet(a.space, np.einsum(f"{sa}{free},{sb}->{out}{free}", a.coeffs, np.asarray(b, float)))
    a, b = common_order(a, b)
    sp = a.space
    prod = np.einsum(f"{sa}{free},{sb}{free}->{out}{free}", a.coeffs[..., sp.pi], b.coeffs[..., sp.pj])
    return Jet(sp, np.add.reduceat(prod, sp.starts, axis=-1))


def taylor_coefficients(name: str, a0: np.ndarray, order: int, p: float | None = None) -> np.ndarray:
    """Taylor coefficients ``f^(k)(a0)/k!`` for k = 0..order, stacked on axis 0."""
    a0 = np.asarray(a0, dtype=float)
    ks = range(order + 1)
    if name == "exp":
        e = np.exp(a0)
        return np.stack([e / math.factorial(k) for k in ks])
    if name == "log":
        if np.any(a0 <= 0):
            raise EvaluationError("log of a non-positive value")
        return np.stack([np.log(a0)] + [(-1) ** (k + 1) / (k * a0**k) for k in ks if k])
    if name in ("sin", "cos"):
        shift = 0.0 if name == "sin" else math.pi / 2
        return np.stack([np.sin(a0 + shift + k * math.pi / 2) / math.factorial(k) for k in ks])
    if name == "sqrt":
        name, p = "pow", 0.5
    if name == "pow":
        if p is None:
            raise EvaluationError("pow needs an exponent")
        integral = float(p).is_integer()
        if not integral and np.any(a0 <= 0):
            raise EvaluationError(f"non-integer power {p} of a non-positive value")
        if integral and p < 0 and np.any(a0 == 0):
            raise EvaluationError(f"negative power {p} of zero")
        out = []
        binom = 1.0
        for k in ks:
            if k:
                binom *= (p - k + 1) / k
            if integral and p >= 0 and k > p:
                out.append(np.zeros_like(a0))
            else:
                out.append(binom * a0 ** (p - k))
        return np.stack(out)
    raise EvaluationError(f"unknown function '{name}'")


def compose(a: Jet, coeffs: np.ndarray) -> Jet:
    """Compose a univariate Taylor series (coefficients about ``a.value``) with ``a``.

    ``coeffs[k]`` is the k-th Taylor coefficient, broadcastable against ``a.shape``.
    """
    d = a - a.coeffs[..., 0]
    n = min(a.order, len(coeffs) - 1)
    result = Jet.constant(a.space, np.broadcast_to(coeffs[n], a.shape))
    for k in range(n - 1, -1, -1):
        result = d * result + coeffs[k]
    return result


def jet_apply(f: str, a: Jet, p: float | None = None) -> Jet:
    """Apply ``exp``, ``log``, ``sin``, ``cos``, ``sqrt`` or ``pow`` (with exponent ``p``)."""
    return compose(a, taylor_coefficients(f, a.coeffs[..., 0], a.order, p))


def jet_det(M: Jet) -> Jet:
    """Determinant of a square matrix of jets (Laplace expansion, memoized on column sets).

    Division-free, so it is exact to truncation even when the constant part is singular.
    """
    if len(M.shape) != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"jet_det needs a square matrix, got shape {M.shape}")
    n = M.shape[0]
    memo: dict[tuple[int, ...], Jet] = {}

    def minor(cols: tuple[int, ...]) -> Jet:
        # determinant of rows [n - len(cols):] restricted to `cols`
        if len(cols) == 1:
            return M[n - 1, cols[0]]
        if cols in memo:
            return memo[cols]
        row = n - len(cols)
        total = None
        for pos, c in enumerate(cols):
            term = M[row, c] * minor(cols[:pos] + cols[pos + 1:])
            total = term if total is None else (total - term if pos % 2 else total + term)
        memo[cols] = total
        return total

    return minor(tuple(range(n)))


def jet_solve(M: Jet, rhs: Jet) -> Jet:
    """Solve ``M x = rhs`` to truncation order.

    ``rhs`` has shape ``(n, ...)``; trailing axes are solved as independent
    right-hand sides.  Uses the fixed point ``x = M0^{-1} (rhs - M1 x)`` where
    ``M0`` is the constant part; each sweep fixes one more order.
    """
    if len(M.shape) != 2 or M.shape[0] != M.shape[1] or rhs.shape[0] != M.shape[0]:
        raise DimensionError(f"incompatible shapes for jet_solve: {M.shape} and {rhs.shape}")
    M, rhs = common_order(M, rhs)
    M0 = M.coeffs[..., 0]
    if abs(np.linalg.det(M0)) < 1e-14 * max(1.0, np.abs(M0).max()) ** M0.shape[0]:
        raise DegenerateFrameError("matrix is singular at the base point")
    M0inv = np.linalg.inv(M0)
    M1 = M - M0
    x = contract("ij,j...->i...", M0inv, rhs)
    for _ in range(M.order):
        x = contract("ij,j...->i...", M0inv, rhs - contract("ij,j...->i...", M1, x))
    return x


def jet_matrix_inverse(M: Jet) -> Jet:
    n = M.shape[0]
    return jet_solve(M, Jet.constant(M.space, np.eye(n)))


def variables(space: JetSpace, point: Sequence[float]) -> list[Jet]:
    """Coordinate jets ``u_i`` expanded about ``point``."""
    return [Jet.variable(space, i, float(x)) for i, x in enumerate(point)]


UNARY: dict[str, Callable[[Jet], Jet]] = {
    name: (lambda a, _n=name: jet_apply(_n, a)) for name in ("exp", "log", "sin", "cos", "sqrt")
}
