"""Matrix polynomials, scalar rational functions and the unipotent factor.

Coefficient arrays are stored in ascending powers of ``x``. A matrix
polynomial of size ``N`` and degree ``d`` holds an array of shape
``(d + 1, N, N)``; the zero polynomial holds shape ``(0, N, N)`` and reports
degree ``-1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import NotUnipotent, SizeMismatch
from .weights import Family, ScalarWeightSpec

ZERO_DEGREE = -1


def _trim_matrix_coeffs(coeffs: np.ndarray) -> np.ndarray:
    end = coeffs.shape[0]
    while end > 0 and not np.any(coeffs[end - 1]):
        end -= 1
    return coeffs[:end]


def _trim_scalar(c) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    end = c.shape[0]
    while end > 0 and c[end - 1] == 0.0:
        end -= 1
    return c[:end].copy()


@dataclass(frozen=True, eq=False)
class MatrixPolynomial:
    """N x N matrix-valued polynomial ``sum_k coeffs[k] x**k``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError(f"coefficient array must have shape (d+1, N, N), got {c.shape}")
        c = _trim_matrix_coeffs(c).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, N: int) -> "MatrixPolynomial":
        return cls(np.zeros((0, N, N)))

    @classmethod
    def constant(cls, C) -> "MatrixPolynomial":
        C = np.asarray(C, dtype=float)
        return cls(C[None, :, :])

    @classmethod
    def identity(cls, N: int) -> "MatrixPolynomial":
        return cls.constant(np.eye(N))

    @classmethod
    def from_coeffs(cls, *mats) -> "MatrixPolynomial":
        """``from_coeffs(C0, C1, ...)`` builds ``C0 + C1 x + ...``."""
        return cls(np.stack([np.asarray(m, dtype=float) for m in mats]))

    @classmethod
    def scalar(cls, p, N: int) -> "MatrixPolynomial":
        """Scalar polynomial ``p`` (ascending coefficients) times the identity."""
        p = _trim_scalar(p)
        return cls(p[:, None, None] * np.eye(N)[None, :, :])

    @classmethod
    def diagonal(cls, polys) -> "MatrixPolynomial":
        """Diagonal matrix polynomial with the given scalar polynomial entries."""
        polys = [_trim_scalar(p) for p in polys]
        N = len(polys)
        d = max((len(p) for p in polys), default=0)
        c = np.zeros((d, N, N))
        for i, p in enumerate(polys):
            c[: len(p), i, i] = p
        return cls(c)

    @property
    def N(self) -> int:
        return self.coeffs.shape[1]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def is_zero(self) -> bool:
        return self.coeffs.shape[0] == 0

    def coeff(self, k: int) -> np.ndarray:
        if 0 <= k <= self.degree:
            return self.coeffs[k]
        return np.zeros((self.N, self.N))

    def entry(self, i: int, j: int) -> np.ndarray:
        """Scalar polynomial in position ``(i, j)``, ascending coefficients."""
        return _trim_scalar(self.coeffs[:, i, j]) if self.coeffs.shape[0] else np.zeros(0)

    def is_diagonal(self, tol: float = 0.0) -> bool:
        off = self.coeffs * (1.0 - np.eye(self.N))[None, :, :]
        return bool(np.all(np.abs(off) <= tol))

    def __call__(self, x: float) -> np.ndarray:
        out = np.zeros((self.N, self.N))
        for c in self.coeffs[::-1]:
            out = out * x + c
        return out

    def _check(self, other: "MatrixPolynomial"):
        if other.N != self.N:
            raise SizeMismatch(f"size {self.N} vs {other.N}")

    def __add__(self, other):
        if not isinstance(other, MatrixPolynomial):
            return NotImplemented
        self._check(other)
        d = max(self.coeffs.shape[0], other.coeffs.shape[0])
        c = np.zeros((d, self.N, self.N))
        c[: self.coeffs.shape[0]] += self.coeffs
        c[: other.coeffs.shape[0]] += other.coeffs
        return MatrixPolynomial(c)

    def __neg__(self):
        return MatrixPolynomial(-self.coeffs)

    def __sub__(self, other):
        if not isinstance(other, MatrixPolynomial):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, MatrixPolynomial):
            return matpoly_mul(self, other)
        if np.isscalar(other):
            return MatrixPolynomial(self.coeffs * other)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return MatrixPolynomial(self.coeffs * other)
        return NotImplemented

    def left(self, C) -> "MatrixPolynomial":
        """Constant matrix ``C`` times this polynomial."""
        return MatrixPolynomial(np.einsum("ij,kjl->kil", np.asarray(C, dtype=float), self.coeffs))

    def right(self, C) -> "MatrixPolynomial":
        """This polynomial times constant matrix ``C``."""
        return MatrixPolynomial(np.einsum("kij,jl->kil", self.coeffs, np.asarray(C, dtype=float)))

    def shift(self, k: int = 1) -> "MatrixPolynomial":
        """Multiply by ``x**k``."""
        if self.is_zero():
            return self
        return MatrixPolynomial(np.concatenate([np.zeros((k, self.N, self.N)), self.coeffs]))

    def derivative(self, order: int = 1) -> "MatrixPolynomial":
        return matpoly_derivative(self, order)

    def transpose(self) -> "MatrixPolynomial":
        return MatrixPolynomial(np.transpose(self.coeffs, (0, 2, 1)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def distance(self, other: "MatrixPolynomial") -> float:
        """Largest absolute coefficient difference."""
        return (self - other).max_abs()

    def equals(self, other: "MatrixPolynomial", tol: float = 0.0) -> bool:
        return self.N == other.N and self.distance(other) <= tol

    def __repr__(self):
        return f"MatrixPolynomial(N={self.N}, degree={self.degree})"


def matpoly_mul(P: MatrixPolynomial, Q: MatrixPolynomial) -> MatrixPolynomial:
    """Product ``P(x) Q(x)`` by coefficient convolution."""
    if P.N != Q.N:
        raise SizeMismatch(f"size {P.N} vs {Q.N}")
    if P.is_zero() or Q.is_zero():
        return MatrixPolynomial.zero(P.N)
    dp, dq = P.coeffs.shape[0], Q.coeffs.shape[0]
    out = np.zeros((dp + dq - 1, P.N, P.N))
    for i in range(dp):
        out[i : i + dq] += np.einsum("ij,kjl->kil", P.coeffs[i], Q.coeffs)
    return MatrixPolynomial(out)


def matpoly_derivative(P: MatrixPolynomial, order: int = 1) -> MatrixPolynomial:
    """Formal derivative of order ``order``."""
    c = P.coeffs
    for _ in range(order):
        if c.shape[0] <= 1:
            return MatrixPolynomial.zero(P.N)
        c = c[1:] * np.arange(1, c.shape[0], dtype=float)[:, None, None]
    return MatrixPolynomial(c)


def unipotent_inverse(T: MatrixPolynomial) -> MatrixPolynomial:
    """Polynomial inverse of ``T = I + (nilpotent part)``.

    Uses the terminating series ``S = sum_k (-U)^k`` with ``U = T - I``;
    the series must vanish within ``N * deg(T)`` steps, otherwise ``T`` has
    no polynomial inverse of this form.
    """
    N = T.N
    if T.is_zero() or not np.array_equal(T.coeff(0), np.eye(N)):
        raise NotUnipotent("constant coefficient must be the identity")
    U = T - MatrixPolynomial.identity(N)
    S = MatrixPolynomial.identity(N)
    term = MatrixPolynomial.identity(N)
    for _ in range(N * max(T.degree, 1) + 1):
        term = -(term * U)
        if term.is_zero():
            break
        S = S + term
    else:
        raise NotUnipotent("power series of T^-1 does not terminate")
    tol = 1e-12 * max(1.0, T.max_abs() * S.max_abs())
    I = MatrixPolynomial.identity(N)
    if not (T * S).equals(I, tol) or not (S * T).equals(I, tol):
        raise NotUnipotent("series inverse fails T S = S T = I")
    return S


def unipotent_factor(A) -> MatrixPolynomial:
    """``T(x) = I + A x``."""
    A = np.asarray(A, dtype=float)
    return MatrixPolynomial.from_coeffs(np.eye(A.shape[0]), A)


def _pmul(p, q):
    return npoly.polymul(p, q) if p.size and q.size else np.zeros(0)


def _padd(p, q):
    return npoly.polyadd(p, q) if p.size and q.size else (p if p.size else q)


def _pder(p):
    return npoly.polyder(p) if p.size else np.zeros(0)


@dataclass(frozen=True, eq=False)
class RationalFunction:
    """Scalar rational function ``numerator / denominator``.

    Canonical form: both polynomials trimmed, denominator monic. No common
    factor cancellation is attempted; equality is decided by
    cross-multiplication.
    """

    numerator: np.ndarray
    denominator: np.ndarray

    def __post_init__(self):
        num = _trim_scalar(self.numerator)
        den = _trim_scalar(self.denominator)
        if den.size == 0:
            raise ZeroDivisionError("zero denominator")
        lead = den[-1]
        num, den = num / lead, den / lead
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    @classmethod
    def poly(cls, p) -> "RationalFunction":
        return cls(p, [1.0])

    @classmethod
    def zero(cls) -> "RationalFunction":
        return cls([], [1.0])

    def is_zero(self) -> bool:
        return self.numerator.size == 0

    def is_polynomial(self) -> bool:
        return self.denominator.size == 1

    def __call__(self, x):
        num = npoly.polyval(x, self.numerator) if self.numerator.size else 0.0 * np.asarray(x, dtype=float)
        return num / npoly.polyval(x, self.denominator)

    def _coerce(self, other):
        if isinstance(other, RationalFunction):
            return other
        if np.isscalar(other):
            return RationalFunction.poly([float(other)])
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        if np.array_equal(self.denominator, other.denominator):
            return RationalFunction(_padd(self.numerator, other.numerator), self.denominator)
        num = _padd(_pmul(self.numerator, other.denominator), _pmul(other.numerator, self.denominator))
        return RationalFunction(num, _pmul(self.denominator, other.denominator))

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.numerator, self.denominator)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        num = _pmul(self.numerator, other.numerator)
        if other.is_polynomial():
            return RationalFunction(num, self.denominator)
        if self.is_polynomial():
            return RationalFunction(num, other.denominator)
        return RationalFunction(num, _pmul(self.denominator, other.denominator))

    __rmul__ = __mul__

    def derivative(self) -> "RationalFunction":
        dn = _pder(self.numerator)
        if self.is_polynomial():
            return RationalFunction(dn, [1.0])
        num = _padd(_pmul(dn, self.denominator), -_pmul(self.numerator, _pder(self.denominator)))
        return RationalFunction(num, _pmul(self.denominator, self.denominator))

    def cross_terms(self, other: "RationalFunction") -> tuple[float, float]:
        """Largest coefficient of ``n1 d2 - n2 d1`` and of the two products."""
        lhs = _pmul(self.numerator, other.denominator)
        rhs = _pmul(other.numerator, self.denominator)
        diff = _trim_scalar(_padd(lhs, -rhs))
        gap = float(np.max(np.abs(diff))) if diff.size else 0.0
        scale = max(np.max(np.abs(lhs)) if lhs.size else 0.0, np.max(np.abs(rhs)) if rhs.size else 0.0)
        return gap, float(scale)

    def cross_residual(self, other: "RationalFunction") -> float:
        """Largest coefficient of ``n1 d2 - n2 d1``, relative to the operands' scale."""
        gap, scale = self.cross_terms(other)
        return gap / scale if gap else 0.0

    def equals(self, other, tol: float = 0.0) -> bool:
        other = self._coerce(other)
        return self.cross_residual(other) <= tol

    def __repr__(self):
        return f"RationalFunction({self.numerator.tolist()} / {self.denominator.tolist()})"


class LogDerivatives(NamedTuple):
    """``(w rho)'/w`` and ``w'/w`` for one classical weight."""

    weighted: RationalFunction
    plain: RationalFunction


def log_derivative_pair(w: ScalarWeightSpec) -> LogDerivatives:
    w.check()
    if w.family is Family.HERMITE:
        p = RationalFunction.poly([2.0 * w.b, -2.0])
        return LogDerivatives(p, p)
    if w.family is Family.LAGUERRE:
        return LogDerivatives(
            RationalFunction.poly([w.alpha + 1.0, -1.0]),
            RationalFunction([w.alpha, -1.0], [0.0, 1.0]),
        )
    a, b = w.alpha, w.beta
    return LogDerivatives(
        RationalFunction.poly([b - a, -(a + b + 2.0)]),
        RationalFunction([b - a, -(a + b)], [1.0, 0.0, -1.0]),
    )
