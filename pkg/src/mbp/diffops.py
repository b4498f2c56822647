"""Differential operators ``D = sum_j d^j F_j(x)`` acting on the right.

``P . D = sum_j P^(j)(x) F_j(x)``. Composition is ordered so that
``P . compose(D1, D2) == (P . D1) . D2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (
    DegreeViolation,
    JacobiSumViolation,
    MBPError,
    NonDiagonalCoefficient,
    OddOrder,
    PoleOnSupport,
    SizeMismatch,
)
from .polyops import (
    MatrixPolynomial,
    RationalFunction,
    log_derivative_pair,
    unipotent_factor,
    unipotent_inverse,
)
from .weights import Family, MatrixWeightSpec, ScalarWeightSpec, spec_violations

RHO_POWER_TOL = 1e-9
CONSTRUCTION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PolyDiffOp:
    """Operator with matrix-polynomial coefficients, ``coeffs[j]`` multiplying ``d^j``."""

    coeffs: tuple[MatrixPolynomial, ...]

    def __post_init__(self):
        c = list(self.coeffs)
        if not c:
            raise ValueError("an operator needs at least one coefficient to fix N")
        N = c[0].N
        if any(F.N != N for F in c):
            raise SizeMismatch("coefficients of different sizes")
        while len(c) > 1 and c[-1].is_zero():
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def zero_order(cls, C) -> "PolyDiffOp":
        C = np.asarray(C, dtype=float)
        return cls((MatrixPolynomial.constant(C),))

    @classmethod
    def identity(cls, N: int) -> "PolyDiffOp":
        return cls.zero_order(np.eye(N))

    @classmethod
    def from_arrays(cls, *coeffs) -> "PolyDiffOp":
        """Each argument is an array of shape ``(d+1, N, N)`` for one ``d``-order."""
        return cls(tuple(MatrixPolynomial(np.asarray(c, dtype=float)) for c in coeffs))

    @property
    def N(self) -> int:
        return self.coeffs[0].N

    @property
    def order(self) -> int:
        if len(self.coeffs) == 1 and self.coeffs[0].is_zero():
            return -1
        return len(self.coeffs) - 1

    def coeff(self, j: int) -> MatrixPolynomial:
        if 0 <= j < len(self.coeffs):
            return self.coeffs[j]
        return MatrixPolynomial.zero(self.N)

    @property
    def leading(self) -> MatrixPolynomial:
        return self.coeffs[-1]

    def __add__(self, other):
        if not isinstance(other, PolyDiffOp):
            return NotImplemented
        n = max(len(self.coeffs), len(other.coeffs))
        return PolyDiffOp(tuple(self.coeff(j) + other.coeff(j) for j in range(n)))

    def __neg__(self):
        return PolyDiffOp(tuple(-F for F in self.coeffs))

    def __sub__(self, other):
        if not isinstance(other, PolyDiffOp):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, PolyDiffOp):
            return compose(self, other)
        if np.isscalar(other):
            return PolyDiffOp(tuple(F * other for F in self.coeffs))
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return PolyDiffOp(tuple(F * other for F in self.coeffs))
        return NotImplemented

    def power(self, m: int) -> "PolyDiffOp":
        out = PolyDiffOp.identity(self.N)
        for _ in range(m):
            out = compose(out, self)
        return out

    def distance(self, other: "PolyDiffOp") -> float:
        n = max(len(self.coeffs), len(other.coeffs))
        return max(self.coeff(j).distance(other.coeff(j)) for j in range(n))

    def max_abs(self) -> float:
        return max(F.max_abs() for F in self.coeffs)

    def is_diagonal(self, tol: float = 0.0) -> bool:
        return all(F.is_diagonal(tol) for F in self.coeffs)

    def degrees_bounded(self) -> bool:
        """``deg F_j <= j`` for every ``j``."""
        return all(F.degree <= j for j, F in enumerate(self.coeffs))

    def __repr__(self):
        return f"PolyDiffOp(N={self.N}, order={self.order})"


@dataclass(frozen=True, eq=False)
class RatDiffOp:
    """Operator whose coefficients are N x N grids of scalar rational functions."""

    coeffs: tuple[tuple[tuple[RationalFunction, ...], ...], ...]

    @classmethod
    def from_poly(cls, D: PolyDiffOp) -> "RatDiffOp":
        return cls(
            tuple(
                tuple(tuple(RationalFunction.poly(F.entry(i, k)) for k in range(D.N)) for i in range(D.N))
                for F in D.coeffs
            )
        )

    @property
    def N(self) -> int:
        return len(self.coeffs[0])

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def entry(self, j: int, r: int, s: int) -> RationalFunction:
        if j < len(self.coeffs):
            return self.coeffs[j][r][s]
        return RationalFunction.zero()

    def is_diagonal(self) -> bool:
        return all(
            self.coeffs[j][r][s].is_zero()
            for j in range(len(self.coeffs))
            for r in range(self.N)
            for s in range(self.N)
            if r != s
        )

    def cross_residual(self, other) -> float:
        """Worst cross-multiplication gap, relative to the largest entry of either operator."""
        if isinstance(other, PolyDiffOp):
            other = RatDiffOp.from_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        terms = [
            self.entry(j, r, s).cross_terms(other.entry(j, r, s))
            for j in range(n)
            for r in range(self.N)
            for s in range(self.N)
        ]
        gap = max(t[0] for t in terms)
        return gap / max(t[1] for t in terms) if gap else 0.0

    def equals(self, other, tol: float = 0.0) -> bool:
        return self.cross_residual(other) <= tol

    def to_poly(self) -> PolyDiffOp:
        """Convert to a polynomial operator; every denominator must be constant."""
        mats = []
        for grid in self.coeffs:
            polys = [[grid[r][s] for s in range(self.N)] for r in range(self.N)]
            if not all(p.is_polynomial() for row in polys for p in row):
                raise ValueError("operator has non-polynomial coefficients")
            d = max((p.numerator.size for row in polys for p in row), default=0)
            c = np.zeros((max(d, 0), self.N, self.N))
            for r in range(self.N):
                for s in range(self.N):
                    num = polys[r][s].numerator / polys[r][s].denominator[0]
                    c[: num.size, r, s] = num
            mats.append(MatrixPolynomial(c) if d else MatrixPolynomial.zero(self.N))
        return PolyDiffOp(tuple(mats))


def apply_right(P: MatrixPolynomial, D: PolyDiffOp) -> MatrixPolynomial:
    """``P . D = sum_j P^(j) F_j``."""
    if P.N != D.N:
        raise SizeMismatch(f"size {P.N} vs {D.N}")
    out = MatrixPolynomial.zero(P.N)
    for j, F in enumerate(D.coeffs):
        dP = P.derivative(j)
        if dP.is_zero():
            break
        out = out + dP * F
    return out


def compose(D1: PolyDiffOp, D2: PolyDiffOp) -> PolyDiffOp:
    """Operator product with ``P . compose(D1, D2) == (P . D1) . D2``.

    ``H_m = sum_{i+k=m} sum_{j>=k} C(j,k) F_i^(j-k) G_j``.
    """
    if D1.N != D2.N:
        raise SizeMismatch(f"size {D1.N} vs {D2.N}")
    N = D1.N
    out = [MatrixPolynomial.zero(N) for _ in range(len(D1.coeffs) + len(D2.coeffs) - 1)]
    for i, F in enumerate(D1.coeffs):
        if F.is_zero():
            continue
        derivs = [F.derivative(r) for r in range(len(D2.coeffs))]
        for j, G in enumerate(D2.coeffs):
            if G.is_zero():
                continue
            for k in range(j + 1):
                dF = derivs[j - k]
                if dF.is_zero():
                    continue
                out[i + k] = out[i + k] + comb(j, k) * (dF * G)
    return PolyDiffOp(tuple(out))


def conjugate_by_unipotent(D: PolyDiffOp, T: MatrixPolynomial) -> PolyDiffOp:
    """``T D T^-1`` with ``T`` acting as a zero-order operator.

    ``H_k = sum_{j>=k} C(j,k) T^(j-k) F_j T^-1``, so that
    ``P . result == ((P T) . D) T^-1``.
    """
    if T.N != D.N:
        raise SizeMismatch(f"size {T.N} vs {D.N}")
    S = unipotent_inverse(T)
    out = []
    for k in range(len(D.coeffs)):
        H = MatrixPolynomial.zero(D.N)
        for j in range(k, len(D.coeffs)):
            dT = T.derivative(j - k)
            if dT.is_zero() or D.coeffs[j].is_zero():
                continue
            H = H + comb(j, k) * (dT * D.coeffs[j] * S)
        out.append(H)
    return PolyDiffOp(tuple(out))


def _falling(n: int, i: int) -> int:
    out = 1
    for t in range(i):
        out *= n - t
    return out


class EigenvalueSequence(NamedTuple):
    source: PolyDiffOp
    values: tuple

    def __getitem__(self, n):
        return self.values[n]


def eigenvalue_matrix(D: PolyDiffOp, n: int) -> np.ndarray:
    """``Lambda_n(D) = sum_i [n]_i F_i^i`` with ``F_i^i`` the ``x^i`` coefficient of ``F_i``."""
    out = np.zeros((D.N, D.N))
    for i, F in enumerate(D.coeffs):
        if i > n:
            break
        out = out + _falling(n, i) * F.coeff(i)
    return out


def eigenvalue_sequence(D: PolyDiffOp, n_max: int) -> EigenvalueSequence:
    if not D.degrees_bounded():
        bad = [j for j, F in enumerate(D.coeffs) if F.degree > j]
        raise DegreeViolation(f"deg F_j > j for j in {bad}")
    return EigenvalueSequence(D, tuple(eigenvalue_matrix(D, n) for n in range(n_max + 1)))


def build_classical_operator(w: ScalarWeightSpec) -> PolyDiffOp:
    """``delta = d^2 rho + d (w rho)'/w`` for one classical weight (N = 1)."""
    weighted = log_derivative_pair(w).weighted
    return PolyDiffOp(
        (
            MatrixPolynomial.zero(1),
            MatrixPolynomial.scalar(weighted.numerator, 1),
            MatrixPolynomial.scalar(w.family.rho, 1),
        )
    )


def build_tilde_operator(spec: MatrixWeightSpec) -> PolyDiffOp:
    """Diagonal operator ``d^2 rho I + d diag((w_j rho)'/w_j)``."""
    first = [log_derivative_pair(r).weighted.numerator for r in spec.rows]
    return PolyDiffOp(
        (
            MatrixPolynomial.zero(spec.N),
            MatrixPolynomial.diagonal(first),
            MatrixPolynomial.scalar(spec.family.rho, spec.N),
        )
    )


def k_matrix(N: int) -> np.ndarray:
    """``K = sum_j E_{2j,2j}``: ones on the even (1-based) diagonal positions."""
    K = np.zeros((N, N))
    for j in range(1, N // 2 + 1):
        K[2 * j - 1, 2 * j - 1] = 1.0
    return K


def _jacobi_sum(spec: MatrixWeightSpec) -> float:
    return spec.rows[0].alpha + spec.rows[0].beta


def tilde_correction(spec: MatrixWeightSpec) -> np.ndarray:
    """Constant diagonal correction: ``2K``, ``K`` or ``(alpha_1 + beta_1) K``."""
    K = k_matrix(spec.N)
    if spec.family is Family.HERMITE:
        return 2.0 * K
    if spec.family is Family.LAGUERRE:
        return K
    return _jacobi_sum(spec) * K


def diagonal_part(spec: MatrixWeightSpec) -> np.ndarray:
    """``B_H = diag(2 b_j)``, ``B_L = diag(alpha_j + 1)`` or ``B_J = diag(beta_j - alpha_j)``."""
    if spec.family is Family.HERMITE:
        return np.diag([2.0 * r.b for r in spec.rows])
    if spec.family is Family.LAGUERRE:
        return np.diag([r.alpha + 1.0 for r in spec.rows])
    return np.diag([r.beta - r.alpha for r in spec.rows])


def build_bochner_operator(spec: MatrixWeightSpec) -> PolyDiffOp:
    """Second-order operator having the monic orthogonal polynomials of ``W`` as eigenfunctions."""
    if spec.family is Family.JACOBI:
        sums = [v for v in spec_violations(spec) if isinstance(v, JacobiSumViolation)]
        if sums:
            raise sums[0]
    N = spec.N
    A = spec.A
    B = diagonal_part(spec)
    K = k_matrix(N)
    AB = A @ B
    comm = AB - B @ A
    I = np.eye(N)
    if spec.family is Family.HERMITE:
        F2 = MatrixPolynomial.identity(N)
        F1 = MatrixPolynomial.from_coeffs(2.0 * A + B, -2.0 * I + comm)
        F0 = MatrixPolynomial.constant(AB + 2.0 * K)
    elif spec.family is Family.LAGUERRE:
        F2 = MatrixPolynomial.from_coeffs(np.zeros((N, N)), I)
        F1 = MatrixPolynomial.from_coeffs(B, -I + 2.0 * A + comm)
        F0 = MatrixPolynomial.constant(AB + K)
    else:
        s = _jacobi_sum(spec)
        F2 = MatrixPolynomial.scalar([1.0, 0.0, -1.0], N)
        F1 = MatrixPolynomial.from_coeffs(2.0 * A + B, comm + 2.0 * K - (s + 2.0) * I)
        F0 = MatrixPolynomial.constant(AB + s * K)
    D = PolyDiffOp((F0, F1, F2))

    check = conjugate_by_unipotent(
        build_tilde_operator(spec) + PolyDiffOp.zero_order(tilde_correction(spec)),
        unipotent_factor(A),
    )
    mismatch = D.distance(check)
    if mismatch > CONSTRUCTION_TOL * (1.0 + D.max_abs()):
        raise MBPError(f"closed-form operator differs from T (D~ + K~) T^-1 by {mismatch:.3e}")
    return D


def _apply_log_derivative(q: RationalFunction, logd: RationalFunction, times: int) -> RationalFunction:
    # (w q)^(r) / w computed as L^r(q) with L(q) = q' + (w'/w) q.
    for _ in range(times):
        q = q.derivative() + logd * q
    return q


def _rows_of(weights) -> tuple:
    if isinstance(weights, MatrixWeightSpec):
        return weights.rows
    if isinstance(weights, ScalarWeightSpec):
        return (weights,)
    return tuple(weights)


def _check_poles(q: RationalFunction, support) -> None:
    den = q.denominator
    lo, hi = support
    # Endpoint factors recur with multiplicity and polyroots resolves repeated
    # roots poorly, so divide them out before looking inside the support.
    for e in (lo, hi):
        while np.isfinite(e) and den.size > 1:
            quo, rem = npoly.polydiv(den, [-e, 1.0])
            if np.max(np.abs(rem)) > 1e-12 * np.max(np.abs(den)):
                break
            den = quo
    if den.size <= 1:
        return
    for root in npoly.polyroots(den):
        if abs(root.imag) < 1e-9 and lo < root.real < hi:
            raise PoleOnSupport(f"denominator vanishes at x={root.real} inside ({lo}, {hi})")


def formal_adjoint_diagonal(D, weights) -> RatDiffOp:
    """Formal adjoint ``W~ D* W~^-1`` of a diagonal-coefficient operator.

    ``weights`` is a ``MatrixWeightSpec`` (its diagonal part ``W~`` is used)
    or a sequence of ``ScalarWeightSpec``. ``D`` may be a ``PolyDiffOp`` or a
    diagonal ``RatDiffOp``, so the map can be applied twice.
    """
    if isinstance(D, PolyDiffOp):
        if not D.is_diagonal():
            raise NonDiagonalCoefficient("formal adjoint needs diagonal coefficients")
        D = RatDiffOp.from_poly(D)
    elif not D.is_diagonal():
        raise NonDiagonalCoefficient("formal adjoint needs diagonal coefficients")
    rows = _rows_of(weights)
    if len(rows) != D.N:
        raise SizeMismatch(f"{len(rows)} weights for an operator of size {D.N}")
    n = D.order
    logds = [log_derivative_pair(r).plain for r in rows]
    zero = RationalFunction.zero()
    out = []
    for k in range(n + 1):
        grid = [[zero] * D.N for _ in range(D.N)]
        for s, logd in enumerate(logds):
            acc = zero
            for j in range(n - k + 1):
                term = _apply_log_derivative(D.entry(n - j, s, s), logd, n - k - j)
                acc = acc + ((-1) ** (n - j) * comb(n - j, k)) * term
            _check_poles(acc, rows[s].support)
            grid[s][s] = acc
        out.append(tuple(tuple(row) for row in grid))
    return RatDiffOp(tuple(out))


class LeadingCoefficientReport(NamedTuple):
    order: int
    m: int
    c: float
    residual: float
    is_rho_power: bool


def leading_coefficient_analysis(D: PolyDiffOp, rho) -> LeadingCoefficientReport:
    """Test whether the top coefficient of ``D`` (order ``2m``) equals ``c rho(x)^m I``.

    ``rho`` is a ``Family`` or ascending coefficients of the scalar polynomial.
    """
    if isinstance(rho, Family):
        rho = rho.rho
    if D.order < 0:
        raise ValueError("zero operator has no leading coefficient")
    if D.order % 2:
        raise OddOrder(f"operator of odd order {D.order}")
    m = D.order // 2
    target = MatrixPolynomial.scalar(npoly.polypow(np.asarray(rho, dtype=float), m), D.N)
    top = D.leading
    d = max(top.coeffs.shape[0], target.coeffs.shape[0])
    F = np.zeros((d, D.N, D.N))
    G = np.zeros((d, D.N, D.N))
    F[: top.coeffs.shape[0]] = top.coeffs
    G[: target.coeffs.shape[0]] = target.coeffs
    c = float(np.sum(F * G) / np.sum(G * G))
    residual = float(np.max(np.abs(F - c * G)))
    return LeadingCoefficientReport(D.order, m, c, residual, residual < RHO_POWER_TOL * (1.0 + abs(c)))
