"""Monic matrix orthogonal polynomials from moments, and the checks run on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import mpmath
import numpy as np

from .diffops import PolyDiffOp, apply_right, eigenvalue_sequence
from .errors import MomentTableTooSmall, SingularGram, SizeMismatch
from .polyops import MatrixPolynomial
from .weights import EXTENDED_DPS, MomentTable

DEFAULT_N_MAX = 8
ABS_FLOOR = 1e-12


def inner_product(P: MatrixPolynomial, Q: MatrixPolynomial, M: MomentTable) -> np.ndarray:
    """``<P, Q> = sum_{i,j} P_i M_{i+j} Q_j^T``."""
    if P.N != M.N or Q.N != M.N:
        raise SizeMismatch("polynomial and moment sizes differ")
    if P.degree + Q.degree > M.K:
        raise MomentTableTooSmall(f"need moments up to {P.degree + Q.degree}, table has {M.K}")
    out = np.zeros((M.N, M.N))
    for i, Pi in enumerate(P.coeffs):
        for j, Qj in enumerate(Q.coeffs):
            out += Pi @ M[i + j] @ Qj.T
    return out


@dataclass(frozen=True, eq=False)
class MonicSequence:
    """Monic orthogonal polynomials ``P_0..P_{n_max}`` with norms and recurrence data.

    ``B[n]`` for ``n < n_max``; ``C[n]`` for ``1 <= n < n_max`` (``C[0]`` is
    unused and set to zero). ``path_discrepancy`` is the largest relative
    coefficient gap between the Gram-solve and recurrence constructions.
    """

    P: tuple
    H: tuple
    B: tuple
    C: tuple
    path_discrepancy: float

    @property
    def N(self) -> int:
        return self.P[0].N

    @property
    def n_max(self) -> int:
        return len(self.P) - 1


class _Float64:
    """Working arithmetic for the binary64 path."""

    def moments(self, M: MomentTable):
        return [M[k] for k in range(M.K + 1)]

    def eye(self, N):
        return np.eye(N)

    def zeros(self, shape):
        return np.zeros(shape)

    def inv(self, X):
        return np.linalg.inv(X)

    def is_spd(self, H) -> bool:
        if np.max(np.abs(H - H.T)) > 1e-8 * np.max(np.abs(H)):
            return False
        try:
            np.linalg.cholesky((H + H.T) / 2)
        except np.linalg.LinAlgError:
            return False
        return True

    def gram_solve(self, mom, n, N):
        H = np.block([[mom[i + j] for j in range(n)] for i in range(n)])
        R = np.hstack([mom[n + k] for k in range(n)])
        # X H = -R with H symmetric; scale to unit diagonal before factoring.
        d = np.sqrt(np.diag(H))
        try:
            L = np.linalg.cholesky(H / np.outer(d, d))
        except np.linalg.LinAlgError as exc:
            raise SingularGram(
                f"block Hankel matrix of order {n} is not numerically positive definite; "
                "reduce n_max or use extended precision"
            ) from exc
        Y = np.linalg.solve(L, (-R / d[None, :]).T)
        X = np.linalg.solve(L.T, Y).T / d[None, :]
        return X.reshape(N, n, N).transpose(1, 0, 2)

    def to_float(self, X):
        return np.asarray(X, dtype=float)


class _Extended:
    """mpmath arithmetic on numpy object arrays; used when moments carry extended values."""

    def moments(self, M: MomentTable):
        return [self._obj(m) for m in M.extended]

    @staticmethod
    def _obj(m):
        out = np.empty((m.rows, m.cols), dtype=object)
        for r in range(m.rows):
            for c in range(m.cols):
                out[r, c] = m[r, c]
        return out

    def eye(self, N):
        out = np.full((N, N), mpmath.mpf(0), dtype=object)
        for i in range(N):
            out[i, i] = mpmath.mpf(1)
        return out

    def zeros(self, shape):
        return np.full(shape, mpmath.mpf(0), dtype=object)

    def inv(self, X):
        return self._obj(mpmath.inverse(mpmath.matrix(X.tolist())))

    def is_spd(self, H) -> bool:
        try:
            mpmath.cholesky(mpmath.matrix(((H + H.T) / 2).tolist()))
        except ValueError:
            return False
        return True

    def gram_solve(self, mom, n, N):
        H = mpmath.matrix(np.block([[mom[i + j] for j in range(n)] for i in range(n)]).tolist())
        # X H = -R with H symmetric, solved as H X^T = -R^T column by column.
        Rt = -np.vstack([mom[n + k].T for k in range(n)])
        Y = np.empty((n * N, N), dtype=object)
        for c in range(N):
            try:
                col = mpmath.lu_solve(H, mpmath.matrix(Rt[:, c].tolist()))
            except ZeroDivisionError as exc:
                raise SingularGram(f"block Hankel matrix of order {n} is singular") from exc
            Y[:, c] = [col[r] for r in range(n * N)]
        return Y.reshape(n, N, N).transpose(0, 2, 1)

    def to_float(self, X):
        return np.vectorize(float, otypes=[float])(X) if np.size(X) else np.zeros(np.shape(X))


def _inner(P, Q, mom):
    out = None
    for i in range(P.shape[0]):
        for j in range(Q.shape[0]):
            term = P[i] @ mom[i + j] @ Q[j].T
            out = term if out is None else out + term
    return out


def _shift(P, ar):
    return np.concatenate([ar.zeros((1,) + P.shape[1:]), P])


def _left(C, P):
    return np.stack([C @ p for p in P])


def _sub(P, Q):
    n = max(P.shape[0], Q.shape[0])
    out = np.concatenate([P, 0 * P[:1].repeat(n - P.shape[0], axis=0)]) if P.shape[0] < n else P.copy()
    out[: Q.shape[0]] = out[: Q.shape[0]] - Q
    return out


def monic_sequence(M: MomentTable, n_max: int = DEFAULT_N_MAX) -> MonicSequence:
    """Monic orthogonal polynomials by two independent routes.

    The Gram route solves ``sum_j Gamma_j M_{j+k} = -M_{n+k}`` (``k < n``);
    the recurrence route iterates ``P_{n+1} = x P_n - B_n P_n - C_n P_{n-1}``
    with its own ``B_n, C_n``. The Gram polynomials are returned together
    with ``H_n``, ``B_n = <x P_n, P_n> H_n^-1`` and ``C_n = H_n H_{n-1}^-1``
    computed from them; the gap between the two routes is recorded.

    When ``M`` carries extended-precision moments, every step runs in
    mpmath and only the results are rounded to binary64.
    """
    if M.K < 2 * n_max + 1:
        raise MomentTableTooSmall(f"need K >= {2 * n_max + 1}, table has K = {M.K}")
    if M.extended is not None:
        with mpmath.workdps(EXTENDED_DPS):
            return _monic_sequence(M, n_max)
    return _monic_sequence(M, n_max)


def _monic_sequence(M: MomentTable, n_max: int) -> MonicSequence:
    ar = _Extended() if M.extended is not None else _Float64()
    N = M.N
    mom = ar.moments(M)
    one = ar.eye(N)[None]
    P = [one] + [np.concatenate([ar.gram_solve(mom, n, N), one]) for n in range(1, n_max + 1)]
    H = [_inner(p, p, mom) for p in P]
    for n, h in enumerate(H):
        if not ar.is_spd(h):
            raise SingularGram(f"H_{n} is not numerically positive definite")
    Hinv = [ar.inv(h) for h in H]
    B = [_inner(_shift(P[n], ar), P[n], mom) @ Hinv[n] for n in range(n_max)]
    C = [ar.zeros((N, N))] + [H[n] @ Hinv[n - 1] for n in range(1, n_max)]

    R = [one]
    R_H = [_inner(one, one, mom)]
    for n in range(n_max):
        cur = R[n]
        nxt = _sub(_shift(cur, ar), _left(_inner(_shift(cur, ar), cur, mom) @ ar.inv(R_H[n]), cur))
        if n > 0:
            nxt = _sub(nxt, _left(R_H[n] @ ar.inv(R_H[n - 1]), R[n - 1]))
        R.append(nxt)
        R_H.append(_inner(nxt, nxt, mom))

    polys = [MatrixPolynomial(ar.to_float(p)) for p in P]
    gap = 0.0
    for n in range(n_max + 1):
        diff = ar.to_float(_sub(P[n], R[n]))
        gap = max(gap, float(np.max(np.abs(diff))) / max(polys[n].max_abs(), ABS_FLOOR))
    return MonicSequence(
        tuple(polys),
        tuple(ar.to_float(h) for h in H),
        tuple(ar.to_float(b) for b in B),
        tuple(ar.to_float(c) for c in C),
        gap,
    )


def recurrence_residual(seq: MonicSequence) -> float:
    """Largest relative residual of ``x P_n - P_{n+1} - B_n P_n - C_n P_{n-1}``."""
    worst = 0.0
    for n in range(seq.n_max):
        xP = seq.P[n].shift(1)
        r = xP - seq.P[n + 1] - seq.P[n].left(seq.B[n])
        if n > 0:
            r = r - seq.P[n - 1].left(seq.C[n])
        scale = max(xP.max_abs(), seq.P[n + 1].max_abs(), ABS_FLOOR)
        worst = max(worst, r.max_abs() / scale)
    return worst


def norm_ratio_residual(seq: MonicSequence) -> float:
    """Largest relative residual of ``C_n H_{n-1} = H_n``."""
    worst = 0.0
    for n in range(1, seq.n_max):
        diff = seq.C[n] @ seq.H[n - 1] - seq.H[n]
        worst = max(worst, np.max(np.abs(diff)) / max(np.max(np.abs(seq.H[n])), ABS_FLOOR))
    return float(worst)


def orthogonality_residual(seq: MonicSequence, M: MomentTable) -> float:
    worst = 0.0
    for n in range(seq.n_max + 1):
        scale = max(np.max(np.abs(seq.H[n])), ABS_FLOOR)
        for m in range(n):
            worst = max(worst, np.max(np.abs(inner_product(seq.P[n], seq.P[m], M))) / scale)
    return float(worst)


class EigenfunctionReport(NamedTuple):
    max_residual: float
    per_n: tuple


def check_eigenfunction(seq: MonicSequence, D: PolyDiffOp) -> EigenfunctionReport:
    """Relative residual of ``P_n . D - Lambda_n(D) P_n`` for every ``n <= n_max``."""
    lam = eigenvalue_sequence(D, seq.n_max)
    per_n = []
    for n, Pn in enumerate(seq.P):
        R = apply_right(Pn, D) - Pn.left(lam[n])
        per_n.append(R.max_abs() / max(Pn.max_abs(), ABS_FLOOR))
    return EigenfunctionReport(max(per_n), tuple(per_n))


def check_symmetry(D: PolyDiffOp, M: MomentTable, degree_cap: int = 6) -> float:
    """Largest normalised ``||<x^i D, x^j> - <x^i, x^j D>||`` over ``i, j <= degree_cap``."""
    if M.K < 2 * degree_cap + 2:
        raise MomentTableTooSmall(f"need K >= {2 * degree_cap + 2}, table has K = {M.K}")
    N = M.N
    monos = [MatrixPolynomial.identity(N).shift(i) for i in range(degree_cap + 1)]
    images = [apply_right(p, D) for p in monos]
    worst = 0.0
    for i in range(degree_cap + 1):
        for j in range(degree_cap + 1):
            lhs = inner_product(images[i], monos[j], M)
            rhs = inner_product(monos[i], images[j], M)
            worst = max(worst, np.linalg.norm(lhs - rhs, 2) / (np.linalg.norm(M[i + j], 2) + 1.0))
    return float(worst)
