"""Classical scalar weights, the matrix weights ``T(x) W~(x) T(x)^T`` and their moments."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import (
    InvalidSpec,
    JacobiSumViolation,
    LengthMismatch,
    MomentOverflow,
    OutOfSupport,
    ParamOutOfRange,
    RationalRatioViolation,
    ZeroNilpotentEntry,
)

DEFAULT_TOLERANCE = 1e-9
JACOBI_MAX_ORDER = 40
EXTENDED_DPS = 60


class Family(str, enum.Enum):
    HERMITE = "hermite"
    LAGUERRE = "laguerre"
    JACOBI = "jacobi"

    @property
    def support(self) -> tuple[float, float]:
        return {
            Family.HERMITE: (-math.inf, math.inf),
            Family.LAGUERRE: (0.0, math.inf),
            Family.JACOBI: (-1.0, 1.0),
        }[self]

    @property
    def rho(self) -> np.ndarray:
        """Coefficient polynomial of the second derivative, ascending powers."""
        return {
            Family.HERMITE: np.array([1.0]),
            Family.LAGUERRE: np.array([0.0, 1.0]),
            Family.JACOBI: np.array([1.0, 0.0, -1.0]),
        }[self]


@dataclass(frozen=True)
class ScalarWeightSpec:
    """One classical weight.

    Hermite uses ``b`` (``exp(-x^2 + 2 b x)``), Laguerre ``alpha``
    (``exp(-x) x^alpha``), Jacobi ``alpha`` and ``beta``
    (``(1-x)^alpha (1+x)^beta``).
    """

    family: Family
    b: float | None = None
    alpha: float | None = None
    beta: float | None = None

    @classmethod
    def hermite(cls, b: float) -> "ScalarWeightSpec":
        return cls(Family.HERMITE, b=float(b))

    @classmethod
    def laguerre(cls, alpha: float) -> "ScalarWeightSpec":
        return cls(Family.LAGUERRE, alpha=float(alpha))

    @classmethod
    def jacobi(cls, alpha: float, beta: float) -> "ScalarWeightSpec":
        return cls(Family.JACOBI, alpha=float(alpha), beta=float(beta))

    @property
    def support(self) -> tuple[float, float]:
        return self.family.support

    def params(self) -> dict:
        if self.family is Family.HERMITE:
            return {"b": self.b}
        if self.family is Family.LAGUERRE:
            return {"alpha": self.alpha}
        return {"alpha": self.alpha, "beta": self.beta}

    def check(self) -> None:
        """Raise ``ParamOutOfRange`` unless the weight is integrable."""
        needed = {
            Family.HERMITE: ("b",),
            Family.LAGUERRE: ("alpha",),
            Family.JACOBI: ("alpha", "beta"),
        }[self.family]
        for name in needed:
            value = getattr(self, name)
            if value is None or not math.isfinite(value):
                raise ParamOutOfRange(f"{self.family.value}: parameter {name} missing or not finite")
            if name != "b" and value <= -1.0:
                raise ParamOutOfRange(f"{self.family.value}: {name}={value} must exceed -1")

    def __call__(self, x: float) -> float:
        if self.family is Family.HERMITE:
            return math.exp(-x * x + 2.0 * self.b * x)
        if self.family is Family.LAGUERRE:
            return math.exp(-x) * x**self.alpha
        return (1.0 - x) ** self.alpha * (1.0 + x) ** self.beta


@dataclass(frozen=True)
class MatrixWeightSpec:
    """Parameters of ``W(x) = T(x) W~(x) T(x)^T`` with ``T(x) = I + A x``."""

    family: Family
    rows: tuple[ScalarWeightSpec, ...]
    a: tuple[float, ...]
    working_tolerance: float = DEFAULT_TOLERANCE
    precision: str = "f64"

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))

    @classmethod
    def hermite(cls, b, a, **kw) -> "MatrixWeightSpec":
        return cls(Family.HERMITE, tuple(ScalarWeightSpec.hermite(v) for v in b), tuple(a), **kw)

    @classmethod
    def laguerre(cls, alpha, a, **kw) -> "MatrixWeightSpec":
        return cls(Family.LAGUERRE, tuple(ScalarWeightSpec.laguerre(v) for v in alpha), tuple(a), **kw)

    @classmethod
    def jacobi(cls, alpha, beta, a, **kw) -> "MatrixWeightSpec":
        rows = tuple(ScalarWeightSpec.jacobi(al, be) for al, be in zip(alpha, beta))
        return cls(Family.JACOBI, rows, tuple(a), **kw)

    @property
    def N(self) -> int:
        return len(self.rows)

    @property
    def support(self) -> tuple[float, float]:
        return self.family.support

    @property
    def A(self) -> np.ndarray:
        return nilpotent_matrix(self.a, self.N)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "n": self.N,
            "rows": [r.params() for r in self.rows],
            "a": list(self.a),
            "precision": self.precision,
            "tolerance": self.working_tolerance,
        }


def _near_integer(value: float, tol: float) -> bool:
    return abs(value - round(value)) < tol


def spec_violations(spec: MatrixWeightSpec) -> list:
    """Every violated invariant of ``spec``, as exception instances."""
    tol = spec.working_tolerance
    out = []
    if spec.N < 1:
        out.append(LengthMismatch("N must be a positive integer"))
        return out
    if len(spec.a) != spec.N - 1:
        out.append(LengthMismatch(f"expected {spec.N - 1} entries in a, got {len(spec.a)}"))
    for r in spec.rows:
        if r.family is not spec.family:
            out.append(ParamOutOfRange(f"row family {r.family.value} differs from {spec.family.value}"))
            continue
        try:
            r.check()
        except ParamOutOfRange as exc:
            out.append(exc)
    if out:
        return out
    for j, v in enumerate(spec.a, start=1):
        if abs(v) < tol:
            out.append(ZeroNilpotentEntry(f"a_{j} = {v} must be nonzero"))
    rows = spec.rows
    for i in range(spec.N):
        for j in range(i + 1, spec.N):
            ri, rj = rows[i], rows[j]
            if spec.family is Family.HERMITE:
                bad = abs(ri.b - rj.b) < tol
                what = f"b_{i + 1} = b_{j + 1}"
            elif spec.family is Family.LAGUERRE:
                bad = _near_integer(ri.alpha - rj.alpha, tol)
                what = f"alpha_{i + 1} - alpha_{j + 1} is an integer"
            else:
                bad = _near_integer(ri.alpha - rj.alpha, tol) and _near_integer(ri.beta - rj.beta, tol)
                what = f"alpha_{i + 1} - alpha_{j + 1} and beta_{i + 1} - beta_{j + 1} are integers"
            if bad:
                out.append(RationalRatioViolation(f"w_{i + 1}/w_{j + 1} is rational: {what}"))
    if spec.family is Family.JACOBI:
        s1 = rows[0].alpha + rows[0].beta
        for j in range(2, spec.N + 1):
            r = rows[j - 1]
            target = r.alpha + r.beta + 1 + (-1) ** j
            if abs(s1 - target) >= tol:
                out.append(
                    JacobiSumViolation(
                        f"alpha_1 + beta_1 = {s1} but alpha_{j} + beta_{j} + 1 + (-1)^{j} = {target}"
                    )
                )
    return out


def validate_spec(spec: MatrixWeightSpec) -> MatrixWeightSpec:
    """Return ``spec`` unchanged if valid, else raise ``InvalidSpec`` listing every violation."""
    violations = spec_violations(spec)
    if violations:
        raise InvalidSpec(violations)
    return spec


def nilpotent_matrix(a, N: int) -> np.ndarray:
    """``A = sum a_{2j-1} E_{2j-1,2j} + sum a_{2j} E_{2j+1,2j}`` (so ``A @ A == 0``)."""
    a = [float(v) for v in a]
    if len(a) != N - 1:
        raise LengthMismatch(f"expected {N - 1} entries, got {len(a)}")
    A = np.zeros((N, N))
    for i, v in enumerate(a, start=1):
        if i % 2:
            A[i - 1, i] = v
        else:
            A[i, i - 1] = v
    return A


def _hermite_moments(b, K: int, mp: bool = False):
    if mp:
        b = mpmath.mpf(b)
        m = [mpmath.sqrt(mpmath.pi) * mpmath.exp(b * b)]
    else:
        m = [math.sqrt(math.pi) * math.exp(b * b)]
    if K >= 1:
        m.append(b * m[0])
    for k in range(1, K):
        m.append(b * m[k] + (k / 2 if not mp else mpmath.mpf(k) / 2) * m[k - 1])
    return m[: K + 1]


def _laguerre_moments(alpha, K: int, mp: bool = False):
    if mp:
        alpha = mpmath.mpf(alpha)
        m = [mpmath.gamma(alpha + 1)]
    else:
        m = [math.gamma(alpha + 1.0)]
    for k in range(1, K + 1):
        m.append((alpha + k) * m[-1])
    return m


def _jacobi_moments(alpha, beta, K: int, mp: bool = False):
    # The alternating binomial sum loses ~k*log10(3) digits; evaluate it with
    # enough guard digits that the float result is correctly rounded.
    if K > JACOBI_MAX_ORDER:
        raise MomentOverflow(f"Jacobi moments are capped at order {JACOBI_MAX_ORDER}")
    dps = (EXTENDED_DPS if mp else 20) + K
    with mpmath.workdps(dps):
        al, be = mpmath.mpf(alpha), mpmath.mpf(beta)
        scale = mpmath.power(2, al + be + 1)
        betas = [mpmath.beta(al + j + 1, be + 1) for j in range(K + 1)]
        out = []
        for k in range(K + 1):
            terms = [mpmath.binomial(k, j) * (-2) ** j * betas[j] for j in range(k + 1)]
            out.append(scale * mpmath.fsum(terms))
    if mp:
        return [+v for v in out]
    return [float(v) for v in out]


def scalar_moment(w: ScalarWeightSpec, k: int) -> float:
    """``int x^k w(x) dx`` over the support, from closed forms."""
    return scalar_moments(w, k)[k]


def scalar_moments(w: ScalarWeightSpec, K: int, mp: bool = False) -> list:
    """Moments of orders ``0..K``; ``mp=True`` returns mpmath values."""
    if K < 0:
        raise ValueError("moment order must be non-negative")
    w.check()
    if w.family is Family.HERMITE:
        return _hermite_moments(w.b, K, mp)
    if w.family is Family.LAGUERRE:
        return _laguerre_moments(w.alpha, K, mp)
    return _jacobi_moments(w.alpha, w.beta, K, mp)


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Matrix moments ``M_k = int x^k W(x) dx`` for ``k = 0..K``.

    ``extended`` optionally carries the same table as mpmath matrices, used
    by the extended-precision path in :mod:`mbp.orthopoly`.
    """

    entries: np.ndarray
    extended: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def N(self) -> int:
        return self.entries.shape[1]

    @property
    def K(self) -> int:
        return self.entries.shape[0] - 1

    def __getitem__(self, k: int) -> np.ndarray:
        return self.entries[k]

    def hankel(self, m: int) -> np.ndarray:
        """Block Hankel matrix ``(M_{i+j})_{0 <= i, j <= m}``."""
        return np.block([[self.entries[i + j] for j in range(m + 1)] for i in range(m + 1)])

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, np.transpose(self.entries, (0, 2, 1))))

    def hankel_positive(self, m: int) -> bool:
        H = self.hankel(m)
        d = np.sqrt(np.diag(H))
        try:
            np.linalg.cholesky(H / np.outer(d, d))
        except np.linalg.LinAlgError:
            return False
        return True


def matrix_moments(spec: MatrixWeightSpec, K: int, precision: str | None = None) -> MomentTable:
    """Closed-form moments ``M_k = M~_k + A M~_{k+1} + M~_{k+1} A^T + A M~_{k+2} A^T``."""
    if K < 0:
        raise ValueError("moment order must be non-negative")
    precision = precision or spec.precision
    A = spec.A
    scal = [scalar_moments(r, K + 2) for r in spec.rows]
    tilde = np.array([np.diag([s[k] for s in scal]) for k in range(K + 3)])
    if not np.all(np.isfinite(tilde)):
        raise MomentOverflow("scalar moment exceeds the floating range")
    M = np.empty((K + 1, spec.N, spec.N))
    for k in range(K + 1):
        Mk = tilde[k] + A @ tilde[k + 1] + tilde[k + 1] @ A.T + A @ tilde[k + 2] @ A.T
        M[k] = (Mk + Mk.T) / 2
    if not np.all(np.isfinite(M)):
        raise MomentOverflow("matrix moment exceeds the floating range")
    extended = None
    if precision == "extended":
        with mpmath.workdps(EXTENDED_DPS):
            Amp = mpmath.matrix(A.tolist())
            scal_mp = [scalar_moments(r, K + 2, mp=True) for r in spec.rows]
            tmp = [mpmath.diag([s[k] for s in scal_mp]) for k in range(K + 3)]
            extended = tuple(
                tmp[k] + Amp * tmp[k + 1] + tmp[k + 1] * Amp.T + Amp * tmp[k + 2] * Amp.T
                for k in range(K + 1)
            )
    return MomentTable(M, extended)


def weight_factor(spec: MatrixWeightSpec, x: float) -> np.ndarray:
    return np.eye(spec.N) + spec.A * x


def evaluate_weight(spec: MatrixWeightSpec, x: float) -> np.ndarray:
    """``T(x) diag(w_j(x)) T(x)^T`` at an interior point of the support."""
    lo, hi = spec.support
    if not lo < x < hi:
        raise OutOfSupport(f"x={x} outside the open interval ({lo}, {hi})")
    T = weight_factor(spec, x)
    return T @ np.diag([r(x) for r in spec.rows]) @ T.T
