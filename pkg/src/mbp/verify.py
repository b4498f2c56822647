"""End-to-end verification suite and the quadrature oracle for moments."""

from __future__ import annotations

import dataclasses
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .diffops import (
    PolyDiffOp,
    build_bochner_operator,
    build_tilde_operator,
    compose,
    conjugate_by_unipotent,
    eigenvalue_sequence,
    formal_adjoint_diagonal,
    leading_coefficient_analysis,
    tilde_correction,
)
from .errors import JacobiSumViolation, MBPError, MomentTableTooSmall, QuadratureNonConvergence
from .orthopoly import (
    DEFAULT_N_MAX,
    check_eigenfunction,
    check_symmetry,
    monic_sequence,
    norm_ratio_residual,
    recurrence_residual,
)
from .polyops import MatrixPolynomial, unipotent_factor, unipotent_inverse
from .weights import Family, MatrixWeightSpec, MomentTable, evaluate_weight, matrix_moments, spec_violations

DEFAULT_SEED = 0x5EED
SVD_THRESHOLD = 1e-9
ORACLE_MAX_ORDER = 12

CHECK_NAMES = (
    "moments_vs_quadrature",
    "weight_positivity",
    "monic_dual_path",
    "three_term_recurrence",
    "eigenfunction",
    "symmetry",
    "diagonal_conjugation",
    "formal_adjoint",
    "leading_coefficient",
    "commutant",
    "eigenvalue_homomorphism",
    "darboux_obstruction",
    "counterexample",
)

# Checks that need the second-order operator; skipped when it cannot be built.
_OPERATOR_CHECKS = frozenset(CHECK_NAMES[4:12])


def _scalar_integral(f, w, lo, hi, limit=200):
    """``int_lo^hi f(x) w(x) dx`` for one classical weight, singularity aware.

    quad's own warnings are silenced; callers judge the returned error estimate.
    """
    opts = dict(epsabs=0, epsrel=1e-13, limit=limit)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if w.family is Family.HERMITE:
            return integrate.quad(lambda x: f(x) * w(x), lo, hi, **opts)
        if w.family is Family.LAGUERRE:
            v1, e1 = integrate.quad(lambda x: f(x) * math.exp(-x), 0.0, 1.0, weight="alg", wvar=(w.alpha, 0.0), **opts)
            v2, e2 = integrate.quad(lambda x: f(x) * w(x), 1.0, hi, **opts)
            return v1 + v2, e1 + e2
        return integrate.quad(f, -1.0, 1.0, weight="alg", wvar=(w.beta, w.alpha), **opts)


def quadrature_oracle_moment(spec: MatrixWeightSpec, k: int) -> np.ndarray:
    """``int x^k W(x) dx`` by adaptive quadrature, independent of the closed forms.

    Entry ``(r, s)`` of ``W`` is ``sum_j T_rj(x) T_sj(x) w_j(x)``, so each
    entry is integrated weight by weight with the polynomial factor folded
    into the integrand.
    """
    if k > ORACLE_MAX_ORDER:
        raise ValueError(f"oracle supports k <= {ORACLE_MAX_ORDER}")
    N = spec.N
    A = spec.A
    if spec.family is Family.HERMITE:
        bs = [r.b for r in spec.rows]
        lo, hi = min(bs) - 12.0, max(bs) + 12.0
    elif spec.family is Family.LAGUERRE:
        lo, hi = 0.0, max(200.0, 40.0 + 10.0 * max(r.alpha for r in spec.rows))
    else:
        lo, hi = -1.0, 1.0
    out = np.zeros((N, N))
    for r in range(N):
        for s in range(r, N):
            total = 0.0
            for j, w in enumerate(spec.rows):
                cr, cs = float(r == j), float(s == j)
                ar, as_ = A[r, j], A[s, j]
                if not ((cr or ar) and (cs or as_)):
                    continue

                def f(x, cr=cr, cs=cs, ar=ar, as_=as_):
                    return x**k * (cr + ar * x) * (cs + as_ * x)

                val, err = _scalar_integral(f, w, lo, hi)
                if not math.isfinite(val) or err > 1e-10 * max(abs(val), 1.0):
                    raise QuadratureNonConvergence(f"entry ({r}, {s}), weight {j}: estimate {val}, error {err}")
                total += val
            out[r, s] = out[s, r] = total
    return out


def commutant_dimension(mats, threshold: float = SVD_THRESHOLD) -> int:
    """Dimension of ``{X : X L = L X for every L in mats}``.

    Stacks the Sylvester operators ``I (x) L - L^T (x) I`` (row-major
    vectorisation) and counts singular values below ``threshold`` times the
    largest one. Each ``L`` is scaled to unit max-norm first so that large
    and small generators carry equal weight.
    """
    mats = [np.asarray(m, dtype=float) for m in mats]
    if not mats:
        raise ValueError("need at least one matrix")
    mats = [L / np.max(np.abs(L)) if np.any(L) else L for L in mats]
    N = mats[0].shape[0]
    I = np.eye(N)
    S = np.vstack([np.kron(L, I) - np.kron(I, L.T) for L in mats])
    sv = np.linalg.svd(S, compute_uv=False)
    if sv[0] == 0.0:
        return N * N
    return int(N * N - np.count_nonzero(sv > threshold * sv[0]))


@dataclass
class CheckRecord:
    name: str
    status: str
    residual: float | None
    tolerance: float | None
    runtime_ms: float
    detail: str = ""

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "name": self.name,
            "status": self.status,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }
        if timing:
            d["runtime_ms"] = self.runtime_ms
        return d


@dataclass
class VerificationReport:
    spec: dict
    valid: bool
    violations: list
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.valid and all(c.status != "fail" for c in self.checks)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def record(self, name: str) -> CheckRecord:
        return next(c for c in self.checks if c.name == name)

    def max_residual(self) -> float:
        vals = [c.residual for c in self.checks if c.status == "pass" and c.residual is not None]
        return max(vals, default=0.0)

    def to_dict(self, timing: bool = True) -> dict:
        return {
            "schema": "mbp/1",
            "kind": "verification_report",
            "spec": self.spec,
            "validation": {"valid": self.valid, "violations": self.violations},
            "checks": [c.to_dict(timing) for c in self.checks],
            "passed": sum(c.status == "pass" for c in self.checks),
            "total": len(self.checks),
            "verdict": self.verdict,
        }


@dataclass(frozen=True)
class SuiteOptions:
    suite: str = "all"
    n_max: int = DEFAULT_N_MAX
    degree_cap: int = 6
    max_power: int = 3
    commutant_n: int = 5
    seed: int = DEFAULT_SEED
    tolerance: float = 1e-8
    svd_threshold: float = SVD_THRESHOLD


class _Fail(Exception):
    """Internal: a check's residual exceeded its tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class _Context:
    """Lazily computed shared artefacts; each check pulls what it needs."""

    def __init__(self, spec: MatrixWeightSpec, opts: SuiteOptions):
        self.spec = spec
        self.opts = opts
        self._cache = {}

    def get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def moments(self):
        K = max(2 * self.opts.n_max + 1, 2 * self.opts.degree_cap + 2, ORACLE_MAX_ORDER)
        return self.get("moments", lambda: matrix_moments(self.spec, K))

    @property
    def sequence(self):
        return self.get("sequence", lambda: monic_sequence(self.moments, self.opts.n_max))

    @property
    def D(self) -> PolyDiffOp:
        return self.get("D", lambda: build_bochner_operator(self.spec))

    @property
    def powers(self):
        def build():
            out = [self.D]
            for _ in range(1, self.opts.max_power):
                out.append(compose(out[-1], self.D))
            return out

        return self.get("powers", build)

    @property
    def tilde_plus_k(self) -> PolyDiffOp:
        return self.get(
            "tilde",
            lambda: build_tilde_operator(self.spec) + PolyDiffOp.zero_order(tilde_correction(self.spec)),
        )


def _interior_points(spec: MatrixWeightSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    if spec.family is Family.HERMITE:
        bs = [r.b for r in spec.rows]
        return rng.uniform(min(bs) - 4.0, max(bs) + 4.0, count)
    if spec.family is Family.LAGUERRE:
        return rng.uniform(1e-3, 30.0, count)
    return rng.uniform(-0.999, 0.999, count)


def _ratio(value: float, tol: float, what: str) -> tuple[float, str]:
    if not value < tol:
        raise _Fail(f"{what} = {value:.3e} exceeds {tol:.1e}", value)
    return value, what


def absolute_mass(M: MomentTable, k: int) -> np.ndarray:
    """Entrywise upper bound on ``int |x^k W_ij(x)| dx`` from even moments.

    Uses ``|x^k| <= (x^(k-1) + x^(k+1)) / 2`` for odd ``k`` and
    ``|T_ir T_jr| <= (T_ir^2 + T_jr^2) / 2``, so only diagonals are needed.
    """
    if k % 2 == 0:
        E = M[k]
    else:
        if k + 1 > M.K:
            raise MomentTableTooSmall(f"need K >= {k + 1}, table has K = {M.K}")
        E = (M[k - 1] + M[k + 1]) / 2
    d = np.diag(E)
    return (d[:, None] + d[None, :]) / 2


def _check_moments(ctx: _Context):
    M = ctx.moments
    worst = 0.0
    for k in range(min(ORACLE_MAX_ORDER, M.K - 1) + 1):
        Q = quadrature_oracle_moment(ctx.spec, k)
        # Closed-form zeros (odd symmetry) are judged against the integrand's mass.
        nz = M[k] != 0
        rel = np.abs(M[k] - Q)[nz] / np.abs(Q[nz])
        zero = np.abs(Q)[~nz] / absolute_mass(M, k)[~nz]
        worst = max(worst, float(np.max(rel, initial=0.0)), float(np.max(zero, initial=0.0)))
    return _ratio(worst, 1e-6, "max relative moment error, k <= 12")


def _check_positivity(ctx: _Context):
    rng = np.random.default_rng(ctx.opts.seed)
    pts = _interior_points(ctx.spec, 20, rng)
    failures = [x for x in pts if not _factorizable(evaluate_weight(ctx.spec, float(x)))]
    if failures:
        raise _Fail(f"W(x) failed Cholesky factorisation at x = {failures}", float(len(failures)))
    return 0.0, f"{len(pts)}/{len(pts)} interior points factorised"


def _factorizable(W: np.ndarray) -> bool:
    d = np.sqrt(np.diag(W))
    try:
        np.linalg.cholesky(W / np.outer(d, d))
    except np.linalg.LinAlgError:
        return False
    return True


def _check_dual_path(ctx: _Context):
    return _ratio(ctx.sequence.path_discrepancy, ctx.opts.tolerance, "Gram vs recurrence coefficient gap")


def _check_recurrence(ctx: _Context):
    seq = ctx.sequence
    rec = recurrence_residual(seq)
    norms = norm_ratio_residual(seq)
    _ratio(norms, 1e-9, "C_n H_{n-1} - H_n")
    return _ratio(max(rec, norms), 1e-9, "three-term recurrence residual")


def _check_eigenfunction(ctx: _Context):
    worst = 0.0
    for m, Dm in enumerate(ctx.powers, start=1):
        r = check_eigenfunction(ctx.sequence, Dm).max_residual
        _ratio(r, ctx.opts.tolerance, f"P_n . D^{m} - Lambda_n P_n")
        worst = max(worst, r)
    return worst, f"D^1..D^{len(ctx.powers)}, n <= {ctx.opts.n_max}"


def _check_symmetry(ctx: _Context):
    r = check_symmetry(ctx.D, ctx.moments, ctx.opts.degree_cap)
    return _ratio(r, ctx.opts.tolerance, f"<x^i D, x^j> - <x^i, x^j D>, i, j <= {ctx.opts.degree_cap}")


def _check_conjugation(ctx: _Context):
    spec, D = ctx.spec, ctx.D
    A = spec.A
    Tinv = unipotent_inverse(unipotent_factor(A))
    Bop = conjugate_by_unipotent(D, Tinv)
    if not Bop.is_diagonal(1e-12 * (1.0 + Bop.max_abs())):
        raise _Fail("T^-1 D T has off-diagonal coefficients")
    if not Bop.degrees_bounded():
        raise _Fail("T^-1 D T violates deg F_j <= j")
    gap = Bop.distance(ctx.tilde_plus_k)
    _ratio(gap, 1e-12 * (1.0 + D.max_abs()), "T^-1 D T - (D~ + K~)")
    # G_j = F_j + x[A, F_j] + (j+1) A F_{j+1} for the diagonal F_j of T^-1 D T.
    rel = 0.0
    for j in range(D.order + 1):
        F = Bop.coeff(j)
        G = F + (F.left(A) - F.right(A)).shift(1) + (j + 1) * Bop.coeff(j + 1).left(A)
        rel = max(rel, G.distance(D.coeff(j)))
    return _ratio(max(gap, rel), 1e-12 * (1.0 + D.max_abs()), "coefficient relations G_j vs F_j")


def _check_adjoint(ctx: _Context):
    op = ctx.tilde_plus_k
    once = formal_adjoint_diagonal(op, ctx.spec)
    r1 = once.cross_residual(op)
    twice = formal_adjoint_diagonal(once, ctx.spec)
    r2 = twice.cross_residual(op)
    return _ratio(max(r1, r2), 1e-12, "cross-multiplied (D~+K~)^dagger - (D~+K~), and involution")


def _check_leading(ctx: _Context):
    worst = 0.0
    for m, Dm in enumerate(ctx.powers, start=1):
        rep = leading_coefficient_analysis(Dm, ctx.spec.family)
        if rep.m != m or not rep.is_rho_power:
            raise _Fail(f"D^{m}: order {rep.order}, residual {rep.residual:.3e}")
        worst = max(worst, rep.residual, abs(rep.c - 1.0))
    return _ratio(worst, 1e-9, "top coefficient of D^m minus rho^m I")


def _check_commutant(ctx: _Context):
    # A constant C lies in D(W) iff P_n C = C P_n for all n, so the order-zero
    # part of D(W) is the commutant of the P_n coefficients. The Lambda_n(D)
    # alone are not enough once N >= 3; their commutant is reported as well.
    n = ctx.opts.commutant_n
    lam = list(eigenvalue_sequence(ctx.D, n).values)
    coeffs = [c for P in ctx.sequence.P[1 : n + 1] for c in P.coeffs[:-1]]
    dim = commutant_dimension(lam + coeffs, ctx.opts.svd_threshold)
    lam_dim = commutant_dimension(lam, ctx.opts.svd_threshold)
    detail = (
        f"dimension {dim} for Lambda_0..Lambda_{n} with P_1..P_{n} coefficients; "
        f"{lam_dim} for Lambda alone (SVD threshold {ctx.opts.svd_threshold:g})"
    )
    if dim != 1:
        raise _Fail(detail, float(dim - 1))
    return 0.0, detail


def _check_homomorphism(ctx: _Context):
    D = ctx.D
    base = eigenvalue_sequence(D, 10).values
    worst = 0.0
    for m, Dm in enumerate(ctx.powers, start=1):
        if Dm.order % 2:
            raise _Fail(f"D^{m} has odd order {Dm.order}")
        lam = eigenvalue_sequence(Dm, 10).values
        for n in range(11):
            expect = np.linalg.matrix_power(base[n], m)
            worst = max(worst, float(np.max(np.abs(lam[n] - expect))) / (1.0 + float(np.max(np.abs(expect)))))
    if len(ctx.powers) >= 2:
        worst = max(worst, compose(ctx.powers[0], ctx.powers[1]).distance(compose(ctx.powers[1], ctx.powers[0])))
    return _ratio(worst, 1e-12, "Lambda_n(D^m) - Lambda_n(D)^m, n <= 10")


def _check_darboux(ctx: _Context):
    rng = np.random.default_rng(ctx.opts.seed + 1)
    pts = _interior_points(ctx.spec, 10, rng)
    rho = MatrixPolynomial.scalar(ctx.spec.family.rho, 1)
    worst = 0.0
    for m, Dm in enumerate(ctx.powers, start=1):
        top = Dm.leading
        for x in pts:
            Fx = top(float(x))
            scale = rho(float(x))[0, 0] ** m
            if abs(scale) < 1e-300:
                raise _Fail(f"rho vanishes at interior point {x}")
            c = np.trace(Fx) / (ctx.spec.N * scale)
            worst = max(worst, float(np.max(np.abs(Fx - c * scale * np.eye(ctx.spec.N)))) / abs(scale))
            smin = np.linalg.svd(Fx, compute_uv=False)[-1]
            if not smin > 1e-12 * abs(scale):
                raise _Fail(f"leading coefficient of D^{m} singular at x={x}")
    return _ratio(worst, 1e-9, "leading coefficients are nonsingular multiples of rho^m I at 10 points")


def counterexample_fixture(a: float = 1.0) -> tuple[MatrixWeightSpec, PolyDiffOp]:
    """``W = T e^{-x^2} T^T`` with ``T = I + a E_12 x`` and its non-diagonalisable operator."""
    spec = MatrixWeightSpec.hermite([0.0, 0.0], [a])
    D = PolyDiffOp.from_arrays(
        [np.diag([0.0, 4.0 / a**2])],
        [[[0.0, 2.0 / a], [-2.0 / a, 0.0]], [[0.0, 0.0], [0.0, 2.0]]],
        [[[-1.0, 0.0], [0.0, 0.0]], [[0.0, a], [0.0, 0.0]]],
    )
    return spec, D


def _check_counterexample(ctx: _Context):
    a = ctx.spec.a[0] if ctx.spec.a and ctx.spec.a[0] != 0.0 else 1.0
    spec, D = counterexample_fixture(a)
    seq = monic_sequence(matrix_moments(spec, 2 * ctx.opts.n_max + 1), ctx.opts.n_max)
    r = check_eigenfunction(seq, D).max_residual
    _ratio(r, ctx.opts.tolerance, "counterexample operator eigenfunction residual")
    back = conjugate_by_unipotent(D, unipotent_inverse(unipotent_factor(spec.A)))
    off = max(float(np.max(np.abs(F.coeffs * (1 - np.eye(2))))) for F in back.coeffs)
    if off < 1e-6:
        raise _Fail("T^-1 D T unexpectedly diagonal")
    return r, f"eigenoperator (residual {r:.2e}); T^-1 D T off-diagonal magnitude {off:.3g}"


_CHECKS = {
    "moments_vs_quadrature": (_check_moments, 1e-6),
    "weight_positivity": (_check_positivity, 0.0),
    "monic_dual_path": (_check_dual_path, "tolerance"),
    "three_term_recurrence": (_check_recurrence, 1e-9),
    "eigenfunction": (_check_eigenfunction, "tolerance"),
    "symmetry": (_check_symmetry, "tolerance"),
    "diagonal_conjugation": (_check_conjugation, 1e-12),
    "formal_adjoint": (_check_adjoint, 1e-12),
    "leading_coefficient": (_check_leading, 1e-9),
    "commutant": (_check_commutant, 0.0),
    "eigenvalue_homomorphism": (_check_homomorphism, 1e-12),
    "darboux_obstruction": (_check_darboux, 1e-9),
    "counterexample": (_check_counterexample, "tolerance"),
}
_FAST_SKIPS = frozenset({"moments_vs_quadrature", "counterexample"})


def run_suite(spec: MatrixWeightSpec, options: SuiteOptions | None = None) -> VerificationReport:
    """Run every check in a fixed order; errors become failed records."""
    opts = options or SuiteOptions()
    if opts.suite == "fast":
        opts = dataclasses.replace(opts, max_power=min(opts.max_power, 2))
    violations = spec_violations(spec)
    report = VerificationReport(
        spec=spec.to_dict(),
        valid=not violations,
        violations=[{"name": type(v).__name__, "message": str(v)} for v in violations],
    )
    only_sum = bool(violations) and all(isinstance(v, JacobiSumViolation) for v in violations)
    ctx = _Context(spec, opts)
    for name in CHECK_NAMES:
        fn, tol = _CHECKS[name]
        tol = opts.tolerance if tol == "tolerance" else tol
        if violations and not only_sum:
            report.checks.append(CheckRecord(name, "skipped", None, tol, 0.0, "specification invalid"))
            continue
        if only_sum and name in _OPERATOR_CHECKS:
            report.checks.append(
                CheckRecord(name, "skipped", None, tol, 0.0, "JacobiSumViolation at operator construction")
            )
            continue
        if opts.suite == "fast" and name in _FAST_SKIPS:
            report.checks.append(CheckRecord(name, "skipped", None, tol, 0.0, "skipped by --suite fast"))
            continue
        t0 = time.perf_counter()
        try:
            residual, detail = fn(ctx)
            status = "pass"
        except _Fail as exc:
            residual, detail, status = exc.residual, str(exc), "fail"
        except (MBPError, np.linalg.LinAlgError, ArithmeticError, ValueError) as exc:
            residual, detail, status = None, f"{type(exc).__name__}: {exc}", "fail"
        elapsed = (time.perf_counter() - t0) * 1e3
        report.checks.append(CheckRecord(name, status, residual, tol, elapsed, detail))
    return report

