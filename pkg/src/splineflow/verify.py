"""Independent oracles used to cross-check the analytic code paths.

Nothing here shares numerics with the main modules: gradients come from
central differences, operator spectra from a Nystrom discretization (with a
dependency-free cyclic Jacobi solver as the reference diagonalizer at small
grids), and the one-input toy model has a fully closed-form solution to
compare particle runs against.  These are deliberately plain implementations;
clarity beats speed everywhere an oracle is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "central_difference_grad",
    "NystromProblem",
    "nystrom_matrix",
    "jacobi_eigenvalues",
    "nystrom_eigen",
    "UniformDensity",
    "point_model_exact",
    "point_model_simulate",
    "richardson_order",
]


def central_difference_grad(F, point, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    if eps <= 0:
        raise ValueError("step must be positive")
    point = np.asarray(point, dtype=float)
    out = np.empty_like(point)
    for i in range(point.size):
        up = point.copy()
        dn = point.copy()
        up[i] += eps
        dn[i] -= eps
        out[i] = (F(up) - F(dn)) / (2.0 * eps)
    return out


@dataclass(frozen=True)
class NystromProblem:
    """Symmetric kernel on [0,1]^2 discretized on a midpoint grid."""

    kernel: object  # vectorized callable (x, y) -> K(x, y)
    n: int
    rule: str = "midpoint"

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("grid too coarse for a trustworthy oracle")
        if self.rule != "midpoint":
            raise ValueError("only the midpoint rule is implemented")
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, size=8)
        y = rng.uniform(0, 1, size=8)
        gap = np.max(np.abs(self.kernel(x, y) - self.kernel(y, x)))
        if gap > 1e-12:
            raise ValueError(f"kernel is not symmetric (gap {gap:.3e})")


def nystrom_matrix(prob: NystromProblem) -> np.ndarray:
    """The n x n matrix ``K(x_i, x_j) / n`` at midpoints ``x_i = (i+1/2)/n``.

    Uniform midpoint weights keep the matrix symmetric as-is, so its
    eigenvalues approximate the operator's directly.
    """
    x = (np.arange(prob.n) + 0.5) / prob.n
    return prob.kernel(x[:, None], x[None, :]) / prob.n


def jacobi_eigenvalues(
    S: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60
) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps rotate away every off-diagonal pair in turn until the
    off-diagonal Frobenius norm falls below ``tol`` (relative to the
    matrix norm).  Simple and independent of any library eigensolver;
    meant for modest sizes.
    """
    A = np.array(S, dtype=float, copy=True)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    scale = max(float(np.linalg.norm(A)), 1e-300)
    for _ in range(max_sweeps):
        # cancellation can push the difference a hair below zero near convergence
        off = np.sqrt(max(np.sum(A**2) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = 0.5 * (A[q, q] - A[p, p]) / apq
                t = np.sign(theta) / (abs(theta) + np.hypot(1.0, theta))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rot_p = c * A[:, p] - s * A[:, q]
                rot_q = s * A[:, p] + c * A[:, q]
                A[:, p], A[:, q] = rot_p, rot_q
                rot_p = c * A[p, :] - s * A[q, :]
                rot_q = s * A[p, :] + c * A[q, :]
                A[p, :], A[q, :] = rot_p, rot_q
    return np.sort(np.diag(A))[::-1]


def nystrom_eigen(
    prob: NystromProblem, count: int, method: str = "auto"
) -> np.ndarray:
    """Top ``count`` eigenvalues of the discretized operator, descending.

    ``method='jacobi'`` uses the hand-rolled solver (reference path, small
    grids); ``'dense'`` uses the library symmetric eigensolver; ``'auto'``
    picks jacobi up to n = 200 and dense beyond, where the O(n^3) sweeps of
    a pure-Python loop would dominate the runtime budget.  The two paths
    are cross-validated against each other in the test suite.
    """
    if count > prob.n:
        raise ValueError("cannot extract more eigenvalues than grid points")
    M = nystrom_matrix(prob)
    if method == "auto":
        method = "jacobi" if prob.n <= 200 else "dense"
    if method == "jacobi":
        vals = jacobi_eigenvalues(M)
    elif method == "dense":
        vals = np.sort(np.linalg.eigvalsh(M))[::-1]
    else:
        raise ValueError(f"unknown method {method!r}")
    return vals[:count]


# ---------------------------------------------------------------------------
# the one-input toy model: a single ramp on X = {0} degenerates to w itself


@dataclass(frozen=True)
class UniformDensity:
    """Uniform density on [lo, hi]; the toy model's initial condition."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("interval must have positive length")

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def quantile_sample(self, n: int) -> np.ndarray:
        """Particles at the quantiles (i + 1/2)/n; sample mean is exact."""
        q = (np.arange(n) + 0.5) / n
        return self.lo + (self.hi - self.lo) * q


def point_model_exact(p0, y: float, t):
    """Closed-form solution of the one-input model; vectorized over t.

    The whole density translates rigidly: at time t it is the initial
    density evaluated at ``w + (y - y0)(exp(-t) - 1)``, and the loss is
    ``(y - y0)^2 / 2 * exp(-2t)``.  Returns ``(loss, argument_shift)``.
    """
    y0 = p0.mean()
    t = np.asarray(t, dtype=float)
    loss = 0.5 * (y - y0) ** 2 * np.exp(-2.0 * t)
    shift = (y - y0) * (np.exp(-t) - 1.0)
    if t.ndim == 0:
        return float(loss), float(shift)
    return loss, shift


def point_model_simulate(
    p0, y: float, n: int, dt: float, t_end: float, record_every: int = 1
):
    """Particle run of the one-input model: ``dw_i/dt = -(mean(w) - y)``.

    All particles share one velocity, so the cloud translates rigidly, just
    like the exact solution.  The common mean is integrated by classic
    Runge-Kutta (the dynamics is a smooth 1-d linear ODE; integrator error
    should not pollute a comparison against the closed form).  Returns
    ``(t, loss, w)`` arrays with ``w`` the final particle positions.
    """
    if n < 1 or dt <= 0 or t_end < 0:
        raise ValueError("need n >= 1, dt > 0, t_end >= 0")
    w = p0.quantile_sample(n)
    mean = float(np.mean(w))
    steps = int(round(t_end / dt))
    ts = [0.0]
    ls = [0.5 * (mean - y) ** 2]
    for i in range(steps):
        k1 = -(mean - y)
        k2 = -((mean + 0.5 * dt * k1) - y)
        k3 = -((mean + 0.5 * dt * k2) - y)
        k4 = -((mean + dt * k3) - y)
        delta = (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        mean += delta
        w = w + delta
        if (i + 1) % record_every == 0 or i + 1 == steps:
            ts.append((i + 1) * dt)
            ls.append(0.5 * (mean - y) ** 2)
    return np.array(ts), np.array(ls), w


def richardson_order(coarse: float, mid: float, fine: float) -> float:
    """Observed convergence order from three values at grid ratio 2."""
    num = abs(coarse - mid)
    den = abs(mid - fine)
    if den == 0:
        return np.inf
    return float(np.log2(num / den))


# ---------------------------------------------------------------------------
# the composed oracle suite


def _check(name, residual, tol, **info):
    out = {"name": name, "residual": float(residual), "tol": tol,
           "pass": bool(residual <= tol)}
    out.update(info)
    return out


def oracle_report(nystrom_n: int = 2000) -> list:
    """Cross-check every analytic code path against an independent oracle.

    Returns one record per check: name, worst residual, tolerance, verdict.
    The analytic sides come from the main modules; the reference sides are
    the plain implementations in this file plus closed forms transcribed
    separately, so a shared bug cannot cancel.
    """
    from . import ensemble, spectral, stationary
    from .spline_model import (
        Monomial,
        SineScaled,
        make_partition,
        panelize,
        piecewise_integral,
        ramp_correlation,
    )

    checks = []
    half = Monomial(0.5, 2)
    square = Monomial(1.0, 2)

    # particle velocities against central differences of the scaled loss
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10):
        c = rng.uniform(-1.0, 2.0, size=5)
        h = rng.uniform(-0.2, 1.2, size=5)
        e = ensemble.Ensemble(c=c.copy(), h=h.copy())
        vc, vh = ensemble.velocities(e, half)
        analytic = -np.concatenate([vc, vh])

        def scaled_loss(vec):
            ee = ensemble.Ensemble(c=vec[:5].copy(), h=vec[5:].copy())
            return 5.0 * ensemble.loss(ee, half)

        fd = central_difference_grad(scaled_loss, np.concatenate([c, h]))
        gap = np.linalg.norm(fd - analytic) / max(np.linalg.norm(analytic), 1e-12)
        worst = max(worst, float(gap))
    checks.append(_check("gradient-vs-central-difference", worst, 1e-6))

    # loss-rate identity at three ensemble sizes
    worst = 0.0
    for n in (1, 10, 100):
        for rep in range(3):
            rng2 = np.random.default_rng(100 * n + rep)
            e = ensemble.Ensemble(
                c=rng2.uniform(-1, 2, size=n), h=rng2.uniform(-0.2, 1.2, size=n)
            )
            lhs, rhs = ensemble.loss_rate_identity(e, square)
            worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    checks.append(_check("loss-rate-identity", worst, 1e-10))

    # characteristic roots
    worst = max(
        abs(np.cos(x) + 1.0 / np.cosh(x))
        for x in (spectral.characteristic_root(k) for k in range(201))
    )
    checks.append(_check("characteristic-roots", worst, 1e-13))

    # beam-mode boundary behavior, scale-normalized per derivative order
    worst = 0.0
    for k in range(11):
        pair = spectral.kernel_eigenpair(k)
        worst = max(worst, abs(float(pair(1.0))))
        worst = max(worst, abs(float(pair.derivative(1)(1.0))) / pair.xi)
        worst = max(worst, abs(float(pair.derivative(2)(0.0))) / pair.xi**2)
        worst = max(worst, abs(float(pair.derivative(3)(0.0))) / pair.xi**3)
    checks.append(_check("beam-mode-boundary-conditions", worst, 1e-8))

    # stable evaluator against the textbook form at small k
    hgrid = np.linspace(0.0, 1.0, 101)
    worst = max(
        float(np.max(np.abs(spectral.kernel_eigenpair(k)(hgrid)
                            - spectral.kernel_eigenpair(k).naive(hgrid))))
        for k in range(4)
    )
    checks.append(_check("beam-mode-naive-agreement", worst, 1e-10))

    # large-k asymptotic form
    pair = spectral.kernel_eigenpair(40)
    asym = np.sqrt(2.0) * np.cos(pair.xi * 0.5 + np.pi / 4.0)
    checks.append(_check(
        "beam-mode-asymptotic", abs(float(pair(0.5)) - asym), 1e-8
    ))

    # Nystrom spectrum of the ramp kernel vs the analytic eigenvalues;
    # the same diagonalization certifies the kernel as positive definite
    prob = NystromProblem(spectral.ramp_kernel, nystrom_n)
    spectrum = np.linalg.eigvalsh(nystrom_matrix(prob))
    top = spectrum[::-1][:6]
    zetas = np.array([spectral.kernel_eigenpair(k).zeta for k in range(6)])
    checks.append(_check(
        "nystrom-ramp-eigenvalues", float(np.max(np.abs(top - zetas))), 1e-6
    ))
    checks.append(_check(
        "nystrom-positive-definite", -float(spectrum[0]), 0.0,
        smallest=float(spectrum[0]),
    ))

    # observed convergence order of the discretization
    vals = [
        nystrom_eigen(NystromProblem(spectral.ramp_kernel, n), 1)[0]
        for n in (nystrom_n // 4, nystrom_n // 2, nystrom_n)
    ]
    order = richardson_order(*vals)
    checks.append(_check(
        "nystrom-convergence-order", abs(order - 2.0), 0.3, order=order
    ))

    # the two diagonalizers agree on a midsize problem
    small = NystromProblem(spectral.ramp_kernel, 120)
    gap = np.max(np.abs(
        nystrom_eigen(small, 6, method="jacobi")
        - nystrom_eigen(small, 6, method="dense")
    ))
    checks.append(_check("jacobi-vs-dense-eigensolver", float(gap), 1e-11))

    # orthogonality law of the linearized modes
    worst = 0.0
    for k in range(11):
        mu4 = spectral.linearized_eigenpair(k).mu ** 4
        for n in range(11):
            want = (0.5 / mu4) if k == n else 0.0
            worst = max(worst, abs(spectral.mode_inner(k, n) - want))
    checks.append(_check("linearized-mode-orthogonality", worst, 1e-10))

    # the beam modes are mutually orthogonal on [0, 1]
    worst = 0.0
    norms = [spectral._mode_norm_sq(k) for k in range(11)]
    for k in range(11):
        pk = spectral.kernel_eigenpair(k)
        for n in range(k + 1, 11):
            pn = spectral.kernel_eigenpair(n)
            raw = spectral._mode_quadrature(
                lambda h: pk(h) * pn(h), pk.xi + pn.xi
            )
            worst = max(worst, abs(raw) / np.sqrt(norms[k] * norms[n]))
    checks.append(_check("beam-mode-orthogonality", worst, 1e-8))

    # toy point model: particle run against the closed form
    p0 = UniformDensity(0.0, 0.6)
    ts, ls, w = point_model_simulate(p0, 1.0, n=200, dt=1e-3, t_end=5.0,
                                     record_every=100)
    exact, _ = point_model_exact(p0, 1.0, ts)
    worst = float(np.max(np.abs(ls - exact) / exact))
    mean_gap = abs(
        float(np.mean(w)) - (1.0 + (p0.mean() - 1.0) * np.exp(-5.0))
    )
    checks.append(_check("point-model-loss", worst, 1e-3))
    checks.append(_check("point-model-mean", mean_gap, 1e-3))

    # equidistant stationary families
    worst_res, worst_gap = 0.0, 0.0
    for m in range(1, 9):
        fam = stationary.equidistant_family(m)
        rep = stationary.stationarity_residual(fam.to_density(), square)
        worst_res = max(worst_res, rep.residual)
        res = stationary.knot_residuals(fam)
        worst_gap = max(worst_gap, float(np.max(np.abs(
            res - fam.delta_h**2 / 6.0
        ))))
    checks.append(_check("equidistant-family-stationarity", worst_res, 1e-8))
    checks.append(_check("equidistant-knot-residuals", worst_gap, 1e-12))

    # closed-form ramp correlation vs direct quadrature
    worst = 0.0
    for h in (0.0, 0.17, 0.5, 0.83):
        direct = piecewise_integral(
            lambda x: np.maximum(x - h, 0.0) * square(x),
            panelize(make_partition([h]), 0.05),
        )
        worst = max(worst, abs(ramp_correlation(square, h) - direct))
    checks.append(_check("ramp-correlation-quadrature", worst, 1e-13))

    # truncated loss series at t = 0 recovers the norm of the target
    defect = spectral.completeness_defect(SineScaled(1e-3, 2), truncation=10)
    checks.append(_check("small-weight-series-completeness", defect, 0.01))

    return checks
