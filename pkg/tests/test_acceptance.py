"""End-to-end acceptance gate.

Ten numbered criteria, each printing one PASS/FAIL verdict line with the
measured quantity next to its tolerance, then asserting.  Criteria with a
stated runtime budget time themselves and include the elapsed seconds.
"""

import math
import time

import numpy as np

from splineflow import ensemble, gaussian_local, spectral, stationary, verify
from splineflow.meanfield import DensityPiece, MixedDensity
from splineflow.spline_model import Monomial, SineScaled

SQUARE = Monomial(1.0, 2)
HALF_SQUARE = Monomial(0.5, 2)
C_STAR = (4.0 + math.sqrt(6.0)) / 5.0
H_STAR = (math.sqrt(6.0) - 1.0) / 5.0


def verdict(capsys, num, ok, detail):
    with capsys.disabled():
        print(f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def digits_match(value: float, quoted: str) -> bool:
    """True when the quoted decimal string is the truncation of ``value``."""
    places = len(quoted.split(".")[1])
    scale = 10.0**places
    return math.floor(value * scale + 1e-9) == round(float(quoted) * scale)


def test_criterion_01_spectral_table(capsys):
    started = time.perf_counter()
    xi = [spectral.characteristic_root(k) for k in range(3)]
    zeta = [spectral.kernel_eigenpair(k).zeta for k in range(3)]
    quoted = ("1.87510", "4.69409", "7.85475",
              "0.08089", "0.002059", "0.0002627")
    digits_ok = all(digits_match(v, q) for v, q in zip(xi + zeta, quoted))
    prob = verify.NystromProblem(kernel=spectral.ramp_kernel, n=2000)
    top = verify.nystrom_eigen(prob, 3)
    gap = float(np.max(np.abs(top - np.array(zeta))))
    elapsed = time.perf_counter() - started
    ok = digits_ok and gap <= 1e-6 and elapsed < 5.0
    assert verdict(
        capsys, 1, ok,
        f"spectral table: quoted digits {'ok' if digits_ok else 'WRONG'}, "
        f"nystrom gap {gap:.2e} (tol 1e-06), {elapsed:.1f} s (cap 5 s)",
    )


def test_criterion_02_mode_orthogonality(capsys):
    worst = 0.0
    for k in range(11):
        want_diag = 0.5 / spectral.linearized_eigenpair(k).mu ** 4
        for n in range(11):
            want = want_diag if k == n else 0.0
            worst = max(worst, abs(spectral.mode_inner(k, n) - want))
    ok = worst <= 1e-10
    assert verdict(
        capsys, 2, ok,
        f"mode orthogonality k,n <= 10: worst gap {worst:.2e} (tol 1e-10)",
    )


def test_criterion_03_loss_rate_identity(capsys):
    rng = np.random.default_rng(3)
    worst = 0.0
    for i in range(102):
        n = (1, 10, 100)[i % 3]
        e = ensemble.Ensemble(
            c=rng.uniform(-2.0, 2.0, n), h=rng.uniform(-0.2, 1.3, n)
        )
        lhs, rhs = ensemble.loss_rate_identity(e, SQUARE)
        gap = abs(lhs - rhs)
        bound = 1e-10 * abs(lhs)
        worst = max(worst, gap - bound)
    ok = worst <= 0.0
    assert verdict(
        capsys, 3, ok,
        f"loss-rate identity, 102 ensembles: worst excess {worst:.2e} "
        f"over the 1e-10 * |dL/dt| bound",
    )


def test_criterion_04_gradient_oracle(capsys):
    rng = np.random.default_rng(4)
    truths = (SQUARE, HALF_SQUARE, SineScaled(0.3, 1))
    worst, count = 0.0, 0
    while count < 100:
        n = int(rng.integers(2, 11))
        c = rng.uniform(-2.0, 2.0, n)
        h = rng.uniform(0.05, 1.3, n)
        # knot-tie exclusion: the FD stencil (step 1e-6) must stay clear of
        # every kink, i.e. other particles' knots and the edges 0 and 1
        gaps = np.diff(np.sort(np.concatenate([h, [0.0, 1.0]])))
        if np.min(gaps) < 1e-3 or np.all(h > 0.9):
            continue
        truth = truths[count % 3]
        vc, vh = ensemble.velocities(ensemble.Ensemble(c=c, h=h), truth)
        analytic = np.concatenate([-vc, -vh])

        def scaled_loss(vec, n=n, truth=truth):
            e = ensemble.Ensemble(c=vec[:n].copy(), h=vec[n:].copy())
            return n * ensemble.loss(e, truth)

        fd = verify.central_difference_grad(
            scaled_loss, np.concatenate([c, h]), eps=1e-6
        )
        rel = np.linalg.norm(fd - analytic) / np.linalg.norm(analytic)
        worst = max(worst, float(rel))
        count += 1
    ok = worst <= 1e-6
    assert verdict(
        capsys, 4, ok,
        f"gradient vs central differences, 100 configs: worst rel "
        f"{worst:.2e} (tol 1e-06)",
    )


def test_criterion_05_single_atom_basins(capsys):
    started = time.perf_counter()
    bad = []
    for c0 in np.linspace(-1.0, 2.0, 5):
        for h0 in np.linspace(0.0, 1.5, 5):
            tr = ensemble.simulate(
                ensemble.AtomInit(float(c0), float(h0), seed=0), 1, SQUARE,
                0.1, 1000.0, record_every=1000, snapshots=True,
                stop_velocity=1e-8,
            )
            c_f = float(tr.snapshots[-1, 0, 0])
            h_f = float(tr.snapshots[-1, 1, 0])
            e_f = ensemble.Ensemble(c=np.array([c_f]), h=np.array([h_f]))
            vc, vh = ensemble.velocities(e_f, SQUARE)
            vnorm = float(np.hypot(vc[0], vh[0]))
            # the frozen half-line is reached asymptotically, so membership
            # is distance to the set {h >= 1}
            in_frozen = max(1.0 - h_f, 0.0) <= 1e-4
            at_atom = math.hypot(c_f - C_STAR, h_f - H_STAR) <= 1e-4
            if vnorm > 1e-8 or not (in_frozen or at_atom):
                bad.append((float(c0), float(h0), c_f, h_f, vnorm))
    elapsed = time.perf_counter() - started
    ok = not bad and elapsed < 30.0
    assert verdict(
        capsys, 5, ok,
        f"5x5 single-atom grid: {25 - len(bad)}/25 starts converged to "
        f"{{h >= 1}} or the stationary atom (tol 1e-04), "
        f"{elapsed:.1f} s (cap 30 s)",
    )


def test_criterion_06_equidistant_families(capsys):
    worst_dh = worst_res = worst_knot = 0.0
    for m in range(1, 9):
        fam = stationary.equidistant_family(m)
        want = (6.0 * m - math.sqrt(6.0)) / (6.0 * m * m - 1.0)
        worst_dh = max(worst_dh, abs(fam.delta_h - want))
        rep = stationary.stationarity_residual(fam.to_density(), SQUARE)
        worst_res = max(worst_res, rep.residual)
        res = stationary.knot_residuals(fam)
        worst_knot = max(
            worst_knot, float(np.max(np.abs(res - fam.delta_h**2 / 6.0)))
        )
    ok = worst_dh <= 1e-12 and worst_res <= 1e-8 and worst_knot <= 1e-12
    assert verdict(
        capsys, 6, ok,
        f"equidistant families M=1..8: spacing gap {worst_dh:.2e} "
        f"(tol 1e-12), stationarity residual {worst_res:.2e} (tol 1e-08), "
        f"knot-residual gap {worst_knot:.2e} (tol 1e-12)",
    )


def test_criterion_07_stability_rates(capsys):
    sigma = 1e-3
    cases = (
        ("unstable", ensemble.GaussianInit(C_STAR, H_STAR, sigma, seed=0),
         0.2168086),
        # cloud nudged 6 sigma inside the domain: centered exactly at h = 1,
        # half the particles would start frozen
        ("stable", ensemble.GaussianInit(-1.0, 1.0 - 6.0 * sigma, sigma,
                                         seed=0), -2.0),
    )
    rels = {}
    for name, spec, rate_ref in cases:
        tr = ensemble.simulate(
            spec, 10_000, SQUARE, 1e-3, 1.0, record_every=10, snapshots=True
        )
        var = np.var(tr.snapshots[:, 1, :], axis=1)
        slope = float(np.polyfit(tr.t, np.log(var), 1)[0])
        rels[name] = abs(slope - rate_ref) / abs(rate_ref)
    ok = all(r <= 0.10 for r in rels.values())
    assert verdict(
        capsys, 7, ok,
        f"variance rates, 1e4 particles: unstable rel "
        f"{rels['unstable']:.2%}, stable rel {rels['stable']:.2%} (tol 10%)",
    )


def test_criterion_08_small_c_slowdown(capsys):
    started = time.perf_counter()
    halving, halved = [], True
    for k, t_end in ((1, 100.0), (2, 900.0), (3, 4000.0)):
        f = SineScaled(0.01, k)
        spec = ensemble.StratifiedInit(0.0, 1.0, c0=0.0, seed=0)
        l0 = ensemble.loss(ensemble.init(spec, 100), f)
        tr = ensemble.simulate(
            spec, 100, f, 0.1, t_end, record_every=1, stop_loss=0.5 * l0
        )
        halved = halved and tr.loss[-1] <= 0.5 * l0
        halving.append(float(tr.t[-1]))
    increasing = halving[0] < halving[1] < halving[2]

    fB = SineScaled(1e-3, 2)
    trB = ensemble.simulate(
        ensemble.StratifiedInit(0.0, 1.0, c0=0.0, seed=0), 100, fB,
        0.1, 1200.0, record_every=10,
    )
    theory = spectral.small_output_loss(fB, trB.t, 10)
    window = trB.loss >= 0.01 * trB.loss[0]
    relB = float(np.max(
        np.abs(trB.loss[window] - theory[window]) / theory[window]
    ))
    elapsed = time.perf_counter() - started
    ok = halved and increasing and relB <= 0.10 and elapsed < 60.0
    assert verdict(
        capsys, 8, ok,
        f"small-c slowdown: halving times {halving[0]:.1f} < "
        f"{halving[1]:.1f} < {halving[2]:.1f} "
        f"({'strict' if increasing else 'NOT increasing'}), theory rel "
        f"{relB:.2%} (tol 10%), {elapsed:.1f} s (cap 60 s)",
    )


def test_criterion_09_linearized_minimizer(capsys):
    started = time.perf_counter()
    tr = ensemble.simulate(
        ensemble.StratifiedInit(0.3, 0.8, c0=1.0, seed=0, knot_only=True),
        1000, HALF_SQUARE, 1e-3, 12.0, record_every=10,
    )
    dp = MixedDensity(pieces=(
        DensityPiece(0.0, 0.3, poly=(-1.0,)),
        DensityPiece(0.3, 0.8, poly=(1.0,)),
        DensityPiece(0.8, 1.0, poly=(-1.0,)),
    ))
    theory = spectral.linearized_loss(dp, tr.t, 10_000)
    window = (tr.loss >= 1e-6) & (tr.loss <= tr.loss[0])
    rel = float(np.max(
        np.abs(tr.loss[window] - theory[window]) / theory[window]
    ))
    elapsed = time.perf_counter() - started
    ok = rel <= 0.25 and elapsed < 60.0
    assert verdict(
        capsys, 9, ok,
        f"linearized minimizer tracking, N=1000: max rel {rel:.2%} "
        f"(tol 25%), {elapsed:.1f} s (cap 60 s)",
    )


def test_criterion_10_point_model(capsys):
    p0 = verify.UniformDensity(0.0, 0.6)
    t, sim, _ = verify.point_model_simulate(
        p0, 1.0, n=100, dt=1e-3, t_end=5.0
    )
    exact, _ = verify.point_model_exact(p0, 1.0, t)
    rel = float(np.max(np.abs(sim - exact) / exact))
    ok = rel <= 1e-3
    assert verdict(
        capsys, 10, ok,
        f"point model vs closed form on [0, 5]: max rel {rel:.2e} "
        f"(tol 1e-03)",
    )
