"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even
without ``-s``). Criteria that cannot be met are left failing; the reason
is in the printed detail.
"""
import math
import time

import numpy as np
import pytest

from asymbec.cli import EXIT_OK, run
from asymbec.extended import (
    ExtendedParams, Grid1D, Wavefunction1D, bdg_extended, bloch_project, evolve_extended, gram_schmidt_basis,
    linear_states, project_trajectory, state_at_norm, states_at_gamma, trace_branch,
)
from asymbec.numerics import eig_dense, rk4_integrate, spectral_second_derivative, wavenumbers
from asymbec.scan import ClassifierConfig, onset_radius, separatrix_scan
from asymbec.stability import ATTRACTOR, UNSTABLE
from asymbec.two_mode import (
    BlochPoint, TwoModeParams, bdg_two_mode, crossing_gamma, crossing_gamma_squared, evolve_two_mode,
    im_mu_minus, nonlinear_crossing, norm_rate, state_from_bloch, stationary_norm,
)

pytestmark = pytest.mark.slow

FIG4 = ExtendedParams(0.0, a_R=-0.01, a_I=-0.08, g=0.1)


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[acceptance {number:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def bisect(f, lo, hi, tol=1e-14):
    """Plain bisection, kept independent of the library's root finders."""
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture(scope="module")
def fig4_branch():
    t0 = time.perf_counter()
    branch = trace_branch(FIG4, Grid1D(), np.arange(1, 45) * 0.05)
    return branch, time.perf_counter() - t0


# ---------------------------------------------------------------------------


def test_01_linear_crossing(capsys):
    a_I = -0.2
    t0 = time.perf_counter()
    g0 = crossing_gamma(a_I, 0.0)
    elapsed = time.perf_counter() - t0
    err = abs(g0 - 1 / math.sqrt(1 - a_I ** 2))
    im = abs(im_mu_minus(g0, a_I, 0.0))
    ok = err <= 1e-10 and im <= 1e-10 and elapsed < 1e-3
    report(capsys, 1, ok, f"gamma0={g0:.12f} |err|={err:.1e} |Im mu-|={im:.1e} t={elapsed * 1e3:.3f} ms")


def test_02_closed_form_cross_validation(capsys):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst_root, best_unrooted, n = 0.0, np.inf, 0
    while n < 100:
        mag = rng.uniform(0.05, 0.5)
        a_I = mag * rng.choice([-1.0, 1.0])
        # same-sign a_R inside the depletion boundary keeps the radicand valid
        a_R = a_I / math.sqrt(1 - a_I ** 2) * rng.uniform(0.0, 0.95)
        sq = crossing_gamma_squared(a_I, a_R)
        if not sq > 0:
            continue
        f = lambda g: im_mu_minus(g, a_I, a_R)  # noqa: E731
        lo, hi = 1e-9, 3.0
        assert f(lo) * f(hi) < 0
        root = bisect(f, lo, hi)
        worst_root = max(worst_root, abs(math.sqrt(sq) - root))
        best_unrooted = min(best_unrooted, abs(sq - root))
        n += 1
    elapsed = time.perf_counter() - t0
    ok = worst_root <= 1e-8 and best_unrooted > 1e-8 and elapsed < 1
    report(capsys, 2, ok, f"max|sqrt(rhs)-bisection|={worst_root:.1e}, min|rhs-bisection|={best_unrooted:.2e} "
                          f"over {n} draws, t={elapsed:.2f} s")


def test_03_depletion_boundary(capsys):
    a_I = -0.2
    a_R = a_I / math.sqrt(1 - a_I ** 2)
    t0 = time.perf_counter()
    g = crossing_gamma(a_I, a_R)
    elapsed = time.perf_counter() - t0
    # elsewhere on the boundary the rounded a_R sits up to one ulp inside it,
    # where the true crossing is ~sqrt(eps) ~ 1e-8; shown for information
    others = {a: crossing_gamma(a, a / math.sqrt(1 - a ** 2)) for a in (-0.45, -0.07, 0.1, 0.3)}
    ok = abs(g) <= 1e-8 and elapsed < 1e-3
    report(capsys, 3, ok, f"a_I=-0.2: crossing gamma={g:.1e}, t={elapsed * 1e3:.3f} ms; other a_I: "
                          + ", ".join(f"{a}: {v:.1e}" for a, v in others.items()))


def test_04_crossing_ordering_in_U(capsys):
    t0 = time.perf_counter()
    Us = (0.0, 0.5, 1.0, 1.5)
    bal = [nonlinear_crossing(-0.2, 0.0, U).params.gamma for U in Us]
    shifted = [nonlinear_crossing(-0.2, -0.15, U).params.gamma for U in Us]
    elapsed = time.perf_counter() - t0
    dec = all(b < a for a, b in zip(bal, bal[1:]))
    inc = all(b > a for a, b in zip(shifted, shifted[1:]))
    ok = dec and inc and elapsed < 5
    report(capsys, 4, ok, "a_R=0: " + ", ".join(f"{g:.6f}" for g in bal)
           + " | a_R=-0.15: " + ", ".join(f"{g:.6f}" for g in shifted) + f", t={elapsed:.2f} s")


def test_05_stability_flip(capsys):
    t0 = time.perf_counter()
    out = {}
    for a_R in (0.0, -0.15):
        sp = bdg_two_mode(nonlinear_crossing(-0.2, a_R, 1.0))
        out[a_R] = (sp.classification, abs(sp.trivial), sp.closure_error())
    elapsed = time.perf_counter() - t0
    ok = (out[0.0][0] == UNSTABLE and out[-0.15][0] == ATTRACTOR
          and all(v[1] < 1e-8 and v[2] <= 1e-8 for v in out.values()) and elapsed < 1)
    report(capsys, 5, ok, f"a_R=0 -> {out[0.0][0]}, a_R=-0.15 -> {out[-0.15][0]}, "
                          f"|w0|<={max(v[1] for v in out.values()):.1e}, "
                          f"closure<={max(v[2] for v in out.values()):.1e}, t={elapsed:.2f} s")


def test_06_two_mode_norm_law(capsys):
    params = TwoModeParams(0.7, a_I=-0.2, a_R=-0.15, U=1.0)
    rng = np.random.default_rng(6)
    dt = 1e-3
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(10):
        p = BlochPoint(rng.uniform(0.2, 1.2), rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi))
        tr = evolve_two_mode(state_from_bloch(p), params, 4.0, dt)
        n2 = tr.norms ** 2
        fd = (n2[2:] - n2[:-2]) / (2 * dt)
        law = norm_rate(params, tr.c1[1:-1], tr.c2[1:-1])
        # relative to the largest rate on the trajectory: the rate itself crosses zero
        worst = max(worst, float(np.max(np.abs(fd - law)) / np.max(np.abs(law))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-5 and elapsed < 5
    report(capsys, 6, ok, f"max relative error={worst:.2e} over 10 trajectories, t={elapsed:.2f} s")


def test_07_separatrix_onsets(capsys):
    fast = ClassifierConfig(dt=0.01)
    fine = ClassifierConfig(dt=1e-3)
    t0 = time.perf_counter()
    pt_params = TwoModeParams(0.7, U=1.0)
    asym_params = TwoModeParams(0.7, a_I=-0.2, a_R=-0.15, U=1.0)
    attractor = stationary_norm(asym_params)
    pt = onset_radius(pt_params, None, (48, 96), fast)
    asym = onset_radius(asym_params, attractor, (48, 96), fast)
    elapsed = time.perf_counter() - t0
    # the step size must not move the onset: redo the two bracketing shells at dt=1e-3
    confirm = {}
    for name, res, prm, att in (("PT", pt, pt_params, None), ("asym", asym, asym_params, attractor)):
        if res.radius is None:
            confirm[name] = False
            continue
        below, at = separatrix_scan([res.radius - 0.01, res.radius], (48, 96), prm, att, fine)
        confirm[name] = (not below.has_divergent) and at.has_divergent
    t_confirm = time.perf_counter() - t0 - elapsed
    pt_sym = all(m.is_mirror_symmetric() for m in pt.maps.values())
    asym_sym = asym.onset_map is not None and asym.onset_map.is_mirror_symmetric()
    ok = (pt.radius is not None and abs(pt.radius - 0.60) <= 0.05
          and asym.radius is not None and abs(asym.radius - 0.85) <= 0.05
          and pt_sym and not asym_sym and all(confirm.values()) and elapsed < 600)
    cell = pt.onset_map.divergent_cells()[0] if pt.onset_map is not None else (float("nan"),) * 2
    report(capsys, 7, ok, f"onset PT={pt.radius} (first cell theta={cell[0] / math.pi:.3f}pi "
                          f"phi={cell[1] / math.pi:.3f}pi), asym={asym.radius}; PT maps mirror-symmetric={pt_sym}, "
                          f"asym onset map symmetric={asym_sym}; dt=1e-3 confirms {confirm}; "
                          f"monotonicity violations PT={pt.monotonicity_violations} "
                          f"asym={asym.monotonicity_violations}; onset search t={elapsed:.0f} s "
                          f"(+{t_confirm:.0f} s for the dt=1e-3 check)")


def test_08_extended_stationary_anchors(capsys, fig4_branch):
    branch, t_trace = fig4_branch
    t0 = time.perf_counter()
    s1 = states_at_gamma(branch, 0.0277).get("lower")
    s2 = states_at_gamma(branch, 0.0366)
    n1 = s1.norm if s1 is not None else float("nan")
    # the anchor needs a state on either branch at this gamma
    n2 = min((s.norm for s in s2.values()), key=lambda v: abs(v - math.sqrt(2)), default=float("nan"))
    lower = branch.lower
    g_lo, g_hi = branch.linear_gamma, branch.fold[1]
    elapsed = time.perf_counter() - t0 + t_trace
    parts = {
        "N(0.0277)": abs(n1 - 1) <= 0.05,
        "N(0.0366)": abs(n2 - math.sqrt(2)) <= 0.07,
        "range_low": 0.005 <= g_lo <= 0.015,
        "range_high": 0.030 <= g_hi <= 0.040,
        "runtime": elapsed < 120,
    }
    ok = all(parts.values())
    detail = (f"N(0.0277)={n1:.5f}; N(0.0366)={n2} (fold at N={branch.fold[0]:.4f}, gamma={g_hi:.6f}: "
              f"no stationary state exists beyond it); stable range {g_lo:.5f}..{g_hi:.5f} "
              f"({len(lower)} traced lower states); failing parts: "
              f"{[k for k, v in parts.items() if not v] or 'none'}; t={elapsed:.0f} s")
    report(capsys, 8, ok, detail)


def test_09_extended_bdg(capsys, fig4_branch):
    branch, t_trace = fig4_branch
    t0 = time.perf_counter()
    lower_ok, norms2, im_norm = True, [], []
    for st in branch.lower:
        sp = bdg_extended(st)
        lower_ok &= bool(np.all(sp.nontrivial.imag < 0))
        norms2.append(st.norm ** 2)
        im_norm.append(sp.norm_mode().imag)
    upper_flags = [bool(np.any(bdg_extended(st).nontrivial.imag > 0)) for st in branch.upper]
    elapsed = time.perf_counter() - t0 + t_trace
    x, y = np.array(norms2), np.array(im_norm)
    slope, icept = np.polyfit(x, y, 1)
    r2 = 1 - np.sum((y - (slope * x + icept)) ** 2) / np.sum((y - y.mean()) ** 2)
    parts = {
        "lower_all_decaying": lower_ok,
        "upper_unstable": bool(upper_flags) and all(upper_flags),
        "R2>0.99": r2 > 0.99,
        "runtime": elapsed < 300,
    }
    ok = all(parts.values())
    report(capsys, 9, ok, f"lower states={len(branch.lower)} all Im w<0: {lower_ok}; upper states with Im w>0: "
                          f"{sum(upper_flags)}/{len(upper_flags)}; norm mode Im w = {slope:.5f} N^2 + {icept:.5f}, "
                          f"R^2={r2:.4f}; failing parts: {[k for k, v in parts.items() if not v] or 'none'}; "
                          f"t={elapsed:.0f} s")


def _convergence(branch, target_norm, start_norm):
    target = state_at_norm(branch, target_norm)
    start = state_at_norm(branch, start_norm)
    sp = bdg_extended(target)
    period = 2 * math.pi / abs(sp.oscillation_mode().real)
    _, (_, excited) = linear_states(target.grid, target.params)
    basis = gram_schmidt_basis(target.psi, excited)
    anchor, _ = bloch_project(target.psi, basis)
    tr = evolve_extended(start.psi, target.params, 1500.0, 0.005, stride=200)
    R, th, ph, resid = project_trajectory(tr, basis)
    d = np.array([BlochPoint(R[i], th[i], ph[i]).distance(anchor) for i in range(len(R))])
    converged = bool(d[-1] < 1e-2)
    settle = float(tr.times[np.nonzero(d >= 1e-2)[0].max()]) if np.any(d >= 1e-2) else 0.0
    return {"gamma": target.params.gamma, "period": period, "settle": settle, "periods": settle / period,
            "converged": converged, "im_norm": abs(sp.norm_mode().imag), "residual": float(resid.max())}


def test_10_fig5_dynamics(capsys, fig4_branch):
    branch, t_trace = fig4_branch
    t0 = time.perf_counter()
    left = _convergence(branch, 1.0, math.sqrt(2))
    right = _convergence(branch, math.sqrt(2), 1.0)
    elapsed = time.perf_counter() - t0 + t_trace
    faster, slower = (right, left) if right["im_norm"] > left["im_norm"] else (left, right)
    parts = {
        "left": left["converged"] and abs(left["periods"] - 4) <= 2,
        "right": right["converged"] and abs(right["periods"] - 4) <= 2,
        "rate_order": faster["settle"] < slower["settle"],
        "runtime": elapsed < 120,
    }
    ok = all(parts.values())
    report(capsys, 10, ok,
           f"psi2 under gamma1={left['gamma']:.5f}: {left['periods']:.2f} periods (t={left['settle']:.0f}, "
           f"|Im w|={left['im_norm']:.4f}); psi1 under gamma(N=sqrt2)={right['gamma']:.5f}: "
           f"{right['periods']:.2f} periods (t={right['settle']:.0f}, |Im w|={right['im_norm']:.4f}); "
           f"max projection residual={max(left['residual'], right['residual']):.1e}; "
           f"failing parts: {[k for k, v in parts.items() if not v] or 'none'}; t={elapsed:.0f} s")


def test_11_numerical_kernels(capsys):
    t0 = time.perf_counter()

    def rk4_err(dt):
        _, y = rk4_integrate(lambda t, y: np.array([y[1], -y[0]]), [1.0, 0.0], (0.0, 2.0), dt)
        return abs(y[-1, 0] - math.cos(2.0))

    rk4_ratio = rk4_err(0.1) / rk4_err(0.05)

    grid = Grid1D(-8.0, 8.0, 128)
    params = ExtendedParams(0.03, a_R=-0.01, a_I=-0.08, g=0.1)
    _, (ground, excited) = linear_states(grid, params, count=2)
    psi0 = Wavefunction1D(grid, ground.values + 0.5 * excited.values)

    def final(dt):
        return evolve_extended(psi0, params, 1.0, dt, stride=10 ** 6, edge_tol=None).snapshots[-1]

    ref = final(1e-4)
    strang_ratio = np.linalg.norm(final(0.02) - ref) / np.linalg.norm(final(0.01) - ref)

    n, dx = 64, 0.25
    x = np.arange(n) * dx
    k = wavenumbers(n, dx)
    deriv_err = 0.0
    for m in (1, 3, 7, 20):
        kk = abs(k[m])
        f = np.exp(1j * kk * x)
        deriv_err = max(deriv_err, float(np.max(np.abs(spectral_second_derivative(f, dx) + kk ** 2 * f))))

    rng = np.random.default_rng(11)
    mat = rng.normal(size=(60, 60)) + 1j * rng.normal(size=(60, 60))
    trace_err = abs(eig_dense(mat, vectors=False).eigenvalues.sum() - np.trace(mat)) / max(np.linalg.norm(mat, 2), 1)
    elapsed = time.perf_counter() - t0
    ok = (abs(rk4_ratio / 16 - 1) <= 0.15 and abs(strang_ratio / 4 - 1) <= 0.15 and deriv_err <= 1e-10
          and trace_err <= 1e-10 and elapsed < 10)
    report(capsys, 11, ok, f"RK4 ratio={rk4_ratio:.2f}, Strang ratio={strang_ratio:.3f}, "
                           f"spectral d2 error={deriv_err:.1e}, trace error={trace_err:.1e}, t={elapsed:.1f} s")


EXT_SMALL = "model = extended\ng = 0.1\na_R = -0.01\na_I = -0.08\nn = 256\nnorm_max = 1.2\n"
TWO_ASYM = "model = two_mode\na_I = -0.2\na_R = -0.15\nU = 1\n"

DETERMINISM = [
    ("spectrum", TWO_ASYM + "gamma_min = 0.3\ngamma_max = 1.0\nsteps = 15\n"),
    ("spectrum", EXT_SMALL + "gamma_min = 0.01\ngamma_max = 0.04\nsteps = 4\n"),
    ("bdg", "model = two_mode\na_I = -0.2\nU = 1\ngamma_min = 0.5\ngamma_max = 1.0\nsteps = 11\n"),
    ("bdg", EXT_SMALL + "gamma_min = 0.012\ngamma_max = 0.03\nsteps = 3\n"),
    ("evolve", TWO_ASYM + "gamma = 0.7\nR = 1\ntheta = 1\nphi = 2\nt_final = 5\ndt = 0.001\nstride = 10\n"),
    ("evolve", EXT_SMALL + "target_norm = 1.0\ninitial_norm = 1.1\nt_final = 5\ndt = 0.01\nstride = 100\n"),
    ("separatrix", TWO_ASYM + "gamma = 0.7\nradii = 0.9, 1.0\nn_theta = 8\nn_phi = 16\ndt = 0.01\n"),
    ("stationary", TWO_ASYM + "gamma = 0.7\n"),
    ("stationary", EXT_SMALL + "gamma = 0.0277\n"),
    ("lab-rate", "gamma = 0.05\n"),
]


def test_12_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    mismatched, failed = [], []
    for i, (command, text) in enumerate(DETERMINISM):
        cfg = tmp_path / f"case{i}.cfg"
        cfg.write_text(text)
        dirs = [tmp_path / f"case{i}_{rep}" for rep in "ab"]
        codes = [run(command, str(cfg), str(d)) for d in dirs]
        if codes != [EXIT_OK, EXIT_OK]:
            failed.append((command, codes))
            continue
        files = [sorted(p.relative_to(d) for p in d.rglob("*") if p.is_file()) for d in dirs]
        if files[0] != files[1] or any((dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes() for f in files[0]):
            mismatched.append(f"{command}#{i}")
    elapsed = time.perf_counter() - t0
    ok = not mismatched and not failed
    report(capsys, 12, ok, f"{len(DETERMINISM)} configs over 6 commands run twice; byte mismatches={mismatched or 'none'}; "
                           f"failed runs={failed or 'none'}; t={elapsed:.0f} s")
