import math

import numpy as np
import pytest

from asymbec.scan import (
    CONVERGENT, DIVERGENT, EXTENDED, UNDECIDED, ClassifierConfig, SweepSpec, angular_grid,
    branch_crossings, classify_batch, classify_initial, onset_radius, separatrix_scan, sweep_spectrum,
)
from asymbec.two_mode import (
    BlochPoint, TwoModeParams, bloch_from_state, evolve_two_mode, nonlinear_crossing, state_from_bloch,
    stationary_norm,
)

ASYM = TwoModeParams(0.7, a_I=-0.2, a_R=-0.15, U=1.0)
PT = TwoModeParams(0.7, U=1.0)
FAST = ClassifierConfig(dt=0.01)


@pytest.fixture(scope="module")
def attractor():
    return stationary_norm(ASYM)


# --- sweeps --------------------------------------------------------------------


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(0.5, 0.5, 10)
    with pytest.raises(ValueError):
        SweepSpec(0.0, 1.0, 1)
    with pytest.raises(ValueError):
        SweepSpec(0.0, 1.0, 5, model="three_mode")


def test_linear_pt_sweep_is_real():
    rows = sweep_spectrum(SweepSpec(0.0, 0.9, 19))
    assert len(rows) == 38
    assert all(abs(r.mu_im) < 1e-10 for r in rows)
    assert [(r.gamma, r.branch) for r in rows] == sorted((r.gamma, r.branch) for r in rows)
    assert {r.branch for r in rows} == {"s0", "s1"}


def test_sweep_crossing_moves_down_with_U():
    cross = {}
    for U in (0.5, 1.5):
        rows = sweep_spectrum(SweepSpec(0.5, 1.2, 71, a_I=-0.2, interaction=U))
        cross[U] = branch_crossings(rows, "s0")[0]
        assert cross[U] == pytest.approx(nonlinear_crossing(-0.2, 0.0, U).params.gamma, abs=2e-3)
    assert cross[1.5] < cross[0.5]


def test_sweep_ascending_descending_agree():
    spec = SweepSpec(0.2, 0.9, 15, a_I=-0.2, a_R=-0.15, interaction=1.0)
    up = sweep_spectrum(spec)
    down = sweep_spectrum(SweepSpec(0.2, 0.9, 15, a_I=-0.2, a_R=-0.15, interaction=1.0, descending=True))
    key = {(r.gamma, r.branch): r for r in down}
    assert len(up) == len(down)
    for r in up:
        o = key[(r.gamma, r.branch)]
        assert abs(r.mu_re - o.mu_re) < 1e-8 and abs(r.mu_im - o.mu_im) < 1e-8


def test_branch_crossings_interpolation():
    from asymbec.scan import SpectrumRow
    rows = [SpectrumRow(0.0, "a", 0, -1.0, 1), SpectrumRow(1.0, "a", 0, 1.0, 1), SpectrumRow(0.5, "b", 0, 0.0, 1)]
    assert branch_crossings(rows, "a") == [0.5]


def test_extended_sweep_has_fold():
    spec = SweepSpec(0.005, 0.04, 15, model=EXTENDED, a_R=-0.01, a_I=-0.08, interaction=0.1)
    rows = sweep_spectrum(spec)
    lower = [r for r in rows if r.branch == "lower"]
    upper = [r for r in rows if r.branch == "upper"]
    assert lower and upper
    assert min(r.gamma for r in lower) >= 0.0096 - 1e-9
    assert max(r.gamma for r in lower) < 0.0345
    for r in upper:
        partner = [x for x in lower if x.gamma == r.gamma]
        if partner:
            assert r.norm > partner[0].norm
    assert all(r.mu_im == 0 for r in rows)


# --- classification -------------------------------------------------------------


def test_attractor_point_is_convergent_immediately(attractor):
    res = classify_initial(bloch_from_state(attractor.state), ASYM, attractor, FAST)
    assert res.verdict == CONVERGENT
    assert res.decision_time == 0.0


def test_gain_well_start_diverges(attractor):
    res = classify_initial(BlochPoint(3.0, 0.05, 0.0), ASYM, attractor)
    assert res.verdict == DIVERGENT
    assert res.final_norm > 10


def test_loss_well_start_converges(attractor):
    cfg = ClassifierConfig(dt=0.01, t_max=2500)
    res = classify_initial(BlochPoint(2.0, 2.5, 3.0), ASYM, attractor, cfg)
    assert res.verdict == CONVERGENT
    assert res.final_norm == pytest.approx(attractor.norm, abs=2e-3)


def test_short_horizon_is_undecided(attractor):
    res = classify_initial(BlochPoint(0.5, 1.0, 1.0), ASYM, attractor, ClassifierConfig(t_max=0.001))
    assert res.verdict == UNDECIDED
    assert res.decision_time == 0.001


def test_pt_reference_bounded_is_convergent():
    res = classify_initial(BlochPoint(0.3, 1.0, 0.0), PT, None, FAST)
    assert res.verdict == CONVERGENT and res.decision_time == FAST.t_max


def test_batch_matches_single_trajectory():
    # the vectorised integrator must agree with the generic RK4 path
    p = BlochPoint(1.2, 0.4 * math.pi, 1.25 * math.pi)
    res = classify_initial(p, PT, None, ClassifierConfig(dt=1e-3, t_max=50))
    tr = evolve_two_mode(state_from_bloch(p), PT, 50.0, 1e-3, norm_cap=10.0)
    assert res.verdict == (DIVERGENT if tr.diverged else CONVERGENT)
    if tr.diverged:
        assert res.decision_time == pytest.approx(tr.divergence_time, abs=1e-9)


def test_classification_deterministic(attractor):
    pts = [BlochPoint(0.9, t, f) for t in (0.5, 1.5, 2.5) for f in (0.0, 2.0, 4.0)]
    a = classify_batch(pts, ASYM, attractor, FAST)
    b = classify_batch(pts[::-1], ASYM, attractor, FAST)
    for x, y in zip(a, b):
        assert np.array_equal(x, y[::-1])


# --- separatrix ---------------------------------------------------------------------


def test_angular_grid():
    theta, phi = angular_grid(4, 8)
    assert np.allclose(theta, [math.pi / 8, 3 * math.pi / 8, 5 * math.pi / 8, 7 * math.pi / 8])
    assert phi[0] == 0 and phi[-1] < 2 * math.pi


def test_pt_map_mirror_symmetric():
    (m,) = separatrix_scan([0.8], (12, 24), PT, None, FAST)
    assert m.has_divergent
    assert m.is_mirror_symmetric()


def test_asymmetric_map_not_symmetric(attractor):
    (m,) = separatrix_scan([1.0], (12, 24), ASYM, attractor, FAST)
    assert m.has_divergent
    assert not m.is_mirror_symmetric()


def test_degenerate_horizon_all_undecided(attractor):
    (m,) = separatrix_scan([0.5], (4, 8), ASYM, attractor, ClassifierConfig(t_max=0.001))
    assert m.count(UNDECIDED) == 32


def test_onset_search_small_grid():
    res = onset_radius(PT, None, (12, 24), FAST, coarse_step=0.2, fine_step=0.05, r_max=1.0)
    assert res.radius is not None
    assert res.onset_map.has_divergent
    below = [r for r in res.maps if r < res.radius]
    assert below and not any(res.maps[r].has_divergent for r in below)
    assert res.monotonicity_violations == 0


def test_onset_step_validation():
    with pytest.raises(ValueError):
        onset_radius(PT, None, (2, 2), FAST, coarse_step=0.1, fine_step=0.03)
