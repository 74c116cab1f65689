"""Parameter sweeps and basin classification on Bloch-sphere shells."""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .extended import ExtendedParams, Grid1D, states_at_gamma, trace_branch
from .two_mode import (
    BlochPoint, TwoModeParams, TwoModeStationary, bloch_from_state, nonlinear_eigenstates, onsite,
)

log = logging.getLogger(__name__)

TWO_MODE = "two_mode"
EXTENDED = "extended"

CONVERGENT = "convergent"
DIVERGENT = "divergent"
UNDECIDED = "undecided"


# ---------------------------------------------------------------------------
# spectrum sweeps


@dataclass(frozen=True)
class SweepSpec:
    gamma_min: float
    gamma_max: float
    steps: int
    model: str = TWO_MODE
    a_R: float = 0.0
    a_I: float = 0.0
    # U for the two-mode model, g for the extended one
    interaction: float = 0.0
    # two-mode only: fixed norm of the spectrum
    norm: float = 1.0
    descending: bool = False
    grid: Grid1D = Grid1D()
    # extended only: norm step and maximum for the branch trace
    norm_step: float = 0.05
    norm_max: float = 2.2

    def __post_init__(self):
        if self.model not in (TWO_MODE, EXTENDED):
            raise ValueError(f"model must be {TWO_MODE!r} or {EXTENDED!r}")
        if not self.gamma_min < self.gamma_max:
            raise ValueError("need gamma_min < gamma_max")
        if self.gamma_min < 0:
            raise ValueError("gamma_min must be >= 0")
        if self.steps < 2:
            raise ValueError("steps must be >= 2")
        if not self.norm > 0 or not self.norm_step > 0 or not self.norm_max > self.norm_step:
            raise ValueError("norm settings must be positive with norm_max > norm_step")

    @property
    def gammas(self) -> np.ndarray:
        return np.linspace(self.gamma_min, self.gamma_max, self.steps)


@dataclass(frozen=True)
class SpectrumRow:
    gamma: float
    branch: str
    mu_re: float
    mu_im: float
    norm: float


def _rank_labels(states):
    """Order states by decreasing Im mu, then increasing Re mu; label them s0, s1, ..."""
    if not states:
        return []
    mu = np.array([s.mu for s in states])
    order = np.lexsort((mu.real, -np.round(mu.imag, 9)))
    return [dataclasses.replace(states[k], branch_label=f"s{i}") for i, k in enumerate(order)]


def _continue_pass(gammas, spec: SweepSpec, known):
    previous: list = []
    for g in gammas:
        params = TwoModeParams(float(g), a_I=spec.a_I, a_R=spec.a_R, U=spec.interaction)
        found = nonlinear_eigenstates(params, spec.norm, seeds=list(known.get(float(g), [])) + previous)
        known[float(g)] = found
        previous = found


def _sweep_two_mode(spec: SweepSpec):
    # one pass in each direction: states born at a bifurcation are only
    # reachable by continuation from the side where they exist
    gammas = spec.gammas
    first, second = (gammas[::-1], gammas) if spec.descending else (gammas, gammas[::-1])
    known: dict = {}
    _continue_pass(first, spec, known)
    _continue_pass(second, spec, known)
    for g, found in known.items():
        if not found:
            log.info("gap in two-mode sweep at gamma=%g", g)
        known[g] = _rank_labels(found)
    return known


def sweep_spectrum(spec: SweepSpec, return_states: bool = False):
    """Rows ``(gamma, branch, mu_re, mu_im, norm)`` sorted by (gamma, branch).

    Two-mode: every gamma is solved from its neighbours' states (one pass
    up, one down) plus fresh linear seeds; branch ``s<k>`` is the k-th
    state by decreasing Im mu, then increasing Re mu. Extended: the ground-state branch is traced in the
    norm once, then solved at each gamma on its lower and upper parts.
    Solver failures leave gaps. With ``return_states`` the stationary
    objects are returned too, keyed like the rows.
    """
    rows: List[SpectrumRow] = []
    objects = {}
    if spec.model == TWO_MODE:
        for g, found in _sweep_two_mode(spec).items():
            for s in found:
                rows.append(SpectrumRow(g, s.branch_label, s.mu.real, s.mu.imag, s.norm))
                objects[(g, s.branch_label)] = s
    else:
        params = ExtendedParams(0.0, a_R=spec.a_R, a_I=spec.a_I, g=spec.interaction)
        norms = np.arange(1, int(round(spec.norm_max / spec.norm_step)) + 1) * spec.norm_step
        branch = trace_branch(params, spec.grid, norms)
        gammas = spec.gammas[::-1] if spec.descending else spec.gammas
        for g in gammas:
            for label, s in states_at_gamma(branch, float(g)).items():
                rows.append(SpectrumRow(float(g), label, s.mu, 0.0, s.norm))
                objects[(float(g), label)] = s
    rows.sort(key=lambda r: (r.gamma, r.branch))
    return (rows, objects) if return_states else rows


def branch_crossings(rows: Sequence[SpectrumRow], branch: str) -> List[float]:
    """gamma values where ``mu_im`` of ``branch`` changes sign (linear interpolation)."""
    pts = [(r.gamma, r.mu_im) for r in rows if r.branch == branch]
    out = []
    for (g0, m0), (g1, m1) in zip(pts, pts[1:]):
        if m0 == 0:
            out.append(g0)
        elif m0 * m1 < 0:
            out.append(g0 - m0 * (g1 - g0) / (m1 - m0))
    return out


# ---------------------------------------------------------------------------
# basin classification


@dataclass(frozen=True)
class ClassifierConfig:
    eps_conv: float = 1e-3
    dwell: float = 5.0
    norm_cap: float = 10.0
    t_max: float = 200.0
    dt: float = 1e-3
    # decided cells are dropped from the batch every this many steps
    compact_every: int = 250

    def __post_init__(self):
        for name in ("eps_conv", "dwell", "norm_cap", "t_max", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.compact_every < 1:
            raise ValueError("compact_every must be >= 1")


@dataclass(frozen=True)
class ClassificationResult:
    initial: BlochPoint
    verdict: str
    decision_time: float
    final_norm: float


def _cartesian(x1, y1, x2, y2):
    # Bloch vector of c1 = x1 + i y1, c2 = x2 + i y2 (length R)
    r = np.sqrt(x1 * x1 + y1 * y1 + x2 * x2 + y2 * y2)
    safe = np.where(r > 0, r, 1.0)
    re12 = x1 * x2 + y1 * y2
    im12 = x1 * y2 - y1 * x2
    return 2 * re12 / safe, 2 * im12 / safe, (x1 * x1 + y1 * y1 - x2 * x2 - y2 * y2) / safe


def classify_batch(points: Sequence[BlochPoint], params: TwoModeParams,
                   attractor: Optional[TwoModeStationary] = None,
                   config: ClassifierConfig = ClassifierConfig()):
    """Classify many initial points at once; returns arrays ``(verdicts, decision_times, final_norms)``.

    Each point is integrated with RK4 at ``config.dt`` independently of the
    others (the batch only shares array operations). Divergent: norm above
    ``norm_cap``. Convergent with an attractor: Bloch distance below
    ``eps_conv`` for ``dwell`` time units, with the decision time set to
    the entry into that neighbourhood. Convergent without an attractor:
    bounded for all of ``t_max``.
    """
    pts = list(points)
    m = len(pts)
    R = np.array([p.R for p in pts], dtype=float)
    th = np.array([p.theta for p in pts], dtype=float)
    ph = np.array([p.phi for p in pts], dtype=float)
    c1 = R * np.cos(th / 2) * np.exp(-0.5j * ph)
    c2 = R * np.sin(th / 2) * np.exp(0.5j * ph)
    z = np.array([c1.real, c1.imag, c2.real, c2.imag])

    h11, h22 = onsite(params)
    a1, b1, a2, b2 = h11.real, h11.imag, h22.real, h22.imag
    U = params.U

    def rhs(s):
        x1, y1, x2, y2 = s
        e1 = a1 + U * (x1 * x1 + y1 * y1)
        e2 = a2 + U * (x2 * x2 + y2 * y2)
        # i dc/dt = H c with H = [[e1 + i b1, -1], [-1, e2 + i b2]]
        return np.array([e1 * y1 + b1 * x1 - y2, b1 * y1 + x2 - e1 * x1,
                         e2 * y2 + b2 * x2 - y1, b2 * y2 + x1 - e2 * x2])

    verdict = np.full(m, UNDECIDED, dtype=object)
    decision = np.full(m, float(config.t_max))
    final = R.copy()
    cap2 = config.norm_cap ** 2
    eps = config.eps_conv
    target = None
    if attractor is not None:
        target = bloch_from_state(attractor.state).cartesian

    active = np.arange(m)
    entry = np.full(m, np.nan)
    steps = int(np.ceil(config.t_max / config.dt - 1e-9))
    dt = config.dt

    def check(t, s, idx, already):
        n2 = s[0] ** 2 + s[1] ** 2 + s[2] ** 2 + s[3] ** 2
        div = (n2 > cap2) & ~already
        if np.any(div):
            k = idx[div]
            verdict[k] = DIVERGENT
            decision[k] = t
            final[k] = np.sqrt(n2[div])
        done = div
        if target is not None:
            X, Y, Z = _cartesian(*s)
            d2 = (X - target[0]) ** 2 + (Y - target[1]) ** 2 + (Z - target[2]) ** 2
            inside = (d2 < eps * eps) & ~div & ~already
            e = entry[idx]
            e = np.where(inside, np.where(np.isnan(e), t, e), np.nan)
            entry[idx] = np.where(already, entry[idx], e)
            conv = inside & (t - e >= config.dwell - 1e-9)
            if np.any(conv):
                k = idx[conv]
                verdict[k] = CONVERGENT
                decision[k] = e[conv]
                final[k] = np.sqrt(n2[conv])
            done = done | conv
        return done, n2

    done, _ = check(0.0, z, active, np.zeros(m, dtype=bool))
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, steps + 1):
            if active.size == 0:
                break
            h = min(dt, config.t_max - (step - 1) * dt) if step == steps else dt
            k1 = rhs(z)
            k2 = rhs(z + 0.5 * h * k1)
            k3 = rhs(z + 0.5 * h * k2)
            k4 = rhs(z + h * k3)
            z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = config.t_max if step == steps else step * dt
            d, n2 = check(t, z, active, done)
            done = done | d | ~np.isfinite(n2)
            if step % config.compact_every == 0 or step == steps:
                keep = ~done
                active, z, done = active[keep], z[:, keep], done[keep]
    # survivors
    if active.size:
        n2 = z[0] ** 2 + z[1] ** 2 + z[2] ** 2 + z[3] ** 2
        final[active] = np.sqrt(n2)
        if attractor is None:
            still = verdict[active] == UNDECIDED
            verdict[active[still]] = CONVERGENT
    return verdict.astype(str), decision, final


def classify_initial(point: BlochPoint, params: TwoModeParams, attractor: Optional[TwoModeStationary] = None,
                     config: ClassifierConfig = ClassifierConfig()) -> ClassificationResult:
    v, d, f = classify_batch([point], params, attractor, config)
    return ClassificationResult(point, str(v[0]), float(d[0]), float(f[0]))


# ---------------------------------------------------------------------------
# separatrix maps


def angular_grid(n_theta: int, n_phi: int):
    """Cell-centred theta in (0, pi) and phi = 2 pi j / n_phi."""
    if n_theta < 1 or n_phi < 1:
        raise ValueError("resolution must be positive")
    theta = (np.arange(n_theta) + 0.5) * math.pi / n_theta
    phi = np.arange(n_phi) * 2 * math.pi / n_phi
    return theta, phi


@dataclass
class SeparatrixMap:
    R: float
    theta: np.ndarray
    phi: np.ndarray
    verdicts: np.ndarray  # (n_theta, n_phi)
    decision_times: np.ndarray
    final_norms: np.ndarray
    config: ClassifierConfig = field(default_factory=ClassifierConfig)

    @property
    def resolution(self):
        return self.verdicts.shape

    def count(self, verdict: str) -> int:
        return int(np.sum(self.verdicts == verdict))

    @property
    def has_divergent(self) -> bool:
        return self.count(DIVERGENT) > 0

    def is_mirror_symmetric(self) -> bool:
        """Verdicts invariant under theta -> pi - theta, cell for cell."""
        return bool(np.array_equal(self.verdicts, self.verdicts[::-1, :]))

    def divergent_cells(self):
        i, j = np.nonzero(self.verdicts == DIVERGENT)
        return [(float(self.theta[a]), float(self.phi[b])) for a, b in zip(i, j)]


def separatrix_scan(radii: Sequence[float], resolution, params: TwoModeParams,
                    attractor: Optional[TwoModeStationary] = None,
                    config: ClassifierConfig = ClassifierConfig()) -> List[SeparatrixMap]:
    """One verdict map per radius over the cell-centred (theta, phi) grid."""
    n_theta, n_phi = resolution
    theta, phi = angular_grid(n_theta, n_phi)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    out = []
    for R in radii:
        if not R > 0:
            raise ValueError("radii must be positive")
        pts = [BlochPoint(float(R), float(a), float(b)) for a, b in zip(tt.ravel(), pp.ravel())]
        v, d, f = classify_batch(pts, params, attractor, config)
        shape = (n_theta, n_phi)
        out.append(SeparatrixMap(float(R), theta, phi, v.reshape(shape), d.reshape(shape),
                                 f.reshape(shape), config))
        log.info("R=%.3f: %d divergent, %d undecided", R, out[-1].count(DIVERGENT), out[-1].count(UNDECIDED))
    return out


@dataclass
class OnsetResult:
    radius: Optional[float]
    maps: Dict[float, SeparatrixMap]
    monotonicity_violations: int

    @property
    def onset_map(self) -> Optional[SeparatrixMap]:
        return None if self.radius is None else self.maps[self.radius]


def _monotonicity_violations(maps: Dict[float, SeparatrixMap]) -> int:
    radii = sorted(maps)
    bad = 0
    seen = None
    for r in radii:
        div = maps[r].verdicts == DIVERGENT
        if seen is not None:
            bad += int(np.sum(seen & ~div))
            seen = seen | div
        else:
            seen = div
    return bad


def onset_radius(params: TwoModeParams, attractor: Optional[TwoModeStationary] = None,
                 resolution=(48, 96), config: ClassifierConfig = ClassifierConfig(),
                 coarse_step: float = 0.1, fine_step: float = 0.01, r_max: float = 2.0) -> OnsetResult:
    """Smallest radius on the ``fine_step`` lattice with a divergent cell.

    Radii are scanned on the coarse lattice first; the fine lattice is then
    scanned inside the first coarse interval that contains divergence.
    Rays that diverge at one radius but not at a larger one are counted as
    monotonicity violations (a diagnostic, the search assumes none below
    the coarse hit).
    """
    ratio = coarse_step / fine_step
    if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
        raise ValueError("coarse_step must be an integer multiple of fine_step")
    ratio = int(round(ratio))
    maps: Dict[float, SeparatrixMap] = {}

    def scan(r):
        r = round(r, 10)
        if r not in maps:
            maps[r] = separatrix_scan([r], resolution, params, attractor, config)[0]
        return maps[r]

    k = 1
    hit = None
    while k * coarse_step <= r_max + 1e-12:
        if scan(k * coarse_step).has_divergent:
            hit = k
            break
        k += 1
    if hit is None:
        return OnsetResult(None, maps, _monotonicity_violations(maps))
    radius = round(hit * coarse_step, 10)
    for j in range(1, ratio):
        r = (hit - 1) * coarse_step + j * fine_step
        if scan(r).has_divergent:
            radius = round(r, 10)
            break
    return OnsetResult(radius, maps, _monotonicity_violations(maps))
