"""Two-mode (double-well dimer) model with asymmetric gain and loss.

Well 1 carries the gain ``gamma (1 + a_I)``, well 2 the loss
``gamma (1 - a_I)``; ``a_R`` shifts the on-site energies in opposite
directions and ``U`` is the contact interaction.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .numerics import (
    DivergenceError, NewtonConfig, NumericalError, eig_dense, newton_solve, rk4_integrate,
)
from .stability import BdGSpectrum, bdg_block_matrix, phase_mode, spectrum_from_matrix

log = logging.getLogger(__name__)

MINUS = "minus"
PLUS = "plus"

_SOLVE = NewtonConfig(max_iterations=60, residual_tolerance=1e-12)


class NoCrossingError(ValueError):
    """The ground-state eigenvalue never becomes real for these asymmetries."""


class NoStationaryStateError(NumericalError):
    pass


@dataclass(frozen=True)
class TwoModeParams:
    gamma: float
    a_I: float = 0.0
    a_R: float = 0.0
    U: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "a_I", "a_R", "U"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not abs(self.a_I) < 1:
            raise ValueError("|a_I| must be < 1")

    def replace(self, **changes) -> "TwoModeParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class TwoModeState:
    c1: complex
    c2: complex

    @classmethod
    def from_array(cls, arr) -> "TwoModeState":
        return cls(complex(arr[0]), complex(arr[1]))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.c1, self.c2], dtype=complex)

    @property
    def norm(self) -> float:
        return math.hypot(abs(self.c1), abs(self.c2))

    def scaled(self, factor: complex) -> "TwoModeState":
        return TwoModeState(self.c1 * factor, self.c2 * factor)


@dataclass(frozen=True)
class BlochPoint:
    R: float
    theta: float
    phi: float

    @property
    def cartesian(self) -> np.ndarray:
        st = math.sin(self.theta)
        return self.R * np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    def distance(self, other: "BlochPoint") -> float:
        return float(np.linalg.norm(self.cartesian - other.cartesian))


@dataclass(frozen=True)
class TwoModeStationary:
    state: TwoModeState
    mu: complex
    params: TwoModeParams
    branch_label: str = MINUS

    @property
    def norm(self) -> float:
        return self.state.norm

    @property
    def residual(self) -> float:
        c = self.state.array
        return float(np.max(np.abs(hamiltonian(self.params, self.state) @ c - self.mu * c)))


@dataclass(frozen=True)
class LabScale:
    tau: float = 0.030

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    params: TwoModeParams
    diverged: bool = False
    divergence_time: Optional[float] = None

    @property
    def norms(self) -> np.ndarray:
        return np.sqrt(np.abs(self.c1) ** 2 + np.abs(self.c2) ** 2)

    @property
    def bloch(self):
        """``(R, theta, phi)`` arrays."""
        return bloch_coordinates(self.c1, self.c2)

    def point(self, i: int) -> BlochPoint:
        return bloch_from_state(TwoModeState(self.c1[i], self.c2[i]))

    @property
    def final_state(self) -> TwoModeState:
        return TwoModeState(self.c1[-1], self.c2[-1])


# ---------------------------------------------------------------------------
# Hamiltonian and linear spectrum


def onsite(params: TwoModeParams):
    g = params.gamma
    return (complex(params.a_R, g * (1 + params.a_I)),
            complex(-params.a_R, -g * (1 - params.a_I)))


def hamiltonian(params: TwoModeParams, state: Optional[TwoModeState] = None) -> np.ndarray:
    h11, h22 = onsite(params)
    h = np.array([[h11, -1.0], [-1.0, h22]], dtype=complex)
    if state is not None:
        h[0, 0] += params.U * abs(state.c1) ** 2
        h[1, 1] += params.U * abs(state.c2) ** 2
    return h


def _sqrt_branch(gamma: float, a_R: float) -> complex:
    # sqrt(1 + (a_R + i gamma)^2), continued from gamma = 0; on the cut
    # (a_R = 0, gamma > 1) take the a_R -> 0^- limit
    rad = complex(1 + a_R * a_R - gamma * gamma, 2 * a_R * gamma)
    if rad.imag == 0 and rad.real < 0:
        return -1j * math.sqrt(-rad.real)
    return complex(np.sqrt(rad))


def linear_eigenvalues(params: TwoModeParams):
    """``(mu_minus, mu_plus)`` of the linear Hamiltonian; ``U`` is ignored.

    ``mu_minus`` is the branch continuously connected to the ground state
    at ``gamma = 0``.
    """
    s = _sqrt_branch(params.gamma, params.a_R)
    shift = 1j * params.gamma * params.a_I
    return shift - s, shift + s


def im_mu_minus(gamma: float, a_I: float, a_R: float) -> float:
    return gamma * a_I - _sqrt_branch(gamma, a_R).imag


def crossing_gamma_squared(a_I: float, a_R: float) -> float:
    """Closed-form value of ``gamma_0**2`` at which ``Im mu_minus`` vanishes."""
    return (1 - a_R ** 2 * (a_I ** -2 - 1)) / (1 - a_I ** 2)


def crossing_gamma(a_I: float, a_R: float = 0.0) -> float:
    """gamma_0 > 0 at which the linear ground-state eigenvalue becomes real.

    The closed form is refined by a bracketed root search on ``Im mu_minus``
    and the result satisfies ``|Im mu_minus(gamma_0)| <= 1e-10``.
    """
    if a_I == 0:
        raise NoCrossingError("a_I = 0: Im mu_minus vanishes identically below the exceptional point")
    if not abs(a_I) < 1:
        raise ValueError("|a_I| must be < 1")
    if a_R * a_I < 0:
        raise NoCrossingError("a_R and a_I of opposite sign: only the excited branch becomes real")
    rad = crossing_gamma_squared(a_I, a_R)
    if rad < -1e-12:
        raise NoCrossingError("gain dominates: no gamma makes the ground state stationary")
    estimate = math.sqrt(max(rad, 0.0))

    def f(g):
        return im_mu_minus(g, a_I, a_R)

    if estimate < 1e-6:
        root = estimate
    else:
        root = estimate
        delta = 1e-6
        while delta <= 0.5:
            lo, hi = estimate * (1 - delta), estimate * (1 + delta)
            if f(lo) * f(hi) < 0:
                root = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
                break
            if f(lo) == 0 or f(hi) == 0:
                root = lo if f(lo) == 0 else hi
                break
            delta *= 10
    if abs(f(root)) > 1e-10:
        raise NumericalError(f"crossing refinement failed: Im mu_minus = {f(root):.3e}")
    return root


def lab_loss_rate(gamma: float, scale: LabScale = LabScale()) -> float:
    """Relative particle loss rate of the loss well in 1/s."""
    return 2 * gamma / scale.tau


# ---------------------------------------------------------------------------
# Bloch sphere


def bloch_coordinates(c1, c2):
    c1 = np.asarray(c1, dtype=complex)
    c2 = np.asarray(c2, dtype=complex)
    a1, a2 = np.abs(c1), np.abs(c2)
    R = np.hypot(a1, a2)
    theta = 2 * np.arctan2(a2, a1)
    phi = np.mod(np.angle(c2) - np.angle(c1), 2 * np.pi)
    phi = np.where(phi >= 2 * np.pi, 0.0, phi)
    phi = np.where((a1 == 0) | (a2 == 0), 0.0, phi)
    theta = np.where(R == 0, 0.0, theta)
    return R, theta, phi


def bloch_from_state(state: TwoModeState) -> BlochPoint:
    R, theta, phi = bloch_coordinates(state.c1, state.c2)
    return BlochPoint(float(R), float(theta), float(phi))


def state_from_bloch(point: BlochPoint) -> TwoModeState:
    half = 0.5 * point.theta
    return TwoModeState(point.R * math.cos(half) * np.exp(-0.5j * point.phi),
                        point.R * math.sin(half) * np.exp(0.5j * point.phi))


# ---------------------------------------------------------------------------
# stationary states


def _gauge(c: np.ndarray) -> np.ndarray:
    if abs(c[0]) == 0:
        return c
    return c * np.exp(-1j * np.angle(c[0]))


def solve_stationary(params: TwoModeParams, norm: float, guess: TwoModeState, mu_guess: complex,
                     label: str = MINUS, config: NewtonConfig = _SOLVE) -> TwoModeStationary:
    """Newton solve of ``H(psi) psi = mu psi`` with ``|psi| = norm`` and ``c1 >= 0``."""
    if not norm > 0:
        raise ValueError("norm must be positive")
    c0 = _gauge(guess.array)
    c0 = c0 * (norm / np.linalg.norm(c0))
    h11, h22 = onsite(params)
    U = params.U

    def residual(x):
        c1 = x[0]
        c2 = complex(x[1], x[2])
        mu = complex(x[3], x[4])
        r1 = (h11 + U * c1 * c1 - mu) * c1 - c2
        r2 = (h22 + U * abs(c2) ** 2 - mu) * c2 - c1
        return np.array([r1.real, r1.imag, r2.real, r2.imag, c1 * c1 + abs(c2) ** 2 - norm ** 2])

    x0 = [c0[0].real, c0[1].real, c0[1].imag, mu_guess.real, mu_guess.imag]
    x = newton_solve(residual, x0, config).x
    c = np.array([x[0], complex(x[1], x[2])])
    if c[0].real < 0:
        c = -c
    return TwoModeStationary(TwoModeState.from_array(c), complex(x[3], x[4]), params, label)


def linear_seeds(params: TwoModeParams, norm: float = 1.0):
    """Linear eigenvectors scaled to ``norm``, labelled by branch."""
    dec = eig_dense(hamiltonian(params.replace(U=0.0)))
    mu_m, mu_p = linear_eigenvalues(params)
    seeds = []
    for label, target in ((MINUS, mu_m), (PLUS, mu_p)):
        k = int(np.argmin(np.abs(dec.eigenvalues - target)))
        v = _gauge(dec.eigenvectors[:, k]) * norm
        seeds.append((TwoModeState.from_array(v), complex(dec.eigenvalues[k]), label))
    return seeds


def _distance(a: TwoModeStationary, b: TwoModeStationary) -> float:
    return float(np.linalg.norm(a.state.array - b.state.array))


def nonlinear_eigenstates(params: TwoModeParams, norm: float = 1.0,
                          seeds: Optional[Iterable] = None) -> list[TwoModeStationary]:
    """Stationary solutions of the two-mode GPE at fixed norm.

    Seeds are ``(state, mu, label)`` triples or stationary solutions (e.g.
    from a neighbouring gamma); the labelled linear eigenvectors are always
    tried after them. Solutions closer than 1e-8 are merged.
    """
    if not norm > 0:
        raise ValueError("norm must be positive")
    candidates = []
    for seed in list(seeds or []) + linear_seeds(params, norm):
        if isinstance(seed, TwoModeStationary):
            seed = (seed.state, seed.mu, seed.branch_label)
        candidates.append(seed)
    found: list[TwoModeStationary] = []
    for state, mu, label in candidates:
        try:
            sol = solve_stationary(params, norm, state, mu, label)
        except NumericalError:
            continue
        if any(_distance(sol, f) < 1e-8 for f in found):
            continue
        if any(f.branch_label == label for f in found):
            # a later seed for an already-populated branch found a new state
            label = f"{label}-extra"
            sol = dataclasses.replace(sol, branch_label=label)
        found.append(sol)
    if not found:
        log.debug("no stationary state found at %s, norm %g", params, norm)
    return found


def _crossing_solve(a_I: float, a_R: float, ueff: float, seed: TwoModeStationary) -> TwoModeStationary:
    """Unit-norm state with real mu; gamma is the extra unknown."""
    c0 = _gauge(seed.state.array)
    c0 = c0 / np.linalg.norm(c0)

    def residual(x):
        c1 = x[0]
        c2 = complex(x[1], x[2])
        mu, g = x[3], x[4]
        h11 = complex(a_R, g * (1 + a_I))
        h22 = complex(-a_R, -g * (1 - a_I))
        r1 = (h11 + ueff * c1 * c1 - mu) * c1 - c2
        r2 = (h22 + ueff * abs(c2) ** 2 - mu) * c2 - c1
        return np.array([r1.real, r1.imag, r2.real, r2.imag, c1 * c1 + abs(c2) ** 2 - 1.0])

    x0 = [c0[0].real, c0[1].real, c0[1].imag, seed.mu.real, seed.params.gamma]
    x = newton_solve(residual, x0, _SOLVE).x
    c = np.array([x[0], complex(x[1], x[2])])
    if c[0].real < 0:
        c = -c
    params = TwoModeParams(gamma=x[4], a_I=a_I, a_R=a_R, U=ueff)
    return TwoModeStationary(TwoModeState.from_array(c), complex(x[3], 0.0), params, MINUS)


def linear_crossing_state(a_I: float, a_R: float = 0.0) -> TwoModeStationary:
    g0 = crossing_gamma(a_I, a_R)
    params = TwoModeParams(gamma=g0, a_I=a_I, a_R=a_R)
    state, mu, _ = linear_seeds(params)[0]
    return TwoModeStationary(state, complex(mu.real, 0.0), params, MINUS)


def crossing_branch(a_I: float, a_R: float, ueff_values: Sequence[float]) -> list[TwoModeStationary]:
    """Unit-norm real-mu states continued from the linear crossing through ``ueff_values``.

    ``ueff_values`` must be monotone starting near zero; intermediate
    continuation steps are inserted so no step exceeds 0.05.
    """
    current = linear_crossing_state(a_I, a_R)
    u_prev = 0.0
    out = []
    for u in ueff_values:
        steps = max(1, int(math.ceil(abs(u - u_prev) / 0.05)))
        for s in range(1, steps + 1):
            current = _crossing_solve(a_I, a_R, u_prev + (u - u_prev) * s / steps, current)
        u_prev = u
        out.append(current)
    return out


def nonlinear_crossing(a_I: float, a_R: float, U: float, norm: float = 1.0) -> TwoModeStationary:
    """Real-mu state on the continued ground-state branch at interaction ``U`` and ``norm``.

    Its ``params.gamma`` is the gamma at which that branch crosses Im mu = 0.
    """
    ueff = U * norm ** 2
    unit = crossing_branch(a_I, a_R, [ueff])[-1]
    params = unit.params.replace(U=U)
    return TwoModeStationary(unit.state.scaled(norm), unit.mu, params, MINUS)


def stationary_norm(params: TwoModeParams, ueff_step: float = 0.05,
                    ueff_max: float = 50.0) -> TwoModeStationary:
    """Stationary state with real mu at ``params.gamma``; its norm is the output.

    Uses psi = N phi with |phi| = 1, so the problem depends on U only through
    U_eff = U N^2. U_eff is walked away from zero until the crossing gamma of
    the unit-norm problem passes ``params.gamma`` and then bracketed. The
    smallest such norm is returned.
    """
    if params.U == 0:
        raise ValueError("stationary_norm needs U != 0")
    if not 0 < abs(params.a_I) < 1:
        raise ValueError("stationary_norm needs 0 < |a_I| < 1")
    a_I, a_R, gamma = params.a_I, params.a_R, params.gamma
    start = linear_crossing_state(a_I, a_R)
    gap0 = start.params.gamma - gamma
    if abs(gap0) <= 1e-12:
        mu = linear_eigenvalues(params)[0]
        return TwoModeStationary(TwoModeState(0j, 0j), complex(mu.real, 0.0), params, MINUS)
    direction = math.copysign(1.0, params.U)
    prev, prev_gap, u_prev = start, gap0, 0.0
    k = 0
    # only the monotone approach from U_eff = 0 counts; once the crossing
    # moves away from gamma the remaining roots lie on the unstable side
    while abs(u_prev) < ueff_max:
        k += 1
        u = direction * k * ueff_step
        try:
            cur = _crossing_solve(a_I, a_R, u, prev)
        except NumericalError as exc:
            raise NoStationaryStateError(f"crossing branch ends near U_eff={u:.3g}") from exc
        gap = cur.params.gamma - gamma
        if gap == 0 or gap * prev_gap < 0:
            seed = prev

            def h(ue):
                return _crossing_solve(a_I, a_R, ue, seed).params.gamma - gamma

            ueff = u if gap == 0 else brentq(h, u_prev, u, xtol=1e-15, rtol=1e-14)
            unit = _crossing_solve(a_I, a_R, ueff, seed)
            N = math.sqrt(ueff / params.U)
            sol = TwoModeStationary(unit.state.scaled(N), unit.mu, params, MINUS)
            if sol.residual > 1e-10 * max(1.0, N ** 3):
                raise NumericalError(f"stationary_norm residual {sol.residual:.2e}")
            return sol
        if abs(gap) >= abs(prev_gap):
            break
        prev, prev_gap, u_prev = cur, gap, u
    raise NoStationaryStateError(
        f"no norm (searched up to U_eff={abs(u_prev):.3g}) makes gamma={gamma} stationary "
        f"(linear crossing at {start.params.gamma:.6g}; the condensate depletes or explodes)")


# ---------------------------------------------------------------------------
# stability and dynamics


def bdg_two_mode(stationary: TwoModeStationary, tol: float = 1e-8, deflate: bool = True) -> BdGSpectrum:
    """Stability eigenvalues of the 4x4 linearisation around ``stationary``.

    With ``deflate`` the exact phase mode is split off before the
    eigensolve, so the trivial eigenvalue is exactly zero.
    """
    scale = max(1.0, stationary.norm ** 3)
    if stationary.residual > 1e-8 * scale:
        raise ValueError(f"input is not stationary (residual {stationary.residual:.2e})")
    h_lin = hamiltonian(stationary.params)
    psi = stationary.state.array
    m = bdg_block_matrix(h_lin, psi, stationary.mu, stationary.params.U)
    null = phase_mode(psi) if deflate and stationary.norm > 0 else None
    return spectrum_from_matrix(m, tol, null)


def two_mode_rhs(params: TwoModeParams):
    """Right-hand side of ``i dpsi/dt = H(psi) psi``, vectorised over trailing axes of ``y``."""
    h11, h22 = onsite(params)
    U = params.U

    def f(t, y):
        c1, c2 = y[0], y[1]
        n1 = c1.real * c1.real + c1.imag * c1.imag
        n2 = c2.real * c2.real + c2.imag * c2.imag
        return -1j * np.stack(((h11 + U * n1) * c1 - c2, (h22 + U * n2) * c2 - c1))

    return f


def norm_rate(params: TwoModeParams, c1, c2):
    """Exact d(N^2)/dt = 2 gamma [(1 + a_I)|c1|^2 - (1 - a_I)|c2|^2]."""
    g, a = params.gamma, params.a_I
    return 2 * g * ((1 + a) * np.abs(c1) ** 2 - (1 - a) * np.abs(c2) ** 2)


def evolve_two_mode(initial: TwoModeState, params: TwoModeParams, t_final: float, dt: float,
                    stride: int = 1, norm_cap: Optional[float] = None) -> TrajectoryRecord:
    """RK4 trajectory; stops early (``diverged=True``) once the norm exceeds ``norm_cap``.

    The default cap is ``10 * max(1, initial norm)``.
    """
    if norm_cap is None:
        norm_cap = 10 * max(1.0, initial.norm)
    cap2 = norm_cap ** 2

    def stop(t, y):
        return (abs(y[0]) ** 2 + abs(y[1]) ** 2) > cap2

    try:
        times, states = rk4_integrate(two_mode_rhs(params), initial.array, (0.0, t_final), dt,
                                      stride=stride, stop=stop)
    except DivergenceError as exc:
        st = exc.states if exc.states is not None else np.empty((0, 2))
        return TrajectoryRecord(exc.times, st[:, 0], st[:, 1], params, True, exc.time)
    final = states[-1]
    diverged = bool(abs(final[0]) ** 2 + abs(final[1]) ** 2 > cap2)
    return TrajectoryRecord(times, states[:, 0], states[:, 1], params, diverged,
                            float(times[-1]) if diverged else None)
