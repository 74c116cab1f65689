"""One-dimensional Gross-Pitaevskii model in an asymmetric double well.

``i dpsi/dt = (-d^2/dx^2 + V(x) + g|psi|^2) psi`` on a periodic box with a
spectral kinetic term. The left well (x <= 0) gains particles, the right
well loses them; ``a_R`` deepens the right well's barrier side and ``a_I``
widens its loss profile.
"""
from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .numerics import (
    NewtonConfig, NumericalError, eig_dense, newton_solve, second_derivative_matrix, wavenumbers,
)
from .stability import BdGSpectrum, bdg_block_matrix, phase_mode, spectrum_from_matrix
from .two_mode import BlochPoint, TwoModeState, bloch_from_state

# half-width parameter of the gain/loss Gaussians
LOSS_WIDTH = 0.12
EDGE_TOL = 1e-8

_NEWTON = NewtonConfig(max_iterations=40, residual_tolerance=1e-10)


class BoxTooSmallError(NumericalError):
    """The wave function does not decay before the box edges."""


class NearParallelError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    x_min: float = -10.0
    x_max: float = 10.0
    n: int = 512

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)) or self.x_max <= self.x_min:
            raise ValueError("need finite x_min < x_max")
        if self.n < 64 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 64, got {self.n}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def x(self) -> np.ndarray:
        return self.x_min + np.arange(self.n) * self.dx

    @property
    def k(self) -> np.ndarray:
        return wavenumbers(self.n, self.dx)


@functools.lru_cache(maxsize=8)
def _kinetic(grid: Grid1D) -> np.ndarray:
    m = -second_derivative_matrix(grid.n, grid.dx)
    m.flags.writeable = False
    return m


@dataclass(frozen=True)
class ExtendedParams:
    gamma: float
    a_R: float = 0.0
    a_I: float = 0.0
    g: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "a_R", "a_I", "g"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.a_I > -LOSS_WIDTH:
            raise ValueError(f"a_I must exceed -{LOSS_WIDTH}")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")

    def replace(self, **changes) -> "ExtendedParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Wavefunction1D:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("wave function has non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.grid.dx)

    def inner(self, other: "Wavefunction1D") -> complex:
        """<self, other> = sum conj(self) other dx."""
        return complex(np.sum(self.values.conj() * other.values) * self.grid.dx)

    def edge_ratio(self) -> float:
        a = np.abs(self.values)
        peak = a.max()
        return float(max(a[0], a[-1]) / peak) if peak > 0 else 0.0

    def check_edges(self, tol: float = EDGE_TOL) -> None:
        r = self.edge_ratio()
        if r > tol:
            raise BoxTooSmallError(f"edge amplitude {r:.2e} of the maximum exceeds {tol:.0e}; enlarge the box")

    def scaled(self, factor: complex) -> "Wavefunction1D":
        return Wavefunction1D(self.grid, self.values * factor)


# ---------------------------------------------------------------------------
# potential


def potential_parts(grid: Grid1D, params: ExtendedParams):
    """``(V_real, w)`` with ``V = V_real + i gamma w``."""
    x = grid.x
    left = x <= 0
    barrier = np.where(left, 4 * np.exp(-x ** 2 / 2), 4 * np.exp(-(0.5 + params.a_R) * x ** 2))
    v_real = x ** 2 / 4 + barrier
    w = np.where(left, -x * np.exp(-LOSS_WIDTH * x ** 2), -x * np.exp(-(LOSS_WIDTH + params.a_I) * x ** 2))
    return v_real, w


def build_potential(grid: Grid1D, params: ExtendedParams) -> np.ndarray:
    v_real, w = potential_parts(grid, params)
    return v_real + 1j * params.gamma * w


def linear_hamiltonian(grid: Grid1D, params: ExtendedParams) -> np.ndarray:
    h = _kinetic(grid).astype(complex)
    h[np.diag_indices(grid.n)] += build_potential(grid, params)
    return h


def linear_states(grid: Grid1D, params: ExtendedParams, count: int = 2):
    """Lowest ``count`` eigenpairs of the g = 0 operator, ordered by Re mu.

    Returns ``(mus, states)``; states are unit-norm, gauged like stationary states.
    """
    dec = eig_dense(linear_hamiltonian(grid, params))
    order = np.argsort(dec.eigenvalues.real, kind="stable")[:count]
    states = []
    for j in order:
        v = dec.eigenvectors[:, j]
        states.append(_gauged(Wavefunction1D(grid, v / math.sqrt(grid.dx))))
    return dec.eigenvalues[order], states


def linear_crossing(grid: Grid1D, params: ExtendedParams, bracket=(1e-4, 0.1)) -> float:
    """gamma at which the linear ground-state eigenvalue becomes real."""
    def im_ground(gamma):
        mus, _ = linear_states(grid, params.replace(gamma=gamma), count=1)
        return mus[0].imag

    lo, hi = bracket
    if im_ground(lo) * im_ground(hi) > 0:
        raise NumericalError(f"Im mu_ground has no sign change in {bracket}")
    return brentq(im_ground, lo, hi, xtol=1e-12)


# ---------------------------------------------------------------------------
# stationary states


def _gauge_index(psi: np.ndarray, grid: Grid1D) -> int:
    dens = np.where(grid.x <= 0, np.abs(psi) ** 2, -1.0)
    return int(np.argmax(dens))


def _gauged(psi: Wavefunction1D) -> Wavefunction1D:
    j0 = _gauge_index(psi.values, psi.grid)
    ref = psi.values[j0]
    values = psi.values * (abs(ref) / ref if ref != 0 else 1.0)
    values[j0] = abs(ref)
    return Wavefunction1D(psi.grid, values)


@dataclass(frozen=True, eq=False)
class ExtendedStationary:
    psi: Wavefunction1D
    mu: float
    params: ExtendedParams

    @property
    def norm(self) -> float:
        return self.psi.norm

    @property
    def grid(self) -> Grid1D:
        return self.psi.grid

    def gpe_residual(self) -> np.ndarray:
        p = self.psi.values
        h = _kinetic(self.grid) @ p + (build_potential(self.grid, self.params) + self.params.g * np.abs(p) ** 2) * p
        return h - self.mu * p

    @property
    def residual(self) -> float:
        """max |GPE residual| relative to max |psi|."""
        return float(np.max(np.abs(self.gpe_residual())) / np.max(np.abs(self.psi.values)))


def _split(u, n):
    return u[:n], u[n:2 * n]


def _gpe_real(a, b, mu, v_real, v_imag, g, kin):
    r2 = a * a + b * b
    diag = v_real - mu + g * r2
    return (kin @ a + diag * a - v_imag * b,
            kin @ b + diag * b + v_imag * a)


def _gpe_jacobian_block(a, b, mu, v_real, v_imag, g, kin):
    n = a.size
    jac = np.empty((2 * n, 2 * n))
    jac[:n, :n] = kin
    jac[:n, n:] = 0
    jac[n:, :n] = 0
    jac[n:, n:] = kin
    idx = np.arange(n)
    jac[idx, idx] += v_real - mu + g * (3 * a * a + b * b)
    jac[idx, n + idx] += -v_imag + 2 * g * a * b
    jac[n + idx, idx] += v_imag + 2 * g * a * b
    jac[n + idx, n + idx] += v_real - mu + g * (a * a + 3 * b * b)
    return jac


def stationary_extended(params: ExtendedParams, guess: Wavefunction1D, mu_guess: float,
                        config: NewtonConfig = _NEWTON, edge_tol: float = EDGE_TOL,
                        norm: Optional[float] = None, mu_imag_tol: float = 1e-9) -> ExtendedStationary:
    """Stationary state with real chemical potential at fixed gamma.

    Unknowns ``(Re psi, Im psi, mu)``; the extra equation pins the phase at
    the gain-side density maximum of the guess. The norm is an output.

    Where real-mu states come in a family parameterised by the norm (the
    balanced case, or g = 0) the fixed-gamma problem is degenerate. Passing
    ``norm`` then selects a member: ``Im mu`` becomes an unknown, the norm
    an equation, and the result is rejected unless ``|Im mu| <= mu_imag_tol``.
    """
    grid = guess.grid
    n = grid.n
    dx = grid.dx
    guess = _gauged(guess)
    j0 = _gauge_index(guess.values, grid)
    kin = _kinetic(grid)
    v_real, w = potential_parts(grid, params)
    v_imag = params.gamma * w
    g = params.g
    free = norm is not None

    def residual(u):
        a, b = _split(u, n)
        mu_i = u[2 * n + 1] if free else 0.0
        # a complex mu adds -mu_i * i psi to the real/imaginary parts
        ra, rb = _gpe_real(a, b, u[2 * n], v_real, v_imag, g, kin)
        extra = [b[j0]]
        if free:
            ra, rb = ra + mu_i * b, rb - mu_i * a
            extra.append(np.sum(a * a + b * b) * dx - norm ** 2)
        return np.concatenate([ra, rb, extra])

    def jacobian(u):
        a, b = _split(u, n)
        size = 2 * n + (2 if free else 1)
        jac = np.zeros((size, size))
        jac[:2 * n, :2 * n] = _gpe_jacobian_block(a, b, u[2 * n], v_real, v_imag, g, kin)
        jac[:n, 2 * n] = -a
        jac[n:2 * n, 2 * n] = -b
        jac[2 * n, n + j0] = 1
        if free:
            mu_i = u[2 * n + 1]
            idx = np.arange(n)
            jac[idx, n + idx] += mu_i
            jac[n + idx, idx] -= mu_i
            jac[:n, 2 * n + 1] = b
            jac[n:2 * n, 2 * n + 1] = -a
            jac[2 * n + 1, :n] = 2 * a * dx
            jac[2 * n + 1, n:2 * n] = 2 * b * dx
        return jac

    if free:
        if not norm > 0:
            raise ValueError("norm must be positive")
        guess = guess.scaled(norm / guess.norm)
    u0 = np.concatenate([guess.values.real, guess.values.imag, [mu_guess] + ([0.0] if free else [])])
    res = newton_solve(residual, u0, config, jacobian)
    if free and abs(res.x[2 * n + 1]) > mu_imag_tol:
        raise NumericalError(f"no real-mu state of norm {norm}: Im mu = {res.x[2 * n + 1]:.3e}")
    a, b = _split(res.x, n)
    psi = _gauged(Wavefunction1D(grid, a + 1j * b))
    psi.check_edges(edge_tol)
    return ExtendedStationary(psi, float(res.x[2 * n]), params)


def _solve_at_norm(params: ExtendedParams, guess: Wavefunction1D, mu_guess: float, gamma_guess: float,
                   norm: float, config: NewtonConfig):
    """Stationary state of prescribed norm with gamma as an unknown."""
    grid = guess.grid
    n = grid.n
    dx = grid.dx
    guess = _gauged(guess)
    j0 = _gauge_index(guess.values, grid)
    kin = _kinetic(grid)
    v_real, w = potential_parts(grid, params)
    g = params.g

    def residual(u):
        a, b = _split(u, n)
        ra, rb = _gpe_real(a, b, u[2 * n], v_real, u[2 * n + 1] * w, g, kin)
        return np.concatenate([ra, rb, [b[j0], (np.sum(a * a + b * b) * dx - norm ** 2)]])

    def jacobian(u):
        a, b = _split(u, n)
        jac = np.zeros((2 * n + 2, 2 * n + 2))
        jac[:2 * n, :2 * n] = _gpe_jacobian_block(a, b, u[2 * n], v_real, u[2 * n + 1] * w, g, kin)
        jac[:n, 2 * n] = -a
        jac[n:2 * n, 2 * n] = -b
        jac[:n, 2 * n + 1] = -w * b
        jac[n:2 * n, 2 * n + 1] = w * a
        jac[2 * n, n + j0] = 1
        jac[2 * n + 1, :n] = 2 * a * dx
        jac[2 * n + 1, n:2 * n] = 2 * b * dx
        return jac

    u0 = np.concatenate([guess.values.real, guess.values.imag, [mu_guess, gamma_guess]])
    res = newton_solve(residual, u0, config, jacobian)
    a, b = _split(res.x, n)
    gamma = float(res.x[2 * n + 1])
    if gamma < 0:
        raise NumericalError(f"branch reached gamma = {gamma:.3g} < 0 at norm {norm}")
    return ExtendedStationary(_gauged(Wavefunction1D(grid, a + 1j * b)), float(res.x[2 * n]),
                              params.replace(gamma=gamma))


@dataclass(frozen=True, eq=False)
class ExtendedBranch:
    """Stationary states ordered by norm, starting at the linear crossing."""
    states: tuple
    linear_gamma: float

    @property
    def gammas(self) -> np.ndarray:
        return np.array([s.params.gamma for s in self.states])

    @property
    def norms(self) -> np.ndarray:
        return np.array([s.norm for s in self.states])

    @property
    def fold_index(self) -> int:
        """Index of the sample with the largest gamma."""
        return int(np.argmax(self.gammas))

    @property
    def has_fold(self) -> bool:
        i = self.fold_index
        return 0 < i < len(self.states) - 1

    @property
    def fold(self):
        """``(norm, gamma)`` at the fold from a parabola through the three samples around it."""
        if not self.has_fold:
            return None
        i = self.fold_index
        c = np.polyfit(self.norms[i - 1:i + 2], self.gammas[i - 1:i + 2], 2)
        n_f = -c[1] / (2 * c[0])
        return float(n_f), float(np.polyval(c, n_f))

    @property
    def lower(self) -> tuple:
        """States below the fold norm (all states when there is no fold)."""
        if not self.has_fold:
            return self.states
        n_f = self.fold[0]
        return tuple(s for s in self.states if s.norm < n_f)

    @property
    def upper(self) -> tuple:
        if not self.has_fold:
            return ()
        n_f = self.fold[0]
        return tuple(s for s in self.states if s.norm > n_f)


def trace_branch(params: ExtendedParams, grid: Grid1D = Grid1D(), norms: Optional[Sequence[float]] = None,
                 config: NewtonConfig = _NEWTON) -> ExtendedBranch:
    """Follow the nonlinear ground-state branch from the linear crossing.

    The norm is the continuation parameter and gamma an unknown, so the
    fold where the lower and upper branches meet is passed without any
    special treatment. ``params.gamma`` is ignored. Tracing stops at the
    first norm where Newton fails or gamma turns negative.
    """
    if norms is None:
        norms = np.arange(1, 41) * 0.05
    norms = np.asarray(norms, dtype=float)
    if norms.size == 0 or np.any(norms <= 0) or np.any(np.diff(norms) <= 0):
        raise ValueError("norms must be positive and increasing")
    g_lin = linear_crossing(grid, params)
    mus, (ground,) = linear_states(grid, params.replace(gamma=g_lin), count=1)
    prev = [(0.0, ground.values * 0, float(mus[0].real), g_lin)]
    unit = ground.values
    out: List[ExtendedStationary] = []
    for N in norms:
        if len(prev) < 2:
            values, mu, gamma = unit * N, prev[-1][2], prev[-1][3]
        else:
            (n0, v0, m0, g0), (n1, v1, m1, g1) = prev[-2], prev[-1]
            s = (N - n1) / (n1 - n0)
            values, mu, gamma = v1 + s * (v1 - v0), m1 + s * (m1 - m0), g1 + s * (g1 - g0)
        try:
            st = _solve_at_norm(params, Wavefunction1D(grid, values), mu, gamma, N, config)
        except NumericalError:
            break
        out.append(st)
        prev.append((N, st.psi.values, st.mu, st.params.gamma))
    return ExtendedBranch(tuple(out), g_lin)


def states_at_gamma(branch: ExtendedBranch, gamma: float, config: NewtonConfig = _NEWTON):
    """Solve at fixed ``gamma`` on each branch segment that brackets it.

    Returns ``{"lower": state, "upper": state}`` with missing entries when
    gamma lies outside a segment. Guesses interpolate the traced branch.
    """
    out = {}
    params0 = branch.states[0].params if branch.states else None
    lower, upper = branch.lower, branch.upper
    fold = branch.fold
    if lower and upper:
        # let both segments reach across the fold
        lower, upper = lower + upper[:1], lower[-1:] + upper
    for label, seg in (("lower", lower), ("upper", upper)):
        if len(seg) < 2:
            continue
        gs = np.array([s.params.gamma for s in seg])
        hit = np.nonzero((gs[:-1] - gamma) * (gs[1:] - gamma) <= 0)[0]
        if hit.size == 0:
            continue
        i = int(hit[0])
        s0, s1 = seg[i], seg[i + 1]
        t = 0.0 if gs[i + 1] == gs[i] else (gamma - gs[i]) / (gs[i + 1] - gs[i])
        values = (1 - t) * s0.psi.values + t * s1.psi.values
        mu = (1 - t) * s0.mu + t * s1.mu
        try:
            st = stationary_extended(params0.replace(gamma=gamma), Wavefunction1D(s0.grid, values), mu, config)
        except NumericalError:
            continue
        # close to the fold Newton may land on the other segment
        if fold is not None and (st.norm > fold[0]) != (label == "upper"):
            continue
        out[label] = st
    return out


def state_at_norm(branch: ExtendedBranch, norm: float, config: NewtonConfig = _NEWTON) -> ExtendedStationary:
    """Stationary state of exactly ``norm``, seeded from the nearest traced state."""
    if not branch.states:
        raise NumericalError("empty branch")
    if not norm > 0:
        raise ValueError("norm must be positive")
    seed = min(branch.states, key=lambda s: abs(s.norm - norm))
    return _solve_at_norm(seed.params, seed.psi, seed.mu, seed.params.gamma, norm, config)


# ---------------------------------------------------------------------------
# stability


def bdg_extended(stationary: ExtendedStationary, tol: float = 1e-8, deflate: bool = True,
                 residual_tol: float = 1e-8) -> BdGSpectrum:
    """Full BdG spectrum (2n eigenvalues) around ``stationary``.

    ``spectrum.smallest(4)`` gives the four eigenvalues with the smallest
    |Im w|; with ``deflate`` the phase mode is split off exactly.
    """
    if stationary.residual > residual_tol:
        raise ValueError(f"input is not stationary (relative residual {stationary.residual:.2e})")
    grid = stationary.grid
    psi = stationary.psi.values
    m = bdg_block_matrix(linear_hamiltonian(grid, stationary.params), psi, stationary.mu, stationary.params.g)
    return spectrum_from_matrix(m, tol, phase_mode(psi) if deflate else None)


# ---------------------------------------------------------------------------
# dynamics


@dataclass
class ExtendedTrajectory:
    times: np.ndarray
    snapshots: np.ndarray  # (len(times), n)
    grid: Grid1D
    params: ExtendedParams
    diverged: bool = False
    divergence_time: Optional[float] = None

    @property
    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.snapshots) ** 2, axis=1) * self.grid.dx)

    def wavefunction(self, i: int) -> Wavefunction1D:
        return Wavefunction1D(self.grid, self.snapshots[i])


def norm_rate_extended(psi: Wavefunction1D, params: ExtendedParams) -> float:
    """d(norm^2)/dt = 2 sum Im V |psi|^2 dx."""
    v = build_potential(psi.grid, params)
    return float(2 * np.sum(v.imag * np.abs(psi.values) ** 2) * psi.grid.dx)


def evolve_extended(initial: Wavefunction1D, params: ExtendedParams, t_final: float, dt: float,
                    stride: int = 1, edge_tol: Optional[float] = 1e-3) -> ExtendedTrajectory:
    """Strang split-step evolution (potential half step, kinetic step, potential half step).

    Snapshots every ``stride`` steps plus the final state. A non-finite
    state ends the run with ``diverged=True``. With ``edge_tol`` set,
    every snapshot is checked against the box edges; the default is looser
    than for stationary states because any non-stationary start radiates a
    little (~1e-5 relative) towards the edges.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if t_final < 0:
        raise ValueError("t_final must be >= 0")
    grid = initial.grid
    if edge_tol is not None:
        initial.check_edges(edge_tol)
    v = build_potential(grid, params)
    g = params.g
    kinetic = np.exp(-1j * grid.k ** 2 * dt)
    steps = int(np.ceil(t_final / dt - 1e-9))
    psi = initial.values.copy()
    times = [0.0]
    snaps = [psi.copy()]
    diverged, t_div = False, None
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(1, steps + 1):
            psi = psi * np.exp(-0.5j * dt * (v + g * np.abs(psi) ** 2))
            psi = np.fft.ifft(kinetic * np.fft.fft(psi))
            psi = psi * np.exp(-0.5j * dt * (v + g * np.abs(psi) ** 2))
            t = s * dt
            if not np.all(np.isfinite(psi)):
                diverged, t_div = True, t
                break
            if s % stride == 0 or s == steps:
                if edge_tol is not None:
                    Wavefunction1D(grid, psi).check_edges(edge_tol)
                times.append(t)
                snaps.append(psi.copy())
    return ExtendedTrajectory(np.array(times), np.array(snaps), grid, params, diverged, t_div)


# ---------------------------------------------------------------------------
# two-dimensional projection


@dataclass(frozen=True, eq=False)
class BlochBasis:
    e1: Wavefunction1D
    e2: Wavefunction1D
    alpha: float


def gram_schmidt_basis(psi_g: Wavefunction1D, psi_e: Wavefunction1D) -> BlochBasis:
    """``e1 = psi_g/|psi_g|``, ``e2 = alpha (psi_e - <e1,psi_e> e1)``."""
    e1 = psi_g.scaled(1 / psi_g.norm)
    rest = Wavefunction1D(psi_e.grid, psi_e.values - e1.inner(psi_e) * e1.values)
    r = rest.norm
    if r <= 1e-8 * max(psi_e.norm, 1e-300):
        raise NearParallelError("psi_e is (numerically) parallel to psi_g")
    alpha = 1 / r
    return BlochBasis(e1, rest.scaled(alpha), alpha)


def bloch_project(psi: Wavefunction1D, basis: BlochBasis):
    """``(BlochPoint, residual)`` with residual = |psi - c1 e1 - c2 e2| / |psi|."""
    c1 = basis.e1.inner(psi)
    c2 = basis.e2.inner(psi)
    rest = psi.values - c1 * basis.e1.values - c2 * basis.e2.values
    nrm = psi.norm
    residual = math.sqrt(float(np.sum(np.abs(rest) ** 2)) * psi.grid.dx) / nrm if nrm > 0 else 0.0
    return bloch_from_state(TwoModeState(c1, c2)), residual


def project_trajectory(traj: ExtendedTrajectory, basis: BlochBasis):
    """Arrays ``(R, theta, phi, residual)`` along a trajectory."""
    out = np.empty((len(traj.times), 4))
    for i in range(len(traj.times)):
        p, r = bloch_project(traj.wavefunction(i), basis)
        out[i] = (p.R, p.theta, p.phi, r)
    return out.T
