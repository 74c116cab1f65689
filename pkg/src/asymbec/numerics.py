"""Numerical kernels shared by the two-mode and extended models.

Dense eigensolver, damped Newton iteration, fixed-step RK4 and Fourier
differentiation. Everything here is a pure function of its arguments.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

MAX_EIG_DIM = 2048


class NumericalError(RuntimeError):
    """Base class for solver failures."""


class EigenConvergenceError(NumericalError):
    pass


class SingularJacobianError(NumericalError):
    """Newton hit a (numerically) singular Jacobian.

    Near a fold or an exceptional point this is expected and callers
    usually treat it as "branch ends here".
    """


class NewtonConvergenceError(NumericalError):
    def __init__(self, message: str, x: np.ndarray, residual_norm: float):
        super().__init__(message)
        self.x = x
        self.residual_norm = residual_norm


class DivergenceError(NumericalError):
    """A time integration produced non-finite values."""

    def __init__(self, message: str, time: float, times=None, states=None):
        super().__init__(message)
        self.time = time
        self.times = times
        self.states = states


# ---------------------------------------------------------------------------
# eigenvalues


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    # column k belongs to eigenvalues[k]; None when only values were requested
    eigenvectors: Optional[np.ndarray] = None

    def residuals(self, matrix: np.ndarray) -> np.ndarray:
        if self.eigenvectors is None:
            raise ValueError("decomposition was computed without eigenvectors")
        m = np.asarray(matrix)
        r = m @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        return np.linalg.norm(r, axis=0)


def sort_eigenvalues(values: np.ndarray) -> np.ndarray:
    """Indices ordering ``values`` by real part, then imaginary part."""
    values = np.asarray(values)
    return np.lexsort((values.imag, values.real))


def eig_dense(matrix, vectors: bool = True) -> EigenDecomposition:
    """Full spectrum of a dense complex matrix.

    Backed by LAPACK's Hessenberg-QR driver (``numpy.linalg.eig``).
    Eigenvalues come back sorted by (real, imag) so that downstream tables
    are reproducible; eigenvectors have unit 2-norm.
    """
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"eig_dense needs a square matrix, got shape {m.shape}")
    if m.shape[0] > MAX_EIG_DIM:
        raise ValueError(f"matrix dimension {m.shape[0]} exceeds cap {MAX_EIG_DIM}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    try:
        if vectors:
            w, v = np.linalg.eig(m)
        else:
            w, v = np.linalg.eigvals(m), None
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(f"QR iteration did not converge: {exc}") from exc
    order = sort_eigenvalues(w)
    w = w[order]
    if v is not None:
        v = v[:, order]
        v = v / np.linalg.norm(v, axis=0)
    return EigenDecomposition(w, v)


# ---------------------------------------------------------------------------
# Newton


@dataclass(frozen=True)
class NewtonConfig:
    max_iterations: int = 50
    residual_tolerance: float = 1e-10
    step_damping: float = 1.0
    # relative finite-difference step, used when no analytic Jacobian is given
    fd_step: float = 1e-6
    # halve the step up to this many times when the residual does not drop
    max_backtracks: int = 8

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.residual_tolerance > 0:
            raise ValueError("residual_tolerance must be positive")
        if not 0 < self.step_damping <= 1:
            raise ValueError("step_damping must lie in (0, 1]")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float


def fd_jacobian(residual: Callable, x: np.ndarray, rel_step: float = 1e-6,
                f0: Optional[np.ndarray] = None) -> np.ndarray:
    """Central-difference Jacobian with step ``rel_step * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    if f0 is None:
        f0 = np.asarray(residual(x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (np.asarray(residual(xp)) - np.asarray(residual(xm))) / (2 * h)
    return jac


def newton_solve(residual: Callable, guess, config: NewtonConfig = NewtonConfig(),
                 jacobian: Optional[Callable] = None) -> NewtonResult:
    """Solve ``residual(x) = 0`` for a real vector ``x``.

    Complex unknowns must be split into real and imaginary parts by the
    caller. On success ``max|residual(x)| <= config.residual_tolerance``.
    """
    x = np.array(guess, dtype=float, ndmin=1)
    if not np.all(np.isfinite(x)):
        raise ValueError("Newton guess is not finite")
    f = np.asarray(residual(x), dtype=float).ravel()
    if f.size != x.size:
        raise ValueError(f"residual has {f.size} components for {x.size} unknowns")
    fnorm = np.max(np.abs(f))
    for it in range(config.max_iterations + 1):
        if fnorm <= config.residual_tolerance:
            return NewtonResult(x, it, float(fnorm))
        if it == config.max_iterations:
            break
        jac = jacobian(x) if jacobian is not None else fd_jacobian(residual, x, config.fd_step, f)
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(f"singular Jacobian at iteration {it}") from exc
        if not np.all(np.isfinite(step)):
            raise SingularJacobianError(f"non-finite Newton step at iteration {it}")
        lam = config.step_damping
        for _ in range(config.max_backtracks + 1):
            x_new = x - lam * step
            f_new = np.asarray(residual(x_new), dtype=float).ravel()
            fnorm_new = np.max(np.abs(f_new))
            if np.isfinite(fnorm_new) and fnorm_new < fnorm:
                break
            lam *= 0.5
        else:
            raise NewtonConvergenceError(
                f"line search failed at iteration {it} (|F|={fnorm:.3e})", x, float(fnorm))
        x, f, fnorm = x_new, f_new, fnorm_new
    raise NewtonConvergenceError(
        f"no convergence in {config.max_iterations} iterations (|F|={fnorm:.3e})", x, float(fnorm))


# ---------------------------------------------------------------------------
# RK4


def rk4_step(derivative: Callable, t: float, y, dt: float):
    k1 = derivative(t, y)
    k2 = derivative(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = derivative(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = derivative(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def n_steps(duration: float, dt: float) -> int:
    """Number of fixed steps covering ``duration``; tolerates round-off in duration/dt."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if duration < 0:
        raise ValueError("t_span must be increasing")
    return int(np.ceil(duration / dt - 1e-9))


def rk4_integrate(derivative: Callable, y0, t_span, dt: float, stride: int = 1,
                  stop: Optional[Callable] = None):
    """Classical fixed-step RK4.

    Returns ``(times, states)`` sampled every ``stride`` steps; the final
    state is always included. The last step is shortened to land exactly
    on ``t_span[1]``. ``stop(t, y)`` may end the run early (the stopping
    state is recorded).
    """
    t0, t1 = map(float, t_span)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    steps = n_steps(t1 - t0, dt)
    y = np.array(y0, dtype=complex)
    times = [t0]
    states = [y.copy()]
    t = t0
    for s in range(1, steps + 1):
        h = min(dt, t1 - t) if s == steps else dt
        y = rk4_step(derivative, t, y, h)
        t = t1 if s == steps else t0 + s * dt
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite state at t={t:.6g}", t,
                                  np.array(times), np.array(states))
        halt = stop is not None and stop(t, y)
        if s % stride == 0 or s == steps or halt:
            times.append(t)
            states.append(y.copy())
        if halt:
            break
    return np.array(times), np.array(states)


# ---------------------------------------------------------------------------
# spectral derivatives


def _check_pow2(n: int) -> None:
    if n < 2 or n & (n - 1):
        raise ValueError(f"grid length must be a power of two, got {n}")


def wavenumbers(n: int, dx: float) -> np.ndarray:
    _check_pow2(n)
    return 2 * np.pi * np.fft.fftfreq(n, d=dx)


def spectral_second_derivative(values, dx: float) -> np.ndarray:
    """d²/dx² of periodic samples by multiplying with -k² in Fourier space."""
    v = np.asarray(values, dtype=complex)
    if not dx > 0:
        raise ValueError("dx must be positive")
    k = wavenumbers(v.size, dx)
    return np.fft.ifft(-(k ** 2) * np.fft.fft(v))


def second_derivative_matrix(n: int, dx: float) -> np.ndarray:
    """Dense real matrix of the spectral second derivative (symmetric circulant)."""
    k = wavenumbers(n, dx)
    col = np.fft.ifft(-(k ** 2)).real
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return col[idx]
