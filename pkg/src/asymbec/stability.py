"""Bogoliubov-de Gennes linearisation shared by the two-mode and grid models.

Perturbations are written as ``psi0 + u exp(-i w t) + conj(v) exp(i conj(w) t)``
so a positive imaginary part of ``w`` means growth.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import eig_dense

STABLE = "stable"
ATTRACTOR = "attractor"
UNSTABLE = "unstable"


def bdg_block_matrix(h_lin: np.ndarray, psi: np.ndarray, mu: complex, interaction: float) -> np.ndarray:
    """``[[A, B], [-B*, -A*]]`` with ``A = H + 2U|psi|^2 - mu`` and ``B = U psi^2``."""
    psi = np.asarray(psi, dtype=complex)
    n = psi.size
    a = np.array(h_lin, dtype=complex)
    a[np.diag_indices(n)] += 2 * interaction * np.abs(psi) ** 2 - mu
    b = np.diag(interaction * psi ** 2)
    return np.block([[a, b], [-b.conj(), -a.conj()]])


@dataclass(frozen=True)
class BdGSpectrum:
    omegas: np.ndarray
    classification: str
    tol: float = 1e-8

    @property
    def trivial_index(self) -> int:
        return int(np.argmin(np.abs(self.omegas)))

    @property
    def trivial(self) -> complex:
        return complex(self.omegas[self.trivial_index])

    @property
    def nontrivial(self) -> np.ndarray:
        return np.delete(self.omegas, self.trivial_index)

    def smallest(self, count: int = 4, key: str = "abs_imag") -> np.ndarray:
        """``count`` eigenvalues with the smallest |Im w| (or |w| with ``key='abs'``)."""
        if key == "abs_imag":
            weight = np.abs(self.omegas.imag)
        elif key == "abs":
            weight = np.abs(self.omegas)
        else:
            raise ValueError(f"unknown key {key!r}")
        order = np.lexsort((self.omegas.real, np.abs(self.omegas), weight))
        return self.omegas[order[:count]]

    def norm_mode(self) -> complex:
        """Smallest nontrivial eigenvalue by modulus.

        Along a branch that starts at zero norm this is the perturbation of
        the particle number; it vanishes with the norm.
        """
        rest = self.nontrivial
        return complex(rest[np.argmin(np.abs(rest))])

    def oscillation_mode(self) -> complex:
        """Smallest-modulus nontrivial eigenvalue with a nonzero real part."""
        rest = self.nontrivial
        rest = rest[np.abs(rest.real) > 1e3 * self.tol]
        if rest.size == 0:
            raise ValueError("spectrum has no oscillating mode")
        return complex(rest[np.argmin(np.abs(rest))])

    def closure_error(self) -> float:
        """max over w of the distance from -conj(w) to the spectrum."""
        mirrored = -self.omegas.conj()
        dist = np.abs(mirrored[:, None] - self.omegas[None, :]).min(axis=1)
        return float(dist.max())


def classify(omegas: np.ndarray, tol: float = 1e-8) -> str:
    omegas = np.asarray(omegas)
    rest = np.delete(omegas, np.argmin(np.abs(omegas)))
    if np.any(rest.imag > tol):
        return UNSTABLE
    if np.all(rest.imag < -tol):
        return ATTRACTOR
    return STABLE


def phase_mode(psi: np.ndarray) -> np.ndarray:
    """Exact null vector ``(psi, -conj(psi))`` generated by the global phase."""
    psi = np.asarray(psi, dtype=complex)
    return np.concatenate([psi, -psi.conj()])


def deflate(matrix: np.ndarray, null_vector: np.ndarray) -> np.ndarray:
    """Matrix whose spectrum is that of ``matrix`` with the eigenvalue 0 of ``null_vector`` removed.

    A Householder reflection ``Q`` maps ``null_vector`` onto the first unit
    vector, so ``Q M Q`` has a zero first column and the trailing block
    carries the rest of the spectrum. At the Hermitian point the phase mode
    sits in a Jordan block with the norm mode and an undeflated
    eigensolver only resolves it to ~sqrt(machine eps).
    """
    z = np.asarray(null_vector, dtype=complex)
    z = z / np.linalg.norm(z)
    alpha = -np.exp(1j * np.angle(z[0])) if z[0] != 0 else -1.0
    w = z.copy()
    w[0] -= alpha
    w /= np.linalg.norm(w)
    m = np.asarray(matrix, dtype=complex)
    # Q = I - 2 w w^H is Hermitian and unitary
    mq = m - 2 * np.outer(m @ w, w.conj())
    qmq = mq - 2 * np.outer(w, w.conj() @ mq)
    return qmq[1:, 1:]


def spectrum_from_matrix(matrix: np.ndarray, tol: float = 1e-8,
                         null_vector: np.ndarray | None = None) -> BdGSpectrum:
    """BdG spectrum; with ``null_vector`` the exact zero mode is deflated first."""
    if null_vector is None:
        w = eig_dense(matrix, vectors=False).eigenvalues
    else:
        rest = eig_dense(deflate(matrix, null_vector), vectors=False).eigenvalues
        w = np.concatenate([[0.0], rest])
        w = w[np.lexsort((w.imag, w.real))]
    return BdGSpectrum(w, classify(w, tol), tol)
