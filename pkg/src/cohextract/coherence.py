"""Coherence quantifiers and certificates for energy-conserving, incoherent maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError
from .hilbert import diagonal_of, as_square_matrix, basis_density, dephase

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class CoherenceReport:
    """l1 coherence split into the part inside degenerate eigenspaces (free) and the rest."""

    total: float
    free: float
    useful: float


def l1_coherence(rho) -> float:
    """Sum of the moduli of the off-diagonal entries in the energy basis."""
    m = as_square_matrix(rho)
    a = np.abs(m)
    return float(a.sum() - np.trace(a))


def coherence_split(rho, h) -> CoherenceReport:
    total = l1_coherence(rho)
    free = l1_coherence(dephase(rho, h))
    return CoherenceReport(total, free, total - free)


def commutator_defect(a, b) -> float:
    """Largest entry modulus of ``[a, b]``; ``b`` may be given as its diagonal."""
    a = as_square_matrix(a)
    b = np.asarray(b)
    if b.ndim == 1:
        comm = a * (b[None, :] - b[:, None])
    else:
        comm = a @ b - b @ a
    return float(np.max(np.abs(comm)))


def unitarity_defect(v) -> float:
    """Largest entry modulus of ``V^dagger V - I``."""
    v = as_square_matrix(v)
    return float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[0]))))


def is_incoherent(rho, a, tol: float = DEFAULT_TOL) -> bool:
    """True iff ``rho`` commutes with the diagonal observable ``a``."""
    rho = as_square_matrix(rho)
    e = diagonal_of(a)
    if e.shape[0] != rho.shape[0]:
        raise InvalidDimensionError(f"observable size {e.shape[0]} != state size {rho.shape[0]}")
    return commutator_defect(rho, e) <= tol


def check_energy_conserving(v, h_tot, tol: float = DEFAULT_TOL, commutator_tol: float | None = None) -> bool:
    """True iff ``v`` is unitary and commutes with ``h_tot`` (both within tolerance)."""
    v = as_square_matrix(v)
    e = diagonal_of(h_tot)
    if e.shape[0] != v.shape[0]:
        raise InvalidDimensionError(f"Hamiltonian size {e.shape[0]} != operator size {v.shape[0]}")
    ctol = tol if commutator_tol is None else commutator_tol
    return unitarity_defect(v) <= tol and commutator_defect(v, e) <= ctol


def check_basis_permutation(v, tol: float = DEFAULT_TOL) -> bool:
    """True iff every column of ``v`` is a basis vector up to a phase.

    Together with energy conservation this certifies that the map sends every
    free (block-dephased) state to a free state, i.e. it has zero cohering power.
    """
    a = np.abs(as_square_matrix(v))
    near_one = np.abs(a - 1.0) <= tol
    near_zero = a <= tol
    return bool(np.all(near_one.sum(axis=0) == 1) and np.all(near_one | near_zero))


def created_free_coherence(v, h_tot, inputs=None) -> float:
    """Largest free coherence ``v`` creates from a single incoherent basis input.

    ``inputs`` restricts the basis columns considered (default: all).  For a
    pure output ``v|b>`` the free part is computed blockwise from amplitudes.
    """
    v = as_square_matrix(v)
    e = diagonal_of(h_tot)
    cols = np.arange(v.shape[1]) if inputs is None else np.asarray(list(inputs), dtype=int)
    if cols.size == 0:
        return 0.0
    amp = np.abs(v[:, cols])
    _, block_of = np.unique(e, return_inverse=True)
    block_sums = np.zeros((block_of.max() + 1, amp.shape[1]))
    np.add.at(block_sums, block_of, amp)
    free = (block_sums**2).sum(axis=0) - (amp**2).sum(axis=0)
    return float(max(free.max(), 0.0))


def qubit_channel_cohering_power(channel) -> float:
    """Cohering power of a qubit channel under ``H = diag(0, 1)``.

    ``channel`` maps a 2x2 density matrix to a density matrix.  The l1 norm is
    convex and a channel is affine, so the maximum over incoherent inputs is
    reached at ``|0><0|`` or ``|1><1|``.
    """
    return max(l1_coherence(channel(basis_density(2, i))) for i in (0, 1))
