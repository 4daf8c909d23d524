"""Finite-dimensional states and operators on truncated energy ladders.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Composite
systems use the system-major Kronecker convention: the basis state
``|i> (x) |n>`` of an ``A (x) B`` space sits at index ``i * dim(B) + n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from .errors import (
    InvalidArgumentError,
    InvalidDimensionError,
    InvalidStateError,
    TruncationError,
)

ComplexMatrix = np.ndarray
DensityOperator = np.ndarray

DEFAULT_TAIL_TOLERANCE = 1e-12
DEFAULT_TRUNCATION = 128


def as_matrix(a) -> ComplexMatrix:
    """Return ``a`` as a finite 2-D complex array, raising on bad input."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidDimensionError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError("matrix has non-finite entries")
    return m


def as_square_matrix(a) -> ComplexMatrix:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise InvalidDimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def density_violations(rho, trace=1.0, herm_tol=1e-10, trace_tol=1e-10, psd_tol=1e-9):
    """List the density-operator invariants that ``rho`` breaks (empty if none)."""
    m = as_square_matrix(rho)
    problems = []
    herm = np.max(np.abs(m - m.conj().T))
    if herm > herm_tol:
        problems.append(f"not Hermitian (max deviation {herm:.3g})")
    tr = np.trace(m).real
    if abs(tr - trace) > trace_tol:
        problems.append(f"trace {tr:.15g} differs from {trace:.15g}")
    if herm <= herm_tol:
        lo = np.linalg.eigvalsh((m + m.conj().T) / 2)[0]
        if lo < -psd_tol:
            problems.append(f"not positive semidefinite (min eigenvalue {lo:.3g})")
    return problems


def validate_density(rho, trace=1.0, **tols) -> DensityOperator:
    """Return ``rho`` as a complex matrix, or raise :class:`InvalidStateError`."""
    problems = density_violations(rho, trace=trace, **tols)
    if problems:
        raise InvalidStateError("; ".join(problems))
    return as_matrix(rho)


def ket_to_density(psi) -> DensityOperator:
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    return np.outer(psi, psi.conj())


def basis_density(dim: int, n: int) -> DensityOperator:
    """``|n><n|`` on a ``dim``-level space."""
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[n, n] = 1.0
    return rho


@dataclass(frozen=True)
class LadderSpec:
    """Equally spaced energy ladder with ``levels`` levels."""

    levels: int
    spacing: float = 1.0

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 2:
            raise InvalidDimensionError(f"a ladder needs at least 2 levels, got {self.levels}")
        if not self.spacing > 0 or not math.isfinite(self.spacing):
            raise InvalidArgumentError(f"level spacing must be positive, got {self.spacing}")

    def energies(self) -> np.ndarray:
        return self.spacing * np.arange(self.levels, dtype=float)

    def hamiltonian(self) -> ComplexMatrix:
        return ladder_hamiltonian(self)


def ladder_hamiltonian(spec: LadderSpec) -> ComplexMatrix:
    return np.diag(spec.energies()).astype(np.complex128)


def shift_power(dim: int, k: int) -> ComplexMatrix:
    """``Delta**k``: maps ``|n>`` to ``|n+k>``, annihilating levels pushed past the top."""
    if dim < 2:
        raise InvalidDimensionError(f"shift operator needs dim >= 2, got {dim}")
    if k < 0:
        raise InvalidArgumentError("shift power must be non-negative")
    return np.eye(dim, k=-k, dtype=np.complex128)


def shift_operator(dim: int) -> ComplexMatrix:
    """Raising operator ``Delta = sum_n |n+1><n|`` truncated to ``dim`` levels."""
    return shift_power(dim, 1)


def _shift_diagonal(p: np.ndarray, k: int) -> np.ndarray:
    # diagonal of Delta^k diag(p) Delta^dagger^k
    out = np.zeros_like(p)
    if k < len(p):
        out[k:] = p[: len(p) - k]
    return out


def multiples_projector(d: int, dim: int) -> ComplexMatrix:
    """Projector onto the levels whose index is a multiple of ``d``."""
    if d < 1:
        raise InvalidDimensionError(f"d must be >= 1, got {d}")
    if dim < 1 or dim % d:
        raise InvalidDimensionError(f"dimension {dim} is not a multiple of {d}")
    diag = (np.arange(dim) % d == 0).astype(float)
    return np.diag(diag).astype(np.complex128)


def staircase_projector(m: int, d: int, dim: int) -> ComplexMatrix:
    """``sum_{k < d**(m-1)} Delta^k P_{d**m} Delta^dagger^k``.

    Selects the levels ``n`` with ``n mod d**m < d**(m-1)``: the pattern that
    survives ``m`` rounds of strong extraction.
    """
    if m < 1:
        raise InvalidArgumentError(f"round index m must be >= 1, got {m}")
    if d < 1:
        raise InvalidDimensionError(f"d must be >= 1, got {d}")
    block = d**m
    if dim < 1 or dim % block:
        raise InvalidDimensionError(f"dimension {dim} is not a multiple of {d}**{m} = {block}")
    base = np.diag(multiples_projector(block, dim)).real
    diag = np.zeros(dim)
    for k in range(d ** (m - 1)):
        diag += _shift_diagonal(base, k)
    return np.diag(diag).astype(np.complex128)


def tensor_product(a, b) -> ComplexMatrix:
    return np.kron(as_matrix(a), as_matrix(b))


def partial_trace(rho, dim_a: int, dim_b: int, keep: str = "first") -> ComplexMatrix:
    """Trace out one factor of a state on ``A (x) B``.

    ``keep="first"`` returns the reduced state on A, ``keep="second"`` on B.
    """
    m = as_square_matrix(rho)
    if m.shape[0] != dim_a * dim_b:
        raise InvalidDimensionError(
            f"state of dimension {m.shape[0]} does not factor as {dim_a} x {dim_b}"
        )
    t = m.reshape(dim_a, dim_b, dim_a, dim_b)
    if keep == "first":
        return np.einsum("ijkj->ik", t)
    if keep == "second":
        return np.einsum("ijil->jl", t)
    raise InvalidArgumentError(f"keep must be 'first' or 'second', got {keep!r}")


def diagonal_of(h) -> np.ndarray:
    h = np.asarray(h)
    return np.diag(h) if h.ndim == 2 else h


def dephase(rho, h) -> ComplexMatrix:
    """Block-dephase ``rho`` in the eigenspaces of the diagonal Hamiltonian ``h``.

    ``h`` may be the diagonal matrix or its diagonal.  Eigenvalues are grouped
    by exact equality, so coherence between degenerate levels is kept.
    """
    m = as_square_matrix(rho)
    e = diagonal_of(h)
    if e.shape[0] != m.shape[0]:
        raise InvalidDimensionError(f"Hamiltonian size {e.shape[0]} != state size {m.shape[0]}")
    same = e[:, None] == e[None, :]
    return np.where(same, m, 0.0)


def composite_energies(system_levels: int, reservoir_levels: int, system_gap: int = 1) -> np.ndarray:
    """Integer energies of ``gap * H_S (x) I + I (x) H_R`` in units of the ladder spacing.

    Integer arithmetic keeps degenerate levels exactly equal.
    """
    i = np.arange(system_levels)[:, None]
    n = np.arange(reservoir_levels)[None, :]
    return (system_gap * i + n).ravel()


def composite_hamiltonian(system_levels: int, reservoir: LadderSpec, system_gap: int = 1) -> ComplexMatrix:
    e = composite_energies(system_levels, reservoir.levels, system_gap)
    return np.diag(reservoir.spacing * e.astype(float)).astype(np.complex128)


def pad_to_multiple(rho, k: int) -> ComplexMatrix:
    """Zero-pad ``rho`` at the top of the ladder so its dimension is a multiple of ``k``."""
    m = as_square_matrix(rho)
    dim = m.shape[0]
    target = -(-dim // k) * k
    if target == dim:
        return m
    out = np.zeros((target, target), dtype=np.complex128)
    out[:dim, :dim] = m
    return out


# --- harmonic-oscillator reservoir states -----------------------------------


def _tail_sum(log_term, n0: int, ratio_bound) -> float:
    """Sum ``exp(log_term(n))`` for ``n >= n0`` of a series with decreasing terms.

    ``ratio_bound(n)`` must bound every ratio ``t(j+1)/t(j)`` for ``j >= n``;
    summation stops once the geometric remainder is negligible.
    """
    total = 0.0
    n = n0
    chunk = 64
    while True:
        idx = np.arange(n, n + chunk)
        terms = np.exp(log_term(idx))
        total += float(np.sum(terms))
        n += chunk
        last = float(terms[-1])
        q = ratio_bound(n)
        if q < 1:
            rest = last * q / (1 - q)
            if rest <= 1e-6 * total or rest < 1e-300:
                return total + rest
        chunk = min(chunk * 2, 1 << 20)


def _coherent_log_probs(x: float, n: np.ndarray) -> np.ndarray:
    return -x + n * math.log(x) - gammaln(n + 1.0)


def coherent_tail_mass(amp: float, dim: int) -> float:
    """Probability a coherent state puts on levels ``>= dim`` (Poisson tail)."""
    x = float(amp) ** 2
    if x == 0:
        return 0.0
    if dim <= x + 1:
        n = np.arange(dim)
        return max(0.0, 1.0 - float(np.sum(np.exp(_coherent_log_probs(x, n)))))
    return _tail_sum(lambda n: _coherent_log_probs(x, n), dim, lambda n: x / (n + 1))


def _squeezed_log_probs(r: float, n: np.ndarray) -> np.ndarray:
    # population of level 2n: tanh(r)^(2n) * C(2n, n) / 4^n / cosh(r)
    t2 = math.tanh(r) ** 2
    log_central = gammaln(2 * n + 1.0) - 2 * gammaln(n + 1.0) - 2 * n * math.log(2)
    return n * math.log(t2) + log_central - math.log(math.cosh(r))


def squeezed_tail_mass(r: float, dim: int) -> float:
    """Probability a squeezed vacuum puts on levels ``>= dim``."""
    if r == 0:
        return 0.0
    t2 = math.tanh(r) ** 2
    n0 = (dim + 1) // 2
    return _tail_sum(lambda n: _squeezed_log_probs(r, n), n0, lambda n: t2)


def _check_tail(tail: float, tol: float, what: str, required=None):
    if tail > tol:
        raise TruncationError(
            f"{what}: discarded tail mass {tail:.3g} exceeds tolerance {tol:.3g}", required=required
        )


def coherent_state(amp: float, phase: float, dim: int, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE):
    """Truncated, renormalized coherent state.

    Returns ``(psi, tail)`` where ``tail`` is the probability that lay on the
    discarded levels before renormalization.
    """
    if amp < 0:
        raise InvalidArgumentError(f"amplitude must be non-negative, got {amp}")
    if dim < 1:
        raise InvalidDimensionError(f"dim must be >= 1, got {dim}")
    psi = np.zeros(dim, dtype=np.complex128)
    if amp == 0:
        psi[0] = 1.0
        return psi, 0.0
    tail = coherent_tail_mass(amp, dim)
    _check_tail(tail, tail_tolerance, f"coherent state |a|={amp} on {dim} levels")
    n = np.arange(dim)
    psi = np.exp(0.5 * _coherent_log_probs(amp**2, n) + 1j * phase * n)
    return psi / np.linalg.norm(psi), tail


def squeezed_vacuum_state(r: float, phase: float, dim: int, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE):
    """Truncated, renormalized single-mode squeezed vacuum; only even levels are populated."""
    if r < 0:
        raise InvalidArgumentError(f"squeezing must be non-negative, got {r}")
    if dim < 1:
        raise InvalidDimensionError(f"dim must be >= 1, got {dim}")
    psi = np.zeros(dim, dtype=np.complex128)
    if r == 0:
        psi[0] = 1.0
        return psi, 0.0
    tail = squeezed_tail_mass(r, dim)
    _check_tail(tail, tail_tolerance, f"squeezed vacuum r={r} on {dim} levels")
    n = np.arange((dim + 1) // 2)
    sign = np.where(n % 2 == 0, 1.0, -1.0)
    psi[0::2] = sign * np.exp(0.5 * _squeezed_log_probs(r, n) + 1j * phase * n)
    return psi / np.linalg.norm(psi), tail


def _min_dim(tail_fn, tol: float, start: int = 1) -> int:
    lo, hi = start, max(start, 2)
    while tail_fn(hi) > tol:
        lo, hi = hi, hi * 2
    # tail_fn is non-increasing: bisect for the first dim that passes
    while lo < hi:
        mid = (lo + hi) // 2
        if tail_fn(mid) <= tol:
            hi = mid
        else:
            lo = mid + 1
    return hi


def random_density_matrix(dim: int, rng: np.random.Generator, rank=None, support=None) -> DensityOperator:
    """Random mixed state; ``support`` restricts it to the lowest ``support`` levels."""
    support = dim if support is None else support
    rank = support if rank is None else rank
    g = rng.normal(size=(support, rank)) + 1j * rng.normal(size=(support, rank))
    small = g @ g.conj().T
    small /= np.trace(small).real
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[:support, :support] = small
    return (rho + rho.conj().T) / 2


# --- reservoir description ---------------------------------------------------


@dataclass(frozen=True)
class PreparedReservoir:
    """A reservoir density matrix ready for the protocols, plus truncation bookkeeping."""

    state: DensityOperator = field(repr=False)
    ladder: LadderSpec
    tail_mass: float
    truncation: int


@dataclass(frozen=True)
class ReservoirSpec:
    """Declarative reservoir: a coherent state, a squeezed vacuum, or an explicit matrix.

    ``param`` is ``|a|`` for coherent states and ``r`` for squeezed ones.
    ``truncation`` counts levels of the physical oscillator.  A squeezed vacuum
    only occupies even levels, so it is handed to the protocols as its
    even-level subladder (level ``2n`` becomes ``n``, spacing 2).
    """

    kind: str
    param: float = 0.0
    phase: float = 0.0
    truncation: int = DEFAULT_TRUNCATION
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)
    spacing: float = 1.0

    def __post_init__(self):
        if self.kind not in ("coherent", "squeezed", "explicit"):
            raise InvalidArgumentError(f"unknown reservoir kind {self.kind!r}")
        if self.kind == "explicit":
            if self.matrix is None:
                raise InvalidArgumentError("explicit reservoir needs a matrix")
            m = validate_density(self.matrix)
            object.__setattr__(self, "matrix", m)
            object.__setattr__(self, "truncation", m.shape[0])
        elif self.param < 0 or not math.isfinite(self.param):
            raise InvalidArgumentError(f"reservoir parameter must be finite and >= 0, got {self.param}")
        if self.truncation < 2:
            raise InvalidDimensionError(f"truncation must be >= 2, got {self.truncation}")

    @classmethod
    def coherent(cls, amp, phase=0.0, **kw):
        return cls("coherent", float(amp), float(phase), **kw)

    @classmethod
    def squeezed(cls, r, phase=0.0, **kw):
        return cls("squeezed", float(r), float(phase), **kw)

    @classmethod
    def explicit(cls, matrix, spacing=1.0):
        return cls("explicit", matrix=matrix, spacing=spacing)

    def tail_mass(self, truncation=None) -> float:
        dim = self.truncation if truncation is None else truncation
        if self.kind == "coherent":
            return coherent_tail_mass(self.param, dim)
        if self.kind == "squeezed":
            return squeezed_tail_mass(self.param, dim)
        return 0.0

    def minimum_truncation(self) -> int:
        """Smallest truncation whose discarded tail is within ``tail_tolerance``."""
        if self.kind == "explicit":
            return self.truncation
        return max(2, _min_dim(self.tail_mass, self.tail_tolerance))

    def with_sufficient_truncation(self) -> "ReservoirSpec":
        """Copy with ``truncation`` raised (never lowered) until the tail fits."""
        need = self.minimum_truncation()
        return self if need <= self.truncation else replace(self, truncation=need)

    def prepare(self) -> PreparedReservoir:
        if self.kind == "explicit":
            return PreparedReservoir(self.matrix, LadderSpec(self.truncation, self.spacing), 0.0, self.truncation)
        tail = self.tail_mass()
        if tail > self.tail_tolerance:
            raise TruncationError(
                f"{self.kind} reservoir (param={self.param}) truncated at {self.truncation} levels "
                f"discards {tail:.3g} > {self.tail_tolerance:.3g}; need at least "
                f"{self.minimum_truncation()} levels",
                required=self.minimum_truncation(),
            )
        if self.kind == "coherent":
            psi, _ = coherent_state(self.param, self.phase, self.truncation, math.inf)
            ladder = LadderSpec(self.truncation, 1.0)
        else:
            full, _ = squeezed_vacuum_state(self.param, self.phase, self.truncation, math.inf)
            psi = full[0::2]
            if len(psi) < 2:
                psi = np.append(psi, 0.0)
            ladder = LadderSpec(len(psi), 2.0)
        return PreparedReservoir(ket_to_density(psi), ladder, tail, self.truncation)
