"""Extraction protocols: joint unitaries, single steps, and iterated runs.

Every step is simulated by evolving ``rho_S (x) sigma_R`` with the joint
unitary and taking partial traces.  The ``*_formula`` and ``*_iterated``
functions evaluate the same channels from closed trace expressions instead;
:func:`repeat_extraction` runs both routes and cross-checks them.

Round ``m`` of the strong and d-level protocols uses a register whose levels
are spaced ``g = d**(m-1)`` ladder units apart.  Only its ground and
uniformly-excited states are ever populated, so it is simulated as a single
``d``-level system with that gap (see :func:`embed_register_state` for the
full multi-unit register).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coherence import created_free_coherence, l1_coherence, unitarity_defect
from .errors import (
    ConsistencyError,
    InvalidArgumentError,
    InvalidDimensionError,
    RepetitionLimitError,
    TruncationError,
)
from .hilbert import (
    DEFAULT_TAIL_TOLERANCE,
    ReservoirSpec,
    as_square_matrix,
    basis_density,
    composite_energies,
    multiples_projector,
    pad_to_multiple,
    partial_trace,
    shift_power,
    staircase_projector,
)

PROTOCOLS = ("catalytic", "weak", "strong", "dlevel")
FORMULA_TOL = 1e-8


@dataclass
class StepResult:
    """Outcome of one extraction round."""

    extracted: np.ndarray
    reservoir: np.ndarray
    extracted_l1: float
    injected_free_coherence: float
    energy_cost: float
    trace_leakage: float
    register_gap: int = 1


@dataclass
class RunTrace:
    """Sequence of rounds together with the closed-expression prediction for each."""

    protocol: str
    reservoir_spec: ReservoirSpec | None
    steps: list = field(default_factory=list)
    effective_register_dims: list = field(default_factory=list)
    direct: list = field(default_factory=list)
    max_repetitions: int | None = None

    @property
    def extracted_l1(self):
        return [s.extracted_l1 for s in self.steps]

    def formula_deviation(self) -> float:
        """Largest entrywise gap between the simulated and closed-form states."""
        dev = 0.0
        for s, (ext, res) in zip(self.steps, self.direct):
            dev = max(dev, np.max(np.abs(s.extracted - ext)), np.max(np.abs(s.reservoir - res)))
        return float(dev)


def _ketbra(dim, i, j):
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[i, j] = 1.0
    return m


def _dagger(a):
    return a.conj().T


def _expect(a, sigma) -> complex:
    """``tr(a @ sigma)`` without forming the product."""
    return complex(np.sum(a.T * sigma))


# --- joint unitaries ---------------------------------------------------------


def build_weak_unitary(dim: int, infinite_variant: bool = False) -> np.ndarray:
    """Qubit-ladder interaction that swaps one quantum between the two systems.

    The finite variant fixes ``|1>|top>`` and is unitary.  The infinite
    variant is the truncation of the half-infinite ladder interaction; it
    annihilates ``|1>|top>`` and is only an isometry on the complement of that
    state (see :func:`isometry_defects`).
    """
    if dim < 2:
        raise InvalidDimensionError(f"weak unitary needs dim >= 2, got {dim}")
    delta = shift_power(dim, 1)
    top = np.zeros((dim, dim)) if infinite_variant else _ketbra(dim, dim - 1, dim - 1)
    return np.block([[_ketbra(dim, 0, 0), delta], [_dagger(delta), top]])


def build_dlevel_unitary(d: int, dim: int, stage: int = 1) -> np.ndarray:
    """``sum_ij |i><j| (x) Delta^(j g) P Delta^dagger^(i g)`` with ``g = d**(stage-1)``.

    ``P`` is the staircase projector for round ``stage``.  It maps
    ``|i>|d^m n + j g + r>`` to ``|j>|d^m n + i g + r>`` for ``r < g``.
    """
    if d < 2:
        raise InvalidDimensionError(f"register needs d >= 2 levels, got {d}")
    if stage < 1:
        raise InvalidArgumentError(f"stage must be >= 1, got {stage}")
    if dim % d**stage:
        raise InvalidDimensionError(f"reservoir dimension {dim} is not a multiple of {d}**{stage}")
    g = d ** (stage - 1)
    proj = staircase_projector(stage, d, dim)
    rows = []
    for i in range(d):
        row = []
        for j in range(d):
            row.append(shift_power(dim, j * g) @ proj @ _dagger(shift_power(dim, i * g)))
        rows.append(row)
    return np.block(rows)


def build_strong_unitary(dim: int, stage: int = 1) -> np.ndarray:
    """Qubit version of :func:`build_dlevel_unitary`; needs an even dimension."""
    if dim % 2:
        raise InvalidDimensionError(f"strong unitary needs an even dimension, got {dim}")
    if stage == 1:
        p2 = multiples_projector(2, dim)
        delta = shift_power(dim, 1)
        return np.block([[p2, delta @ p2], [p2 @ _dagger(delta), delta @ p2 @ _dagger(delta)]])
    return build_dlevel_unitary(2, dim, stage)


def _check_unitary_2x2(u, tol=1e-10) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (2, 2):
        raise InvalidArgumentError(f"U must be 2x2, got shape {u.shape}")
    if unitarity_defect(u) > tol:
        raise InvalidArgumentError("U is not unitary")
    return u


def build_catalytic_unitary(u, dim: int) -> np.ndarray:
    """Energy-conserving interaction driven by the qubit unitary ``u`` on a truncated ladder."""
    u = _check_unitary_2x2(u)
    delta = shift_power(dim, 1)
    eye = np.eye(dim, dtype=np.complex128)
    return np.block(
        [
            [_ketbra(dim, 0, 0) + u[0, 0] * delta @ _dagger(delta), u[0, 1] * delta],
            [u[1, 0] * _dagger(delta), u[1, 1] * eye],
        ]
    )


def isometry_defects(v, tol: float = 1e-10) -> list:
    """Indices of basis inputs that ``v`` does not map to unit vectors."""
    norms = np.linalg.norm(as_square_matrix(v), axis=0)
    return [int(c) for c in np.flatnonzero(np.abs(norms - 1.0) > tol)]


def joint_evolution(v, rho_s, sigma) -> np.ndarray:
    joint = np.kron(rho_s, sigma)
    return v @ joint @ _dagger(v)


# --- single steps ---------------------------------------------------------------


def _ground(dim=2):
    return basis_density(dim, 0)


def _run(v, rho_s, sigma, gap, spacing, extra_energy=0.0, extra_leak=0.0) -> StepResult:
    ds, dr = rho_s.shape[0], sigma.shape[0]
    out = joint_evolution(v, rho_s, sigma)
    extracted = partial_trace(out, ds, dr, "first")
    reservoir = partial_trace(out, ds, dr, "second")
    energies = spacing * composite_energies(ds, dr, gap).astype(float)
    e_before = float(np.real(np.diag(rho_s)) @ (spacing * gap * np.arange(ds))) + float(
        np.real(np.diag(sigma)) @ (spacing * np.arange(dr))
    )
    e_after = float(np.real(np.diag(out)) @ energies)
    leak = max(0.0, float(np.real(np.trace(np.kron(rho_s, sigma)) - np.trace(out))))
    return StepResult(
        extracted=extracted,
        reservoir=reservoir,
        extracted_l1=l1_coherence(extracted),
        injected_free_coherence=created_free_coherence(v, energies),
        energy_cost=e_after - e_before + extra_energy,
        trace_leakage=leak + extra_leak,
        register_gap=gap,
    )


def weak_step(sigma, rho_s=None, variant: str = "finite", spacing: float = 1.0) -> StepResult:
    if variant not in ("finite", "infinite"):
        raise InvalidArgumentError(f"variant must be 'finite' or 'infinite', got {variant!r}")
    sigma = as_square_matrix(sigma)
    rho_s = _ground() if rho_s is None else as_square_matrix(rho_s)
    v = build_weak_unitary(sigma.shape[0], infinite_variant=variant == "infinite")
    return _run(v, rho_s, sigma, 1, spacing)


def dlevel_step(sigma, d: int, rho_s=None, stage: int = 1, spacing: float = 1.0) -> StepResult:
    """One round of d-level strong extraction; pads ``sigma`` to a multiple of ``d**stage``."""
    if d < 2:
        raise InvalidDimensionError(f"register needs d >= 2 levels, got {d}")
    sigma = pad_to_multiple(as_square_matrix(sigma), d**stage)
    rho_s = _ground(d) if rho_s is None else as_square_matrix(rho_s)
    v = build_dlevel_unitary(d, sigma.shape[0], stage)
    return _run(v, rho_s, sigma, d ** (stage - 1), spacing)


def strong_step(sigma, rho_s=None, stage: int = 1, spacing: float = 1.0) -> StepResult:
    sigma = pad_to_multiple(as_square_matrix(sigma), 2**stage)
    rho_s = _ground() if rho_s is None else as_square_matrix(rho_s)
    v = build_strong_unitary(sigma.shape[0], stage)
    return _run(v, rho_s, sigma, 2 ** (stage - 1), spacing)


def shift_headroom(sigma) -> float:
    """Population of the top two ladder levels."""
    p = np.real(np.diag(sigma))
    return float(p[-2:].sum())


def catalytic_step(sigma, u, spacing: float = 1.0, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> StepResult:
    """Shift the reservoir up one level, then apply the catalytic interaction to a ground qubit."""
    sigma = as_square_matrix(sigma)
    u = _check_unitary_2x2(u)
    head = shift_headroom(sigma)
    if head >= tail_tolerance:
        raise TruncationError(
            f"catalytic shift needs headroom: top-two-level population {head:.3g} >= {tail_tolerance:.3g}",
            required=sigma.shape[0] + 2,
        )
    dim = sigma.shape[0]
    delta = shift_power(dim, 1)
    shifted = delta @ sigma @ _dagger(delta)
    shift_leak = float(np.real(np.trace(sigma) - np.trace(shifted)))
    shift_energy = spacing * float(np.real(np.diag(shifted) - np.diag(sigma)) @ np.arange(dim))
    v = build_catalytic_unitary(u, dim)
    return _run(v, _ground(), shifted, 1, spacing, extra_energy=shift_energy, extra_leak=shift_leak)


# --- closed trace expressions ------------------------------------------------


def catalytic_formula(sigma, u):
    """Extracted qubit and new reservoir predicted for one catalytic round."""
    sigma = as_square_matrix(sigma)
    u = _check_unitary_2x2(u)
    delta = shift_power(sigma.shape[0], 1)
    t = _expect(delta, sigma)
    t_dag = _expect(_dagger(delta), sigma)
    ext = np.array(
        [
            [abs(u[0, 0]) ** 2, u[0, 0] * np.conj(u[1, 0]) * t],
            [np.conj(u[0, 0]) * u[1, 0] * t_dag, abs(u[1, 0]) ** 2],
        ]
    )
    res = abs(u[0, 0]) ** 2 * delta @ sigma @ _dagger(delta) + abs(u[1, 0]) ** 2 * sigma
    return ext, res


def weak_formula(sigma):
    sigma = as_square_matrix(sigma)
    dim = sigma.shape[0]
    delta = shift_power(dim, 1)
    s00, s01 = sigma[0, 0], sigma[0, 1]
    ext = np.array([[s00, s01], [np.conj(s01), np.trace(sigma) - s00]])
    res = s00 * _ketbra(dim, 0, 0) + _dagger(delta) @ sigma @ delta
    return ext, res


def weak_iterated(sigma, m: int):
    """State of round ``m`` of weak extraction expressed through the original reservoir."""
    sigma = as_square_matrix(sigma)
    dim = sigma.shape[0]
    pops = np.diag(sigma)
    lower = pops[:m].sum()
    coh = sigma[m - 1, m]
    ext = np.array([[lower, coh], [np.conj(coh), np.trace(sigma) - lower]])
    dm = shift_power(dim, m)
    res = lower * _ketbra(dim, 0, 0) + _dagger(dm) @ sigma @ dm
    return ext, res


def dlevel_formula(sigma, d: int):
    return dlevel_iterated(sigma, d, 1)


def strong_formula(sigma):
    sigma = pad_to_multiple(as_square_matrix(sigma), 2)
    dim = sigma.shape[0]
    p2 = multiples_projector(2, dim)
    delta = shift_power(dim, 1)
    a = _expect(p2, sigma)
    b = _expect(delta @ p2, sigma)
    ext = np.array([[a, b], [np.conj(b), np.trace(sigma) - a]])
    res = p2 @ sigma @ p2 + p2 @ _dagger(delta) @ sigma @ delta @ p2
    return ext, res


def dlevel_iterated(sigma, d: int, m: int):
    """Round-``m`` register state and reservoir for d-level (or, with d=2, strong) extraction."""
    sigma = pad_to_multiple(as_square_matrix(sigma), d**m)
    dim = sigma.shape[0]
    g = d ** (m - 1)
    proj = staircase_projector(m, d, dim)
    ext = np.zeros((d, d), dtype=np.complex128)
    for i in range(d):
        for j in range(d):
            op = shift_power(dim, j * g) @ proj @ _dagger(shift_power(dim, i * g))
            ext[i, j] = _expect(op, sigma)
    pm = multiples_projector(d**m, dim)
    acc = np.zeros_like(sigma)
    for i in range(d**m):
        di = shift_power(dim, i)
        acc += _dagger(di) @ sigma @ di
    return ext, pm @ acc @ pm


def strong_iterated(sigma, m: int):
    return dlevel_iterated(sigma, 2, m)


def extracted_amount_iterated(sigma, d: int, m: int) -> float:
    """Twice the summed moduli of the round-``m`` register coherences."""
    ext, _ = dlevel_iterated(sigma, d, m)
    return l1_coherence(ext)


# --- repetition ------------------------------------------------------------------


def _floor_log(n: int, base: int) -> int:
    k, power = 0, base
    while power <= n:
        k += 1
        power *= base
    return k


def max_repetitions(protocol: str, levels: int, d: int = 2) -> int:
    """Largest number of extraction rounds a ``levels``-level ladder supports."""
    if levels < 2:
        raise InvalidDimensionError(f"ladder needs at least 2 levels, got {levels}")
    if protocol == "weak":
        return levels - 1
    if protocol == "strong":
        return _floor_log(levels, 2)
    if protocol == "dlevel":
        if d < 2:
            raise InvalidDimensionError(f"register needs d >= 2 levels, got {d}")
        return _floor_log(levels, d)
    if protocol == "catalytic":
        raise InvalidArgumentError("catalytic extraction is bounded only by truncation headroom")
    raise InvalidArgumentError(f"unknown protocol {protocol!r}")


def register_energies(d: int, m: int) -> np.ndarray:
    """Diagonal of the full round-``m`` register Hamiltonian: ``d**(m-1)`` units summed."""
    units = d ** (m - 1)
    e = np.zeros(1, dtype=np.int64)
    for _ in range(units):
        e = (e[:, None] + np.arange(d)[None, :]).ravel()
    return e


def register_uniform_indices(d: int, m: int) -> list:
    """Positions of the states with every unit in level ``i``, for ``i < d``."""
    units = d ** (m - 1)
    repunit = (d**units - 1) // (d - 1)
    return [i * repunit for i in range(d)]


def embed_register_state(rho_eff, d: int, m: int) -> np.ndarray:
    """Lift the effective ``d``-level register state into the full multi-unit register."""
    idx = register_uniform_indices(d, m)
    size = d ** (d ** (m - 1))
    out = np.zeros((size, size), dtype=np.complex128)
    out[np.ix_(idx, idx)] = rho_eff
    return out


def _as_spec(reservoir) -> ReservoirSpec:
    if isinstance(reservoir, ReservoirSpec):
        return reservoir
    return ReservoirSpec.explicit(reservoir)


def repeat_extraction(reservoir, protocol: str, m: int, d: int = 2, u=None, check: bool = True) -> RunTrace:
    """Run ``m`` rounds, feeding each round the reservoir left by the previous one.

    ``reservoir`` is a :class:`ReservoirSpec` or an explicit density matrix.
    Each round is also evaluated from the original reservoir by closed
    expressions; with ``check`` a disagreement above 1e-8 raises
    :class:`ConsistencyError`.
    """
    if protocol not in PROTOCOLS:
        raise InvalidArgumentError(f"unknown protocol {protocol!r}")
    if m < 1:
        raise InvalidArgumentError(f"number of rounds must be >= 1, got {m}")
    spec = _as_spec(reservoir)
    prep = spec.prepare()
    sigma = prep.state
    levels, spacing = prep.ladder.levels, prep.ladder.spacing
    trace = RunTrace(protocol, spec)

    if protocol == "catalytic":
        if u is None:
            raise InvalidArgumentError("catalytic extraction needs a qubit unitary U")
        current, predicted = sigma, sigma
        for _ in range(m):
            step = catalytic_step(current, u, spacing, spec.tail_tolerance)
            ext, predicted = catalytic_formula(predicted, u)
            trace.steps.append(step)
            trace.direct.append((ext, predicted))
            trace.effective_register_dims.append(1)
            current = step.reservoir
    else:
        if protocol == "strong":
            d = 2
        bound = max_repetitions(protocol, levels, d)
        trace.max_repetitions = bound
        if m > bound:
            raise RepetitionLimitError(
                f"{protocol} extraction on {levels} levels allows at most {bound} rounds, {m} requested"
            )
        if protocol != "weak":
            sigma = pad_to_multiple(sigma, d**m)
        current = sigma
        for k in range(1, m + 1):
            if protocol == "weak":
                step = weak_step(current, spacing=spacing)
                trace.direct.append(weak_iterated(sigma, k))
                trace.effective_register_dims.append(1)
            else:
                if protocol == "strong":
                    step = strong_step(current, stage=k, spacing=spacing)
                else:
                    step = dlevel_step(current, d, stage=k, spacing=spacing)
                trace.direct.append(dlevel_iterated(sigma, d, k))
                trace.effective_register_dims.append(d ** (k - 1))
            trace.steps.append(step)
            current = step.reservoir

    if check:
        dev = trace.formula_deviation()
        if not dev <= FORMULA_TOL:
            raise ConsistencyError(f"sequential simulation deviates from closed expressions by {dev:.3g}")
    return trace


def weak_boundary_defect(dim: int) -> list:
    """Basis inputs (as ``(qubit, level)``) lost by the truncated infinite-ladder weak unitary."""
    v = build_weak_unitary(dim, infinite_variant=True)
    return [divmod(c, dim) for c in isometry_defects(v)]


def strong_cohering_power(sigma) -> float:
    """``2 |tr(Delta P_2 sigma)|``: the strong channel's output does not depend on its input."""
    sigma = pad_to_multiple(as_square_matrix(sigma), 2)
    dim = sigma.shape[0]
    return 2 * abs(_expect(shift_power(dim, 1) @ multiples_projector(2, dim), sigma))


def catalytic_cohering_power(sigma) -> float:
    """``|tr(Delta sigma)|``: catalytic cohering power with an optimal qubit unitary."""
    sigma = as_square_matrix(sigma)
    return abs(_expect(shift_power(sigma.shape[0], 1), sigma))
