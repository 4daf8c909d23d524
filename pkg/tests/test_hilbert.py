import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohextract.errors import InvalidDimensionError, InvalidStateError, TruncationError
from cohextract.hilbert import (
    ReservoirSpec,
    basis_density,
    coherent_state,
    coherent_tail_mass,
    composite_energies,
    dephase,
    multiples_projector,
    pad_to_multiple,
    partial_trace,
    random_density_matrix,
    shift_power,
    squeezed_tail_mass,
    squeezed_vacuum_state,
    staircase_projector,
    validate_density,
)

dims = st.integers(min_value=2, max_value=24)


@given(dims)
def test_shift_adjoint_identities(dim):
    delta = shift_power(dim, 1)
    eye = np.eye(dim)
    assert np.abs(delta.conj().T @ delta + basis_density(dim, dim - 1) - eye).max() < 1e-15
    assert np.abs(delta @ delta.conj().T + basis_density(dim, 0) - eye).max() < 1e-15


@given(dims, st.integers(min_value=0, max_value=30))
def test_shift_power_is_matrix_power(dim, k):
    assert np.abs(shift_power(dim, k) - np.linalg.matrix_power(shift_power(dim, 1), k)).max() < 1e-15


@given(st.integers(min_value=1, max_value=5), st.integers(min_value=1, max_value=6))
def test_multiples_projector_resolves_identity(d, blocks):
    dim = d * blocks
    p = multiples_projector(d, dim)
    assert np.abs(p @ p - p).max() == 0
    total = sum(shift_power(dim, i) @ p @ shift_power(dim, i).conj().T for i in range(d)) if dim > 1 else p
    assert np.abs(total - np.eye(dim)).max() == 0


@pytest.mark.parametrize("m,d,dim", [(1, 2, 8), (2, 2, 8), (3, 2, 16), (2, 3, 18), (2, 4, 32)])
def test_staircase_selects_residues(m, d, dim):
    p = np.diag(staircase_projector(m, d, dim)).real
    want = (np.arange(dim) % d**m < d ** (m - 1)).astype(float)
    assert np.abs(p - want).max() == 0


def test_projector_dimension_checks():
    with pytest.raises(InvalidDimensionError):
        multiples_projector(3, 8)
    with pytest.raises(InvalidDimensionError):
        staircase_projector(2, 2, 6)
    with pytest.raises(InvalidDimensionError):
        shift_power(1, 1)


@settings(max_examples=30)
@given(st.integers(min_value=1, max_value=4), st.integers(min_value=1, max_value=6), st.integers(0, 2**32 - 1))
def test_partial_trace_of_product(da, db, seed):
    rng = np.random.default_rng(seed)
    a, b = random_density_matrix(da, rng), random_density_matrix(db, rng)
    joint = np.kron(a, b)
    assert np.abs(partial_trace(joint, da, db, "first") - a).max() < 1e-12
    assert np.abs(partial_trace(joint, da, db, "second") - b).max() < 1e-12


def test_partial_trace_bad_shape():
    with pytest.raises(InvalidDimensionError):
        partial_trace(np.eye(6) / 6, 4, 2)


@settings(max_examples=30)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_dephase_is_idempotent_and_keeps_degenerate_blocks(dim, seed):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(2 * dim, rng)
    e = composite_energies(2, dim)
    once = dephase(rho, e)
    assert np.abs(dephase(once, e) - once).max() == 0
    # |0,n+1> and |1,n> share energy n+1
    assert once[1, dim] == rho[1, dim]
    assert once[0, 1] == 0


def test_validate_density_rejects():
    with pytest.raises(InvalidStateError):
        validate_density(np.diag([0.5, 0.6]))
    with pytest.raises(InvalidStateError):
        validate_density(np.array([[0.5, 0.6], [0.6, 0.5]]))


def test_coherent_amplitudes():
    psi, tail = coherent_state(1.0, 0.0, 64)
    want = [math.exp(-0.5), math.exp(-0.5), math.exp(-0.5) / math.sqrt(2)]
    assert np.abs(psi[:3] - want).max() < 1e-12
    assert tail < 1e-40


def test_squeezed_amplitudes():
    psi, _ = squeezed_vacuum_state(0.5, 0.0, 128)
    c = 1 / math.sqrt(math.cosh(0.5))
    assert abs(psi[0] - c) < 1e-12
    assert abs(psi[2] + c * math.tanh(0.5) / math.sqrt(2)) < 1e-12
    assert np.abs(psi[1::2]).max() == 0


def test_phase_enters_as_level_phase():
    p0, _ = coherent_state(1.3, 0.0, 40)
    p1, _ = coherent_state(1.3, 0.7, 40)
    assert np.abs(p1 - p0 * np.exp(0.7j * np.arange(40))).max() < 1e-14


def test_tail_masses_match_direct_sum():
    # direct sums in high precision would underflow; compare against the complement at moderate sizes
    n = np.arange(0, 200)
    probs = np.exp(-4.0 + n * math.log(4.0) - np.array([math.lgamma(k + 1) for k in n]))
    assert abs(coherent_tail_mass(2.0, 10) - probs[10:].sum()) < 1e-15
    t2 = math.tanh(1.0) ** 2
    sq = [math.comb(2 * k, k) / 4**k * t2**k / math.cosh(1.0) for k in range(4000)]
    assert abs(squeezed_tail_mass(1.0, 20) - sum(sq[10:])) < 1e-12


def test_reservoir_truncation_handling():
    spec = ReservoirSpec.coherent(5.0, truncation=20)
    with pytest.raises(TruncationError) as info:
        spec.prepare()
    assert info.value.required == spec.minimum_truncation()
    ok = spec.with_sufficient_truncation()
    assert ok.tail_mass() <= 1e-12
    assert ReservoirSpec.coherent(5.0, truncation=ok.truncation - 1).tail_mass() > 1e-12
    assert abs(np.trace(ok.prepare().state) - 1) < 1e-12


def test_squeezed_prepare_uses_even_subladder():
    prep = ReservoirSpec.squeezed(0.5, truncation=64).prepare()
    assert prep.state.shape == (32, 32)
    assert prep.ladder.spacing == 2.0


def test_pad_to_multiple():
    rho = np.eye(5) / 5
    out = pad_to_multiple(rho, 4)
    assert out.shape == (8, 8)
    assert np.abs(out[:5, :5] - rho).max() == 0 and np.abs(out[5:]).max() == 0
