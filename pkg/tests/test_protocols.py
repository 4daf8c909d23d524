import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohextract import protocols as pr
from cohextract.coherence import check_basis_permutation, check_energy_conserving, l1_coherence
from cohextract.errors import (
    ConsistencyError,
    InvalidArgumentError,
    InvalidDimensionError,
    RepetitionLimitError,
    TruncationError,
)
from cohextract.hilbert import (
    ReservoirSpec,
    basis_density,
    composite_energies,
    ket_to_density,
    random_density_matrix,
    shift_power,
)

seeds = st.integers(0, 2**32 - 1)
HAD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def _rand_u(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.mark.parametrize("dim", [2, 3, 7, 16])
def test_weak_unitary_is_faithful(dim):
    v = pr.build_weak_unitary(dim)
    assert check_energy_conserving(v, composite_energies(2, dim), commutator_tol=1e-12)
    assert check_basis_permutation(v)


def test_weak_infinite_variant_loses_only_top_input():
    assert pr.weak_boundary_defect(9) == [(1, 8)]


@pytest.mark.parametrize("d,dim,stage", [(2, 8, 1), (2, 8, 2), (2, 16, 3), (3, 27, 2), (4, 16, 2)])
def test_dlevel_unitary_is_faithful(d, dim, stage):
    v = pr.build_dlevel_unitary(d, dim, stage)
    assert check_energy_conserving(v, composite_energies(d, dim, d ** (stage - 1)), commutator_tol=1e-12)
    assert check_basis_permutation(v)


def test_strong_stage_one_matches_dlevel():
    assert np.abs(pr.build_strong_unitary(12) - pr.build_dlevel_unitary(2, 12)).max() == 0


def test_dimension_errors():
    with pytest.raises(InvalidDimensionError):
        pr.build_strong_unitary(7)
    with pytest.raises(InvalidDimensionError):
        pr.build_dlevel_unitary(3, 10)
    with pytest.raises(InvalidArgumentError):
        pr.build_catalytic_unitary(np.ones((2, 2)), 4)


def test_weak_single_step_on_plus_pair():
    sigma = np.zeros((4, 4))
    sigma[:2, :2] = 0.5
    res = pr.weak_step(sigma)
    assert abs(res.extracted_l1 - 1.0) < 1e-15
    assert res.injected_free_coherence == 0
    assert abs(res.energy_cost) < 1e-15


@settings(max_examples=25)
@given(st.integers(2, 12), seeds)
def test_weak_formula_matches_step(dim, seed):
    sigma = random_density_matrix(dim, np.random.default_rng(seed))
    res = pr.weak_step(sigma)
    ext, new = pr.weak_formula(sigma)
    assert np.abs(res.extracted - ext).max() < 1e-12
    assert np.abs(res.reservoir - new).max() < 1e-12


def test_weak_six_levels_runs_down_to_ground():
    psi = np.ones(6) / np.sqrt(6)
    sigma = ket_to_density(psi)
    amounts = []
    for _ in range(5):
        res = pr.weak_step(sigma)
        amounts.append(res.extracted_l1)
        sigma = res.reservoir
    assert all(a > 0.3 for a in amounts)
    assert np.abs(sigma - basis_density(6, 0)).max() < 1e-12
    assert pr.weak_step(sigma).extracted_l1 == 0
    with pytest.raises(RepetitionLimitError):
        pr.repeat_extraction(ReservoirSpec.explicit(ket_to_density(psi)), "weak", 6)


@settings(max_examples=25)
@given(st.integers(1, 8), seeds)
def test_strong_output_ignores_input(half, seed):
    rng = np.random.default_rng(seed)
    sigma = random_density_matrix(2 * half, rng)
    a = pr.strong_step(sigma, rho_s=random_density_matrix(2, rng))
    b = pr.strong_step(sigma)
    assert np.abs(a.extracted - b.extracted).max() < 1e-12
    assert abs(a.extracted_l1 - pr.strong_cohering_power(sigma)) < 1e-12


@settings(max_examples=25)
@given(st.integers(1, 8), seeds)
def test_strong_formula_matches_step(half, seed):
    sigma = random_density_matrix(2 * half, np.random.default_rng(seed))
    res = pr.strong_step(sigma)
    ext, new = pr.strong_formula(sigma)
    assert np.abs(res.extracted - ext).max() < 1e-12
    assert np.abs(res.reservoir - new).max() < 1e-12


@settings(max_examples=25)
@given(st.integers(4, 12), seeds)
def test_faithful_steps_do_not_raise_reservoir_coherence(dim, seed):
    sigma = random_density_matrix(dim, np.random.default_rng(seed))
    c0 = l1_coherence(sigma)
    for res in (pr.weak_step(sigma), pr.strong_step(sigma), pr.dlevel_step(sigma, 3)):
        assert l1_coherence(res.reservoir) <= c0 + 1e-9
        assert res.injected_free_coherence == 0


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_catalytic_step_properties(seed):
    rng = np.random.default_rng(seed)
    u = _rand_u(rng)
    sigma = random_density_matrix(20, rng, support=16)
    res = pr.catalytic_step(sigma, u)
    ext, new = pr.catalytic_formula(sigma, u)
    assert np.abs(res.extracted - ext).max() < 1e-12
    assert np.abs(res.reservoir - new).max() < 1e-12
    injected = 2 * abs(u[0, 0]) * abs(u[1, 0])
    assert abs(res.injected_free_coherence - injected) < 1e-12
    assert res.extracted_l1 <= injected + 1e-12
    delta = shift_power(20, 1)
    assert abs(np.trace(delta @ res.reservoir) - np.trace(delta @ sigma)) < 1e-12


def test_catalytic_needs_headroom(rng):
    sigma = random_density_matrix(8, rng)
    with pytest.raises(TruncationError):
        pr.catalytic_step(sigma, HAD)


def test_catalytic_repeats_same_amount():
    trace = pr.repeat_extraction(ReservoirSpec.coherent(1.0), "catalytic", 4, u=HAD)
    assert np.ptp(trace.extracted_l1) < 1e-12
    assert abs(trace.extracted_l1[0] - pr.catalytic_cohering_power(ReservoirSpec.coherent(1.0).prepare().state)) < 1e-12


@pytest.mark.parametrize(
    "protocol,levels,d,want",
    [("weak", 6, 2, 5), ("strong", 6, 2, 2), ("strong", 8, 2, 3), ("strong", 128, 2, 7),
     ("dlevel", 26, 3, 2), ("dlevel", 27, 3, 3), ("dlevel", 64, 4, 3)],
)
def test_max_repetitions(protocol, levels, d, want):
    assert pr.max_repetitions(protocol, levels, d) == want


def test_max_repetitions_catalytic_undefined():
    with pytest.raises(InvalidArgumentError):
        pr.max_repetitions("catalytic", 10)


@settings(max_examples=10, deadline=None)
@given(seeds, st.sampled_from([("weak", 2), ("strong", 2), ("dlevel", 3), ("dlevel", 2)]))
def test_sequential_matches_iterated(seed, proto):
    protocol, d = proto
    sigma = random_density_matrix(16, np.random.default_rng(seed))
    m = pr.max_repetitions(protocol, 16, d)
    trace = pr.repeat_extraction(sigma, protocol, m, d=d)
    assert trace.formula_deviation() < 1e-10
    for k, step in enumerate(trace.steps, start=1):
        if protocol != "weak":
            assert abs(step.extracted_l1 - pr.extracted_amount_iterated(sigma, d, k)) < 1e-12


def test_strong_exceeding_bound_raises(rng):
    with pytest.raises(RepetitionLimitError):
        pr.repeat_extraction(random_density_matrix(8, rng), "strong", 4)


def test_consistency_error_is_raised_on_mismatch(monkeypatch, rng):
    monkeypatch.setattr(pr, "weak_iterated", lambda s, m: (np.zeros((2, 2)), np.zeros_like(s)))
    with pytest.raises(ConsistencyError):
        pr.repeat_extraction(random_density_matrix(6, rng), "weak", 1)


@pytest.mark.parametrize("protocol", ["weak", "strong"])
def test_amounts_independent_of_phase(protocol):
    a = pr.repeat_extraction(ReservoirSpec.coherent(1.2), protocol, 3).extracted_l1
    b = pr.repeat_extraction(ReservoirSpec.coherent(1.2, phase=2.1), protocol, 3).extracted_l1
    assert np.abs(np.subtract(a, b)).max() < 1e-12


def test_register_embedding():
    rho = np.full((3, 3), 1 / 3)
    full = pr.embed_register_state(rho, 3, 2)
    e = pr.register_energies(3, 2)
    idx = pr.register_uniform_indices(3, 2)
    assert full.shape == (27, 27)
    assert list(e[idx]) == [0, 3, 6]
    assert abs(l1_coherence(full) - l1_coherence(rho)) < 1e-15
