import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohextract.coherence import (
    check_basis_permutation,
    check_energy_conserving,
    coherence_split,
    commutator_defect,
    created_free_coherence,
    is_incoherent,
    l1_coherence,
    qubit_channel_cohering_power,
)
from cohextract.hilbert import composite_energies, random_density_matrix
from cohextract.protocols import build_catalytic_unitary, build_strong_unitary, build_weak_unitary

seeds = st.integers(0, 2**32 - 1)


def test_l1_of_plus_state():
    plus = np.full((2, 2), 0.5)
    assert abs(l1_coherence(plus) - 1.0) < 1e-15
    assert l1_coherence(np.diag([0.3, 0.7])) == 0


def test_maximally_coherent_qudit():
    for n in (2, 3, 5):
        assert abs(l1_coherence(np.full((n, n), 1 / n)) - (n - 1)) < 1e-12


@settings(max_examples=40)
@given(st.integers(2, 10), seeds, st.floats(0, 2 * np.pi))
def test_l1_invariant_under_diagonal_phases_and_permutations(dim, seed, theta):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(dim, rng)
    u = np.diag(np.exp(1j * theta * np.arange(dim)))
    perm = np.eye(dim)[rng.permutation(dim)]
    assert abs(l1_coherence(u @ rho @ u.conj().T) - l1_coherence(rho)) < 1e-12
    assert abs(l1_coherence(perm @ rho @ perm.T) - l1_coherence(rho)) < 1e-12


@settings(max_examples=40)
@given(st.integers(2, 8), seeds, st.floats(0, 1))
def test_l1_is_convex(dim, seed, p):
    rng = np.random.default_rng(seed)
    a, b = random_density_matrix(dim, rng), random_density_matrix(dim, rng)
    mix = p * a + (1 - p) * b
    assert l1_coherence(mix) <= p * l1_coherence(a) + (1 - p) * l1_coherence(b) + 1e-12


@settings(max_examples=30)
@given(st.integers(2, 8), seeds)
def test_split_adds_up(dim, seed):
    rho = random_density_matrix(2 * dim, np.random.default_rng(seed))
    rep = coherence_split(rho, composite_energies(2, dim))
    assert abs(rep.free + rep.useful - rep.total) < 1e-12
    assert rep.free >= 0 and rep.useful >= -1e-12


def test_is_incoherent():
    h = np.array([0, 1, 1, 2])
    rho = np.zeros((4, 4))
    rho[1, 1] = rho[2, 2] = rho[1, 2] = rho[2, 1] = 0.5
    assert is_incoherent(rho, h)
    rho[0, 3] = rho[3, 0] = 0.1
    assert not is_incoherent(rho, h)


def test_commutator_defect_accepts_vector_or_matrix(rng):
    a = rng.normal(size=(5, 5))
    e = np.arange(5.0)
    assert abs(commutator_defect(a, e) - commutator_defect(a, np.diag(e))) < 1e-12


def test_energy_conservation_checks():
    v = build_strong_unitary(8)
    e = composite_energies(2, 8)
    assert check_energy_conserving(v, np.diag(e))
    assert check_basis_permutation(v)
    bad = v.copy()
    bad[0, 0] = 0.9
    assert not check_energy_conserving(bad, e)
    assert not check_basis_permutation(bad)


def test_created_free_coherence():
    e = composite_energies(2, 12)
    assert created_free_coherence(build_weak_unitary(12), e) == 0
    assert created_free_coherence(build_strong_unitary(12), e) == 0
    u = np.array([[np.cos(0.3), -np.sin(0.3)], [np.sin(0.3), np.cos(0.3)]])
    v = build_catalytic_unitary(u, 12)
    want = 2 * abs(u[0, 0]) * abs(u[1, 0])
    assert abs(created_free_coherence(v, e) - want) < 1e-12


def test_qubit_channel_cohering_power():
    had = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert abs(qubit_channel_cohering_power(lambda r: had @ r @ had) - 1) < 1e-12
    assert qubit_channel_cohering_power(lambda r: r) == 0
