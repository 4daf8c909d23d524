"""Named invariant checks run by ``cohextract verify``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import closed_form as cf
from . import protocols as pr
from .coherence import (
    check_basis_permutation,
    coherence_split,
    commutator_defect,
    l1_coherence,
    unitarity_defect,
)
from .hilbert import (
    ReservoirSpec,
    basis_density,
    composite_energies,
    multiples_projector,
    partial_trace,
    random_density_matrix,
    shift_power,
    staircase_projector,
)

FAULTS = ("unitarity",)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        self.passed = bool(self.passed)


def _random_unitary(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _faithful_unitaries(max_dim):
    """(label, V, system levels, reservoir dim) for every faithful construction up to ``max_dim``."""
    out = []
    for dim in range(2, max_dim + 1):
        out.append((f"weak dim={dim}", pr.build_weak_unitary(dim), 2, dim))
    for dim in range(2, max_dim + 1, 2):
        out.append((f"strong dim={dim}", pr.build_strong_unitary(dim), 2, dim))
    for d in (2, 3, 4):
        power = d
        while power <= max_dim:
            out.append((f"dlevel d={d} dim={power}", pr.build_dlevel_unitary(d, power), d, power))
            power *= d
    return out


def _check_unitaries(tol, max_dim, fault):
    worst_u = worst_c = 0.0
    bad_u, bad_c, bad_p = [], [], []
    for idx, (label, v, ds, dr) in enumerate(_faithful_unitaries(max_dim)):
        if fault == "unitarity" and idx == 0:
            v = v.copy()
            v[0, 0] += 1e-3
        e = composite_energies(ds, dr)
        du, dc = unitarity_defect(v), commutator_defect(v, e)
        worst_u, worst_c = max(worst_u, du), max(worst_c, dc)
        if du > tol:
            bad_u.append(label)
        if dc > tol:
            bad_c.append(label)
        if not check_basis_permutation(v, tol):
            bad_p.append(label)
    return [
        CheckResult("unitarity", not bad_u, f"max defect {worst_u:.3g}" + (f"; failing: {bad_u[:3]}" if bad_u else "")),
        CheckResult("energy conservation", not bad_c, f"max |[V,H]| {worst_c:.3g}"),
        CheckResult("basis permutation", not bad_p, f"failing: {bad_p[:3]}" if bad_p else "all constructions"),
    ]


def _check_ladder_identities(tol, max_dim):
    worst = 0.0
    for dim in range(2, max_dim + 1):
        delta = shift_power(dim, 1)
        eye = np.eye(dim)
        worst = max(worst, np.max(np.abs(delta.conj().T @ delta + basis_density(dim, dim - 1) - eye)))
        worst = max(worst, np.max(np.abs(delta @ delta.conj().T + basis_density(dim, 0) - eye)))
    for d in (2, 3, 4):
        for dim in range(d, max_dim + 1, d):
            pd = multiples_projector(d, dim)
            acc = sum(shift_power(dim, i) @ pd @ shift_power(dim, i).conj().T for i in range(d))
            worst = max(worst, np.max(np.abs(acc - np.eye(dim))))
            m = 1
            while dim % d ** (m + 1) == 0:
                m += 1
            p = staircase_projector(m, d, dim)
            worst = max(worst, np.max(np.abs(p @ p - p)))
    return CheckResult("ladder identities", worst <= tol, f"max deviation {worst:.3g}")


def _reservoirs(rng, max_dim, count=6):
    dims = sorted({min(max_dim, d) for d in (4, 8, 12, 16, 32, max_dim)})
    return [random_density_matrix(dims[i % len(dims)], rng) for i in range(count)]


def _check_channels(tol, max_dim, rng):
    mono = faithful = indep = part = 0.0
    injected = 0.0
    for sigma in _reservoirs(rng, max_dim):
        dim = sigma.shape[0]
        for step_fn, ds in ((pr.weak_step, 2), (pr.strong_step, 2)):
            res = step_fn(sigma)
            mono = max(mono, l1_coherence(res.reservoir) - l1_coherence(sigma))
            injected = max(injected, res.injected_free_coherence)
        for d in (2, 3):
            res = pr.dlevel_step(sigma, d)
            mono = max(mono, l1_coherence(res.reservoir) - l1_coherence(pr.pad_to_multiple(sigma, d)))
        # useful coherence of the joint state cannot grow
        rho_s = random_density_matrix(2, rng)
        v = pr.build_strong_unitary(dim + dim % 2)
        sig = pr.pad_to_multiple(sigma, 2)
        e = composite_energies(2, sig.shape[0])
        before = coherence_split(np.kron(rho_s, sig), e).useful
        after = coherence_split(pr.joint_evolution(v, rho_s, sig), e).useful
        faithful = max(faithful, after - before)
        outs = [pr.strong_step(sigma, rho_s=r).extracted for r in (basis_density(2, 0), basis_density(2, 1), np.eye(2) / 2)]
        indep = max(indep, max(np.max(np.abs(o - outs[0])) for o in outs))
        rho_a = random_density_matrix(3, rng)
        joint = np.kron(rho_a, sigma)
        part = max(part, np.max(np.abs(partial_trace(joint, 3, dim, "first") - rho_a)),
                   np.max(np.abs(partial_trace(joint, 3, dim, "second") - sigma)))
    return [
        CheckResult("partial trace", bool(part <= tol), f"max deviation {part:.3g}"),
        CheckResult("monotonicity", mono <= 1e-9, f"max l1 increase {mono:.3g}"),
        CheckResult("faithfulness", faithful <= 1e-9 and injected == 0.0,
                    f"max useful increase {faithful:.3g}, injected {injected:.3g}"),
        CheckResult("strong input independence", bool(indep <= tol), f"max deviation {indep:.3g}"),
    ]


def _check_catalytic(max_dim, rng, trials=10):
    dim = max_dim
    bound_gap = invariance = match = 0.0
    ok = True
    for _ in range(trials):
        u = _random_unitary(rng)
        sigma = random_density_matrix(dim, rng, support=dim - 4)
        res = pr.catalytic_step(sigma, u)
        ext, new = pr.catalytic_formula(sigma, u)
        match = max(match, np.max(np.abs(res.extracted - ext)), np.max(np.abs(res.reservoir - new)))
        created = 2 * abs(u[0, 0]) * abs(u[1, 0])
        bound_gap = max(bound_gap, res.extracted_l1 - created)
        ok &= abs(res.injected_free_coherence - created) <= 1e-9
        delta = shift_power(dim, 1)
        invariance = max(invariance, abs(np.trace(delta @ res.reservoir) - np.trace(delta @ sigma)))
    return [
        CheckResult("catalytic channel formulas", bool(match <= 1e-9), f"max deviation {match:.3g}"),
        CheckResult("catalytic bound", bool(bound_gap <= 1e-9 and ok), f"max excess over injected {bound_gap:.3g}"),
        CheckResult("catalytic repeat invariance", bool(invariance <= 1e-9), f"max change {invariance:.3g}"),
    ]


def _check_iterated(max_dim, rng, count=3):
    worst = 0.0
    dim = max_dim
    for _ in range(count):
        spec = ReservoirSpec.explicit(random_density_matrix(dim, rng))
        for protocol, d in (("weak", 2), ("strong", 2), ("dlevel", 3)):
            m = pr.max_repetitions(protocol, dim, d)
            worst = max(worst, pr.repeat_extraction(spec, protocol, m, d=d, check=False).formula_deviation())
    return CheckResult("iterated formulas", worst <= 1e-8, f"max deviation {worst:.3g}")


def _check_closed_forms():
    worst = 0.0
    for spec in (ReservoirSpec.coherent(1.0), ReservoirSpec.squeezed(0.5)):
        for protocol, reps in (("weak", 3), ("strong", 3)):
            trace = pr.repeat_extraction(spec, protocol, reps)
            for m, got in enumerate(trace.extracted_l1, start=1):
                worst = max(worst, abs(got - cf.predicted_amount(protocol, spec, m)))
    return CheckResult("closed-form agreement", worst <= 1e-8, f"max deviation {worst:.3g}")


def _check_asymptotes():
    f = [cf.asymptote_check(d, "F", [50, 100, 200, 400]) for d in (2, 4)]
    g = [cf.asymptote_check(d, "G", [1 - 1e-4, 1 - 1e-5, 1 - 1e-6]) for d in (2, 4)]
    return [
        CheckResult("asymptote F", all(r.passed for r in f),
                    ", ".join(f"d={r.d}: {r.final_distance:.2g}" for r in f)),
        CheckResult("asymptote G", all(r.passed for r in g),
                    ", ".join(f"d={r.d}: {r.final_distance:.2g}" for r in g)),
    ]


def run_checks(tol: float = 1e-10, max_dim: int = 32, seed: int = 0, inject_fault=None) -> list:
    """Run every check; ``inject_fault='unitarity'`` perturbs one unitary entry on purpose."""
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ValueError(f"unknown fault {inject_fault!r}; choose from {FAULTS}")
    if max_dim < 8:
        raise ValueError("max_dim must be at least 8")
    rng = np.random.default_rng(seed)
    results = []
    results += _check_unitaries(tol, max_dim, inject_fault)
    results.append(_check_ladder_identities(tol, max_dim))
    results += _check_channels(tol, max_dim, rng)
    results += _check_catalytic(max_dim, rng)
    results.append(_check_iterated(max_dim, rng))
    results.append(_check_closed_forms())
    results += _check_asymptotes()
    return results
