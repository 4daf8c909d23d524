"""Closed-form extraction amounts for oscillator reservoirs.

``series_F`` and ``series_G`` are the generating sums behind the strong
protocol on coherent and squeezed-vacuum reservoirs.  Both are positive-term
series; summation stops only once a geometric bound certifies the remainder
below ``rel_tol`` times the partial sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DivergenceError, InvalidArgumentError
from .hilbert import ReservoirSpec

DEFAULT_REL_TOL = 1e-14
MAX_TERMS = 10**9


@dataclass(frozen=True)
class SeriesParams:
    """Indices and argument of ``F_{d;k,k'}(x)`` or ``G_{d;k,k'}(x)``.

    The limit ``1/d`` only holds for ``0 <= k, k' <= d-1``; the sums themselves
    are well defined for any non-negative offsets (the catalytic amount uses
    ``d=1, k=0, k'=1``).
    """

    d: int
    k: int
    kp: int
    x: float
    rel_tol: float = DEFAULT_REL_TOL

    def __post_init__(self):
        if self.d < 1:
            raise InvalidArgumentError(f"d must be >= 1, got {self.d}")
        if self.k < 0 or self.kp < 0:
            raise InvalidArgumentError(f"offsets must be non-negative, got ({self.k}, {self.kp})")
        if not self.x >= 0 or not math.isfinite(self.x):
            raise InvalidArgumentError(f"x must be finite and >= 0, got {self.x}")
        if not 0 < self.rel_tol < 1:
            raise InvalidArgumentError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")

    @property
    def in_limit_range(self) -> bool:
        return self.k <= self.d - 1 and self.kp <= self.d - 1


def series_F(d: int, k: int, kp: int, x: float, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """``exp(-x) sum_n x**(nd + (k+k')/2) / sqrt((nd+k)! (nd+k')!)``."""
    p = SeriesParams(d, k, kp, float(x), rel_tol)
    if p.x == 0:
        return 1.0 if k == kp == 0 else 0.0
    lx = math.log(p.x)
    log_t = -p.x + 0.5 * (k + kp) * lx - 0.5 * (math.lgamma(k + 1) + math.lgamma(kp + 1))
    terms = []
    running = 0.0
    for n in range(MAX_TERMS):
        t = math.exp(log_t)
        terms.append(t)
        running += t
        # log of t(n+1)/t(n); decreasing in n, so it bounds every later ratio
        log_r = d * lx
        for j in range(1, d + 1):
            log_r -= 0.5 * (math.log(n * d + k + j) + math.log(n * d + kp + j))
        if log_r < -math.log(2) and t <= rel_tol * running:
            return math.fsum(terms)
        log_t += log_r
    raise DivergenceError("series_F did not converge")  # pragma: no cover


def series_G(d: int, k: int, kp: int, x: float, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """``sum_n (x/4)**(nd+(k+k')/2) sqrt((2nd+2k)! (2nd+2k')!) / ((nd+k)! (nd+k')!)``.

    Written as ``x**(nd+(k+k')/2) sqrt(b(nd+k) b(nd+k'))`` with
    ``b(a) = C(2a, a) / 4**a``, accumulated through ``b(a+1)/b(a) = (2a+1)/(2a+2)``.
    Every term ratio is below ``x**d``, which gives the tail bound.
    """
    p = SeriesParams(d, k, kp, float(x), rel_tol)
    if p.x >= 1:
        raise DivergenceError(f"G diverges for x >= 1, got x={p.x}")
    if p.x == 0:
        return 1.0 if k == kp == 0 else 0.0
    lx = math.log(p.x)
    q = p.x**d
    s = 0.5 * (k + kp)
    lo, hi = min(k, kp), max(k, kp)

    a_cur, lb_cur = 0, 0.0  # log b(a_cur)
    total = 0.0
    n0, chunk = 0, 256
    while n0 < MAX_TERMS:
        n = np.arange(n0, n0 + chunk)
        next_lo = (n0 + chunk) * d + lo
        a_top = max((n0 + chunk - 1) * d + hi, next_lo)
        a = np.arange(a_cur, a_top)
        lb = np.empty(a_top - a_cur + 1)
        lb[0] = lb_cur
        lb[1:] = lb_cur + np.cumsum(np.log1p(-1.0 / (2.0 * a + 2.0)))
        log_terms = (n * d + s) * lx + 0.5 * (lb[n * d + k - a_cur] + lb[n * d + kp - a_cur])
        terms = np.exp(log_terms)
        partial = total + np.cumsum(terms)
        done = np.flatnonzero((terms * q / (1 - q) <= rel_tol * partial) & (terms <= rel_tol * partial))
        if done.size:
            return float(partial[done[0]])
        total = float(partial[-1])
        lb_cur = lb[next_lo - a_cur]
        a_cur = next_lo
        n0 += chunk
        chunk = min(chunk * 4, 1 << 20)
    raise DivergenceError("series_G did not converge")  # pragma: no cover


# --- extraction amounts -------------------------------------------------------


def _weak_coherent(amp: float, m: int) -> float:
    if amp == 0:
        return 0.0
    x = amp * amp
    return 2 * math.exp(-x + (2 * m - 1) * math.log(amp) - 0.5 * (math.lgamma(m) + math.lgamma(m + 1)))


def _weak_squeezed(r: float, m: int) -> float:
    if r == 0:
        return 0.0
    t = math.tanh(r)
    log_ratio = 0.5 * (math.lgamma(2 * m - 1) + math.lgamma(2 * m + 1)) - (
        (2 * m - 1) * math.log(2) + math.lgamma(m) + math.lgamma(m + 1)
    )
    return 2 * math.exp((2 * m - 1) * math.log(t) - math.log(math.cosh(r)) + log_ratio)


def _register_pairs(d: int, m: int):
    """Offset pairs ``(i g + r, j g + r)`` coupled into register coherence ``i < j`` in round ``m``."""
    g = d ** (m - 1)
    return [(i * g + r, j * g + r) for i in range(d) for j in range(i + 1, d) for r in range(g)]


def _series_amount(kind: str, param: float, d: int, m: int, rel_tol: float) -> float:
    block = d**m
    pairs = _register_pairs(d, m)
    if kind == "coherent":
        return 2 * sum(series_F(block, k, kp, param**2, rel_tol) for k, kp in pairs)
    x = math.tanh(param) ** 2
    return 2 / math.cosh(param) * sum(series_G(block, k, kp, x, rel_tol) for k, kp in pairs)


def catalytic_overlap(reservoir: ReservoirSpec, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """``|tr(Delta sigma)|`` for an oscillator reservoir (even subladder for squeezed states)."""
    if reservoir.kind == "coherent":
        return series_F(1, 0, 1, reservoir.param**2, rel_tol)
    if reservoir.kind == "squeezed":
        r = reservoir.param
        return series_G(1, 0, 1, math.tanh(r) ** 2, rel_tol) / math.cosh(r)
    raise InvalidArgumentError(f"no closed form for {reservoir.kind!r} reservoirs")


def predicted_amount(protocol: str, reservoir: ReservoirSpec, m: int, u=None, d: int = 2,
                     rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Closed-form l1 coherence extracted in round ``m``.

    Squeezed reservoirs follow the even-subladder convention used by
    :meth:`ReservoirSpec.prepare`.  The ``dlevel`` amounts generalize the
    qubit sums to ``2 sum_{i<j} sum_{r<g} F_{d^m; ig+r, jg+r}`` (and the
    analogue with ``G``); for ``d=2`` they coincide with ``strong``.
    """
    if m < 1:
        raise InvalidArgumentError(f"round index must be >= 1, got {m}")
    if reservoir.kind not in ("coherent", "squeezed"):
        raise InvalidArgumentError(f"no closed form for {reservoir.kind!r} reservoirs")
    a = reservoir.param
    if protocol == "weak":
        return _weak_coherent(a, m) if reservoir.kind == "coherent" else _weak_squeezed(a, m)
    if protocol == "strong":
        return _series_amount(reservoir.kind, a, 2, m, rel_tol)
    if protocol == "dlevel":
        if d < 2:
            raise InvalidArgumentError(f"register needs d >= 2 levels, got {d}")
        return _series_amount(reservoir.kind, a, d, m, rel_tol)
    if protocol == "catalytic":
        if u is None:
            raise InvalidArgumentError("catalytic prediction needs the qubit unitary U")
        u = np.asarray(u, dtype=complex)
        return 2 * abs(u[0, 0]) * abs(u[1, 0]) * catalytic_overlap(reservoir, rel_tol)
    raise InvalidArgumentError(f"unknown protocol {protocol!r}")


def max_useful_coherence(qubits: int, exact: bool = False):
    """Useful l1 coherence of the maximally coherent state of ``qubits`` qubits.

    ``2**M - C(2M, M) / 2**M``; ``exact=True`` returns a :class:`Fraction`.
    """
    if qubits < 1:
        raise InvalidArgumentError(f"need at least one qubit, got {qubits}")
    value = 2**qubits - Fraction(math.comb(2 * qubits, qubits), 2**qubits)
    return value if exact else float(value)


# --- asymptotics -----------------------------------------------------------------


@dataclass
class AsymptoteReport:
    d: int
    which: str
    grid: list
    band: float
    distances: dict = field(default_factory=dict)  # (k, k') -> [|value - 1/d| per grid point]
    passed: bool = False

    @property
    def worst_distances(self) -> list:
        return [max(col) for col in zip(*self.distances.values())]

    @property
    def final_distance(self) -> float:
        return self.worst_distances[-1]


def asymptote_check(d: int, which: str, grid, band: float = 1e-2, rel_tol: float = DEFAULT_REL_TOL,
                    slack: float = 1e-12) -> AsymptoteReport:
    """Track ``F_{d;k,k'}(x)`` (or ``G_{d;k,k'}(x) sqrt(1-x)``) towards ``1/d``.

    Passes when every index pair ends within ``band`` of ``1/d`` and its
    distance never grows across the last half of ``grid`` (up to ``slack``
    for rounding).
    """
    grid = [float(x) for x in grid]
    if which not in ("F", "G"):
        raise InvalidArgumentError(f"which must be 'F' or 'G', got {which!r}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidArgumentError("grid must be strictly increasing")
    report = AsymptoteReport(d, which, grid, band)
    target = 1.0 / d
    for k in range(d):
        for kp in range(k, d):
            dist = []
            for x in grid:
                if which == "F":
                    v = series_F(d, k, kp, x, rel_tol)
                else:
                    v = series_G(d, k, kp, x, rel_tol) * math.sqrt(1 - x)
                dist.append(abs(v - target))
            report.distances[(k, kp)] = dist
    tail_start = len(grid) // 2
    ok = True
    for dist in report.distances.values():
        ok &= dist[-1] < band
        ok &= all(b <= a + slack for a, b in zip(dist[tail_start:], dist[tail_start + 1:]))
    report.passed = bool(ok)
    return report
