"""Command-line front end: ``verify``, ``simulate``, ``sweep`` and ``compare``."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import closed_form as cf
from . import protocols as pr
from .errors import ConsistencyError, RepetitionLimitError, TruncationError
from .hilbert import DEFAULT_TAIL_TOLERANCE, DEFAULT_TRUNCATION, ReservoirSpec
from .verification import FAULTS, run_checks

EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_TRUNCATION, EXIT_IO = 0, 1, 2, 3, 4

SWEEP_HEADER = "param,m,extracted_l1,closed_form,abs_err,relative_to_cmax"
COMPARE_HEADER = "param,strong_power,catalytic_power"

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


class UsageError(ValueError):
    pass


def fmt(x) -> str:
    """12 significant digits, locale independent, no negative zero."""
    s = format(float(x), ".12g")
    return "0" if s == "-0" else s


def parse_unitary(text: str) -> np.ndarray:
    if text == "hadamard":
        return HADAMARD.copy()
    if text == "identity":
        return np.eye(2, dtype=complex)
    if text.startswith("custom:"):
        parts = text[len("custom:"):].split(",")
        if len(parts) != 4:
            raise UsageError("custom U needs four comma-separated entries a,b,c,d")
        try:
            vals = [complex(p.strip().replace(" ", "")) for p in parts]
        except ValueError as exc:
            raise UsageError(f"cannot parse custom U: {exc}") from None
        return np.array(vals, dtype=complex).reshape(2, 2)
    raise UsageError(f"unknown unitary {text!r}; use hadamard, identity or custom:a,b,c,d")


@dataclass
class SweepConfig:
    protocol: str
    reservoir: str
    param_min: float
    param_max: float
    steps: int = 2
    repetitions: int = 1
    d: int = 2
    truncation: int | None = None  # None: start at the default and raise as needed
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    output_path: str | None = None
    phase: float = 0.0
    u: str = "hadamard"

    def __post_init__(self):
        if self.protocol not in pr.PROTOCOLS:
            raise UsageError(f"unknown protocol {self.protocol!r}")
        if self.reservoir not in ("coherent", "squeezed"):
            raise UsageError(f"unknown reservoir {self.reservoir!r}")
        if not (np.isfinite(self.param_min) and np.isfinite(self.param_max)):
            raise UsageError("parameter bounds must be finite")
        if self.param_min < 0:
            raise UsageError("parameter must be non-negative")
        if self.param_min > self.param_max:
            raise UsageError("param_min must not exceed param_max")
        if self.steps < 1 or (self.steps < 2 and self.param_min != self.param_max):
            raise UsageError("steps must be >= 2")
        if self.repetitions < 1:
            raise UsageError("repetitions must be >= 1")
        if self.d < 2:
            raise UsageError("d must be >= 2")
        if self.truncation is not None and self.truncation < 2:
            raise UsageError("truncation must be >= 2")
        if not 0 < self.tail_tolerance < 1:
            raise UsageError("tail tolerance must lie in (0, 1)")
        if self.protocol == "catalytic":
            parse_unitary(self.u)

    def grid(self) -> list:
        if self.steps == 1:
            return [float(self.param_min)]
        return [float(x) for x in np.linspace(self.param_min, self.param_max, self.steps)]

    def unitary(self):
        return parse_unitary(self.u) if self.protocol == "catalytic" else None

    def spec_for(self, param: float) -> ReservoirSpec:
        build = ReservoirSpec.coherent if self.reservoir == "coherent" else ReservoirSpec.squeezed
        trunc = DEFAULT_TRUNCATION if self.truncation is None else self.truncation
        return build(param, self.phase, truncation=trunc, tail_tolerance=self.tail_tolerance)

    def choose_truncation(self) -> int:
        """Truncation used for every grid point: explicit, or raised to cover the largest parameter."""
        if self.truncation is not None:
            return self.truncation
        need = self.spec_for(self.param_max).minimum_truncation()
        if self.protocol == "catalytic":
            # each round shifts the reservoir up one (sub)ladder level
            per_level = 2 if self.reservoir == "squeezed" else 1
            need += per_level * (self.repetitions + 2)
        return max(DEFAULT_TRUNCATION, need)


def run_point(config: SweepConfig, param: float, truncation: int):
    """Simulate one grid point; returns (trace, [closed-form prediction per round])."""
    spec = replace(config.spec_for(param), truncation=truncation)
    u = config.unitary()
    trace = pr.repeat_extraction(spec, config.protocol, config.repetitions, d=config.d, u=u)
    preds = [cf.predicted_amount(config.protocol, spec, m, u=u, d=config.d)
             for m in range(1, config.repetitions + 1)]
    return trace, preds


def _sweep_rows(args):
    config, param, truncation = args
    trace, preds = run_point(config, param, truncation)
    rows = []
    for m, (got, want) in enumerate(zip(trace.extracted_l1, preds), start=1):
        rel = ""
        if config.protocol == "strong":
            rel = fmt(got / cf.max_useful_coherence(2 ** (m - 1)))
        rows.append(f"{fmt(param)},{m},{fmt(got)},{fmt(want)},{fmt(abs(got - want))},{rel}")
    return rows


def _write(path: str, lines: list):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_sweep(config: SweepConfig, jobs: int = 1) -> list:
    """Write the sweep CSV to ``config.output_path`` and return its lines."""
    truncation = config.choose_truncation()
    tasks = [(config, p, truncation) for p in config.grid()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sweep_rows, tasks))
    else:
        chunks = [_sweep_rows(t) for t in tasks]
    lines = [
        f"# protocol={config.protocol} reservoir={config.reservoir} d={config.d} phase={fmt(config.phase)}",
        f"# truncation={truncation} tail_tolerance={fmt(config.tail_tolerance)}",
        SWEEP_HEADER,
    ]
    for chunk in chunks:
        lines += chunk
    if config.output_path is not None:
        _write(config.output_path, lines)
    return lines


def cmd_compare(reservoir: str, param_min: float, param_max: float, steps: int, output_path=None,
                truncation=None, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE, phase: float = 0.0) -> list:
    config = SweepConfig("strong", reservoir, param_min, param_max, steps,
                         truncation=truncation, tail_tolerance=tail_tolerance, phase=phase)
    trunc = config.choose_truncation()
    lines = [f"# reservoir={reservoir} truncation={trunc} tail_tolerance={fmt(tail_tolerance)}", COMPARE_HEADER]
    for p in config.grid():
        sigma = replace(config.spec_for(p), truncation=trunc).prepare().state
        lines.append(f"{fmt(p)},{fmt(pr.strong_cohering_power(sigma))},{fmt(pr.catalytic_cohering_power(sigma))}")
    if output_path is not None:
        _write(output_path, lines)
    return lines


def cmd_simulate(config: SweepConfig) -> list:
    """Key/value document for a single parameter point (``param_min``)."""
    truncation = config.choose_truncation()
    param = config.param_min
    trace, preds = run_point(config, param, truncation)
    spec = trace.reservoir_spec
    lines = [
        f"protocol = {config.protocol}",
        f"reservoir = {config.reservoir}",
        f"param = {fmt(param)}",
        f"phase = {fmt(config.phase)}",
        f"d = {config.d if config.protocol == 'dlevel' else 2}",
        f"reps = {config.repetitions}",
        f"truncation = {truncation}",
        f"tail_mass = {fmt(spec.tail_mass())}",
    ]
    u = config.unitary()
    if u is not None:
        for i in range(2):
            for j in range(2):
                lines.append(f"u.{i}.{j} = {fmt(u[i, j].real)} {fmt(u[i, j].imag)}")
    for m, (step, want) in enumerate(zip(trace.steps, preds), start=1):
        key = f"step.{m}"
        lines += [
            f"{key}.extracted_l1 = {fmt(step.extracted_l1)}",
            f"{key}.closed_form = {fmt(want)}",
            f"{key}.abs_err = {fmt(abs(step.extracted_l1 - want))}",
            f"{key}.trace_leakage = {fmt(step.trace_leakage)}",
            f"{key}.injected_free_coherence = {fmt(step.injected_free_coherence)}",
            f"{key}.energy_cost = {fmt(step.energy_cost)}",
            f"{key}.register_dim = {step.extracted.shape[0]}",
        ]
        rho = step.extracted
        for i in range(rho.shape[0]):
            for j in range(rho.shape[1]):
                lines.append(f"{key}.rho.{i}.{j} = {fmt(rho[i, j].real)} {fmt(rho[i, j].imag)}")
    return lines


def cmd_verify(tolerance: float = 1e-10, max_dim: int = 32, inject_fault=None, out=None) -> int:
    out = out or sys.stdout
    results = run_checks(tolerance, max_dim, inject_fault=inject_fault)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}", file=out)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=out)
        return EXIT_FAILURE
    print(f"all {len(results)} checks passed", file=out)
    return EXIT_OK


def _add_point_args(p, single: bool):
    p.add_argument("--protocol", required=True, choices=pr.PROTOCOLS)
    p.add_argument("--reservoir", required=True, choices=("coherent", "squeezed"))
    if single:
        p.add_argument("--param", type=float, required=True)
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--truncation", type=int, default=None)
    p.add_argument("--tail-tolerance", type=float, default=DEFAULT_TAIL_TOLERANCE)
    p.add_argument("--u", default="hadamard", help="hadamard, identity or custom:a,b,c,d (row major)")


def _add_grid_args(p):
    p.add_argument("--param-min", type=float, required=True)
    p.add_argument("--param-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohextract", description="Coherence extraction simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("--tol", type=float, default=1e-10)
    v.add_argument("--max-dim", type=int, default=32)
    v.add_argument("--inject-fault", choices=FAULTS, default=None)

    _add_point_args(sub.add_parser("simulate", help="simulate one parameter point"), single=True)

    sw = sub.add_parser("sweep", help="sweep the reservoir parameter, write CSV")
    _add_point_args(sw, single=False)
    _add_grid_args(sw)
    sw.add_argument("--jobs", type=int, default=1)

    c = sub.add_parser("compare", help="strong vs catalytic cohering power, write CSV")
    c.add_argument("--reservoir", required=True, choices=("coherent", "squeezed"))
    _add_grid_args(c)
    c.add_argument("--truncation", type=int, default=None)
    c.add_argument("--tail-tolerance", type=float, default=DEFAULT_TAIL_TOLERANCE)
    c.add_argument("--phase", type=float, default=0.0)
    return parser


def _config(args, param_min, param_max, steps, out=None) -> SweepConfig:
    return SweepConfig(args.protocol, args.reservoir, param_min, param_max, steps, args.reps, args.d,
                       args.truncation, args.tail_tolerance, out, args.phase, args.u)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "verify":
            if args.max_dim < 8 or not args.tol > 0:
                raise UsageError("--max-dim must be >= 8 and --tol > 0")
            return cmd_verify(args.tol, args.max_dim, args.inject_fault)
        if args.command == "simulate":
            print("\n".join(cmd_simulate(_config(args, args.param, args.param, 1))))
        elif args.command == "sweep":
            if args.jobs < 1:
                raise UsageError("--jobs must be >= 1")
            cmd_sweep(_config(args, args.param_min, args.param_max, args.steps, args.out), jobs=args.jobs)
        else:
            cmd_compare(args.reservoir, args.param_min, args.param_max, args.steps, args.out,
                        args.truncation, args.tail_tolerance, args.phase)
    except TruncationError as exc:
        hint = f" (minimum truncation {exc.required})" if exc.required is not None else ""
        print(f"error: {exc}{hint}", file=sys.stderr)
        return EXIT_TRUNCATION
    except ConsistencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ValueError, RepetitionLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
