"""Command-line front end: scenario configs in, CSV/JSON artifacts out.

Every run resolves its parameters (defaults, config file, flags — flags win),
validates the regime before doing any work, writes the data files with
17-significant-digit floats, and drops a manifest recording the resolved
parameters next to them.  Exit codes: 0 ok, 2 invalid scenario, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from qubitfield.coupling import (
    KappaFamily,
    ResolutionError,
    calibrate_amplitude,
    compute_kappa,
    make_shape,
    radial_grid,
)
from qubitfield.counting import count_coupled, count_hartree
from qubitfield.dispersion import (
    DispersionPoint,
    plemelj_integral,
    plemelj_limit,
    resonance_family,
    root_path,
)
from qubitfield.dynamics import (
    CoupledConfig,
    FieldState,
    StepSizeError,
    conservation_report,
    simulate_coupled,
    simulate_hartree,
    simulate_linearized,
)
from qubitfield.instability import (
    NoUnstableDirectionError,
    growth_experiment,
    unit_slide,
)
from qubitfield.spectral import (
    operator_grid,
    spectrum_L_hartree,
    spectrum_coupled_Lscript,
    spectrum_extra_hartree,
)
from qubitfield.state import ParticleState
from qubitfield.stationary import (
    ASYM_LABELS,
    RegimeError,
    SYMMETRIC_LABELS,
    get_branch,
    hartree_branches,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3

ENV_OUTDIR = "QUBITFIELD_OUTDIR"
ENV_WORKERS = "QUBITFIELD_WORKERS"

FLOAT_FMT = "%.17g"


class ScenarioError(ValueError):
    """The requested run is inconsistent before any numerics start."""


class NumericsError(RuntimeError):
    """A solver failed to converge; partial output may exist."""


# ---------------------------------------------------------------------------
# scenario resolution


@dataclass
class Scenario:
    """Resolved parameters of one run; every field has a recorded default."""

    run: str = "branches"
    model: str = "hartree"
    branch: str = "symmetric_plus"
    kappa: float = 1.4
    tau: int = 1
    c: float = 1.0
    shape_kind: str = "gaussian"
    shape_width: float = 1.0
    dim: int = 3
    n_modes: int = 256
    dt: float = 1e-3
    T: float = 20.0
    store_every: int = 100
    delta: float = 0.0
    experiment: str = "hartree"
    c_path: list = field(default_factory=lambda: [1.0, 2.0, 5.0, 10.0, 20.0])
    mu_values: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    b_values: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    kappa_grid: list = field(default_factory=list)
    models: list = field(default_factory=lambda: ["hartree", "coupled"])
    seed: int = 0
    outdir: str = "out"
    workers: int = 4
    plot: bool = False

    def validate(self) -> None:
        if self.model not in ("hartree", "coupled"):
            raise ScenarioError(f"unknown model {self.model!r}")
        if self.branch not in SYMMETRIC_LABELS + ASYM_LABELS:
            raise ScenarioError(f"unknown branch {self.branch!r}")
        if self.kappa <= 0:
            raise ScenarioError("kappa must be positive")
        if self.kappa == 2.0 and self.run != "sweep":
            raise ScenarioError("kappa = 2 is the degenerate threshold")
        if self.branch in ASYM_LABELS and self.kappa <= 2.0:
            raise ScenarioError("asymmetric branches require kappa > 2")
        if self.tau not in (1, -1):
            raise ScenarioError("tau must be +1 or -1")
        if self.c <= 0:
            raise ScenarioError("wave speed must be positive")
        if self.shape_kind not in ("gaussian", "bump"):
            raise ScenarioError(f"unknown profile kind {self.shape_kind!r}")
        if self.dim < 3:
            raise ScenarioError("spatial dimension must be >= 3")
        if self.dt <= 0 or self.T <= 0:
            raise ScenarioError("dt and T must be positive")
        if self.n_modes < 8:
            raise ScenarioError("need at least 8 radial modes")
        if self.workers < 1:
            raise ScenarioError("worker count must be >= 1")

    def calibrated_shape(self):
        return calibrate_amplitude(
            make_shape(self.shape_kind, 1.0, self.shape_width, self.dim), self.kappa
        )


def _parse_floats(text: str) -> list:
    if not text.strip():
        return []
    return [float(tok) for tok in text.split(",")]


def load_scenario(args: argparse.Namespace) -> Scenario:
    """Defaults, then config file, then explicit CLI flags."""
    values: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read config: {exc}")
        known = {f.name for f in fields(Scenario)}
        for key, val in raw.items():
            if key not in known:
                raise ScenarioError(f"unknown config key {key!r}")
            values[key] = val
    for f in fields(Scenario):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    values["run"] = args.command
    if "outdir" not in values or values["outdir"] == "out":
        values["outdir"] = os.environ.get(ENV_OUTDIR, values.get("outdir", "out"))
    if getattr(args, "workers", None) is None and ENV_WORKERS in os.environ:
        try:
            values["workers"] = int(os.environ[ENV_WORKERS])
        except ValueError:
            raise ScenarioError(f"{ENV_WORKERS} must be an integer")
    try:
        scenario = Scenario(**values)
        scenario.tau = int(scenario.tau)
        scenario.validate()
    except TypeError as exc:
        raise ScenarioError(str(exc))
    return scenario


# ---------------------------------------------------------------------------
# artifacts


def _outdir(scenario: Scenario) -> Path:
    path = Path(scenario.outdir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(scenario: Scenario, resolved: dict) -> Path:
    """Record every resolved parameter; the timestamp is the only varying field."""
    payload = {
        "command": scenario.run,
        "created": datetime.now(timezone.utc).isoformat(),
        "parameters": {**asdict(scenario), **resolved},
    }
    path = _outdir(scenario) / f"{scenario.run}_manifest.json"
    _write_json(path, payload)
    return path


def _shape_manifest(shape, grid=None) -> dict:
    out = {
        "shape_amplitude": shape.amplitude,
        "kappa_computed": compute_kappa(shape),
    }
    if grid is not None:
        out["grid_nodes"] = len(grid.nodes)
        out["grid_cutoff"] = float(grid.cutoff)
    return out


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(FLOAT_FMT % v if isinstance(v, float) else str(v) for v in row))
            fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def run_branches(scenario: Scenario) -> None:
    records = [
        {
            "label": b.label,
            "omega": b.omega,
            "energy": b.energy,
            "classification": b.classification,
            "particle": list(b.particle.as_array()),
        }
        for b in hartree_branches(scenario.kappa)
    ]
    out = _outdir(scenario)
    _write_json(out / "branches.json", {"kappa": scenario.kappa, "branches": records})
    write_manifest(scenario, {"n_branches": len(records)})


def _initial_particle(scenario: Scenario, branch) -> ParticleState:
    if scenario.delta == 0.0:
        return branch.particle
    if scenario.branch != "symmetric_plus":
        raise ScenarioError("initial displacement is only defined on the symmetric_plus orbit")
    return ParticleState.from_array(unit_slide(scenario.delta))


def run_simulate(scenario: Scenario) -> None:
    out = _outdir(scenario)
    branch = get_branch(scenario.branch, scenario.kappa)
    resolved: dict = {}
    if scenario.model == "hartree":
        x0 = _initial_particle(scenario, branch)
        record = simulate_hartree(
            x0, scenario.kappa, scenario.T, scenario.dt, scenario.store_every, branch
        )
    else:
        shape = scenario.calibrated_shape()
        grid = operator_grid(shape, scenario.n_modes)
        config = CoupledConfig.build(shape, grid, scenario.c)
        particle0 = _initial_particle(scenario, branch)
        field0 = FieldState.slaved(
            shape, grid, branch.particle.q0**2 + branch.particle.p0**2,
            branch.particle.q1**2 + branch.particle.p1**2,
        )
        record = simulate_coupled(
            particle0, field0, config, scenario.T, scenario.dt, scenario.store_every, branch
        )
        resolved = _shape_manifest(shape, grid)
    record.to_csv(out / "trajectory.csv")
    _write_json(out / "conservation.json", conservation_report(record))
    write_manifest(scenario, resolved)
    if scenario.plot:
        from qubitfield import reporting

        reporting.phase_portrait(record, out / "phase_portrait.png")
        reporting.energy_split(record, out / "energy_split.png")
        reporting.orbit_distance_figure(record, out / "orbit_distance.png")


def _linearized_setup(scenario: Scenario) -> tuple[str, dict, np.ndarray]:
    params: dict = {"kappa": scenario.kappa, "tau": scenario.tau, "label": scenario.branch}
    if scenario.model == "hartree":
        kind = "hartree_extra" if scenario.branch in ASYM_LABELS else "hartree_sym"
        size = 4
    else:
        kind = "coupled_extra" if scenario.branch in ASYM_LABELS else "coupled_sym"
        shape = scenario.calibrated_shape()
        params["shape"] = shape
        params["grid"] = operator_grid(shape, scenario.n_modes)
        params["c"] = scenario.c
        size = 4 + 4 * scenario.n_modes
    delta = scenario.delta or 1e-4
    y0 = np.zeros(size)
    y0[0] = delta  # ill-prepared kick on the first emitter coordinate
    return kind, params, y0


def run_linearize(scenario: Scenario) -> None:
    out = _outdir(scenario)
    kind, params, y0 = _linearized_setup(scenario)
    times, snaps = simulate_linearized(
        kind, y0, params, scenario.T, scenario.dt, scenario.store_every
    )
    header = "t," + ",".join(f"y{i}" for i in range(snaps.shape[1]))
    _write_csv(
        out / "linearized.csv",
        header,
        ([float(t)] + [float(v) for v in row] for t, row in zip(times, snaps)),
    )
    resolved = {"kind": kind, "state_dim": int(snaps.shape[1])}
    if scenario.model == "coupled":
        resolved.update(_shape_manifest(params["shape"], params["grid"]))
    write_manifest(scenario, resolved)


def run_spectrum(scenario: Scenario) -> None:
    out = _outdir(scenario)
    resolved: dict = {}
    if scenario.model == "hartree":
        if scenario.branch in ASYM_LABELS:
            report = spectrum_extra_hartree(scenario.kappa)
        else:
            tau = -1 if scenario.branch == "symmetric_minus" else 1
            report = spectrum_L_hartree(scenario.kappa, tau)
    else:
        shape = scenario.calibrated_shape()
        grid = operator_grid(shape, scenario.n_modes)
        branch = get_branch(scenario.branch, scenario.kappa)
        report = spectrum_coupled_Lscript(branch, shape, grid, scenario.c)
        resolved = _shape_manifest(shape, grid)
    _write_json(out / "spectrum.json", report.to_json_dict())
    write_manifest(scenario, resolved)
    if scenario.plot:
        from qubitfield import reporting

        eigs = [e.as_complex() for e in report.eigenvalues]
        reporting.spectrum_figure(eigs, out / "spectrum.png", essential=report.essential)


def _cell_verdict(model: str, branch: str, kappa: float, tau: int, c: float):
    if model == "hartree":
        which = "extra" if branch in ASYM_LABELS else tau
        return count_hartree(kappa, which)
    family = KappaFamily.build(
        calibrate_amplitude(make_shape("gaussian", 1.0, 1.0, 3), kappa)
    )
    return count_coupled(branch, family, tau, c)


def run_count(scenario: Scenario) -> None:
    tau = -1 if scenario.branch == "symmetric_minus" else scenario.tau
    verdict = _cell_verdict(scenario.model, scenario.branch, scenario.kappa, tau, scenario.c)
    out = _outdir(scenario)
    _write_json(out / "verdict.json", {"model": scenario.model, **verdict.to_json_dict()})
    write_manifest(scenario, {})


def run_dispersion(scenario: Scenario) -> None:
    out = _outdir(scenario)
    shape = scenario.calibrated_shape()
    family = resonance_family(shape)
    start = DispersionPoint(-(4.0 + 2.0 * family.kappa), 1.0, 1.0, np.inf)
    path = root_path(family, scenario.tau, scenario.c_path, start)
    if not all(p.converged for p in path):
        bad = [p.c for p in path if not p.converged]
        raise NumericsError(f"dispersion root lost at c={bad}")
    _write_csv(
        out / "root_path.csv",
        "c,A,B,residual,iterations,stiff",
        ([p.c, p.A, p.B, p.residual, p.iterations, int(p.stiff)] for p in path),
    )
    write_manifest(scenario, _shape_manifest(shape))
    if scenario.plot:
        from qubitfield import reporting

        a_inf = -(4.0 + 2.0 * family.kappa)
        reporting.root_path_figure(path, a_inf, out / "root_path.png")


def run_growth(scenario: Scenario) -> None:
    out = _outdir(scenario)
    params: dict = {"kappa": scenario.kappa, "dt": scenario.dt}
    delta = scenario.delta or 1e-4
    if scenario.experiment == "coupled":
        shape = scenario.calibrated_shape()
        params.update(
            {
                "shape": shape,
                "grid": operator_grid(shape, scenario.n_modes),
                "c": scenario.c,
                "tau": scenario.tau,
                "label": scenario.branch,
            }
        )
    elif scenario.experiment == "hartree_linear_ill":
        params["tau"] = scenario.tau
        params["y0"] = [delta, 0.0, 0.0, 0.0]
    fit = growth_experiment(scenario.experiment, delta, scenario.T, params)
    if not fit.conclusive:
        _write_json(out / "growth.json", fit.to_json_dict())
        raise NumericsError("growth fit window too short or too noisy")
    _write_json(out / "growth.json", fit.to_json_dict())
    write_manifest(scenario, {"experiment": scenario.experiment, "delta": delta})


SWEEP_HEADER = "model,branch,kappa,tau,c,verdict,N_neg,N_zero,N_pos,N_complex,morse_index,error"


def _sweep_cell(cell) -> list:
    model, branch, kappa, tau, c = cell
    try:
        v = _cell_verdict(model, branch, kappa, tau, c)
    except (RegimeError, ScenarioError, ValueError, ResolutionError) as exc:
        return [model, branch, kappa, tau, c, "error", "", "", "", "", "", str(exc)]
    return [model, branch, kappa, tau, c, v.verdict, *v.counts, v.morse_index, ""]


def _sweep_cells(scenario: Scenario) -> list:
    cells = []
    for kappa in scenario.kappa_grid:
        for model in scenario.models:
            for tau in (1, -1):
                label = "symmetric_plus" if tau == 1 else "symmetric_minus"
                cells.append((model, label, kappa, tau, scenario.c))
            if kappa > 2:
                cells.append((model, "asym_plus", kappa, 1, scenario.c))
    return cells


def run_sweep(scenario: Scenario) -> None:
    out = _outdir(scenario)
    cells = _sweep_cells(scenario)
    if cells:
        with ThreadPoolExecutor(max_workers=scenario.workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = []
    _write_csv(out / "sweep.csv", SWEEP_HEADER, rows)
    n_failed = sum(1 for r in rows if r[5] == "error")
    write_manifest(scenario, {"n_cells": len(rows), "n_failed": n_failed})


def run_plemelj(scenario: Scenario) -> None:
    out = _outdir(scenario)
    shape = scenario.calibrated_shape()
    rows = []
    for mu in scenario.mu_values:
        pv, jump = plemelj_limit(mu, shape)
        for b in scenario.b_values:
            val = plemelj_integral(mu, b, shape)
            err = abs(val - complex(pv, -jump))
            rows.append([mu, b, val.real, val.imag, pv, jump, err])
    _write_csv(out / "plemelj.csv", "mu,B,re,im,pv,jump,err", rows)
    write_manifest(scenario, _shape_manifest(shape))


RUNNERS = {
    "branches": run_branches,
    "simulate": run_simulate,
    "linearize": run_linearize,
    "spectrum": run_spectrum,
    "count": run_count,
    "dispersion": run_dispersion,
    "growth": run_growth,
    "sweep": run_sweep,
    "plemelj": run_plemelj,
}


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON scenario file; flags override its keys")
    p.add_argument("--outdir", default=None, help=f"output directory (or ${ENV_OUTDIR})")
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--tau", type=int, default=None, choices=(1, -1))
    p.add_argument("--model", default=None, choices=("hartree", "coupled"))
    p.add_argument("--branch", default=None)
    p.add_argument("--c", type=float, default=None, help="wave speed")
    p.add_argument("--shape-kind", dest="shape_kind", default=None, choices=("gaussian", "bump"))
    p.add_argument("--shape-width", dest="shape_width", type=float, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--n-modes", dest="n_modes", type=int, default=None)
    p.add_argument("--plot", action="store_true", default=None,
                   help="also render figures next to the data files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qubitfield",
        description="Stability experiments for a two-level emitter coupled to wave fields.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in [
        ("branches", "enumerate stationary branches at the given kappa"),
        ("simulate", "integrate the nonlinear flow and export the trajectory"),
        ("linearize", "propagate the linearized flow from an ill-prepared kick"),
        ("spectrum", "eigenvalues of the linearized generator / Hessian"),
        ("count", "index counts and the stability verdict for one branch"),
        ("dispersion", "continuation of the secular root in the wave speed"),
        ("growth", "escape experiment and growth-rate fit"),
        ("sweep", "verdict grid over kappa values, both signs, both models"),
        ("plemelj", "boundary values of the resonance integral"),
    ]:
        p = sub.add_parser(name, help=text)
        _add_common(p)
        if name in ("simulate", "linearize", "growth"):
            p.add_argument("--T", type=float, default=None)
            p.add_argument("--dt", type=float, default=None)
            p.add_argument("--store-every", dest="store_every", type=int, default=None)
            p.add_argument("--delta", type=float, default=None,
                           help="initial displacement off the orbit")
        if name == "growth":
            p.add_argument("--experiment", default=None,
                           choices=("hartree", "coupled", "hartree_linear_ill"))
        if name == "dispersion":
            p.add_argument("--c-path", dest="c_path", type=_parse_floats, default=None,
                           help="comma-separated wave speeds for the continuation")
        if name == "plemelj":
            p.add_argument("--mu", dest="mu_values", type=_parse_floats, default=None)
            p.add_argument("--b-values", dest="b_values", type=_parse_floats, default=None)
        if name == "sweep":
            p.add_argument("--kappa-grid", dest="kappa_grid", type=_parse_floats, default=None)
            p.add_argument("--models", type=lambda s: s.split(","), default=None)
            p.add_argument("--workers", type=int, default=None,
                           help=f"worker pool size (or ${ENV_WORKERS})")
    return parser


def _fail(code: int, kind: str, reason: str) -> int:
    print(json.dumps({"error": kind, "reason": reason}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args)
    except (ScenarioError, RegimeError) as exc:
        return _fail(EXIT_INVALID, "validation", str(exc))
    try:
        RUNNERS[scenario.run](scenario)
    except (ScenarioError, RegimeError, NoUnstableDirectionError, ValueError) as exc:
        return _fail(EXIT_INVALID, "validation", str(exc))
    except (NumericsError, StepSizeError, ResolutionError) as exc:
        return _fail(EXIT_NUMERIC, "numerical", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
