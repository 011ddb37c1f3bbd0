"""Experiment driver: run configurations, sweeps, CSV files and rate tables.

A run marches one benchmark on one mesh, measures the damped errors against
the exact solution and assembles the estimator breakdown into a flat record.
Sweeps repeat a configuration across a cell ladder and report empirical
convergence orders between consecutive refinements.  Records serialize to
CSV with 17 significant digits so that reading them back is bitwise exact.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .benchmarks import make_propagating, make_standing
from .damped_norms import StreamingMeasures, error_measures
from .estimator import data_oscillation, estimator_M, estimator_R, total_estimator
from .fem1d import LagrangeSpace, UniformMesh1D, load_vector
from .reconstruct import SourceReconstruction, delta, reconstruct_L, reconstruct_R
from .timestepping import TimeGrid, find_cfl_alpha, run_leapfrog, verify_cfl

__all__ = [
    "CSV_COLUMNS",
    "RATE_COLUMNS",
    "RunConfig",
    "RunRecord",
    "cfl_alpha",
    "derived_tau",
    "emit_csv",
    "rate_table",
    "read_csv",
    "run_experiment",
    "sweep",
]

HALF_WIDTH = 10.0
COARSEST_CELLS = 2

_BENCHMARKS = {"standing": make_standing, "propagating": make_propagating}
_ALPHA_CACHE = {}


def cfl_alpha(degree, probe_horizon=20000):
    """Empirical stability ratio alpha_k for tau = alpha * h, cached per degree.

    Recomputed by bisection on a small probe mesh rather than hard-coded; the
    ratio is mesh-size independent on uniform meshes.
    """
    key = (int(degree), int(probe_horizon))
    if key not in _ALPHA_CACHE:
        space = LagrangeSpace(UniformMesh1D(-HALF_WIDTH, HALF_WIDTH, 16), int(degree))
        _ALPHA_CACHE[key] = find_cfl_alpha(space, probe_horizon=int(probe_horizon))
    return _ALPHA_CACHE[key]


@dataclass(frozen=True)
class RunConfig:
    """Parameters of a single experiment run.

    time_mode 'cfl' sets tau = cfl_ratio * alpha_k * h; 'scaled' keeps
    tau^2 / h^3 at the value the coarsest admissible mesh would get from the
    cfl rule, so the step shrinks faster than stability requires.  t_star is
    the damped-norm horizon; construction warns when the damping tail cut off
    there exceeds 5e-6.
    """

    benchmark: str = "standing"
    degree: int = 1
    n_cells: int = 32
    rho: float = 0.02
    cfl_ratio: float = 0.9
    time_mode: str = "cfl"
    t_star: float = 1000.0
    gauss_order: int = 10
    n_quad: int | None = None
    with_estimator: bool = True
    out: str | None = None

    def __post_init__(self):
        if self.benchmark not in _BENCHMARKS:
            raise ValueError(f"unknown benchmark {self.benchmark!r}")
        if self.degree not in (1, 2, 3):
            raise ValueError("degree must be 1, 2 or 3")
        n = self.n_cells
        if not (COARSEST_CELLS <= n <= 512 and n & (n - 1) == 0):
            raise ValueError("n_cells must be a power of two between 2 and 512")
        if not 0.0 < self.cfl_ratio < 1.0:
            raise ValueError("cfl_ratio must lie in (0, 1)")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.time_mode not in ("cfl", "scaled"):
            raise ValueError("time_mode must be 'cfl' or 'scaled'")
        if not self.t_star > 0:
            raise ValueError("t_star must be positive")
        tail = math.exp(-self.rho * self.t_star)
        if tail > 5e-6:
            warnings.warn(
                f"damping tail exp(-rho t_star) = {tail:.2e} exceeds 5e-6; "
                "the truncated horizon may bias the damped norms",
                stacklevel=2,
            )


def derived_tau(config, alpha=None):
    """Time step of a configuration under its time_mode."""
    if alpha is None:
        alpha = cfl_alpha(config.degree)
    h = 2.0 * HALF_WIDTH / config.n_cells
    if config.time_mode == "cfl":
        return config.cfl_ratio * alpha * h
    h0 = 2.0 * HALF_WIDTH / COARSEST_CELLS
    tau0 = config.cfl_ratio * alpha * h0
    return tau0 * (h / h0) ** 1.5


CSV_COLUMNS = (
    "h", "tau", "dofs", "steps",
    "e_U", "e_u", "e_w", "ex_U", "ex_u", "ex_w", "et_U", "et_u", "et_w",
    "E_rho", "R", "M", "eta_f", "Lambda", "effectivity", "wall_time",
)
RATE_COLUMNS = CSV_COLUMNS[4:18]


@dataclass(frozen=True)
class RunRecord:
    """One CSV row of results; status carries failure context and is not a column."""

    h: float
    tau: float
    dofs: int
    steps: int
    e_U: float
    e_u: float
    e_w: float
    ex_U: float
    ex_u: float
    ex_w: float
    et_U: float
    et_u: float
    et_w: float
    E_rho: float
    R: float
    M: float
    eta_f: float
    Lambda: float
    effectivity: float
    wall_time: float
    status: str = "ok"

    def row(self):
        return [getattr(self, name) for name in CSV_COLUMNS]


def _failed_record(base, status, start):
    nan = float("nan")
    values = {name: nan for name in CSV_COLUMNS}
    values.update(base, wall_time=time.perf_counter() - start)
    return RunRecord(status=status, **values)


def run_experiment(config, case=None):
    """Run one configuration end to end and return its record.

    The march goes two steps past the horizon to feed the quartic stencil.
    Error measures stream for separable solutions and fall back to stored
    states otherwise; the estimator always needs the stored trajectory.  CFL
    failure and finite-time blow-up are reported through the record's status
    instead of raising.
    """
    start = time.perf_counter()
    if case is None:
        case = _BENCHMARKS[config.benchmark]()
    alpha = cfl_alpha(config.degree)
    mesh = UniformMesh1D(-HALF_WIDTH, HALF_WIDTH, config.n_cells)
    space = LagrangeSpace(mesh, config.degree)
    tau = derived_tau(config, alpha)
    if config.rho * tau > 1.0:
        raise ValueError("rho * tau exceeds 1; refine the step or lower the damping")
    n_steps = int(math.ceil(config.t_star / tau - 1e-9))
    grid = TimeGrid(tau, n_steps)
    grid_run = TimeGrid(tau, n_steps + 2)
    base = dict(h=mesh.h, tau=tau, dofs=space.dofs, steps=n_steps)

    try:
        verify_cfl(space, grid_run)
    except ValueError as exc:
        return _failed_record(base, f"cfl: {exc}", start)

    separable = hasattr(case, "separable_solution")
    collector = None
    on_state = None
    if separable:
        collector = StreamingMeasures(
            space, grid, config.rho, case.separable_solution(),
            config.gauss_order, config.n_quad,
        )
        on_state = collector.on_state
    keep = config.with_estimator or not separable
    amps = np.asarray(case.forcing_time_profile(grid_run.times[:-1]), dtype=float)
    amps[0] = 0.0
    shape = load_vector(space, case.forcing_space_profile, config.n_quad)
    try:
        seq = run_leapfrog(
            space, grid_run, (amps, shape), on_state=on_state, keep_states=keep
        )
    except FloatingPointError as exc:
        return _failed_record(base, f"blow-up: {exc}", start)

    if separable:
        measures = collector.finalize()
        recon_w = reconstruct_L(seq, grid) if config.with_estimator else None
    else:
        recon_w = reconstruct_L(seq, grid)
        measures = error_measures(
            seq, reconstruct_R(seq, grid), recon_w, case, config.rho, grid,
            config.gauss_order, config.n_quad,
        )
    values = dict(base, **measures.as_dict(), E_rho=measures.E_rho)

    if config.with_estimator:
        f_tau = SourceReconstruction(
            case.f, grid,
            time_profile=case.forcing_time_profile,
            space_profile=case.forcing_space_profile,
            zero_start=True,
        )
        breakdown = total_estimator(
            estimator_R(space, grid, recon_w, f_tau, config.rho, config.n_quad),
            estimator_M(space, grid, delta(seq, grid), config.rho),
            data_oscillation(case, f_tau, grid, config.rho, space, config.n_quad),
            e_rho=measures.E_rho,
        )
        values.update(
            R=breakdown.r, M=breakdown.m, eta_f=breakdown.eta_f,
            Lambda=breakdown.lam, effectivity=breakdown.effectivity,
        )
    else:
        nan = float("nan")
        values.update(R=nan, M=nan, eta_f=nan, Lambda=nan, effectivity=nan)
    values["wall_time"] = time.perf_counter() - start
    return RunRecord(**values)


def sweep(base_config, ladder, case=None):
    """Run the configuration across an ascending cell ladder.

    Returns the records and the rate table; emits CSV to base_config.out
    when set.
    """
    ladder = [int(n) for n in ladder]
    if ladder != sorted(ladder):
        raise ValueError("ladder must be sorted ascending")
    records = [
        run_experiment(replace(base_config, n_cells=n), case=case) for n in ladder
    ]
    if base_config.out:
        emit_csv(records, base_config.out)
    return records, rate_table(records)


def rate_table(records):
    """Empirical orders log2(q_i / q_{i+1}) between consecutive records.

    Rates are nan where either value is missing, nonpositive or non-finite.
    """
    out = {}
    for name in RATE_COLUMNS:
        vals = [getattr(rec, name) for rec in records]
        rates = []
        for a, b in zip(vals, vals[1:]):
            ok = math.isfinite(a) and math.isfinite(b) and a > 0 and b > 0
            rates.append(math.log2(a / b) if ok else float("nan"))
        out[name] = rates
    return out


def _format_value(name, value):
    if name in ("dofs", "steps"):
        return str(int(value))
    return format(float(value), ".16e")


def emit_csv(records, path):
    """Write records to path; 17 significant digits make the round trip bitwise."""
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for rec in records:
                fh.write(
                    ",".join(
                        _format_value(name, getattr(rec, name))
                        for name in CSV_COLUMNS
                    )
                    + "\n"
                )
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc


def read_csv(path):
    """Read records back, validating the header and the Lambda identity per row."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise OSError(f"reading {path}: {exc}") from exc
    if not lines or lines[0].split(",") != list(CSV_COLUMNS):
        raise ValueError(f"{path}: missing or mismatched header row")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise ValueError(
                f"{path}, line {lineno}: expected {len(CSV_COLUMNS)} fields, "
                f"got {len(parts)}"
            )
        values = {}
        for name, text in zip(CSV_COLUMNS, parts):
            try:
                values[name] = int(text) if name in ("dofs", "steps") else float(text)
            except ValueError:
                raise ValueError(
                    f"{path}, line {lineno}: bad value {text!r} for {name}"
                ) from None
        lam_sq = values["R"] ** 2 + 20.0 * values["M"] ** 2
        if math.isfinite(lam_sq) and not math.isclose(
            values["Lambda"] ** 2, lam_sq, rel_tol=1e-12, abs_tol=0.0
        ):
            raise ValueError(
                f"{path}, line {lineno}: Lambda does not match sqrt(R^2 + 20 M^2)"
            )
        records.append(RunRecord(**values))
    return records
