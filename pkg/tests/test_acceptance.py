"""Acceptance suite: one test (and one pass/fail verdict line) per criterion.

Each test aggregates its sub-checks and reports them together, so a failure
shows every measured number next to its bracket.  The solver-heavy criteria
run ladders up to 256 cells and take minutes; everything is deterministic.
"""

import math

import numpy as np

from leapwave.benchmarks import make_propagating, make_standing
from leapwave.damped_norms import load_dual_norms_sq
from leapwave.estimator import data_oscillation, estimator_M, modified_residual_pairing
from leapwave.fem1d import LagrangeSpace, UniformMesh1D, load_vector, quadrature_grid
from leapwave.harness import RunConfig, cfl_alpha, run_experiment, sweep
from leapwave.reconstruct import (
    SourceReconstruction,
    continuity_jumps,
    delta,
    reconstruct_L,
    reconstruct_R,
    verify_commuting,
    verify_reconstructed_equation,
)
from leapwave.special import erf, erf_real
from leapwave.timestepping import (
    TimeGrid,
    check_damped_stability,
    run_leapfrog,
    stability_constant,
    verify_cfl,
)

HALF = 10.0


def _check(lines, label, ok):
    lines.append(f"{'PASS' if ok else 'FAIL'}  {label}")
    return bool(ok)


def _verdict(header, lines, ok):
    report = "\n".join(lines)
    print(f"\n[{header}]\n{report}")
    assert ok, f"{header}:\n{report}"


def _standing_loads(case, space, grid):
    amps = np.asarray(case.forcing_time_profile(grid.times[:-1]), dtype=float)
    amps[0] = 0.0
    shape = load_vector(space, case.forcing_space_profile)
    return amps[:, None] * shape[None, :]


def test_1_reconstruction_structural_identities():
    lines, ok = [], True
    case = make_standing()
    space = LagrangeSpace(UniformMesh1D(-HALF, HALF, 16), 2)
    grid = TimeGrid(0.04, 220)
    loads = _standing_loads(case, space, grid)
    seq = run_leapfrog(space, grid, loads)

    recon_w = reconstruct_L(seq, grid)
    jump = continuity_jumps(recon_w, orders=(0, 1, 2))
    ok &= _check(lines, f"quartic C2 continuity jump {jump:.2e} <= 1e-10", jump <= 1e-10)

    res = verify_commuting(seq, grid)
    ok &= _check(lines, f"commuting identity residual {res:.2e} <= 1e-10", res <= 1e-10)

    res = verify_reconstructed_equation(seq, grid, space, loads)
    ok &= _check(lines, f"reconstructed equation residual {res:.2e} <= 1e-9", res <= 1e-9)

    recon_u = reconstruct_R(seq, grid)
    f_tau = SourceReconstruction(
        case.f, grid, time_profile=case.forcing_time_profile,
        space_profile=case.forcing_space_profile, zero_start=True,
    )
    xq, wq, _ = quadrature_grid(space)
    rng = np.random.default_rng(7)
    worst = 0.0
    for t in rng.uniform(0.0, recon_w.t_end, 10):
        load_scale = math.sqrt(wq @ np.asarray(f_tau(t, xq)) ** 2) + 1.0
        for _ in range(8):
            v = rng.standard_normal(space.dofs)
            v /= np.linalg.norm(v)
            pairing = modified_residual_pairing(space, recon_u, recon_w, f_tau, t, v)
            worst = max(worst, abs(pairing) / load_scale)
    ok &= _check(lines, f"modified-residual orthogonality {worst:.2e} <= 1e-8", worst <= 1e-8)
    _verdict("structural identities", lines, ok)


def test_2_cfl_stability_thresholds():
    lines, ok = [], True
    for degree, lo, hi in ((1, 0.57, 0.60), (2, 0.24, 0.27), (3, 0.13, 0.16)):
        alpha = cfl_alpha(degree)
        ok &= _check(lines, f"alpha_{degree} = {alpha:.4f} in [{lo}, {hi}]", lo <= alpha <= hi)
    _verdict("cfl thresholds", lines, ok)


def test_3_convergence_orders_standing_ladders():
    lines, ok = [], True
    ladder = (32, 64, 128, 256)
    for degree in (1, 2, 3):
        base = RunConfig(degree=degree, rho=0.02, t_star=640.0, with_estimator=False)
        _, rates = sweep(base, ladder)
        for name in ("e_w", "e_u", "e_U"):
            order = rates[name][-1]
            ok &= _check(
                lines, f"k={degree} cfl {name} order {order:.3f} in 2 +/- 0.25",
                abs(order - 2.0) <= 0.25,
            )
        if degree in (1, 2):
            order = rates["ex_w"][-1]
            ok &= _check(
                lines, f"k={degree} cfl ex_w order {order:.3f} in {degree} +/- 0.25",
                abs(order - degree) <= 0.25,
            )
    base = RunConfig(degree=3, rho=0.02, t_star=640.0, time_mode="scaled",
                     with_estimator=False)
    _, rates = sweep(base, ladder)
    for name in ("e_w", "e_u", "e_U"):
        order = rates[name][-1]
        ok &= _check(
            lines, f"k=3 scaled {name} order {order:.3f} in 3 +/- 0.3",
            abs(order - 3.0) <= 0.3,
        )
    _verdict("convergence orders", lines, ok)


def test_4_effectivity_brackets_standing():
    lines, ok = [], True
    cases = (
        (1, "cfl", (128, 256)),
        (2, "cfl", (128, 256)),
        (3, "scaled", (64, 128)),
    )
    for degree, mode, pair in cases:
        for cells in pair:
            rec = run_experiment(RunConfig(
                degree=degree, n_cells=cells, rho=1.0, t_star=14.0, time_mode=mode,
            ))
            eff = rec.effectivity
            label = f"rho=1 k={degree} {mode} n={cells}: effectivity {eff:.4f}"
            ok &= _check(lines, f"{label} >= 1", eff >= 1.0)
            ok &= _check(lines, f"{label} <= 3.5", eff <= 3.5)
    for degree in (2, 3):
        rec = run_experiment(RunConfig(
            degree=degree, n_cells=256, rho=0.02, t_star=640.0,
        ))
        eff = rec.effectivity
        label = f"rho=0.02 k={degree} cfl n=256: effectivity {eff:.4f}"
        ok &= _check(lines, f"{label} >= 1", eff >= 1.0)
        ok &= _check(lines, f"{label} <= 15", eff <= 15.0)
    _verdict("effectivity brackets", lines, ok)


def test_5_estimator_component_scalings():
    lines, ok = [], True
    case = make_standing()
    space = LagrangeSpace(UniformMesh1D(-HALF, HALF, 64), 2)

    etas = []
    for tau in (0.5 / 2**i for i in range(5)):
        grid = TimeGrid(tau, int(math.ceil(24.0 / tau)))
        f_tau = SourceReconstruction(
            case.f, grid, time_profile=case.forcing_time_profile,
            space_profile=case.forcing_space_profile, zero_start=True,
        )
        etas.append(data_oscillation(case, f_tau, grid, 0.05, space))
    for i, (a, b) in enumerate(zip(etas, etas[1:])):
        order = math.log2(a / b)
        ok &= _check(
            lines, f"eta_f halving {i + 1}: order {order:.3f} in 3 +/- 0.3",
            abs(order - 3.0) <= 0.3,
        )

    gaps = []
    for tau in (0.0729, 0.03645):
        n_steps = int(math.ceil(24.0 / tau))
        grid = TimeGrid(tau, n_steps)
        grid_run = TimeGrid(tau, n_steps + 2)
        seq = run_leapfrog(space, grid_run, _standing_loads(case, space, grid_run))
        gaps.append(estimator_M(space, grid, delta(seq, grid), 0.05))
    factor = gaps[0] / gaps[1]
    ok &= _check(lines, f"M halving factor {factor:.3f} in 4 +/- 20%", 3.2 <= factor <= 4.8)

    for degree, cells, mode in ((2, 32, "cfl"), (3, 16, "scaled")):
        effs = [
            run_experiment(RunConfig(
                benchmark="propagating", degree=degree, n_cells=cells, rho=0.05,
                cfl_ratio=ratio, time_mode=mode, t_star=250.0,
            )).effectivity
            for ratio in (0.9, 0.5, 0.1)
        ]
        trend = " > ".join(f"{eff:.3f}" for eff in effs)
        ok &= _check(
            lines, f"k={degree} {mode} effectivity decreases with the step: {trend}",
            effs[0] > effs[1] > effs[2],
        )
    _verdict("estimator component scalings", lines, ok)


def test_6_damped_stability_inequality_and_constants():
    lines, ok = [], True
    rng = np.random.default_rng(2026)
    satisfied = 0
    for i in range(20):
        degree = 1 + i % 3
        space = LagrangeSpace(UniformMesh1D(-HALF, HALF, int(rng.choice((4, 8, 16)))), degree)
        lam = verify_cfl(space, TimeGrid(1e-9, 1)).lam_max
        tau = rng.uniform(0.3, 0.85) * 2.0 / math.sqrt(lam)
        grid = TimeGrid(tau, 250)
        rho = rng.uniform(0.02, 0.9) / tau
        g = rng.standard_normal(space.dofs)
        envelope = np.sin(rng.uniform(0.5, 2.0) * grid.times[:-1])
        envelope *= np.exp(-0.05 * grid.times[:-1])
        envelope[0] = 0.0
        loads = space.mass.matvec(g)[None, :] * envelope[:, None]
        seq = run_leapfrog(space, grid, loads)
        norms_sq = (g @ space.mass.matvec(g)) * envelope**2
        satisfied += check_damped_stability(seq, grid, rho, norms_sq).satisfied
    ok &= _check(lines, f"randomized driven runs: {satisfied}/20 satisfied", satisfied == 20)

    for name, maker, degree in (("standing", make_standing, 2), ("propagating", make_propagating, 1)):
        case = maker()
        space = LagrangeSpace(UniformMesh1D(-HALF, HALF, 16), degree)
        lam = verify_cfl(space, TimeGrid(1e-9, 1)).lam_max
        tau = 0.9 * 2.0 / math.sqrt(lam)
        grid = TimeGrid(tau, int(math.ceil(40.0 / tau)))
        loads = _standing_loads(case, space, grid)
        seq = run_leapfrog(space, grid, loads)
        result = check_damped_stability(seq, grid, 0.5, load_dual_norms_sq(space, loads))
        ok &= _check(lines, f"{name} benchmark inequality satisfied", result.satisfied)

    c0 = stability_constant(0.0)
    ok &= _check(lines, f"limit constant {c0:.6f} = 13/12 within 1e-4",
                 abs(c0 - 13.0 / 12.0) <= 1e-4)
    sup = max(stability_constant(t) for t in np.linspace(1e-6, 1.0, 1001))
    ok &= _check(lines, f"sup constant {sup:.4f} = 3.1828 within 1e-3",
                 abs(sup - 3.1828) <= 1e-3)
    _verdict("damped stability", lines, ok)


def test_7_special_functions_and_data_smallness():
    from test_special import _oracle_erf

    lines, ok = [], True
    xs = np.linspace(-6.0, 6.0, 241)
    err = np.max(np.abs(erf_real(xs) - np.array([_oracle_erf(x).real for x in xs])))
    ok &= _check(lines, f"erf on [-6, 6]: max error {err:.2e} <= 1e-12", err <= 1e-12)

    rng = np.random.default_rng(17)
    zs = rng.uniform(-6, 6, 200) + 1j * rng.uniform(-5, 5, 200)
    ref = np.array([_oracle_erf(z) for z in zs])
    cerr = float((np.abs(erf(zs) - ref) / np.maximum(np.abs(ref), 1.0)).max())
    ok &= _check(lines, f"erf at 200 complex points: max error {cerr:.2e} <= 1e-12",
                 cerr <= 1e-12)

    grid = np.linspace(-HALF, HALF, 20001)
    for name, maker in (("standing", make_standing), ("propagating", make_propagating)):
        case = maker()
        rms_u = math.sqrt(np.trapezoid(case.u(0.0, grid) ** 2, grid) / 20.0)
        rms_ut = math.sqrt(np.trapezoid(case.u_t(0.0, grid) ** 2, grid) / 20.0)
        rms_f = math.sqrt(np.trapezoid(case.f(0.0, grid) ** 2, grid) / 20.0)
        ok &= _check(
            lines,
            f"{name} initial smallness: u {rms_u:.2e} <= 1.1e-8, "
            f"du/dt {rms_ut:.2e} <= 8.3e-8, f {rms_f:.2e} <= 0.9e-6",
            rms_u <= 1.1e-8 and rms_ut <= 8.3e-8 and rms_f <= 0.9e-6,
        )
    _verdict("special functions and data smallness", lines, ok)
