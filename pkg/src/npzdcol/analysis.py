"""Verification machinery: norms, stability constants, estimate checks.

Everything here turns the model's qualitative guarantees (positivity,
conservation, bounded growth, Lipschitz continuity, contraction of the
fixed-point step) into numbers that a run either satisfies or does not.
Exponential bounds are compared in log space because their raw values
overflow float64 on season-length runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields

import numpy as np

from .core import Grid, ModelParams, StateVector, Trajectory, total_nitrogen
from .forcing import ConstantIrradiance, ConstantMixing
from .optics import OpticalParams, light_limit, par
from .reactions import bound_constants, eval_reaction, lipschitz_bound, truncate


# ---------------------------------------------------------------------------
# norms

def state_norms(c: np.ndarray, dx: float) -> tuple[float, float]:
    """Discrete L2 and H1 norms of a (k, n) stack of cell values.

    L2 = sqrt(dx * sum c^2); H1 adds the forward-difference gradient
    energy sqrt(dx * sum ((c_{i+1}-c_i)/dx)^2) in quadrature.
    """
    c = np.asarray(c, dtype=float)
    l2_sq = dx * float(np.sum(c * c))
    grad = np.diff(c, axis=-1) / dx
    h1_sq = l2_sq + dx * float(np.sum(grad * grad))
    return np.sqrt(l2_sq), np.sqrt(h1_sq)


def discrete_norms(state: StateVector, grid: Grid) -> tuple[float, float]:
    """L2 and H1 norms of a state over all four pools."""
    return state_norms(state.stack(), grid.cell_width)


# ---------------------------------------------------------------------------
# stability constants

def coercivity_lambda(d0: float, v_d: float) -> float:
    """Smallest zero-order shift certified to make the form coercive.

    The sinking term is absorbed by the diffusion floor d0 once the
    shift reaches v_d^2 / (2 d0).
    """
    if not d0 > 0.0:
        raise ValueError(f"diffusivity floor must be positive, got {d0}")
    if v_d < 0.0:
        raise ValueError(f"sinking speed must be nonnegative, got {v_d}")
    return v_d * v_d / (2.0 * d0)


def coercivity_constant(d0: float, v_d: float, lam: float) -> float:
    """Coercivity constant c0 with a(C, C) >= c0 * ||C||_H1^2.

    Smallest eigenvalue of the 2x2 form [[d0, -v_d/2], [-v_d/2, lam]]
    acting on (gradient, value) magnitudes. Positive iff
    lam > v_d^2/(4 d0); in particular positive at the certified shift
    coercivity_lambda(d0, v_d) whenever v_d > 0. A nonpositive return
    means no coercivity is certified for this lam.
    """
    if not d0 > 0.0:
        raise ValueError(f"diffusivity floor must be positive, got {d0}")
    half_gap = 0.5 * (d0 - lam)
    return 0.5 * (d0 + lam) - np.sqrt(half_gap * half_gap + 0.25 * v_d * v_d)


# ---------------------------------------------------------------------------
# discrete bilinear form (continuity diagnostics)

def bilinear_form(c, c_hat, d_faces, dx: float, v_d: float, lam: float) -> float:
    """Discrete counterpart of the spatial form a(t, C, C_hat).

    Diffusion uses face diffusivities against forward differences, the
    shift is an L2 pairing, and the sinking term pairs detritus jumps
    with face-averaged detritus of the partner state.
    """
    c = np.asarray(c, dtype=float)
    c_hat = np.asarray(c_hat, dtype=float)
    jump = np.diff(c, axis=-1)
    jump_hat = np.diff(c_hat, axis=-1)
    diff_term = float(np.sum(d_faces * jump * jump_hat)) / dx
    shift_term = lam * dx * float(np.sum(c * c_hat))
    face_avg_d_hat = 0.5 * (c_hat[3, 1:] + c_hat[3, :-1])
    adv_term = v_d * float(np.sum(jump[3] * face_avg_d_hat))
    return diff_term + shift_term + adv_term


def empirical_continuity_ratio(grid: Grid, d_faces, v_d: float, lam: float,
                               n_samples: int = 200, seed: int = 0) -> float:
    """Largest observed |a(C, C_hat)| / (||C||_H1 ||C_hat||_H1) over random states.

    Reported in place of a closed-form continuity constant.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        c = rng.standard_normal((4, grid.n_cells))
        c_hat = rng.standard_normal((4, grid.n_cells))
        _, h1 = state_norms(c, grid.cell_width)
        _, h1_hat = state_norms(c_hat, grid.cell_width)
        a = bilinear_form(c, c_hat, d_faces, grid.cell_width, v_d, lam)
        worst = max(worst, abs(a) / (h1 * h1_hat))
    return worst


# ---------------------------------------------------------------------------
# sampling suites

def sample_cancellation(params: ModelParams, rng, n_samples: int,
                        box: float = 10.0) -> float:
    """Max |sum_i f_i| over random states, both layers; should be ~0."""
    worst = 0.0
    for euphotic in (True, False):
        c = rng.uniform(-box, box, size=(4, n_samples))
        l_i = rng.uniform(0.0, 1.0, size=n_samples)
        f = eval_reaction(c, l_i, np.full(n_samples, euphotic), params)
        worst = max(worst, float(np.abs(f.sum(axis=0)).max()))
    return worst


def sample_growth_envelope(params: ModelParams, rng, n_samples: int,
                           box: float = 10.0) -> int:
    """Count violations of |f_i| <= sum_j B_ij |C_j| on random signed states."""
    bc = bound_constants(params)
    violations = 0
    for euphotic in (True, False):
        c = rng.uniform(-box, box, size=(4, n_samples))
        l_i = rng.uniform(0.0, 1.0, size=n_samples)
        f = eval_reaction(c, l_i, np.full(n_samples, euphotic), params)
        rhs = bc.matrix @ np.abs(c)
        violations += int(np.sum(np.abs(f) > rhs * (1.0 + 1e-12) + 1e-300))
    return violations


def sample_quasi_positivity(params: ModelParams, rng, n_samples: int,
                            box: float = 10.0) -> float:
    """Min of f_i over states with C_i = 0 and the rest nonnegative.

    Quasi-positivity demands this stays >= 0; it is the mechanism that
    keeps solutions nonnegative.
    """
    worst = np.inf
    for i in range(4):
        for euphotic in (True, False):
            c = rng.uniform(0.0, box, size=(4, n_samples))
            c[i] = 0.0
            l_i = rng.uniform(0.0, 1.0, size=n_samples)
            f = eval_reaction(c, l_i, np.full(n_samples, euphotic), params)
            worst = min(worst, float(f[i].min()))
    return worst


def sample_truncation(rng, n_samples: int, scale: float = 50.0) -> int:
    """Count violations of the truncation surrogate's basic properties."""
    g = rng.standard_normal(n_samples) * scale
    violations = 0
    for n in (0.5, 1.0, 10.0, 1e4):
        gn = truncate(g, n)
        violations += int(np.sum(np.abs(gn) >= n))
        violations += int(np.sum(np.abs(gn) > np.abs(g)))
        violations += int(np.sum(truncate(-g, n) != -gn))
        expected_gap = g * g / (n + np.abs(g))
        gap = np.abs(g - gn)
        violations += int(np.sum(np.abs(gap - expected_gap)
                                 > 1e-12 * np.maximum(1.0, expected_gap)))
    # monotone approach: larger n leaves more of g intact
    g1, g2 = truncate(g, 10.0), truncate(g, 1000.0)
    violations += int(np.sum(np.abs(g1) > np.abs(g2)))
    return violations


def sample_shift_equivalence(params: ModelParams, rng, n_samples: int,
                             dt: float = 0.01, lam_values=(1.0, 125.0),
                             box: float = 10.0) -> float:
    """Max relative gap between shifted and plain one-step reaction updates.

    Without truncation the shifted update C + dt*((f + lam C) - lam C)
    must reproduce C + dt*f to rounding.
    """
    c = rng.uniform(-box, box, size=(4, n_samples))
    l_i = rng.uniform(0.0, 1.0, size=n_samples)
    eu = rng.uniform(size=n_samples) < 0.5
    base = c + dt * eval_reaction(c, l_i, eu, params)
    scale = np.abs(base).max() + 1e-300
    worst = 0.0
    for lam in lam_values:
        shifted = c + dt * (eval_reaction(c, l_i, eu, params, lam=lam) - lam * c)
        worst = max(worst, float(np.abs(shifted - base).max()) / scale)
    return worst


def sample_lipschitz(params: ModelParams, optics: OpticalParams, q_sup: float,
                     col_length: float, lam: float, rng, n_samples: int,
                     box: float = 10.0) -> tuple[int, float]:
    """Check |g_i(C) - g_i(C_hat)| <= K_i * sum|C - C_hat| on random pairs.

    Pairs are nonnegative, depths span the column and irradiance spans
    [0, q_sup]; light limitation is evaluated through the actual optical
    path so the K_I factor is genuinely exercised. Returns (violations,
    worst ratio of |difference| to bound).
    """
    c = rng.uniform(0.0, box, size=(4, n_samples))
    c_hat = rng.uniform(0.0, box, size=(4, n_samples))
    x = rng.uniform(0.0, col_length, size=n_samples)
    q = rng.uniform(0.0, q_sup, size=n_samples)
    l_i = light_limit(par(x, c[1], q, optics), params, optics)
    l_i_hat = light_limit(par(x, c_hat[1], q, optics), params, optics)
    k_bounds = np.stack(lipschitz_bound(c, c_hat, params, optics, q_sup,
                                        col_length, lam=lam))
    gap = np.abs(c - c_hat).sum(axis=0)
    violations = 0
    worst = 0.0
    for euphotic in (True, False):
        mask = np.full(n_samples, euphotic)
        g = eval_reaction(c, l_i, mask, params, lam=lam)
        g_hat = eval_reaction(c_hat, l_i_hat, mask, params, lam=lam)
        lhs = np.abs(g - g_hat)
        rhs = k_bounds * gap
        violations += int(np.sum(lhs > rhs * (1.0 + 1e-12) + 1e-300))
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(rhs > 0.0, lhs / np.where(rhs > 0.0, rhs, 1.0), 0.0)
        worst = max(worst, float(ratio.max()))
    return violations, worst


# ---------------------------------------------------------------------------
# run-level verification

@dataclass
class EstimateReport:
    """Per-run verdicts of the verified estimates, plus the constants used."""

    mode: str
    dt: float
    t_end: float
    lam: float
    truncation_n: float | None
    lambda_min: float
    c0: float
    m_f: float
    m_g: float
    gronwall_log_margin: float   # min over steps of log(bound) - log(actual)
    gronwall_margin: float       # exp of the above; inf if it overflows
    positivity_min: float
    positivity_floor: float      # -1e-10 * max |initial|
    budget_residual: float       # max relative nitrogen-ledger mismatch
    total_n_initial: float
    bottom_export_total: float
    lipschitz_samples: int
    lipschitz_violations: int
    lipschitz_worst_ratio: float
    contraction_factor: float    # sqrt(dt / (2 c0)) for fixed-point runs, else nan
    picard_max_iterations: int
    snap_distance: float

    def to_rows(self) -> list[tuple[str, str]]:
        return [(f.name, repr(getattr(self, f.name))) for f in fields(self)]

    def to_text(self) -> str:
        return "".join(f"{key} = {value}\n" for key, value in self.to_rows())


def gronwall_log_margins(traj: Trajectory, m_g: float) -> np.ndarray:
    """log(||C0|| e^{M_g t}) - log(||C(t)||) per diagnostic row."""
    with np.errstate(divide="ignore"):
        log_actual = np.log(traj.l2)
        log_bound = np.log(traj.initial_l2) + m_g * traj.diag_t
    return log_bound - log_actual


def budget_residuals(traj: Trajectory) -> np.ndarray:
    """Relative mismatch of the nitrogen ledger per diagnostic row.

    The column total may only change by what sank out of the bottom:
    total(t) - total(0) + cumulative export = 0.
    """
    total0 = traj.total_n[0]
    scale = abs(total0) if total0 != 0.0 else 1.0
    return np.abs(traj.total_n - total0 + traj.cumulative_export) / scale


def verify_run(traj: Trajectory, params: ModelParams, optics: OpticalParams,
               mixing, irradiance, n_samples: int = 10_000,
               seed: int = 0) -> EstimateReport:
    """Evaluate every per-run estimate for a finished trajectory."""
    lam = traj.lam
    lam_min = coercivity_lambda(mixing.d_floor, params.v_d)
    c0 = coercivity_constant(mixing.d_floor, params.v_d, lam)
    bc = bound_constants(params, lam=lam)

    log_margins = gronwall_log_margins(traj, bc.m_g)
    log_margin = float(log_margins.min())
    with np.errstate(over="ignore"):
        margin = float(np.exp(log_margin))

    rng = np.random.default_rng(seed)
    violations, worst = sample_lipschitz(params, optics, irradiance.sup,
                                         traj.grid.length, lam, rng, n_samples)

    if traj.mode == "picard":
        contraction = (np.sqrt(traj.dt / (2.0 * c0)) if c0 > 0.0 else np.inf)
    else:
        contraction = np.nan

    return EstimateReport(
        mode=traj.mode,
        dt=traj.dt,
        t_end=float(traj.diag_t[-1]),
        lam=lam,
        truncation_n=traj.truncation_n,
        lambda_min=lam_min,
        c0=float(c0),
        m_f=bc.m_f,
        m_g=bc.m_g,
        gronwall_log_margin=log_margin,
        gronwall_margin=margin,
        positivity_min=float(traj.min_conc.min()),
        positivity_floor=-1e-10 * traj.initial_max_abs,
        budget_residual=float(budget_residuals(traj).max()),
        total_n_initial=float(traj.total_n[0]),
        bottom_export_total=float(traj.cumulative_export[-1]),
        lipschitz_samples=n_samples,
        lipschitz_violations=violations,
        lipschitz_worst_ratio=worst,
        contraction_factor=float(contraction),
        picard_max_iterations=int(traj.picard_iterations.max()),
        snap_distance=traj.grid.snap_distance,
    )


# ---------------------------------------------------------------------------
# continuous dependence on the initial data

@dataclass
class DependenceReport:
    """Divergence of two runs against the certified exponential envelope."""

    eps0: float                  # initial L2 gap
    rate: float                  # certified growth rate K (1/day)
    c0: float
    times: np.ndarray
    gaps: np.ndarray
    min_log_margin: float        # min over t>0 of log(eps0) + K t - log(gap)

    def within_envelope(self) -> bool:
        return self.min_log_margin >= 0.0


def pointwise_lipschitz(c_sup_a, c_sup_b, params: ModelParams,
                        optics: OpticalParams, q_sup: float, col_length: float,
                        lam: float) -> float:
    """Euclidean Lipschitz constant of the source over states below the sups.

    Built from the four per-component constants K_i via
    |dg| <= sqrt(sum K_i^2) * sum|dC| <= 2 sqrt(sum K_i^2) |dC|_2.
    """
    k = lipschitz_bound(np.asarray(c_sup_a, dtype=float),
                        np.asarray(c_sup_b, dtype=float),
                        params, optics, q_sup, col_length, lam=lam)
    return 2.0 * float(np.sqrt(sum(float(k_i) ** 2 for k_i in k)))


def dependence_report(traj_a: Trajectory, traj_b: Trajectory,
                      params: ModelParams, optics: OpticalParams,
                      mixing, irradiance) -> DependenceReport:
    """Compare two runs' L2 divergence against eps0 * exp(K t).

    K = L_inf^2 / (2 c0) with L_inf the pointwise Lipschitz constant at
    the runs' componentwise sup concentrations; this is the growth rate
    the uniqueness estimate certifies. Compared in log space.
    """
    times_a = np.asarray(traj_a.snapshot_times)
    times_b = np.asarray(traj_b.snapshot_times)
    if times_a.shape != times_b.shape or not np.allclose(times_a, times_b):
        raise ValueError("runs must share snapshot times to be compared")
    if traj_a.lam != traj_b.lam:
        raise ValueError("runs must share the shift lambda to be compared")
    stacks_a = [s.stack() for s in traj_a.snapshots]
    stacks_b = [s.stack() for s in traj_b.snapshots]
    dx = traj_a.grid.cell_width
    gaps = np.asarray([state_norms(a - b, dx)[0]
                       for a, b in zip(stacks_a, stacks_b)])
    sup_a = np.max([np.abs(s).max(axis=1) for s in stacks_a], axis=0)
    sup_b = np.max([np.abs(s).max(axis=1) for s in stacks_b], axis=0)
    lam = traj_a.lam
    c0 = coercivity_constant(mixing.d_floor, params.v_d, lam)
    l_inf = pointwise_lipschitz(sup_a, sup_b, params, optics, irradiance.sup,
                                traj_a.grid.length, lam)
    rate = l_inf * l_inf / (2.0 * c0) if c0 > 0.0 else np.inf
    eps0 = float(gaps[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        log_margins = np.log(eps0) + rate * times_a[1:] - np.log(gaps[1:])
    # coinciding runs hit log(0) - log(0); the envelope holds trivially
    log_margins = np.where(np.isnan(log_margins) & (gaps[1:] == 0.0),
                           np.inf, log_margins)
    min_margin = float(log_margins.min()) if log_margins.size else np.inf
    return DependenceReport(eps0=eps0, rate=float(rate), c0=float(c0),
                            times=times_a, gaps=gaps,
                            min_log_margin=min_margin)


# ---------------------------------------------------------------------------
# reference scenarios

def preset_scenario(name: str, n_cells: int | None = None) -> dict:
    """Small self-contained scenarios used by studies and tests.

    ``pure_diffusion``: reaction-free, sink-free column with a single
    smooth nutrient mode; has the exact solution
    N(t, x) = 1 + cos(pi x / L) exp(-d (pi/L)^2 t).

    ``smooth_npzd``: 20-cell active column with smooth positive
    profiles, constant forcing.
    """
    if name == "pure_diffusion":
        diffusivity = 50.0  # m^2 day^-1
        grid = Grid(length=1000.0, n_cells=n_cells or 50, l_euphotic=200.0)
        params = ModelParams(mu_p=0.0, g_z=0.0, m_p=0.0, m_z=0.0, mu_z=0.0,
                             mu_d=0.0, tau=0.0, v_d=0.0, gamma=0.0,
                             l_euphotic=200.0)
        state0 = StateVector(
            t=0.0,
            N=1.0 + np.cos(np.pi * grid.cell_centers / grid.length),
            P=np.zeros(grid.n_cells), Z=np.zeros(grid.n_cells),
            D=np.zeros(grid.n_cells))
        return {
            "grid": grid, "params": params, "optics": OpticalParams(),
            "mixing": ConstantMixing(diffusivity),
            "irradiance": ConstantIrradiance(1.0),
            "state0": state0, "diffusivity": diffusivity,
        }
    if name == "smooth_npzd":
        grid = Grid(length=100.0, n_cells=n_cells or 20, l_euphotic=40.0)
        params = ModelParams(l_euphotic=40.0)
        x = grid.cell_centers / grid.length
        bump = np.cos(np.pi * x)
        state0 = StateVector(t=0.0,
                             N=4.0 + 0.5 * bump,
                             P=1.0 + 0.3 * bump,
                             Z=0.4 + 0.1 * bump,
                             D=0.3 + 0.1 * bump)
        return {
            "grid": grid, "params": params, "optics": OpticalParams(),
            "mixing": ConstantMixing(10.0),
            "irradiance": ConstantIrradiance(1.0),
            "state0": state0,
        }
    raise ValueError(f"unknown preset scenario {name!r}")


@dataclass
class ConvergenceResult:
    """Richardson study output: observed errors/differences and orders."""

    spatial_cells: list[int] = field(default_factory=list)
    spatial_errors: list[float] = field(default_factory=list)
    spatial_orders: list[float] = field(default_factory=list)
    temporal_dts: list[float] = field(default_factory=list)
    temporal_diffs: list[float] = field(default_factory=list)
    temporal_orders: list[float] = field(default_factory=list)
    elapsed_seconds: float = 0.0

    def to_text(self) -> str:
        lines = []
        for n, err in zip(self.spatial_cells, self.spatial_errors):
            lines.append(f"spatial n_cells={n} l2_error={err:.6e}")
        for i, order in enumerate(self.spatial_orders):
            lines.append(f"spatial_order[{i}] = {order:.4f}")
        for dt, diff in zip(self.temporal_dts, self.temporal_diffs):
            lines.append(f"temporal dt={dt} refinement_gap={diff:.6e}")
        for i, order in enumerate(self.temporal_orders):
            lines.append(f"temporal_order[{i}] = {order:.4f}")
        lines.append(f"elapsed_seconds = {self.elapsed_seconds:.2f}")
        return "\n".join(lines) + "\n"


def convergence_study(which: str = "both", cell_counts=(25, 50, 100),
                      dts=(0.02, 0.01, 0.005, 0.0025)) -> ConvergenceResult:
    """Observed convergence orders of the splitting scheme.

    Spatial: the reaction-free diffusion preset against its exact
    solution on a doubling grid sequence (expected order ~2). Temporal:
    dt self-refinement of the smooth active preset at fixed grid
    (expected order ~1 from the first-order splitting).
    """
    from .solver import SolverConfig, run_splitting  # imported here: solver uses this module

    if which not in ("spatial", "temporal", "both"):
        raise ValueError(f"unknown study {which!r}")
    result = ConvergenceResult()
    start = time.perf_counter()

    if which in ("spatial", "both"):
        t_end, dt = 50.0, 0.01
        for n in cell_counts:
            scen = preset_scenario("pure_diffusion", n_cells=n)
            grid = scen["grid"]
            cfg = SolverConfig(dt=dt, t_end=t_end, lam=0.0,
                               snapshot_every=10 ** 9)
            traj = run_splitting(scen["state0"], grid, scen["params"],
                                 scen["optics"], scen["mixing"],
                                 scen["irradiance"], cfg)
            decay = np.exp(-scen["diffusivity"] * (np.pi / grid.length) ** 2 * t_end)
            exact = 1.0 + np.cos(np.pi * grid.cell_centers / grid.length) * decay
            err = np.sqrt(grid.cell_width * np.sum((traj.final_state.N - exact) ** 2))
            result.spatial_cells.append(n)
            result.spatial_errors.append(float(err))
        e = result.spatial_errors
        result.spatial_orders = [float(np.log2(e[i] / e[i + 1])) for i in range(len(e) - 1)]

    if which in ("temporal", "both"):
        t_end = 2.0
        dts = list(dts)
        finals = []
        for dt in dts:
            scen = preset_scenario("smooth_npzd")
            cfg = SolverConfig(dt=dt, t_end=t_end, snapshot_every=10 ** 9)
            traj = run_splitting(scen["state0"], scen["grid"], scen["params"],
                                 scen["optics"], scen["mixing"],
                                 scen["irradiance"], cfg)
            finals.append(traj.final_state.stack())
        dx = preset_scenario("smooth_npzd")["grid"].cell_width
        diffs = [state_norms(a - b, dx)[0] for a, b in zip(finals, finals[1:])]
        result.temporal_dts = dts
        result.temporal_diffs = [float(d) for d in diffs]
        result.temporal_orders = [float(np.log2(diffs[i] / diffs[i + 1]))
                                  for i in range(len(diffs) - 1)]

    result.elapsed_seconds = time.perf_counter() - start
    return result
