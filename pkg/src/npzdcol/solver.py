"""Time integration for the four-pool column model.

Two drivers advance the same spatial discretization. ``run_splitting``
takes a Lie-splitting step per dt: explicit reaction, explicit upwind
sinking on detritus (sub-cycled to respect CFL), then backward-Euler
diffusion. ``run_picard`` treats every dt slab with a fixed-point
iteration on the shifted, truncated source: each iterate solves one
implicit linear parabolic step whose right-hand side uses the previous
iterate's source. The fixed-point driver is the constructive route to
existence; the splitting driver is the fast reference it is checked
against.

Conventions: x increases downward, so sinking moves mass toward larger
cell indices and out of the last cell; that exported flux is returned
to the caller per step and logged, never silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .analysis import coercivity_constant, coercivity_lambda, state_norms
from .core import Grid, ModelParams, StateVector, Trajectory
from .optics import OpticalParams, light_limit, par_profile
from .reactions import bound_constants, eval_reaction, truncate


class BlowUpError(RuntimeError):
    """Raised when the state magnitude trips the runaway guard."""

    def __init__(self, t: float, max_abs: float, limit: float):
        super().__init__(
            f"state magnitude {max_abs:.6e} exceeded the blow-up guard "
            f"{limit:.6e} at t = {t:.6g} day")
        self.t = t
        self.max_abs = max_abs
        self.limit = limit


class PicardNonConvergence(RuntimeError):
    """Raised when a time slab's fixed-point iteration fails to settle."""

    def __init__(self, t: float, residuals: list[float], tol: float,
                 contraction_factor: float):
        tail = ", ".join(f"{r:.3e}" for r in residuals[-5:])
        super().__init__(
            f"fixed-point iteration on the slab ending at t = {t:.6g} day "
            f"did not reach tol {tol:.1e} in {len(residuals)} iterations "
            f"(last residuals: {tail}; theoretical contraction factor "
            f"sqrt(dt/(2 c0)) = {contraction_factor:.3e})")
        self.t = t
        self.residuals = residuals
        self.tol = tol
        self.contraction_factor = contraction_factor


@dataclass
class SolverConfig:
    """Run controls shared by both drivers.

    ``lam`` is the zero-order shift of the equivalent shifted
    formulation; None resolves to the certified coercivity threshold
    v_d^2/(2 d0) once the mixing field's floor is known. The explicit
    reaction substep additionally requires dt * M_g < 1, which is
    checked at run start where the model parameters are available.
    """

    dt: float
    t_end: float
    mode: str = "splitting"
    lam: float | None = None
    truncation_n: float | None = None
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    snapshot_every: int = 100
    blowup_factor: float = 1e6
    enforce_floor: bool = False

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0.0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.mode not in ("splitting", "picard"):
            raise ValueError(f"mode must be 'splitting' or 'picard', got {self.mode!r}")
        if self.lam is not None and self.lam < 0.0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.truncation_n is not None and not self.truncation_n > 0.0:
            raise ValueError(f"truncation_n must be positive, got {self.truncation_n}")
        if not self.picard_tol > 0.0:
            raise ValueError(f"picard_tol must be positive, got {self.picard_tol}")
        if self.picard_max_iters < 1:
            raise ValueError(f"picard_max_iters must be >= 1, got {self.picard_max_iters}")
        if self.snapshot_every < 1:
            raise ValueError(f"snapshot_every must be >= 1, got {self.snapshot_every}")
        if not self.blowup_factor > 1.0:
            raise ValueError(f"blowup_factor must exceed 1, got {self.blowup_factor}")
        steps = round(self.t_end / self.dt)
        if steps < 1 or abs(steps * self.dt - self.t_end) > 1e-9 * max(self.t_end, 1.0):
            raise ValueError(f"t_end = {self.t_end} is not an integer multiple of dt = {self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def resolve_lambda(config: SolverConfig, params: ModelParams, mixing) -> float:
    """Shift actually used by a run: explicit value or the certified threshold."""
    if config.lam is not None:
        return float(config.lam)
    return coercivity_lambda(mixing.d_floor, params.v_d)


def _check_reaction_gate(dt: float, params: ModelParams, lam: float) -> None:
    m_g = bound_constants(params, lam=lam).m_g
    if dt * m_g >= 1.0:
        raise ValueError(
            f"dt * M_g = {dt * m_g:.4g} >= 1: the explicit reaction substep "
            f"is outside its stability bound (M_g = {m_g:.4g}, dt = {dt})")


# ---------------------------------------------------------------------------
# substeps

def _face_diffusivity(grid: Grid, mixing, t: float) -> np.ndarray:
    """Interior-face diffusivities: harmonic mean of adjacent cell values."""
    d = np.asarray(mixing.at(t, grid.cell_centers), dtype=float)
    if d.ndim == 0:
        d = np.full(grid.n_cells, float(d))
    if np.any(d <= 0.0):
        raise ValueError(f"mixing coefficient must stay positive, got min {d.min()}")
    return 2.0 * d[:-1] * d[1:] / (d[:-1] + d[1:])


def _diffusion_banded(d_faces: np.ndarray, dt: float, dx: float,
                      extra_diag: float = 0.0) -> np.ndarray:
    """Banded (I + dt*A + extra_diag) for the zero-flux diffusion operator.

    Layout matches scipy.linalg.solve_banded with (1, 1) bands.
    """
    n = d_faces.size + 1
    w = dt / (dx * dx)
    ab = np.zeros((3, n))
    ab[0, 1:] = -w * d_faces
    ab[2, :-1] = -w * d_faces
    ab[1] = 1.0 + extra_diag
    ab[1, :-1] += w * d_faces
    ab[1, 1:] += w * d_faces
    return ab


def _add_implicit_sinking(ab: np.ndarray, dt: float, dx: float, v: float) -> np.ndarray:
    """Add implicit upwind sinking (outflow bottom, no surface inflow)."""
    ab = ab.copy()
    r = dt * v / dx
    ab[1] += r
    ab[2, :-1] -= r
    return ab


def step_diffusion(fields, grid: Grid, mixing, t: float, dt: float) -> np.ndarray:
    """Backward-Euler diffusion of one (n,) array or a (k, n) stack.

    Zero-flux boundaries make the cell sum an invariant of this
    substep up to linear-solve rounding.
    """
    fields = np.asarray(fields, dtype=float)
    ab = _diffusion_banded(_face_diffusivity(grid, mixing, t), dt, grid.cell_width)
    if fields.ndim == 1:
        return solve_banded((1, 1), ab, fields)
    return solve_banded((1, 1), ab, fields.T).T


def step_advection(d_field, grid: Grid, v_d: float, dt: float) -> tuple[np.ndarray, float]:
    """Explicit upwind sinking of detritus; returns (new field, export).

    Sub-cycles so each inner step satisfies v_d * dt_sub <= dx. Export
    is the mass per unit area leaving the bottom face, accumulated from
    the upwind outflow flux of every inner step.
    """
    u = np.array(d_field, dtype=float)
    if v_d == 0.0:
        return u, 0.0
    if v_d < 0.0:
        raise ValueError(f"sinking speed must be nonnegative, got {v_d}")
    n_sub = max(1, int(np.ceil(v_d * dt / grid.cell_width)))
    dt_sub = dt / n_sub
    courant = v_d * dt_sub / grid.cell_width
    export = 0.0
    jump = np.empty_like(u)
    for _ in range(n_sub):
        export += v_d * dt_sub * u[-1]
        jump[0] = u[0]
        jump[1:] = u[1:] - u[:-1]
        u -= courant * jump
    return u, export


def _reaction_update(c: np.ndarray, grid: Grid, params: ModelParams,
                     optics: OpticalParams, q: float, dt: float,
                     lam: float, truncation_n: float | None) -> np.ndarray:
    """One explicit Euler step of the shifted, optionally truncated source.

    Light limitation is evaluated once from the substep-start P. The
    update is written as C + dt*(g_n - lam*C) so the shifted and plain
    formulations share one code path.
    """
    par_vals = par_profile(grid.cell_centers, grid.cell_width, c[1], q, optics)
    l_i = light_limit(par_vals, params, optics)
    g = eval_reaction(c, l_i, grid.euphotic_mask, params, lam=lam)
    g_n = truncate(g, truncation_n)
    return c + dt * (g_n - lam * c)


def step_reaction(state: StateVector, grid: Grid, params: ModelParams,
                  optics: OpticalParams, irradiance, t: float, dt: float,
                  lam: float = 0.0, truncation_n: float | None = None) -> StateVector:
    """Explicit reaction substep on a full state."""
    _check_reaction_gate(dt, params, lam)
    q = float(irradiance.at(t))
    c_new = _reaction_update(state.stack(), grid, params, optics, q, dt,
                             lam, truncation_n)
    if not np.isfinite(c_new).all():
        raise FloatingPointError(f"non-finite state after reaction step at t = {t}")
    return StateVector.from_stack(state.t + dt, c_new)


# ---------------------------------------------------------------------------
# drivers

def _start_trajectory(initial: StateVector, grid: Grid, mode: str,
                      config: SolverConfig, lam: float) -> tuple[Trajectory, np.ndarray, float]:
    c = initial.stack()
    if not np.isfinite(c).all():
        raise ValueError("initial state contains non-finite values")
    traj = Trajectory(grid, mode, config.dt, lam, config.truncation_n)
    traj.initial_max_abs = initial.max_abs()
    l2, h1 = state_norms(c, grid.cell_width)
    traj.initial_l2 = l2
    traj._record(0.0, grid.cell_width * c.sum(), l2, h1, float(c.min()), 0.0)
    traj.snapshots.append(StateVector.from_stack(0.0, c))
    traj.snapshot_times.append(0.0)
    limit = config.blowup_factor * max(traj.initial_max_abs, 1.0)
    return traj, c, limit


def _close_step(traj: Trajectory, grid: Grid, config: SolverConfig,
                c: np.ndarray, t_next: float, export: float, limit: float,
                step_index: int, picard_iters: int = 0) -> None:
    if config.enforce_floor:
        np.maximum(c, 0.0, out=c)
    max_abs = float(np.abs(c).max()) if c.size else 0.0
    if not np.isfinite(max_abs) or max_abs > limit:
        raise BlowUpError(t_next, max_abs, limit)
    l2, h1 = state_norms(c, grid.cell_width)
    traj._record(t_next, grid.cell_width * c.sum(), l2, h1, float(c.min()),
                 export, picard_iters)
    if step_index % config.snapshot_every == 0 or step_index == config.n_steps:
        traj.snapshots.append(StateVector.from_stack(t_next, c))
        traj.snapshot_times.append(t_next)


def run_splitting(initial: StateVector, grid: Grid, params: ModelParams,
                  optics: OpticalParams, mixing, irradiance,
                  config: SolverConfig) -> Trajectory:
    """Advance by Lie splitting: reaction, then sinking, then diffusion.

    Diffusion is implicit at the end-of-step time; the other substeps
    are explicit at the start-of-step time.
    """
    lam = resolve_lambda(config, params, mixing)
    _check_reaction_gate(config.dt, params, lam)
    traj, c, limit = _start_trajectory(initial, grid, "splitting", config, lam)
    dt, dx = config.dt, grid.cell_width
    for k in range(config.n_steps):
        t_k = k * dt
        t_next = (k + 1) * dt
        q = float(irradiance.at(t_k))
        c = _reaction_update(c, grid, params, optics, q, dt, lam,
                             config.truncation_n)
        c[3], export = step_advection(c[3], grid, params.v_d, dt)
        ab = _diffusion_banded(_face_diffusivity(grid, mixing, t_next), dt, dx)
        c = solve_banded((1, 1), ab, c.T).T
        _close_step(traj, grid, config, c, t_next, export, limit, k + 1)
    traj._finalize()
    return traj


def run_picard(initial: StateVector, grid: Grid, params: ModelParams,
               optics: OpticalParams, mixing, irradiance,
               config: SolverConfig) -> Trajectory:
    """Advance by per-slab fixed-point iteration on the truncated source.

    Each slab of length dt solves, repeatedly, the implicit linear step
    (I + dt*A + dt*lam) C_new = C_old + dt * g_n(C_prev_iterate) until
    successive iterates agree to picard_tol in relative L2. Detritus
    carries an extra implicit upwind sinking term; its bottom outflow
    at the converged value is the step's export.
    """
    if config.truncation_n is None:
        raise ValueError("fixed-point mode requires truncation_n to be set")
    lam = resolve_lambda(config, params, mixing)
    _check_reaction_gate(config.dt, params, lam)
    c0 = coercivity_constant(mixing.d_floor, params.v_d, lam)
    contraction = float(np.sqrt(config.dt / (2.0 * c0))) if c0 > 0.0 else np.inf
    traj, c, limit = _start_trajectory(initial, grid, "picard", config, lam)
    dt, dx = config.dt, grid.cell_width
    for k in range(config.n_steps):
        t_k = k * dt
        t_next = (k + 1) * dt
        q = float(irradiance.at(t_k))
        ab_base = _diffusion_banded(_face_diffusivity(grid, mixing, t_next),
                                    dt, dx, extra_diag=dt * lam)
        ab_sink = _add_implicit_sinking(ab_base, dt, dx, params.v_d)
        iterate = c
        residuals: list[float] = []
        for _ in range(config.picard_max_iters):
            par_vals = par_profile(grid.cell_centers, dx, iterate[1], q, optics)
            l_i = light_limit(par_vals, params, optics)
            g = eval_reaction(iterate, l_i, grid.euphotic_mask, params, lam=lam)
            rhs = c + dt * truncate(g, config.truncation_n)
            c_new = np.empty_like(c)
            c_new[:3] = solve_banded((1, 1), ab_base, rhs[:3].T).T
            c_new[3] = solve_banded((1, 1), ab_sink, rhs[3])
            gap = state_norms(c_new - iterate, dx)[0]
            scale = max(state_norms(c_new, dx)[0], 1e-300)
            residuals.append(gap / scale)
            iterate = c_new
            if residuals[-1] < config.picard_tol:
                break
        else:
            raise PicardNonConvergence(t_next, residuals, config.picard_tol,
                                       contraction)
        c = iterate
        export = params.v_d * dt * c[3, -1]
        _close_step(traj, grid, config, c, t_next, export, limit, k + 1,
                    picard_iters=len(residuals))
    traj._finalize()
    return traj
