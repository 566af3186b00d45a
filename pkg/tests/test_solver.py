"""Substeps and drivers: diffusion, sinking, reaction, splitting, fixed point."""

import numpy as np
import pytest

from npzdcol import (BlowUpError, ConstantIrradiance, ConstantMixing, Grid,
                     ModelParams, OpticalParams, SeasonalMixing, SolverConfig,
                     StateVector, default_params, resolve_lambda, run_picard,
                     run_splitting, step_advection, step_diffusion,
                     step_reaction)
from npzdcol.analysis import preset_scenario, state_norms


def small_grid(n_cells=10, length=100.0, l_euphotic=50.0):
    return Grid(length=length, n_cells=n_cells, l_euphotic=l_euphotic)


def test_solver_config_defaults_and_steps():
    cfg = SolverConfig(dt=0.1, t_end=1.0)
    assert cfg.mode == "splitting"
    assert cfg.lam is None and cfg.truncation_n is None
    assert cfg.n_steps == 10


@pytest.mark.parametrize("kwargs", [
    dict(dt=0.0, t_end=1.0),
    dict(dt=0.1, t_end=0.0),
    dict(dt=0.1, t_end=1.0, mode="rk4"),
    dict(dt=0.1, t_end=1.0, lam=-1.0),
    dict(dt=0.1, t_end=1.0, truncation_n=0.0),
    dict(dt=0.1, t_end=1.0, picard_tol=0.0),
    dict(dt=0.1, t_end=1.0, picard_max_iters=0),
    dict(dt=0.1, t_end=1.0, snapshot_every=0),
    dict(dt=0.1, t_end=1.0, blowup_factor=1.0),
    dict(dt=0.3, t_end=1.0),  # not an integer number of steps
])
def test_solver_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_resolve_lambda():
    params = default_params()
    mixing = ConstantMixing(0.1)
    cfg = SolverConfig(dt=0.01, t_end=1.0)
    # default: the decay threshold from the diffusivity floor and v_d
    assert resolve_lambda(cfg, params, mixing) == pytest.approx(125.0)
    cfg = SolverConfig(dt=0.01, t_end=1.0, lam=3.0)
    assert resolve_lambda(cfg, params, mixing) == 3.0


def test_step_diffusion_leaves_uniform_fields_alone():
    grid = small_grid()
    u = np.full(grid.n_cells, 2.5)
    for mixing in (ConstantMixing(50.0), SeasonalMixing()):
        out = step_diffusion(u, grid, mixing, 3.0, 0.5)
        assert out == pytest.approx(u, rel=1e-13)


def test_step_diffusion_two_cell_hand_solution():
    # r = d dt / dx^2 = 0.1; the mean is preserved and the difference
    # shrinks by 1/(1 + 2r)
    grid = Grid(length=20.0, n_cells=2, l_euphotic=10.0)
    out = step_diffusion(np.array([4.0, 2.0]), grid, ConstantMixing(5.0), 0.0, 2.0)
    assert out[0] == pytest.approx(3.0 + 1.0 / 1.2, rel=1e-14)
    assert out[1] == pytest.approx(3.0 - 1.0 / 1.2, rel=1e-14)


def test_step_diffusion_conserves_mass():
    grid = small_grid(n_cells=100, length=1000.0, l_euphotic=200.0)
    rng = np.random.default_rng(5)
    stack = rng.uniform(0.0, 5.0, (4, grid.n_cells))
    out = step_diffusion(stack, grid, SeasonalMixing(), 40.0, 0.25)
    assert out.shape == stack.shape
    for k in range(4):
        assert out[k].sum() == pytest.approx(stack[k].sum(), rel=1e-12)


def test_step_diffusion_smooths_gradients():
    grid = small_grid(n_cells=50, length=100.0, l_euphotic=50.0)
    u = np.zeros(50)
    u[:25] = 4.0
    out = step_diffusion(u, grid, ConstantMixing(10.0), 0.0, 1.0)
    assert float(out.max()) < 4.0
    assert float(out.min()) > 0.0


def test_step_advection_uniform_hand_example():
    grid = small_grid()  # dx = 10
    u = np.full(10, 3.0)
    out, export = step_advection(u, grid, 5.0, 1.0)
    # only the top cell loses mass; everything below receives what its
    # upstream neighbor sheds
    assert out[0] == pytest.approx(3.0 * (1.0 - 0.5))
    assert out[1:] == pytest.approx(np.full(9, 3.0))
    assert export == pytest.approx(5.0 * 1.0 * 3.0)


def test_step_advection_zero_speed_and_zero_field():
    grid = small_grid()
    u = np.linspace(0.0, 5.0, 10)
    out, export = step_advection(u, grid, 0.0, 1.0)
    assert np.array_equal(out, u) and export == 0.0
    out, export = step_advection(np.zeros(10), grid, 5.0, 1.0)
    assert np.all(out == 0.0) and export == 0.0
    with pytest.raises(ValueError):
        step_advection(u, grid, -1.0, 1.0)


def test_step_advection_mass_ledger():
    grid = small_grid(n_cells=40, length=400.0, l_euphotic=200.0)
    rng = np.random.default_rng(11)
    u = rng.uniform(0.0, 2.0, 40)
    out, export = step_advection(u, grid, 5.0, 0.5)
    before = grid.cell_width * u.sum()
    after = grid.cell_width * out.sum()
    assert after - before == pytest.approx(-export, rel=1e-12)
    assert np.all(out >= 0.0)


def test_step_advection_subcycles_match_sequential_steps():
    grid = small_grid()  # dx = 10
    rng = np.random.default_rng(13)
    u = rng.uniform(0.0, 2.0, 10)
    # v dt = 20 > dx forces two inner steps of courant 1
    whole, export_whole = step_advection(u, grid, 5.0, 4.0)
    half1, e1 = step_advection(u, grid, 5.0, 2.0)
    half2, e2 = step_advection(half1, grid, 5.0, 2.0)
    assert whole == pytest.approx(half2, rel=1e-14)
    assert export_whole == pytest.approx(e1 + e2, rel=1e-14)


def deep_cell_state(grid):
    n = grid.n_cells
    zeros = np.zeros(n)
    state = np.zeros((4, n))
    state[1, -1] = 1.0
    state[2, -1] = 1.0
    state[3, -1] = 1.0
    return StateVector(t=0.0, N=zeros, P=state[1], Z=state[2], D=state[3])


def test_step_reaction_aphotic_hand_values():
    grid = small_grid()
    params, optics = default_params(), OpticalParams()
    state = deep_cell_state(grid)
    out = step_reaction(state, grid, params, optics, ConstantIrradiance(1.0),
                        0.0, 0.1)
    # below the euphotic depth only remineralization acts:
    # dN = dt * tau * (P + Z + D), dP = -dt * tau * P, and so on
    assert out.N[-1] == pytest.approx(0.015)
    assert out.P[-1] == pytest.approx(0.995)
    assert out.Z[-1] == pytest.approx(0.995)
    assert out.D[-1] == pytest.approx(0.995)
    assert out.t == pytest.approx(0.1)


def test_step_reaction_zero_state_stays_zero():
    grid = small_grid()
    state = StateVector(t=0.0, N=np.zeros(10), P=np.zeros(10),
                        Z=np.zeros(10), D=np.zeros(10))
    out = step_reaction(state, grid, default_params(), OpticalParams(),
                        ConstantIrradiance(1.0), 0.0, 0.1)
    assert out.max_abs() == 0.0


def test_step_reaction_shift_cancels():
    grid = small_grid()
    rng = np.random.default_rng(17)
    c = rng.uniform(0.0, 3.0, (4, 10))
    state = StateVector(t=0.0, N=c[0], P=c[1], Z=c[2], D=c[3])
    args = (grid, default_params(), OpticalParams(), ConstantIrradiance(1.0), 0.0, 0.05)
    plain = step_reaction(state, *args, lam=0.0)
    shifted = step_reaction(state, *args, lam=5.0)
    assert shifted.stack() == pytest.approx(plain.stack(), abs=1e-12)


def test_step_reaction_gate_rejects_large_dt():
    grid = small_grid()
    state = deep_cell_state(grid)
    with pytest.raises(ValueError):
        step_reaction(state, grid, default_params(), OpticalParams(),
                      ConstantIrradiance(1.0), 0.0, 0.5)


def scenario(n_cells=20):
    grid = Grid(length=100.0, n_cells=n_cells, l_euphotic=50.0)
    rng = np.random.default_rng(19)
    state = StateVector(t=0.0,
                        N=rng.uniform(1.0, 4.0, n_cells),
                        P=rng.uniform(0.1, 1.0, n_cells),
                        Z=rng.uniform(0.05, 0.4, n_cells),
                        D=rng.uniform(0.05, 0.4, n_cells))
    return grid, state, default_params(), OpticalParams(), ConstantMixing(10.0), ConstantIrradiance(1.0)


def test_run_splitting_zero_state_is_fixed_point():
    grid, _, params, optics, mixing, irradiance = scenario()
    zero = StateVector(t=0.0, N=np.zeros(20), P=np.zeros(20),
                       Z=np.zeros(20), D=np.zeros(20))
    cfg = SolverConfig(dt=0.05, t_end=1.0, lam=0.0)
    traj = run_splitting(zero, grid, params, optics, mixing, irradiance, cfg)
    assert traj.final_state.max_abs() == 0.0
    assert np.all(traj.total_n == 0.0)
    assert np.all(traj.bottom_export == 0.0)


def test_run_splitting_pure_diffusion_conserves_nutrient():
    grid, _, params, optics, mixing, irradiance = scenario()
    rng = np.random.default_rng(23)
    n0 = rng.uniform(1.0, 5.0, 20)
    zeros = np.zeros(20)
    state = StateVector(t=0.0, N=n0, P=zeros, Z=zeros, D=zeros)
    cfg = SolverConfig(dt=0.05, t_end=5.0, lam=0.0)
    traj = run_splitting(state, grid, params, optics, mixing, irradiance, cfg)
    assert traj.total_n == pytest.approx(np.full_like(traj.total_n, traj.total_n[0]),
                                         rel=1e-12)
    assert np.all(traj.bottom_export == 0.0)


def test_run_splitting_per_step_budget():
    grid, state, params, optics, mixing, irradiance = scenario()
    cfg = SolverConfig(dt=0.01, t_end=2.0, lam=0.0)
    traj = run_splitting(state, grid, params, optics, mixing, irradiance, cfg)
    drift = np.diff(traj.total_n) + traj.bottom_export[1:]
    assert np.all(np.abs(drift) <= 1e-10 * traj.total_n[0])


def test_run_splitting_records_expected_shapes():
    grid, state, params, optics, mixing, irradiance = scenario()
    cfg = SolverConfig(dt=0.05, t_end=1.0, lam=0.0, snapshot_every=5)
    traj = run_splitting(state, grid, params, optics, mixing, irradiance, cfg)
    assert traj.diag_t.size == cfg.n_steps + 1
    assert traj.diag_t[-1] == pytest.approx(1.0)
    # snapshots at step 0, every fifth step, and the final step
    assert len(traj.snapshots) == 5
    assert traj.snapshot_times[-1] == pytest.approx(1.0)
    assert traj.mode == "splitting"


def test_run_splitting_blowup_guard():
    grid = Grid(length=100.0, n_cells=10, l_euphotic=50.0)
    ones = np.ones(10)
    state = StateVector(t=0.0, N=ones, P=ones, Z=np.zeros(10), D=np.zeros(10))
    cfg = SolverConfig(dt=0.01, t_end=1.0, lam=0.0, blowup_factor=1.000001)
    with pytest.raises(BlowUpError) as err:
        run_splitting(state, grid, default_params(), OpticalParams(),
                      ConstantMixing(10.0), ConstantIrradiance(1.0), cfg)
    assert err.value.t > 0.0
    assert err.value.max_abs > err.value.limit


def test_run_splitting_gate_checked_at_start():
    grid, state, params, optics, mixing, irradiance = scenario()
    cfg = SolverConfig(dt=0.5, t_end=1.0, lam=0.0)
    with pytest.raises(ValueError):
        run_splitting(state, grid, params, optics, mixing, irradiance, cfg)


def test_run_picard_requires_truncation():
    grid, state, params, optics, mixing, irradiance = scenario()
    cfg = SolverConfig(dt=0.01, t_end=0.1, mode="picard", lam=0.0)
    with pytest.raises(ValueError):
        run_picard(state, grid, params, optics, mixing, irradiance, cfg)


def test_run_picard_zero_state_converges_immediately():
    grid, _, params, optics, mixing, irradiance = scenario()
    zero = StateVector(t=0.0, N=np.zeros(20), P=np.zeros(20),
                       Z=np.zeros(20), D=np.zeros(20))
    cfg = SolverConfig(dt=0.01, t_end=0.1, mode="picard", lam=0.0,
                       truncation_n=1e6)
    traj = run_picard(zero, grid, params, optics, mixing, irradiance, cfg)
    assert traj.final_state.max_abs() == 0.0
    assert np.all(traj.picard_iterations[1:] == 1)


def test_run_picard_agrees_with_splitting():
    sc = preset_scenario("smooth_npzd")
    grid = sc["grid"]
    args = (sc["state0"], grid, sc["params"], sc["optics"], sc["mixing"],
            sc["irradiance"])
    cfg_s = SolverConfig(dt=0.005, t_end=0.1, lam=0.0, truncation_n=1e6)
    cfg_p = SolverConfig(dt=0.005, t_end=0.1, mode="picard", lam=0.0,
                         truncation_n=1e6)
    traj_s = run_splitting(*args, cfg_s)
    traj_p = run_picard(*args, cfg_p)
    gap = state_norms(traj_s.final_state.stack() - traj_p.final_state.stack(),
                      grid.cell_width)[0]
    ref = state_norms(traj_s.final_state.stack(), grid.cell_width)[0]
    assert gap / ref < 1e-3
    assert int(traj_p.picard_iterations[1:].max()) <= 10


def test_truncation_level_barely_matters_for_small_states():
    # sources are far below either ceiling, so the two runs nearly agree
    sc = preset_scenario("smooth_npzd")
    grid = sc["grid"]
    small = StateVector.from_stack(0.0, sc["state0"].stack() * 1e-3)
    finals = {}
    for n in (1e3, 1e6):
        cfg = SolverConfig(dt=0.01, t_end=0.5, lam=0.0, truncation_n=n)
        traj = run_splitting(small, grid, sc["params"], sc["optics"],
                             sc["mixing"], sc["irradiance"], cfg)
        finals[n] = traj.final_state.stack()
    gap = state_norms(finals[1e3] - finals[1e6], grid.cell_width)[0]
    ref = state_norms(finals[1e6], grid.cell_width)[0]
    assert gap / ref < 1e-6


def test_run_splitting_rejects_non_finite_initial():
    grid, state, params, optics, mixing, irradiance = scenario()
    cfg = SolverConfig(dt=0.01, t_end=0.1, lam=0.0)
    c = state.stack()
    with pytest.raises(ValueError):
        bad = StateVector(t=0.0, N=c[0] * np.nan, P=c[1], Z=c[2], D=c[3])
        run_splitting(bad, grid, params, optics, mixing, irradiance, cfg)
