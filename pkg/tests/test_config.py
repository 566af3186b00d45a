"""Config parsing, validation, and the resolved-config echo."""

import numpy as np
import pytest

try:
    import tomllib as tomli  # python >= 3.11
except ModuleNotFoundError:
    import tomli

from npzdcol import (ConfigError, ConstantIrradiance, ConstantMixing,
                     DiurnalIrradiance, FileMixing, SeasonalMixing,
                     build_setup, emit_toml, load_config, resolved_config)


def minimal_raw(**extra):
    raw = {
        "grid": {"length": 1000.0, "n_cells": 100},
        "solver": {"dt": 0.01, "t_end": 1.0},
    }
    raw.update(extra)
    return raw


def test_minimal_config_defaults(tmp_path):
    setup = build_setup(minimal_raw(), base_dir=tmp_path)
    assert setup.grid.n_cells == 100
    assert setup.grid.l_euphotic == 200.0
    assert isinstance(setup.mixing, SeasonalMixing)
    assert isinstance(setup.irradiance, DiurnalIrradiance)
    # k_par tracks the irradiance amplitude when not pinned
    assert setup.optics.k_par == pytest.approx(0.3 * setup.irradiance.sup)
    # lambda resolves to the coercivity threshold of the mixing floor
    assert setup.solver.lam == pytest.approx(5.0 ** 2 / (2.0 * 5.0))
    assert setup.out_dir == tmp_path / "out"
    assert setup.seed == 0
    assert setup.verify_samples == 10_000
    assert setup.initial.max_abs() == 0.0


def test_load_config_reads_toml(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[grid]\nlength = 500.0\nn_cells = 50\n"
                    "[solver]\ndt = 0.01\nt_end = 1.0\n")
    raw = load_config(path)
    setup = build_setup(raw, base_dir=tmp_path)
    assert setup.grid.length == 500.0


@pytest.mark.parametrize("raw", [
    {"gird": {}, "grid": {"length": 100.0, "n_cells": 10},
     "solver": {"dt": 0.01, "t_end": 1.0}},
    minimal_raw(grid={"length": 100.0, "n_cells": 10, "lenght": 1.0}),
    minimal_raw(model={"k_nn": 0.5}),
    minimal_raw(optics={"kpar": 0.3}),
    minimal_raw(solver={"dt": 0.01, "t_end": 1.0, "step": 5}),
    minimal_raw(initial={"N": 1.0, "Q": 1.0}),
    minimal_raw(mixing={"kind": "constant", "h_min": 5.0}),
])
def test_unknown_keys_are_rejected(raw):
    with pytest.raises(ConfigError):
        build_setup(raw)


def test_grid_requires_length_and_cells():
    with pytest.raises(ConfigError):
        build_setup({"grid": {"length": 100.0}, "solver": {"dt": 0.01, "t_end": 1.0}})
    with pytest.raises(ConfigError):
        build_setup({"solver": {"dt": 0.01, "t_end": 1.0}})


def test_model_params_flow_through():
    raw = minimal_raw(model={"k_n": 0.7, "grazing": "switching", "switch_r": 0.4})
    setup = build_setup(raw)
    assert setup.params.k_n == 0.7
    assert setup.params.grazing.value == "switching"
    assert setup.params.switch_r == 0.4
    # the euphotic depth lives on the grid and is mirrored into the params
    assert setup.params.l_euphotic == setup.grid.l_euphotic


def test_invalid_model_values_become_config_errors():
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(model={"a_p": 1.5}))
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(model={"k_n": -1.0}))


def test_solver_section():
    raw = minimal_raw(solver={"dt": 0.02, "t_end": 2.0, "mode": "picard",
                              "truncation_n": 1000.0, "lambda": 3.0,
                              "snapshot_every": 7})
    setup = build_setup(raw)
    assert setup.solver.dt == 0.02
    assert setup.solver.mode == "picard"
    assert setup.solver.lam == 3.0
    assert setup.solver.truncation_n == 1000.0
    assert setup.solver.snapshot_every == 7


def test_solver_requires_dt_and_t_end():
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(solver={"dt": 0.01}))
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(solver={"t_end": 1.0}))


def test_picard_mode_requires_truncation():
    raw = minimal_raw(solver={"dt": 0.01, "t_end": 1.0, "mode": "picard"})
    with pytest.raises(ConfigError):
        build_setup(raw)
    # the truncation override satisfies the requirement
    setup = build_setup(raw, truncation_override=1e6)
    assert setup.solver.truncation_n == 1e6


def test_overrides_win(tmp_path):
    raw = minimal_raw(output={"directory": "results"},
                      verify={"seed": 9, "n_samples": 100})
    setup = build_setup(raw, base_dir=tmp_path, out_override=tmp_path / "other",
                        seed_override=17, mode_override="splitting")
    assert setup.out_dir == tmp_path / "other"
    assert setup.seed == 17
    assert setup.verify_samples == 100


def test_mixing_kinds(tmp_path):
    setup = build_setup(minimal_raw(mixing={"kind": "constant", "value": 25.0}))
    assert isinstance(setup.mixing, ConstantMixing)
    assert setup.mixing.value == 25.0
    assert setup.solver.lam == pytest.approx(0.5)

    setup = build_setup(minimal_raw(mixing={"kind": "seasonal", "d_min": 2.0}))
    assert setup.mixing.d_min == 2.0

    table = tmp_path / "mix.csv"
    table.write_text("time_day,depth_m,d_m2_per_day\n"
                     "0,0,10\n0,1000,10\n400,0,10\n400,1000,10\n")
    setup = build_setup(minimal_raw(mixing={"kind": "file", "path": "mix.csv"}),
                        base_dir=tmp_path)
    assert isinstance(setup.mixing, FileMixing)
    assert setup.mixing.source_path == str(table.resolve())

    with pytest.raises(ConfigError):
        build_setup(minimal_raw(mixing={"kind": "file"}))
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(mixing={"kind": "tidal"}))
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(mixing={"kind": "file", "path": "missing.csv"}),
                    base_dir=tmp_path)


def test_irradiance_kinds(tmp_path):
    setup = build_setup(minimal_raw(irradiance={"kind": "constant", "value": 2.0}))
    assert isinstance(setup.irradiance, ConstantIrradiance)
    # default k_par scales with the larger forcing
    assert setup.optics.k_par == pytest.approx(0.6)

    dark = build_setup(minimal_raw(irradiance={"kind": "constant", "value": 0.0}))
    assert dark.optics.k_par == pytest.approx(0.3)

    table = tmp_path / "q.csv"
    table.write_text("time_day,q\n0,0\n500,1\n")
    setup = build_setup(minimal_raw(irradiance={"kind": "file", "path": "q.csv"}),
                        base_dir=tmp_path)
    assert setup.irradiance.sup == 1.0

    explicit = build_setup(minimal_raw(
        irradiance={"kind": "constant", "value": 2.0},
        optics={"k_par": 0.111}))
    assert explicit.optics.k_par == 0.111


def test_initial_bare_number_is_constant_profile():
    setup = build_setup(minimal_raw(initial={"N": 2.5, "P": 0.5}))
    assert np.all(setup.initial.N == 2.5)
    assert np.all(setup.initial.P == 0.5)
    assert np.all(setup.initial.Z == 0.0)
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(initial={"N": -1.0}))


def test_initial_exponential_profile():
    raw = minimal_raw(initial={"P": {"kind": "exponential", "surface": 1.0,
                                     "deep": 0.1, "scale_m": 100.0}})
    setup = build_setup(raw)
    x = setup.grid.cell_centers
    expected = 0.1 + 0.9 * np.exp(-x / 100.0)
    assert setup.initial.P == pytest.approx(expected)
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(initial={"P": {"kind": "exponential", "scale_m": 0.0}}))


def test_initial_cells_profile():
    values = [float(i) for i in range(100)]
    setup = build_setup(minimal_raw(initial={"Z": {"kind": "cells", "values": values}}))
    assert setup.initial.Z.tolist() == values
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(initial={"Z": {"kind": "cells", "values": [1.0, 2.0]}}))
    bad = [-1.0] + values[1:]
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(initial={"Z": {"kind": "cells", "values": bad}}))


def test_initial_file_profile(tmp_path):
    table = tmp_path / "n0.csv"
    table.write_text("depth_m,value\n0,4\n1000,2\n")
    raw = minimal_raw(initial={"N": {"kind": "file", "path": "n0.csv"}})
    setup = build_setup(raw, base_dir=tmp_path)
    x = setup.grid.cell_centers
    assert setup.initial.N == pytest.approx(4.0 - 2.0 * x / 1000.0)

    bad = tmp_path / "bad.csv"
    bad.write_text("depth_m,value\n10,4\n0,2\n")
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(initial={"N": {"kind": "file", "path": "bad.csv"}}),
                    base_dir=tmp_path)


def test_converge_section_validation():
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(converge={"cell_counts": [25, 50]}))
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(converge={"dts": [0.01, 0.01, 0.005]}))
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(converge={"cell_counts": [25, "50", 100]}))
    setup = build_setup(minimal_raw(converge={"cell_counts": [10, 20, 40],
                                              "dts": [0.02, 0.01, 0.005]}))
    assert setup.converge_cells == (10, 20, 40)
    assert setup.converge_dts == (0.02, 0.01, 0.005)


def test_verify_section_validation():
    with pytest.raises(ConfigError):
        build_setup(minimal_raw(verify={"n_samples": 0}))


def test_emit_toml_round_trips():
    data = {
        "flag": True,
        "count": 3,
        "ratio": 5.0,
        "name": 'needs "quoting"',
        "levels": [1, 2, 3],
        "nested": {"x": 1.5, "inner": {"y": "z"}},
    }
    parsed = tomli.loads(emit_toml(data))
    assert parsed == data
    # floats keep a marker so they re-parse as floats
    assert "ratio = 5.0" in emit_toml(data)
    with pytest.raises(TypeError):
        emit_toml({"bad": object()})


def test_resolved_config_echo_reproduces_setup(tmp_path):
    raw = minimal_raw(
        model={"grazing": "shared_mm", "k_n": 0.6},
        mixing={"kind": "constant", "value": 30.0},
        irradiance={"kind": "constant", "value": 1.5},
        initial={"N": {"kind": "exponential", "surface": 4.0, "deep": 1.0,
                       "scale_m": 80.0},
                 "P": 0.5},
    )
    setup = build_setup(raw, base_dir=tmp_path)
    echo = resolved_config(setup)
    assert echo["solver"]["lambda"] == setup.solver.lam
    text = emit_toml(echo)
    setup2 = build_setup(tomli.loads(text), base_dir=tmp_path)
    assert (setup2.grid.length, setup2.grid.n_cells, setup2.grid.l_euphotic) \
        == (setup.grid.length, setup.grid.n_cells, setup.grid.l_euphotic)
    assert setup2.params == setup.params
    assert setup2.solver == setup.solver
    assert setup2.initial.stack() == pytest.approx(setup.initial.stack(), rel=0, abs=0)
    assert type(setup2.mixing) is type(setup.mixing)
