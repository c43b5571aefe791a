import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optomulti.cli import (
    GridSpec,
    RunConfig,
    figure_playbook,
    format_config,
    main,
    parse_config,
    run,
)
from optomulti.errors import ConfigError
from optomulti.model import ModelParams
from optomulti.output import (
    read_csv,
    read_grid,
    read_snapshot,
    write_csv,
    write_grid,
    write_snapshot,
)

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(values=st.lists(finite, min_size=1, max_size=20))
@settings(max_examples=50)
def test_csv_roundtrip_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    arr = np.array(values)
    write_csv(path, {"v": arr})
    back = read_csv(path)["v"]
    assert np.array_equal(back, arr)


def test_csv_complex_roundtrip(tmp_path):
    arr = np.array([1 + 2j, -0.5j, 3.25 + 0j])
    write_csv(tmp_path / "c.csv", {"z": arr, "tau": np.arange(3.0)})
    back = read_csv(tmp_path / "c.csv")
    assert np.array_equal(back["z"], arr)
    assert np.array_equal(back["tau"], np.arange(3.0))


def test_grid_roundtrip(tmp_path):
    x = np.linspace(-1, 1, 5)
    y = np.linspace(0, 2, 4)
    vals = np.arange(20.0).reshape(4, 5)
    write_grid(tmp_path / "g.grid", x, y, vals, x_name="xq", y_name="pq")
    xb, yb, vb = read_grid(tmp_path / "g.grid")
    assert np.array_equal(xb, x) and np.array_equal(yb, y)
    assert np.allclose(vb, vals)


def test_grid_shape_mismatch(tmp_path):
    with pytest.raises(ValueError):
        write_grid(tmp_path / "g.grid", np.arange(3), np.arange(4),
                   np.zeros((3, 4)))


def test_snapshot_roundtrip(tmp_path):
    vec = np.array([1 + 1j, 0.5, -2j])
    write_snapshot(tmp_path / "v.bin", vec)
    assert np.array_equal(read_snapshot(tmp_path / "v.bin"), vec)
    mat = np.arange(6, dtype=complex).reshape(2, 3) * (1 - 0.5j)
    write_snapshot(tmp_path / "m.bin", mat)
    assert np.array_equal(read_snapshot(tmp_path / "m.bin"), mat)


BASE = """
[run]
engine = classical
[model]
delta = -0.4
"""


def test_parse_minimal_config():
    cfg = parse_config(BASE)
    assert cfg.engine == "classical"
    assert cfg.model == ModelParams(delta=-0.4)


def test_parse_rejects_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(BASE + "\n[banana]\nk = 1\n")


def test_parse_rejects_unknown_key():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(BASE + "\n[fock]\nn_cavity = 8\n")


def test_parse_reports_line_number():
    text = "[run]\nengine = classical\n[model]\ndelta = three\n"
    with pytest.raises(ConfigError, match="line 4"):
        parse_config(text)


def test_parse_requires_engine_and_delta():
    with pytest.raises(ConfigError, match="engine"):
        parse_config("[model]\ndelta = -0.4\n")
    with pytest.raises(ConfigError, match="delta"):
        parse_config("[run]\nengine = classical\n")


def test_quantum_engine_requires_sigma():
    with pytest.raises(ConfigError, match="sigma"):
        parse_config("[run]\nengine = qsd\n[model]\ndelta = -0.4\n")


def test_chart_engine_requires_grids():
    with pytest.raises(ConfigError, match="chart"):
        parse_config("[run]\nengine = chart\n[model]\ndelta = -0.4\n")


def test_format_parse_roundtrip_variants():
    variants = [
        RunConfig(engine="classical", model=ModelParams(delta=-0.85),
                  stroboscope=True),
        RunConfig(engine="qsd", model=ModelParams(delta=-0.4, sigma=0.1),
                  trajectories=12, snapshot_taus=(0.0, 1.5),
                  wigner_x=GridSpec(-2.0, 2.0, 41),
                  wigner_p=GridSpec(-2.0, 2.0, 41),
                  autocorr_taus=(10.0,), autocorr_dtau=GridSpec(0.0, 5.0, 11),
                  alpha0=0.1 - 0.2j, initial_kind="cat",
                  beta0=0.5 + 0j, beta0_cat=-0.5 + 0j),
        RunConfig(engine="chart", model=ModelParams(delta=-0.4),
                  chart_delta=GridSpec(-1.0, -0.2, 5),
                  chart_amp=GridSpec(0.1, 3.0, 7), workers=2),
    ]
    for cfg in variants:
        assert parse_config(format_config(cfg)) == cfg


@pytest.mark.parametrize("fig", [f"fig{i}" for i in range(1, 8)])
@pytest.mark.parametrize("desk", [True, False])
def test_playbook_configs_parse(fig, desk):
    for name, cfg in figure_playbook(fig, desk=desk).items():
        assert parse_config(format_config(cfg)) == cfg, (fig, name)


def test_playbook_rejects_unknown_figure():
    with pytest.raises(ConfigError):
        figure_playbook("fig99")


def test_run_classical_writes_artifacts(tmp_path):
    cfg = RunConfig(engine="classical", model=ModelParams(delta=-0.4),
                    tau_end=40.0, record_stride=0.05)
    out = run(cfg, out_dir=str(tmp_path / "o"))
    assert (out / "series.csv").exists()
    report = json.loads((out / "attractor.json").read_text())
    assert "kind" in report
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["engine"] == "classical"
    # the resolved config reproduces the run configuration exactly
    resolved = parse_config((out / "config.resolved.ini").read_text())
    assert dataclasses.replace(resolved, out_dir=cfg.out_dir) == cfg


def test_main_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.ini"
    good.write_text(BASE)
    assert main(["validate", str(good)]) == 0
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nengine = nope\n[model]\ndelta = -0.4\n")
    assert main(["run", str(bad)]) == 2
    capsys.readouterr()


def test_main_run_and_seed_override(tmp_path):
    ini = tmp_path / "r.ini"
    ini.write_text(
        "[run]\nengine = qsd\nout_dir = %s\n"
        "[model]\ndelta = -0.4\npump = 0.05\nsigma = 1.0\n"
        "[fock]\nn_cav = 4\nn_mech = 4\nleak_budget = inf\n"
        "[schedule]\ntau_end = 0.5\nrecord_stride = 0.1\n"
        "[ensemble]\ntrajectories = 2\n" % (tmp_path / "out")
    )
    assert main(["run", str(ini), "--seed-override", "99"]) == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["base_seed"] == 99
