import csv
import json

import numpy as np
import pytest
import yaml

from rydberg_arp.atomdata import uniform_map
from rydberg_arp.fidelity import ideal_ckz
from rydberg_arp.runner import cli
from rydberg_arp.runner import experiments as ex
from rydberg_arp.runner.config import ConfigError, load_config, packaged_configs, parse_config
from rydberg_arp.runner.decomposition import (
    GLOBAL_PHASE,
    HADAMARD,
    T_GATE,
    assemble_ccz,
    check_identity,
    circuit_fidelity,
)

CZ_DOC = {
    "name": "cz_test",
    "gate": "CZ",
    "seed": 3,
    "interactions": {"uniform_mhz": 608.0},
    "pulse": {
        "t1_us": 0.852, "t2_us": 0.944, "t1_over_tau1": 2.59, "t2_over_tau2": 3.19,
        "delta_r1_mhz": 6.27, "delta_r2_mhz": 5.586, "i1_mw_per_um2": 0.39, "ir_mw_per_um2": 6.236,
    },
    "integrator": {"tol": 1e-8, "trace_samples": 200},
    "robustness": {"n_intensity": 3, "n_detuning": 3},
    "noise": {"fwhm_hz": [0.0, 1000.0], "n_shots": 4},
}


@pytest.fixture
def cz_cfg():
    return parse_config(CZ_DOC)


@pytest.fixture
def cz_file(tmp_path):
    path = tmp_path / "cz.yaml"
    path.write_text(yaml.safe_dump(CZ_DOC))
    return path


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


# ---------------------------------------------------------------------------
# configuration


def test_packaged_configs_parse():
    names = packaged_configs()
    assert {"fig2", "fig3", "square", "pyramid", "cz"} <= set(names)
    for name in names:
        cfg = load_config(name)
        assert cfg.interactions.n_atoms == cfg.k + 1


def test_fig2_config_values():
    cfg = load_config("fig2")
    p = cfg.params
    assert (cfg.gate, cfg.model) == ("CCZ", "reduced")
    assert p.tau1 == pytest.approx(0.852 / 2.59)
    assert p.omega0 == pytest.approx(2.780 * np.sqrt(0.390 * 6.236))
    assert cfg.envelope is None


@pytest.mark.parametrize(
    "patch, message",
    [
        ({"gate": "CXZ"}, "gate"),
        ({"bogus": 1}, "unknown keys"),
        ({"pulse": {**CZ_DOC["pulse"], "t1_ms": 1.0}}, "unknown keys"),
        ({"interactions": {"uniform_mhz": 608.0}, "gate": "CCZ"}, None),
        ({"interactions": {"v_rr_mhz": [[0, 1, 2], [1, 0, 3], [2, 3, 0]]}}, "atoms"),
        ({"integrator": {"tol": -1}}, "tol"),
        ({"model": "full"}, "full model"),
        ({"noise": {"n_shots": "many"}}, "n_shots"),
        ({"optimizer": {"fixed": ["nonsense"]}}, "fixed"),
        ({"blockade": {"distances_um": [4.0], "v_rr_mhz": []}}, "equal length"),
    ],
)
def test_config_errors(patch, message):
    doc = {**CZ_DOC, **patch}
    if message is None:
        parse_config(doc)  # a uniform map adapts to the gate size
        return
    with pytest.raises(ConfigError, match=message):
        parse_config(doc)


def test_missing_pulse_key():
    pulse = dict(CZ_DOC["pulse"])
    del pulse["t2_us"]
    with pytest.raises(ConfigError, match="t2_us"):
        parse_config({**CZ_DOC, "pulse": pulse})


def test_digest_tracks_content(cz_cfg):
    assert cz_cfg.digest() == parse_config(CZ_DOC).digest()
    assert cz_cfg.digest() != parse_config({**CZ_DOC, "seed": 4}).digest()


def test_with_overrides(cz_cfg):
    new = cz_cfg.with_overrides(pulse={"t1_us": 0.9})
    assert new.params.t1 == 0.9
    assert new.params.t2 == cz_cfg.params.t2


# ---------------------------------------------------------------------------
# decomposition


def test_decomposition_identity_is_exact():
    assert check_identity() < 1e-12
    np.testing.assert_allclose(assemble_ccz(np.diag([1, -1, -1, -1])), ideal_ckz(2), atol=1e-12)
    assert circuit_fidelity(assemble_ccz(ideal_ckz(1))) == pytest.approx(1.0, abs=1e-12)


def test_decomposition_gates():
    np.testing.assert_allclose(HADAMARD @ HADAMARD, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(T_GATE, np.diag([np.exp(1j * np.pi / 8), np.exp(-1j * np.pi / 8)]))
    assert abs(GLOBAL_PHASE) == pytest.approx(1.0)


def test_decomposition_of_phase_error():
    # a CZ that is off only by single-qubit phases still gives a perfect gate after correction
    phi = 0.3
    cz = np.diag(np.array([1, -1, -1, -1]) * np.exp(-1j * np.array([0, 1, 1, 2]) * phi))
    res = ex.run_decomposition(cz)
    assert res.cz_fidelity < 1
    dec = ex.run_decomposition(np.diag([1, -1, -1, -1]))
    assert dec.fidelity == pytest.approx(1.0, abs=1e-12)
    assert dec.fidelity_ideal == pytest.approx(1.0, abs=1e-12)


def test_decomposition_of_lossy_cz():
    a = np.array([1, -0.999, -0.999, -0.998])
    res = ex.run_decomposition(np.diag(a))
    assert 0.98 < res.fidelity < 1.0
    assert res.heuristic == pytest.approx(res.cz_fidelity**6)


def test_decomposition_rejects_bad_shape():
    from rydberg_arp.runner.decomposition import DecompositionError

    with pytest.raises(DecompositionError):
        assemble_ccz(np.eye(3))


# ---------------------------------------------------------------------------
# experiments


def test_threads_resolution(monkeypatch):
    monkeypatch.setenv(ex.THREADS_ENV, "3")
    assert ex.resolve_threads() == 3
    assert ex.resolve_threads(2) == 2
    monkeypatch.delenv(ex.THREADS_ENV)
    assert ex.resolve_threads() == 1
    assert ex.parallel_map(lambda x: x * x, range(7), threads=3) == [x * x for x in range(7)]


def test_robustness_nominal_point_matches_gate(cz_cfg):
    table = ex.robustness_sweep(cz_cfg)
    assert len(table.rows) == 9
    row = [r for r in table.rows if r[0] == 0 and r[1] == 0][0]
    assert row[2] == ex.run_gate(cz_cfg, traces=False).fidelity


def test_robustness_threads_do_not_change_results(cz_cfg):
    a = ex.robustness_sweep(cz_cfg, threads=1)
    b = ex.robustness_sweep(cz_cfg, threads=3)
    assert a.rows == b.rows


def test_robustness_batched_agrees(cz_cfg):
    a = ex.robustness_sweep(cz_cfg)
    b = ex.robustness_sweep(cz_cfg, batched=True)
    np.testing.assert_allclose(a.column("fidelity"), b.column("fidelity"), atol=1e-6)


def test_scaled_map():
    base = uniform_map(3, 608.0)
    assert np.max(ex._scaled_map(base, 100.0).v_rr) == pytest.approx(100.0)
    m = np.array([[0, 1.0, 2.0], [1.0, 0, 3.0], [2.0, 3.0, 0]])
    np.testing.assert_array_equal(ex._scaled_map(base, m).v_rr, m)


def test_noise_zero_linewidth_is_noiseless(cz_cfg):
    summary, shots = ex.noise_monte_carlo(cz_cfg, fwhm_hz=[0.0], n_shots=150)
    f0 = ex.run_gate(cz_cfg, traces=False).fidelity
    assert summary.rows[0][1] == f0
    assert summary.rows[0][2] == 0.0
    assert all(r[2] == f0 for r in shots.rows)


def test_noise_seeded_and_reproducible(cz_cfg):
    a, sa = ex.noise_monte_carlo(cz_cfg, fwhm_hz=[1000.0], n_shots=3)
    b, sb = ex.noise_monte_carlo(cz_cfg, threads=2, fwhm_hz=[1000.0], n_shots=3)
    assert sa.rows == sb.rows
    c, _ = ex.noise_monte_carlo(parse_config({**CZ_DOC, "seed": 4}), fwhm_hz=[1000.0], n_shots=3)
    assert c.rows[0][1] != a.rows[0][1]


# ---------------------------------------------------------------------------
# command line


def run_cli(*args):
    return cli.main(list(args))


def test_cli_export_schedule(tmp_path, cz_file):
    out = tmp_path / "sched"
    assert run_cli("export-schedule", "--config", str(cz_file), "--out", str(out)) == 0
    header, data = read_csv(out / "schedule.csv")
    assert header[0] == "t_us"
    assert data[0, 0] == 0.0 and data[-1, 0] == pytest.approx(0.852 + 0.944)
    rec = json.loads((out / "record.json").read_text())
    assert rec["status"] == "ok"
    assert sorted(rec["manifest"]) == ["record.json", "schedule.csv"]
    assert rec["seed"] == 3
    assert rec["config_digest"] == parse_config(CZ_DOC).digest()


def test_cli_simulate(tmp_path, cz_file, cz_cfg):
    out = tmp_path / "sim"
    assert run_cli("simulate", "--config", str(cz_file), "--out", str(out), "--seed", "9") == 0
    rec = json.loads((out / "record.json").read_text())
    assert rec["seed"] == 9
    assert rec["results"]["gate"]["fidelity"] == pytest.approx(ex.run_gate(cz_cfg).fidelity, abs=1e-12)
    assert set(rec["results"]["gate"]["populations"]) == {"00", "01", "10", "11"}
    header, data = read_csv(out / "trace_superposition.csv")
    assert header[:4] == ["t_us", "P_e", "P_d", "norm"]
    assert len(data) == 200
    assert "trace_superposition.csv" in rec["manifest"]


def test_cli_sweep_and_noise(tmp_path, cz_file):
    out = tmp_path / "mc"
    assert run_cli("noise-mc", "--config", str(cz_file), "--out", str(out), "--threads", "2") == 0
    header, data = read_csv(out / "mc_summary.csv")
    assert header == ["fwhm_hz", "mean_fidelity", "std_fidelity", "n_shots"]
    assert data.shape == (2, 4)
    _, shots = read_csv(out / "mc_shots.csv")
    assert shots.shape == (8, 3)


def test_cli_decompose(tmp_path):
    out = tmp_path / "dec"
    assert run_cli("decompose", "--config", "cz", "--out", str(out)) == 0
    rec = json.loads((out / "record.json").read_text())
    assert rec["results"]["decomposition"]["identity_max_deviation"] < 1e-12


def test_cli_config_errors(tmp_path, cz_file):
    assert run_cli("simulate", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "a")) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("gate: [unclosed\n")
    assert run_cli("simulate", "--config", str(bad), "--out", str(tmp_path / "b")) == 2
    bad.write_text(yaml.safe_dump({**CZ_DOC, "extra_key": 1}))
    assert run_cli("simulate", "--config", str(bad), "--out", str(tmp_path / "c")) == 2
    # decomposition needs a CZ configuration
    assert run_cli("decompose", "--config", "fig2", "--out", str(tmp_path / "d")) == 2
    rec = json.loads((tmp_path / "d" / "record.json").read_text())
    assert rec["status"] == "config_error"


def test_cli_numeric_failure(tmp_path):
    doc = {**CZ_DOC, "integrator": {"tol": 1e-300}}
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(doc))
    assert run_cli("simulate", "--config", str(path), "--out", str(tmp_path / "n")) == 3
    rec = json.loads((tmp_path / "n" / "record.json").read_text())
    assert rec["status"] == "numeric_failure"


def test_cli_requires_config():
    with pytest.raises(SystemExit) as exc:
        cli.build_parser().parse_args(["simulate"])
    assert exc.value.code == 2
