"""Command-line pipeline: artifacts, exit codes, determinism.

The shared fixtures run the traveling-wave pipeline once per module; the
wave is exactly rank 2, so truncation at rank 2 is lossless and the latent
one-step map is a pure rotation.
"""

import csv
import json
from types import SimpleNamespace

import numpy as np
import pytest

from nirom import dmd as dmd_mod
from nirom import rbf as rbf_mod
from nirom.cli import main
from nirom.containers import peek_magic
from nirom.node import load_net
from nirom.pod import load_basis
from nirom.snapshot import load_snapshots

WAVE_INPUT = {
    "kind": "traveling_wave",
    "grid_points": 64,
    "t_start": 0.0,
    "t_end": 0.99,
    "dt": 0.01,
}


def write_cfg(directory, **blocks):
    doc = {"input": dict(WAVE_INPUT), "output_dir": str(directory)}
    doc.update(blocks)
    path = directory / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


def run(*argv):
    return main(list(argv))


def run_ok(*argv):
    assert run(*argv) == 0, argv


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Full run with predictions on a 4x finer grid than training."""
    out = tmp_path_factory.mktemp("wave")
    cfg = write_cfg(
        out,
        seed=11,
        pod={"rank": 2},
        rbf={"shape_factor": 0.05},
        dmd={"rank": 2},
        node={"hidden": [16], "activation": "tanh", "epochs": 150,
              "scaling": True},
        predict={"t_start": 0.0, "t_end": 0.99, "dt": 0.0025},
    )
    run_ok("generate", "--config", cfg)
    run_ok("decompose", "--config", cfg)
    for method in ("rbf", "dmd", "node"):
        run_ok("fit", "--method", method, "--config", cfg)
        run_ok("predict", f"model_{method}.{_EXT[method]}", "--config", cfg)

    truth_dir = tmp_path_factory.mktemp("wave_truth")
    truth_cfg = write_cfg(truth_dir, seed=11, dmd={"rank": 2})
    doc = json.loads((truth_dir / "cfg.json").read_text())
    doc["input"]["dt"] = 0.0025
    (truth_dir / "cfg.json").write_text(json.dumps(doc))
    run_ok("generate", "--config", truth_cfg)
    truth = truth_dir / "snapshots.snp"

    run_ok("compare", str(truth),
           str(out / "pred_rbf.snp"), str(out / "pred_dmd.snp"),
           str(out / "pred_node.snp"), "--out", str(out))
    return SimpleNamespace(out=out, cfg=cfg, truth=truth)


_EXT = {"rbf": "rbf", "dmd": "dmd", "node": "net"}


@pytest.fixture(scope="module")
def train_grid(tmp_path_factory):
    """RBF and DMD predictions on exactly the training grid."""
    out = tmp_path_factory.mktemp("wave_train")
    cfg = write_cfg(
        out,
        seed=11,
        pod={"rank": 2},
        rbf={"shape_factor": 0.05},
        dmd={"rank": 2},
        predict={"t_start": 0.0, "t_end": 0.99, "dt": 0.01},
    )
    run_ok("generate", "--config", cfg)
    run_ok("decompose", "--config", cfg)
    for method in ("rbf", "dmd"):
        run_ok("fit", "--method", method, "--config", cfg)
        run_ok("predict", f"model_{method}.{_EXT[method]}", "--config", cfg)
    return SimpleNamespace(out=out, cfg=cfg)


# generate --------------------------------------------------------------


def test_generate_writes_64_by_100_snapshot_file(pipeline):
    path = pipeline.out / "snapshots.snp"
    assert peek_magic(path) == b"SNP1"
    snap = load_snapshots(path)
    assert snap.data.shape == (64, 100)


def test_generate_missing_kind_is_config_error(tmp_path, capsys):
    doc = {"input": {"grid_points": 8, "t_end": 1.0, "dt": 0.5},
           "dmd": {"rank": 1}, "output_dir": str(tmp_path)}
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    assert run("generate", "--config", str(cfg)) == 2
    assert "input.kind" in capsys.readouterr().err


def test_generate_is_byte_deterministic(tmp_path):
    for sub in ("a", "b"):
        d = tmp_path / sub
        d.mkdir()
        cfg = write_cfg(d, seed=3, dmd={"rank": 2})
        doc = json.loads((d / "cfg.json").read_text())
        doc["input"] = {"kind": "harmonic_latent", "grid_points": 32,
                        "t_end": 2.0, "dt": 0.05, "omega": 3.0}
        (d / "cfg.json").write_text(json.dumps(doc))
        run_ok("generate", "--config", cfg)
    a = (tmp_path / "a" / "snapshots.snp").read_bytes()
    b = (tmp_path / "b" / "snapshots.snp").read_bytes()
    assert a == b


# decompose --------------------------------------------------------------


def test_decompose_energy_tolerance_keeps_two_modes(tmp_path):
    cfg = write_cfg(tmp_path, pod={"tolerance": 1e-10}, dmd={"rank": 2})
    run_ok("generate", "--config", cfg)
    run_ok("decompose", "--config", cfg)
    assert load_basis(tmp_path / "basis.pod").m == 2


def test_decompose_rank_criterion_overrides_energy(tmp_path):
    cfg = write_cfg(tmp_path, pod={"rank": 1}, dmd={"rank": 2})
    run_ok("generate", "--config", cfg)
    run_ok("decompose", "--config", cfg)
    assert load_basis(tmp_path / "basis.pod").m == 1


def test_spectrum_csv_final_cumulative_energy_is_one(pipeline):
    with open(pipeline.out / "spectrum.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert float(rows[-1]["cumulative_energy"]) == 1.0
    cum = np.array([float(r["cumulative_energy"]) for r in rows])
    assert np.all(np.diff(cum) >= 0)


def test_decompose_writes_latent_trajectory(pipeline):
    latent = load_snapshots(pipeline.out / "latent.snp")
    assert latent.data.shape == (2, 100)


# fit ---------------------------------------------------------------------


def test_fit_rbf_records_shape_factor(pipeline):
    model = rbf_mod.load_model(pipeline.out / "model_rbf.rbf")
    assert model.shape_factor == 0.05
    assert model.dim == 2


def test_fit_node_preset_name_survives_serialization(tmp_path):
    cfg = write_cfg(
        tmp_path,
        pod={"rank": 2},
        node={"preset": "NODE1", "epochs": 2},
    )
    run_ok("generate", "--config", cfg)
    run_ok("decompose", "--config", cfg)
    run_ok("fit", "--method", "node", "--config", cfg)
    net = load_net(tmp_path / "model_node.net")
    assert net.name == "NODE1"
    assert net.sizes == (3, 256, 2)
    assert net.activations == ("elu", "linear")


def test_fit_dmd_rank_beyond_columns_is_argument_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, dmd={"rank": 20})
    doc = json.loads((tmp_path / "cfg.json").read_text())
    doc["input"]["t_end"] = 0.2  # 21 snapshots, so ranks stop at M-1 = 20
    (tmp_path / "cfg.json").write_text(json.dumps(doc))
    run_ok("generate", "--config", cfg)
    assert run("fit", "--method", "dmd", "--config", cfg) == 3
    assert "numerical rank" in capsys.readouterr().err
    doc["dmd"]["rank"] = 21
    (tmp_path / "cfg.json").write_text(json.dumps(doc))
    assert run("fit", "--method", "dmd", "--config", cfg) == 2
    assert "rank must be in [1, 20]" in capsys.readouterr().err


def test_fit_dmd_rank_beyond_numerical_rank_is_numerical_error(
        tmp_path, capsys):
    cfg = write_cfg(tmp_path, dmd={"rank": 50})
    run_ok("generate", "--config", cfg)
    assert run("fit", "--method", "dmd", "--config", cfg) == 3
    assert "numerical rank" in capsys.readouterr().err


def test_fit_writes_training_history(pipeline):
    with open(pipeline.out / "train_history.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 150
    losses = np.array([float(r["loss"]) for r in rows])
    assert losses[-1] < losses[0]


# predict -------------------------------------------------------------------


def test_predict_training_grid_dmd_matches_training_data(train_grid):
    truth = load_snapshots(train_grid.out / "snapshots.snp")
    pred = load_snapshots(train_grid.out / "pred_dmd.snp")
    assert np.allclose(pred.times, truth.times)
    assert np.max(np.abs(pred.data - truth.data)) < 1e-8


def test_predict_training_grid_rbf_matches_training_data(train_grid):
    truth = load_snapshots(train_grid.out / "snapshots.snp")
    pred = load_snapshots(train_grid.out / "pred_rbf.snp")
    assert np.max(np.abs(pred.data - truth.data)) < 1e-8


def test_predict_quarter_step_grows_columns_fourfold_minus_three(pipeline):
    pred = load_snapshots(pipeline.out / "pred_dmd.snp")
    assert pred.data.shape[1] == 4 * 100 - 3
    assert pred.times[1] - pred.times[0] == pytest.approx(0.0025)


def test_predict_dimension_mismatch_names_both_dims(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        pod={"rank": 2},
        rbf={"shape_factor": 0.05},
        predict={"t_start": 0.0, "t_end": 0.99, "dt": 0.01},
    )
    run_ok("generate", "--config", cfg)
    run_ok("decompose", "--config", cfg)
    run_ok("fit", "--method", "rbf", "--config", cfg)
    # shrink the basis after fitting so the model no longer matches
    doc = json.loads((tmp_path / "cfg.json").read_text())
    doc["pod"] = {"rank": 1}
    (tmp_path / "cfg.json").write_text(json.dumps(doc))
    run_ok("decompose", "--config", cfg)
    assert run("predict", "model_rbf.rbf", "--config", cfg) == 2
    err = capsys.readouterr().err
    assert "2 latent components" in err
    assert "1 mode" in err


def test_predict_missing_model_file_is_io_error(train_grid, capsys):
    assert run("predict", "no_such.rbf", "--config", train_grid.cfg) == 4


def test_predict_rejects_non_model_file(train_grid, capsys):
    rc = run("predict", str(train_grid.out / "snapshots.snp"),
             "--config", train_grid.cfg)
    assert rc == 4
    assert "not a model file" in capsys.readouterr().err


# compare / report ------------------------------------------------------------


def test_compare_identical_files_gives_zero_rmse(train_grid):
    truth = train_grid.out / "snapshots.snp"
    run_ok("compare", str(truth), str(truth), "--out", str(train_grid.out))
    with open(train_grid.out / "metrics.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert rows
    assert all(float(r["rmse"]) == 0.0 for r in rows)


def test_compare_emits_one_group_per_method(pipeline):
    tree = json.loads((pipeline.out / "metrics.json").read_text())
    assert sorted(tree) == ["dmd", "node", "rbf"]
    for method in tree:
        body = tree[method]["u"]
        assert len(body["rmse"]) == 397
        assert body["latent_dim"] == 2


def test_end_to_end_dmd_beats_rbf_and_both_stay_small(pipeline):
    tree = json.loads((pipeline.out / "metrics.json").read_text())
    rbf_rmse = np.array(tree["rbf"]["u"]["rmse"])
    dmd_rmse = np.array(tree["dmd"]["u"]["rmse"])
    assert np.all(dmd_rmse < rbf_rmse)
    assert np.all(rbf_rmse < 1e-2)  # wave amplitude is 1


def test_report_reemits_identical_csv(pipeline, tmp_path):
    run_ok("report", str(pipeline.out / "metrics.json"),
           "--format", "csv", "--out", str(tmp_path))
    assert ((tmp_path / "metrics.csv").read_bytes()
            == (pipeline.out / "metrics.csv").read_bytes())


def test_report_json_round_trip(pipeline, tmp_path):
    run_ok("report", str(pipeline.out / "metrics.json"),
           "--format", "json", "--out", str(tmp_path))
    a = json.loads((tmp_path / "metrics.json").read_text())
    b = json.loads((pipeline.out / "metrics.json").read_text())
    assert a == b


def test_report_rejects_malformed_metrics(tmp_path, capsys):
    bad = tmp_path / "metrics.json"
    bad.write_text("{broken")
    assert run("report", str(bad), "--out", str(tmp_path)) == 4


# config and flag handling ----------------------------------------------------


def test_unknown_config_key_reports_dotted_path(tmp_path, capsys):
    cfg = write_cfg(tmp_path, pod={"rnak": 2}, dmd={"rank": 2})
    assert run("generate", "--config", cfg) == 2
    assert "pod.rnak" in capsys.readouterr().err


def test_missing_subcommand_arguments_exit_2(train_grid):
    with pytest.raises(SystemExit) as exc:
        run("fit", "--config", train_grid.cfg)  # no --method
    assert exc.value.code == 2


def test_out_flag_overrides_config_directory(tmp_path):
    cfg_dir = tmp_path / "cfgside"
    cfg_dir.mkdir()
    other = tmp_path / "elsewhere"
    cfg = write_cfg(cfg_dir, dmd={"rank": 2})
    run_ok("generate", "--config", cfg, "--out", str(other))
    assert (other / "snapshots.snp").exists()
    assert not (cfg_dir / "snapshots.snp").exists()


def test_env_var_supplies_default_out_dir(tmp_path, monkeypatch):
    target = tmp_path / "envdir"
    monkeypatch.setenv("NIROM_OUT_DIR", str(target))
    doc = {"input": dict(WAVE_INPUT), "dmd": {"rank": 2}}
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    run_ok("generate", "--config", str(cfg))
    assert (target / "snapshots.snp").exists()


def test_seed_flag_overrides_config_seed(tmp_path):
    for sub, seed_args in (("a", []), ("b", ["--seed", "21"])):
        d = tmp_path / sub
        d.mkdir()
        cfg = write_cfg(d, seed=7, dmd={"rank": 2})
        doc = json.loads((d / "cfg.json").read_text())
        doc["input"] = {"kind": "harmonic_latent", "grid_points": 16,
                        "t_end": 1.0, "dt": 0.1}
        (d / "cfg.json").write_text(json.dumps(doc))
        run_ok("generate", "--config", cfg, *seed_args)
    a = (tmp_path / "a" / "snapshots.snp").read_bytes()
    b = (tmp_path / "b" / "snapshots.snp").read_bytes()
    assert a != b  # harmonic_latent lift depends on the seed


def test_training_blowup_is_numerical_error(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        pod={"rank": 2},
        node={"hidden": [8], "activation": "relu", "epochs": 40,
              "learning_rate": 1e12},
    )
    run_ok("generate", "--config", cfg)
    run_ok("decompose", "--config", cfg)
    with np.errstate(over="ignore", invalid="ignore"):
        rc = run("fit", "--method", "node", "--config", cfg)
    assert rc == 3


def test_full_pipeline_is_byte_deterministic(tmp_path):
    files = ("snapshots.snp", "basis.pod", "latent.snp", "model_rbf.rbf",
             "model_dmd.dmd", "model_node.net", "pred_dmd.snp")
    for sub in ("a", "b"):
        d = tmp_path / sub
        d.mkdir()
        cfg = write_cfg(
            d, seed=11,
            pod={"rank": 2},
            rbf={"shape_factor": 0.05},
            dmd={"rank": 2},
            node={"hidden": [8], "activation": "tanh", "epochs": 20},
            predict={"t_start": 0.0, "t_end": 0.99, "dt": 0.005},
        )
        run_ok("generate", "--config", cfg)
        run_ok("decompose", "--config", cfg)
        for method in ("rbf", "dmd", "node"):
            run_ok("fit", "--method", method, "--config", cfg)
        run_ok("predict", "model_dmd.dmd", "--config", cfg)
    for name in files:
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, name
