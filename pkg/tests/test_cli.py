import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from covar import fileformats, mlp, pipeline, siamese
from covar.cli import main
from covar.config import resolve

SMALL_TM = {"experiment": "two_modalities", "n_pairs": 60, "seed": 3,
            "net1": {"hidden": [8]}, "net2": {"hidden": [8]},
            "train": {"lbfgs": {"max_iters": 5}}}


def write_config(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def run_all(cfg, out, *commands):
    for cmd in commands:
        assert main([cmd, "--config", cfg, "--out", str(out)]) == 0


@pytest.fixture
def clean_env(monkeypatch):
    monkeypatch.delenv("CVL_SEED", raising=False)


def test_generate_two_modalities_dims(tmp_path, clean_env):
    cfg = write_config(tmp_path, dict(SMALL_TM, n_pairs=100))
    run_all(cfg, tmp_path / "run", "generate")
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert (manifest["d1"], manifest["d2"]) == (5000, 100)
    assert sum(manifest["counts"][k] for k in ("train_pos", "test_pos")) == 100
    assert manifest["config"]["seed"] == 3
    assert manifest["config"]["train"]["lbfgs"]["history"] == 10
    ds = fileformats.load_dataset(tmp_path / "run" / "train_pos.cvl")
    assert (ds.d1, ds.d2) == (5000, 100)


def test_generate_sprites_dims(tmp_path, clean_env):
    cfg = write_config(tmp_path, {"experiment": "spinning_sprites", "n_pairs": 10, "seed": 1})
    run_all(cfg, tmp_path / "run", "generate")
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert manifest["d1"] == manifest["d2"] == 14400


def test_generate_is_byte_identical(tmp_path, clean_env):
    cfg = write_config(tmp_path, SMALL_TM)
    run_all(cfg, tmp_path / "a", "generate")
    run_all(cfg, tmp_path / "b", "generate")
    for name in ("train_pos.cvl", "train_neg.cvl", "test_pos.cvl", "test_neg.cvl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_full_pipeline_outputs(tmp_path, clean_env):
    cfg = write_config(tmp_path, SMALL_TM)
    out = tmp_path / "run"
    run_all(cfg, out, "generate", "train", "embed", "evaluate")
    rows = list(csv.reader((out / "loss.csv").open()))
    assert rows[0] == ["epoch", "loss"] and len(rows) == 1 + 5

    emb = list(csv.reader((out / "embedding_diffusion.csv").open()))
    assert emb[0] == ["sensor", "coord1", "coord2", "hidden_x"]
    n_test = fileformats.load_dataset(out / "test_pos.cvl").n
    assert len(emb) - 1 == 2 * n_test
    assert {r[0] for r in emb[1:]} == {"1", "2"}

    report = json.loads((out / "report.json").read_text())
    for split in ("train", "test"):
        assert 0.0 <= report[split]["accuracy"] <= 1.0
    assert "sensor_separation" in report
    lines = (out / "report.csv").read_text().splitlines()
    assert lines[0].startswith("split,accuracy") and len(lines) == 3

    before = (out / "report.json").read_bytes()
    run_all(cfg, out, "evaluate")
    assert (out / "report.json").read_bytes() == before


def test_embed_pca_with_k(tmp_path, clean_env):
    cfg = write_config(tmp_path, SMALL_TM)
    out = tmp_path / "run"
    run_all(cfg, out, "generate", "train")
    assert main(["embed", "--config", cfg, "--out", str(out), "--method", "pca", "--k", "3",
                 "--dataset", str(out / "train_pos.cvl")]) == 0
    header = (out / "embedding_pca.csv").read_text().splitlines()[0]
    assert header == "sensor,coord1,coord2,coord3,hidden_x"


def test_train_zero_epochs_gives_seeded_init(tmp_path, clean_env):
    raw = {"experiment": "spinning_sprites", "n_pairs": 10, "seed": 2,
           "net1": {"hidden": [6]}, "net2": {"hidden": [6]}, "train": {"sgd": {"epochs": 0}}}
    cfg = write_config(tmp_path, raw)
    out = tmp_path / "run"
    run_all(cfg, out, "generate", "train")
    jn, _ = fileformats.load_model(out / "model.json")
    splits = pipeline.Splits(*[fileformats.load_dataset(out / f"{n}.cvl")
                               for n in ("train_pos", "train_neg", "test_pos", "test_neg")])
    init = pipeline.init_network(resolve(raw), splits.train_pos)
    assert siamese.get_params(jn).tobytes() == siamese.get_params(init).tobytes()
    assert (out / "loss.csv").read_text() == "epoch,loss\n"


def test_train_twice_identical_model(tmp_path, clean_env):
    cfg = write_config(tmp_path, SMALL_TM)
    out = tmp_path / "run"
    run_all(cfg, out, "generate", "train")
    first = (out / "model.json").read_bytes()
    run_all(cfg, out, "train")
    assert (out / "model.json").read_bytes() == first


def test_cvl_seed_overrides(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, SMALL_TM)
    monkeypatch.setenv("CVL_SEED", "11")
    run_all(cfg, tmp_path / "a", "generate")
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 11
    monkeypatch.delenv("CVL_SEED")
    run_all(cfg, tmp_path / "b", "generate")
    assert (tmp_path / "a" / "test_pos.cvl").read_bytes() != (tmp_path / "b" / "test_pos.cvl").read_bytes()


def test_config_error_exit_code(tmp_path, clean_env, capsys):
    cfg = write_config(tmp_path, {"experiment": "two_modalities", "train": {"sgd": {"momentum": 2}}})
    assert main(["generate", "--config", cfg, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error[2]: config: train.sgd")


def test_data_error_exit_codes(tmp_path, clean_env, capsys):
    cfg = write_config(tmp_path, SMALL_TM)
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "empty")]) == 3
    assert main(["evaluate", "--config", cfg, "--out", str(tmp_path / "empty")]) == 3
    err = capsys.readouterr().err.strip().splitlines()
    assert all(line.startswith("error[3]: data:") for line in err) and len(err) == 2


def test_dimension_mismatch_is_data_error(tmp_path, clean_env, capsys):
    cfg = write_config(tmp_path, SMALL_TM)
    out = tmp_path / "run"
    run_all(cfg, out, "generate", "train")
    other = write_config(tmp_path, {"experiment": "spinning_sprites", "n_pairs": 10}, "sp.json")
    run_all(other, tmp_path / "sp", "generate")
    code = main(["embed", "--config", cfg, "--out", str(out),
                 "--dataset", str(tmp_path / "sp" / "test_pos.cvl")])
    assert code == 3
    assert "model expects inputs" in capsys.readouterr().err


def test_numeric_abort_exit_code(tmp_path, clean_env, capsys):
    cfg = write_config(tmp_path, SMALL_TM)
    out = tmp_path / "run"
    run_all(cfg, out, "generate")
    ds = fileformats.load_dataset(out / "train_pos.cvl")
    ds.s2[0, 0] = np.nan
    fileformats.save_dataset(out / "train_pos.cvl", ds)
    assert main(["train", "--config", cfg, "--out", str(out)]) == 4
    assert capsys.readouterr().err.startswith("error[4]: numeric:")


def test_console_entry_point(tmp_path):
    cfg = write_config(tmp_path, {"experiment": "bad"})
    proc = subprocess.run([sys.executable, "-m", "covar", "generate", "--config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stderr.count("\n") == 1 and proc.stderr.startswith("error[2]:")
