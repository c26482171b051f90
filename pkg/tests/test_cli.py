"""Command line workflow: artifacts, exit codes, determinism."""

import filecmp
import os

import pytest

from specop import cli

TINY = ["data.samples=10", "data.resolution=16", "data.frames=10",
        "model.width=8", "model.depth=1", "model.modes=4",
        "model.token_dim=4", "model.attn_dim=4", "model.kan_grid=4",
        "train.epochs=2", "eval.rollout_steps=3",
        "verify.edge_trials=5", "verify.pairs=10", "verify.probe=10"]


def run(cmd, out, *extra, seed=5, sets=TINY):
    return cli.main([cmd, "--out", str(out), "--seed", str(seed)]
                    + [f"--set={s}" for s in sets] + list(extra))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One tiny gen-data + train run shared by the read-only tests."""
    root = tmp_path_factory.mktemp("cli")
    assert run("gen-data", root) == 0
    assert run("train", root, "--data", f"{root}/dataset.skds") == 0
    return root


def test_gen_data_artifacts(workspace):
    assert (workspace / "dataset.skds").exists()
    assert (workspace / "resolved.cfg").exists()


def test_resolved_config_reparses(workspace):
    from specop import config

    cfg = config.load_config(workspace / "resolved.cfg")
    assert cfg.run.seed == 5
    assert cfg.data.samples == 10
    assert cfg.model.width == 8


def test_train_artifacts(workspace):
    assert (workspace / "model.skds").exists()
    with open(workspace / "history.csv") as fh:
        lines = fh.read().strip().splitlines()
    assert lines[0].startswith("epoch,")
    assert len(lines) == 3  # header + 2 epochs


def test_eval_and_rollout(workspace, tmp_path):
    rc = run("eval", tmp_path, "--data", f"{workspace}/dataset.skds",
             "--model", f"{workspace}/model.skds")
    assert rc == 0
    text = (tmp_path / "summary.txt").read_text()
    assert "persistence baseline" in text
    assert (tmp_path / "per_slice.csv").exists()

    rc = run("rollout", tmp_path, "--data", f"{workspace}/dataset.skds",
             "--model", f"{workspace}/model.skds")
    assert rc == 0
    with open(tmp_path / "rollout_rmse.csv") as fh:
        lines = fh.read().strip().splitlines()
    assert lines[0] == "step,rmse,persistence_rmse"
    assert len(lines) == 4  # header + 3 steps


def test_export_plots(workspace, tmp_path):
    rc = run("export-plots", tmp_path, "--data", f"{workspace}/dataset.skds",
             "--model", f"{workspace}/model.skds")
    assert rc == 0
    for name in ("rollout_rmse.png", "rollout_rmse.csv",
                 "field_comparison.png", "field_comparison.csv"):
        assert (tmp_path / name).exists(), name
    with open(tmp_path / "rollout_rmse.png", "rb") as fh:
        assert fh.read(8) == b"\x89PNG\r\n\x1a\n"


def test_verify_subcommand(tmp_path):
    assert run("verify", tmp_path) == 0
    with open(tmp_path / "verification.csv") as fh:
        lines = fh.read().strip().splitlines()
    assert len(lines) == 7  # header + six checks
    assert all(line.rsplit(",")[-2] or True for line in lines)


def test_verify_failure_exit_code(tmp_path, monkeypatch):
    from specop import verify

    def fake_run_all(**kwargs):
        return [verify.VerificationReport("broken", 2.0, 1.0, "", 0)]

    monkeypatch.setattr(verify, "run_all", fake_run_all)
    assert run("verify", tmp_path) == 5


def test_exit_code_missing_file(tmp_path):
    rc = run("train", tmp_path, "--data", f"{tmp_path}/absent.skds")
    assert rc == 3


def test_exit_code_bad_config(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[data]\nbogus = 1\n")
    rc = cli.main(["gen-data", "--out", str(tmp_path),
                   "--config", str(bad)])
    assert rc == 2
    rc = cli.main(["gen-data", "--out", str(tmp_path),
                   "--set", "data.kind=vortex"])
    assert rc == 2


def test_exit_code_incompatible_files(workspace, tmp_path):
    # a three-channel dataset fed to the one-channel model
    sw = tmp_path / "sw"
    sets = TINY + ["data.kind=shallow-water", "data.samples=2",
                   "data.frames=4", "data.resolution=8"]
    assert run("gen-data", sw, sets=sets) == 0
    rc = run("eval", tmp_path, "--data", f"{sw}/dataset.skds",
             "--model", f"{workspace}/model.skds")
    assert rc == 4


def test_exit_code_damaged_file(workspace, tmp_path):
    blob = (workspace / "dataset.skds").read_bytes()
    broken = tmp_path / "broken.skds"
    broken.write_bytes(blob[:40])
    rc = run("eval", tmp_path, "--data", str(broken),
             "--model", f"{workspace}/model.skds")
    assert rc == 4


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as err:
        cli.main(["no-such-command"])
    assert err.value.code == 2


def test_pipeline_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run("gen-data", out) == 0
        assert run("train", out, "--data", f"{out}/dataset.skds") == 0
        assert run("eval", out, "--data", f"{out}/dataset.skds",
                   "--model", f"{out}/model.skds") == 0
    for name in ("dataset.skds", "model.skds", "history.csv",
                 "per_slice.csv", "summary.txt"):
        assert filecmp.cmp(a / name, b / name, shallow=False), name

    c = tmp_path / "c"
    assert run("gen-data", c, seed=6) == 0
    assert not filecmp.cmp(a / "dataset.skds", c / "dataset.skds",
                           shallow=False)


def test_rollout_too_long_is_config_error(workspace, tmp_path):
    rc = run("rollout", tmp_path, "--data", f"{workspace}/dataset.skds",
             "--model", f"{workspace}/model.skds",
             sets=TINY + ["eval.rollout_steps=500"])
    assert rc == 2
