import hashlib
import json

import pytest

from twinsync import __version__
from twinsync.cli import main
from twinsync.config import RunConfig

SMALL = [
    "--set", "sim.episode_ms=2000",
    "--set", "agent.n_episodes=10",
    "--set", "agent.select_window=5",
    "--set", "agent.n_validation=1",
    "--set", "eval.n_episodes=2",
    "--set", "sweep.n_episodes=1",
]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def read_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    return lines[1].split(","), [ln.split(",") for ln in lines[2:]]


@pytest.fixture
def trained(tmp_path, capsys):
    out = tmp_path / "run"
    code, _, _ = run(capsys, "train", *SMALL, "--out", str(out))
    assert code == 0
    return out


def test_train_writes_checkpoint_and_curve(trained):
    header, rows = read_rows(trained / "learning_curve.csv")
    assert header == ["episode", "avg_load", "avg_mse", "lambda", "epsilon"]
    assert len(rows) == 10
    ckpt = json.loads((trained / "policy.json").read_text())
    assert ckpt["tool_version"] == __version__ and ckpt["params"]["seed"] == 0


def test_outputs_embed_provenance(trained):
    cfg = RunConfig.from_dict({}, SMALL[1::2])
    first = (trained / "learning_curve.csv").read_text().splitlines()[0]
    assert first == f"# config_hash={cfg.config_hash},seed=0,version={__version__}"


def test_unknown_key_exits_2_naming_it(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--set", "agent.nope=1", "--out", str(tmp_path))
    assert code == 2
    msg = json.loads(err.strip().splitlines()[-1])
    assert msg["exit_code"] == 2 and "agent.nope" in msg["message"]


def test_missing_config_file_exits_3(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--config", str(tmp_path / "none.yaml"))
    assert code == 3 and json.loads(err)["error"] == "io"


def test_same_seed_twice_is_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert run(capsys, "train", *SMALL, "--seed", "7", "--out", str(tmp_path / name))[0] == 0
    for f in ("learning_curve.csv", "policy.json"):
        assert digest(tmp_path / "a" / f) == digest(tmp_path / "b" / f)


def test_eval_summary_and_csv(trained, capsys):
    code, out, _ = run(capsys, "eval", *SMALL, "--out", str(trained), "--checkpoint", str(trained / "policy.json"))
    assert code == 0
    assert "summary n=2" in out and ("feasible=yes" in out or "feasible=no" in out)
    header, rows = read_rows(trained / "eval.csv")
    assert header == ["episode", "seed", "avg_load", "avg_mse", "feasible"]
    assert [r[0] for r in rows] == ["0", "1", "mean"] and rows[-1][-1] in ("yes", "no")


def test_eval_zero_episodes_exits_2(trained, capsys):
    code, _, err = run(capsys, "eval", *SMALL, "-n", "0", "--checkpoint", str(trained / "policy.json"))
    assert code == 2 and json.loads(err)["exit_code"] == 2


def test_eval_missing_checkpoint_exits_3(tmp_path, capsys):
    code, _, err = run(capsys, "eval", *SMALL, "--checkpoint", str(tmp_path / "missing.json"))
    assert code == 3 and json.loads(err)["error"] == "io"


def test_eval_hash_mismatch_exits_4(trained, capsys):
    code, _, err = run(capsys, "eval", *SMALL, "--set", "e_max=0.002", "--checkpoint", str(trained / "policy.json"))
    assert code == 4 and json.loads(err)["error"] == "checkpoint_mismatch"


def test_sweep_outputs(tmp_path, capsys):
    assert run(capsys, "sweep", *SMALL, "--out", str(tmp_path))[0] == 0
    header, rows = read_rows(tmp_path / "tradeoff.csv")
    assert header == ["rate", "horizon", "p_loss", "avg_mse", "avg_load"]
    assert len(rows) == 42 * 2
    header, rows = read_rows(tmp_path / "frontier.csv")
    assert header == ["e_budget", "p_loss", "min_load", "argmin_action"]
    budgets = [float(r[0]) for r in rows]
    assert budgets == sorted(budgets)


def test_sweep_single_loss_gives_one_frontier(tmp_path, capsys):
    assert run(capsys, "sweep", *SMALL, "--set", "sweep.p_loss=[0.0]", "--out", str(tmp_path))[0] == 0
    _, rows = read_rows(tmp_path / "tradeoff.csv")
    assert len(rows) == 42
    _, rows = read_rows(tmp_path / "frontier.csv")
    assert {r[1] for r in rows} == {"0"}


def test_floats_have_nine_significant_digits(tmp_path, capsys):
    run(capsys, "sweep", *SMALL, "--set", "sweep.p_loss=[0.0]", "--out", str(tmp_path))
    _, rows = read_rows(tmp_path / "tradeoff.csv")
    mse = rows[0][3]
    assert mse == f"{float(mse):.9g}"


def test_baseline_runs_four_corners(tmp_path, capsys):
    code, out, _ = run(capsys, "baseline", *SMALL, "--out", str(tmp_path))
    assert code == 0
    _, rows = read_rows(tmp_path / "baseline.csv")
    assert [(r[0], r[1]) for r in rows] == [("10", "0"), ("10", "100"), ("1000", "0"), ("1000", "100")]


def test_bad_arguments_exit_2(capsys):
    assert main(["fly"]) == 2
    assert main(["eval"]) == 2  # --checkpoint is required
