import numpy as np
import pytest

from hetprompt.cli import main
from hetprompt.encoder import load_checkpoint

SMALL = ["--set", "hidden_dim=8", "--set", "epochs_pretrain=3", "--set", "num_triplets=60",
         "--set", "epochs_tune=10", "--set", "eval_every=5", "--set", "num_tasks=4"]


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "data"
    args = ["gen-synth", "--out", str(out), "--set", "nodes_per_type=15", "--seed", "1"]
    assert main(args) == 0
    return ["--set", f"node_file={out / 'nodes.tsv'}", "--set", f"edge_file={out / 'edges.tsv'}",
            "--set", f"label_file={out / 'labels.tsv'}"]


def test_validate_generated(dataset, capsys):
    assert main(["validate", *dataset]) == 0
    assert "nodes 30" in capsys.readouterr().out


def test_decompose_writes_views(dataset, tmp_path):
    out = tmp_path / "views"
    assert main(["decompose", *dataset, "--out", str(out)]) == 0
    manifest = (out / "manifest.tsv").read_text().splitlines()
    assert len(manifest) == 1 + 3  # header + full view + two typed views
    members = [len((out / f"view{i}.members.tsv").read_text().splitlines()) for i in (1, 2)]
    assert members == [15, 15]


def _pipeline(dataset, out, task="nc", extra=()):
    ckpt = out / "encoder.ckpt"
    assert main(["pretrain", *dataset, *SMALL, *extra, "--out", str(out)]) == 0
    args = ["tune-eval", *dataset, *SMALL, *extra, "--out", str(out), "--set", f"checkpoint={ckpt}",
            "--set", f"task={task}"]
    assert main(args) == 0
    return ckpt.read_bytes(), (out / f"report_{task}.tsv").read_bytes()


def test_pretrain_tune_eval_bit_identical(dataset, tmp_path):
    first = _pipeline(dataset, tmp_path / "a")
    second = _pipeline(dataset, tmp_path / "b", extra=("--threads", "2"))
    assert first == second
    assert (tmp_path / "a" / "training_curve.tsv").read_text().count("\n") == 1 + 4  # epochs 0..3


@pytest.mark.parametrize("task", ["gc", "lp"])
def test_other_tasks(dataset, tmp_path, task):
    extra = ("--set", "lp_holdout_fraction=0.3") if task == "lp" else ()
    _, report = _pipeline(dataset, tmp_path / task, task, extra)
    key = b"auc" if task == "lp" else b"micro_f1"
    assert key in report


def test_templated_mode(dataset, tmp_path):
    _pipeline(dataset, tmp_path / "t", extra=("--set", "mode=templated"))
    assert load_checkpoint(tmp_path / "t" / "encoder.ckpt").hidden_dim == 8


def test_unknown_config_key(dataset, capsys):
    assert main(["pretrain", *dataset, "--set", "learning_rate=0.1"]) == 1
    assert "unknown config key" in capsys.readouterr().err


def test_bad_config_value(dataset):
    assert main(["pretrain", *dataset, "--set", "tau=-1"]) == 1
    assert main(["pretrain", *dataset, "--set", "mode=fancy"]) == 1


def test_config_file(dataset, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nhidden_dim = 8\nepochs_pretrain = 1\nnum_triplets = 20\n")
    assert main(["pretrain", "--config", str(cfg), *dataset, "--out", str(tmp_path / "o")]) == 0
    assert main(["pretrain", "--config", str(tmp_path / "missing.cfg"), *dataset]) == 1


def test_missing_files_are_data_errors(tmp_path):
    args = ["--set", f"node_file={tmp_path / 'none.tsv'}", "--set", f"edge_file={tmp_path / 'none.tsv'}"]
    assert main(["validate", *args]) == 2
    assert main(["pretrain", *args]) == 2


def test_malformed_edges_are_data_errors(dataset, tmp_path, capsys):
    bad = tmp_path / "edges.tsv"
    bad.write_text("n0\tnobody\tx\n")
    node_arg = dataset[1]
    assert main(["validate", "--set", node_arg, "--set", f"edge_file={bad}"]) == 2
    assert "edges.tsv:1" in capsys.readouterr().err


def test_checkpoint_dimension_mismatch(dataset, tmp_path):
    from hetprompt.encoder import init_params, save_checkpoint

    ckpt = tmp_path / "wrong.ckpt"
    save_checkpoint(init_params(3, 8, 3, 0), ckpt)
    assert main(["tune-eval", *dataset, *SMALL, "--set", f"checkpoint={ckpt}", "--out", str(tmp_path)]) == 2


def test_usage_errors(capsys):
    assert main([]) == 1
    assert main(["explode"]) == 1
    assert main(["tune-eval"]) == 1  # no input files configured
    assert main(["validate"]) == 1


def test_numeric_failure_exit_code(dataset, tmp_path, monkeypatch):
    import hetprompt.cli as cli
    from hetprompt.objectives import NumericalError

    def boom(*args, **kwargs):
        raise NumericalError("loss is not finite")

    monkeypatch.setattr(cli, "pretrain", boom)
    assert main(["pretrain", *dataset, "--out", str(tmp_path)]) == 3


def test_gen_synth_homophily_flag(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["gen-synth", "--out", str(a), "--homophily", "0.9"]) == 0
    assert main(["gen-synth", "--out", str(b)]) == 0
    assert (a / "edges.tsv").read_bytes() != (b / "edges.tsv").read_bytes()
    assert np.isclose(len((a / "nodes.tsv").read_text().splitlines()), len((b / "nodes.tsv").read_text().splitlines()))
