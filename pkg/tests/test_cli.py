import time

import pytest
from click.testing import CliRunner

from aatransfer.ambiguity import read_arc_sets
from aatransfer.cli import main
from aatransfer.treebank import read_conllu
from pipeline import invoke, make_data, run_pipeline


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    make_data(root)
    return root


@pytest.fixture(scope="module")
def outputs(data, tmp_path_factory):
    return run_pipeline(data, tmp_path_factory.mktemp("run"))


def test_pipeline_outputs(outputs):
    for path in outputs.values():
        assert path.exists() and path.stat().st_size > 0
    kv = dict(line.split("=") for line in outputs["report.kv"].read_text().splitlines())
    assert 0.0 <= float(kv["las"]) <= float(kv["uas"]) <= 1.0
    log = outputs["aaet.log"].read_text()
    assert "# mode=aaet" in log and "# l2=0.001" in log


def test_train_source_reports_dev(data, tmp_path):
    result = invoke("train-source", "--train", data / "src.conllu", "--dev", data / "dev.conllu",
                    "--out", tmp_path / "m", "--epochs", 1, "--dim", 2**12)
    assert "dev UAS" in result.output


def test_missing_path_names_it(tmp_path):
    missing = tmp_path / "nowhere.conllu"
    result = CliRunner().invoke(main, ["train-source", "--train", str(missing), "--out", str(tmp_path / "m")])
    assert result.exit_code != 0
    assert "nowhere.conllu" in result.output


def test_bad_input_is_a_clean_error(tmp_path):
    bad = tmp_path / "bad.conllu"
    bad.write_text("1\tx\t_\tX\t_\t_\t2\tdep\t_\t_\n2\ty\t_\tX\t_\t_\t1\tdep\t_\t_\n\n")
    result = CliRunner().invoke(main, ["train-source", "--train", str(bad), "--out", str(tmp_path / "m")])
    assert result.exit_code == 1
    assert "Error" in result.output


def test_same_seed_same_model(data, tmp_path):
    args = ["--epochs", 1, "--dim", 2**12, "--seed", 3]
    invoke("train-source", "--train", data / "src.conllu", "--out", tmp_path / "a", *args)
    invoke("train-source", "--train", data / "src.conllu", "--out", tmp_path / "b", *args)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_config_file_and_flag_precedence(data, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[train]\nepochs = 1\nlearning_rate = 0.02\n\n[model]\ndim = 4096\n")
    invoke("train-source", "--train", data / "src.conllu", "--out", tmp_path / "m", "--config", cfg,
           "--learning-rate", 0.03, "--log", tmp_path / "log")
    log = (tmp_path / "log").read_text()
    assert "# epochs=1" in log and "# learning_rate=0.03" in log and "# dim=4096" in log


def test_unknown_config_key(data, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[train]\nepoch = 1\n")
    result = CliRunner().invoke(main, ["train-source", "--train", str(data / "src.conllu"),
                                       "--out", str(tmp_path / "m"), "--config", str(cfg)])
    assert result.exit_code != 0 and "epoch" in result.output


def test_sigma_one_keeps_every_arc(data, outputs, tmp_path):
    invoke("infer-source", "--model", outputs["src.model"], "--input", data / "tgt.conllu",
           "--arcsets", tmp_path / "a", "--parses", tmp_path / "p", "--sigma", 1.0)
    with open(tmp_path / "a") as fh:
        for _, arc_set in read_arc_sets(fh):
            t = arc_set.length
            assert arc_set.size() == t * t  # every head but itself, ROOT included


def test_tiny_sigma_is_top_head_plus_one_best(data, outputs, tmp_path):
    invoke("infer-source", "--model", outputs["src.model"], "--input", data / "tgt.conllu",
           "--arcsets", tmp_path / "a", "--parses", tmp_path / "p", "--sigma", 1e-9)
    with open(tmp_path / "a") as fh:
        sets = read_arc_sets(fh)
    with open(tmp_path / "p") as fh:
        parses = read_conllu(fh)
    for (_, arc_set), (_, tree) in zip(sets, parses):
        assert arc_set.contains_tree(tree)
        for m in range(1, arc_set.length + 1):
            assert 1 <= len(arc_set.heads(m)) <= 2


def test_dt_returns_source_unchanged(data, outputs, tmp_path):
    invoke("transfer", "--mode", "dt", "--model", outputs["src.model"], "--input", data / "tgt.conllu",
           "--out", tmp_path / "dt.model")
    assert (tmp_path / "dt.model").read_bytes() == outputs["src.model"].read_bytes()


def test_single_source_aaet_equals_aast(data, outputs, tmp_path):
    common = ["--model", outputs["src.model"], "--input", data / "tgt.conllu", "--epochs", 1,
              "--learning-rate", 0.05, "--seed", 4]
    invoke("transfer", "--mode", "aast", "--out", tmp_path / "a", *common)
    invoke("transfer", "--mode", "aaet", "--out", tmp_path / "b", *common)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_aast_speed(tmp_path):
    invoke("synth", "--grammar", "src", "--n", 50, "--seed", 1, "--out", tmp_path / "s")
    invoke("synth", "--grammar", "tgt", "--n", 50, "--seed", 2, "--out", tmp_path / "t")
    invoke("train-source", "--train", tmp_path / "s", "--out", tmp_path / "m", "--epochs", 1, "--dim", 2**16)
    start = time.perf_counter()
    invoke("transfer", "--mode", "aast", "--model", tmp_path / "m", "--input", tmp_path / "t",
           "--out", tmp_path / "o", "--epochs", 5)
    assert time.perf_counter() - start < 60


def test_arcsets_only_for_aaet(data, outputs, tmp_path):
    result = CliRunner().invoke(main, ["transfer", "--mode", "st", "--model", str(outputs["src.model"]),
                                       "--input", str(data / "tgt.conllu"), "--arcsets", str(outputs["aux.arcs"]),
                                       "--out", str(tmp_path / "x")])
    assert result.exit_code != 0


def test_evaluate_gold_against_itself(data, tmp_path):
    invoke("evaluate", "--gold", data / "dev.conllu", "--pred", data / "dev.conllu", "--out-prefix", tmp_path / "r")
    kv = dict(line.split("=") for line in (tmp_path / "r.kv").read_text().splitlines())
    assert float(kv["uas"]) == float(kv["las"]) == 1.0
    per_label = sum(int(v) for k, v in kv.items() if k.startswith("label.") and k.endswith(".total"))
    assert per_label == int(kv["tokens"])


def test_leakage_command(data, tmp_path):
    result = invoke("leakage", "--train", data / "src.conllu", "--test", data / "dev.conllu", "--out", tmp_path / "l")
    value = float((tmp_path / "l").read_text().split("=")[1])
    assert 0.0 <= value <= 1.0
    assert "leakage" in result.output


def test_subsample_and_split(data, tmp_path):
    invoke("subsample", "--input", data / "src.conllu", "--out", tmp_path / "half", "--fraction", 0.5, "--seed", 1)
    with open(tmp_path / "half") as fh:
        assert len(read_conllu(fh)) == 20
    invoke("subsample", "--input", data / "src.conllu", "--out", tmp_path / "part", "--parts", 4)
    ids = []
    for k in range(1, 5):
        with open(tmp_path / f"part.{k}.conllu") as fh:
            ids += [s.id for s, _ in read_conllu(fh)]
    assert len(ids) == len(set(ids)) == 40
    result = CliRunner().invoke(main, ["subsample", "--input", str(data / "src.conllu"), "--out", str(tmp_path / "x")])
    assert result.exit_code != 0
