import json
import sys

import numpy as np
import pytest
import yaml

from gappart.cli import main
from gappart.graph import generate_clique_chain, generate_erdos_renyi
from gappart.io import read_assignment, write_edge_list


@pytest.fixture
def files(tmp_path, two_triangles, c4):
    paths = {}
    for name, g in (("tri", two_triangles), ("c4", c4),
                    ("er1", generate_erdos_renyi(20, 0.3, 1)), ("er2", generate_erdos_renyi(20, 0.3, 2))):
        p = tmp_path / f"{name}.edges"
        write_edge_list(g, p)
        paths[name] = str(p)
    return paths


def test_generate_writes_manifest_and_is_reproducible(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["generate", "--kind", "er", "--n", "50", "--p", "0.1", "--count", "3", "--seed", "7"]
    assert main(args + ["--out", str(out1)]) == 0
    man = json.loads((out1 / "manifest.json").read_text())
    assert len(man["graphs"]) == 3 and [g["seed"] for g in man["graphs"]] == [7, 8, 9]
    assert (out1 / "er_000.edges").exists() and (out1 / "er_002.metis").exists()
    assert (out1 / "resolved_config.yaml").exists()
    # replay from the resolved config alone
    assert main(["generate", "--config", str(out1 / "resolved_config.yaml"), "--out", str(out2)]) == 0
    man2 = json.loads((out2 / "manifest.json").read_text())
    assert [g["sha256"] for g in man["graphs"]] == [g["sha256"] for g in man2["graphs"]]


def test_generate_rejects_bad_probability(tmp_path):
    assert main(["generate", "--p", "1.5", "--out", str(tmp_path)]) == 2


def test_generate_featured_blocks(tmp_path):
    assert main(["generate", "--kind", "featured-blocks", "--sizes", "20,10", "--p", "0.3",
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "featured-blocks_000.json").exists()


def test_unknown_config_key(tmp_path, files):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"training": {"learnng_rate": 0.1}}))
    assert main(["train", "--config", str(cfg), "--graph", files["tri"], "--g", "2",
                 "--out", str(tmp_path / "r")]) == 2
    cfg.write_text(yaml.safe_dump({"bogus": 1}))
    assert main(["oracle", "--config", str(cfg), "--graph", files["tri"]]) == 2


def test_train_infer_eval_cycle(tmp_path, files, capsys):
    run = tmp_path / "run"
    assert main(["train", "--graph", files["er1"], "--graph", files["er2"], "--val", files["tri"],
                 "--g", "2", "--features", "pca", "--feature-dim", "8", "--hidden", "8",
                 "--layers", "2", "--epochs", "4", "--seed", "1", "--out", str(run)]) == 0
    assert (run / "model.ckpt").exists()
    hist = (run / "history.csv").read_text().splitlines()
    assert hist[0].startswith("epoch,graph,loss") and len(hist) == 1 + 4 * 2
    resolved = yaml.safe_load((run / "resolved_config.yaml").read_text())
    assert resolved["training"]["max_epochs"] == 4 and resolved["model"]["g_parts"] == 2

    out = tmp_path / "inf"
    assert main(["infer", "--checkpoint", str(run / "model.ckpt"), "--graph", files["er1"],
                 "--out", str(out)]) == 0
    assert read_assignment(out / "assignment.txt").shape == (20,)
    metrics = json.loads((out / "metrics.json").read_text())
    assert "wall_clock_ms" in metrics
    assert main(["infer", "--checkpoint", str(run / "model.ckpt"), "--graph", files["er1"],
                 "--g", "3", "--out", str(out)]) == 2

    # resume continues from the stored optimizer state
    run2 = tmp_path / "run2"
    assert main(["train", "--resume", str(run / "model.ckpt"), "--graph", files["er1"],
                 "--epochs", "2", "--out", str(run2)]) == 0
    assert (run2 / "model.ckpt").exists()


def test_train_errors(tmp_path, files):
    assert main(["train", "--graph", files["tri"], "--val", str(tmp_path / "missing.edges"),
                 "--g", "2", "--out", str(tmp_path / "r")]) == 4
    assert main(["train", "--g", "2", "--out", str(tmp_path / "r")]) == 2
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage")
    assert main(["infer", "--checkpoint", str(bad), "--graph", files["tri"],
                 "--out", str(tmp_path / "i")]) == 4


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_divergence_exit_code(tmp_path, files):
    run = tmp_path / "div"
    code = main(["train", "--graph", files["tri"], "--g", "2", "--features", "identity",
                 "--lr", "1e300", "--epochs", "20", "--out", str(run)])
    assert code == 3
    assert (run / "last_finite.ckpt").exists()


def test_preset_merge(tmp_path, files):
    run = tmp_path / "p"
    assert main(["train", "--preset", "gap-random-10", "--graph", files["er1"], "--g", "2",
                 "--feature-dim", "8", "--hidden", "8", "--epochs", "1", "--out", str(run)]) == 0
    resolved = yaml.safe_load((run / "resolved_config.yaml").read_text())
    assert resolved["model"]["embedding"] == "sage" and resolved["model"]["layers"] == 2
    assert resolved["model"]["hidden"] == 8
    assert resolved["training"]["learning_rate"] == 7.5e-6
    assert resolved["training"]["normalized_balance"] is True


def test_eval_all_zero_on_c4(tmp_path, files, capsys):
    a = tmp_path / "zeros.txt"
    a.write_text("0\n0\n0\n0\n")
    hist = tmp_path / "deg.csv"
    assert main(["eval", "--graph", files["c4"], "--assignment", str(a), "--g", "2",
                 "--degree-histogram", str(hist)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["edge_cut_ratio"] == 0 and doc["balancedness"] == 0.75
    assert hist.read_text() == "degree,count\n2,4\n"
    a.write_text("0\n0\n")
    assert main(["eval", "--graph", files["c4"], "--assignment", str(a), "--g", "2"]) == 2


def test_oracle_two_triangles(tmp_path, files, capsys):
    assert main(["oracle", "--graph", files["tri"], "--g", "2", "--out", str(tmp_path / "o")]) == 0
    assert "0.285714" in capsys.readouterr().out
    doc = json.loads((tmp_path / "o" / "oracle.json").read_text())
    assert round(doc["ncut"], 4) == 0.2857
    big = tmp_path / "big.edges"
    write_edge_list(generate_erdos_renyi(17, 0.3, 0), big)
    assert main(["oracle", "--graph", str(big), "--g", "2"]) == 2


def test_bench_with_external_and_checkpoint(tmp_path, files):
    run = tmp_path / "run"
    assert main(["train", "--graph", files["er1"], "--g", "2", "--features", "pca",
                 "--feature-dim", "4", "--hidden", "4", "--layers", "1", "--epochs", "2",
                 "--out", str(run)]) == 0
    script = tmp_path / "halves.py"
    script.write_text("import sys\nn=int(open(sys.argv[1]).readline().split()[0])\n"
                      "print('\\n'.join(str(i*2//n) for i in range(n)))\n")
    out = tmp_path / "b"
    assert main(["bench", "--graph", files["tri"], "--graph", files["er2"],
                 "--checkpoint", str(run / "model.ckpt"),
                 "--external", f"halves={sys.executable} {script} {{graph}}",
                 "--repeats", "2", "--out", str(out)]) == 0
    doc = json.loads((out / "bench.json").read_text())
    names = {r["partitioner"] for r in doc["rows"]}
    assert names == {"spectral", "random", "gap", "halves"}
    tri = [r for r in doc["rows"] if r["partitioner"] == "halves" and r["graph"] == "tri.edges"][0]
    assert tri["edge_cut_ratio_mean"] == pytest.approx(1 / 7) and tri["error"] == ""
    gap = [r for r in doc["rows"] if r["partitioner"] == "gap"][0]
    assert gap["train_ms"] is not None
    assert (out / "bench.csv").exists() and (out / "resolved_config.yaml").exists()


def test_bench_requires_g(tmp_path, files):
    assert main(["bench", "--graph", files["tri"], "--out", str(tmp_path / "b")]) == 2
