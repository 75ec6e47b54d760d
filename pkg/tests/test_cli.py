import json

import pytest

from robustlab import cli

SMALL = """
data: {n_train: 64, n_test: 32}
model: {sizes: [8]}
train: {epochs: 1, batch_size: 32}
attack: {n_examples: 16}
probe: {points: 3, batch: 16, grid: 3}
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(SMALL)
    return path


def run(capsys, *argv):
    rc = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return rc, out.out, out.err


def payload(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


def test_theory_gaussian_value(capsys):
    rc, out, _ = run(capsys, "theory", "gaussian", "--dist", 4, "--sigma", 1, "--eps", 1)
    assert rc == 0
    assert json.loads(out)["rows"][0]["robust_error"] == pytest.approx(0.158655, abs=1e-6)


def test_theory_bernoulli_frontier(capsys, tmp_path):
    out = tmp_path / "f.csv"
    rc, _, _ = run(capsys, "theory", "bernoulli", "--k", 50, "--t", 0.30, "--p", 0, "--eps", "0..8", "--out", out)
    assert rc == 0
    rows = payload(out)
    assert len(rows) == 10
    errs = [float(r.split(",")[-1]) for r in rows[1:]]
    assert errs == sorted(errs)


def test_d3is_and_reduce(capsys, tmp_path):
    g = tmp_path / "empty5.txt"
    g.write_text("nodes 5\n")
    rc, out, _ = run(capsys, "d3is", "--graph", g)
    assert rc == 0 and json.loads(out)["size"] == 5
    tri = tmp_path / "tri.txt"
    tri.write_text("0 1\n1 2\n0 2\n")
    rc, out, _ = run(capsys, "reduce", "--graph", tri, "--p", "inf", "--eps", 1, "--solve")
    doc = json.loads(out)
    assert rc == 0 and doc["certificate"]["ok"] and doc["optimal_safe_count"] == 1


def test_exit_codes(capsys, tmp_path, cfg_file):
    assert run(capsys, "d3is", "--graph", tmp_path / "missing.txt")[0] == 2
    assert run(capsys, "--config", cfg_file, "extend", "--from", tmp_path / "none.npz", "--eps", 0.4)[0] == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("train: {epochz: 3}\n")
    assert run(capsys, "--config", bad, "theory", "gaussian", "--dist", 2)[0] == 2
    k2 = tmp_path / "k2.txt"
    k2.write_text("0 1\n")
    assert run(capsys, "reduce", "--graph", k2, "--p", 2, "--eps", 1)[0] == 2
    # a valid graph beyond the exact-search limit is a runtime failure
    big = tmp_path / "big.txt"
    big.write_text("nodes 30\n")
    assert run(capsys, "d3is", "--graph", big)[0] == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["theory"])
    assert exc.value.code == 2


def test_train_then_extend_five_epochs(capsys, tmp_path, cfg_file):
    out = tmp_path / "runs"
    rc, _, _ = run(capsys, "--config", cfg_file, "--out-dir", out, "train", "--eps", 0.1)
    assert rc == 0
    ckpt = out / "train_eps0.1_seed0.npz"
    assert ckpt.exists() and (out / "train_eps0.1_seed0.svg").exists()
    rc, _, _ = run(capsys, "--config", cfg_file, "--out-dir", out, "extend", "--from", ckpt, "--eps", 0.2)
    assert rc == 0
    rows = payload(out / "extend_eps0.1_to0.2_seed0.csv")
    assert len(rows) == 1 + 5
    assert run(capsys, "--config", cfg_file, "--out-dir", out, "extend", "--from", ckpt, "--eps", 0.05)[0] == 2


def test_iat_records_stop(capsys, tmp_path, cfg_file):
    out = tmp_path / "runs"
    rc, _, _ = run(capsys, "--config", cfg_file, "--out-dir", out, "iat", "--step", 0.01, "--stop-ratio", 1.5,
                   "--epochs", 3)
    assert rc == 0
    meta = [l for l in next(out.glob("iat*.csv")).read_text().splitlines() if l.startswith("#")]
    assert any("stop_epoch" in l for l in meta)


def test_reruns_are_byte_identical(capsys, tmp_path, cfg_file):
    texts = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run(capsys, "--config", cfg_file, "--out-dir", out, "--threads", 1, "train", "--eps", 0.1)[0] == 0
        texts.append((out / "train_eps0.1_seed0.csv").read_bytes())
        ckpt = out / "train_eps0.1_seed0.npz"
        assert run(capsys, "--config", cfg_file, "--out-dir", out, "surface", "--model", ckpt, "--eps", 0.1)[0] == 0
        texts += [p.read_bytes() for p in sorted(out.glob("surface*.csv"))]
    half = len(texts) // 2
    assert texts[:half] == texts[half:]


def test_probe_commands(capsys, tmp_path, cfg_file):
    out = tmp_path / "runs"
    for eps in (0.1, 0.2):
        run(capsys, "--config", cfg_file, "--out-dir", out, "train", "--eps", eps)
    a, b = out / "train_eps0.1_seed0.npz", out / "train_eps0.2_seed0.npz"
    assert run(capsys, "--config", cfg_file, "--out-dir", out, "landscape", "--from", a, "--to", b,
               "--attack", "fast")[0] == 0
    assert run(capsys, "--config", cfg_file, "--out-dir", out, "saliency", "--model", b, "--eps", 0.1)[0] == 0
    assert run(capsys, "--config", cfg_file, "--out-dir", out, "evaluate", "--model", b, "--baseline", a,
               "--eps", 0.1, "--n", 8, "--brute-samples", 5)[0] == 0
    names = {p.suffix for p in out.iterdir()}
    assert {".csv", ".json", ".svg"} <= names


def test_parse_grid_and_p():
    assert cli.parse_grid("0..3") == [0, 1, 2, 3]
    assert cli.parse_grid("0..0.2:0.1") == [0.0, 0.1, 0.2]
    assert cli.parse_grid("1,2.5") == [1.0, 2.5]
    with pytest.raises(cli.ConfigError):
        cli.parse_grid("a..b")
    assert cli.parse_p("inf") == float("inf")


def test_help_lists_figure_commands(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    text = capsys.readouterr().out
    for cmd in ("train", "extend", "iat", "evaluate", "landscape", "surface", "saliency", "theory", "reduce", "d3is"):
        assert cmd in text
