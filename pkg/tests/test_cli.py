import json

from tsvmorph.cli import run
from tsvmorph.manifest import load_manifest
from tsvmorph.surface import parse_wli, read_png


def test_unknown_flag_is_usage_error(capsys):
    assert run(["--definitely-not-a-flag"]) == 1
    assert run(["train"]) == 1  # missing required options


def test_generate_mosaic_outputs(tmp_path):
    out = tmp_path / "gen"
    assert run(["generate", "--rows", "2", "--cols", "3", "--seed", "7",
                "--out", str(out)]) == 0
    hm = parse_wli((out / "mosaic.wli").read_bytes())
    img = read_png((out / "mosaic.png").read_bytes())
    assert (img.width, img.height) == (hm.width, hm.height)
    truth = json.loads((out / "truth.json").read_text())
    assert len(truth) == 6
    assert {t["label"] for t in truth} <= {"granular", "edge_ring", "edge_bulge"}


def test_generate_is_idempotent_given_seed(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["generate", "--rows", "1", "--cols", "2", "--seed", "5",
                    "--out", str(out)]) == 0
    assert (a / "mosaic.wli").read_bytes() == (b / "mosaic.wli").read_bytes()
    assert (a / "mosaic.png").read_bytes() == (b / "mosaic.png").read_bytes()
    assert (a / "truth.json").read_text() == (b / "truth.json").read_text()


def test_seed_env_fallback(tmp_path, monkeypatch):
    a, b = tmp_path / "a", tmp_path / "b"
    monkeypatch.setenv("TSVMORPH_SEED", "5")
    assert run(["generate", "--rows", "1", "--cols", "2", "--out", str(a)]) == 0
    monkeypatch.delenv("TSVMORPH_SEED")
    assert run(["generate", "--rows", "1", "--cols", "2", "--seed", "5",
                "--out", str(b)]) == 0
    assert (a / "mosaic.wli").read_bytes() == (b / "mosaic.wli").read_bytes()


def test_import_wli_and_png(tmp_path):
    gen = tmp_path / "gen"
    run(["generate", "--rows", "1", "--cols", "1", "--seed", "2", "--out", str(gen)])
    out = tmp_path / "imported"
    assert run(["import", str(gen / "mosaic.wli"), str(gen / "mosaic.png"),
                "--out", str(out)]) == 0
    rows = [json.loads(l) for l in (out / "import_manifest.jsonl").read_text().splitlines()]
    assert len(rows) == 2
    assert (out / "mosaic.png").exists()


def test_crop_writes_named_pngs_and_manifest(tmp_path):
    gen = tmp_path / "gen"
    run(["generate", "--rows", "2", "--cols", "2", "--seed", "3", "--out", str(gen)])
    out = tmp_path / "crops"
    assert run(["crop", "--image", str(gen / "mosaic.png"), "--grid-rows", "2",
                "--grid-cols", "2", "--out", str(out)]) == 0
    records = load_manifest(out / "manifest.jsonl")
    assert len(records) == 4
    assert [r.grid_cell for r in records] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    for r, c in [(0, 0), (0, 1), (1, 0), (1, 1)]:
        assert (out / "crops" / f"mosaic_{r}_{c}.png").exists()
    grid = json.loads((out / "grid.json").read_text())
    assert grid["rows"] == 2 and grid["cols"] == 2


def test_augment_multiplies_manifest(tmp_path):
    gen = tmp_path / "gen"
    run(["generate", "--mode", "dataset", "--train-per-class", "2",
         "--test-per-class", "1", "--seed", "1", "--out", str(gen)])
    out = tmp_path / "aug"
    assert run(["augment", "--manifest", str(gen / "manifest.jsonl"),
                "--type", "3", "--out", str(out)]) == 0
    records = load_manifest(out / "manifest.jsonl")
    assert len(records) == 9 * 6


def test_train_eval_cycle(tmp_path):
    gen = tmp_path / "data"
    run(["generate", "--mode", "dataset", "--train-per-class", "4",
         "--test-per-class", "2", "--seed", "3", "--out", str(gen)])
    out = tmp_path / "run"
    code = run(["train", "--train-manifest", str(gen / "manifest.jsonl"),
                "--arch", "lenet5", "--epochs", "2", "--batch-size", "4",
                "--seed", "0", "--out", str(out)])
    assert code == 0
    history = json.loads((out / "history.json").read_text())
    assert len(history) == 2
    metrics = json.loads((out / "metrics.json").read_text())
    assert 0.0 <= metrics["max_total_accuracy"] <= 1.0
    assert (out / "checkpoint.tsvm").exists()
    assert run(["eval", "--checkpoint", str(out / "checkpoint.tsvm"),
                "--manifest", str(gen / "manifest.jsonl")]) == 0


def test_describe_byte_stable(tmp_path, capsys):
    assert run(["describe", "--arch", "vgg_inspired_alexnet"]) == 0
    first = capsys.readouterr().out
    assert run(["describe", "--arch", "vgg_inspired_alexnet"]) == 0
    second = capsys.readouterr().out
    assert first == second
    assert "256x3x3" in first


def test_sweep_writes_reports(tmp_path):
    out = tmp_path / "sweep"
    code = run(["sweep", "--archs", "lenet5", "--aug", "0,1", "--dropout", "0.0",
                "--epochs", "1", "--synthetic", "--train-per-class", "2",
                "--test-per-class", "1", "--seed", "0", "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report) == 2  # lenet5 skips the dropout axis
    csv_lines = (out / "report.csv").read_text().splitlines()
    assert csv_lines[0] == "arch,aug_type,dropout,max_accuracy,best_epoch"
    assert all("NA" in line for line in csv_lines[1:])


def test_data_error_exit_code(tmp_path):
    out = tmp_path / "x"
    out.mkdir()
    bad = out / "manifest.jsonl"
    bad.write_text("")  # empty manifest -> no splits
    code = run(["train", "--train-manifest", str(bad), "--out", str(out)])
    assert code == 2
