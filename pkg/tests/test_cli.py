import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from _synth import terrain
from _tables import AID_ROWS, COLUMNS
from eocorrupt.cli import main
from eocorrupt.core import CorruptionKind
from eocorrupt.fidelity import EmbeddingSet, write_embeddings


def save_png(path: Path, arr: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.rint(arr * 255).astype(np.uint8)).save(path)


@pytest.fixture
def aid(tmp_path):
    root = tmp_path / "AID"
    for i, cls in enumerate(["beach", "forest", "forest"]):
        save_png(root / cls / f"img{i}.png", terrain(32, 32, seed=i))
    return root


def tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def run(*args):
    return main([str(a) for a in args])


# --- corrupt / manifest -------------------------------------------------------------

def test_corrupt_grid_writes_fifteen_images(aid, tmp_path, capsys):
    out = tmp_path / "out"
    assert run("corrupt", "--input", aid, "--types", "gaussian_noise", "--severities", "1-5",
               "--seed", 7, "--out", out) == 0
    produced = sorted((out / "gaussian_noise").rglob("*.png"))
    assert len(produced) == 15
    summary = json.loads(capsys.readouterr().out)
    assert summary["written"] == 15 and summary["failed"] == 0
    prov = json.loads((out / "provenance.json").read_text())
    assert prov["seed"] == 7


def test_unknown_corruption_exits_2_and_lists_names(aid, tmp_path, capsys):
    assert run("corrupt", "--input", aid, "--types", "fog", "--out", tmp_path / "o") == 2
    err = capsys.readouterr().err
    assert "fog" in err
    for kind in CorruptionKind:
        assert kind.value in err
    assert not (tmp_path / "o").exists()


def test_compound_chain(aid, tmp_path):
    out = tmp_path / "out"
    assert run("corrupt", "--input", aid, "--chain", "brightness:3,cloud:3,compression:3",
               "--out", out) == 0
    folder = out / "brightness_contrast+cloud+compression_artifacts" / "3"
    assert len(list(folder.glob("*.png"))) == 3
    assert not (out / "haze").exists()


def test_bad_chain_and_severity_exit_2(aid, tmp_path):
    assert run("corrupt", "--input", aid, "--chain", "rotate:1,scale:1", "--out", tmp_path / "a") == 2
    assert run("corrupt", "--input", aid, "--types", "haze", "--severities", "5-2",
               "--out", tmp_path / "b") == 2
    assert run("corrupt", "--input", tmp_path / "nowhere", "--out", tmp_path / "c") == 2
    assert run("corrupt", "--bogus-flag") == 2


def test_partial_failure_exits_1(aid, tmp_path, capsys):
    (aid / "beach" / "img0.png").write_bytes(b"broken")
    assert run("corrupt", "--input", aid, "--types", "haze", "--severities", "1",
               "--out", tmp_path / "o") == 1
    captured = capsys.readouterr()
    assert json.loads(captured.out)["failed"] == 1
    assert "1 failure" in captured.err


def test_rerun_and_worker_count_do_not_change_bytes(aid, tmp_path, monkeypatch):
    args = ["--types", "salt_pepper,cloud,translate", "--severities", "1-2"]
    assert run("corrupt", "--input", aid, *args, "--out", tmp_path / "a") == 0
    assert run("corrupt", "--input", aid, *args, "--out", tmp_path / "b", "--workers", 3) == 0
    monkeypatch.setenv("REOBENCH_WORKERS", "2")
    assert run("corrupt", "--input", aid, *args, "--out", tmp_path / "c") == 0
    first = tree(tmp_path / "a")
    assert tree(tmp_path / "b") == first and tree(tmp_path / "c") == first


def test_manifest_then_corrupt_from_manifest(aid, tmp_path, capsys):
    mpath = tmp_path / "m" / "aid.json"
    assert run("manifest", "--input", aid, "--types", "haze,rotate", "--severities", "2-3",
               "--seed", 5, "--out", mpath) == 0
    doc = json.loads(mpath.read_text())
    assert doc["task"] == "classification" and len(doc["images"]) == 3
    assert doc["corruption_grid"] == {"kinds": ["haze", "rotate"], "severities": [2, 3]}
    capsys.readouterr()
    assert run("corrupt", "--input", mpath, "--out", tmp_path / "o") == 0
    assert json.loads(capsys.readouterr().out)["written"] == 12
    assert json.loads((tmp_path / "o" / "provenance.json").read_text())["seed"] == 5


# --- score ------------------------------------------------------------------------------

def write_jsonl(path: Path, rows) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def test_score_classification(aid, tmp_path, capsys):
    mpath = tmp_path / "aid.json"
    run("manifest", "--input", aid, "--out", mpath)
    preds = write_jsonl(tmp_path / "p.jsonl", [{"id": "img0", "label": "beach"},
                                               {"id": "img1", "label": "forest"},
                                               {"id": "img2", "label": "forest"}])
    capsys.readouterr()
    cell_path = tmp_path / "cells" / "m_clean.json"
    assert run("score", "--pred", preds, "--gt", mpath, "--task", "classification",
               "--model", "M", "--out", cell_path) == 0
    assert capsys.readouterr().out == "100.00\n"
    cell = json.loads(cell_path.read_text())
    assert cell["value"] == 100.0 and cell["corruption"] == "clean" and cell["model"] == "M"


def test_score_segmentation(tmp_path, capsys):
    gt_dir = tmp_path / "gt"
    gt_dir.mkdir()
    Image.fromarray(np.array([[0, 0], [1, 1]], np.uint8)).save(gt_dir / "t1.png")
    Image.fromarray(np.array([[0, 1], [1, 1]], np.uint8)).save(tmp_path / "t1_pred.png")
    preds = write_jsonl(tmp_path / "p.jsonl", [{"id": "t1", "mask": "t1_pred.png"}])
    assert run("score", "--pred", preds, "--gt", gt_dir, "--task", "segmentation",
               "--num-classes", 2, "--corruption", "haze", "--severity", 2) == 0
    assert capsys.readouterr().out == "58.33\n"


def test_score_grounding_inclusive_threshold(tmp_path, capsys):
    root = tmp_path / "rsvg"
    save_png(root / "images" / "s1.png", terrain(16, 16))
    (root / "annotations.json").write_text(json.dumps(
        [{"image_id": "s1", "expression": "the pond", "box": [0, 0, 2, 2], "id": "r1"}]))
    mpath = tmp_path / "g.json"
    run("manifest", "--input", root, "--out", mpath)
    preds = write_jsonl(tmp_path / "p.jsonl", [{"id": "r1", "box": [0, 0, 2, 1]}])
    capsys.readouterr()
    assert run("score", "--pred", preds, "--gt", mpath, "--task", "grounding") == 0
    assert capsys.readouterr().out == "100.00\n"


def test_score_bad_record_exits_2(aid, tmp_path, capsys):
    mpath = tmp_path / "aid.json"
    run("manifest", "--input", aid, "--out", mpath)
    preds = tmp_path / "p.jsonl"
    preds.write_text('{"id": "img0", "label": "beach"}\n{"id": "img1"}\n')
    capsys.readouterr()
    assert run("score", "--pred", preds, "--gt", mpath, "--task", "classification") == 2
    assert "p.jsonl:2" in capsys.readouterr().err


# --- report -----------------------------------------------------------------------------

def write_cells(folder: Path, model: str, clean, by_column, severity=3) -> None:
    folder.mkdir(parents=True, exist_ok=True)
    cells = [{"model": model, "corruption": "clean", "value": clean}]
    cells += [{"model": model, "corruption": name, "value": v, "severity": severity}
              for name, v in by_column.items()]
    (folder / f"{model}.json").write_text(json.dumps(cells))


def test_report_reproduces_satlas_row(tmp_path, capsys):
    clean, cells, _, _ = AID_ROWS["SATLAS"]
    write_cells(tmp_path / "cells", "SATLAS", clean, dict(zip(COLUMNS, cells)))
    curves = tmp_path / "curves.csv"
    assert run("report", "--cells", tmp_path / "cells", "--curves", curves) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1].startswith("SATLAS,90.85,82.54,")
    assert out[1].endswith(",74.07,18.47")
    assert curves.read_text().splitlines()[0] == "model,corruption,severity,value"


def test_report_markdown_and_zero_drop(tmp_path, capsys):
    write_cells(tmp_path / "cells", "m", 70.0, {"haze": 70.0})
    assert run("report", "--cells", tmp_path / "cells", "--format", "markdown") == 0
    assert capsys.readouterr().out.splitlines()[-1] == "| m | 70.00 | 70.00 | 70.00 | 0.00 |"


def test_report_missing_clean_exits_2(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"model": "m", "corruption": "haze",
                                                 "value": 50, "severity": 1}))
    assert run("report", "--cells", tmp_path / "c.json") == 2
    assert "clean" in capsys.readouterr().err


# --- fidelity ---------------------------------------------------------------------------

def test_fidelity_identical_and_drift(tmp_path, capsys):
    rng = np.random.default_rng(0)
    base = rng.normal(size=(200, 6))
    write_embeddings(EmbeddingSet(base), tmp_path / "clean.bin")
    args = []
    for s in range(1, 6):
        write_embeddings(EmbeddingSet(base), tmp_path / f"same{s}.bin")
        args.append(f"{s}=" + str(tmp_path / f"same{s}.bin"))
    assert run("fidelity", "--clean", tmp_path / "clean.bin", "--corrupted", *args) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "severity,distance"
    assert [float(r.split(",")[1]) for r in rows[1:]] == [0.0] * 5

    args = []
    for s in range(1, 6):
        write_embeddings(EmbeddingSet(base + 0.2 * s), tmp_path / f"d{s}.jsonl")
        args.append(f"{s}=" + str(tmp_path / f"d{s}.jsonl"))
    out_csv = tmp_path / "sweep.csv"
    assert run("fidelity", "--clean", tmp_path / "clean.bin", "--corrupted", *args,
               "--out", out_csv) == 0
    values = [float(r.split(",")[1]) for r in out_csv.read_text().splitlines()[1:]]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_fidelity_dimension_mismatch_exits_2(tmp_path, capsys):
    write_embeddings(EmbeddingSet(np.zeros((4, 3))), tmp_path / "a.bin")
    write_embeddings(EmbeddingSet(np.ones((4, 5))), tmp_path / "b.bin")
    assert run("fidelity", "--clean", tmp_path / "a.bin", "--corrupted", "1=" + str(tmp_path / "b.bin")) == 2
    assert "dimension" in capsys.readouterr().err
    assert run("fidelity", "--clean", tmp_path / "a.bin", "--corrupted", "x" + str(tmp_path / "b.bin")) == 2


# --- process-level behaviour ------------------------------------------------------------

def test_module_entry_point_separates_streams(aid, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "eocorrupt", "corrupt", "--input", str(aid),
                           "--types", "haze", "--severities", "1", "--out", str(tmp_path / "o")],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["written"] == 3
    assert "haze: 3 images" in proc.stderr
    version = subprocess.run([sys.executable, "-m", "eocorrupt", "--version"],
                             capture_output=True, text=True, check=False)
    assert version.returncode == 0 and version.stdout.startswith("eocorrupt ")
