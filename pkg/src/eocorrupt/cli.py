"""Command-line interface: ``eocorrupt {manifest,corrupt,score,report,fidelity}``.

Exit status is 0 on success, 1 when a generation run finished with
per-image failures, and 2 on configuration or input-format errors.  Results
go to stdout; progress and diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path
from typing import Sequence

from . import __version__
from .annotations import (
    ClassLabel,
    HorizontalBoxes,
    OrientedBoxes,
    ReferringRecords,
    SegMask,
    load_annotation_bytes,
)
from .core import CorruptionKind
from .errors import EOCorruptError, IdMismatch
from .fidelity import read_embeddings, severity_sweep
from .metrics import (
    ScoreCell,
    build_reports,
    load_predictions,
    render_report,
    score_task,
    severity_curves_csv,
)
from .pipeline import (
    LAYOUTS,
    TASKS,
    CorruptionChain,
    DatasetManifest,
    GenerationPlan,
    generate,
    grid_chains,
    ingest,
    load_entry_annotation,
    parse_chain,
    resolve_workers,
)

DEFAULT_SEED = 0

log = logging.getLogger("eocorrupt")


class ConfigError(Exception):
    """Bad arguments; reported with exit status 2."""


# --- argument helpers ------------------------------------------------------------------

def parse_severities(text: str) -> tuple[int, int]:
    """``"3"`` or ``"1-5"`` to an inclusive range."""
    lo, sep, hi = text.partition("-")
    try:
        lo_i = int(lo)
        hi_i = int(hi) if sep else lo_i
    except ValueError:
        raise ConfigError(f"invalid severity range {text!r}; use N or LO-HI") from None
    if not 1 <= lo_i <= hi_i:
        raise ConfigError(f"invalid severity range {text!r}")
    return lo_i, hi_i


def parse_kinds(text: str) -> list[CorruptionKind]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise ConfigError("no corruption types given")
    kinds = []
    for name in names:
        try:
            kinds.append(CorruptionKind.parse(name))
        except EOCorruptError:
            valid = ", ".join(k.value for k in CorruptionKind)
            raise ConfigError(f"unknown corruption {name!r}; valid names: {valid}") from None
    return kinds


def _load_manifest(args) -> DatasetManifest:
    src = Path(args.input)
    if src.is_file():
        return DatasetManifest.load(src)
    if not src.exists():
        raise ConfigError(f"input {src} does not exist")
    return ingest(src, args.layout, task=args.task, seed=_seed(args))


def _seed(args, manifest: "DatasetManifest | None" = None) -> int:
    if args.seed is not None:
        return args.seed
    return manifest.seed if manifest is not None else DEFAULT_SEED


# --- subcommands -------------------------------------------------------------------------

def cmd_manifest(args) -> int:
    manifest = ingest(args.input, args.layout, dataset=args.dataset, task=args.task,
                      seed=_seed(args), kinds=[k.value for k in parse_kinds(args.types)]
                      if args.types else None,
                      severities=parse_severities(args.severities))
    if args.out:
        manifest.save(args.out)
        print(args.out)
    else:
        doc = dict(manifest.to_json(), root=str(manifest.root.resolve()))
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    log.info("%d images, layout %s", len(manifest.images), manifest.annotation_format)
    return 0


def cmd_corrupt(args) -> int:
    kinds = parse_kinds(args.types) if args.types else None
    sev = parse_severities(args.severities) if args.severities else None
    workers = resolve_workers(args.workers)
    manifest = _load_manifest(args)
    seed = _seed(args, manifest)
    manifest.seed = seed
    if kinds is not None:
        manifest.kinds = tuple(k.value for k in kinds)
    if sev is not None:
        manifest.severities = sev

    chains: list[CorruptionChain] = []
    try:
        chains.extend(parse_chain(text, seed) for text in args.chain or ())
    except EOCorruptError as exc:
        raise ConfigError(str(exc)) from None
    if not chains or kinds is not None:
        chains = list(grid_chains(manifest)) + chains
    plan = GenerationPlan(manifest, Path(args.out), tuple(chains),
                          aggregation=args.policy, include_clean=not args.no_clean)
    log.info("plan %s: %d images x %d conditions, %d worker(s)", plan.plan_hash[:12],
             len(manifest.images), len(plan.chains), workers)
    report = generate(plan, workers)

    done = Counter()
    prov = json.loads(report.provenance_path.read_text())
    for entry in prov["entries"]:
        done[entry["kind"]] += 1
    for name in dict.fromkeys(c.name for c in plan.chains):
        log.info("%s: %d images", name, done[name])
    summary = {"plan_hash": report.plan_hash, "written": report.written,
               "failed": report.failed, "provenance": str(report.provenance_path)}
    print(json.dumps(summary, sort_keys=True))
    if report.failed:
        print(f"eocorrupt: {report.failed} failure(s); {report.written} image(s) written",
              file=sys.stderr)
        return 1
    return 0


def _gt_payload(task: str, ann, image_id: str):
    if task == "classification":
        if not isinstance(ann, ClassLabel):
            raise ConfigError(f"image {image_id!r}: classification needs class labels")
        return ann
    if task == "segmentation":
        if not isinstance(ann, SegMask):
            raise ConfigError(f"image {image_id!r}: segmentation needs masks")
        return ann.mask
    if task == "detection":
        if not isinstance(ann, (OrientedBoxes, HorizontalBoxes)):
            raise ConfigError(f"image {image_id!r}: detection needs box annotations")
        return ann
    if task == "grounding":
        if not isinstance(ann, ReferringRecords):
            raise ConfigError(f"image {image_id!r}: grounding needs referring records")
        return ann
    raise ConfigError(f"task {task!r} takes no ground truth")


def _load_ground_truth(path: Path, task: str) -> dict:
    anns: dict = {}
    if path.is_dir():
        for f in sorted(path.iterdir()):
            if f.is_file() and f.suffix in (".png", ".txt", ".json"):
                anns[f.stem] = load_annotation_bytes(f.read_bytes(), f.suffix, str(f))
    elif path.is_file():
        manifest = DatasetManifest.load(path)
        for entry in manifest.images:
            anns[entry.id] = load_entry_annotation(manifest, entry)
    else:
        raise ConfigError(f"ground truth {path} does not exist")
    gts = {k: _gt_payload(task, a, k) for k, a in anns.items()}
    if task == "grounding":
        flat = {}
        for records in gts.values():
            for rec in records.records:
                if rec.record_id in flat:
                    raise IdMismatch(f"duplicate referring record id {rec.record_id!r}")
                flat[rec.record_id] = rec.box
        return flat
    return gts


def cmd_score(args) -> int:
    if args.task not in TASKS:
        raise ConfigError(f"unknown task {args.task!r}")
    preds = load_predictions(args.pred, args.task)
    gts = None
    if args.task not in ("captioning", "vqa"):
        if not args.gt:
            raise ConfigError(f"--gt is required for task {args.task}")
        gts = _load_ground_truth(Path(args.gt), args.task)
    if args.task == "classification":
        # Compare names with names and indices with indices.
        gts = {k: (v.category if isinstance(preds.get(k), str) else v.category_id)
               for k, v in gts.items()}
    value = score_task(args.task, preds, gts, args.num_classes)
    corruption = args.corruption
    if corruption != "clean":
        corruption = parse_kinds(corruption)[0].value
    cell = ScoreCell(args.model, corruption, value, args.severity, None, args.task)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(cell.to_json(), indent=2, sort_keys=True) + "\n")
    print(f"{value:.2f}")
    return 0


def _read_cells(paths: Sequence[str]) -> list[ScoreCell]:
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.rglob("*.json")))
        elif p.is_file():
            files.append(p)
        else:
            raise ConfigError(f"{p} does not exist")
    cells = []
    for f in files:
        try:
            doc = json.loads(f.read_text())
            items = doc if isinstance(doc, list) else [doc]
            cells.extend(ScoreCell.from_json(obj) for obj in items)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{f}: not a score cell ({exc})") from None
    if not cells:
        raise ConfigError("no score cells found")
    return cells


def cmd_report(args) -> int:
    cells = _read_cells(args.cells)
    policy = args.policy
    reports = build_reports(cells, policy)
    text = render_report(reports, args.format)
    if args.out:
        Path(args.out).write_text(text)
    if args.curves:
        Path(args.curves).write_text(severity_curves_csv(cells))
    sys.stdout.write(text)
    return 0


def _parse_sev_file(text: str) -> tuple[int, Path]:
    sev, sep, path = text.partition("=")
    if not sep or not sev.strip().isdigit():
        raise ConfigError(f"expected SEVERITY=FILE, got {text!r}")
    return int(sev), Path(path)


def cmd_fidelity(args) -> int:
    clean = read_embeddings(args.clean)
    corrupted = {}
    for item in args.corrupted:
        sev, path = _parse_sev_file(item)
        corrupted[sev] = read_embeddings(path)
    rows = severity_sweep(clean, corrupted)
    lines = ["severity,distance"] + [f"{s},{d:.6f}" for s, d in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


# --- parser ----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eocorrupt",
                                description="Corruption benchmarks for Earth observation imagery.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more stderr logging")
    p.add_argument("-q", "--quiet", action="store_true", help="errors only on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("manifest", help="scan a dataset directory into a manifest JSON")
    m.add_argument("--input", required=True)
    m.add_argument("--layout", choices=LAYOUTS)
    m.add_argument("--task", choices=TASKS)
    m.add_argument("--dataset")
    m.add_argument("--types", help="comma-separated corruption names (default: all 12)")
    m.add_argument("--severities", default="1-5")
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--out")
    m.set_defaults(func=cmd_manifest)

    c = sub.add_parser("corrupt", help="generate a corrupted benchmark tree")
    c.add_argument("--input", required=True, help="manifest JSON or dataset directory")
    c.add_argument("--layout", choices=LAYOUTS)
    c.add_argument("--task", choices=TASKS)
    c.add_argument("--types", help="comma-separated corruption names")
    c.add_argument("--severities", help="N or LO-HI (default: manifest grid)")
    c.add_argument("--chain", action="append",
                   help="compound condition such as brightness:3,cloud:3,compression:3")
    c.add_argument("--seed", type=int, default=None,
                   help=f"global seed (default: manifest seed, else {DEFAULT_SEED})")
    c.add_argument("--out", required=True)
    c.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $REOBENCH_WORKERS, else 1)")
    c.add_argument("--policy", default="mean", help="severity aggregation recorded in the plan")
    c.add_argument("--no-clean", action="store_true", help="do not copy clean images")
    c.set_defaults(func=cmd_corrupt)

    s = sub.add_parser("score", help="score a prediction file into a score cell")
    s.add_argument("--pred", required=True, help="JSON-lines predictions")
    s.add_argument("--gt", help="manifest JSON or annotation directory")
    s.add_argument("--task", required=True, choices=TASKS)
    s.add_argument("--model", default="model")
    s.add_argument("--corruption", default="clean")
    s.add_argument("--severity", type=int, default=None)
    s.add_argument("--num-classes", type=int, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_score)

    r = sub.add_parser("report", help="render a robustness table from score cells")
    r.add_argument("--cells", nargs="+", required=True, help="score cell files or directories")
    r.add_argument("--format", choices=("csv", "markdown"), default="csv")
    r.add_argument("--policy", default="mean", help="mean, worst or severity:N")
    r.add_argument("--out")
    r.add_argument("--curves", help="write per-severity curve data as CSV")
    r.set_defaults(func=cmd_report)

    f = sub.add_parser("fidelity", help="Fréchet distance sweep over severities")
    f.add_argument("--clean", required=True, help="clean embedding file")
    f.add_argument("--corrupted", nargs="+", required=True, metavar="SEV=FILE")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fidelity)
    return p


def main(argv: "Sequence[str] | None" = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    level = logging.ERROR if args.quiet else (logging.DEBUG if args.verbose > 1 else logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr,
                        force=True)
    try:
        return args.func(args)
    except (ConfigError, EOCorruptError, ValueError, OSError) as exc:
        print(f"eocorrupt {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
