"""Dataset ingestion, corruption chains and benchmark-tree generation.

Output layout for a generation run rooted at ``out``::

    out/
      clean/<image>.png
      <corruption>/<severity>/<image>.png
      annotations/clean/<image>.<ext>
      annotations/<geometric corruption>/<severity>/<image>.<ext>
      provenance.json

Non-geometric corruptions do not move objects, so their images reuse the
clean annotations; only chains containing a rotate/scale/translate step get
their own annotation folders.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import geometric, photometric, spatial
from .annotations import (
    AnnotationSet,
    ClassLabel,
    ReferringRecord,
    ReferringRecords,
    annotation_suffix,
    box_from_json,
    dump_annotation,
    load_annotation_bytes,
)
from .core import (
    CorruptionKind,
    CorruptionSpec,
    ImageRaster,
    derive_stream,
    encode_png,
    load_image,
)
from .errors import AnnotationParseError, ChainError, LayoutError

log = logging.getLogger(__name__)

__all__ = [
    "CorruptionChain",
    "ImageEntry",
    "DatasetManifest",
    "GenerationPlan",
    "GenerationReport",
    "Failure",
    "TASKS",
    "LAYOUTS",
    "apply_corruption",
    "apply_chain",
    "parse_chain",
    "grid_chains",
    "ingest",
    "detect_layout",
    "load_entry_annotation",
    "generate",
    "resolve_workers",
    "annotation_path",
]

TASKS = ("classification", "segmentation", "detection", "captioning", "vqa", "grounding")
LAYOUTS = ("class_folders", "image_mask", "dota", "json_records")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp")


# --- chains ------------------------------------------------------------------

@dataclass(frozen=True)
class CorruptionChain:
    """Ordered corruption specs applied one after another to the same image."""

    specs: tuple

    def __post_init__(self):
        specs = tuple(self.specs)
        if not specs:
            raise ChainError("a corruption chain needs at least one spec")
        if sum(s.kind.is_geometric() for s in specs) > 1:
            raise ChainError("a chain may contain at most one geometric corruption")
        object.__setattr__(self, "specs", specs)

    @classmethod
    def single(cls, kind, severity: int, seed: int = 0) -> "CorruptionChain":
        return cls((CorruptionSpec(CorruptionKind.parse(kind), severity, seed),))

    @property
    def name(self) -> str:
        return "+".join(s.kind.value for s in self.specs)

    @property
    def severity_label(self) -> str:
        levels = [s.severity for s in self.specs]
        if len(set(levels)) == 1:
            return str(levels[0])
        return "-".join(str(v) for v in levels)

    @property
    def geometric(self) -> bool:
        return any(s.kind.is_geometric() for s in self.specs)

    def with_seed(self, seed: int) -> "CorruptionChain":
        return CorruptionChain(tuple(
            CorruptionSpec(s.kind, s.severity, seed, s.overrides) for s in self.specs))

    def to_json(self) -> list:
        return [{"kind": s.kind.value, "severity": s.severity,
                 "overrides": _jsonable(dict(s.overrides))} for s in self.specs]


def parse_chain(text: str, seed: int = 0) -> CorruptionChain:
    """Parse ``"brightness:3,cloud:3,compression:3"`` into a chain."""
    items = [t for t in (p.strip() for p in text.split(",")) if t]
    return CorruptionChain(tuple(CorruptionSpec.parse(t, seed) for t in items))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def apply_corruption(img: ImageRaster, ann: "AnnotationSet | None", spec: CorruptionSpec,
                     rng: np.random.Generator):
    """Apply one spec.  Returns ``(image, annotation, params)``.

    ``params`` holds the resolved table values plus every quantity drawn from
    ``rng`` (motion angle, cloud seed, gap offsets, translation), so feeding
    it back as ``overrides`` reproduces the output exactly.
    """
    p = spec.resolve()
    K = CorruptionKind
    kind = spec.kind
    if kind is K.GAUSSIAN_NOISE:
        img = photometric.gaussian_noise(img, p["sigma"], rng)
    elif kind is K.SALT_PEPPER:
        img = photometric.salt_pepper(img, p["amount"], rng)
    elif kind is K.GAUSSIAN_BLUR:
        img = spatial.gaussian_blur(img, int(p["kernel_size"]))
    elif kind is K.MOTION_BLUR:
        if "angle" not in p:
            p["angle"] = float(rng.uniform(0.0, 180.0))
        img = spatial.motion_blur(img, int(p["kernel_size"]), p["angle"])
    elif kind is K.BRIGHTNESS_CONTRAST:
        img = photometric.brightness_contrast(img, p["brightness"], p["contrast"])
    elif kind is K.CLOUD:
        if "cloud_seed" not in p:
            p["cloud_seed"] = int(rng.integers(0, 2**63))
        img = spatial.cloud(img, p["threshold"], p["cloud_seed"], octaves=p.get("octaves", 4),
                            period=p.get("period"), persistence=p.get("persistence", 0.5))
    elif kind is K.HAZE:
        img = photometric.haze(img, p["intensity"])
    elif kind is K.DATA_GAPS:
        if "offsets" not in p:
            p["offsets"] = spatial.sample_gap_offsets(img.width, p["num_gaps"], p["gap_width"], rng)
        img = spatial.data_gaps(img, p["num_gaps"], p["gap_width"], offsets=p["offsets"])
    elif kind is K.COMPRESSION:
        img = photometric.jpeg_artifacts(img, int(p["quality"]))
    elif kind is K.ROTATE:
        img, ann = geometric.rotate(img, ann, p["angle"])
    elif kind is K.SCALE:
        img, ann = geometric.scale(img, ann, p["ratio"])
    elif kind is K.TRANSLATE:
        if "offset" not in p:
            p["offset"] = list(geometric.sample_translation(int(p["max_shift"]), rng))
        img, ann = geometric.translate(img, ann, offset=tuple(p["offset"]))
    else:  # pragma: no cover - enum is closed
        raise ChainError(f"no generator for {kind}")
    return img, ann, _jsonable(p)


def apply_chain(img: ImageRaster, ann: "AnnotationSet | None", chain: CorruptionChain,
                image_id: str, seed: "int | None" = None, log: "list | None" = None):
    """Apply ``chain`` in order; returns ``(image, annotation)``.

    Each step draws from the stream keyed by (seed, image id, kind, severity);
    ``seed`` defaults to each spec's own seed.  Annotations only change at the
    geometric step.  If ``log`` is a list, one params dict per step is appended.
    """
    for spec in chain.specs:
        rng = derive_stream(spec.seed if seed is None else seed, image_id, spec.kind,
                            spec.severity)
        img, ann, params = apply_corruption(img, ann, spec, rng)
        if log is not None:
            log.append({"kind": spec.kind.value, "severity": spec.severity, "params": params})
    return img, ann


# --- manifests and ingestion ---------------------------------------------------

@dataclass(frozen=True)
class ImageEntry:
    id: str
    path: str
    annotation: "str | None" = None


@dataclass
class DatasetManifest:
    """Declarative description of a source dataset and its corruption grid.

    ``root`` is where relative image paths resolve; it is not serialized
    (a manifest loaded from disk resolves against its own directory unless
    the document names a ``root``).
    """

    dataset: str
    task: str
    images: tuple
    annotation_format: str = "none"
    seed: int = 0
    kinds: tuple = tuple(k.value for k in CorruptionKind)
    severities: tuple = (1, 5)
    root: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        self.images = tuple(self.images)
        ids = [e.id for e in self.images]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise LayoutError(f"duplicate image ids: {', '.join(dupes)}")
        self.kinds = tuple(CorruptionKind.parse(k).value for k in self.kinds)
        lo, hi = (int(v) for v in self.severities)
        if not 1 <= lo <= hi:
            raise ValueError("severity range must satisfy 1 <= lo <= hi")
        self.severities = (lo, hi)
        self.root = Path(self.root)

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "task": self.task,
            "seed": int(self.seed),
            "annotation_format": self.annotation_format,
            "images": [{"id": e.id, "path": e.path, "annotation": e.annotation}
                       for e in self.images],
            "corruption_grid": {"kinds": list(self.kinds), "severities": list(self.severities)},
        }

    @classmethod
    def from_json(cls, obj: dict, root: "str | os.PathLike" = ".") -> "DatasetManifest":
        grid = obj.get("corruption_grid", {})
        return cls(
            dataset=obj["dataset"],
            task=obj["task"],
            seed=int(obj.get("seed", 0)),
            annotation_format=obj.get("annotation_format", "none"),
            images=tuple(ImageEntry(str(e["id"]), e["path"], e.get("annotation"))
                         for e in obj["images"]),
            kinds=tuple(grid.get("kinds", [k.value for k in CorruptionKind])),
            severities=tuple(grid.get("severities", (1, 5))),
            root=Path(obj.get("root", root)),
        )

    def save(self, path: "str | os.PathLike") -> None:
        """Write the manifest; ``root`` is stored relative to the file's folder."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        root = os.path.relpath(self.root.resolve(), path.parent.resolve())
        doc = dict(self.to_json(), root=Path(root).as_posix())
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: "str | os.PathLike") -> "DatasetManifest":
        path = Path(path)
        obj = json.loads(path.read_text())
        root = obj.get("root", path.parent)
        root = Path(root) if Path(root).is_absolute() else path.parent / root
        obj = dict(obj, root=str(root))
        return cls.from_json(obj)

    def entry(self, image_id: str) -> ImageEntry:
        for e in self.images:
            if e.id == image_id:
                return e
        raise KeyError(image_id)


def _images_in(folder: Path) -> list[Path]:
    return sorted(p for p in folder.iterdir()
                  if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def detect_layout(root: "str | os.PathLike") -> str:
    root = Path(root)
    if (root / "images").is_dir():
        if (root / "masks").is_dir():
            return "image_mask"
        if (root / "labelTxt").is_dir():
            return "dota"
        if (root / "annotations.json").is_file():
            return "json_records"
    subdirs = [p for p in root.iterdir() if p.is_dir()] if root.is_dir() else []
    if subdirs and all(_images_in(d) for d in subdirs):
        return "class_folders"
    raise LayoutError(f"{root}: directory does not match any supported layout {LAYOUTS}")


_DEFAULT_TASK = {"class_folders": "classification", "image_mask": "segmentation",
                 "dota": "detection", "json_records": "grounding"}


def ingest(root: "str | os.PathLike", layout: "str | None" = None, *,
           dataset: "str | None" = None, task: "str | None" = None, seed: int = 0,
           kinds: "Sequence[str] | None" = None,
           severities: tuple = (1, 5)) -> DatasetManifest:
    """Scan a dataset directory and build its manifest.

    Supported layouts:

    ``class_folders``
        ``root/<class>/<image>``; one class label per image.
    ``image_mask``
        ``root/images/<id>.*`` with ``root/masks/<id>.png`` class-index masks.
    ``dota``
        ``root/images/<id>.*`` with ``root/labelTxt/<id>.txt`` oriented boxes.
    ``json_records``
        ``root/images/<id>.*`` with ``root/annotations.json``, a list of
        ``{"image_id", "expression", "box"}`` referring records.

    Annotation files are parsed eagerly so that malformed input fails here,
    with file and line, rather than halfway through a generation run.
    """
    root = Path(root)
    if not root.is_dir():
        raise LayoutError(f"{root}: not a directory")
    layout = layout or detect_layout(root)
    if layout not in LAYOUTS:
        raise LayoutError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    entries: list[ImageEntry] = []

    if layout == "class_folders":
        classes = sorted(p.name for p in root.iterdir() if p.is_dir())
        if not classes:
            raise LayoutError(f"{root}: no class folders found")
        for idx, name in enumerate(classes):
            for img in _images_in(root / name):
                entries.append(ImageEntry(img.stem, f"{name}/{img.name}", f"label:{idx}:{name}"))
    else:
        img_dir = root / "images"
        if not img_dir.is_dir():
            raise LayoutError(f"{root}: missing images/ folder for layout {layout!r}")
        images = _images_in(img_dir)
        if layout == "json_records":
            grouped = _read_records(root / "annotations.json")
        for img in images:
            rel = f"images/{img.name}"
            if layout == "image_mask":
                ann = root / "masks" / f"{img.stem}.png"
                if not ann.is_file():
                    raise AnnotationParseError(f"image {img.stem!r}: missing mask {ann}")
                entries.append(ImageEntry(img.stem, rel, f"masks/{ann.name}"))
            elif layout == "dota":
                ann = root / "labelTxt" / f"{img.stem}.txt"
                if not ann.is_file():
                    raise AnnotationParseError(f"image {img.stem!r}: missing label file {ann}")
                load_annotation_bytes(ann.read_bytes(), ".txt", str(ann))
                entries.append(ImageEntry(img.stem, rel, f"labelTxt/{ann.name}"))
            else:
                if img.stem not in grouped:
                    raise AnnotationParseError(
                        f"image {img.stem!r}: no records in {root / 'annotations.json'}")
                entries.append(ImageEntry(img.stem, rel, f"annotations.json#{img.stem}"))

    if not entries:
        raise LayoutError(f"{root}: no images found")
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise LayoutError(f"{root}: image ids (file stems) are not unique")
    return DatasetManifest(
        dataset=dataset or root.name,
        task=task or _DEFAULT_TASK[layout],
        images=tuple(entries),
        annotation_format=layout,
        seed=seed,
        kinds=tuple(kinds) if kinds else tuple(k.value for k in CorruptionKind),
        severities=tuple(severities),
        root=root,
    )


def _read_records(path: Path) -> dict[str, list]:
    if not path.is_file():
        raise LayoutError(f"{path}: missing")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if isinstance(doc, dict):
        doc = doc.get("records", doc.get("annotations", []))
    grouped: dict[str, list] = {}
    for i, rec in enumerate(doc):
        try:
            image_id = str(rec["image_id"])
            text = rec.get("expression", rec.get("question", ""))
            grouped.setdefault(image_id, []).append(
                ReferringRecord(text, box_from_json(rec["box"]), str(rec.get("id", i))))
        except (KeyError, TypeError, ValueError) as exc:
            raise AnnotationParseError(f"{path}: record {i}: {exc}") from exc
    return grouped


def load_entry_annotation(manifest: DatasetManifest, entry: ImageEntry) -> "AnnotationSet | None":
    ref = entry.annotation
    if not ref:
        return None
    if ref.startswith("label:"):
        _, idx, name = ref.split(":", 2)
        return ClassLabel(int(idx), name)
    rel, _, fragment = ref.partition("#")
    path = manifest.root / rel
    if not path.is_file():
        raise AnnotationParseError(f"image {entry.id!r}: annotation file {path} not found")
    if fragment:
        records = _read_records(path).get(fragment)
        if records is None:
            raise AnnotationParseError(f"image {entry.id!r}: no records in {path}")
        return ReferringRecords(tuple(records))
    return load_annotation_bytes(path.read_bytes(), path.suffix.lower(), str(path))


# --- generation ----------------------------------------------------------------

def grid_chains(manifest: DatasetManifest) -> tuple:
    """Singleton chains for every (kind, severity) in the manifest grid."""
    lo, hi = manifest.severities
    chains = []
    for name in manifest.kinds:
        kind = CorruptionKind.parse(name)
        for sev in range(lo, min(hi, kind.max_severity) + 1):
            chains.append(CorruptionChain.single(kind, sev, manifest.seed))
    return tuple(chains)


@dataclass
class GenerationPlan:
    manifest: DatasetManifest
    output_root: Path
    chains: tuple = ()
    aggregation: str = "mean"
    include_clean: bool = True

    def __post_init__(self):
        self.output_root = Path(self.output_root)
        self.chains = tuple(self.chains) or grid_chains(self.manifest)
        dirs = [(c.name, c.severity_label) for c in self.chains]
        if len(set(dirs)) != len(dirs):
            raise ChainError("two chains would write to the same output folder")

    def fingerprint(self) -> dict:
        return {"manifest": self.manifest.to_json(),
                "chains": [c.to_json() for c in self.chains],
                "aggregation": self.aggregation,
                "include_clean": self.include_clean}

    @property
    def plan_hash(self) -> str:
        blob = json.dumps(self.fingerprint(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class Failure:
    image_id: str
    output: "str | None"
    cause: str


@dataclass
class GenerationReport:
    plan_hash: str
    written: int = 0
    failures: list = field(default_factory=list)
    provenance_path: "Path | None" = None

    @property
    def failed(self) -> int:
        return len(self.failures)

    @property
    def ok(self) -> bool:
        return not self.failures


def annotation_path(root: "str | os.PathLike", chain: "CorruptionChain | None",
                    image_id: str, suffix: str) -> Path:
    """Where the ground truth for ``image_id`` under ``chain`` lives.

    Non-geometric chains (and ``None`` for clean) share the clean annotation.
    """
    root = Path(root) / "annotations"
    if chain is None or not chain.geometric:
        return root / "clean" / f"{image_id}{suffix}"
    return root / chain.name / chain.severity_label / f"{image_id}{suffix}"


def _write(path: Path, blob: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(blob)


def _process_image(job) -> dict:
    manifest, entry, chains, out_root, include_clean = job
    result = {"written": 0, "entries": [], "failures": []}
    try:
        img = load_image(manifest.root / entry.path)
        ann = load_entry_annotation(manifest, entry)
    except Exception as exc:  # noqa: BLE001 - failures are recorded, never fatal
        result["failures"].append(Failure(entry.id, None, f"{type(exc).__name__}: {exc}"))
        return result

    try:
        if include_clean:
            _write(out_root / "clean" / f"{entry.id}.png", encode_png(img))
        if ann is not None:
            _write(annotation_path(out_root, None, entry.id, annotation_suffix(ann)),
                   dump_annotation(ann))
    except Exception as exc:  # noqa: BLE001
        result["failures"].append(Failure(entry.id, "clean", f"{type(exc).__name__}: {exc}"))

    for chain in chains:
        rel = f"{chain.name}/{chain.severity_label}/{entry.id}.png"
        steps: list = []
        try:
            out_img, out_ann = apply_chain(img, ann, chain, entry.id, manifest.seed, log=steps)
            _write(out_root / rel, encode_png(out_img))
            if chain.geometric and out_ann is not None:
                _write(annotation_path(out_root, chain, entry.id, annotation_suffix(out_ann)),
                       dump_annotation(out_ann))
        except Exception as exc:  # noqa: BLE001
            result["failures"].append(Failure(entry.id, rel, f"{type(exc).__name__}: {exc}"))
            continue
        record = {"image_id": entry.id, "kind": chain.name, "output": rel}
        if len(steps) == 1:
            record["severity"] = steps[0]["severity"]
            record["params"] = steps[0]["params"]
        else:
            record["severity"] = chain.severity_label
            record["steps"] = steps
        result["entries"].append(record)
        result["written"] += 1
    return result


def resolve_workers(workers: "int | None" = None) -> int:
    """Explicit value, else ``REOBENCH_WORKERS``, else 1."""
    if workers is None:
        env = os.environ.get("REOBENCH_WORKERS")
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return int(workers)


def generate(plan: GenerationPlan, workers: "int | None" = None) -> GenerationReport:
    """Materialize every chain of ``plan`` for every manifest image.

    Output bytes do not depend on ``workers``: every random draw comes from a
    stream keyed by the image id, and partial results are merged in manifest
    order.  Per-image failures are collected, never raised.
    """
    workers = resolve_workers(workers)
    out_root = plan.output_root
    out_root.mkdir(parents=True, exist_ok=True)
    manifest = plan.manifest
    jobs = [(manifest, e, plan.chains, out_root, plan.include_clean) for e in manifest.images]

    if workers == 1 or len(jobs) <= 1:
        results: Iterable[dict] = map(_process_image, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_process_image, jobs, chunksize=1)

    report = GenerationReport(plan.plan_hash)
    entries: list = []
    try:
        for entry, res in zip(manifest.images, results):
            report.written += res["written"]
            report.failures.extend(res["failures"])
            entries.extend(res["entries"])
            for f in res["failures"]:
                log.warning("%s (%s): %s", f.image_id, f.output or "input", f.cause)
            log.info("processed %s: %d outputs", entry.id, res["written"])
    finally:
        if workers > 1 and len(jobs) > 1:
            pool.shutdown()

    provenance = {
        "plan_hash": report.plan_hash,
        "seed": int(manifest.seed),
        "dataset": manifest.dataset,
        "aggregation": plan.aggregation,
        "chains": [{"name": c.name, "severity": c.severity_label, "specs": c.to_json()}
                   for c in plan.chains],
        "entries": entries,
        "failures": [{"image_id": f.image_id, "output": f.output, "cause": f.cause}
                     for f in report.failures],
    }
    report.provenance_path = out_root / "provenance.json"
    report.provenance_path.write_text(json.dumps(provenance, indent=1, sort_keys=True) + "\n")
    return report
