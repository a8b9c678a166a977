"""Task metrics, per-corruption aggregation and the relative performance drop.

All task metrics return percentages in ``[0, 100]``.  The robustness summary
for a model is::

    avg  = sum_k w_k * score_k          (uniform w_k by default)
    R_TP = 100 * (clean - avg) / clean

Rounding to two decimals happens only when a report is rendered.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from collections import defaultdict
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from .annotations import HorizontalBox, OrientedBox, OrientedBoxes, HorizontalBoxes, box_from_json
from .core import CorruptionKind
from .errors import (
    ClassOutOfRange,
    ColumnMismatch,
    DegeneratePolygon,
    EmptyCellSet,
    IdMismatch,
    MissingCleanCell,
    NonConvexPolygon,
    PredictionFormatError,
    ShapeMismatch,
    ZeroCleanScore,
)

__all__ = [
    "DISPLAY_NAMES",
    "TABLE_ORDER",
    "VL_TABLE_ORDER",
    "Detection",
    "ScoreCell",
    "RobustnessReport",
    "accuracy",
    "confusion_matrix",
    "miou",
    "polygon_area",
    "polygon_iou",
    "grounding_accuracy",
    "average_precision",
    "mean_ap",
    "mean_score",
    "r_tp",
    "aggregate",
    "aggregate_cells",
    "build_reports",
    "render_report",
    "parse_report_csv",
    "severity_curves_csv",
    "load_predictions",
    "score_task",
]

K = CorruptionKind

# Column order of the result tables (alphabetical by display name).
TABLE_ORDER = (
    K.BRIGHTNESS_CONTRAST, K.CLOUD, K.COMPRESSION, K.DATA_GAPS, K.GAUSSIAN_BLUR,
    K.GAUSSIAN_NOISE, K.HAZE, K.MOTION_BLUR, K.ROTATE, K.SALT_PEPPER, K.SCALE, K.TRANSLATE,
)
VL_TABLE_ORDER = tuple(k for k in TABLE_ORDER if not k.is_geometric())

DISPLAY_NAMES = {
    K.BRIGHTNESS_CONTRAST: "Brightness Contrast",
    K.CLOUD: "Cloud",
    K.COMPRESSION: "Compression Artifacts",
    K.DATA_GAPS: "Data Gaps",
    K.GAUSSIAN_BLUR: "Gauss Blur",
    K.GAUSSIAN_NOISE: "Gauss Noise",
    K.HAZE: "Haze",
    K.MOTION_BLUR: "Motion Blur",
    K.ROTATE: "Rotate",
    K.SALT_PEPPER: "Salt Pepper",
    K.SCALE: "Scale",
    K.TRANSLATE: "Translate",
}
_BY_DISPLAY = {v: k for k, v in DISPLAY_NAMES.items()}

# Absorbs float noise in IoU values that are exactly on the threshold.
_IOU_EPS = 1e-12


# --- classification -------------------------------------------------------------

def _check_ids(preds: Mapping, gts: Mapping) -> None:
    if set(preds) != set(gts):
        missing = sorted(set(gts) - set(preds))[:5]
        extra = sorted(set(preds) - set(gts))[:5]
        raise IdMismatch(f"prediction ids do not match ground truth "
                         f"(missing {missing}, unexpected {extra})")


def accuracy(preds: Mapping[str, Any], gts: Mapping[str, Any]) -> float:
    """Percentage of images whose predicted label equals the ground truth."""
    _check_ids(preds, gts)
    if not gts:
        raise IdMismatch("no samples to score")
    correct = sum(preds[k] == gts[k] for k in gts)
    return 100.0 * correct / len(gts)


# --- segmentation ------------------------------------------------------------------

def confusion_matrix(pred: np.ndarray, gt: np.ndarray, num_classes: int,
                     ignore_index: "int | None" = None) -> np.ndarray:
    """``cm[g, p]`` counts pixels with ground truth ``g`` predicted as ``p``."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"prediction shape {pred.shape} != ground truth {gt.shape}")
    if ignore_index is not None:
        keep = gt != ignore_index
        pred, gt = pred[keep], gt[keep]
    pred = pred.ravel().astype(np.int64)
    gt = gt.ravel().astype(np.int64)
    for name, arr in (("prediction", pred), ("ground truth", gt)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ClassOutOfRange(f"{name} holds class {int(arr.min()) if arr.min() < 0 else int(arr.max())}"
                                  f" outside 0..{num_classes - 1}")
    return np.bincount(gt * num_classes + pred, minlength=num_classes**2).reshape(
        num_classes, num_classes)


def miou(preds, gts, num_classes: int, ignore_index: "int | None" = None) -> float:
    """Mean IoU from a confusion matrix accumulated over all images.

    ``preds`` and ``gts`` are parallel sequences of masks or mappings keyed by
    image id.  Classes absent from both prediction and ground truth (zero
    union) are left out of the mean.
    """
    if isinstance(gts, Mapping):
        _check_ids(preds, gts)
        keys = sorted(gts)
        pairs = [(preds[k], gts[k]) for k in keys]
    else:
        if len(preds) != len(gts):
            raise IdMismatch("prediction and ground-truth lists differ in length")
        pairs = list(zip(preds, gts))
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    for p, g in pairs:
        cm += confusion_matrix(p, g, num_classes, ignore_index)
    tp = np.diag(cm).astype(np.float64)
    union = cm.sum(axis=0) + cm.sum(axis=1) - tp
    valid = union > 0
    if not valid.any():
        return 0.0
    return float(100.0 * np.mean(tp[valid] / union[valid]))


# --- polygons ------------------------------------------------------------------------

def _as_polygon(obj) -> np.ndarray:
    if isinstance(obj, (OrientedBox, HorizontalBox)):
        return np.asarray(obj.corners, dtype=np.float64)
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim == 1:
        if arr.size == 4:
            return HorizontalBox(*arr).corners
        arr = arr.reshape(-1, 2)
    return arr


def polygon_area(poly) -> float:
    """Signed shoelace area; positive for counter-clockwise in x-right/y-up axes."""
    p = _as_polygon(poly)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _convex_ccw(poly) -> np.ndarray:
    p = _as_polygon(poly)
    area = polygon_area(p)
    if abs(area) < 1e-9:
        raise DegeneratePolygon(f"polygon area {abs(area):.3g} is below 1e-9")
    if area < 0:
        p = p[::-1]
    edges = np.roll(p, -1, axis=0) - p
    nxt = np.roll(edges, -1, axis=0)
    cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
    scale = float(np.abs(edges).max()) ** 2
    if np.any(cross < -1e-12 * scale):
        raise NonConvexPolygon("polygon is not convex")
    return p


def _clip(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    # Sutherland-Hodgman; both polygons counter-clockwise.
    out = [tuple(v) for v in subject]
    n = len(clipper)
    for i in range(n):
        if not out:
            break
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        inp, out = out, []
        prev = inp[-1]
        s_prev = ex * (prev[1] - ay) - ey * (prev[0] - ax)
        for cur in inp:
            s_cur = ex * (cur[1] - ay) - ey * (cur[0] - ax)
            if s_cur >= 0:
                if s_prev < 0:
                    t = s_prev / (s_prev - s_cur)
                    out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
                out.append(cur)
            elif s_prev >= 0:
                t = s_prev / (s_prev - s_cur)
                out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            prev, s_prev = cur, s_cur
    return np.array(out, dtype=np.float64).reshape(-1, 2)


def polygon_iou(a, b) -> float:
    """Intersection over union of two convex polygons (boxes, 4x2 or 8-number arrays)."""
    pa, pb = _convex_ccw(a), _convex_ccw(b)
    area_a, area_b = polygon_area(pa), polygon_area(pb)
    inter_poly = _clip(pa, pb)
    inter = abs(polygon_area(inter_poly)) if len(inter_poly) >= 3 else 0.0
    inter = min(inter, area_a, area_b)
    union = area_a + area_b - inter
    return float(min(max(inter / union, 0.0), 1.0))


# --- grounding -----------------------------------------------------------------------

def grounding_accuracy(preds: Mapping[str, Any], gts: Mapping[str, Any],
                       threshold: float = 0.5) -> float:
    """Share of referring records whose predicted box reaches IoU >= ``threshold``.

    Records without a prediction count as failures; predictions for unknown
    record ids raise :class:`IdMismatch`.
    """
    extra = sorted(set(preds) - set(gts))
    if extra:
        raise IdMismatch(f"predictions for unknown records: {extra[:5]}")
    if not gts:
        raise IdMismatch("no referring records to score")
    hits = 0
    for key, gt_box in gts.items():
        pred = preds.get(key)
        if pred is not None and polygon_iou(pred, gt_box) >= threshold - _IOU_EPS:
            hits += 1
    return 100.0 * hits / len(gts)


# --- detection -----------------------------------------------------------------------

@dataclass(frozen=True)
class Detection:
    image_id: str
    box: Any
    category: str
    confidence: float

    def __post_init__(self):
        if not 0.0 <= float(self.confidence) <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


def average_precision(tp: Sequence[bool], num_gt: int) -> float:
    """All-points AP of a ranked list of true/false positives, in ``[0, 1]``.

    Precision is replaced by its running maximum from the right (the
    precision envelope) before integrating over recall.
    """
    if num_gt <= 0:
        raise ValueError("AP needs at least one ground-truth object")
    flags = np.asarray(tp, dtype=bool)
    if flags.size == 0:
        return 0.0
    ctp = np.cumsum(flags)
    recall = ctp / num_gt
    precision = ctp / np.arange(1, flags.size + 1)
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def _gt_boxes(ann) -> tuple:
    if isinstance(ann, (OrientedBoxes, HorizontalBoxes)):
        return ann.boxes
    return tuple(ann)


def mean_ap(detections: Iterable[Detection], gts: Mapping[str, Any], iou_thresh: float = 0.5,
            classes: "Sequence[str] | None" = None) -> float:
    """Single-threshold mAP over classes with at least one ground-truth object.

    Per class, detections are ranked by confidence (ties: image id, then
    input order) and each is matched to the highest-IoU unmatched ground
    truth of its image; a match needs IoU >= ``iou_thresh``.  Difficult
    flags are not treated specially.
    """
    gt_by_class: dict[str, dict[str, list]] = defaultdict(lambda: defaultdict(list))
    for image_id, ann in gts.items():
        for box in _gt_boxes(ann):
            gt_by_class[box.category][image_id].append(box)
    dets = list(detections)
    unknown = sorted({d.image_id for d in dets} - set(gts))
    if unknown:
        raise IdMismatch(f"detections on images without ground truth: {unknown[:5]}")

    wanted = sorted(gt_by_class) if classes is None else [c for c in classes if c in gt_by_class]
    if not wanted:
        return 0.0
    by_class: dict[str, list] = defaultdict(list)
    for idx, d in enumerate(dets):
        by_class[d.category].append((idx, d))

    aps = []
    for cls in wanted:
        per_image = gt_by_class[cls]
        num_gt = sum(len(v) for v in per_image.values())
        matched = {img: np.zeros(len(v), dtype=bool) for img, v in per_image.items()}
        ranked = sorted(by_class.get(cls, ()), key=lambda t: (-float(t[1].confidence),
                                                             t[1].image_id, t[0]))
        flags = []
        for _, det in ranked:
            cands = per_image.get(det.image_id, [])
            best, best_iou = -1, -1.0
            for j, g in enumerate(cands):
                if matched[det.image_id][j]:
                    continue
                iou = polygon_iou(det.box, g)
                if iou > best_iou:
                    best, best_iou = j, iou
            hit = best >= 0 and best_iou >= iou_thresh - _IOU_EPS
            if hit:
                matched[det.image_id][best] = True
            flags.append(hit)
        aps.append(average_precision(flags, num_gt))
    return 100.0 * float(np.mean(aps))


def mean_score(scores: Mapping[str, float]) -> float:
    """Mean of externally judged per-sample scores in ``[0, 1]``, as a percentage."""
    if not scores:
        raise IdMismatch("no samples to score")
    vals = np.array(list(scores.values()), dtype=np.float64)
    if np.any(~np.isfinite(vals)) or vals.min() < 0 or vals.max() > 1:
        raise ValueError("per-sample scores must lie in [0, 1]")
    return 100.0 * float(vals.mean())


# --- robustness summary ----------------------------------------------------------------

def _kind_key(name) -> CorruptionKind:
    if isinstance(name, CorruptionKind):
        return name
    if name in _BY_DISPLAY:
        return _BY_DISPLAY[name]
    return CorruptionKind.parse(name)


@dataclass
class RobustnessReport:
    model: str
    clean: float
    scores: dict            # CorruptionKind -> aggregated score, table order
    weights: dict           # CorruptionKind -> prevalence weight
    corrupted_avg: float
    r_tp: float
    policy: str = "mean"

    @property
    def kinds(self) -> tuple:
        return tuple(self.scores)


def r_tp(clean: float, corrupted, weights: "Mapping | None" = None, model: str = "",
         policy: str = "mean") -> RobustnessReport:
    """Relative task performance drop of ``corrupted`` scores against ``clean``.

    ``corrupted`` is a mapping or a sequence of ``(kind, score)`` pairs.
    ``weights`` default to uniform and must be positive and sum to 1.
    """
    clean = float(clean)
    if not clean > 0:
        raise ZeroCleanScore(f"clean score must be positive, got {clean}")
    items = corrupted.items() if isinstance(corrupted, Mapping) else corrupted
    raw = {_kind_key(k): float(v) for k, v in items}
    if not raw:
        raise EmptyCellSet("no corrupted scores")
    order = [k for k in TABLE_ORDER if k in raw]
    scores = {k: raw[k] for k in order}
    if weights is None:
        w = {k: 1.0 / len(scores) for k in scores}
    else:
        w = {_kind_key(k): float(v) for k, v in weights.items()}
        if set(w) != set(scores):
            raise ColumnMismatch("weights must cover exactly the corrupted columns")
        if any(not v > 0 for v in w.values()) or abs(sum(w.values()) - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")
        w = {k: w[k] for k in scores}
    if weights is None:
        avg = float(np.mean(list(scores.values())))
    else:
        avg = float(sum(w[k] * scores[k] for k in scores))
    drop = 100.0 * (clean - avg) / clean
    return RobustnessReport(model, clean, scores, w, avg, drop, policy)


@dataclass(frozen=True)
class ScoreCell:
    """One metric value: a model on clean data or one corruption/severity."""

    model: str
    corruption: str                 # "clean" or a corruption kind value
    value: float
    severity: "int | None" = None   # None for clean and aggregated cells
    policy: "str | None" = None     # set on aggregated cells
    metric: str = ""

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v) or not 0.0 <= v <= 100.0:
            raise ValueError(f"score {self.value!r} must be finite and within [0, 100]")
        object.__setattr__(self, "value", v)
        if self.corruption != "clean":
            object.__setattr__(self, "corruption", _kind_key(self.corruption).value)

    @property
    def is_clean(self) -> bool:
        return self.corruption == "clean"

    def to_json(self) -> dict:
        return {"model": self.model, "corruption": self.corruption, "severity": self.severity,
                "value": self.value, "policy": self.policy, "metric": self.metric}

    @classmethod
    def from_json(cls, obj: Mapping) -> "ScoreCell":
        sev = obj.get("severity")
        return cls(str(obj["model"]), str(obj["corruption"]), float(obj["value"]),
                   None if sev is None else int(sev), obj.get("policy"), obj.get("metric", ""))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _parse_policy(policy) -> "str | int":
    if isinstance(policy, (int, np.integer)) and not isinstance(policy, bool):
        return int(policy)
    text = str(policy)
    if text in ("mean", "worst"):
        return text
    if text.startswith("severity:") and text[9:].isdigit():
        return int(text[9:])
    if text.isdigit():
        return int(text)
    raise ValueError(f"unknown aggregation policy {policy!r}; use mean, worst or severity:N")


def aggregate(cells, policy="mean") -> float:
    """Reduce per-severity scores of one corruption to a single value.

    ``cells`` may be ScoreCells, a ``{severity: score}`` mapping or plain
    scores (severities then count from 1).  ``policy`` is ``"mean"``,
    ``"worst"`` or a severity (``3`` / ``"severity:3"``).
    """
    if isinstance(cells, Mapping):
        pairs = [(int(k), float(v)) for k, v in cells.items()]
    else:
        cells = list(cells)
        if cells and isinstance(cells[0], ScoreCell):
            pairs = [(c.severity, c.value) for c in cells]
        else:
            pairs = [(i + 1, float(v)) for i, v in enumerate(cells)]
    if not pairs:
        raise EmptyCellSet("no severity cells to aggregate")
    rule = _parse_policy(policy)
    values = [v for _, v in pairs]
    if rule == "mean":
        return float(np.mean(values))
    if rule == "worst":
        return float(min(values))
    chosen = [v for s, v in pairs if s == rule]
    if not chosen:
        raise EmptyCellSet(f"no cell at severity {rule}")
    return float(np.mean(chosen))


def aggregate_cells(cells: Iterable[ScoreCell], policy="mean") -> list[ScoreCell]:
    """One aggregated cell per (model, corruption); clean cells pass through."""
    groups: dict[tuple, list] = defaultdict(list)
    out = []
    for c in cells:
        if c.is_clean or c.severity is None:
            out.append(c)
        else:
            groups[(c.model, c.corruption)].append(c)
    tag = policy if isinstance(policy, str) else f"severity:{policy}"
    for (model, corruption), group in sorted(groups.items()):
        out.append(ScoreCell(model, corruption, aggregate(group, policy), None, tag,
                             group[0].metric))
    return out


def build_reports(cells: Iterable[ScoreCell], policy="mean",
                  weights: "Mapping | None" = None) -> list[RobustnessReport]:
    """Group cells by model and compute one report each (model order preserved)."""
    merged = aggregate_cells(cells, policy)
    models: dict[str, dict] = {}
    for c in merged:
        slot = models.setdefault(c.model, {"clean": None, "scores": {}})
        if c.is_clean:
            slot["clean"] = c.value
        else:
            slot["scores"][c.corruption] = c.value
    tag = policy if isinstance(policy, str) else f"severity:{policy}"
    reports = []
    for model, slot in models.items():
        if slot["clean"] is None:
            raise MissingCleanCell(f"model {model!r} has no clean score cell")
        reports.append(r_tp(slot["clean"], slot["scores"], weights, model, tag))
    return reports


# --- rendering --------------------------------------------------------------------------

def _columns(reports: Sequence[RobustnessReport]) -> tuple:
    if not reports:
        raise ColumnMismatch("no reports to render")
    kinds = set(reports[0].scores)
    for r in reports[1:]:
        if set(r.scores) != kinds:
            raise ColumnMismatch(f"model {r.model!r} has a different corruption column set")
    return tuple(k for k in TABLE_ORDER if k in kinds)


def _fmt2(value: float) -> str:
    # Half-up on the shortest decimal repr, so 55.255 prints as 55.26 as it would by hand.
    return str(Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def render_report(reports: Sequence[RobustnessReport], format: str = "csv") -> str:
    """Table with columns Method, Clean, one per corruption, Avg, R_TP."""
    kinds = _columns(reports)
    header = ["Method", "Clean", *(DISPLAY_NAMES[k] for k in kinds), "Avg", "R_TP"]
    rows = [[r.model, *(_fmt2(v) for v in (r.clean, *(r.scores[k] for k in kinds),
                                             r.corrupted_avg, r.r_tp))]
            for r in reports]
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    if format in ("markdown", "md"):
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join(["---"] + ["---:"] * (len(header) - 1)) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}; use csv or markdown")


def parse_report_csv(text: str) -> list[RobustnessReport]:
    """Read a CSV written by :func:`render_report` back into reports."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header or header[:2] != ["Method", "Clean"] or header[-2:] != ["Avg", "R_TP"]:
        raise ColumnMismatch("not a robustness report table")
    try:
        kinds = [_BY_DISPLAY[name] for name in header[2:-2]]
    except KeyError as exc:
        raise ColumnMismatch(f"unknown corruption column {exc.args[0]!r}") from None
    out = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise ColumnMismatch(f"row for {row[0]!r} has {len(row)} fields, expected {len(header)}")
        vals = [float(v) for v in row[1:]]
        scores = dict(zip(kinds, vals[1:-2]))
        out.append(RobustnessReport(row[0], vals[0], scores,
                                    {k: 1.0 / len(kinds) for k in kinds}, vals[-2], vals[-1]))
    return out


def severity_curves_csv(cells: Iterable[ScoreCell]) -> str:
    """Per-severity scores as plottable rows ``model,corruption,severity,value``."""
    rows = sorted((c.model, c.corruption, c.severity, c.value) for c in cells
                  if not c.is_clean and c.severity is not None)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "corruption", "severity", "value"])
    for model, corruption, sev, value in rows:
        writer.writerow([model, corruption, sev, f"{value:.4f}"])
    return buf.getvalue()


# --- prediction files -------------------------------------------------------------------

def _load_mask(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("L", "P", "I", "I;16"):
            raise PredictionFormatError(f"{path}: masks must be single-channel class indices")
        return np.asarray(im).astype(np.int64)


def load_predictions(path: "str | os.PathLike", task: str) -> dict[str, Any]:
    """Read a JSON-lines prediction file into ``{id: payload}``.

    Record shapes by task::

        classification  {"id", "label"}
        segmentation    {"id", "mask": "<png path, relative to the file>"}
        detection       {"id", "detections": [{"box", "category", "confidence"}]}
        grounding       {"id": <record id>, "box"}
        captioning/vqa  {"id", "score": <0..1>}

    Detection payloads are lists of :class:`Detection`.  The first malformed
    record raises :class:`PredictionFormatError` with its line number.
    """
    path = Path(path)
    out: dict[str, Any] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
                key = str(rec["id"])
                if task == "classification":
                    payload = rec["label"]
                elif task == "segmentation":
                    payload = _load_mask(path.parent / rec["mask"])
                elif task == "detection":
                    payload = [Detection(key, box_from_json(d["box"]), str(d["category"]),
                                         float(d["confidence"])) for d in rec["detections"]]
                elif task == "grounding":
                    payload = box_from_json(rec["box"]) if rec.get("box") is not None else None
                elif task in ("captioning", "vqa"):
                    payload = float(rec["score"])
                    if not 0.0 <= payload <= 1.0:
                        raise ValueError(f"score {payload} outside [0, 1]")
                else:
                    raise PredictionFormatError(f"unknown task {task!r}")
            except PredictionFormatError:
                raise
            except json.JSONDecodeError as exc:
                raise PredictionFormatError(f"{where}: invalid JSON ({exc.msg})") from exc
            except KeyError as exc:
                raise PredictionFormatError(f"{where}: missing field {exc.args[0]!r}") from exc
            except (TypeError, ValueError, OSError) as exc:
                raise PredictionFormatError(f"{where}: {exc}") from exc
            if key in out:
                raise PredictionFormatError(f"{where}: duplicate id {key!r}")
            out[key] = payload
    return out


def score_task(task: str, preds: Mapping[str, Any], gts: "Mapping[str, Any] | None" = None,
               num_classes: "int | None" = None) -> float:
    """Dispatch to the metric of ``task``; payloads as from :func:`load_predictions`."""
    if task in ("captioning", "vqa"):
        return mean_score(preds)
    if gts is None:
        raise ValueError(f"task {task!r} needs ground truth")
    if task == "classification":
        return accuracy(preds, gts)
    if task == "segmentation":
        if num_classes is None:
            num_classes = int(max(max(int(np.max(m)) for m in gts.values()),
                                  max(int(np.max(m)) for m in preds.values()))) + 1
        return miou(preds, gts, num_classes)
    if task == "detection":
        unknown = sorted(set(preds) - set(gts))
        if unknown:
            raise IdMismatch(f"predictions for unknown images: {unknown[:5]}")
        dets = [d for key in sorted(preds) for d in preds[key]]
        return mean_ap(dets, gts)
    if task == "grounding":
        return grounding_accuracy({k: v for k, v in preds.items() if v is not None}, gts)
    raise ValueError(f"unknown task {task!r}")
