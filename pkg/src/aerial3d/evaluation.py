"""Annotation loading, metric primitives, and file-level evaluation reports.

Annotation files are JSON documents of the shape

    {
      "image": "scene.png", "image_width": 1000, "image_height": 1000,
      "camera": {"focal_length_m": 0.01, "pixel_size_m": 1e-05,
                 "pitch_deg": 90.0, "agl_m": 50.0},
      "objects": [
        {"id": "veh0",
         "obb": {"cx": 500.0, "cy": 400.0, "w": 93.8, "h": 37.0,
                 "angle_deg": 0.0},
         "dims_mm": {"length": 4694, "width": 1850, "height": 1443},
         "attributes": {"brand": "Tesla", "model": "Model 3", ...}}
      ]
    }

Prediction files are JSONL, one object per line, keyed by `id`:
`{"id": ..., "answer": <text>}` for free-text tasks, or `{"id": ...,
"hbb"|"box3d": <serialized location>}` for grounding/retrieval. Evaluation
ids pair a prediction with one question about one object:

    grounding / retrieval    <object_id>
    spatial QA               <object_id>:<task>      (task: depth, distance,
                                                      length, width, height)
    attributes               <object_id>:<attribute>

Scoring policy: a missing or unparseable prediction is a parse failure and
counts as incorrect; it is never silently excluded from accuracy
denominators. MAE/RMSE/R-squared are computed over the parseable pairs only
(there is no number to difference otherwise), with the failure count
reported alongside.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple, Sequence

import jsonschema
import numpy as np

from .boxes import (
    Box3D,
    BoxDims,
    HorizontalBox2D,
    Location,
    OrientedBox2D,
    bev_iou,
    derive_box3d,
    dims_from_mm,
    extract_location,
    hbb_iou,
    obb_to_hbb,
)
from .camera import CameraModel, PixelPoint, backproject_to_ground, spatial_measures
from .errors import (
    DegenerateVariance,
    IdMismatch,
    LengthMismatch,
    ParseError,
    SchemaError,
)

SQA_TASKS = ("depth", "distance", "length", "width", "height")
NUMERIC_ATTRIBUTES = frozenset({"price", "doors", "seats"})

# --------------------------------------------------------------------------
# Annotation schema and loading
# --------------------------------------------------------------------------

ANNOTATION_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["image", "image_width", "image_height", "camera", "objects"],
    "properties": {
        "image": {"type": "string"},
        "image_width": {"type": "integer", "minimum": 1},
        "image_height": {"type": "integer", "minimum": 1},
        "camera": {
            "type": "object",
            "required": ["focal_length_m", "pixel_size_m", "pitch_deg", "agl_m"],
            "properties": {
                "focal_length_m": {"type": "number", "exclusiveMinimum": 0},
                "pixel_size_m": {"type": "number", "exclusiveMinimum": 0},
                "pitch_deg": {"type": "number", "exclusiveMinimum": 0, "maximum": 90},
                "agl_m": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "objects": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "obb", "dims_mm"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "obb": {
                        "type": "object",
                        "required": ["cx", "cy", "w", "h", "angle_deg"],
                        "properties": {
                            "cx": {"type": "number"},
                            "cy": {"type": "number"},
                            "w": {"type": "number", "exclusiveMinimum": 0},
                            "h": {"type": "number", "exclusiveMinimum": 0},
                            "angle_deg": {"type": "number"},
                        },
                    },
                    "dims_mm": {
                        "type": "object",
                        "required": ["length", "width", "height"],
                        "properties": {
                            "length": {"type": "number", "exclusiveMinimum": 0},
                            "width": {"type": "number", "exclusiveMinimum": 0},
                            "height": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                    "attributes": {"type": "object"},
                },
            },
        },
    },
}

# Annotated boxes may spill past the frame by at most this fraction of the
# image size (e.g. a vehicle half out of shot).
_BOUNDS_MARGIN = 0.10


def _pointer(err: jsonschema.ValidationError) -> str:
    path = list(err.absolute_path)
    if err.validator == "required":
        # Point at the missing property itself, not its parent object.
        path.append(err.message.split("'")[1])
    return "/" + "/".join(str(p) for p in path)


def validate_annotation(data: dict) -> None:
    """Validate a raw annotation dict; SchemaError carries a JSON pointer."""
    validator = jsonschema.Draft202012Validator(ANNOTATION_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise SchemaError(_pointer(err), err.message)

    width, height = data["image_width"], data["image_height"]
    mx, my = _BOUNDS_MARGIN * width, _BOUNDS_MARGIN * height
    seen_ids: set[str] = set()
    for i, obj in enumerate(data["objects"]):
        if obj["id"] in seen_ids:
            raise SchemaError(f"/objects/{i}/id", f"duplicate object id {obj['id']!r}")
        seen_ids.add(obj["id"])
        raw = obj["obb"]
        obb = OrientedBox2D.normalized(
            raw["cx"], raw["cy"], raw["w"], raw["h"], math.radians(raw["angle_deg"])
        )
        hull = obb_to_hbb(obb)
        if (
            hull.x1 < -mx
            or hull.y1 < -my
            or hull.x2 > width + mx
            or hull.y2 > height + my
        ):
            raise SchemaError(
                f"/objects/{i}/obb",
                f"box extends past the image bounds by more than {_BOUNDS_MARGIN:.0%}",
            )


@dataclass(frozen=True)
class AnnotatedObject:
    id: str
    obb: OrientedBox2D
    dims_mm: tuple[float, float, float]
    attributes: dict[str, Any] = field(default_factory=dict)

    @property
    def dims_m(self) -> BoxDims:
        return dims_from_mm(*self.dims_mm)


@dataclass(frozen=True)
class AnnotationFile:
    image: str
    image_width: int
    image_height: int
    camera: CameraModel
    objects: tuple[AnnotatedObject, ...]


def annotation_from_dict(data: dict) -> AnnotationFile:
    """Validate and convert a raw dict (degrees/mm) to typed form (radians/m)."""
    validate_annotation(data)
    cam_raw = data["camera"]
    camera = CameraModel(
        focal_length=cam_raw["focal_length_m"],
        pixel_size=cam_raw["pixel_size_m"],
        image_width=data["image_width"],
        image_height=data["image_height"],
        pitch=math.radians(cam_raw["pitch_deg"]),
        agl=cam_raw["agl_m"],
    )
    objects = []
    for obj in data["objects"]:
        raw = obj["obb"]
        objects.append(
            AnnotatedObject(
                id=obj["id"],
                obb=OrientedBox2D.normalized(
                    raw["cx"], raw["cy"], raw["w"], raw["h"],
                    math.radians(raw["angle_deg"]),
                ),
                dims_mm=(
                    obj["dims_mm"]["length"],
                    obj["dims_mm"]["width"],
                    obj["dims_mm"]["height"],
                ),
                attributes=dict(obj.get("attributes", {})),
            )
        )
    return AnnotationFile(
        image=data["image"],
        image_width=data["image_width"],
        image_height=data["image_height"],
        camera=camera,
        objects=tuple(objects),
    )


def load_annotations(path: str | Path) -> AnnotationFile:
    """Load and validate an annotation JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("/", "annotation root must be a JSON object")
    return annotation_from_dict(data)


def load_predictions(path: str | Path) -> dict[str, dict]:
    """Load a JSONL prediction file into an id-keyed dict.

    Raises ParseError (with the line number) on malformed lines, missing
    ids, or duplicate ids.
    """
    path = Path(path)
    preds: dict[str, dict] = {}
    with path.open(encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {line_num}: {exc}") from None
            if not isinstance(row, dict) or "id" not in row:
                raise ParseError(f"{path}: line {line_num}: missing 'id' field")
            key = str(row["id"])
            if key in preds:
                raise ParseError(f"{path}: line {line_num}: duplicate id {key!r}")
            preds[key] = row
    return preds


# --------------------------------------------------------------------------
# Numeric extraction
# --------------------------------------------------------------------------

_THOUSANDS = re.compile(r"(?<=\d),(?=\d)")
_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def extract_numeric(answer: str | None) -> float | None:
    """First decimal number in the text after stripping thousands separators.

    Returns None when the text contains no digits; callers score that as a
    parse failure (and incorrect).
    """
    if answer is None:
        return None
    match = _NUMBER.search(_THOUSANDS.sub("", answer))
    return float(match.group()) if match else None


def numeric_in_meters(answer: str | None) -> float | None:
    """extract_numeric plus unit normalization to meters.

    Answers are assumed meter-denominated unless the text mentions
    millimeters or centimeters.
    """
    value = extract_numeric(answer)
    if value is None or answer is None:
        return value
    lowered = answer.lower()
    if "millimeter" in lowered or "millimetre" in lowered or "mm" in lowered:
        return value / 1000.0
    if "centimeter" in lowered or "centimetre" in lowered or "cm" in lowered:
        return value / 100.0
    return value


# --------------------------------------------------------------------------
# Metric primitives
# --------------------------------------------------------------------------


class RegressionMetrics(NamedTuple):
    mae: float
    rmse: float
    r_squared: float | None
    acc_5pct: float


def within_5pct(pred: float, gt: float) -> bool:
    """The 5%-rule correctness test, inclusive at the boundary."""
    return abs(pred - gt) <= 0.05 * abs(gt)


def eval_regression(
    preds: Sequence[float], gts: Sequence[float], strict_r2: bool = False
) -> RegressionMetrics:
    """MAE, RMSE, R-squared about the GT mean, and the 5%-rule accuracy.

    When every ground-truth value is equal, SStot is zero and R-squared has
    no defined value: it is reported as None (or raised as
    DegenerateVariance with strict_r2=True); the other metrics are still
    computed.
    """
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(gts)} ground truths")
    if not gts:
        raise LengthMismatch("cannot evaluate empty prediction/ground-truth lists")
    p = np.asarray(preds, dtype=float)
    g = np.asarray(gts, dtype=float)
    residuals = p - g
    mae = float(np.mean(np.abs(residuals)))
    rmse = float(math.sqrt(np.mean(residuals**2)))
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((g - g.mean()) ** 2))
    if ss_tot == 0.0:
        if strict_r2:
            raise DegenerateVariance("all ground-truth values are equal")
        r_squared = None
    else:
        r_squared = 1.0 - ss_res / ss_tot
    acc = float(np.mean([within_5pct(pi, gi) for pi, gi in zip(p, g)]))
    return RegressionMetrics(mae, rmse, r_squared, acc)


def eval_grounding(
    preds: Sequence[HorizontalBox2D | None],
    gts: Sequence[HorizontalBox2D],
    thresh: float = 0.5,
) -> float:
    """Fraction of pairs with IoU >= thresh; missing predictions are wrong."""
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(gts)} ground truths")
    if not 0 < thresh < 1:
        raise ValueError(f"thresh must be in (0, 1), got {thresh}")
    if not gts:
        return 0.0
    hits = sum(
        1 for p, g in zip(preds, gts) if p is not None and hbb_iou(p, g) >= thresh
    )
    return hits / len(gts)


def eval_retrieval(
    preds: Sequence[Box3D | None],
    gts: Sequence[Box3D],
    cams: CameraModel | Sequence[CameraModel],
    thresh: float = 0.25,
) -> float:
    """Fraction of pairs whose BEV IoU strictly exceeds thresh.

    `cams` is one camera for all pairs or one per pair (footprints live on
    each camera's own ground plane).
    """
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(gts)} ground truths")
    if isinstance(cams, CameraModel):
        cam_list: Sequence[CameraModel] = [cams] * len(gts)
    else:
        cam_list = cams
        if len(cam_list) != len(gts):
            raise LengthMismatch(f"{len(cam_list)} cameras vs {len(gts)} ground truths")
    if not gts:
        return 0.0
    hits = sum(
        1
        for p, g, cam in zip(preds, gts, cam_list)
        if p is not None and bev_iou(p, g, cam) > thresh
    )
    return hits / len(gts)


def _normalize_text(text: str) -> str:
    return " ".join(text.split()).casefold()


def eval_attributes(
    preds: Sequence[str | None],
    gts: Sequence[str],
    attribute: str = "",
    price_tol: float | None = None,
) -> float:
    """Attribute-recognition accuracy.

    Text attributes compare case-insensitively with whitespace normalized.
    Numeric attributes (price, doors, seats) compare by extracted number;
    an answer with no digits is a parse failure and incorrect. `price_tol`
    optionally relaxes price to a relative tolerance (default exact).
    """
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(gts)} ground truths")
    if not gts:
        return 0.0
    numeric = attribute in NUMERIC_ATTRIBUTES
    hits = 0
    for pred, gt in zip(preds, gts):
        if pred is None:
            continue
        if numeric:
            p_val, g_val = extract_numeric(pred), extract_numeric(gt)
            if p_val is None or g_val is None:
                continue
            if attribute == "price" and price_tol is not None:
                if abs(p_val - g_val) <= price_tol * abs(g_val):
                    hits += 1
            elif p_val == g_val:
                hits += 1
        elif _normalize_text(pred) == _normalize_text(gt):
            hits += 1
    return hits / len(gts)


# --------------------------------------------------------------------------
# Ground-truth derivation from annotations
# --------------------------------------------------------------------------


def grounding_ground_truth(ann: AnnotationFile) -> dict[str, HorizontalBox2D]:
    """Per-object HBB ground truth (axis-aligned hull of the annotated OBB)."""
    return {obj.id: obb_to_hbb(obj.obb) for obj in ann.objects}


def retrieval_ground_truth(
    ann: AnnotationFile, inflation: float = 1.0
) -> dict[str, Box3D]:
    """Per-object 3D ground truth derived from the OBB + dimensions."""
    return {
        obj.id: derive_box3d(obj.obb, obj.dims_m, ann.camera, inflation)
        for obj in ann.objects
    }


def sqa_ground_truth(ann: AnnotationFile) -> dict[str, float]:
    """Ground truth for the five spatial-QA tasks, keyed `<id>:<task>`.

    Depth and distance are measured to the object's ground center; length,
    width, and height are the metric dimensions. All values in meters.
    """
    gt: dict[str, float] = {}
    for obj in ann.objects:
        center = backproject_to_ground(PixelPoint(obj.obb.cx, obj.obb.cy), ann.camera)
        measures = spatial_measures(center)
        dims = obj.dims_m
        gt[f"{obj.id}:depth"] = measures.depth
        gt[f"{obj.id}:distance"] = measures.distance
        gt[f"{obj.id}:length"] = dims.length
        gt[f"{obj.id}:width"] = dims.width
        gt[f"{obj.id}:height"] = dims.height
    return gt


def attribute_ground_truth(ann: AnnotationFile) -> dict[str, str]:
    """Per-object attribute ground truth, keyed `<id>:<attribute>`."""
    gt: dict[str, str] = {}
    for obj in ann.objects:
        for name, value in obj.attributes.items():
            gt[f"{obj.id}:{name}"] = str(value)
    return gt


# --------------------------------------------------------------------------
# File-level evaluation
# --------------------------------------------------------------------------


@dataclass
class EvalReport:
    """One task's metric bundle; irrelevant metrics stay None."""

    task: str
    n_evaluated: int
    n_parse_failures: int
    acc_at_05: float | None = None
    acc_at_bev_025: float | None = None
    mae: float | None = None
    rmse: float | None = None
    r_squared: float | None = None
    acc_5pct: float | None = None
    accuracy: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": self.task,
            "n_evaluated": self.n_evaluated,
            "n_parse_failures": self.n_parse_failures,
            "acc_at_05": self.acc_at_05,
            "acc_at_bev_025": self.acc_at_bev_025,
            "mae": self.mae,
            "rmse": self.rmse,
            "r_squared": self.r_squared,
            "acc_5pct": self.acc_5pct,
            "accuracy": self.accuracy,
        }


def _pred_text(pred: dict | None, *keys: str) -> str | None:
    if pred is None:
        return None
    for key in keys:
        value = pred.get(key)
        if isinstance(value, str) and value.strip():
            return value
    return None


def _pred_hbb(pred: dict | None) -> HorizontalBox2D | None:
    text = _pred_text(pred, "hbb", "answer")
    if text is None:
        return None
    loc = extract_location(text)
    if isinstance(loc, HorizontalBox2D):
        return loc
    if isinstance(loc, OrientedBox2D):
        return obb_to_hbb(loc)
    return None


def _pred_box3d(pred: dict | None) -> Box3D | None:
    text = _pred_text(pred, "box3d", "answer")
    if text is None:
        return None
    loc = extract_location(text)
    return loc if isinstance(loc, Box3D) else None


def evaluate_grounding_file(
    ann: AnnotationFile, preds: dict[str, dict], thresh: float = 0.5
) -> EvalReport:
    gts = grounding_ground_truth(ann)
    pred_boxes = [_pred_hbb(preds.get(obj_id)) for obj_id in gts]
    acc = eval_grounding(pred_boxes, list(gts.values()), thresh)
    return EvalReport(
        task="grounding",
        n_evaluated=len(gts),
        n_parse_failures=sum(1 for b in pred_boxes if b is None),
        acc_at_05=acc,
    )


def evaluate_retrieval_file(
    ann: AnnotationFile,
    preds: dict[str, dict],
    thresh: float = 0.25,
    inflation: float = 1.0,
) -> EvalReport:
    gts = retrieval_ground_truth(ann, inflation)
    pred_boxes = [_pred_box3d(preds.get(obj_id)) for obj_id in gts]
    acc = eval_retrieval(pred_boxes, list(gts.values()), ann.camera, thresh)
    return EvalReport(
        task="retrieval",
        n_evaluated=len(gts),
        n_parse_failures=sum(1 for b in pred_boxes if b is None),
        acc_at_bev_025=acc,
    )


def _regression_report(
    task: str, pairs: list[tuple[float | None, float]]
) -> EvalReport:
    parsed = [(p, g) for p, g in pairs if p is not None]
    n_failures = len(pairs) - len(parsed)
    report = EvalReport(task=task, n_evaluated=len(pairs), n_parse_failures=n_failures)
    if parsed:
        metrics = eval_regression([p for p, _ in parsed], [g for _, g in parsed])
        report.mae = metrics.mae
        report.rmse = metrics.rmse
        report.r_squared = metrics.r_squared
        # The 5% accuracy denominator includes unparseable predictions.
        hits = sum(1 for p, g in parsed if within_5pct(p, g))
        report.acc_5pct = hits / len(pairs)
    elif pairs:
        report.acc_5pct = 0.0
    return report


def evaluate_sqa_file(
    ann: AnnotationFile, preds: dict[str, dict]
) -> tuple[EvalReport, dict[str, EvalReport]]:
    """Overall and per-task spatial-QA reports.

    Predictions are `{"id": "<object_id>:<task>", "answer": <text>}`; the
    numeric value is extracted from the text and unit-normalized to meters.
    """
    gts = sqa_ground_truth(ann)
    pairs_by_task: dict[str, list[tuple[float | None, float]]] = {
        task: [] for task in SQA_TASKS
    }
    all_pairs: list[tuple[float | None, float]] = []
    for key, gt_value in gts.items():
        task = key.rsplit(":", 1)[1]
        value = numeric_in_meters(_pred_text(preds.get(key), "answer"))
        pairs_by_task[task].append((value, gt_value))
        all_pairs.append((value, gt_value))
    overall = _regression_report("sqa", all_pairs)
    per_task = {
        task: _regression_report(task, pairs)
        for task, pairs in pairs_by_task.items()
        if pairs
    }
    return overall, per_task


def evaluate_attributes_file(
    ann: AnnotationFile, preds: dict[str, dict], price_tol: float | None = None
) -> tuple[EvalReport, dict[str, EvalReport]]:
    """Overall and per-attribute recognition reports.

    Predictions are `{"id": "<object_id>:<attribute>", "answer": <text>}`.
    """
    gts = attribute_ground_truth(ann)
    by_attr: dict[str, list[tuple[str | None, str]]] = {}
    for key, gt_value in gts.items():
        attr = key.rsplit(":", 1)[1]
        text = _pred_text(preds.get(key), "answer")
        by_attr.setdefault(attr, []).append((text, gt_value))

    per_attr: dict[str, EvalReport] = {}
    total_hits = 0.0
    total_n = 0
    total_failures = 0
    for attr, pairs in sorted(by_attr.items()):
        pred_texts = [p for p, _ in pairs]
        gt_texts = [g for _, g in pairs]
        acc = eval_attributes(pred_texts, gt_texts, attribute=attr, price_tol=price_tol)
        failures = _attribute_parse_failures(pred_texts, attr)
        per_attr[attr] = EvalReport(
            task=attr,
            n_evaluated=len(pairs),
            n_parse_failures=failures,
            accuracy=acc,
        )
        total_hits += acc * len(pairs)
        total_n += len(pairs)
        total_failures += failures
    overall = EvalReport(
        task="attributes",
        n_evaluated=total_n,
        n_parse_failures=total_failures,
        accuracy=(total_hits / total_n) if total_n else 0.0,
    )
    return overall, per_attr


def _attribute_parse_failures(preds: Sequence[str | None], attribute: str) -> int:
    if attribute in NUMERIC_ATTRIBUTES:
        return sum(1 for p in preds if extract_numeric(p) is None)
    return sum(1 for p in preds if p is None)


def render_report_table(report: dict[str, Any], indent: int = 0) -> str:
    """Plain-text rendering of a (possibly nested) report dict."""
    lines = []
    pad = "  " * indent
    for key, value in report.items():
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.append(render_report_table(value, indent + 1))
        elif isinstance(value, float):
            lines.append(f"{pad}{key:<18} {value:.4f}")
        else:
            lines.append(f"{pad}{key:<18} {value if value is not None else '-'}")
    return "\n".join(lines)
