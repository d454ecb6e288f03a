"""Text-completion backends for the planner/VLM/summarizer/search roles.

Every backend exposes `complete(prompt, image=None) -> str`. The mock
family answers from an annotation file with optional seeded Gaussian
noise, so agent logic is testable without any model: a noiseless mock is
an oracle, a noisy one emulates imperfect perception. The HTTP backends
speak a minimal JSON contract (POST {prompt, image} -> answer text) so any
served model can drop in.

Mock backends hold RNG state and are single-flight; create one per
concurrent query (they are cheap). HTTP backends are stateless and safe
to share.
"""

from __future__ import annotations

import json
import math
import re
from typing import Protocol

import numpy as np
import requests

from ..boxes import (
    Box3D,
    HorizontalBox2D,
    OrientedBox2D,
    derive_box3d,
    extract_location,
    hbb_iou,
    obb_to_hbb,
    serialize_location,
)
from ..errors import UnknownWorkflow
from ..evaluation import AnnotatedObject, AnnotationFile, extract_numeric
from ..vehicles import VehicleTable

_FLOAT = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)")


class Backend(Protocol):
    """Invocation contract shared by all model backends."""

    name: str

    def complete(self, prompt: str, image: str | None = None) -> str:
        ...


def _floats(text: str) -> list[float]:
    return [float(m) for m in _FLOAT.findall(text)]


class MockVLMBackend:
    """Annotation-backed visual model.

    Understands three prompt families (matched by keyword):

      * measure ... length/width/height  -> dimensions of the referenced
        vehicle, meters at millimeter precision, with optional Gaussian
        noise (noise_sigma_mm) on each axis;
      * locate ... dimensions ...        -> 3D + 2D box of the vehicle
        whose dimensions are nearest the ones in the prompt, its center
        optionally perturbed by noise_sigma_px pixels;
      * what is the <attribute> ...      -> the annotated attribute value.

    Vehicles are referenced by an embedded 2D box; the mock resolves it to
    the annotated object with the highest box overlap.
    """

    name = "mock-vlm"

    def __init__(
        self,
        annotation: AnnotationFile,
        noise_sigma_mm: float = 0.0,
        noise_sigma_px: float = 0.0,
        seed: int = 0,
    ):
        self.annotation = annotation
        self.noise_sigma_mm = noise_sigma_mm
        self.noise_sigma_px = noise_sigma_px
        self._rng = np.random.default_rng(seed)

    def _resolve(self, prompt: str) -> AnnotatedObject | None:
        region = extract_location(prompt)
        if region is None:
            if len(self.annotation.objects) == 1:
                return self.annotation.objects[0]
            return None
        if isinstance(region, OrientedBox2D):
            region = obb_to_hbb(region)
        if not isinstance(region, HorizontalBox2D):
            return None
        best, best_iou = None, 0.0
        for obj in self.annotation.objects:
            iou = hbb_iou(region, obb_to_hbb(obj.obb))
            if iou > best_iou:
                best, best_iou = obj, iou
        return best

    def _noisy_dims_mm(self, obj: AnnotatedObject) -> tuple[float, float, float]:
        dims = np.array(obj.dims_mm, dtype=float)
        if self.noise_sigma_mm > 0:
            dims = np.maximum(dims + self._rng.normal(0.0, self.noise_sigma_mm, 3), 1.0)
        return tuple(float(v) for v in dims)

    def complete(self, prompt: str, image: str | None = None) -> str:
        lowered = prompt.lower()
        if "measure" in lowered:
            obj = self._resolve(prompt)
            if obj is None:
                return "I cannot find a vehicle there."
            length, width, height = (v / 1000.0 for v in self._noisy_dims_mm(obj))
            return (
                f"The vehicle measures length {length:.3f} m, "
                f"width {width:.3f} m, height {height:.3f} m."
            )
        if "locate" in lowered:
            values = _floats(prompt)
            if len(values) < 3 or not self.annotation.objects:
                return "I cannot locate that vehicle."
            target_mm = np.array(values[:3]) * 1000.0
            obj = min(
                self.annotation.objects,
                key=lambda o: float(np.sum((np.array(o.dims_mm) - target_mm) ** 2)),
            )
            obb = obj.obb
            if self.noise_sigma_px > 0:
                dx, dy = self._rng.normal(0.0, self.noise_sigma_px, 2)
                obb = OrientedBox2D(
                    obb.cx + float(dx), obb.cy + float(dy),
                    obb.width, obb.height, obb.angle,
                )
            box3d = derive_box3d(obb, obj.dims_m, self.annotation.camera)
            return (
                f"Found it at {serialize_location(box3d)}; "
                f"image box {serialize_location(obb_to_hbb(obb))}."
            )
        for attr in ("color", "colour", "type"):
            if attr in lowered:
                obj = self._resolve(prompt)
                key = "color" if attr == "colour" else attr
                if obj is None or key not in obj.attributes:
                    return f"I cannot tell the {key}."
                return f"The {key} of the vehicle is {obj.attributes[key]}."
        return "I cannot answer that."


# Canonical tool sequences for the three query workflows. Each entry is a
# plan-step template; {region} etc. are filled by the mock planner.
_ZERO_SHOT_STEPS = [
    {
        "tool": "spatial_understanding",
        "args": {"mode": "dims", "region": None},
        "output_name": "dims",
    },
    {
        "tool": "query_table",
        "args": {
            "mode": "match",
            "length_m": "$dims.length_m",
            "width_m": "$dims.width_m",
            "height_m": "$dims.height_m",
        },
        "output_name": "record",
    },
]
_PRICE_STEP = {
    "tool": "web_search",
    "args": {"query": "$record.brand $record.model price"},
    "output_name": "web_price",
}
_SUMMARIZE_STEP = {"tool": "summarize", "args": {}, "output_name": "answer"}

ATTRIBUTE_WORDS = ("brand", "model", "price", "cost", "powertrain", "doors", "seats")
VISUAL_WORDS = ("color", "colour", "type")
RETRIEVAL_WORDS = ("find", "locate", "where")


class MockPlannerBackend:
    """Keyword classifier that emits the canonical plan for a query.

    Three workflows are recognized: target retrieval ("find the <brand>
    <model>", needs the vehicle table to spot names), visual attributes
    (color/type -> image understanding only), and zero-shot recognition
    (brand/model/price/... -> measure dimensions, match the table,
    optionally search the web for the price). Anything else raises
    UnknownWorkflow.
    """

    name = "mock-planner"

    def __init__(self, table: VehicleTable | None = None):
        self.table = table

    def _find_named_vehicle(self, query: str) -> tuple[str, str] | None:
        if self.table is None:
            return None
        lowered = query.lower()
        best: tuple[str, str] | None = None
        best_len = 0
        for record in self.table.records:
            name = f"{record.brand} {record.model}".lower()
            if name in lowered and len(name) > best_len:
                best, best_len = (record.brand, record.model), len(name)
        return best

    def _classify(self, query: str) -> list[dict]:
        lowered = query.lower()
        region = extract_location(query)
        region_text = serialize_location(region) if region is not None else None

        named = self._find_named_vehicle(query)
        if named and any(word in lowered for word in RETRIEVAL_WORDS):
            brand, model = named
            return [
                {
                    "tool": "query_table",
                    "args": {"mode": "lookup", "brand": brand, "model": model},
                    "output_name": "record",
                },
                {
                    "tool": "spatial_understanding",
                    "args": {
                        "mode": "locate",
                        "length_mm": "$record.length_mm",
                        "width_mm": "$record.width_mm",
                        "height_mm": "$record.height_mm",
                    },
                    "output_name": "location",
                },
                dict(_SUMMARIZE_STEP),
            ]
        for word in VISUAL_WORDS:
            if word in lowered:
                attribute = "color" if word == "colour" else word
                args: dict = {"attribute": attribute}
                if region_text:
                    args["region"] = region_text
                return [
                    {
                        "tool": "image_understanding",
                        "args": args,
                        "output_name": "visual",
                    },
                    dict(_SUMMARIZE_STEP),
                ]
        if any(word in lowered for word in ATTRIBUTE_WORDS) or "how much" in lowered:
            steps = [json.loads(json.dumps(s)) for s in _ZERO_SHOT_STEPS]
            steps[0]["args"]["region"] = region_text
            if "price" in lowered or "cost" in lowered or "how much" in lowered:
                steps.append(dict(_PRICE_STEP))
            steps.append(dict(_SUMMARIZE_STEP))
            return steps
        raise UnknownWorkflow(f"cannot classify query: {query!r}")

    def complete(self, prompt: str, image: str | None = None) -> str:
        # The planner prompt may contain few-shot examples with their own
        # "Query:" lines; the live query is the last one.
        queries = re.findall(r"Query:\s*(.+)", prompt)
        query = queries[-1].strip() if queries else prompt.strip()
        steps = self._classify(query)
        return "```json\n" + json.dumps(steps, indent=2) + "\n```"


class MockSummarizerBackend:
    """Deterministic answer templates over the executed tool outputs."""

    name = "mock-summarizer"

    def complete(self, prompt: str, image: str | None = None) -> str:
        outputs = self._outputs_from(prompt)
        query = (re.findall(r"Query:\s*(.+)", prompt) or [""])[0].lower()

        location = outputs.get("location")
        if isinstance(location, dict) and "box3d" in location:
            return f"location: {location['box3d']}; image box: {location['hbb']}"
        visual = outputs.get("visual")
        if isinstance(visual, dict) and "value" in visual:
            return f"{visual.get('attribute', 'attribute')}: {visual['value']}"
        record = outputs.get("record")
        if isinstance(record, dict):
            asked = [w for w in ATTRIBUTE_WORDS if w in query and w != "cost"]
            if "how much" in query and "price" not in asked:
                asked.append("price")
            if not asked:
                asked = ["brand", "model"]
            parts = []
            for attr in asked:
                value = record.get(attr)
                if attr == "price":
                    web = outputs.get("web_price")
                    if isinstance(web, dict):
                        searched = extract_numeric(str(web.get("text", "")))
                        if searched is not None:
                            value = searched
                if value is None:
                    continue
                if isinstance(value, (int, float)) and not isinstance(value, bool):
                    number = float(value)
                    rendered = str(int(number)) if number == int(number) else str(number)
                else:
                    rendered = str(value)
                parts.append(f"{attr}: {rendered}")
            if parts:
                return "; ".join(parts)
        return "error: no usable tool outputs"

    @staticmethod
    def _outputs_from(prompt: str) -> dict:
        start, end = prompt.find("{"), prompt.rfind("}")
        if start == -1 or end <= start:
            return {}
        try:
            parsed = json.loads(prompt[start : end + 1])
        except json.JSONDecodeError:
            return {}
        return parsed if isinstance(parsed, dict) else {}


class HTTPBackend:
    """Generic served-model backend: POST {prompt, image} -> answer text."""

    def __init__(
        self,
        url: str,
        name: str = "http",
        timeout: float = 30.0,
        retries: int = 1,
    ):
        self.url = url
        self.name = name
        self.timeout = timeout
        self.retries = retries

    def complete(self, prompt: str, image: str | None = None) -> str:
        payload: dict = {"prompt": prompt}
        if image is not None:
            payload["image"] = image
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                response = requests.post(self.url, json=payload, timeout=self.timeout)
                response.raise_for_status()
                return response.text
            except requests.RequestException as exc:
                last_error = exc
        raise RuntimeError(f"{self.name} backend failed after retries: {last_error}")


class FixtureSearchBackend:
    """Web-search stand-in answering from a query -> text mapping."""

    name = "fixture-search"

    def __init__(self, fixtures: dict[str, str]):
        self.fixtures = dict(fixtures)

    def complete(self, prompt: str, image: str | None = None) -> str:
        key = prompt.strip()
        if key not in self.fixtures:
            raise KeyError(f"no search fixture for {key!r}")
        return self.fixtures[key]


class HTTPSearchBackend:
    """Web search over a generic GET endpoint (?q=<query> -> text body)."""

    name = "http-search"

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def complete(self, prompt: str, image: str | None = None) -> str:
        response = requests.get(self.url, params={"q": prompt}, timeout=self.timeout)
        response.raise_for_status()
        return response.text
