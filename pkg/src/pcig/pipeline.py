"""End-to-end orchestration: analyze, graph, layout, plan, dispatch, generate.

The pipeline composes the other modules into three entry points:
``plan_prompt`` (prompt to validated ScenePlan), ``dispatch_plan`` (plan to
category-routed backend request), and ``run_pipeline`` (write plan, request,
and image artifacts plus a result manifest). Each prompt's run is
independent, so batches may execute concurrently.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from . import backend as backend_client
from . import mockgen
from .analysis import AnalysisMode, LlmClient, analyze
from .errors import BackendError, DispatchError, PcigError
from .graph import build_graph, select_anchor
from .jsonutil import canonical_dump_bytes
from .layout import LayoutConfig, llm_layout, predicates_to_constraints, solve_layout
from .model import (
    BoundingBox,
    ObjectCategory,
    PromptSpec,
    ScenePlan,
    serialize_plan,
    validate_plan,
)
from .resolver import PnImageResolver

REQUEST_SCHEMA_VERSION = "pcig-request/1"

ROUTE_LAYOUT_BACKEND = "layout_backend"
ROUTE_TEXT_MODULE = "text_module"
ROUTE_PN_COMPOSITE = "pn_composite"

_ROUTE_FOR_CATEGORY = {
    ObjectCategory.GO: ROUTE_LAYOUT_BACKEND,
    ObjectCategory.TEXT: ROUTE_TEXT_MODULE,
    ObjectCategory.PN: ROUTE_PN_COMPOSITE,
}


@dataclass(frozen=True)
class PipelineConfig:
    canvas_width_px: int = 512
    canvas_height_px: int = 512
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    max_count: int = 20
    aux: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class DispatchItem:
    """One routed generation task; the route follows the object category."""

    object_id: int
    route: str
    caption: str
    box: BoundingBox
    text_payload: Optional[str] = None
    image_ref: Optional[str] = None


@dataclass(frozen=True)
class BackendRequest:
    prompt: str
    canvas_width_px: int
    canvas_height_px: int
    items: tuple[DispatchItem, ...]
    aux: dict[str, Any] = field(default_factory=dict)
    text_module_enabled: bool = True

    def to_document(self) -> dict[str, Any]:
        return {
            "schema_version": REQUEST_SCHEMA_VERSION,
            "prompt": self.prompt,
            "canvas": {"width_px": self.canvas_width_px, "height_px": self.canvas_height_px},
            "items": [
                {
                    "object_id": item.object_id,
                    "route": item.route,
                    "caption": item.caption,
                    "box": {"x": item.box.x, "y": item.box.y, "w": item.box.w, "h": item.box.h},
                    "text_payload": item.text_payload,
                    "image_ref": item.image_ref,
                }
                for item in self.items
            ],
            "aux": self.aux,
            "ablation": {"text_module": self.text_module_enabled},
        }

    def to_bytes(self) -> bytes:
        return canonical_dump_bytes(self.to_document())


def plan_prompt(
    prompt: PromptSpec,
    mode: AnalysisMode = AnalysisMode.FULL,
    client: Optional[LlmClient] = None,
    layout_client: Optional[LlmClient] = None,
    config: Optional[PipelineConfig] = None,
) -> ScenePlan:
    """Compose analysis, graph, anchor, and layout into a validated plan."""
    config = config or PipelineConfig()
    try:
        result = analyze(prompt, client, AnalysisMode(mode), max_count=config.max_count)
    except PcigError as exc:
        if exc.code == "NO_OBJECTS_FOUND":
            raise type(exc)(exc.code, f"{exc.message}; prompt was: {prompt.raw_text!r}") from exc
        raise
    graph = build_graph(result.objects, result.triples)
    anchor_id = select_anchor(graph)

    layout_client = layout_client or client
    canvas = (config.canvas_width_px, config.canvas_height_px)
    if layout_client is not None:
        layout_result = llm_layout(prompt, result.objects, graph, layout_client, config.layout, canvas)
    else:
        constraints = predicates_to_constraints(result.triples)
        layout_result = solve_layout(graph, result.objects, constraints, config.layout)

    plan = _assemble(prompt, result.objects, result.triples, anchor_id, layout_result.boxes, config)
    if layout_result.source == "llm" and validate_plan(plan):
        # The proposed boxes broke a plan invariant; redo with the solver.
        constraints = predicates_to_constraints(result.triples)
        layout_result = solve_layout(graph, result.objects, constraints, config.layout)
        plan = _assemble(prompt, result.objects, result.triples, anchor_id, layout_result.boxes, config)

    diagnostics = validate_plan(plan)
    if diagnostics:
        raise PcigError(
            "PLAN_INVALID",
            "pipeline produced an invalid plan: " + "; ".join(d.code for d in diagnostics),
        )
    return plan


def _assemble(prompt, objects, triples, anchor_id, boxes, config: PipelineConfig) -> ScenePlan:
    return ScenePlan(
        prompt=prompt,
        canvas_width_px=config.canvas_width_px,
        canvas_height_px=config.canvas_height_px,
        objects=tuple(objects),
        triples=tuple(triples),
        anchor_id=anchor_id,
        boxes=dict(boxes),
    )


def dispatch_plan(
    plan: ScenePlan,
    resolver: Optional[PnImageResolver] = None,
    with_text_module: bool = True,
    aux: Optional[dict[str, Any]] = None,
) -> BackendRequest:
    """Route every plan object to its category's backend segment.

    Without the text module, TEXT objects are re-routed to the layout
    backend with their payload as a plain caption. PN objects need a
    resolver; all unresolved keys are reported together.
    """
    items: list[DispatchItem] = []
    unresolved: list[str] = []
    for obj in plan.objects:
        box = plan.boxes[obj.object_id]
        route = _ROUTE_FOR_CATEGORY[obj.category]
        if obj.category is ObjectCategory.TEXT and not with_text_module:
            items.append(
                DispatchItem(
                    object_id=obj.object_id,
                    route=ROUTE_LAYOUT_BACKEND,
                    caption=obj.text_payload or obj.caption,
                    box=box,
                )
            )
            continue
        if obj.category is ObjectCategory.PN:
            assert obj.pn_key is not None
            if resolver is None:
                unresolved.append(obj.pn_key)
                continue
            try:
                reference = resolver.resolve(obj.pn_key)
            except DispatchError:
                unresolved.append(obj.pn_key)
                continue
            items.append(
                DispatchItem(
                    object_id=obj.object_id,
                    route=route,
                    caption=obj.caption,
                    box=box,
                    image_ref=reference,
                )
            )
            continue
        items.append(
            DispatchItem(
                object_id=obj.object_id,
                route=route,
                caption=obj.caption,
                box=box,
                text_payload=obj.text_payload if obj.category is ObjectCategory.TEXT else None,
            )
        )
    if unresolved:
        raise DispatchError(
            "PN_RESOLUTION_FAILED",
            f"no image reference for pn keys: {', '.join(sorted(unresolved))}",
            pn_keys=sorted(unresolved),
        )
    return BackendRequest(
        prompt=plan.prompt.augmented_text or plan.prompt.raw_text,
        canvas_width_px=plan.canvas_width_px,
        canvas_height_px=plan.canvas_height_px,
        items=tuple(items),
        aux=dict(aux or {}),
        text_module_enabled=with_text_module,
    )


def run_pipeline(
    prompt: PromptSpec,
    out_dir: str | Path,
    mode: AnalysisMode = AnalysisMode.FULL,
    backend_endpoint: Optional[str] = None,
    mock: bool = False,
    client: Optional[LlmClient] = None,
    layout_client: Optional[LlmClient] = None,
    resolver: Optional[PnImageResolver] = None,
    with_text_module: bool = True,
    config: Optional[PipelineConfig] = None,
) -> dict[str, Any]:
    """One full run: plan JSON, request JSON, image file, result manifest.

    ``mock`` renders the schematic image locally; otherwise the request is
    POSTed to ``backend_endpoint``. The returned manifest (also written next
    to the artifacts) records paths, timing, and accumulated completion cost.
    """
    if not mock and not backend_endpoint:
        raise BackendError("BACKEND_UNAVAILABLE", "no backend endpoint configured and --mock not set")
    config = config or PipelineConfig()
    started = time.perf_counter()
    run_dir = Path(out_dir) / prompt.id
    run_dir.mkdir(parents=True, exist_ok=True)

    plan = plan_prompt(prompt, mode=mode, client=client, layout_client=layout_client, config=config)
    plan_path = run_dir / "plan.json"
    plan_path.write_bytes(serialize_plan(plan))

    request = dispatch_plan(plan, resolver=resolver, with_text_module=with_text_module, aux=config.aux)
    request_path = run_dir / "request.json"
    request_path.write_bytes(request.to_bytes())

    image_path = run_dir / "image.png"
    if mock:
        mockgen.render_mock_image(request.to_document(), image_path)
    else:
        assert backend_endpoint is not None
        backend_client.generate_image(
            backend_endpoint,
            request.to_bytes(),
            image_path,
            manifest_path=run_dir / "regions.json",
        )

    cost = client.cost if client is not None else 0.0
    if layout_client is not None and layout_client is not client:
        cost += layout_client.cost

    manifest = {
        "prompt_id": prompt.id,
        "mode": AnalysisMode(mode).value,
        "plan_path": plan_path.name,
        "request_path": request_path.name,
        "image_path": image_path.name,
        "timing_s": round(time.perf_counter() - started, 6),
        "llm_cost": round(cost, 6),
        "items": len(request.items),
    }
    (run_dir / "manifest.json").write_bytes(canonical_dump_bytes(manifest))
    return manifest


def run_batch(
    prompts: Sequence[PromptSpec],
    out_dir: str | Path,
    concurrency: int = 1,
    **kwargs: Any,
) -> list[dict[str, Any]]:
    """Run several prompts; manifests come back in input order."""
    ids = [p.id for p in prompts]
    if len(set(ids)) != len(ids):
        raise PcigError("DUPLICATE_ID", "prompt ids must be unique within a batch")
    if concurrency <= 1:
        return [run_pipeline(prompt, out_dir, **kwargs) for prompt in prompts]
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        futures = [pool.submit(run_pipeline, prompt, out_dir, **kwargs) for prompt in prompts]
        return [future.result() for future in futures]
