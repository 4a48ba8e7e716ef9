"""Command-line interface: plan, dispatch, run, and eval subcommands."""

from __future__ import annotations

import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Optional

import click

from . import evaluation
from .analysis import AnalysisMode, FixtureTransport, HttpChatTransport, LlmClient
from .analysis.llm import ENV_ENDPOINT
from .errors import PcigError
from .graph import build_graph, to_dot
from .layout import LayoutConfig, layout_svg
from .model import PromptSpec, parse_plan, serialize_plan
from .pipeline import PipelineConfig, dispatch_plan, plan_prompt, run_batch, run_pipeline
from .resolver import FixturePnResolver, RemotePnResolver

_MODE_CHOICES = {
    "full": AnalysisMode.FULL,
    "no-kg": AnalysisMode.NO_KG,
    "no-object-extraction": AnalysisMode.NO_OBJECT_EXTRACTION,
}


def _parse_canvas(value: str) -> tuple[int, int]:
    try:
        width, height = value.lower().split("x")
        return int(width), int(height)
    except ValueError as exc:
        raise click.BadParameter(f"canvas must look like 512x512, got {value!r}") from exc


def _prompt_spec(prompt: str, prompt_id: Optional[str]) -> PromptSpec:
    if prompt_id is None:
        prompt_id = "p" + hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:10]
    return PromptSpec(raw_text=prompt, id=prompt_id)


def _client(offline: bool, fixtures: Optional[str]) -> Optional[LlmClient]:
    if fixtures:
        return LlmClient(FixtureTransport(fixtures))
    if offline:
        return None
    if os.environ.get(ENV_ENDPOINT):
        return LlmClient(HttpChatTransport())
    return None


def _config(canvas: str, seed: int) -> PipelineConfig:
    width, height = _parse_canvas(canvas)
    return PipelineConfig(
        canvas_width_px=width,
        canvas_height_px=height,
        layout=LayoutConfig(rng_seed=seed),
    )


def _resolver(pn_fixtures: Optional[str]):
    if pn_fixtures:
        return FixturePnResolver(pn_fixtures)
    if os.environ.get("PCIG_SEARCH_ENDPOINT"):
        return RemotePnResolver()
    return None


@click.group()
def main() -> None:
    """Prompt-consistency scene planning and generation pipeline."""


@main.command("plan")
@click.option("--prompt", required=True, help="Prompt text to plan.")
@click.option("--id", "prompt_id", default=None, help="Stable prompt id (derived from the text by default).")
@click.option("--mode", type=click.Choice(sorted(_MODE_CHOICES)), default="full")
@click.option("--offline", is_flag=True, help="Never call a completion service; use the fallback parser.")
@click.option("--fixtures", default=None, type=click.Path(exists=True, file_okay=False), help="Recorded completion fixtures directory.")
@click.option("--canvas", default="512x512", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Plan file (stdout by default).")
@click.option("--dot", default=None, type=click.Path(dir_okay=False), help="Also write the relation graph in DOT format.")
@click.option("--svg", default=None, type=click.Path(dir_okay=False), help="Also write an SVG of the layout.")
def cmd_plan(prompt, prompt_id, mode, offline, fixtures, canvas, seed, out, dot, svg) -> None:
    """Turn a prompt into a validated scene plan."""
    spec = _prompt_spec(prompt, prompt_id)
    client = _client(offline, fixtures)
    plan = plan_prompt(spec, mode=_MODE_CHOICES[mode], client=client, config=_config(canvas, seed))
    payload = serialize_plan(plan)
    if out:
        Path(out).write_bytes(payload)
        click.echo(f"wrote {out}")
    else:
        sys.stdout.buffer.write(payload)
    if dot:
        graph = build_graph(plan.objects, plan.triples)
        Path(dot).write_text(to_dot(graph, plan.objects), encoding="utf-8")
        click.echo(f"wrote {dot}")
    if svg:
        Path(svg).write_text(layout_svg(plan), encoding="utf-8")
        click.echo(f"wrote {svg}")


@main.command("dispatch")
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pn-fixtures", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("--no-text-module", is_flag=True, help="Re-route TEXT items to the layout backend.")
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Request file (stdout by default).")
def cmd_dispatch(plan_path, pn_fixtures, no_text_module, out) -> None:
    """Convert a plan file into a backend request."""
    plan = parse_plan(Path(plan_path).read_bytes())
    request = dispatch_plan(plan, resolver=_resolver(pn_fixtures), with_text_module=not no_text_module)
    payload = request.to_bytes()
    if out:
        Path(out).write_bytes(payload)
        click.echo(f"wrote {out}")
    else:
        sys.stdout.buffer.write(payload)


@main.command("run")
@click.option("--prompt", default=None, help="Single prompt text.")
@click.option("--id", "prompt_id", default=None)
@click.option("--batch", default=None, type=click.Path(exists=True, dir_okay=False), help="File of prompts: JSONL {id, prompt} or plain lines.")
@click.option("--mode", type=click.Choice(sorted(_MODE_CHOICES)), default="full")
@click.option("--no-text-module", is_flag=True)
@click.option("--offline", is_flag=True)
@click.option("--fixtures", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("--mock", is_flag=True, help="Render a schematic image instead of calling a backend.")
@click.option("--endpoint", default=None, help="Backend endpoint (or set PCIG_BACKEND_ENDPOINT).")
@click.option("--pn-fixtures", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("--canvas", default="512x512", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--concurrency", default=1, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
def cmd_run(prompt, prompt_id, batch, mode, no_text_module, offline, fixtures, mock, endpoint, pn_fixtures, canvas, seed, concurrency, out) -> None:
    """Plan, dispatch, and generate; writes one artifact directory per prompt."""
    if (prompt is None) == (batch is None):
        raise click.UsageError("provide exactly one of --prompt or --batch")
    endpoint = endpoint or os.environ.get("PCIG_BACKEND_ENDPOINT")
    prompts = [_prompt_spec(prompt, prompt_id)] if prompt else _read_batch(batch)
    manifests = run_batch(
        prompts,
        out,
        concurrency=concurrency,
        mode=_MODE_CHOICES[mode],
        backend_endpoint=endpoint,
        mock=mock,
        client=_client(offline, fixtures),
        resolver=_resolver(pn_fixtures),
        with_text_module=not no_text_module,
        config=_config(canvas, seed),
    )
    for manifest in manifests:
        click.echo(json.dumps(manifest, sort_keys=True))


def _read_batch(path: str) -> list[PromptSpec]:
    prompts = []
    for index, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            doc = json.loads(line)
            prompts.append(PromptSpec(raw_text=doc["prompt"], id=doc.get("id", f"p{index:04d}")))
        else:
            prompts.append(PromptSpec(raw_text=line, id=f"p{index:04d}"))
    return prompts


@main.command("eval")
@click.option("--benchmark", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--verdicts", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--tag", default="run", show_default=True)
@click.option("--compare", multiple=True, metavar="TAG=VERDICTS", help="Extra verdict files to score and diff against --verdicts.")
@click.option("--format", "fmt", type=click.Choice(["table", "json"]), default="table", show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Also write the JSON report here.")
def cmd_eval(benchmark, verdicts, tag, compare, fmt, out) -> None:
    """Score detector verdicts against a benchmark fixture."""
    records = evaluation.load_benchmark(benchmark)

    def score(verdict_path: str, report_tag: str) -> evaluation.EvalReport:
        verdict_map = evaluation.load_verdicts(verdict_path)
        return evaluation.compute_report(evaluation.apply_verdicts(records, verdict_map), generator_tag=report_tag)

    report = score(verdicts, tag)
    if out:
        Path(out).write_text(json.dumps(report.to_document(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if compare:
        tagged = [(tag, report)]
        for entry in compare:
            other_tag, _, other_path = entry.partition("=")
            if not other_path:
                raise click.BadParameter(f"--compare expects TAG=VERDICTS, got {entry!r}")
            tagged.append((other_tag, score(other_path, other_tag)))
        click.echo(evaluation.compare_reports(tagged))
        return
    if fmt == "json":
        click.echo(json.dumps(report.to_document(), indent=2, sort_keys=True))
    else:
        click.echo(evaluation.report_table(report))


def run() -> None:  # console-script shim kept for parity with `python -m`
    try:
        main(standalone_mode=True)
    except PcigError as exc:  # pragma: no cover - click wraps most paths
        click.echo(str(exc), err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
