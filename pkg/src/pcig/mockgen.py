"""Schematic image writer for mock pipeline runs.

Draws one labeled rectangle per dispatch item so the whole pipeline runs
without any generation backend: outlines and captions for general objects,
the rendered payload for text items, and the fixture image (when it is a
readable local file) pasted for named entities. Output is deterministic for
a given request.
"""

from __future__ import annotations

from pathlib import Path

from PIL import Image, ImageDraw, ImageFont

_ROUTE_COLORS = {
    "layout_backend": (68, 119, 170),
    "text_module": (34, 136, 51),
    "pn_composite": (238, 102, 119),
}


def _px_box(box: dict, width: int, height: int) -> tuple[int, int, int, int]:
    x = round(box["x"] * width)
    y = round(box["y"] * height)
    w = max(round(box["w"] * width), 1)
    h = max(round(box["h"] * height), 1)
    return x, y, w, h


def render_mock_image(request: dict, out_path: str | Path) -> Path:
    """Render a backend request document to a schematic PNG."""
    width = request["canvas"]["width_px"]
    height = request["canvas"]["height_px"]
    image = Image.new("RGB", (width, height), (255, 255, 255))
    draw = ImageDraw.Draw(image)
    font = ImageFont.load_default()

    for item in request["items"]:
        x, y, w, h = _px_box(item["box"], width, height)
        color = _ROUTE_COLORS[item["route"]]
        if item["route"] == "pn_composite" and item.get("image_ref"):
            pasted = _paste_reference(image, item["image_ref"], (x, y, w, h))
            if not pasted:
                draw.rectangle([x, y, x + w - 1, y + h - 1], outline=color, width=2)
        else:
            draw.rectangle([x, y, x + w - 1, y + h - 1], outline=color, width=2)
        label = item["text_payload"] if item["route"] == "text_module" else item["caption"]
        draw.text((x + 3, y + 2), label or "", fill=color, font=font)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    image.save(out_path, format="PNG")
    return out_path


def _paste_reference(image: Image.Image, reference: str, box: tuple[int, int, int, int]) -> bool:
    path = Path(reference)
    if not path.exists():
        return False
    try:
        with Image.open(path) as source:
            x, y, w, h = box
            patch = source.convert("RGB").resize((w, h))
            image.paste(patch, (x, y))
        return True
    except OSError:
        return False
