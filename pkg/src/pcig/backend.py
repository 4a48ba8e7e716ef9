"""HTTP client for a layout-conditioned generation backend.

Protocol: POST the backend-request JSON to the endpoint; the reply is a
multipart body carrying a PNG image and a region-manifest JSON part.
"""

from __future__ import annotations

import email.parser
import email.policy
from pathlib import Path
from typing import Optional

import httpx

from .errors import BackendError


def generate_image(
    endpoint: str,
    request_bytes: bytes,
    image_path: str | Path,
    manifest_path: Optional[str | Path] = None,
    timeout: float = 120.0,
) -> Path:
    """POST a request document and write the returned image (and manifest)."""
    try:
        response = httpx.post(
            endpoint,
            content=request_bytes,
            headers={"Content-Type": "application/json"},
            timeout=timeout,
        )
    except httpx.HTTPError as exc:
        raise BackendError("BACKEND_UNAVAILABLE", f"cannot reach backend {endpoint}: {exc}", endpoint=endpoint) from exc
    if response.status_code != 200:
        raise BackendError(
            "BACKEND_UNAVAILABLE",
            f"backend {endpoint} answered HTTP {response.status_code}",
            endpoint=endpoint,
            status=response.status_code,
        )

    content_type = response.headers.get("content-type", "")
    image_path = Path(image_path)
    image_path.parent.mkdir(parents=True, exist_ok=True)

    if content_type.startswith("image/"):
        image_path.write_bytes(response.content)
        return image_path

    if not content_type.startswith("multipart/"):
        raise BackendError(
            "BACKEND_UNAVAILABLE",
            f"backend {endpoint} returned unexpected content-type {content_type!r}",
            endpoint=endpoint,
        )

    header = f"Content-Type: {content_type}\r\n\r\n".encode("ascii")
    message = email.parser.BytesParser(policy=email.policy.default).parsebytes(header + response.content)
    image_bytes = None
    manifest_bytes = None
    for part in message.iter_parts():
        if part.get_content_type() == "image/png":
            image_bytes = part.get_payload(decode=True)
        elif part.get_content_type() == "application/json":
            manifest_bytes = part.get_payload(decode=True)
    if image_bytes is None:
        raise BackendError("BACKEND_UNAVAILABLE", "backend reply carried no image part", endpoint=endpoint)
    image_path.write_bytes(image_bytes)
    if manifest_path is not None and manifest_bytes is not None:
        Path(manifest_path).write_bytes(manifest_bytes)
    return image_path
