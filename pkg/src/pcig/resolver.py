"""Representative-image resolution for named entities (PN objects).

Fixture mode maps a pn_key to a slug-named file in a local directory; remote
mode queries a search endpoint. Results are cached per key, and a cache hit
never re-fetches.
"""

from __future__ import annotations

import os
import threading
from pathlib import Path
from typing import Optional, Protocol

import httpx

from .errors import DispatchError

ENV_SEARCH_ENDPOINT = "PCIG_SEARCH_ENDPOINT"

_IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".webp", ".bmp")


class PnImageResolver(Protocol):
    def resolve(self, pn_key: str) -> str:
        """Image reference (local path or URL) for a pn_key; raises
        PN_RESOLUTION_FAILED when nothing is found."""
        ...


class FixturePnResolver:
    """Deterministic resolver over a directory of slug-named image files."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._cache: dict[str, str] = {}
        self._lock = threading.Lock()

    def resolve(self, pn_key: str) -> str:
        with self._lock:
            if pn_key in self._cache:
                return self._cache[pn_key]
        for extension in _IMAGE_EXTENSIONS:
            candidate = self.directory / f"{pn_key}{extension}"
            if candidate.exists():
                reference = str(candidate)
                with self._lock:
                    self._cache[pn_key] = reference
                return reference
        raise DispatchError(
            "PN_RESOLUTION_FAILED",
            f"no fixture image for {pn_key!r} under {self.directory}",
            pn_keys=[pn_key],
        )


class RemotePnResolver:
    """Queries a search endpoint: GET <endpoint>?q=<pn_key> -> {"url": ...}."""

    def __init__(self, endpoint: Optional[str] = None, timeout: float = 30.0):
        self.endpoint = endpoint or os.environ.get(ENV_SEARCH_ENDPOINT, "")
        self.timeout = timeout
        self._cache: dict[str, str] = {}
        self._lock = threading.Lock()
        if not self.endpoint:
            raise ValueError(f"no search endpoint configured; set {ENV_SEARCH_ENDPOINT}")

    def resolve(self, pn_key: str) -> str:
        with self._lock:
            if pn_key in self._cache:
                return self._cache[pn_key]
        try:
            response = httpx.get(self.endpoint, params={"q": pn_key}, timeout=self.timeout)
            response.raise_for_status()
            url = response.json().get("url")
        except (httpx.HTTPError, ValueError) as exc:
            raise DispatchError(
                "PN_RESOLUTION_FAILED", f"search for {pn_key!r} failed: {exc}", pn_keys=[pn_key]
            ) from exc
        if not url:
            raise DispatchError(
                "PN_RESOLUTION_FAILED", f"search returned no image for {pn_key!r}", pn_keys=[pn_key]
            )
        with self._lock:
            self._cache[pn_key] = url
        return url
