"""HTTP client for the diversification service.

With no base URL the service app runs in-process (same filesystem, no
network); with a URL the same requests go to a remote server. Either way the
CLI speaks to the core package only through the service surface.
"""

from __future__ import annotations

import httpx


class ServiceClient:
    def __init__(self, base_url: str | None = None, timeout: float | None = None):
        if base_url:
            self._client = httpx.Client(base_url=base_url, timeout=timeout)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # starlette deprecation chatter
                from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app(), raise_server_exceptions=False)

    def post(self, path: str, payload: dict) -> httpx.Response:
        return self._client.post(path, json=payload)

    def get(self, path: str) -> httpx.Response:
        return self._client.get(path)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
