"""HTTP plumbing shared by the embedding and LM clients."""

from __future__ import annotations

import time
from typing import Any

import requests

from .errors import BackendError, ProtocolError

DEFAULT_MAX_ATTEMPTS = 4
DEFAULT_BACKOFF_SECONDS = 0.25
DEFAULT_TIMEOUT_SECONDS = 10.0


def post_json(
    url: str,
    payload: dict[str, Any],
    *,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    backoff: float = DEFAULT_BACKOFF_SECONDS,
    timeout: float = DEFAULT_TIMEOUT_SECONDS,
    session: Any = None,
) -> dict[str, Any]:
    """POST a JSON payload and decode a JSON object from the response.

    Connection failures and 5xx statuses count as transient and are retried
    with exponential backoff (backoff, 2*backoff, ...) up to `max_attempts`
    total attempts. Any other non-200 status fails immediately. A 200 with a
    body that is not a JSON object raises ProtocolError.
    """
    http = session if session is not None else requests
    for attempt in range(1, max_attempts + 1):
        try:
            resp = http.post(url, json=payload, timeout=timeout)
        except requests.RequestException as exc:
            if attempt == max_attempts:
                raise BackendError(
                    f"POST {url} failed after {attempt} attempts: {exc}",
                    attempts=attempt,
                ) from exc
            time.sleep(backoff * 2 ** (attempt - 1))
            continue
        if resp.status_code == 200:
            try:
                data = resp.json()
            except ValueError as exc:
                raise ProtocolError(f"POST {url}: response body is not valid JSON") from exc
            if not isinstance(data, dict):
                raise ProtocolError(
                    f"POST {url}: expected a JSON object, got {type(data).__name__}"
                )
            return data
        if resp.status_code >= 500 and attempt < max_attempts:
            time.sleep(backoff * 2 ** (attempt - 1))
            continue
        raise BackendError(
            f"POST {url} returned status {resp.status_code} "
            f"(attempt {attempt}/{max_attempts})",
            attempts=attempt,
            status=resp.status_code,
        )
    raise AssertionError("unreachable")
