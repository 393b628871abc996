"""Client for the external contextual-encoder service.

The encoder is an out-of-process HTTP service speaking one json route:

    request:  {"mode": "masked"|"dropout"|"encode", "tokens": [...],
               "target_index": int, "top_k": int, "dropout_p": float}
    candidates response: {"candidates": [{"token": str, "score": float}, ...]}
    encode response:     {"vectors": [[...], ...], "attention_to_target": [...]}

The service owns all word-piece handling: encode responses must align 1:1
with the input tokens (out-of-vocabulary word-pieces collapsed into one
position), so nothing downstream ever sees sub-word fragments except as
"##"-prefixed candidate strings, which sanitize() removes.
"""

from __future__ import annotations

import json
import socket
import urllib.error
import urllib.request

import numpy as np

from .errors import EncoderConnectionError, EncoderProtocolError, EncoderTimeoutError

DEFAULT_TIMEOUT = 10.0


class EncoderClient:
    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT):
        self.endpoint = endpoint
        self.timeout = timeout

    def _post(self, payload: dict) -> dict:
        body = json.dumps(payload).encode("utf-8")
        request = urllib.request.Request(self.endpoint, data=body, method="POST",
                                         headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                raw = response.read()
        except urllib.error.HTTPError as exc:
            raise EncoderProtocolError(f"encoder returned HTTP {exc.code}") from exc
        except socket.timeout as exc:
            raise EncoderTimeoutError(f"encoder timed out after {self.timeout}s") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, socket.timeout):
                raise EncoderTimeoutError(f"encoder timed out after {self.timeout}s") from exc
            raise EncoderConnectionError(f"cannot reach encoder at {self.endpoint}: "
                                         f"{exc.reason}") from exc
        except OSError as exc:
            raise EncoderConnectionError(f"cannot reach encoder at {self.endpoint}: {exc}") from exc
        try:
            return json.loads(raw.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise EncoderProtocolError(f"encoder sent invalid json: {exc}") from exc

    def candidates(self, tokens, target_index: int, mode: str, top_k: int,
                   dropout_p: float) -> list[tuple[str, float]]:
        if mode not in ("masked", "dropout"):
            raise EncoderProtocolError(f"unknown candidate mode {mode!r}")
        payload = {"mode": mode, "tokens": list(tokens), "target_index": target_index,
                   "top_k": top_k, "dropout_p": dropout_p}
        answer = self._post(payload)
        items = answer.get("candidates")
        if not isinstance(items, list):
            raise EncoderProtocolError("candidate response missing 'candidates' list")
        out = []
        for item in items:
            try:
                out.append((str(item["token"]), float(item["score"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise EncoderProtocolError(f"malformed candidate entry {item!r}") from exc
        return out

    def encode(self, tokens, target_index: int):
        payload = {"mode": "encode", "tokens": list(tokens),
                   "target_index": target_index, "top_k": 0, "dropout_p": 0.0}
        answer = self._post(payload)
        try:
            vectors = np.array(answer["vectors"], dtype=np.float64)
            attention = np.array(answer["attention_to_target"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise EncoderProtocolError(f"malformed encode response: {exc}") from exc
        if vectors.ndim != 2 or len(vectors) != len(tokens) or len(attention) != len(tokens):
            raise EncoderProtocolError(
                f"encode response arrays do not align with {len(tokens)} input tokens "
                f"(word-pieces must be collapsed server-side)")
        return vectors, attention
