"""Client for all external model calls, plus a deterministic offline mock.

Every stage that talks to a model (slot assignment, validation, refinement,
judging) goes through :func:`send`: a JSON-over-HTTP POST with body
``{"prompt": ..., "task": ...}`` and reply ``{"text": ...}``. Which model
answers is the endpoint's business; the package never knows.

Endpoint strings of the form ``mock:<seed>`` select an offline mock whose
response is a pure function of the seed and the request bytes, so tests and
pipelines run without a network.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import requests

from .errors import GatewayError, GatewayTimeoutError, MalformedResponseError
from .prompts import ORIGINAL_ITEM_PREFIX, JUDGE_DIMENSIONS, VALIDATOR_CRITERIA

TASKS = ("slot_assign", "validate", "refine", "judge")

ENDPOINT_ENV = "NAVQA_LLM_ENDPOINT"
TIMEOUT_ENV = "NAVQA_LLM_TIMEOUT_S"

DEFAULT_TIMEOUT_S = 30.0
DEFAULT_MAX_RETRIES = 3
BACKOFF_BASE_S = 0.5


@dataclass(frozen=True)
class GatewayRequest:
    """One model call: which task it serves, the prompt, optional media."""

    task: str
    prompt: str
    attachments: tuple[str, ...] = ()
    max_retries: int = DEFAULT_MAX_RETRIES

    def __post_init__(self):
        if self.task not in TASKS:
            raise GatewayError(f"unknown task {self.task!r}, expected one of {TASKS}")
        if not self.prompt:
            raise GatewayError("prompt must be nonempty")
        if self.max_retries < 0:
            raise GatewayError("max_retries must be >= 0")


@dataclass(frozen=True)
class GatewayResponse:
    """Raw model text plus, once a task parser has accepted it, the result."""

    raw_text: str
    parsed: object | None = field(default=None, compare=False)


def send(
    endpoint: str,
    request: GatewayRequest,
    *,
    timeout_s: float | None = None,
    sleep: Callable[[float], None] | None = None,
) -> GatewayResponse:
    """Send one request, retrying transient failures with backoff.

    Makes ``max_retries + 1`` attempts. Connection errors, timeouts, and
    5xx replies count as transient; anything else fails immediately.

    Raises:
        GatewayTimeoutError: every attempt timed out.
        GatewayError: retries exhausted or a non-transient failure.
    """
    if not endpoint:
        raise GatewayError("no endpoint configured")
    if endpoint.startswith("mock:"):
        return _mock_response(endpoint[len("mock:"):], request)

    if sleep is None:
        sleep = time.sleep
    if timeout_s is None:
        timeout_s = float(os.environ.get(TIMEOUT_ENV, DEFAULT_TIMEOUT_S))

    body: dict[str, object] = {"prompt": request.prompt, "task": request.task}
    if request.attachments:
        body["attachments"] = list(request.attachments)

    attempts = request.max_retries + 1
    jitter = random.Random()
    last_error: Exception | None = None
    all_timeouts = True
    for attempt in range(attempts):
        try:
            reply = requests.post(endpoint, json=body, timeout=timeout_s)
        except requests.Timeout as exc:
            last_error = exc
        except requests.RequestException as exc:
            last_error = exc
            all_timeouts = False
        else:
            if reply.status_code >= 500:
                last_error = GatewayError(f"server error {reply.status_code}")
                all_timeouts = False
            elif reply.status_code != 200:
                raise GatewayError(
                    f"endpoint rejected the request: HTTP {reply.status_code}"
                )
            else:
                return GatewayResponse(raw_text=_extract_text(reply))
        if attempt + 1 < attempts:
            backoff = BACKOFF_BASE_S * (2**attempt) * jitter.uniform(0.8, 1.2)
            sleep(backoff)

    message = f"gave up after {attempts} attempts: {last_error}"
    if all_timeouts:
        raise GatewayTimeoutError(message)
    raise GatewayError(message)


def _extract_text(reply: requests.Response) -> str:
    try:
        payload = reply.json()
    except ValueError as exc:
        raise GatewayError(f"endpoint reply is not JSON: {exc}") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
        raise GatewayError('endpoint reply must be a JSON object with a "text" field')
    return payload["text"]


def endpoint_from_env() -> str:
    endpoint = os.environ.get(ENDPOINT_ENV, "")
    if not endpoint:
        raise GatewayError(f"set {ENDPOINT_ENV} or pass an endpoint explicitly")
    return endpoint


class GatewayClient:
    """A :func:`send` bound to one endpoint, for passing around pipelines."""

    def __init__(
        self,
        endpoint: str,
        *,
        timeout_s: float | None = None,
        sleep: Callable[[float], None] | None = None,
    ):
        if not endpoint:
            raise GatewayError("no endpoint configured")
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self._sleep = sleep

    @classmethod
    def from_env(cls) -> "GatewayClient":
        return cls(endpoint_from_env())

    def send(self, request: GatewayRequest) -> GatewayResponse:
        return send(
            self.endpoint, request, timeout_s=self.timeout_s, sleep=self._sleep
        )


# --- response parsing ----------------------------------------------------------


def parse_json_object(raw_text: str) -> dict[str, object]:
    """Parse model output as one strict JSON object.

    Code fences and any non-object payload are rejected; surrounding
    whitespace is tolerated. Never raises anything but MalformedResponseError.
    """
    text = raw_text.strip()
    if "```" in text:
        raise MalformedResponseError("code fences are not allowed")
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError, TypeError) as exc:
        raise MalformedResponseError(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedResponseError("expected a single JSON object")
    return obj


def parse_slot_response(raw_text: str) -> tuple[int, str]:
    """Extract (slot_id, reason) from a slot-assignment reply.

    Raises:
        MalformedResponseError: fenced, non-JSON, or wrongly typed reply.
    """
    obj = parse_json_object(raw_text)
    slot = obj.get("slot")
    reason = obj.get("reason")
    if isinstance(slot, bool) or not isinstance(slot, int):
        raise MalformedResponseError('"slot" must be an integer')
    if not isinstance(reason, str):
        raise MalformedResponseError('"reason" must be a string')
    return slot, reason


# --- offline mock --------------------------------------------------------------


def _mock_response(seed: str, request: GatewayRequest) -> GatewayResponse:
    """Deterministic canned reply: same seed + same request -> same bytes."""
    digest = hashlib.sha256(
        b"\x00".join(
            [
                b"navqa-mock",
                seed.encode("utf-8"),
                request.task.encode("utf-8"),
                request.prompt.encode("utf-8"),
                "\x1f".join(request.attachments).encode("utf-8"),
            ]
        )
    ).digest()
    rng = random.Random(int.from_bytes(digest[:16], "big"))
    if request.task == "slot_assign":
        text = _mock_slot_reply(rng, request.prompt)
    elif request.task == "validate":
        text = _mock_validate_reply(rng)
    elif request.task == "refine":
        text = _mock_refine_reply(request.prompt)
    else:
        text = _mock_judge_reply(rng, request.prompt)
    return GatewayResponse(raw_text=text)


def _mock_slot_reply(rng: random.Random, prompt: str) -> str:
    slots = re.findall(r"(?m)^Slot (\d+): (.*)$", prompt)
    if not slots:
        return json.dumps({"slot": 0, "reason": "no slot listing found"})
    empty = [int(sid) for sid, body in slots if body == "(empty)"]
    occupied = [int(sid) for sid, body in slots if body != "(empty)"]
    if not occupied:
        return json.dumps({"slot": 0, "reason": "starts the first storyline"})
    if occupied and rng.random() < 0.6:
        slot = rng.choice(occupied)
        reason = "continues this storyline"
    elif empty:
        slot = min(empty)
        reason = "starts a new storyline"
    else:
        slot = rng.choice(occupied)
        reason = "closest available storyline"
    return json.dumps({"slot": slot, "reason": reason})


_SCORE_NOTES = {0: "not satisfied", 1: "partly met", 2: "meets the bar"}


def _mock_validate_reply(rng: random.Random) -> str:
    report = {}
    for name in VALIDATOR_CRITERIA:
        score = rng.choices((0, 1, 2), weights=(1, 2, 5))[0]
        report[name] = {"score": score, "explanation": _SCORE_NOTES[score]}
    return json.dumps(report)


def _mock_refine_reply(prompt: str) -> str:
    for line in prompt.splitlines():
        if line.startswith(ORIGINAL_ITEM_PREFIX):
            return line[len(ORIGINAL_ITEM_PREFIX):]
    return "{}"


def _mock_judge_reply(rng: random.Random, prompt: str) -> str:
    gold = _prompt_field(prompt, "Reference answer: ")
    predicted = _prompt_field(prompt, "Candidate answer: ")
    if gold is not None and gold == predicted:
        return json.dumps({name: 5 for name in JUDGE_DIMENSIONS})
    return json.dumps({name: rng.randint(0, 5) for name in JUDGE_DIMENSIONS})


def _prompt_field(prompt: str, prefix: str) -> str | None:
    for line in prompt.splitlines():
        if line.startswith(prefix):
            return line[len(prefix):]
    return None
