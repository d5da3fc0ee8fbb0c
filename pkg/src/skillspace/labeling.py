"""Pick the tasks that characterize each factor and ask a text endpoint to
name the factors."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field

import numpy as np

from .errors import ResponseParseError, TransportError, ValidationError
from .paf import FactorModel, loading_zscores

log = logging.getLogger(__name__)

FALLBACK_COUNT = 3


@dataclass(frozen=True)
class FactorLabelInput:
    factor: int
    positive: tuple[tuple[str, float], ...]
    negative: tuple[tuple[str, float], ...]
    z_min: float
    fallback: bool = False

    @property
    def task_ids(self) -> list[str]:
        return [t for t, _ in self.positive + self.negative]


def diagnostic_tasks(fm: FactorModel, factor: int, z_min: float = 1.0) -> FactorLabelInput:
    """Tasks whose |loading| z-score on ``factor`` (0-based) is at least
    ``z_min``, split by loading sign and sorted by |loading|.

    When no task qualifies, the three largest |loadings| are used instead.
    """
    if not 0 <= factor < fm.n_factors:
        raise ValidationError(f"factor index {factor} out of range for {fm.n_factors} factors")
    col = fm.loadings[:, factor]
    zs = loading_zscores(fm.loadings)[:, factor]
    chosen = np.flatnonzero(zs >= z_min)
    fallback = chosen.size == 0
    if fallback:
        log.warning("factor %d: no task reaches z >= %g; using top %d loadings", factor + 1, z_min, FALLBACK_COUNT)
        chosen = np.argsort(-np.abs(col), kind="stable")[:FALLBACK_COUNT]
    chosen = sorted(chosen.tolist(), key=lambda j: (-abs(col[j]), j))
    pos = tuple((fm.task_ids[j], float(col[j])) for j in chosen if col[j] >= 0)
    neg = tuple((fm.task_ids[j], float(col[j])) for j in chosen if col[j] < 0)
    return FactorLabelInput(factor + 1, pos, neg, z_min, fallback)


def load_descriptions(path) -> dict:
    """Read a ``task_id,description`` CSV (header row optional)."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for n, row in enumerate(csv.reader(fh), 1):
            if not row or (n == 1 and [c.strip().lower() for c in row[:2]] == ["task_id", "description"]):
                continue
            if len(row) < 2:
                raise ValidationError(f"{path}: row {n} needs a task id and a description")
            out[row[0].strip()] = ",".join(row[1:]).strip()
    return out


def build_naming_prompt(inputs, descriptions: dict) -> str:
    """Deterministic prompt asking for one short skill name per factor."""
    inputs = list(inputs)
    missing = sorted({t for inp in inputs for t in inp.task_ids if t not in descriptions})
    if missing:
        raise ValidationError(f"no description for task(s): {', '.join(missing)}")
    lines = [
        "Each block below describes one latent ability inferred from language-model benchmark results.",
        "Tasks under 'high' depend strongly on the ability; tasks under 'low' depend on it in the opposite direction.",
        "Numbers in parentheses are factor loadings.",
        f"Reply with exactly {len(inputs)} lines, one per factor in the order given.",
        "Each line is a concise skill name (two to five words) distinct from the other names.",
        "",
    ]
    for inp in inputs:
        lines.append(f"Factor {inp.factor}")
        lines.append("high:")
        lines.extend(f"- {t} ({v:+.2f}): {descriptions[t]}" for t, v in inp.positive)
        if inp.negative:
            lines.append("low:")
            lines.extend(f"- {t} ({v:+.2f}): {descriptions[t]}" for t, v in inp.negative)
        lines.append("")
    return "\n".join(lines)


@dataclass(frozen=True)
class EndpointConfig:
    """A plain text-in, text-out HTTP endpoint.

    The prompt is POSTed as ``{"prompt": ...}`` and the reply is read from
    the ``text`` field of a JSON body, or taken verbatim for plain text.
    """

    url: str | None = None
    token_env: str | None = None
    timeout: float = 30.0
    retries: int = 2
    backoff: float = 1.0
    headers: dict = field(default_factory=dict)

    @property
    def offline(self) -> bool:
        return not self.url


def placeholder_labels(n: int) -> list[str]:
    return [f"factor-{c + 1}" for c in range(n)]


def parse_labels(payload: str, n: int) -> list[str]:
    labels = [ln.strip().lstrip("-*0123456789.) ").strip() for ln in payload.splitlines()]
    labels = [ln for ln in labels if ln]
    if len(labels) != n:
        raise ResponseParseError(f"expected {n} labels, got {len(labels)}", payload=payload)
    return labels


def _post(cfg: EndpointConfig, prompt: str) -> str:
    headers = {"Content-Type": "application/json", **cfg.headers}
    if cfg.token_env:
        token = os.environ.get(cfg.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
    req = urllib.request.Request(cfg.url, data=json.dumps({"prompt": prompt}).encode(), headers=headers)
    with urllib.request.urlopen(req, timeout=cfg.timeout) as resp:
        body = resp.read().decode("utf-8")
        kind = resp.headers.get("Content-Type", "")
    if "json" in kind:
        try:
            return str(json.loads(body)["text"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ResponseParseError(f"malformed JSON reply: {exc}", payload=body) from None
    return body


def name_factors(prompt: str, n_factors: int, cfg: EndpointConfig | None = None, send=None) -> list[str]:
    """One label per factor.

    Offline configs return placeholders. ``send`` replaces the HTTP call
    (``send(prompt) -> str``) and is retried the same way.
    """
    cfg = cfg or EndpointConfig()
    if send is None:
        if cfg.offline:
            return placeholder_labels(n_factors)
        send = lambda p: _post(cfg, p)  # noqa: E731
    attempts = 0
    while True:
        attempts += 1
        try:
            reply = send(prompt)
            break
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            if attempts > cfg.retries:
                raise TransportError(f"endpoint failed after {attempts} attempts: {exc}", attempts=attempts) from exc
            log.warning("endpoint attempt %d failed: %s", attempts, exc)
            time.sleep(cfg.backoff * attempts)
    return parse_labels(reply, n_factors)
