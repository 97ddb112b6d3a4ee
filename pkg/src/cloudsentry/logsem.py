"""Log semantics: template mining, keyword abstraction, embedding, pooling.

Raw log lines mix a constant skeleton with volatile fields (IDs, addresses,
counters). A streaming similarity miner groups lines by skeleton, masking
volatile positions with ``<*>``; keyword abstraction replaces numbers, IPv4
addresses, and long hex identifiers with class placeholders. Structured
lines are embedded either by a remote embedding service (HTTP) or by a
deterministic local feature-hashing encoder, then mean-pooled into a
fixed-dimension context vector per window.

The fallback encoder's hash is FNV-1a 64-bit over UTF-8 bytes followed by
the splitmix64 finalizer for avalanche; coordinate and sign come from
disjoint bits of the mixed value. This is fixed and documented so encodings
are bit-identical across runs and platforms.
"""

from __future__ import annotations

import logging
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import requests

from .errors import (
    DimensionMismatchError,
    ServiceTimeoutError,
    ServiceUnavailableError,
)
from .rng import mix64

logger = logging.getLogger(__name__)

WILDCARD = "<*>"

SOURCE_REMOTE = "remote"
SOURCE_FALLBACK = "fallback"
SOURCE_EMPTY = "empty"

MODE_FALLBACK_ONLY = "fallback_only"
MODE_REMOTE_STRICT = "remote_strict"
MODE_REMOTE_WITH_FALLBACK = "remote_with_fallback"

DEFAULT_CONTEXT_DIM = 64
DEFAULT_SIMILARITY_THRESHOLD = 0.5


# --- template mining --------------------------------------------------------


@dataclass
class LogTemplate:
    """A mined log skeleton; volatile positions hold the wildcard token."""

    template_id: int
    tokens: list[str]
    match_count: int = 1

    def pattern(self) -> str:
        return " ".join(self.tokens)


class TemplateMiner:
    """Streaming fixed-similarity template miner, grouped by token count.

    A new line is compared against existing templates of equal length; the
    similarity is the fraction of equal tokens among the template's
    non-wildcard positions. The best match at or above the threshold absorbs
    the line (differing positions become wildcards); otherwise the line
    founds a new template. Single-writer: callers must serialize updates.
    """

    def __init__(self, similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD):
        if not (0.0 < similarity_threshold <= 1.0):
            raise ValueError("similarity_threshold must be in (0, 1]")
        self.similarity_threshold = similarity_threshold
        self.templates: list[LogTemplate] = []
        self._by_length: dict[int, list[int]] = {}

    def mine(self, line: str) -> int:
        """Assign ``line`` to a template, updating miner state; returns its id."""
        tokens = line.split()
        if not tokens:
            raise ValueError("cannot mine an empty line; skip blank lines upstream")
        best_id = -1
        best_score = -1.0
        for idx in self._by_length.get(len(tokens), ()):
            template = self.templates[idx]
            fixed = 0
            matched = 0
            for t_tok, l_tok in zip(template.tokens, tokens):
                if t_tok == WILDCARD:
                    continue
                fixed += 1
                if t_tok == l_tok:
                    matched += 1
            if fixed == 0:
                continue
            score = matched / fixed
            if score > best_score:
                best_score = score
                best_id = idx
        if best_id >= 0 and best_score >= self.similarity_threshold:
            template = self.templates[best_id]
            template.tokens = [
                t_tok if t_tok == l_tok or t_tok == WILDCARD else WILDCARD
                for t_tok, l_tok in zip(template.tokens, tokens)
            ]
            template.match_count += 1
            return template.template_id
        template_id = len(self.templates)
        self.templates.append(LogTemplate(template_id=template_id, tokens=list(tokens)))
        self._by_length.setdefault(len(tokens), []).append(template_id)
        return template_id

    def to_dict(self) -> dict:
        return {
            "similarity_threshold": self.similarity_threshold,
            "templates": [
                {"template_id": t.template_id, "tokens": list(t.tokens), "match_count": t.match_count}
                for t in self.templates
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TemplateMiner":
        miner = cls(similarity_threshold=float(data["similarity_threshold"]))
        for entry in data["templates"]:
            template = LogTemplate(
                template_id=int(entry["template_id"]),
                tokens=list(entry["tokens"]),
                match_count=int(entry["match_count"]),
            )
            if template.template_id != len(miner.templates):
                raise ValueError("template ids must be dense and ordered")
            miner.templates.append(template)
            miner._by_length.setdefault(len(template.tokens), []).append(template.template_id)
        return miner

    def copy(self) -> "TemplateMiner":
        return TemplateMiner.from_dict(self.to_dict())


# --- keyword abstraction ----------------------------------------------------

_IP_RE = re.compile(r"^\d{1,3}\.\d{1,3}\.\d{1,3}\.\d{1,3}$")
_NUM_RE = re.compile(r"^[+-]?\d+(\.\d+)?$")
_HEX_RE = re.compile(r"^(0x)?[0-9a-fA-F]{8,}$")

DEFAULT_ABSTRACTION_RULES: tuple[tuple[re.Pattern, str], ...] = (
    (_IP_RE, "<IP>"),
    (_NUM_RE, "<NUM>"),
    (_HEX_RE, "<HEX>"),
)


def abstract_keywords(
    line: str,
    rules: tuple[tuple[re.Pattern, str], ...] = DEFAULT_ABSTRACTION_RULES,
) -> list[str]:
    """Mask volatile tokens and lowercase the rest, deduplicating in order."""
    out: list[str] = []
    seen: set[str] = set()
    for token in line.split():
        for pattern, placeholder in rules:
            if pattern.match(token):
                token = placeholder
                break
        else:
            token = token.lower()
        if token not in seen:
            seen.add(token)
            out.append(token)
    return out


StructuredLine = tuple[int, tuple[str, ...]]


def structure_lines(lines, miner: TemplateMiner) -> list[StructuredLine]:
    """Mine and abstract each nonblank line into (template_id, keywords)."""
    structured: list[StructuredLine] = []
    for line in lines:
        if not line.strip():
            continue
        template_id = miner.mine(line)
        structured.append((template_id, tuple(abstract_keywords(line))))
    return structured


def structured_text(structured: StructuredLine, miner: TemplateMiner) -> str:
    """Serialize a structured line for the remote encoder."""
    template_id, keywords = structured
    return miner.templates[template_id].pattern() + " :: " + " ".join(keywords)


# --- deterministic fallback encoder ------------------------------------------


def hash64(text: str) -> int:
    """FNV-1a 64-bit over UTF-8 bytes, finalized with the splitmix64 mixer."""
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return mix64(h)


def encode_fallback(structured: list[StructuredLine], dim: int) -> np.ndarray:
    """Signed feature hashing of structured lines into an (n, dim) matrix.

    Each line hashes its template token plus every keyword token into one
    coordinate each (sign from the top bit, coordinate from the low bits),
    then scales by 1/sqrt(token count) so line norms are comparable.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    matrix = np.zeros((len(structured), dim), dtype=np.float64)
    for i, (template_id, keywords) in enumerate(structured):
        tokens = [f"tmpl:{template_id}"] + [f"kw:{kw}" for kw in keywords]
        row = matrix[i]
        for token in tokens:
            h = hash64(token)
            sign = 1.0 if (h >> 63) == 0 else -1.0
            row[h % dim] += sign
        row /= math.sqrt(len(tokens))
    return matrix


# --- pooling ------------------------------------------------------------------


@dataclass(frozen=True)
class SemanticContext:
    """Pooled fixed-dimension summary of a window's log content."""

    values: np.ndarray
    source: str


def pool_context(matrix: np.ndarray, k: int, source: str = SOURCE_FALLBACK) -> SemanticContext:
    """Mean-pool embedding rows, then truncate or zero-pad to ``k`` entries."""
    if matrix.ndim != 2:
        raise ValueError("embedding matrix must be 2-D")
    if matrix.shape[0] == 0:
        return SemanticContext(values=np.zeros(k), source=SOURCE_EMPTY)
    pooled = matrix.mean(axis=0)
    if pooled.shape[0] >= k:
        values = pooled[:k].copy()
    else:
        values = np.zeros(k)
        values[: pooled.shape[0]] = pooled
    return SemanticContext(values=values, source=source)


# --- remote embedding client ---------------------------------------------------


@dataclass(frozen=True)
class EmbedServiceConfig:
    """Connection and batching settings for the embedding service.

    Wire contract: POST ``{url}/v1/embed`` with body ``{"texts": [...]}``;
    response ``{"embeddings": [[...], ...], "dim": <int>}``. Non-200
    statuses are retried with exponential backoff, except 4xx which fail
    immediately.
    """

    url: str
    dim: int = DEFAULT_CONTEXT_DIM
    batch_size: int = 32
    max_attempts: int = 3
    backoff_base_s: float = 0.05
    connect_timeout_s: float = 2.0
    read_timeout_s: float = 10.0
    concurrency: int = 4


def _post_batch(
    session: requests.Session, config: EmbedServiceConfig, texts: list[str]
) -> np.ndarray:
    endpoint = config.url.rstrip("/") + "/v1/embed"
    last_error: Exception | None = None
    timed_out = False
    for attempt in range(config.max_attempts):
        if attempt > 0:
            time.sleep(config.backoff_base_s * (2 ** (attempt - 1)))
        try:
            response = session.post(
                endpoint,
                json={"texts": texts},
                timeout=(config.connect_timeout_s, config.read_timeout_s),
            )
        except requests.Timeout as exc:
            last_error, timed_out = exc, True
            continue
        except requests.RequestException as exc:
            last_error, timed_out = exc, False
            continue
        if 400 <= response.status_code < 500:
            raise ServiceUnavailableError(
                f"embedding service rejected the request: HTTP {response.status_code}"
            )
        if response.status_code != 200:
            last_error = ServiceUnavailableError(f"HTTP {response.status_code}")
            timed_out = False
            continue
        payload = response.json()
        dim = int(payload["dim"])
        if dim != config.dim:
            raise DimensionMismatchError(
                f"service reports dim={dim}, configured dim={config.dim}"
            )
        rows = payload["embeddings"]
        if len(rows) != len(texts) or any(len(r) != dim for r in rows):
            raise DimensionMismatchError("embedding row shape does not match request")
        return np.asarray(rows, dtype=np.float64)
    if timed_out:
        raise ServiceTimeoutError(
            f"embedding service timed out after {config.max_attempts} attempts"
        ) from last_error
    raise ServiceUnavailableError(
        f"embedding service unavailable after {config.max_attempts} attempts: {last_error}"
    ) from last_error


def encode_remote(texts: list[str], config: EmbedServiceConfig) -> np.ndarray:
    """Embed ``texts`` via the remote service, batched and order-preserving.

    Batches are issued with up to ``config.concurrency`` concurrent requests
    and reassembled in input order. Raises typed errors; never returns a
    partial matrix.
    """
    if not texts:
        raise ValueError("texts must be nonempty; pool_context handles empty windows")
    batches = [texts[i : i + config.batch_size] for i in range(0, len(texts), config.batch_size)]
    session = requests.Session()
    try:
        if len(batches) == 1:
            parts = [_post_batch(session, config, batches[0])]
        else:
            workers = max(1, min(config.concurrency, len(batches)))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(lambda b: _post_batch(session, config, b), batches))
    finally:
        session.close()
    return np.vstack(parts)


# --- window context assembly ---------------------------------------------------


@dataclass(frozen=True)
class ContextConfig:
    """How window log text becomes a context vector."""

    k: int = DEFAULT_CONTEXT_DIM
    fallback_dim: int = DEFAULT_CONTEXT_DIM
    mode: str = MODE_FALLBACK_ONLY
    service: EmbedServiceConfig | None = None
    similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD


def embed_structured_lines(
    structured: list[StructuredLine],
    miner: TemplateMiner,
    config: ContextConfig,
) -> tuple[np.ndarray, str]:
    """Embed structured lines per the configured mode; returns (matrix, source)."""
    if not structured:
        return np.zeros((0, config.fallback_dim)), SOURCE_EMPTY
    if config.mode == MODE_FALLBACK_ONLY:
        return encode_fallback(structured, config.fallback_dim), SOURCE_FALLBACK
    if config.service is None:
        raise ValueError(f"mode {config.mode!r} requires a service config")
    texts = [structured_text(s, miner) for s in structured]
    try:
        return encode_remote(texts, config.service), SOURCE_REMOTE
    except (ServiceUnavailableError, ServiceTimeoutError, DimensionMismatchError):
        if config.mode == MODE_REMOTE_STRICT:
            raise
        logger.warning("remote embedding failed; using local fallback encoder")
        return encode_fallback(structured, config.fallback_dim), SOURCE_FALLBACK


def window_context(
    structured: list[StructuredLine],
    miner: TemplateMiner,
    config: ContextConfig,
) -> SemanticContext:
    """Pool a window's structured log lines into its context vector."""
    matrix, source = embed_structured_lines(structured, miner, config)
    return pool_context(matrix, config.k, source)
