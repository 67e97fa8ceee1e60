"""Populate concept banks from an OpenAI-compatible chat-completions endpoint.

Concepts are requested in rounds. Each round's prompt lists everything
collected so far; responses are bullet lists, post-processed to drop
case-insensitive duplicates, phrases containing the class name and phrases
longer than five words. A scripted client stands in for the endpoint in
offline runs and tests.
"""

import base64
import logging
import mimetypes
import os
import time
import warnings
from dataclasses import dataclass

import requests

from .errors import CountMismatch, DimMismatch, HttpError, ParseError, StallLimit, ValidationError
from .explainer import ConceptBank, ConceptEntry
from .modelio import read_features

log = logging.getLogger(__name__)

API_KEY_ENV = ("TEXTINFLUENCE_API_KEY", "OPENAI_API_KEY")
STALL_ROUNDS = 3
MAX_WORDS = 5

_GUIDELINES = """\
Important guidelines for generating visual concepts:
1. {first}
2. Include both OBJECT features (e.g., shape, color, parts) AND CONTEXT features (e.g., background, environment, setting).
3. Keep concepts short and specific (1-3 words).
4. DO NOT include class names or object names directly.
"""

LLM_TEMPLATE = _GUIDELINES.format(
    first="Generate GENERAL concepts that can apply to many different photos of the same object type.") + """
Q: What are useful visual features for distinguishing a lemur in a photo?
A: There are several useful visual features to tell there is a lemur in a photo:
- long tail
- large eyes
- gray fur
- trees
- branches
- forest

Q: What are useful features for distinguishing a {class_name} in a photo?
Already generated concepts (DO NOT repeat these): {existing_concepts}.
A: There are several useful visual features to tell there is a {class_name} in a photo. Generate approximately {batch_size} visual concepts to provide comprehensive coverage:"""

VLM_TEMPLATE = _GUIDELINES.format(
    first="Generate DETAILED and SPECIFIC concepts that can apply to this image.") + """
Examples:
Q: Look at this image carefully. Based on what you can actually see in the image, identify useful visual features that help distinguish this as a koi fish.
A: There are several useful visual features to tell there is a koi fish in a photo:
- bright orange scales
- curved tail fin
- spotted pattern
- long body
- pointed snout
- water surface

Q: Look at this image carefully. Based on what you can actually see in the image, identify useful visual features that help distinguish this as a {class_name}.
Already generated concepts (DO NOT repeat these): {existing_concepts}.
A: There are several useful visual features to tell there is a {class_name} in a photo. Generate approximately {batch_size} visual concepts to provide comprehensive coverage:"""


@dataclass
class GenConfig:
    endpoint_url: str
    api_key: str = ""
    model_name: str = "gpt-3.5-turbo"
    llm_target_count: int = 100
    vlm_target_count: int = 30
    batch_size: int = 10
    max_retries: int = 3
    timeout: float = 60.0
    backoff: float = 1.0

    def __post_init__(self):
        if not self.endpoint_url:
            raise ValidationError("endpoint_url must be nonempty")
        if min(self.llm_target_count, self.vlm_target_count, self.batch_size) < 1:
            raise ValidationError("target counts and batch size must be at least 1")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be nonnegative")

    @property
    def completions_url(self):
        url = self.endpoint_url.rstrip("/")
        if url.endswith("/chat/completions"):
            return url
        if url.endswith("/v1"):
            return url + "/chat/completions"
        return url + "/v1/chat/completions"

    def __repr__(self):
        # keep the key out of logs and tracebacks
        return (f"GenConfig(endpoint_url={self.endpoint_url!r}, model_name={self.model_name!r}, "
                f"llm_target_count={self.llm_target_count}, vlm_target_count={self.vlm_target_count})")


def api_key_from_env():
    for name in API_KEY_ENV:
        if os.environ.get(name):
            return os.environ[name]
    return ""


def render_prompt(class_name, existing, mode="llm", batch_size=10):
    if not class_name:
        raise ValidationError("class_name must be nonempty")
    if mode == "llm":
        template = LLM_TEMPLATE
    elif mode == "vlm":
        template = VLM_TEMPLATE
    else:
        raise ValidationError(f"unknown prompt mode {mode!r}")
    existing_str = ", ".join(existing) if existing else "none"
    return template.format(class_name=class_name, existing_concepts=existing_str,
                           batch_size=batch_size)


class TransientError(Exception):
    """A request failure worth retrying (5xx, 429, connection problems)."""


class ChatClient:
    """Minimal synchronous client for ``/v1/chat/completions``."""

    def __init__(self, cfg, session=None):
        self.cfg = cfg
        self.session = session or requests.Session()
        self.requests_made = 0

    def complete(self, prompt, image_ref=None):
        content = prompt
        if image_ref is not None:
            content = [{"type": "text", "text": prompt},
                       {"type": "image_url", "image_url": {"url": _data_url(image_ref)}}]
        body = {"model": self.cfg.model_name,
                "messages": [{"role": "user", "content": content}]}
        headers = {"Content-Type": "application/json"}
        if self.cfg.api_key:
            headers["Authorization"] = f"Bearer {self.cfg.api_key}"
        self.requests_made += 1
        try:
            resp = self.session.post(self.cfg.completions_url, json=body, headers=headers,
                                     timeout=self.cfg.timeout)
        except requests.RequestException as exc:
            raise TransientError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise HttpError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ParseError(f"malformed completion response: {exc}") from exc


class ScriptedClient:
    """Replays canned responses in order.

    Script entries are response strings, or ``{"error": status}`` to simulate
    a failed request. Once exhausted every call returns an empty response.
    """

    def __init__(self, script):
        self.script = list(script)
        self.requests_made = 0
        self.prompts = []

    def complete(self, prompt, image_ref=None):
        self.prompts.append(prompt)
        i = self.requests_made
        self.requests_made += 1
        if i >= len(self.script):
            return ""
        item = self.script[i]
        if isinstance(item, dict):
            status = int(item.get("error", 500))
            if status == 429 or status >= 500:
                raise TransientError(f"HTTP {status} (scripted)")
            raise HttpError(f"HTTP {status} (scripted)")
        return str(item)


def _data_url(image_ref):
    mime = mimetypes.guess_type(str(image_ref))[0] or "image/png"
    with open(image_ref, "rb") as fh:
        return f"data:{mime};base64," + base64.b64encode(fh.read()).decode("ascii")


def request_with_retries(client, prompt, image_ref, max_retries, backoff):
    for attempt in range(max_retries + 1):
        try:
            return client.complete(prompt, image_ref)
        except TransientError as exc:
            if attempt == max_retries:
                raise HttpError(f"giving up after {attempt + 1} attempts: {exc}") from exc
            wait = backoff * 2 ** attempt
            log.warning("request failed (%s); retrying in %.2fs", exc, wait)
            if wait > 0:
                time.sleep(wait)


def parse_bullets(content):
    """Phrases from ``- phrase`` lines (``*`` and ``•`` bullets also accepted)."""
    out = []
    for line in (content or "").splitlines():
        line = line.strip()
        if line[:1] in ("-", "*", "•"):
            phrase = line[1:].strip().rstrip(".").strip()
            if phrase:
                out.append(phrase)
    if not out:
        raise ParseError("response contains no bullet lines")
    return out


def postprocess(phrases, class_name, seen):
    """Filter one response; ``seen`` holds case-folded texts kept so far and is updated."""
    cls = class_name.casefold()
    kept = []
    for p in phrases:
        key = p.casefold()
        if key in seen:
            continue
        if cls in key:
            log.info("dropping %r: contains the class name", p)
            continue
        if len(p.split()) > MAX_WORDS:
            log.info("dropping %r: longer than %d words", p, MAX_WORDS)
            continue
        seen.add(key)
        kept.append(p)
    return kept


def generate_concepts(cfg, class_name, image_ref=None, client=None, modes=("llm", "vlm")):
    """Run the generation rounds; returns ``(text, source)`` pairs in acquisition order."""
    client = client or ChatClient(cfg)
    targets = {"llm": cfg.llm_target_count, "vlm": cfg.vlm_target_count}
    concepts = []
    seen = set()
    for mode in modes:
        target = targets[mode]
        got = 0
        empty_rounds = 0
        while got < target:
            prompt = render_prompt(class_name, [t for t, _ in concepts], mode, cfg.batch_size)
            image = image_ref if mode == "vlm" else None
            try:
                content = request_with_retries(client, prompt, image, cfg.max_retries, cfg.backoff)
                new = postprocess(parse_bullets(content), class_name, seen)
            except ParseError as exc:
                log.warning("skipping response: %s", exc)
                new = []
            new = new[:target - got]
            if not new:
                empty_rounds += 1
                if empty_rounds >= STALL_ROUNDS:
                    warnings.warn(StallLimit(
                        f"{mode}: stopped after {STALL_ROUNDS} rounds without new concepts "
                        f"({got}/{target} collected)"))
                    break
                continue
            empty_rounds = 0
            concepts.extend((t, mode) for t in new)
            got += len(new)
    return concepts


def generate_bank(cfg, class_name, image_ref=None, client=None, modes=("llm", "vlm")):
    return [t for t, _ in generate_concepts(cfg, class_name, image_ref, client, modes)]


def attach_embeddings(texts, embedding_file, sources=None, class_label="", sample_id=None,
                      metadata=None, dim=None):
    """Pair texts with rows of an FTM1 embedding file; embeddings are normalized.

    ``dim``, when given, is the expected embedding width (the aligner's
    output dimension).
    """
    E = read_features(embedding_file) if isinstance(embedding_file, (str, os.PathLike)) \
        else embedding_file
    if dim is not None and E.shape[1] != dim:
        raise DimMismatch(f"embeddings have width {E.shape[1]}, expected {dim}")
    if E.shape[0] != len(texts):
        raise CountMismatch(f"{len(texts)} texts but {E.shape[0]} embedding rows")
    sources = sources or ["manual"] * len(texts)
    entries = [ConceptEntry(t, E[i], s) for i, (t, s) in enumerate(zip(texts, sources))]
    return ConceptBank(entries, class_label, sample_id, metadata or {})
