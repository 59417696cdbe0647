"""Clients for the external generative capabilities, plus deterministic mocks.

Five backend kinds exist: captioner (chat-completion wire format with one
image attachment), generator and conditioned_generator (minimal JSON job
protocols with polling), image_to_3d (same job protocol, returns mesh files),
and embedder. Setting ``endpoint = "mock"`` selects an offline implementation
that is a pure function of (inputs, mock_seed).

Credentials come from the environment (``S3DC_<KIND>_KEY``) and are scrubbed
from every error message this module raises.
"""

from __future__ import annotations

import base64
import hashlib
import io
import os
import random
import re
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import requests
from PIL import Image

from .edgemap import EdgeMap
from .errors import BackendError, DomainError
from .mesh_io import TexturedMesh, load_object
from .render import ViewImage

DESCRIBE_PROMPT = (
    "Describe this object in as much detail as possible so that it's possible "
    "to recreate it based only on your description. Focus only on the object "
    "itself and not the background. Describe the shape of the object, its "
    "orientation, its colors, patterns, features, feature sizes in a single "
    "paragraph. Describe the main general single object and NOT some parts as "
    "multiple objects."
)

SIMPLIFY_PROMPT = (
    "Reduce this description into the most important words. Only use lowercase "
    "letters. Restrict the response to this number of characters: "
)

BACKEND_KINDS = (
    "captioner",
    "generator",
    "conditioned_generator",
    "image_to_3d",
    "embedder",
)

_SLEEP = time.sleep  # patched in tests to avoid real backoff delays


@dataclass(frozen=True)
class SemanticDescriptor:
    """Clamped lowercase description with a character budget."""

    text: str
    char_budget: int

    def __post_init__(self):
        if self.char_budget < 1:
            raise DomainError("char_budget must be >= 1")
        if len(self.text) > self.char_budget:
            raise DomainError(
                f"text is {len(self.text)} chars, budget is {self.char_budget}"
            )
        if re.search(r"[^a-z ]", self.text):
            raise DomainError("descriptor text restricted to lowercase a-z and space")


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str
    backend_kind: str
    credential: str | None = None
    timeout: float = 60.0
    retries: int = 2
    mock_seed: int | None = None
    resolution: int = 256    # generator output size
    embed_dim: int = 512
    poll_interval: float = 1.0

    def __post_init__(self):
        if self.backend_kind not in BACKEND_KINDS:
            raise DomainError(f"unknown backend kind {self.backend_kind!r}")
        if self.retries < 0:
            raise DomainError("retries must be >= 0")
        if self.timeout <= 0:
            raise DomainError("timeout must be > 0")

    @property
    def is_mock(self) -> bool:
        return self.endpoint == "mock" or self.endpoint.startswith("mock:")


def credential_from_env(kind: str) -> str | None:
    return os.environ.get(f"S3DC_{kind.upper()}_KEY")


def mock_config(kind: str, seed: int = 0, resolution: int = 256) -> BackendConfig:
    return BackendConfig(
        endpoint="mock", backend_kind=kind, mock_seed=seed, resolution=resolution
    )


def _scrub(config: BackendConfig, message: str) -> str:
    if config.credential:
        message = message.replace(config.credential, "***")
    return message


def _headers(config: BackendConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if config.credential:
        headers["Authorization"] = f"Bearer {config.credential}"
    return headers


def _request(config: BackendConfig, method: str, url: str, body: dict | None = None):
    """One JSON request with exponential-backoff retries on transport/5xx failures."""
    delay = 1.0
    last = "no attempts made"
    for attempt in range(config.retries + 1):
        if attempt:
            _SLEEP(delay + random.uniform(0, 0.1 * delay))
            delay *= 2
        try:
            resp = requests.request(
                method, url, json=body, headers=_headers(config),
                timeout=config.timeout,
            )
        except requests.RequestException as exc:
            last = f"transport failure: {exc}"
            continue
        if resp.status_code >= 500:
            last = f"server error {resp.status_code}"
            continue
        if resp.status_code >= 400:
            raise BackendError(
                _scrub(config, f"{config.backend_kind} rejected request "
                               f"({resp.status_code}): {resp.text[:200]}")
            )
        try:
            return resp.json()
        except ValueError as exc:
            raise BackendError(
                _scrub(config, f"{config.backend_kind} returned non-JSON: {exc}")
            ) from exc
    raise BackendError(
        _scrub(config,
               f"{config.backend_kind} failed after {config.retries + 1} attempts "
               f"({last})")
    )


def encode_png(view: ViewImage) -> bytes:
    buf = io.BytesIO()
    if view.alpha is not None:
        rgba = np.dstack([view.pixels, (view.alpha * 255).astype(np.uint8)])
        Image.fromarray(rgba, mode="RGBA").save(buf, format="PNG")
    else:
        Image.fromarray(view.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _decode_image_b64(data: str, config: BackendConfig) -> ViewImage:
    try:
        with Image.open(io.BytesIO(base64.b64decode(data))) as img:
            pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except Exception as exc:
        raise BackendError(
            _scrub(config, f"{config.backend_kind} returned an undecodable image")
        ) from exc
    return ViewImage(pixels=pixels, camera_tag="external")


def _poll_job(config: BackendConfig, first: dict) -> dict:
    """Follow the job protocol: poll GET endpoint/<job_id> until done."""
    if "job_id" not in first:
        return first
    job_id = first["job_id"]
    deadline = time.monotonic() + config.timeout
    while True:
        status = _request(config, "GET", f"{config.endpoint.rstrip('/')}/{job_id}")
        state = status.get("status", "done")
        if state == "done":
            return status
        if state == "error":
            raise BackendError(
                _scrub(config, f"job {job_id} failed: {status.get('message', '')}")
            )
        if time.monotonic() >= deadline:
            raise BackendError(_scrub(config, f"job {job_id} timed out"))
        _SLEEP(config.poll_interval)


def _digest_seed(config: BackendConfig, *parts: bytes) -> int:
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
    return int.from_bytes(h.digest()[:8], "little") ^ (config.mock_seed or 0)


def _mock_words(seed: int) -> str:
    colors = ("red", "blue", "green", "gray", "brown", "golden", "white",
              "black", "orange", "purple")
    shapes = ("boxy", "rounded", "angular", "slender", "squat", "elongated",
              "compact", "faceted")
    nouns = ("figurine", "vessel", "creature", "structure", "ornament",
             "artifact", "model", "sculpture")
    details = ("smooth surfaces", "sharp corners", "a textured finish",
               "visible seams", "layered panels", "a matte coating",
               "engraved lines", "a glossy sheen")
    rng = random.Random(seed)
    return (
        f"a {rng.choice(shapes)} {rng.choice(colors)} {rng.choice(nouns)} with "
        f"{rng.choice(details)} and {rng.choice(details)}, rendered from six "
        f"fixed viewpoints against a plain background"
    )


def describe(composite: ViewImage, config: BackendConfig) -> str:
    """Free-form object description of the six-view composite."""
    if composite.camera_tag != "composite":
        raise DomainError("describe expects the six-view composite image")
    if config.is_mock:
        return _mock_words(_digest_seed(config, composite.pixels.tobytes()))
    payload = {
        "model": "default",
        "messages": [
            {
                "role": "user",
                "content": [
                    {"type": "text", "text": DESCRIBE_PROMPT},
                    {
                        "type": "image_url",
                        "image_url": {
                            "url": "data:image/png;base64,"
                            + base64.b64encode(encode_png(composite)).decode()
                        },
                    },
                ],
            }
        ],
    }
    data = _request(config, "POST", config.endpoint, payload)
    try:
        text = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise BackendError(
            _scrub(config, f"malformed chat completion response: {exc}")
        ) from exc
    if not text or not text.strip():
        raise BackendError(_scrub(config, "captioner returned an empty description"))
    return text


def filter_and_clamp(text: str, char_budget: int) -> str:
    """Lowercase, strip to a-z/space, collapse space runs, truncate to budget."""
    cleaned = re.sub(r"[^a-z ]", "", text.lower())
    cleaned = re.sub(r" +", " ", cleaned).strip()
    return cleaned[:char_budget]


def simplify_and_clamp(
    description: str, char_budget: int, config: BackendConfig
) -> SemanticDescriptor:
    """Ask the captioner to compress the description, then enforce the budget.

    The backend request is best-effort; the budget and charset are guaranteed
    locally no matter what comes back.
    """
    if char_budget < 1:
        raise DomainError("char_budget must be >= 1")
    if config.is_mock:
        # maximally soft backend: the local clamp below does all the work,
        # so the budget is hit exactly whenever the description is long enough
        raw = description
    else:
        payload = {
            "model": "default",
            "messages": [
                {
                    "role": "user",
                    "content": f"{SIMPLIFY_PROMPT}{char_budget}\n\n{description}",
                }
            ],
        }
        data = _request(config, "POST", config.endpoint, payload)
        try:
            raw = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(
                _scrub(config, f"malformed chat completion response: {exc}")
            ) from exc
    text = filter_and_clamp(raw, char_budget)
    if not text:
        raise BackendError("empty descriptor after filtering")
    return SemanticDescriptor(text=text, char_budget=char_budget)


def _mock_generate(config: BackendConfig, seed: int) -> np.ndarray:
    res = config.resolution
    rng = np.random.default_rng(seed)
    bg = rng.integers(60, 196, size=3)
    blob = (bg + 128) % 256
    pixels = np.empty((res, res, 3), dtype=np.uint8)
    pixels[:, :] = bg
    cy = res / 2 + rng.uniform(-res * 0.05, res * 0.05)
    cx = res / 2 + rng.uniform(-res * 0.05, res * 0.05)
    radius = rng.uniform(0.18, 0.26) * res
    yy, xx = np.mgrid[0:res, 0:res]
    pixels[(yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2] = blob
    return pixels


def generate_image(descriptor: SemanticDescriptor, config: BackendConfig) -> ViewImage:
    """Text-to-image through the job protocol (or the procedural mock)."""
    if config.is_mock:
        seed = _digest_seed(config, descriptor.text.encode())
        return ViewImage(pixels=_mock_generate(config, seed), camera_tag="external")
    first = _request(
        config, "POST", config.endpoint,
        {"prompt": descriptor.text, "resolution": config.resolution},
    )
    result = _poll_job(config, first)
    if "image_b64" not in result:
        raise BackendError(_scrub(config, "generator response carries no image"))
    return _decode_image_b64(result["image_b64"], config)


def generate_image_conditioned(
    descriptor: SemanticDescriptor, edges: EdgeMap, config: BackendConfig
) -> ViewImage:
    """Edge-conditioned generation; the mock draws the edge pixels verbatim
    (high contrast) so structural conditioning survives to downstream checks."""
    if config.is_mock:
        seed = _digest_seed(config, descriptor.text.encode())
        pixels = _mock_generate(config, seed)
        if edges.nnz:
            res = config.resolution
            coords = np.argwhere(edges.grid)
            rr = coords[:, 0] * res // edges.resolution
            cc = coords[:, 1] * res // edges.resolution
            ink = (
                np.array([0, 0, 0], dtype=np.uint8)
                if pixels[0, 0].astype(int).sum() > 382
                else np.array([255, 255, 255], dtype=np.uint8)
            )
            pixels[rr, cc] = ink
        return ViewImage(pixels=pixels, camera_tag="external")
    edge_png = encode_png(
        ViewImage(
            pixels=np.repeat(
                (edges.grid * 255).astype(np.uint8)[:, :, None], 3, axis=2
            ),
            camera_tag="external",
        )
    )
    first = _request(
        config, "POST", config.endpoint,
        {
            "prompt": descriptor.text,
            "resolution": config.resolution,
            "edges_b64": base64.b64encode(edge_png).decode(),
        },
    )
    result = _poll_job(config, first)
    if "image_b64" not in result:
        raise BackendError(_scrub(config, "generator response carries no image"))
    return _decode_image_b64(result["image_b64"], config)


def _runs(row: np.ndarray) -> list[tuple[int, int]]:
    """[start, stop) spans of consecutive True values."""
    idx = np.nonzero(row)[0]
    if not len(idx):
        return []
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    stops = np.concatenate([idx[breaks] + 1, [idx[-1] + 1]])
    return list(zip(starts.tolist(), stops.tolist()))


def _extrude_silhouette(image: ViewImage) -> TexturedMesh:
    """Fixed-depth prism over the alpha silhouette, texture front-projected."""
    mask = image.alpha
    h, w = mask.shape
    depth = 0.25 * max(h, w)
    verts: list[tuple[float, float, float]] = []
    uvs: list[tuple[float, float]] = []
    faces: list[tuple[int, int, int]] = []

    def quad(p0, p1, p2, p3):
        base = len(verts)
        for x, y, z in (p0, p1, p2, p3):
            verts.append((x, y, z))
            uvs.append((x / w, y / h))
        faces.append((base, base + 1, base + 2))
        faces.append((base, base + 2, base + 3))

    padded = np.pad(mask, 1)
    for r in range(h):
        y0, y1 = float(h - r - 1), float(h - r)
        for c0, c1 in _runs(mask[r]):
            x0, x1 = float(c0), float(c1)
            quad((x0, y0, 0), (x1, y0, 0), (x1, y1, 0), (x0, y1, 0))
            quad((x0, y0, depth), (x0, y1, depth), (x1, y1, depth), (x1, y0, depth))
            # side walls where the vertical neighbors are uncovered
            for c in range(c0, c1):
                if not padded[r, c + 1]:  # row above (image space)
                    quad((c, y1, 0), (c + 1, y1, 0), (c + 1, y1, depth), (c, y1, depth))
                if not padded[r + 2, c + 1]:  # row below
                    quad((c, y0, 0), (c, y0, depth), (c + 1, y0, depth), (c + 1, y0, 0))
            quad((x0, y0, 0), (x0, y1, 0), (x0, y1, depth), (x0, y0, depth))
            quad((x1, y0, 0), (x1, y0, depth), (x1, y1, depth), (x1, y1, 0))
    return TexturedMesh(
        vertices=np.asarray(verts, dtype=np.float64),
        triangles=np.asarray(faces, dtype=np.int64),
        uvs=np.asarray(uvs, dtype=np.float64),
        texture=image.pixels,
    )


def image_to_3d(image: ViewImage, config: BackendConfig) -> TexturedMesh:
    """Single-view mesh generation; the mock extrudes the masked silhouette."""
    if image.alpha is None:
        raise DomainError("image_to_3d expects a background-masked image")
    if config.is_mock:
        if not image.alpha.any():
            raise BackendError("mock image_to_3d: empty silhouette")
        return _extrude_silhouette(image)
    first = _request(
        config, "POST", config.endpoint,
        {"image_b64": base64.b64encode(encode_png(image)).decode()},
    )
    result = _poll_job(config, first)
    if "obj_b64" not in result:
        raise BackendError(_scrub(config, "image_to_3d response carries no mesh"))
    obj_text = base64.b64decode(result["obj_b64"])
    with tempfile.TemporaryDirectory() as tmp:
        obj_path = Path(tmp) / "mesh.obj"
        obj_path.write_bytes(obj_text)
        mesh = load_object(obj_path)
    if "texture_b64" in result and mesh.texture is None:
        with Image.open(io.BytesIO(base64.b64decode(result["texture_b64"]))) as img:
            mesh = replace(mesh, texture=np.asarray(img.convert("RGB"), dtype=np.uint8))
    return mesh


def embed_image(image: ViewImage, config: BackendConfig) -> np.ndarray:
    """Image embedding, L2-normalized client-side regardless of the backend."""
    if config.is_mock:
        rng = np.random.default_rng(_digest_seed(config, image.pixels.tobytes()))
        vec = rng.standard_normal(config.embed_dim)
    else:
        data = _request(
            config, "POST", config.endpoint,
            {"image_b64": base64.b64encode(encode_png(image)).decode()},
        )
        if "embedding" not in data:
            raise BackendError(_scrub(config, "embedder response carries no vector"))
        vec = np.asarray(data["embedding"], dtype=np.float64)
        if vec.shape != (config.embed_dim,):
            raise BackendError(
                _scrub(config,
                       f"embedding dimension {vec.shape} != configured "
                       f"({config.embed_dim},)")
            )
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise BackendError("embedder returned a zero vector")
    return vec / norm
