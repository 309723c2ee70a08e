"""Field compression: RGB mapping, patch vector quantization, reconstruction.

A snapshot is min-max normalized per channel onto R=u, G=v, B=p bytes,
cut into non-overlapping square patches, and each patch is replaced by the
index of its nearest codebook entry. A 256x256 field with 16-pixel patches
therefore becomes exactly 256 tokens.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .core import FieldLangError, FieldSnapshot, GridSpec

_FCB_MAGIC = b"FCB1"
_FCB_HEADER = struct.Struct("<4sIIQ")  # magic, entry count, patch size, seed


class CodebookFormatError(FieldLangError):
    """An FCB1 codebook file is malformed."""


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5)


@dataclass(frozen=True)
class NormMeta:
    """Per-channel min/max used by the linear byte mapping (needed to invert it)."""

    u_min: float
    u_max: float
    v_min: float
    v_max: float
    p_min: float
    p_max: float

    def __post_init__(self):
        for lo, hi, name in (
            (self.u_min, self.u_max, "u"),
            (self.v_min, self.v_max, "v"),
            (self.p_min, self.p_max, "p"),
        ):
            if hi < lo:
                raise ValueError(f"channel {name}: max {hi} < min {lo}")

    def bounds(self, name: str) -> tuple[float, float]:
        return {
            "u": (self.u_min, self.u_max),
            "v": (self.v_min, self.v_max),
            "p": (self.p_min, self.p_max),
        }[name]

    def to_dict(self) -> dict:
        return {
            "u": [self.u_min, self.u_max],
            "v": [self.v_min, self.v_max],
            "p": [self.p_min, self.p_max],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormMeta":
        return cls(
            u_min=float(d["u"][0]),
            u_max=float(d["u"][1]),
            v_min=float(d["v"][0]),
            v_max=float(d["v"][1]),
            p_min=float(d["p"][0]),
            p_max=float(d["p"][1]),
        )


@dataclass(frozen=True)
class RgbFieldImage:
    """8-bit RGB pixels (H, W, 3) plus the normalization needed to invert them."""

    pixels: np.ndarray
    meta: NormMeta

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.uint8)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValueError(f"pixels must be (H, W, 3), got {pixels.shape}")
        object.__setattr__(self, "pixels", pixels)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Codebook:
    """Learned VQ dictionary: K entries of flattened s x s x 3 byte-scaled patches."""

    entries: np.ndarray
    patch_size: int
    seed: int
    inertia_history: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2:
            raise ValueError("entries must be a (K, s*s*3) matrix")
        if entries.shape[0] < 2:
            raise ValueError(f"codebook needs at least 2 entries, got {entries.shape[0]}")
        if entries.shape[1] != 3 * self.patch_size**2:
            raise ValueError(
                f"entry length {entries.shape[1]} does not match patch size {self.patch_size}"
            )
        if not np.all(np.isfinite(entries)):
            raise ValueError("codebook entries must be finite")
        object.__setattr__(self, "entries", entries)

    @property
    def entry_count(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class TokenSequence:
    """Ordered codebook indices for the patches of one image, row-major."""

    tokens: np.ndarray
    patch_rows: int
    patch_cols: int

    def __post_init__(self):
        tokens = np.asarray(self.tokens, dtype=np.int64)
        if tokens.ndim != 1 or tokens.size != self.patch_rows * self.patch_cols:
            raise ValueError(
                f"token count {tokens.size} does not match patch grid "
                f"{self.patch_rows}x{self.patch_cols}"
            )
        object.__setattr__(self, "tokens", tokens)

    def __len__(self) -> int:
        return int(self.tokens.size)

    def to_json(self) -> str:
        return json.dumps([int(t) for t in self.tokens])


@dataclass(frozen=True)
class CompressionStats:
    """Size accounting and per-channel reconstruction error for one field."""

    scalar_count: int
    token_count: int
    reduction: float
    reduction_per_scalar: float
    rmse_u: float
    rmse_v: float
    rmse_p: float

    def to_dict(self) -> dict:
        return {
            "scalar_count": self.scalar_count,
            "token_count": self.token_count,
            "reduction": self.reduction,
            "reduction_per_scalar": self.reduction_per_scalar,
            "rmse_u": self.rmse_u,
            "rmse_v": self.rmse_v,
            "rmse_p": self.rmse_p,
        }


def to_rgb(snapshot: FieldSnapshot) -> RgbFieldImage:
    """Map u, v, p onto R, G, B via per-channel min-max normalization.

    byte = round(255 * (c - min) / (max - min)), rounding half up; a
    constant channel maps to byte 0 and reconstructs from the recorded min.
    """
    planes = []
    bounds = []
    for arr in (snapshot.u, snapshot.v, snapshot.p):
        lo = float(arr.min())
        hi = float(arr.max())
        bounds.extend([lo, hi])
        if hi == lo:
            planes.append(np.zeros(arr.shape, dtype=np.uint8))
        else:
            scaled = _round_half_up(255.0 * (arr - lo) / (hi - lo))
            planes.append(np.clip(scaled, 0, 255).astype(np.uint8))
    meta = NormMeta(*bounds)
    return RgbFieldImage(pixels=np.stack(planes, axis=-1), meta=meta)


def from_rgb(image: RgbFieldImage, grid: Optional[GridSpec] = None) -> FieldSnapshot:
    """Invert :func:`to_rgb` up to quantization: c = min + byte/255 * (max - min)."""
    if grid is None:
        grid = GridSpec(width=image.width, height=image.height)
    channels = []
    for idx, name in enumerate(("u", "v", "p")):
        lo, hi = image.meta.bounds(name)
        plane = image.pixels[:, :, idx].astype(np.float64)
        if hi == lo:
            channels.append(np.full(plane.shape, lo))
        else:
            channels.append(lo + plane / 255.0 * (hi - lo))
    return FieldSnapshot(grid=grid, u=channels[0], v=channels[1], p=channels[2])


def extract_patches(image: RgbFieldImage, patch_size: int) -> np.ndarray:
    """Cut the image into non-overlapping patches, row-major patch order.

    Each patch flattens to length s*s*3 with pixels row-major and the
    channel index varying fastest.
    """
    s = patch_size
    h, w = image.height, image.width
    if s <= 0 or h % s != 0 or w % s != 0:
        raise ValueError(f"patch size {s} does not divide image dimensions {w}x{h}")
    arr = image.pixels.astype(np.float64)
    patches = (
        arr.reshape(h // s, s, w // s, s, 3)
        .transpose(0, 2, 1, 3, 4)
        .reshape((h // s) * (w // s), s * s * 3)
    )
    return patches


def assemble_patches(
    patches: np.ndarray, patch_rows: int, patch_cols: int, patch_size: int, meta: NormMeta
) -> RgbFieldImage:
    """Inverse of :func:`extract_patches`; patch values are byte-rounded."""
    s = patch_size
    arr = (
        patches.reshape(patch_rows, patch_cols, s, s, 3)
        .transpose(0, 2, 1, 3, 4)
        .reshape(patch_rows * s, patch_cols * s, 3)
    )
    bytes_arr = np.clip(_round_half_up(arr), 0, 255).astype(np.uint8)
    return RgbFieldImage(pixels=bytes_arr, meta=meta)


def _pairwise_sq_dist(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    return np.maximum(d, 0.0)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Standard k-means++ seeding: squared-distance-weighted point draws."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    sq_norms = (points * points).sum(axis=1)

    def dist_sq_to(center: np.ndarray) -> np.ndarray:
        return np.maximum(sq_norms - 2.0 * (points @ center) + (center * center).sum(), 0.0)

    first = int(rng.integers(n))
    centers[0] = points[first]
    d2 = dist_sq_to(centers[0])
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[i] = points[idx]
        d2 = np.minimum(d2, dist_sq_to(centers[i]))
    return centers


def train_codebook(
    patches: np.ndarray,
    entry_count: int,
    seed: int,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> Codebook:
    """Lloyd's algorithm with k-means++ seeding over patch vectors.

    Runs until the relative inertia change drops below ``tol`` or
    ``max_iter`` iterations; empty clusters are reseeded to the point
    farthest from its assigned center. The result is deterministic for a
    given (patches, entry_count, seed) and the recorded inertia history is
    non-increasing. Final entries are snapped to the integer byte grid so
    decoded patches are exactly codebook entries.
    """
    points = np.asarray(patches, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("patches must be a (N, D) matrix")
    n, dim = points.shape
    if entry_count < 2:
        raise ValueError(f"entry_count must be >= 2, got {entry_count}")
    if n < entry_count:
        raise ValueError(f"need at least {entry_count} patches, got {n}")
    side = round(np.sqrt(dim / 3.0))
    if 3 * side * side != dim:
        raise ValueError(f"patch vector length {dim} is not s*s*3 for integer s")

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(points, entry_count, rng)
    history: list[float] = []
    prev_inertia = np.inf
    for _ in range(max_iter):
        d2 = _pairwise_sq_dist(points, centers)
        labels = np.argmin(d2, axis=1)
        assigned = centers[labels]
        point_d2 = ((points - assigned) ** 2).sum(axis=1)
        inertia = float(point_d2.sum())
        history.append(inertia)
        if prev_inertia < np.inf and prev_inertia > 0.0:
            if (prev_inertia - inertia) / prev_inertia < tol:
                break
        elif prev_inertia == 0.0:
            break
        prev_inertia = inertia

        counts = np.bincount(labels, minlength=entry_count)
        onehot = np.zeros((entry_count, n))
        onehot[labels, np.arange(n)] = 1.0
        sums = onehot @ points
        nonempty = counts > 0
        new_centers = centers.copy()
        new_centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            reseed_d2 = point_d2.copy()
            for cluster in np.nonzero(~nonempty)[0]:
                farthest = int(np.argmax(reseed_d2))
                new_centers[cluster] = points[farthest]
                reseed_d2[farthest] = -1.0
        centers = new_centers

    entries = np.clip(_round_half_up(centers), 0.0, 255.0)
    return Codebook(
        entries=entries,
        patch_size=side,
        seed=seed,
        inertia_history=tuple(history),
    )


def encode(image: RgbFieldImage, codebook: Codebook) -> TokenSequence:
    """Map each patch to its nearest codebook entry (Euclidean; ties to the lowest index)."""
    s = codebook.patch_size
    if image.height % s != 0 or image.width % s != 0:
        raise ValueError(
            f"codebook patch size {s} does not divide image dimensions "
            f"{image.width}x{image.height}"
        )
    patches = extract_patches(image, s)
    d2 = _pairwise_sq_dist(patches, codebook.entries)
    tokens = np.argmin(d2, axis=1).astype(np.int64)
    return TokenSequence(tokens=tokens, patch_rows=image.height // s, patch_cols=image.width // s)


def decode(
    tokens: TokenSequence, codebook: Codebook, meta: Optional[NormMeta] = None
) -> RgbFieldImage:
    """Rebuild an image by tiling codebook entries in patch order."""
    arr = tokens.tokens
    if arr.size and (arr.min() < 0 or arr.max() >= codebook.entry_count):
        bad = int(arr[(arr < 0) | (arr >= codebook.entry_count)][0])
        raise ValueError(f"token {bad} out of range for codebook of size {codebook.entry_count}")
    if meta is None:
        meta = NormMeta(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    patches = codebook.entries[arr]
    return assemble_patches(patches, tokens.patch_rows, tokens.patch_cols, codebook.patch_size, meta)


def compression_stats(
    original: FieldSnapshot, tokens: TokenSequence, codebook: Codebook
) -> CompressionStats:
    """Token accounting plus per-channel RMSE of the decoded reconstruction.

    ``reduction`` follows the single-channel cell count (1 - tokens/(H*W));
    ``reduction_per_scalar`` uses all 3*H*W stored scalars.
    """
    h, w = original.u.shape
    cells = h * w
    image = to_rgb(original)
    recon = from_rgb(decode(tokens, codebook, meta=image.meta), grid=original.grid)
    return CompressionStats(
        scalar_count=3 * cells,
        token_count=len(tokens),
        reduction=1.0 - len(tokens) / cells,
        reduction_per_scalar=1.0 - len(tokens) / (3 * cells),
        rmse_u=float(np.sqrt(np.mean((original.u - recon.u) ** 2))),
        rmse_v=float(np.sqrt(np.mean((original.v - recon.v) ** 2))),
        rmse_p=float(np.sqrt(np.mean((original.p - recon.p) ** 2))),
    )


def save_codebook(codebook: Codebook, path: Path | str) -> None:
    """Write the FCB1 binary format: header (magic, K, s, seed) then f32 entries."""
    header = _FCB_HEADER.pack(
        _FCB_MAGIC, codebook.entry_count, codebook.patch_size, codebook.seed
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(codebook.entries, dtype="<f4").tobytes())


def load_codebook(path: Path | str) -> Codebook:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != _FCB_MAGIC:
        raise CodebookFormatError(f"{path}: expected magic {_FCB_MAGIC!r}, found {data[:4]!r}")
    if len(data) < _FCB_HEADER.size:
        raise CodebookFormatError(f"{path}: file too short to hold the FCB1 header")
    _magic, k, s, seed = _FCB_HEADER.unpack_from(data)
    expected = _FCB_HEADER.size + k * s * s * 3 * 4
    if len(data) != expected:
        raise CodebookFormatError(
            f"{path}: expected {expected} bytes for K={k}, s={s}, found {len(data)}"
        )
    entries = np.frombuffer(data, dtype="<f4", count=k * s * s * 3, offset=_FCB_HEADER.size)
    return Codebook(
        entries=entries.reshape(k, s * s * 3).astype(np.float64),
        patch_size=int(s),
        seed=int(seed),
    )


def _png_meta_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def save_png(image: RgbFieldImage, path: Path | str) -> None:
    """Export as standard 8-bit RGB PNG with the NormMeta JSON sidecar."""
    path = Path(path)
    Image.fromarray(image.pixels, mode="RGB").save(path, format="PNG")
    _png_meta_path(path).write_text(
        json.dumps(image.meta.to_dict(), indent=2) + "\n", encoding="utf-8"
    )


def load_png(path: Path | str) -> RgbFieldImage:
    path = Path(path)
    with Image.open(path) as img:
        pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
    meta = NormMeta.from_dict(json.loads(_png_meta_path(path).read_text(encoding="utf-8")))
    return RgbFieldImage(pixels=pixels, meta=meta)
