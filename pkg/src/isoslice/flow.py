"""Dense 2D displacement fields between slice pairs.

``estimate_flow`` is a classical Horn-Schunck estimator run coarse-to-fine
over an image pyramid with incremental warping.  Every sweep has a fixed
order, so repeated runs on the same inputs are bit-identical.

Flow semantics are forward for estimation: the field returned by
``estimate_flow(i0, i1)`` maps a pixel ``(x, y)`` of ``i0`` to
``(x + u, y + v)`` in ``i1``.  Sampling is backward with clamp-to-edge
bilinear interpolation (see ``impute.backward_warp``): warping ``i1`` by
that same field reconstructs ``i0``.

The on-disk container ("VFLO") mirrors the volume format::

    b"VFLO\\n"
    one JSON line: {"dims":[W,H]}
    W*H little-endian f32 u values, then W*H f32 v values (row-major)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    DataValidationError,
    FileFormatError,
    ParameterError,
    ShapeError,
    TruncatedPayloadError,
)
from .volume import Slice2D

FLOW_MAGIC = b"VFLO\n"

# Weighted 8-neighbour average used by the Jacobi sweeps.
_AVG_KERNEL = np.array(
    [
        [1.0 / 12.0, 1.0 / 6.0, 1.0 / 12.0],
        [1.0 / 6.0, 0.0, 1.0 / 6.0],
        [1.0 / 12.0, 1.0 / 6.0, 1.0 / 12.0],
    ]
)

_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass(frozen=True, eq=False)
class FlowField:
    """Per-pixel displacement between two same-sized slices.

    ``u`` moves along the slice's first axis (columns, x) and ``v`` along
    the second (rows, y); both are float64 arrays indexed ``[row, col]``
    and measured in pixels of the slice grid.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        u = np.array(self.u, dtype=np.float64, copy=True, order="C")
        v = np.array(self.v, dtype=np.float64, copy=True, order="C")
        if u.ndim != 2 or u.size == 0:
            raise ParameterError(f"flow components must be non-empty 2D arrays, got {u.shape}")
        if u.shape != v.shape:
            raise ShapeError(f"u shape {u.shape} differs from v shape {v.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise DataValidationError("flow field contains non-finite values")
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def dims(self) -> tuple[int, int]:
        """(W, H) = (columns, rows)."""
        return (self.u.shape[1], self.u.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FlowField):
            return NotImplemented
        return (
            self.u.shape == other.u.shape
            and bool(np.array_equal(self.u, other.u))
            and bool(np.array_equal(self.v, other.v))
        )

    @classmethod
    def zeros(cls, dims: tuple[int, int]) -> "FlowField":
        w, h = dims
        return cls(np.zeros((h, w)), np.zeros((h, w)))


@dataclass(frozen=True)
class HsParams:
    """Knobs of the variational estimator.

    The defaults suit smooth slices regardless of intensity units, since the
    estimator range-normalizes its inputs before differentiating.
    """

    alpha: float = 15.0
    iterations: int = 100
    pyramid_levels: int = 3
    warps_per_level: int = 3

    def __post_init__(self) -> None:
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ParameterError(f"alpha={self.alpha!r} must be positive and finite")
        for name in ("iterations", "pyramid_levels", "warps_per_level"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ParameterError(f"{name}={value!r} must be a positive integer")


def sample_bilinear(arr: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear lookup of ``arr`` at float positions, clamped to the edge."""
    h, w = arr.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = xs - x0
    wy = ys - y0
    top = arr[y0, x0] * (1.0 - wx) + arr[y0, x1] * wx
    bottom = arr[y1, x0] * (1.0 - wx) + arr[y1, x1] * wx
    return top * (1.0 - wy) + bottom * wy


def _warp_by(arr: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = arr.shape
    xs = np.arange(w, dtype=np.float64)[None, :] + u
    ys = np.arange(h, dtype=np.float64)[:, None] + v
    return sample_bilinear(arr, xs, ys)


def _central_gradients(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Central differences with replicate boundary.
    px = np.pad(arr, ((0, 0), (1, 1)), mode="edge")
    py = np.pad(arr, ((1, 1), (0, 0)), mode="edge")
    gx = (px[:, 2:] - px[:, :-2]) * 0.5
    gy = (py[2:, :] - py[:-2, :]) * 0.5
    return gx, gy


def _blur_binomial(arr: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(arr, _BINOMIAL5, axis=0, mode="nearest")
    return ndimage.correlate1d(out, _BINOMIAL5, axis=1, mode="nearest")


def _downsample(arr: np.ndarray) -> np.ndarray:
    return _blur_binomial(arr)[::2, ::2]


def _resize_bilinear(arr: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h2, w2 = shape
    h1, w1 = arr.shape
    xs = np.zeros(w2) if w2 == 1 else np.arange(w2) * ((w1 - 1) / (w2 - 1))
    ys = np.zeros(h2) if h2 == 1 else np.arange(h2) * ((h1 - 1) / (h2 - 1))
    return sample_bilinear(arr, xs[None, :], ys[:, None])


def _neighbor_mean(arr: np.ndarray) -> np.ndarray:
    return ndimage.correlate(arr, _AVG_KERNEL, mode="nearest")


def _hs_sweeps(
    a: np.ndarray,
    b: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    params: HsParams,
) -> tuple[np.ndarray, np.ndarray]:
    """One warp iteration: linearize around (u, v), then fixed Jacobi sweeps."""
    warped = _warp_by(b, u, v)
    it = warped - a
    gx, gy = _central_gradients(0.5 * (a + warped))
    denom = params.alpha * params.alpha + gx * gx + gy * gy
    u0, v0 = u, v
    for _ in range(params.iterations):
        ub = _neighbor_mean(u)
        vb = _neighbor_mean(v)
        shared = (gx * (ub - u0) + gy * (vb - v0) + it) / denom
        u = ub - gx * shared
        v = vb - gy * shared
    return u, v


def estimate_flow(i0: Slice2D, i1: Slice2D, params: HsParams | None = None) -> FlowField:
    """Estimate the forward flow taking ``i0``'s frame toward ``i1``.

    Coarse-to-fine: the images are repeatedly binomial-blurred and halved,
    the coarsest level starts from zero motion, and each finer level warps
    ``i1`` by the upsampled estimate before re-solving.  Deterministic for
    fixed inputs and params.
    """
    params = params or HsParams()
    if i0.dims != i1.dims:
        raise ShapeError(f"slice dims {i0.dims} and {i1.dims} differ")
    w, h = i0.dims
    if min(w, h) < 2**params.pyramid_levels:
        raise ParameterError(
            f"dims {i0.dims} too small for {params.pyramid_levels} pyramid levels"
        )

    # The data/smoothness balance assumes a 0..255 intensity scale, so map the
    # pair's joint range onto it; the flow itself is scale free.
    a, b = i0.data, i1.data
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi > lo:
        gain = 255.0 / (hi - lo)
        a = (a - lo) * gain
        b = (b - lo) * gain

    a_levels = [a]
    b_levels = [b]
    for _ in range(params.pyramid_levels - 1):
        a_levels.append(_downsample(a_levels[-1]))
        b_levels.append(_downsample(b_levels[-1]))

    u = np.zeros_like(a_levels[-1])
    v = np.zeros_like(a_levels[-1])
    for a, b in zip(reversed(a_levels), reversed(b_levels)):
        if u.shape != a.shape:
            scale_x = a.shape[1] / u.shape[1]
            scale_y = a.shape[0] / u.shape[0]
            u = _resize_bilinear(u, a.shape) * scale_x
            v = _resize_bilinear(v, a.shape) * scale_y
        for _ in range(params.warps_per_level):
            u, v = _hs_sweeps(a, b, u, v, params)
    return FlowField(u, v)


def compose_intermediate_flow(
    f01: FlowField, f10: FlowField, t: float
) -> tuple[FlowField, FlowField]:
    """Blend a bidirectional flow pair into the fields at position ``t``.

    Returns ``(ft0, ft1)``: the field sampling the first endpoint and the
    field sampling the second, per the quadratic time weighting

        ft0 = -(1 - t) * t * f01 + t^2 * f10
        ft1 = (1 - t)^2 * f01 - (1 - t) * t * f10

    At ``t == 0`` this is exactly ``(0, f01)``; at ``t == 1``, ``(f10, 0)``.
    """
    if f01.dims != f10.dims:
        raise ShapeError(f"flow dims {f01.dims} and {f10.dims} differ")
    if not (np.isfinite(t) and 0.0 <= t <= 1.0):
        raise ParameterError(f"t={t!r} must lie in [0, 1]")
    cross = -(1.0 - t) * t
    ft0 = FlowField(cross * f01.u + t * t * f10.u, cross * f01.v + t * t * f10.v)
    sq = (1.0 - t) * (1.0 - t)
    ft1 = FlowField(sq * f01.u + cross * f10.u, sq * f01.v + cross * f10.v)
    return ft0, ft1


def flow_magnitude_stats(f: FlowField) -> tuple[float, float]:
    """(mean, max) of the per-pixel Euclidean displacement magnitude."""
    mag = np.hypot(f.u, f.v)
    return float(mag.mean()), float(mag.max())


def save_flow(f: FlowField, path: str | Path) -> None:
    """Write ``f`` to ``path`` in the VFLO container (components stored as f32)."""
    w, h = f.dims
    header = json.dumps({"dims": [w, h]}, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FLOW_MAGIC)
        fh.write(header)
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(f.u, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(f.v, dtype="<f4").tobytes())


def load_flow(path: str | Path) -> FlowField:
    """Read a VFLO file back into a FlowField."""
    with open(path, "rb") as fh:
        magic = fh.read(len(FLOW_MAGIC))
        if magic != FLOW_MAGIC:
            raise FileFormatError(f"{path}: not a VFLO file (magic {magic!r})")
        raw = fh.readline(1 << 20)
        if not raw.endswith(b"\n"):
            raise FileFormatError(f"{path}: header line missing terminator")
        try:
            header = json.loads(raw[:-1].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FileFormatError(f"{path}: header is not a valid JSON line: {exc}") from exc
        if not isinstance(header, dict) or set(header) != {"dims"}:
            raise FileFormatError(f"{path}: header must carry exactly the dims key")
        dims = header["dims"]
        if (
            not isinstance(dims, list)
            or len(dims) != 2
            or not all(isinstance(d, int) and d >= 1 for d in dims)
        ):
            raise FileFormatError(f"{path}: dims must be two positive integers, got {dims!r}")
        w, h = dims
        n_bytes = 2 * w * h * 4
        payload = fh.read(n_bytes + 1)
        if len(payload) != n_bytes:
            raise TruncatedPayloadError(
                f"{path}: expected {n_bytes} payload bytes for dims {dims}, found "
                f"{'more' if len(payload) > n_bytes else str(len(payload))}"
            )
    plane = w * h * 4
    u = np.frombuffer(payload[:plane], dtype="<f4").reshape(h, w)
    v = np.frombuffer(payload[plane:], dtype="<f4").reshape(h, w)
    return FlowField(u, v)
