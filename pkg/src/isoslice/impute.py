"""Slice synthesis and through-plane imputation.

A synthetic slice at position ``t`` between two bracketing slices is the
position-weighted blend of the two backward-warped endpoints.  Labels travel
the same way as one-hot indicator stacks and are decided per pixel by argmax
(ties go to the lower class id, so background wins).  ``impute_volume``
applies this between every pair of consecutive axial slices; the original
slices are carried over untouched.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSlicesError, ParameterError, ShapeError
from .flow import FlowField, HsParams, compose_intermediate_flow, estimate_flow, sample_bilinear
from .volume import LabelVolume, Slice2D, Spacing, Volume

METHOD_FLOW = "flow"
METHOD_LINEAR = "linear"
LABEL_RULE_ARGMAX = "argmax-onehot"


@dataclass(frozen=True)
class ImputeConfig:
    """How many slices to insert per gap and how to synthesize them.

    ``n_slices`` may be "auto", which derives the count from the volume's
    spacing so the output comes out isotropic (see ``auto_slice_count``).
    """

    n_slices: int | str = "auto"
    method: str = METHOD_FLOW
    label_rule: str = LABEL_RULE_ARGMAX
    hs: HsParams = field(default_factory=HsParams)

    def __post_init__(self) -> None:
        if self.n_slices != "auto":
            if not isinstance(self.n_slices, (int, np.integer)) or self.n_slices < 0:
                raise ParameterError(f'n_slices must be "auto" or an integer >= 0, got {self.n_slices!r}')
        if self.method not in (METHOD_FLOW, METHOD_LINEAR):
            raise ParameterError(f"method must be {METHOD_FLOW!r} or {METHOD_LINEAR!r}, got {self.method!r}")
        if self.label_rule != LABEL_RULE_ARGMAX:
            raise ParameterError(f"label_rule must be {LABEL_RULE_ARGMAX!r}, got {self.label_rule!r}")


def backward_warp(img: Slice2D, flow: FlowField) -> Slice2D:
    """Sample ``img`` at positions displaced by ``flow``.

    ``output(x, y) = img(x + u(x, y), y + v(x, y))`` with bilinear
    interpolation and clamp-to-edge boundary.  A zero flow reproduces the
    input bit for bit.
    """
    if img.dims != flow.dims:
        raise ShapeError(f"image dims {img.dims} and flow dims {flow.dims} differ")
    return Slice2D(_warp_arr(img.data, flow))


def _warp_arr(arr: np.ndarray, flow: FlowField) -> np.ndarray:
    h, w = arr.shape
    xs = np.arange(w, dtype=np.float64)[None, :] + flow.u
    ys = np.arange(h, dtype=np.float64)[:, None] + flow.v
    return sample_bilinear(arr, xs, ys)


def synth_intermediate_slice(
    i0: Slice2D, i1: Slice2D, ft0: FlowField, ft1: FlowField, t: float
) -> Slice2D:
    """Blend the two warped endpoints: ``(1-t) * warp(i0, ft0) + t * warp(i1, ft1)``."""
    if not (i0.dims == i1.dims == ft0.dims == ft1.dims):
        raise ShapeError(
            f"dims differ: slices {i0.dims}/{i1.dims}, flows {ft0.dims}/{ft1.dims}"
        )
    if not (np.isfinite(t) and 0.0 <= t <= 1.0):
        raise ParameterError(f"t={t!r} must lie in [0, 1]")
    blended = (1.0 - t) * _warp_arr(i0.data, ft0) + t * _warp_arr(i1.data, ft1)
    return Slice2D(blended)


def one_hot_stack(labels: np.ndarray, classes: int) -> np.ndarray:
    """Expand a 2D integer label slice into a (classes, H, W) indicator stack."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ParameterError(f"label slice must be 2D, got shape {arr.shape}")
    if classes < 1:
        raise ParameterError(f"classes={classes} must be at least 1")
    if arr.size and (int(arr.min()) < 0 or int(arr.max()) >= classes):
        raise ParameterError(f"label ids must lie in 0..{classes - 1}")
    stack = np.zeros((classes, *arr.shape), dtype=np.float64)
    for c in range(classes):
        stack[c] = arr == c
    return stack


def synth_intermediate_label(
    l0: np.ndarray, l1: np.ndarray, ft0: FlowField, ft1: FlowField, t: float
) -> np.ndarray:
    """Warp and blend two one-hot stacks, then pick the winning class per pixel.

    ``l0`` and ``l1`` are (classes, H, W) indicator stacks.  Each class map is
    warped and blended exactly like an image; the result is the argmax over
    the blended maps, with ties resolved toward the lower class id.
    """
    l0 = np.asarray(l0, dtype=np.float64)
    l1 = np.asarray(l1, dtype=np.float64)
    if l0.ndim != 3 or l1.ndim != 3 or l0.shape != l1.shape:
        raise ShapeError(f"one-hot stacks must share a (C, H, W) shape, got {l0.shape} and {l1.shape}")
    h, w = l0.shape[1:]
    if ft0.dims != (w, h) or ft1.dims != (w, h):
        raise ShapeError(f"flow dims {ft0.dims}/{ft1.dims} do not match label dims {(w, h)}")
    if not (np.isfinite(t) and 0.0 <= t <= 1.0):
        raise ParameterError(f"t={t!r} must lie in [0, 1]")
    blended = np.empty_like(l0)
    for c in range(l0.shape[0]):
        blended[c] = (1.0 - t) * _warp_arr(l0[c], ft0) + t * _warp_arr(l1[c], ft1)
    return np.argmax(blended, axis=0)


def auto_slice_count(inter_mm: float, intra_mm: float) -> int:
    """Slices to insert per gap so inter-slice spacing matches in-plane spacing.

    ``floor(inter / intra) - 1``, clamped at zero: already-isotropic (or
    super-resolved) inputs need nothing inserted.
    """
    if not (np.isfinite(inter_mm) and inter_mm > 0 and np.isfinite(intra_mm) and intra_mm > 0):
        raise ParameterError(f"spacings must be positive and finite, got {inter_mm!r}, {intra_mm!r}")
    return max(math.floor(inter_mm / intra_mm) - 1, 0)


def _pair_flows(a: np.ndarray, b: np.ndarray, hs: HsParams) -> tuple[FlowField, FlowField]:
    sa, sb = Slice2D(a), Slice2D(b)
    return estimate_flow(sa, sb, hs), estimate_flow(sb, sa, hs)


def impute_volume(
    v: Volume,
    labels: LabelVolume | None = None,
    cfg: ImputeConfig | None = None,
) -> tuple[Volume, LabelVolume | None]:
    """Insert synthetic slices between every consecutive axial pair.

    For each gap (k, k+1), N slices are synthesized at positions
    ``t = n / (N + 1)``; output Z grows to ``Z + (Z - 1) * N`` and the
    through-plane spacing shrinks to ``sz / (N + 1)``.  Original slices land
    unchanged at output index ``k * (N + 1)``.  With ``method="linear"`` the
    flows are identically zero, so each synthetic slice is the plain blend
    of its neighbours.
    """
    cfg = cfg or ImputeConfig()
    x, y, z = v.dims
    if z < 2:
        raise InsufficientSlicesError(f"imputation needs Z >= 2, got Z={z}")
    if labels is not None:
        if labels.dims != v.dims:
            raise ShapeError(f"label dims {labels.dims} do not match volume dims {v.dims}")
        if labels.spacing != v.spacing:
            raise ShapeError("label spacing does not match volume spacing")

    if cfg.n_slices == "auto":
        n = auto_slice_count(v.spacing.sz, v.spacing.sx)
        if n == 0:
            warnings.warn(
                f"spacing sz={v.spacing.sz} is already within one in-plane step of "
                f"sx={v.spacing.sx}; nothing to impute",
                stacklevel=2,
            )
    else:
        n = int(cfg.n_slices)
    if n == 0:
        return v, labels

    z_out = z + (z - 1) * n
    out = np.empty((z_out, y, x), dtype=np.float32)
    out_labels = None
    if labels is not None:
        out_labels = np.empty((z_out, y, x), dtype=labels.data.dtype)

    for k in range(z):
        out[k * (n + 1)] = v.data[k]
        if out_labels is not None:
            out_labels[k * (n + 1)] = labels.data[k]

    for k in range(z - 1):
        a = v.data[k].astype(np.float64)
        b = v.data[k + 1].astype(np.float64)
        use_flow = cfg.method == METHOD_FLOW
        if use_flow:
            f01, f10 = _pair_flows(a, b, cfg.hs)
        if out_labels is not None:
            la = one_hot_stack(labels.data[k], labels.classes)
            lb = one_hot_stack(labels.data[k + 1], labels.classes)
        for i in range(1, n + 1):
            t = i / (n + 1)
            if use_flow:
                ft0, ft1 = compose_intermediate_flow(f01, f10, t)
                synth = (1.0 - t) * _warp_arr(a, ft0) + t * _warp_arr(b, ft1)
            else:
                synth = (1.0 - t) * a + t * b
            out[k * (n + 1) + i] = synth
            if out_labels is not None:
                stack = np.empty_like(la)
                for c in range(la.shape[0]):
                    if use_flow:
                        stack[c] = (1.0 - t) * _warp_arr(la[c], ft0) + t * _warp_arr(lb[c], ft1)
                    else:
                        stack[c] = (1.0 - t) * la[c] + t * lb[c]
                out_labels[k * (n + 1) + i] = np.argmax(stack, axis=0).astype(labels.data.dtype)

    spacing = Spacing(v.spacing.sx, v.spacing.sy, v.spacing.sz / (n + 1))
    result = Volume(out, spacing)
    result_labels = None
    if out_labels is not None:
        result_labels = LabelVolume(out_labels, spacing, labels.classes)
    return result, result_labels
