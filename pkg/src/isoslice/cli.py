"""Command-line pipeline: subcommands wiring files to the library.

Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage errors.
Standard output carries exactly one canonical JSON object (sorted keys,
shortest round-trip floats); diagnostics go to standard error.  Outputs
written before a failure are removed, so a non-zero exit never leaves
partial files behind.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import IsosliceError, ParameterError
from .flow import HsParams, estimate_flow, flow_magnitude_stats, save_flow
from .impute import ImputeConfig, auto_slice_count, impute_volume
from .losses import (
    LossWeights,
    adv_loss,
    global_disc_loss,
    multitask_loss,
    rec_loss,
    total_loss,
    tp_smooth_loss,
)
from .metrics import evaluate
from .phantom import moving_disk_phantom
from .volume import (
    Axis,
    LabelVolume,
    Slice2D,
    Volume,
    decimate,
    export_pgm,
    extract_slice,
    load_volume,
    save_volume,
)


def canonical_json(obj) -> str:
    """Byte-stable JSON: sorted keys, no whitespace, shortest float repr."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be at least 1")
    return value


def _stride(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from exc
    if value < 2:
        raise argparse.ArgumentTypeError("stride must be at least 2")
    return value


def _n_slices(text: str) -> int | str:
    if text == "auto":
        return "auto"
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is neither 'auto' nor an integer") from exc
    if value < 0:
        raise argparse.ArgumentTypeError("slice count must not be negative")
    return value


def _size(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"size must be X,Y,Z, got {text!r}")
    try:
        x, y, z = (int(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"size must be three integers, got {text!r}") from exc
    if min(x, y, z) < 16:
        raise argparse.ArgumentTypeError("each phantom extent must be at least 16")
    return x, y, z


def _window(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"window must be LO,HI, got {text!r}")
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"window must be two numbers, got {text!r}") from exc
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise argparse.ArgumentTypeError("window LO must be strictly below HI")
    return lo, hi


def _load_scalar(path: str) -> Volume:
    v = load_volume(path)
    if not isinstance(v, Volume):
        raise ParameterError(f"{path}: expected a scalar (f32) volume, found labels")
    return v


def _load_labels(path: str) -> LabelVolume:
    v = load_volume(path)
    if not isinstance(v, LabelVolume):
        raise ParameterError(f"{path}: expected a label (u8/u16) volume, found scalars")
    return v


def _load_json_file(path: str):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON: {exc}") from exc


def _hs_from_args(args: argparse.Namespace) -> HsParams:
    return HsParams(
        alpha=args.alpha,
        iterations=args.iterations,
        pyramid_levels=args.pyramid_levels,
        warps_per_level=args.warps_per_level,
    )


def _add_hs_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, default=15.0, help="smoothness weight")
    parser.add_argument("--iterations", type=_positive_int, default=100, help="solver sweeps per warp")
    parser.add_argument("--pyramid-levels", type=_positive_int, default=3)
    parser.add_argument("--warps-per-level", type=_positive_int, default=3)


def cmd_decimate(args: argparse.Namespace, written: list[Path]) -> dict:
    vol = load_volume(args.input)
    kept = decimate(vol, args.stride)
    written.append(Path(args.out))
    save_volume(kept, args.out)
    z_in, z_out = vol.dims[2], kept.dims[2]
    return {"kept": z_out, "removed": z_in - z_out}


def cmd_impute(args: argparse.Namespace, written: list[Path]) -> dict:
    vol = _load_scalar(args.input)
    labels = _load_labels(args.labels) if args.labels else None
    n = args.n
    if n == "auto":
        n = auto_slice_count(vol.spacing.sz, vol.spacing.sx)
        if n == 0:
            print(
                "note: spacing is already isotropic; copying input unchanged",
                file=sys.stderr,
            )
    cfg = ImputeConfig(n_slices=n, method=args.method, hs=_hs_from_args(args))
    out_vol, out_labels = impute_volume(vol, labels, cfg)
    written.append(Path(args.out))
    save_volume(out_vol, args.out)
    if out_labels is not None:
        written.append(Path(args.out_labels))
        save_volume(out_labels, args.out_labels)
    return {
        "n_per_gap": n,
        "z_in": vol.dims[2],
        "z_out": out_vol.dims[2],
        "sz_out": out_vol.spacing.sz,
    }


def cmd_flow(args: argparse.Namespace, written: list[Path]) -> dict:
    slices = []
    for path in (args.a, args.b):
        vol = _load_scalar(path)
        if vol.dims[2] != 1:
            raise ParameterError(f"{path}: flow inputs must be single-slice volumes (Z=1)")
        slices.append(extract_slice(vol, Axis.AXIAL, 0))
    field = estimate_flow(slices[0], slices[1], _hs_from_args(args))
    written.append(Path(args.out))
    save_flow(field, args.out)
    mean, peak = flow_magnitude_stats(field)
    return {
        "max": peak,
        "mean": mean,
        "median_u": float(np.median(field.u)),
        "median_v": float(np.median(field.v)),
    }


def cmd_metrics(args: argparse.Namespace, written: list[Path]) -> dict:
    gt = _load_labels(args.gt)
    pred = _load_labels(args.pred)
    report = evaluate(gt, pred).as_dict()
    written.append(Path(args.out_json))
    with open(args.out_json, "w", encoding="utf-8") as f:
        f.write(canonical_json(report))
        f.write("\n")
    return report


def cmd_loss(args: argparse.Namespace, written: list[Path]) -> dict:
    weights = LossWeights()
    if args.weights_json:
        overrides = _load_json_file(args.weights_json)
        if not isinstance(overrides, dict):
            raise ParameterError(f"{args.weights_json}: weights JSON must be an object")
        weights = LossWeights.from_dict(overrides)

    parts: dict[str, float] = {}
    extras: dict[str, float] = {}
    if args.volume:
        parts["l_tp_smooth"] = tp_smooth_loss(_load_scalar(args.volume))
    if args.rec:
        synth, real = (_load_scalar(p) for p in args.rec)
        if synth.dims != real.dims:
            raise ParameterError("the two --rec volumes must share dims")
        pairs = [
            (Slice2D(synth.data[k]), Slice2D(real.data[k])) for k in range(synth.dims[2])
        ]
        parts["l_rec"] = rec_loss(pairs)
    if args.series_json:
        series = _load_json_file(args.series_json)
        if not isinstance(series, dict):
            raise ParameterError(f"{args.series_json}: series JSON must be an object")
        if {"ld_fake", "gd_fake"} <= set(series):
            parts["l_adv"] = adv_loss(series["ld_fake"], series["gd_fake"])
        if {"gd_fake", "gd_real"} <= set(series):
            extras["l_global"] = global_disc_loss(series["gd_fake"], series["gd_real"])
        mul_keys = ("ld_fake", "ld_real", "oc_fake", "oc_real", "y_fake", "y_real")
        if set(mul_keys) <= set(series):
            extras["l_mul"] = multitask_loss(*(series[k] for k in mul_keys))
    if not parts and not extras:
        raise ParameterError("no loss inputs given; pass --volume, --rec, or --series-json")

    report = dict(parts)
    report.update(extras)
    report["total"] = total_loss(parts, weights)
    return report


def cmd_phantom(args: argparse.Namespace, written: list[Path]) -> dict:
    made = moving_disk_phantom(
        dims=args.size, radius=args.radius, step=(args.step, 0.0), seed=args.seed
    )
    written.append(Path(args.out))
    save_volume(made.volume, args.out)
    written.append(Path(args.out_labels))
    save_volume(made.labels, args.out_labels)
    return {
        "dims": list(args.size),
        "radius": made.radius,
        "seed": args.seed,
        "start": [made.start[0], made.start[1]],
        "step": [made.step[0], made.step[1]],
    }


def cmd_export(args: argparse.Namespace, written: list[Path]) -> dict:
    vol = load_volume(args.input)
    plane = extract_slice(vol, Axis(args.axis), args.index)
    if args.window is not None:
        lo, hi = args.window
    else:
        lo, hi = float(plane.data.min()), float(plane.data.max())
        if hi <= lo:
            hi = lo + 1.0
    written.append(Path(args.out))
    export_pgm(plane, args.out, lo, hi)
    w, h = plane.dims
    return {"height": h, "hi": hi, "lo": lo, "width": w}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isoslice",
        description="Slice imputation, flow estimation, and segmentation scoring over VVOL volumes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decimate", help="keep every stride-th axial slice")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=_stride, default=4)
    p.set_defaults(handler=cmd_decimate)

    p = sub.add_parser("impute", help="insert synthetic slices between consecutive slices")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--labels")
    p.add_argument("--out", required=True)
    p.add_argument("--out-labels")
    p.add_argument("--n", type=_n_slices, default="auto")
    p.add_argument("--method", choices=("flow", "linear"), default="flow")
    _add_hs_flags(p)
    p.set_defaults(handler=cmd_impute)

    p = sub.add_parser("flow", help="estimate the flow between two single-slice volumes")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    _add_hs_flags(p)
    p.set_defaults(handler=cmd_flow)

    p = sub.add_parser("metrics", help="score a predicted label volume against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out-json", required=True)
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("loss", help="evaluate loss terms from files")
    p.add_argument("--volume", help="scalar volume for the through-plane smoothness term")
    p.add_argument("--rec", nargs=2, metavar=("SYNTH", "REAL"), help="volume pair for the reconstruction term")
    p.add_argument("--series-json", help="JSON object of probability/label series")
    p.add_argument("--weights-json", help="JSON object overriding default lambda weights")
    p.set_defaults(handler=cmd_loss)

    p = sub.add_parser("phantom", help="generate a synthetic ground-truth volume")
    p.add_argument("--kind", choices=("moving-disk",), default="moving-disk")
    p.add_argument("--out", required=True)
    p.add_argument("--out-labels", required=True)
    p.add_argument("--size", type=_size, default=(64, 64, 33))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius", type=float, default=8.0)
    p.add_argument("--step", type=float, default=0.75, help="centre displacement per slice, px along x")
    p.set_defaults(handler=cmd_phantom)

    p = sub.add_parser("export", help="write one slice as a binary PGM")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--axis", choices=("axial", "sagittal", "coronal"), required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=_window, help="LO,HI intensity window (default: slice min,max)")
    p.set_defaults(handler=cmd_export)

    return parser


def _cleanup(written: list[Path]) -> None:
    for path in written:
        try:
            path.unlink(missing_ok=True)
        except OSError:
            pass


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "impute" and args.labels and not args.out_labels:
        parser.error("--labels requires --out-labels")
    written: list[Path] = []
    try:
        payload = args.handler(args, written)
    except IsosliceError as exc:
        _cleanup(written)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        _cleanup(written)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(canonical_json(payload))
    return 0


if __name__ == "__main__":
    sys.exit(main())
