"""Anisotropic-to-isotropic volume imputation and segmentation scoring.

The package turns a sparsely sliced 3D volume into an isotropic one by
synthesizing intermediate slices from bidirectional dense flow, evaluates
the quality terms involved, and scores segmentations with overlap and
surface-distance metrics.
"""

from .errors import (
    BoundsError,
    DataValidationError,
    DomainError,
    FileFormatError,
    InsufficientSlicesError,
    IsosliceError,
    ParameterError,
    ShapeError,
    TruncatedPayloadError,
    UndefinedMetricError,
)
from .flow import (
    FlowField,
    HsParams,
    compose_intermediate_flow,
    estimate_flow,
    flow_magnitude_stats,
    load_flow,
    save_flow,
)
from .impute import (
    ImputeConfig,
    auto_slice_count,
    backward_warp,
    impute_volume,
    one_hot_stack,
    synth_intermediate_label,
    synth_intermediate_slice,
)
from .losses import (
    LOSS_TERMS,
    LossWeights,
    adv_loss,
    global_disc_loss,
    loss_report,
    multitask_loss,
    rec_loss,
    smooth_loss,
    total_loss,
    tp_smooth_loss,
    tp_smooth_slice,
    warp_loss,
)
from .metrics import ClassScores, MetricReport, assd, dice, evaluate, mssd, ravd, surface_voxels
from .phantom import MovingDiskPhantom, moving_disk_phantom
from .volume import (
    Axis,
    LabelVolume,
    Slice2D,
    Spacing,
    Volume,
    decimate,
    export_pgm,
    extract_slice,
    load_volume,
    save_volume,
)

__version__ = "0.1.0"

__all__ = [
    "Axis",
    "BoundsError",
    "ClassScores",
    "DataValidationError",
    "DomainError",
    "FileFormatError",
    "FlowField",
    "HsParams",
    "ImputeConfig",
    "InsufficientSlicesError",
    "IsosliceError",
    "LOSS_TERMS",
    "LabelVolume",
    "LossWeights",
    "MetricReport",
    "MovingDiskPhantom",
    "ParameterError",
    "ShapeError",
    "Slice2D",
    "Spacing",
    "TruncatedPayloadError",
    "UndefinedMetricError",
    "Volume",
    "adv_loss",
    "assd",
    "auto_slice_count",
    "backward_warp",
    "compose_intermediate_flow",
    "decimate",
    "dice",
    "estimate_flow",
    "evaluate",
    "export_pgm",
    "extract_slice",
    "flow_magnitude_stats",
    "global_disc_loss",
    "impute_volume",
    "load_flow",
    "load_volume",
    "loss_report",
    "moving_disk_phantom",
    "mssd",
    "multitask_loss",
    "one_hot_stack",
    "ravd",
    "rec_loss",
    "save_flow",
    "save_volume",
    "smooth_loss",
    "surface_voxels",
    "synth_intermediate_label",
    "synth_intermediate_slice",
    "total_loss",
    "tp_smooth_loss",
    "tp_smooth_slice",
    "warp_loss",
]
