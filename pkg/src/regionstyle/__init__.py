"""Region-wise style statistic transfer on segmented feature maps.

The pipeline crops each semantic region to its tight bounding box, pools
the reference crop into per-branch block statistics (mean and std on
coarse-to-fine grids), aligns them to the source crop, fuses the branches
with learned softmax gate weights, and renormalizes the source region
with the fused parameters. Analytic gradients, net-free loss formulas,
and a histogram-based region distance round out the toolkit.

Hot kernels run through a compiled extension when available; set
REGIONSTYLE_PURE=1 to force the numpy fallback (see kernel_backend()).
"""

from ._kernels import backend as kernel_backend
from .autodiff import (GateGrad, GradBundle, check_instance_gradients,
                       finite_diff_grad, gradcheck_report, transfer_vjp)
from .errors import ConfigError, RegionNotFoundError
from .gates import (GateParams, GateWeights, RegionGates, fuse_params,
                    gate_forward, gates_from_json, gates_to_json, load_gates,
                    random_gates, save_gates, uniform_gates)
from .losses import (cycle_l1, feature_matching, hinge_adversarial,
                     histogram_match, log_adversarial, makeup_loss, pfdm,
                     perceptual_distance)
from .masks import (RegionCrop, SegMask, merge_region, region_bbox_crop,
                    region_set)
from .pyramid import (BASIC_LEVELS, DETAIL_LEVELS, HALF, PyramidParams,
                      align_params, level_stats, pyramid_stats, resolve_level)
from .tensor import (FeatureMap, concat_channels, conv2d_3x3, global_mean,
                     resize_bilinear, resize_nearest, softmax_channels)
from .transfer import (RegionPlan, RegionSpec, TransferConfig, load_config,
                       moment_transfer, normalize_region, plan_regions,
                       save_config, transfer_features)

__version__ = "0.1.0"

__all__ = [
    "BASIC_LEVELS",
    "ConfigError",
    "DETAIL_LEVELS",
    "FeatureMap",
    "GateGrad",
    "GateParams",
    "GateWeights",
    "GradBundle",
    "HALF",
    "PyramidParams",
    "RegionCrop",
    "RegionGates",
    "RegionNotFoundError",
    "RegionPlan",
    "RegionSpec",
    "SegMask",
    "TransferConfig",
    "align_params",
    "check_instance_gradients",
    "concat_channels",
    "conv2d_3x3",
    "cycle_l1",
    "feature_matching",
    "finite_diff_grad",
    "fuse_params",
    "gate_forward",
    "gates_from_json",
    "gates_to_json",
    "global_mean",
    "gradcheck_report",
    "hinge_adversarial",
    "histogram_match",
    "kernel_backend",
    "level_stats",
    "load_config",
    "load_gates",
    "log_adversarial",
    "makeup_loss",
    "merge_region",
    "moment_transfer",
    "normalize_region",
    "perceptual_distance",
    "pfdm",
    "plan_regions",
    "pyramid_stats",
    "random_gates",
    "region_bbox_crop",
    "region_set",
    "resize_bilinear",
    "resize_nearest",
    "resolve_level",
    "save_config",
    "save_gates",
    "softmax_channels",
    "transfer_features",
    "transfer_vjp",
    "uniform_gates",
    "__version__",
]
