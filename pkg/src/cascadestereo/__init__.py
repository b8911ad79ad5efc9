"""Uncertainty-driven cascade cost-volume stereo matching.

Classical (census-based) stereo with a coarse-to-fine hypothesis cascade:
dense multi-scale volumes are fused for the coarsest estimate, per-pixel
uncertainty shapes each finer search range, and the same uncertainty
machinery filters the output into sparse pseudo-labels that drive
parameter self-adaptation.
"""

from .adapt import AdaptError, AdaptReport, TunableParams, adapt_params
from .cascade import (
    CascadeParams,
    DisparityField,
    RangeField,
    StageTrace,
    UncertaintyField,
    match_dense,
    next_stage_range,
    pixel_uncertainty,
    refine_disparity,
    run_cascade,
    sample_hypotheses,
    soft_argmin,
)
from .config import ConfigError, PipelineConfig, read_config_file, write_config_file
from .costvolume import (
    AggregationConfig,
    CostVolume,
    HypothesisSet,
    ProbabilityVolume,
    aggregate,
    build_cost_volume,
    fuse_dense_volumes,
    softmin_probabilities,
)
from .evaluation import (
    LossConfig,
    MetricReport,
    RocCurve,
    bce_uncertainty_loss,
    compute_metrics,
    disparity_to_depth,
    roc_curve,
    silog_loss,
    smooth_l1_loss,
)
from .features import FeatureConfig, FeatureMap, ImagePyramid, build_pyramid, census_transform
from .pseudolabel import (
    AreaFilterConfig,
    AreaUncertaintyField,
    BinaryMask,
    SparseLabelMap,
    area_uncertainty,
    filter_by_area_uncertainty,
    filter_by_pixel_uncertainty,
    gt_uncertainty_mask,
    label_stats,
    lrc_check,
    lrc_score,
)
from .raster_io import (
    CalibrationInfo,
    ConstantDisparity,
    DisparityRaster,
    RasterFormatError,
    RasterImage,
    SlantedPlaneDisparity,
    StereogramSpec,
    TwoLayerDisparity,
    generate_stereogram,
    read_image,
    read_kitti_png,
    read_pfm,
    write_image,
    write_kitti_png,
    write_pfm,
)

__version__ = "0.1.0"
