"""Per-scene depth, pose and mask optimization from stereo image quadruples."""

from ._dcdepth import (
    Intrinsics,
    LossWeights,
    NumericalError,
    OptimizeConfig,
    OptimizeResult,
    ParseError,
    PlaneSpec,
    Pose6,
    SceneSample,
    SceneSpec,
    UnsupportedFormat,
    View,
    bilinear_sample,
    d1_all,
    depth_from_disparity,
    eigen_metrics,
    explainability_loss,
    flip_merge,
    flip_merge_weight,
    gradcheck,
    load_depth_pgm16,
    load_ppm,
    load_scene,
    lr_schedule,
    optimize_scene,
    run_cli,
    save_depth_pgm16,
    save_ppm,
    smoothness_loss,
    ssim_map,
    synth_scene,
    total_loss,
    warp_coordinates,
)

__all__ = [name for name in dir() if not name.startswith("_")]
