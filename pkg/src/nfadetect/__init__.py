"""A-contrario small-target detection with statistical false-alarm control.

Pixels are tested against a naive Gaussian background model; the number
of false alarms (NFA) of a pixel is the number of tests times the tail
probability of its whitened value, and thresholding NFA <= eps bounds
the expected number of false detections per image by eps regardless of
image size.  The package covers the full pipeline: owned special
functions for the tails, background estimation, NFA and significance
maps, grouped detections, object-level evaluation (IoU/F1/AP), synthetic
scene generation and dataset preprocessing.
"""

from .background import (
    BackgroundModel,
    DegenerateModelError,
    as_image_tensor,
    estimate_background,
    mahalanobis_sq,
    mahalanobis_sq_map,
    make_model,
)
from .dataset import (
    DatasetRecord,
    bicubic_resize,
    cubic_kernel,
    filter_by_extent,
    load_image,
    load_mask,
    mask_to_boxes,
    read_manifest,
    rescale_box,
    save_image_png,
    split_dataset,
    write_manifest,
)
from .detect import (
    DetectConfig,
    Detection,
    components_to_detections,
    connected_components,
    detect,
    read_detections_csv,
    threshold_mask,
    write_detections_csv,
)
from .evaluate import (
    EvalReport,
    GroundTruthBox,
    average_precision,
    evaluate_detections,
    iou,
    match_detections,
    read_gt_csv,
    write_gt_csv,
)
from .nfa import (
    NfaMap,
    SignificanceMap,
    fuse_scales,
    load_raster,
    nfa_binomial,
    nfa_gaussian_map,
    save_raster,
    sigm_alpha,
    significance_map,
)
from .special import (
    chi2_log_sf,
    chi2_sf,
    erfc,
    ln_gamma,
    log_erfc,
    log_reg_upper_gamma_q,
    reg_upper_gamma_q,
)
from .synth import SynthScene, gen_dataset, gen_noise_image, inject_target

__version__ = "0.1.0"
