"""Correlation-filter visual tracking with proposal-based scale adaptation.

The package trains a kernelized correlation filter in the Fourier domain,
localizes the target per frame, and refines position and scale by scoring
edge-based box proposals with color-histogram similarity against stored
target instances.
"""

from .config import apply_settings, load_tracker_config, parse_settings
from .errors import ConfigError, FormatError
from .features import FeatureConfig, extract_features, hann_window, load_color_table
from .harness import (
    AblationRow,
    EvalReport,
    Sequence,
    ablate_percentages,
    center_error,
    evaluate,
    load_otb_sequence,
    overlap,
    run_on_sequence,
)
from .imaging import (
    BBox,
    Frame,
    Patch,
    crop,
    gradients,
    iou,
    load_frame,
    luminance,
    rgb_to_hsv,
    sample_region,
)
from .proposals import (
    EdgeMap,
    Proposal,
    ProposalConfig,
    contour_affinity,
    edge_map,
    generate_proposals,
    iou_prefilter,
    score_box,
    suppress_background,
)
from .selection import (
    HsvHistogram,
    Instance,
    SelectorConfig,
    SelectorState,
    bhattacharyya,
    color_histogram,
    fine_tune_state,
    hsv_bin,
    proposal_score,
    select_proposals,
    update_contamination,
    update_mean_confidence,
)
from .spectral import (
    CorrelationModel,
    FeatureStack,
    ResponseMap,
    fuse_responses,
    gaussian_kernel_correlation,
    gaussian_label,
    response_map,
    train_filter,
    update_model,
)
from .synth import (
    Distractor,
    SynthSpec,
    distractor_box_at,
    load_synth_spec,
    render_sequence,
    target_box_at,
    write_sequence,
)
from .tracker import (
    FrameTiming,
    SequenceResult,
    StepInfo,
    TargetState,
    TrackerConfig,
    TrackerHandle,
    init,
    run_sequence,
    step,
)

__version__ = "0.1.0"
