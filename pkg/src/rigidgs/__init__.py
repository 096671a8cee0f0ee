"""Rigid-body SE(3) motion model for time-localized 3D Gaussian primitives.

The package couples rotation and translation through the closed-form
exponential map, refines the motion with quadratic Bezier twist residuals
over each primitive's effective temporal window, deforms primitives around
gauge-fixed local anchors, regularizes motion smoothness and local rigid
coherence, and recycles low-opacity primitives under a fixed budget.  A
synthetic trajectory-fitting harness (``rigidgs.harness``) exercises the
whole model end to end.
"""

from .se3 import (
    LogParam,
    RigidTransform,
    StabilizedCoeffs,
    Twist,
    hat,
    left_jacobian,
    se3_exp,
    se3_exp_with_grads,
    so3_exp,
    stabilized_coeffs,
)
from .temporal import (
    BezierTwists,
    TemporalProfile,
    bezier_residual,
    effective_window,
    linear_position,
    motion_coefficient,
    normalized_time,
    temporal_opacity,
    temporal_visibility,
)
from .deformation import (
    DeformedState,
    MotionParams,
    Primitive,
    axis_projections,
    deform,
    deform_points,
    deform_points_with_grads,
    deform_with_grads,
)
from .losses import (
    LossWeights,
    NeighborGraph,
    color_affinity,
    knn_canonical,
    motion_smoothness_loss,
    opacity_regularizer,
    rigid_coherence_loss,
    total_objective,
)
from .relocation import (
    RelocationConfig,
    RelocationCues,
    RelocationEvent,
    accumulate_gradient_cues,
    partition_by_opacity,
    relocate,
    sampling_distribution,
)

__version__ = "0.1.0"
