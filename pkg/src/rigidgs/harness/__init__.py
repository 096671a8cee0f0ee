"""Synthetic trajectory-fitting harness: scene generation with known rigid
motions, gradient-descent fitting of motion parameters under the composite
objective, metric evaluation, and file/CLI interfaces."""

from .scene import Scene, SceneConfig, TrajectoryData, generate_scene
from .fitting import (
    DivergenceError,
    EvalMetrics,
    FitConfig,
    FitReport,
    evaluate,
    fit,
    fit_linear,
    trajectory_loss,
)
