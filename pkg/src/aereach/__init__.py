"""Inner and outer approximations of function ranges and reachable sets."""

from importlib.resources import files

from .ae_core import (
    Linearization,
    QuantifierSplit,
    RangePair,
    RingPartition,
    mean_value_range,
    quadrature_range,
    robust_mean_value_range,
    taylor2_range,
)
from .affine import AffineForm, NoiseContext
from .autodiff import Dual1, Dual2
from .expr import ExprDomainError, ExprError, ModelError, SystemModel, load_model, parse_expr, parse_model, to_text
from .interval import EMPTY, Box, DomainError, Interval
from .joint_range import PiMap, SkewedBox, joint_over, joint_under, preconditioned_step
from .reach import ReachOptions, ReachResult, StepResult, compute_reach, reach_iterate, reach_unroll, simulate_samples

BUNDLED_MODELS = ("testmodel", "sir", "sir_point", "honeybees")


def model_path(name: str) -> str:
    """Filesystem path of a bundled model file."""
    if name not in BUNDLED_MODELS:
        raise KeyError(f"no bundled model {name!r}; choose from {BUNDLED_MODELS}")
    return str(files(__package__) / "models" / f"{name}.sys")


__all__ = [
    "AffineForm", "BUNDLED_MODELS", "Box", "DomainError", "Dual1", "Dual2", "EMPTY", "ExprDomainError",
    "ExprError", "Interval", "Linearization", "ModelError", "NoiseContext", "PiMap", "QuantifierSplit",
    "RangePair", "ReachOptions", "ReachResult", "RingPartition", "SkewedBox", "StepResult", "SystemModel",
    "joint_over", "joint_under", "load_model", "mean_value_range", "model_path", "parse_expr",
    "parse_model", "preconditioned_step", "quadrature_range", "compute_reach", "reach_iterate", "reach_unroll",
    "robust_mean_value_range", "simulate_samples", "taylor2_range", "to_text",
]
