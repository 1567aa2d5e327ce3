"""Numerical laboratory for mean curvature flow under quadratic curvature pinching."""

from .errors import PinchFlowError
from .flow import FlowConfig, run, step
from .models import Cylinder, ModelGeometry, ProductSpheres, Sphere
from .profile import ProfileState, product_circle_state, profile_curvature
from .tensor import CurvatureFrame, PinchingParams

__all__ = [
    "CurvatureFrame",
    "Cylinder",
    "FlowConfig",
    "ModelGeometry",
    "PinchFlowError",
    "PinchingParams",
    "ProductSpheres",
    "ProfileState",
    "Sphere",
    "product_circle_state",
    "profile_curvature",
    "run",
    "step",
]

__version__ = "0.1.0"
