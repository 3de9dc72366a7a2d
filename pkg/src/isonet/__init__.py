"""Discrete isothermic nets in Moebius geometry.

Submodules: ``quat`` (quaternions and 2x2 quaternionic matrices), ``mink``
(R^{4,1} and space forms), ``net`` (quad nets, cross ratios, Moutard lifts),
``transforms`` (Christoffel, Calapso, Darboux), ``conserved`` (polynomial
conserved quantities), ``generators`` (explicit nets) and ``cli``.
"""
from .errors import (DegenerateQuadError, DomainError, IsonetError, NotIsothermicError, PoleError,
                     SchemaError, SingularMatrixError, SphericalStarError, StepFailure, ValidationError)
from .net import QuadNet, cross_ratio, factorize, moutard_lift
from .quat import Quaternion, QuatMat2, study_det
from .mink import MinkVec, inner, lift, project
from .transforms import calapso, christoffel, darboux
from .conserved import ConservedQuantity, mean_curvature, solve_lcq_5x5, verify_cq

__version__ = "0.1.0"

__all__ = [
    "ConservedQuantity", "DegenerateQuadError", "DomainError", "IsonetError", "MinkVec",
    "NotIsothermicError", "PoleError", "QuadNet", "QuatMat2", "Quaternion", "SchemaError",
    "SingularMatrixError", "SphericalStarError", "StepFailure", "ValidationError", "calapso",
    "christoffel", "cross_ratio", "darboux", "factorize", "inner", "lift", "mean_curvature",
    "moutard_lift", "project", "solve_lcq_5x5", "study_det", "verify_cq",
]
