"""Data-quality-aware incentive mechanism for federated learning with generated training data."""

from .clients import ClientStrategy, ClientType, best_response, indicators, utility
from .complete import Cohort, CostBreakdown, ServerStrategy, algorithm1, server_cost
from .core import (ClassDistribution, ClientAttributes, LearningParams, QualityModel,
                   ServerParams, derive_learning_constants)
from .distributions import AttributeDistribution
from .errors import (AssumptionError, ConfigError, EmptyCohortError, MechanismError,
                     NumericError, ParameterError, PreconditionError)
from .incomplete import LambdaMode, algorithm2, expected_cost

__all__ = [
    "AssumptionError", "AttributeDistribution", "ClassDistribution", "ClientAttributes",
    "ClientStrategy", "ClientType", "Cohort", "ConfigError", "CostBreakdown", "EmptyCohortError",
    "LambdaMode", "LearningParams", "MechanismError", "NumericError", "ParameterError",
    "PreconditionError", "QualityModel", "ServerParams", "ServerStrategy", "algorithm1",
    "algorithm2", "best_response", "derive_learning_constants", "expected_cost", "indicators",
    "server_cost", "utility",
]
