"""Multi-localized sketch-text conditional image generation toolkit."""

from .errors import (
    ConfigurationError,
    InvalidInputError,
    LotsError,
    NoWholeBodyItemsError,
    OracleError,
    SchemaError,
)
from .types import ConditioningSet, LocalizedPair, MultiLevelTokens, SketchImage, Variant

__version__ = "0.1.0"

__all__ = [
    "ConditioningSet",
    "LocalizedPair",
    "MultiLevelTokens",
    "SketchImage",
    "Variant",
    "LotsError",
    "InvalidInputError",
    "ConfigurationError",
    "SchemaError",
    "NoWholeBodyItemsError",
    "OracleError",
    "__version__",
]
