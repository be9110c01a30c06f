"""Deep feature synthesis: definitions, enumeration, and evaluation."""

from chronoforge.features.definitions import (
    AggregationFeature,
    DfsParams,
    FeatureDefinition,
    RawVariable,
    TransformFeature,
    feature_depth,
    feature_name,
    parse_feature_list,
    parse_feature_name,
    referenced_fields,
    serialize_feature_list,
)
from chronoforge.features.matrix import FeatureMatrix, calculate_feature_matrix, select_features
from chronoforge.features.primitives import AGGREGATIONS, PRIMITIVES, TRANSFORMS, Primitive
from chronoforge.features.synthesis import create_features

__all__ = [
    "AggregationFeature",
    "AGGREGATIONS",
    "DfsParams",
    "FeatureDefinition",
    "FeatureMatrix",
    "PRIMITIVES",
    "Primitive",
    "RawVariable",
    "TRANSFORMS",
    "TransformFeature",
    "calculate_feature_matrix",
    "create_features",
    "feature_depth",
    "feature_name",
    "parse_feature_list",
    "parse_feature_name",
    "referenced_fields",
    "select_features",
    "serialize_feature_list",
]
