"""Deep feature synthesis: deterministic enumeration of definitions.

Depth 1 applies transforms to the target's own variables and
aggregations over direct-child variables; deeper levels stack
aggregations over transform outputs on descendants, over longer
relationship paths (flat multi-hop form), and over nested aggregations,
up to max_depth. Output is sorted by canonical name; first-seen wins on
the rare name collision from multiple paths to the same entity.
"""

from __future__ import annotations

from chronoforge.entityset import Entity, EntitySet
from chronoforge.features.definitions import (
    AggregationFeature,
    DfsParams,
    FeatureDefinition,
    RawVariable,
    TransformFeature,
    feature_name,
)
from chronoforge.features.primitives import AGGREGATIONS, TRANSFORMS, accepts


def _transform_candidates(entity: Entity, params: DfsParams) -> list[TransformFeature]:
    ignored = params.ignored(entity.name)
    out = []
    for prim_name in sorted(params.transform_primitives):
        prim = TRANSFORMS[prim_name]
        for var in entity.variables:
            if var.name in ignored:
                continue
            if accepts(prim, var.semantic_type):
                out.append(TransformFeature(prim_name, entity.name, var.name))
    return out


def _aggregation_features(
    es: EntitySet, root: str, budget: int, params: DfsParams
) -> list[AggregationFeature]:
    """All aggregations rooted at `root` with depth ≤ budget."""
    out: list[AggregationFeature] = []
    for path in es.downward_paths(root):
        hops = len(path)
        if hops > budget:
            continue
        terminal = es.entity(path[-1].child_entity)
        ignored = params.ignored(terminal.name)
        for agg_name in sorted(params.aggregation_primitives):
            agg = AGGREGATIONS[agg_name]
            for var in terminal.variables:
                if var.name in ignored or var.semantic_type in ("index", "id", "time_index"):
                    continue
                if var.semantic_type in agg.input_types:
                    out.append(AggregationFeature(agg_name, path, RawVariable(terminal.name, var.name)))
            if hops + 1 <= budget:
                for transform in _transform_candidates(terminal, params):
                    if TRANSFORMS[transform.primitive].output_type in agg.input_types:
                        out.append(AggregationFeature(agg_name, path, transform))
            remaining = budget - hops
            if remaining >= 1:
                for inner in _aggregation_features(es, terminal.name, remaining, params):
                    if AGGREGATIONS[inner.primitive].output_type in agg.input_types:
                        out.append(AggregationFeature(agg_name, path, inner))
    return out


def create_features(es: EntitySet, params: DfsParams) -> list[FeatureDefinition]:
    """Enumerate feature definitions for the target entity, sorted by name."""
    params.validate(es)
    target = es.entity(params.target_entity)

    features: list[FeatureDefinition] = list(_transform_candidates(target, params))
    features.extend(_aggregation_features(es, params.target_entity, params.max_depth, params))

    by_name: dict[str, FeatureDefinition] = {}
    for feature in features:
        name = feature_name(feature)
        if name not in by_name:
            by_name[name] = feature
    return [by_name[name] for name in sorted(by_name)]
