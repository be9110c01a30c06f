"""Method specification documents: the JSON search space of one learner.

Each document names a method, declares its hyperparameters with types
and ranges (numeric ranges or enumerated values), the root parameters,
and a conditions map from a parameter to the parameters that only
apply when it is in play.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from chronoforge.errors import HyperparameterRangeError, SchemaError

# aliases between spec document names and registered learner keys
_METHOD_ALIASES = {
    "dt": "decision_tree",
    "rf": "random_forest",
    "lr": "logistic_regression",
}

_PARAM_TYPES = ("int", "float", "string", "bool")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str
    range: tuple  # (lo, hi) for numerics; enumerated values otherwise


@dataclass
class MethodSpec:
    name: str
    method_key: str
    parameters: dict[str, ParamSpec]  # declaration order preserved
    root_parameters: list[str]
    conditions: dict[str, list[str]]
    class_path: str | None = None

    def active_parameters(self) -> list[str]:
        """Roots plus the closure of their conditional dependents, declaration order."""
        active = set(self.root_parameters)
        changed = True
        while changed:
            changed = False
            for governor, dependents in self.conditions.items():
                if governor in active:
                    for dep in dependents:
                        if dep not in active:
                            active.add(dep)
                            changed = True
        return [name for name in self.parameters if name in active]

    def check_params(self, params: dict) -> None:
        """Raise when a value falls outside its declared range."""
        for key, value in params.items():
            spec = self.parameters.get(key)
            if spec is None:
                raise HyperparameterRangeError(key, value, "no such parameter")
            if spec.type in ("int", "float"):
                lo, hi = spec.range
                if not lo <= value <= hi:
                    raise HyperparameterRangeError(key, value, f"range [{lo}, {hi}]")
            elif value not in spec.range:
                raise HyperparameterRangeError(key, value, f"values {list(spec.range)}")

    def sample_params(self, rng: random.Random) -> dict:
        """Uniform independent draw per active parameter."""
        out = {}
        for name in self.active_parameters():
            spec = self.parameters[name]
            if spec.type == "int":
                out[name] = rng.randint(int(spec.range[0]), int(spec.range[1]))
            elif spec.type == "float":
                out[name] = rng.uniform(float(spec.range[0]), float(spec.range[1]))
            else:
                out[name] = spec.range[rng.randrange(len(spec.range))]
        return out

    def grid_params(self) -> list[dict]:
        """Cartesian product: full int ranges, 5-point floats, all enum values."""
        axes: list[tuple[str, list]] = []
        for name in self.active_parameters():
            spec = self.parameters[name]
            if spec.type == "int":
                lo, hi = int(spec.range[0]), int(spec.range[1])
                axes.append((name, list(range(lo, hi + 1))))
            elif spec.type == "float":
                lo, hi = float(spec.range[0]), float(spec.range[1])
                axes.append((name, [lo + i * (hi - lo) / 4.0 for i in range(5)]))
            else:
                axes.append((name, list(spec.range)))
        configs: list[dict] = [{}]
        for name, values in axes:
            configs = [dict(c, **{name: v}) for c in configs for v in values]
        return configs


def parse_method_spec(text: str) -> MethodSpec:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise SchemaError("", "method spec root must be an object")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaError("/name", "expected non-empty string")
    method_key = raw.get("method_key")
    if method_key is None:
        method_key = _METHOD_ALIASES.get(name, name)
    elif not isinstance(method_key, str):
        raise SchemaError("/method_key", "expected string")

    raw_params = raw.get("parameters")
    if not isinstance(raw_params, dict):
        raise SchemaError("/parameters", "expected object")
    parameters: dict[str, ParamSpec] = {}
    for pname, body in raw_params.items():
        pointer = f"/parameters/{pname}"
        if not isinstance(body, dict):
            raise SchemaError(pointer, "expected object")
        ptype = body.get("type")
        if ptype not in _PARAM_TYPES:
            raise SchemaError(f"{pointer}/type", f"expected one of {list(_PARAM_TYPES)}")
        prange = body.get("range")
        if not isinstance(prange, list) or not prange:
            raise SchemaError(f"{pointer}/range", "expected non-empty array")
        if ptype in ("int", "float"):
            if len(prange) != 2 or not all(isinstance(v, (int, float)) for v in prange):
                raise SchemaError(f"{pointer}/range", "numeric range must be [min, max]")
            if prange[0] > prange[1]:
                raise SchemaError(f"{pointer}/range", "range min exceeds max")
        parameters[pname] = ParamSpec(pname, ptype, tuple(prange))

    roots = raw.get("root_parameters")
    if not isinstance(roots, list) or not all(isinstance(r, str) for r in roots):
        raise SchemaError("/root_parameters", "expected array of parameter names")
    for i, root in enumerate(roots):
        if root not in parameters:
            raise SchemaError(f"/root_parameters/{i}", f"undeclared parameter {root!r}")

    conditions = raw.get("conditions", {})
    if not isinstance(conditions, dict):
        raise SchemaError("/conditions", "expected object")
    parsed_conditions: dict[str, list[str]] = {}
    for governor, dependents in conditions.items():
        if governor not in parameters:
            raise SchemaError(f"/conditions/{governor}", f"undeclared parameter {governor!r}")
        if not isinstance(dependents, list) or not all(isinstance(d, str) for d in dependents):
            raise SchemaError(f"/conditions/{governor}", "expected array of parameter names")
        for dep in dependents:
            if dep not in parameters:
                raise SchemaError(f"/conditions/{governor}", f"undeclared parameter {dep!r}")
        parsed_conditions[governor] = list(dependents)

    class_path = raw.get("class")
    if class_path is not None and not isinstance(class_path, str):
        raise SchemaError("/class", "expected string")
    return MethodSpec(name, method_key, parameters, list(roots), parsed_conditions, class_path)


def load_method_spec(path) -> MethodSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_method_spec(fh.read())
