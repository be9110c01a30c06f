"""Exception hierarchy shared by every pipeline stage.

Two broad families matter to callers: ConfigError (the run was set up
wrong: bad config, bad schema document, missing artifact) and DataError
(the data violated a contract: duplicate index, dangling key, drifted
schema). The CLI maps them to exit codes 2 and 1 respectively.
"""

from __future__ import annotations


class ChronoforgeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ChronoforgeError):
    """The run configuration, schema document, or call arguments are invalid."""


class DataError(ChronoforgeError):
    """Input data violates a structural or semantic contract."""


class SchemaError(ConfigError):
    """A JSON document failed validation; carries a JSON-pointer path."""

    def __init__(self, pointer: str, message: str) -> None:
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


class MissingFileError(DataError):
    def __init__(self, entity: str, path: str) -> None:
        self.entity = entity
        self.path = path
        super().__init__(f"missing data file for entity {entity!r}: {path}")


class DuplicateIndexError(DataError):
    def __init__(self, entity: str, column: str, row: int) -> None:
        self.entity = entity
        self.column = column
        self.row = row
        super().__init__(f"DuplicateIndex({entity}, {column}, row {row})")


class TypeViolationError(DataError):
    def __init__(self, entity: str, column: str, row: int, value: str, semantic_type: str) -> None:
        self.entity = entity
        self.column = column
        self.row = row
        self.value = value
        self.semantic_type = semantic_type
        super().__init__(
            f"TypeViolation({entity}, {column}, row {row}): "
            f"value {value!r} is not a valid {semantic_type}"
        )


class DanglingKeyError(DataError):
    def __init__(self, entity: str, column: str, row: int, value: str, parent: str) -> None:
        self.entity = entity
        self.column = column
        self.row = row
        self.value = value
        self.parent = parent
        super().__init__(
            f"DanglingKey({entity}, {column}, row {row}): "
            f"value {value!r} has no matching row in {parent!r}"
        )


class ConsistencyError(DataError):
    """New data failed the consistency check; carries the violation report."""

    def __init__(self, report) -> None:
        self.report = report
        first = report.violations[0]
        more = len(report.violations) - 1
        suffix = f" (+{more} more)" if more else ""
        super().__init__(f"inconsistent new data: {first.message}{suffix}")


class FunctionalDependencyError(DataError):
    def __init__(self, entity: str, key_variable: str, key_value: str) -> None:
        self.entity = entity
        self.key_variable = key_variable
        self.key_value = key_value
        super().__init__(
            f"FunctionalDependencyViolation({entity}, {key_variable}): "
            f"key {key_value!r} maps to conflicting carried values"
        )


class UnknownInstanceError(DataError):
    def __init__(self, entity: str, instance_id: str) -> None:
        self.entity = entity
        self.instance_id = instance_id
        super().__init__(f"unknown instance {instance_id!r} of entity {entity!r}")


class LabelingError(DataError):
    """Raised when a labeling function fails during search."""

    def __init__(self, instance_id: str, window_start: str, cause: Exception) -> None:
        self.instance_id = instance_id
        self.window_start = window_start
        self.cause = cause
        super().__init__(
            f"labeling function failed for instance {instance_id!r} "
            f"at window {window_start}: {cause}"
        )


class FeatureNameError(ConfigError):
    """A canonical feature name failed the grammar."""

    def __init__(self, text: str, position: int, message: str) -> None:
        self.text = text
        self.position = position
        super().__init__(f"cannot parse feature name {text!r} at position {position}: {message}")


class UnknownPrimitiveError(ConfigError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"unknown primitive {name!r}")


class UnknownMethodError(ConfigError):
    def __init__(self, method_key: str) -> None:
        self.method_key = method_key
        super().__init__(f"no learner registered for method {method_key!r}")


class HyperparameterRangeError(ConfigError):
    def __init__(self, param: str, value, allowed: str) -> None:
        self.param = param
        self.value = value
        super().__init__(f"hyperparameter {param}={value!r} outside allowed {allowed}")


class DegenerateLabelsError(DataError):
    def __init__(self, context: str) -> None:
        super().__init__(f"labels contain a single class: {context}")


class SearchBudgetError(DataError):
    """Budget exhausted before any configuration completed."""

    def __init__(self, message: str, leaderboard) -> None:
        self.leaderboard = leaderboard
        super().__init__(message)


class ColumnMismatchError(DataError):
    def __init__(self, expected: str, got: str, position: int) -> None:
        self.expected = expected
        self.got = got
        self.position = position
        super().__init__(
            f"feature matrix column {position} is {got!r}, expected {expected!r}"
        )


class SchemaDriftError(DataError):
    """A feature references a variable absent from this entityset version."""

    def __init__(self, entity: str, column: str) -> None:
        self.entity = entity
        self.column = column
        super().__init__(f"schema drift: {entity}.{column} is absent from this entityset version")


class MissingArtifactError(ConfigError):
    def __init__(self, artifact: str, path: str, needed_by: str) -> None:
        self.artifact = artifact
        self.path = path
        super().__init__(
            f"missing artifact {artifact!r} at {path} — run the {needed_by!r} command first"
        )
