"""Action schemas: declared payload shape per action type.

A schema registry maps an action type to its payload fields and scalar
types ("int" | "bool" | "string"). Payloads must carry exactly the declared
fields; there are no optional fields, which is what lets condition
evaluation stay total after typechecking.
"""

from __future__ import annotations

from ..errors import SchemaViolationError, UnknownActionTypeError

Schemas = dict[str, dict[str, str]]

SCALAR_TYPES = ("int", "bool", "string")

_PY_TYPES = {"int": int, "bool": bool, "string": str}


def validate_payload(schemas: Schemas, action_type: str, payload: dict) -> None:
    """Raise unless payload matches the declared schema exactly."""
    if action_type not in schemas:
        raise UnknownActionTypeError(f"no schema for action type {action_type!r}")
    schema = schemas[action_type]
    missing = sorted(set(schema) - set(payload))
    extra = sorted(set(payload) - set(schema))
    if missing or extra:
        raise SchemaViolationError(
            f"{action_type}: payload fields mismatch (missing {missing}, unexpected {extra})"
        )
    for name, type_name in schema.items():
        expected = _PY_TYPES[type_name]
        value = payload[name]
        # bool is a subclass of int; keep the two distinct
        if not isinstance(value, expected) or (expected is int and isinstance(value, bool)):
            raise SchemaViolationError(
                f"{action_type}: field {name!r} must be {type_name}, got {type(value).__name__}"
            )


def validate_schemas(schemas: Schemas) -> None:
    for action_type, fields in schemas.items():
        for name, type_name in fields.items():
            if type_name not in SCALAR_TYPES:
                raise ValueError(f"{action_type}.{name}: unknown scalar type {type_name!r}")
