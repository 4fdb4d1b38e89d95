"""Reading, validating and writing model files (UTF-8 JSON)."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping

import jsonschema

from ..errors import ModelError
from ..models import Model, build_model, builtin_description

BUILTIN_PREFIX = "builtin:"


class SchemaError(ModelError):
    """The file does not match the model-file schema."""


@lru_cache(maxsize=1)
def model_schema() -> dict:
    text = resources.files("fmk.verify").joinpath("model_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_description(desc: Mapping) -> None:
    validator = jsonschema.Draft202012Validator(model_schema())
    errors = sorted(validator.iter_errors(desc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise SchemaError(f"schema error at {where}: {err.message}", gate="schema")
    n = desc["dimension"]
    for key in ("lo", "hi"):
        if len(desc["domain"][key]) != n:
            raise SchemaError(f"schema error at domain/{key}: expected {n} entries", gate="schema")


def load_description(source: str | Path, params: Mapping[str, float] | None = None) -> dict:
    """Description dict for a path or a ``builtin:<name>`` reference."""
    params = dict(params or {})
    text = str(source)
    if text.startswith(BUILTIN_PREFIX):
        desc = builtin_description(text[len(BUILTIN_PREFIX):], **params)
    else:
        path = Path(source)
        try:
            desc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as err:
            raise ModelError(f"model file not found: {path}") from err
        except json.JSONDecodeError as err:
            raise SchemaError(f"invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}", gate="json") from err
        if params:
            declared = desc.setdefault("parameters", {})
            unknown = set(params) - set(declared)
            if unknown:
                raise ModelError(f"model has no parameter(s) {sorted(unknown)}")
            declared.update(params)
    validate_description(desc)
    return desc


def load_model(source: str | Path, params: Mapping[str, float] | None = None) -> Model:
    return build_model(load_description(source, params))


def dumps_description(desc: Mapping) -> str:
    return json.dumps(desc, indent=2, ensure_ascii=False) + "\n"


def export_model(model_or_name: Model | str, path: str | Path | None = None, **params: float) -> str:
    """Serialize a model description; writes it to ``path`` when given."""
    if isinstance(model_or_name, Model):
        if model_or_name.description is None:
            raise ModelError("model was not built from a description and cannot be exported")
        desc = model_or_name.description
    else:
        name = model_or_name[len(BUILTIN_PREFIX):] if model_or_name.startswith(BUILTIN_PREFIX) else model_or_name
        desc = builtin_description(name, **params)
    text = dumps_description(desc)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
