"""Shared JSON schemas for the wire protocol and on-disk formats.

Every message crossing the HTTP boundary, and every file format the engine
reads or writes, has a schema here. Remote backends (and their conformance
suites) validate against these same files, so the engine package is the
single source of truth for the protocol.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

SCHEMA_NAMES = (
    "embed_request",
    "embed_response",
    "itm_request",
    "itm_response",
    "info_response",
    "retrieve_request",
    "retrieve_response",
    "descriptor",
    "skilldb",
    "scenario",
    "annotations",
)


class ProtocolError(ValueError):
    """A message or file violated its schema."""


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise KeyError(f"unknown schema {name!r}")
    text = (
        resources.files("skillground")
        .joinpath("schemas")
        .joinpath(f"{name}.schema.json")
        .read_text("utf-8")
    )
    return json.loads(text)


def validate_message(name: str, instance) -> None:
    """Raise ProtocolError if ``instance`` violates the named schema."""
    try:
        jsonschema.validate(instance, load_schema(name))
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ProtocolError(f"{name}: {exc.message} (at {path})") from exc
