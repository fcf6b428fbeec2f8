"""File formats: SCM spec and schema config (YAML), latents and data (CSV),
run manifests (JSON)."""
from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import pandas as pd
import yaml

from .metric import AttributeSchema
from .scm import LatentRecord, Scm, ThresholdClassifier


class InputError(ValueError):
    """A user-supplied file could not be parsed or validated."""


def _load_yaml(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise InputError(f"{path}: line {mark.line + 1}: {exc.problem}") from exc
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: expected a mapping at the top level")
    return doc


def _dump_yaml(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def read_scm(path) -> Scm:
    doc = _load_yaml(path)
    if "nodes" not in doc or not isinstance(doc["nodes"], list):
        raise InputError(f"{path}: SCM spec needs a top-level 'nodes' list")
    try:
        return Scm.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_scm(scm: Scm, path) -> None:
    _dump_yaml(scm.to_dict(), path)


class SchemaConfig:
    """Parsed schema config: attribute schema plus optional classifier,
    audit defaults and ingestion hooks."""

    def __init__(self, schema: AttributeSchema, classifier: ThresholdClassifier | None = None,
                 audit: dict | None = None, transforms: dict | None = None):
        self.schema = schema
        self.classifier = classifier
        self.audit = audit or {}
        self.transforms = transforms or {}

    def to_dict(self) -> dict:
        doc = self.schema.to_dict()
        if self.classifier is not None:
            doc["classifier"] = self.classifier.to_dict()
        if self.audit:
            doc["audit"] = dict(self.audit)
        if self.transforms:
            doc["transforms"] = dict(self.transforms)
        return doc

    def apply_transforms(self, data: pd.DataFrame) -> pd.DataFrame:
        """Per-column ``scale`` multipliers (e.g. rescaling LSAT before the cutoff)."""
        if not self.transforms:
            return data
        data = data.copy()
        for col, spec in self.transforms.items():
            if "scale" in spec:
                data[col] = data[col].astype(float) * float(spec["scale"])
        return data


def read_schema(path) -> SchemaConfig:
    doc = _load_yaml(path)
    try:
        schema = AttributeSchema.from_dict(doc)
        clf = doc.get("classifier")
        return SchemaConfig(schema, ThresholdClassifier.from_dict(clf) if clf else None,
                            doc.get("audit"), doc.get("transforms"))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_schema(config: SchemaConfig, path) -> None:
    _dump_yaml(config.to_dict(), path)


def read_csv(path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except pd.errors.ParserError as exc:
        raise InputError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc


def write_csv(frame: pd.DataFrame, path) -> None:
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")


def read_latents(path) -> LatentRecord:
    return LatentRecord.from_frame(read_csv(path))


def write_latents(latents: LatentRecord, path) -> None:
    write_csv(latents.to_frame(), path)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path, command: str, config: dict, inputs: dict, outputs: dict | None = None,
                   version: str = "") -> dict:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {name: {"path": str(p), "sha256": file_digest(p)}
                   for name, p in inputs.items() if p is not None},
        "outputs": {name: {"path": str(p), "sha256": file_digest(p)}
                    for name, p in (outputs or {}).items()},
        "version": version,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")
    return manifest
