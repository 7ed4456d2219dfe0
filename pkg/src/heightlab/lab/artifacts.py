"""Artifact writing with provenance, and schema validation for JSON and CSV outputs.

Every JSON artifact carries a ``provenance`` object and every CSV row ends with
the provenance columns, so a single file is enough to reproduce a run.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import subprocess
from functools import lru_cache
from pathlib import Path

import jsonschema

from .. import __version__

PROVENANCE_COLUMNS = ["build_id", "config_hash", "seed"]


def schema_dir() -> Path:
    env = os.environ.get("HEIGHTLAB_SCHEMAS")
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[3] / "schemas"


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    path = schema_dir() / f"{name}.schema.json"
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


@lru_cache(maxsize=1)
def build_id() -> str:
    """git-describe of the source tree when available, else the package version."""
    root = Path(__file__).resolve().parents[3]
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=root,
                             capture_output=True, text=True, timeout=5)
        desc = out.stdout.strip()
        if out.returncode == 0 and desc:
            return f"heightlab-{__version__}-g{desc}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"heightlab-{__version__}"


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def provenance(config: dict, seed: int) -> dict:
    return {"build_id": build_id(), "config_hash": config_hash(config), "seed": int(seed)}


def validate_json(obj, schema: str):
    jsonschema.validate(obj, load_schema(schema))


def write_json(path: Path, obj: dict, prov: dict, schema: str) -> Path:
    obj = dict(obj)
    obj["provenance"] = prov
    validate_json(obj, schema)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, columns: list, rows: list[dict], prov: dict, schema: str) -> Path:
    cols = list(columns) + PROVENANCE_COLUMNS
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(cols)
        for r in rows:
            full = dict(r, **prov)
            w.writerow([_cell(full.get(c)) for c in cols])
    validate_csv(path, schema)
    return path


def _convert(text: str, spec: dict):
    types = spec.get("type", "string")
    types = types if isinstance(types, list) else [types]
    if text == "" and "null" in types:
        return None
    for t in types:
        try:
            if t == "integer":
                return int(text)
            if t == "number":
                return float(text)
            if t == "boolean" and text in ("True", "False", "true", "false"):
                return text in ("True", "true")
        except ValueError:
            continue
        if t == "string":
            return text
    return text


def read_csv(path: Path, schema: str) -> list[dict]:
    sch = load_schema(schema)
    props = sch["properties"]
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [dict(zip(header, rec)) for rec in reader]
    if header != sch["x-columns"]:
        raise jsonschema.ValidationError(f"CSV header {header} != {sch['x-columns']}")
    return [{k: _convert(v, props.get(k, {})) for k, v in r.items()} for r in rows]


def validate_csv(path: Path, schema: str) -> list[dict]:
    """Parse a CSV artifact by its schema and validate every row; returns the typed rows."""
    rows = read_csv(path, schema)
    sch = load_schema(schema)
    for r in rows:
        jsonschema.validate(r, sch)
    return rows
