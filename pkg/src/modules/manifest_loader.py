"""
Manifest loader for einstein-embed.

Reads a JSON or YAML manifest, validates it against MANIFEST_SCHEMA and
resolves every setting with priority: CLI args > manifest > .env > defaults.
Metric expressions are parsed up front so a broken component is reported
with its character position before any computation starts.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import yaml
from dotenv import load_dotenv
from jsonschema import Draft202012Validator

from modules.bell_partition import ManifoldSpec, catalog_manifold, user_manifold
from modules.errors import ManifestError
from modules.expr_parser import parse
from modules.homotopy_calc import HomotopyCatalog

logger = logging.getLogger(__name__)

MANIFEST_VERSION = "1"

TASKS = ("ricci", "embed-local", "glue", "homotopy", "verify")

# Default settings for keys the manifest leaves out
DEFAULTS = {
    "lambda": 0.0,
    "epsilon": 1,
    "order": 4,
    "fiber": "interval",
    "output_dir": "output",
    "log_level": "INFO",
}

# Catalog manifold -> homotopy catalog id
HOMOTOPY_IDS = {
    "circle": "S1",
    "torus2": "T2",
    "sphere_patch": "S2",
    "flat_patch1": "R1",
    "flat_patch2": "R2",
    "flat_patch3": "R3",
}

_EXPRESSION = {"type": ["string", "null"]}

MANIFEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "manifold"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": MANIFEST_VERSION},
        "manifold": {
            "oneOf": [
                {"type": "string"},
                {
                    "type": "object",
                    "required": ["dim", "charts"],
                    "additionalProperties": False,
                    "properties": {
                        "name": {"type": "string"},
                        "dim": {"type": "integer", "minimum": 1},
                        "periodic": {"type": "array", "items": {"type": "boolean"}},
                        "bounds": {
                            "type": "array",
                            "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                        },
                        "charts": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "required": ["center", "half_widths"],
                                "additionalProperties": False,
                                "properties": {
                                    "id": {"type": "string"},
                                    "center": {"type": "array", "items": {"type": "number"}},
                                    "half_widths": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                                },
                            },
                        },
                        "metric": {"type": "array", "items": {"type": "array", "items": _EXPRESSION}},
                    },
                },
            ]
        },
        "fiber": {"enum": ["interval", "circle"]},
        "lambda": {"type": "number"},
        "epsilon": {"enum": [1, -1]},
        "order": {"type": "integer", "minimum": 2},
        "seed_chart": {"type": "string"},
        "cover": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "N": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
                "per_overlap": {"type": "integer", "minimum": 1},
                "glue_order": {"type": "integer", "minimum": 0},
            },
        },
        "homotopy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "manifold": {"type": "string"},
                "fiber": {"type": "string"},
                "m_max": {"type": "integer", "minimum": 1, "maximum": 4},
                "products": {"type": "array", "items": {"type": "string"}},
                "entries": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["id", "groups"],
                        "additionalProperties": False,
                        "properties": {
                            "id": {"type": "string"},
                            "groups": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                            "source": {"type": "string"},
                        },
                    },
                },
            },
        },
        "tasks": {"type": "array", "items": {"enum": list(TASKS)}, "uniqueItems": True},
    },
}


@dataclass
class CoverOptions:
    """被覆と貼り合わせのパラメータ（N は省略時 M + 1）"""

    N: Optional[int] = None
    seed: int = 0
    per_overlap: int = 8
    glue_order: int = 3

    def to_dict(self) -> dict:
        return {"N": self.N, "seed": self.seed, "per_overlap": self.per_overlap, "glue_order": self.glue_order}


@dataclass
class HomotopyOptions:
    manifold: Optional[str] = None
    fiber: Optional[str] = None
    m_max: int = 4
    products: list = field(default_factory=list)
    entries: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "manifold": self.manifold,
            "fiber": self.fiber,
            "m_max": self.m_max,
            "products": list(self.products),
            "entries": list(self.entries),
        }


@dataclass
class Manifest:
    """Resolved manifest settings."""

    version: str
    manifold: ManifoldSpec
    manifold_ref: str
    lam: float
    epsilon: int
    order: int
    fiber: str
    seed_chart: int
    cover: CoverOptions
    homotopy: HomotopyOptions
    tasks: tuple
    source_path: Optional[str] = None

    @property
    def seed_center(self) -> list:
        return self.manifold.charts[self.seed_chart].center.tolist()

    @property
    def homotopy_id(self) -> str:
        if self.homotopy.manifold:
            return self.homotopy.manifold
        return HOMOTOPY_IDS.get(self.manifold_ref, self.manifold_ref)

    @property
    def homotopy_fiber(self) -> str:
        return self.homotopy.fiber or self.fiber

    def to_dict(self) -> dict:
        """Echo of the resolved manifest for the report."""
        return {
            "version": self.version,
            "manifold": self.manifold.to_dict(),
            "manifold_ref": self.manifold_ref,
            "lambda": self.lam,
            "epsilon": self.epsilon,
            "order": self.order,
            "fiber": self.fiber,
            "seed_chart": self.manifold.charts[self.seed_chart].chart_id,
            "cover": self.cover.to_dict(),
            "homotopy": self.homotopy.to_dict(),
            "tasks": list(self.tasks),
        }


@dataclass
class Settings:
    """Environment-level settings (.env or process environment)."""

    output_dir: str
    log_level: str


def load_settings(output_override: Optional[str] = None, verbose: bool = False) -> Settings:
    """
    Resolve output directory and log level.

    Priority: CLI flag > EINSTEIN_EMBED_* environment variables > defaults.
    """
    load_dotenv()
    output_dir = output_override or os.getenv("EINSTEIN_EMBED_OUTPUT_DIR") or DEFAULTS["output_dir"]
    log_level = "DEBUG" if verbose else (os.getenv("EINSTEIN_EMBED_LOG_LEVEL") or DEFAULTS["log_level"])
    return Settings(output_dir=output_dir, log_level=log_level.upper())


def read_manifest_file(path: str) -> dict:
    """
    Read a manifest file without validating it.

    Args:
        path: Path to a .json, .yaml or .yml manifest

    Returns:
        Parsed manifest dictionary

    Raises:
        ManifestError: Unreadable file, unknown extension or parse failure
    """
    manifest_path = Path(path)
    if not manifest_path.exists():
        raise ManifestError(f"manifest not found: {path}", path=str(path))
    suffix = manifest_path.suffix.lower()
    try:
        text = manifest_path.read_text(encoding="utf-8")
        if suffix == ".json":
            data = json.loads(text)
        elif suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            raise ManifestError(f"unsupported manifest format: {suffix}", path=str(path))
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ManifestError(f"failed to parse manifest: {e}", path=str(path)) from e
    except OSError as e:
        raise ManifestError(f"failed to read manifest: {e}", path=str(path)) from e
    if not isinstance(data, dict):
        raise ManifestError("manifest must be a mapping", path=str(path))
    return data


def validate_manifest(data: dict) -> None:
    """
    Validate a manifest dictionary against MANIFEST_SCHEMA.

    Raises:
        ManifestError: With every schema violation listed in ``violations``
    """
    errors = sorted(Draft202012Validator(MANIFEST_SCHEMA).iter_errors(data), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    violations = [
        {"path": "/".join(str(p) for p in e.absolute_path) or "(root)", "message": e.message} for e in errors
    ]
    first = violations[0]
    raise ManifestError(
        f"manifest schema violation at {first['path']}: {first['message']}",
        path=first["path"],
        violations=violations,
    )


def _check_expressions(manifold: ManifoldSpec) -> None:
    for row in manifold.metric:
        for src in row:
            if src not in (None, ""):
                parse(str(src), dim=manifold.dim)


def _seed_chart_index(manifold: ManifoldSpec, chart_id: Optional[str]) -> int:
    if chart_id is None:
        return 0
    for k, chart in enumerate(manifold.charts):
        if chart.chart_id == chart_id:
            return k
    raise ManifestError(
        f"seed_chart '{chart_id}' is not a chart of {manifold.name} "
        f"(charts: {[c.chart_id for c in manifold.charts]})",
        path="seed_chart",
    )


def load_manifest(
    path: Optional[str] = None,
    data: Optional[dict] = None,
    order_override: Optional[int] = None,
    lambda_override: Optional[float] = None,
    tasks_override: Optional[Sequence[str]] = None,
) -> Manifest:
    """
    Load and resolve a manifest with priority: CLI args > manifest > defaults.

    Args:
        path: Manifest file (ignored when ``data`` is given)
        data: Already-parsed manifest dictionary
        order_override: --order
        lambda_override: --lambda
        tasks_override: Tasks selected by the CLI verb

    Returns:
        Manifest with every setting resolved

    Raises:
        ManifestError: Schema violations, unknown catalog ids, missing charts
        ExpressionSyntaxError / UnknownSymbol: Broken metric expressions
    """
    if data is None:
        if path is None:
            raise ManifestError("no manifest given")
        data = read_manifest_file(path)
    validate_manifest(data)

    # Layer 1: defaults, Layer 2: manifest values
    spec = data["manifold"]
    if isinstance(spec, str):
        manifold = catalog_manifold(spec)
        manifold_ref = spec
    else:
        manifold = user_manifold(spec)
        manifold_ref = manifold.name
    _check_expressions(manifold)

    lam = float(data.get("lambda", DEFAULTS["lambda"]))
    order = int(data.get("order", DEFAULTS["order"]))
    tasks = tuple(data.get("tasks", TASKS))

    # Layer 3: CLI overrides
    if order_override is not None:
        if order_override < 2:
            raise ManifestError(f"--order must be >= 2, got {order_override}", path="order")
        order = order_override
    if lambda_override is not None:
        lam = float(lambda_override)
    if tasks_override:
        tasks = tuple(tasks_override)

    cover = CoverOptions(**data.get("cover", {}))
    homotopy = HomotopyOptions(**data.get("homotopy", {}))
    # group descriptors are checked here so a bad entry is a manifest error
    scratch = HomotopyCatalog()
    for entry in homotopy.entries:
        scratch.register(entry["id"], entry["groups"], entry.get("source", "user"))

    manifest = Manifest(
        version=data["version"],
        manifold=manifold,
        manifold_ref=manifold_ref,
        lam=lam,
        epsilon=int(data.get("epsilon", DEFAULTS["epsilon"])),
        order=order,
        fiber=data.get("fiber", DEFAULTS["fiber"]),
        seed_chart=_seed_chart_index(manifold, data.get("seed_chart")),
        cover=cover,
        homotopy=homotopy,
        tasks=tuple(t for t in TASKS if t in tasks),
        source_path=None if path is None else str(path),
    )
    logger.info(
        f"Manifest loaded: manifold={manifest.manifold.name}, lambda={manifest.lam}, "
        f"order={manifest.order}, tasks={list(manifest.tasks)}"
    )
    return manifest
