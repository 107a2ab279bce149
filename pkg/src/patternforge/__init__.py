"""Sewing patterns, BoxMesh construction, tokenizers and evaluation metrics."""

from .boxmesh import BoxMesh, BuildConfig, build_boxmesh, denormalize_mesh, normalize_mesh
from .errors import PatternForgeError
from .metrics import MetricReport, chamfer, evaluate_patterns, hausdorff, sample_surface
from .pattern import ArcParams, EdgeKind, EdgeSpec, Panel, SewingPattern, Stitch, parse_pattern, validate_pattern

__version__ = "0.1.0"

__all__ = [
    "ArcParams", "BoxMesh", "BuildConfig", "EdgeKind", "EdgeSpec", "MetricReport", "Panel", "PatternForgeError",
    "SewingPattern", "Stitch", "build_boxmesh", "chamfer", "denormalize_mesh", "evaluate_patterns", "hausdorff",
    "normalize_mesh", "parse_pattern", "sample_surface", "validate_pattern",
]
