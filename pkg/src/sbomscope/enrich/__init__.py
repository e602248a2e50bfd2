"""Bytecode-level SBOM enrichment with statically explicit (Type-1) edges."""

from .classfile import ClassReferenceSet, MalformedClassFile, scan_class
from .edges import (
    DEFAULT_EXCLUDE_PREFIXES,
    TECHNIQUE,
    EnrichmentEdge,
    build_class_map,
    compute_enrichment,
    enrich_sbom,
)
from .jar import JarIndex, MalformedArchive, MavenCoords, index_jar, index_jar_dir

__all__ = [
    "DEFAULT_EXCLUDE_PREFIXES",
    "TECHNIQUE",
    "ClassReferenceSet",
    "EnrichmentEdge",
    "JarIndex",
    "MalformedArchive",
    "MalformedClassFile",
    "MavenCoords",
    "build_class_map",
    "compute_enrichment",
    "enrich_sbom",
    "index_jar",
    "index_jar_dir",
    "scan_class",
]
