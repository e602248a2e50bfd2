"""Path-sensitive SBOM/VEX vulnerability scanning with variant lineage and bytecode enrichment."""

from .identity import (
    ComponentIdentity,
    LineageSource,
    MalformedPurl,
    Ordering,
    Purl,
    VersionKey,
    VersionRange,
    compare_versions,
    parse_purl,
    range_contains,
)
from .sbom import (
    Component,
    DependencyEdge,
    EdgeKind,
    LineageLink,
    MalformedSbom,
    SbomDocument,
    SbomFormat,
    load_sbom,
    parse_cyclonedx,
    parse_sbom,
    parse_spdx,
    serialize_cyclonedx,
)
from .vex import (
    MalformedVex,
    Outcome,
    PathExplosion,
    SuppressionScope,
    SuppressionVerdict,
    VexDocument,
    VexStatement,
    VexStatus,
    apply_vex,
    enumerate_paths,
    explain,
    load_openvex,
    parse_openvex,
)
from .vulndb import Finding, VulnDatabase, VulnRecord, load_db, match_component, scan_sbom

__version__ = "0.1.0"
