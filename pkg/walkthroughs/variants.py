"""
Repackaged components and lineage-aware matching
================================================

A fork of log4j-api republished under a new group id carries the same
vulnerable code. Its PURL matches no advisory; only recorded lineage
(CycloneDX pedigree.variants, SPDX hasVariant) connects it to upstream.
"""

import tempfile

from sbomscope import bench
from sbomscope.sbom import load_sbom

fixtures = tempfile.mkdtemp(prefix="sbomscope-")
bench.generate_fixtures(fixtures)

clone = load_sbom(f"{fixtures}/study2/sbom-spdx-with-variants.json")
for comp in clone.components:
    print(comp.ref, comp.purl, "lineage:", [str(p) for p in comp.identity.lineage_purls] if comp.identity else [])

# Identity-only: the clone's own PURL matches nothing.
for case, findings in bench.run_study2(fixtures, lineage=False).items():
    print(f"identity-only  {case:14}", bench.detected_ids(findings))

# Lineage-aware: the upstream identity is matched when metadata exists.
for case, findings in bench.run_study2(fixtures, lineage=True).items():
    print(f"lineage-aware  {case:14}", bench.detected_ids(findings))

# Each lineage finding records which identity matched.
(first, *_) = bench.run_study2(fixtures)["cdx-variants"]
print(first.vuln_id, "matched", first.matched_identity, "via lineage:", first.via_lineage)
