"""
VEX statements and hidden code-level dependencies
=================================================

A library vendor says "lib1 is not affected by CVE-2017-5645 through its
log4j-core dependency". That statement is true for lib1. It says nothing
about an application that calls log4j-core directly without declaring it.
"""

import tempfile

from sbomscope import bench
from sbomscope.bench import Phase
from sbomscope.sbom import load_sbom
from sbomscope.vex import SuppressionScope, explain

# Every fixture is generated on the fly; nothing is downloaded.
fixtures = tempfile.mkdtemp(prefix="sbomscope-")
bench.generate_fixtures(fixtures)

# Without VEX, a presence-only scan flags log4j-core in all four apps.
for app, findings in bench.run_study1(fixtures, Phase.BASE).items():
    print(app, bench.detected_ids(findings))

# With lib1's VEX statement, only routes through lib1 are covered.
# app-static/dynamic/reflective also reach log4j-core directly (a code-level
# edge written into bom-enriched.json), so the finding stays.
for app, (finding,) in bench.run_study1(fixtures, Phase.WITH_VEX).items():
    sbom = "bom.json" if app == "app-unreachable" else "bom-enriched.json"
    doc = load_sbom(f"{fixtures}/study1/{app}/{sbom}")
    print(explain(finding, doc))
    print()

# Two shortcuts real scanners take, and where they go wrong.
# Matching only on the product PURL never applies lib1's statement to the app:
for app, (f,) in bench.run_study1(fixtures, Phase.WITH_VEX, SuppressionScope.PRODUCT_ONLY).items():
    print("product-only     ", app, f.verdict.outcome.value)

# Matching only on the subcomponent suppresses log4j-core everywhere:
for app, (f,) in bench.run_study1(fixtures, Phase.WITH_VEX, SuppressionScope.SUBCOMPONENT_ONLY).items():
    print("subcomponent-only", app, f.verdict.outcome.value)
