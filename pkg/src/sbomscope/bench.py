"""Benchmark fixtures for both studies, expected matrices, and scoring.

``generate_fixtures`` writes everything the studies need into one directory::

    study1/<app>/bom.json             declared-only CycloneDX SBOM
    study1/<app>/bom-enriched.json    plus one code-level edge (not for app-unreachable)
    study1/<app>/jars/                compiled app, lib1 and log4j-core jars
    study1/lib1/lib1.vex.json         OpenVEX statement for lib1
    study2/sbom-*.json                the four variant SBOMs
    paths/                            three-node app/lib1/lib2 path examples
    db/                               offline vulnerability records
    expected.json                     expected matrices and table transcriptions
    MANIFEST.json                     every written file with its sha256

All output is byte-for-byte reproducible.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Any, Iterable, Mapping, Sequence

from .identity import parse_purl
from .sbom import DependencyEdge, EdgeKind, Provenance, SbomDocument, load_sbom, parse_cyclonedx, serialize_cyclonedx
from .vex import Outcome, SuppressionScope, VexDocument, apply_vex, load_openvex
from .vulndb import Finding, VulnDatabase, load_db, scan_sbom

__all__ = [
    "CaseScore",
    "DETECTED",
    "NOT_DETECTED",
    "Phase",
    "ScoreReport",
    "STUDY1_APPS",
    "STUDY2_CASES",
    "TestCase",
    "UnknownCase",
    "detected_ids",
    "expected_matrix",
    "generate_fixtures",
    "normalized_report",
    "run_study1",
    "run_study2",
    "score",
    "benchmark_cases",
]

DETECTED = "detected"
NOT_DETECTED = "not-detected"

TIMESTAMP = "2025-01-01T00:00:00Z"
VERSION = "1.0-SNAPSHOT"

LOG4J_CORE = "pkg:maven/org.apache.logging.log4j/log4j-core@2.8.1"
LOG4J_API_UPSTREAM = "pkg:maven/org.apache.logging.log4j/log4j-api@2.10.0"
LIB1 = f"pkg:maven/example/lib1@{VERSION}"
CLONE = "pkg:maven/uk.co.nichesolutions.logging.log4j/log4j-api@2.6.3-CUSTOM"

CVE_STUDY1 = "CVE-2017-5645"
CVES_STUDY2 = ("CVE-2021-44228", "CVE-2021-45046")

STUDY1_APPS = ("app-static", "app-dynamic", "app-reflective", "app-unreachable")
STUDY2_FILES = {
    "cdx": "sbom-cycloneDX.json",
    "cdx-variants": "sbom-cycloneDX-with-variants.json",
    "spdx": "sbom-spdx.json",
    "spdx-variants": "sbom-spdx-with-variants.json",
}
STUDY2_CASES = tuple(STUDY2_FILES)

SERVER_CLASS = "org/apache/logging/log4j/core/net/server/TcpSocketServer"

# The one hidden code-level edge app -> log4j-core carried by each reachable app.
HIDDEN_EDGES = {
    "app-static": (
        EdgeKind.STATIC_EXPLICIT,
        f"example/app/Main -> {SERVER_CLASS}",
        "constant-pool-scan",
    ),
    "app-dynamic": (
        EdgeKind.DYNAMIC_DISPATCH,
        f"example/app/Main -> java/lang/Runnable.run() dispatched to {SERVER_CLASS}",
        "manual-annotation",
    ),
    "app-reflective": (
        EdgeKind.REFLECTIVE,
        f"example/app/Main -> Class.forName(\"{SERVER_CLASS.replace('/', '.')}\")",
        "manual-annotation",
    ),
}


class UnknownCase(KeyError):
    pass


class Phase(enum.Enum):
    BASE = "Base"
    WITH_VEX = "WithVex"
    VARIANT_MATRIX = "VariantMatrix"


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    id: str
    inputs: tuple[str, ...]
    expected: Mapping[str, str]
    phase: Phase

    def __post_init__(self) -> None:
        if not self.expected:
            raise ValueError(f"test case {self.id} has no expected values")


# Published scanner results and expected outcomes, transcribed once. True = detected.
_BASE_DETECTION = {
    "Grype": (True, True, True, True),
    "Trivy": (True, True, True, True),
    "CVE-Bin-Tool": (True, True, True, True),
    "Expected": (True, True, True, False),
}
_VEX_DETECTION = {
    "Grype": (True, True, True, True),
    "Trivy": (False, False, False, False),
    "CVE-Bin-Tool": (True, True, True, True),
    "Expected": (True, True, True, False),
}
_VARIANT_DETECTION = {
    "trivy": (False, False, False, True),
    "grype": (False, False, False, True),
    "osv-scanner": (False, False, False, True),
    "cve-bin-tool": (False, False, False, False),
}
_TEST_CASES = {
    "app-static": {"pattern": "Type 1", "vulnerable": True, "expected": DETECTED},
    "app-dynamic": {"pattern": "Type 2", "vulnerable": True, "expected": DETECTED},
    "app-reflective": {"pattern": "Type 3 string literal", "vulnerable": True, "expected": DETECTED},
    "app-unreachable": {"pattern": "No hidden code-level dependencies", "vulnerable": False,
                        "expected": NOT_DETECTED},
}


def _flag(detected: bool) -> str:
    return DETECTED if detected else NOT_DETECTED


def _study1_inputs(app: str, phase: Phase) -> list[str]:
    if phase is Phase.BASE:
        return [f"study1/{app}/bom.json", "db"]
    sbom = "bom.json" if app == "app-unreachable" else "bom-enriched.json"
    return [f"study1/{app}/{sbom}", "study1/lib1/lib1.vex.json", "db"]


def expected_matrix() -> dict[str, Any]:
    """The expected-matrix document written to ``expected.json``.

    The four apps' Base phase expects component-level detection everywhere (a
    presence-only scan without VEX); their WithVex phase is the path-sensitive
    "Expected" row. The variant files expect detection exactly when lineage is
    present; ``vulnerable_code_present`` records that the clone is vulnerable
    in all four files.
    """
    cases: dict[str, dict[str, Any]] = {}
    inputs: dict[str, dict[str, list[str]]] = {}
    for i, app in enumerate(STUDY1_APPS):
        cases[app] = {
            Phase.BASE.value: {CVE_STUDY1: DETECTED},
            Phase.WITH_VEX.value: {CVE_STUDY1: _flag(_VEX_DETECTION["Expected"][i])},
        }
        inputs[app] = {p.value: _study1_inputs(app, p) for p in (Phase.BASE, Phase.WITH_VEX)}
    for case, fname in STUDY2_FILES.items():
        flag = _flag(case.endswith("-variants"))
        cases[case] = {Phase.VARIANT_MATRIX.value: {cve: flag for cve in CVES_STUDY2}}
        inputs[case] = {Phase.VARIANT_MATRIX.value: [f"study2/{fname}", "db"]}
    return {
        "cases": cases,
        "inputs": inputs,
        "vulnerable_code_present": {**{a: _TEST_CASES[a]["vulnerable"] for a in STUDY1_APPS},
                                    **{c: True for c in STUDY2_CASES}},
        "tables": {
            "test_cases": _TEST_CASES,
            "base_detection": {"columns": list(STUDY1_APPS), "rows": {k: list(v) for k, v in _BASE_DETECTION.items()}},
            "vex_detection": {"columns": list(STUDY1_APPS), "rows": {k: list(v) for k, v in _VEX_DETECTION.items()}},
            "variant_detection": {"columns": list(STUDY2_CASES), "rows": {k: list(v) for k, v in _VARIANT_DETECTION.items()}},
        },
    }


def benchmark_cases(matrix: Mapping[str, Any] | None = None) -> list[TestCase]:
    matrix = matrix or expected_matrix()
    out = []
    for case, phases in matrix["cases"].items():
        for phase, expected in phases.items():
            inputs = tuple(matrix.get("inputs", {}).get(case, {}).get(phase, ()))
            out.append(TestCase(case, inputs, dict(expected), Phase(phase)))
    return out


# fixture documents

def _cdx_component(purl: str, **extra: Any) -> dict[str, Any]:
    p = parse_purl(purl)
    out: dict[str, Any] = {
        "type": "library",
        "bom-ref": f"{purl}?type=jar",
        "group": p.namespace,
        "name": p.name,
        "version": p.version,
        "purl": f"{purl}?type=jar",
    }
    out.update(extra)
    return out


def _cdx_document(name: str, root: dict[str, Any], components: list[dict[str, Any]],
                  dependencies: list[dict[str, Any]]) -> dict[str, Any]:
    serial = hashlib.sha256(name.encode()).hexdigest()
    return {
        "bomFormat": "CycloneDX",
        "specVersion": "1.4",
        "serialNumber": f"urn:uuid:{serial[:8]}-{serial[8:12]}-{serial[12:16]}-{serial[16:20]}-{serial[20:32]}",
        "version": 1,
        "metadata": {
            "timestamp": TIMESTAMP,
            "tools": [{"vendor": "sbomscope", "name": "bench", "version": "1"}],
            "component": root,
        },
        "components": components,
        "dependencies": dependencies,
    }


def study1_sbom(app: str) -> dict[str, Any]:
    root = _cdx_component(f"pkg:maven/example/{app}@{VERSION}", type="application")
    lib1 = _cdx_component(LIB1)
    core = _cdx_component(LOG4J_CORE)
    deps = [
        {"ref": root["bom-ref"], "dependsOn": [lib1["bom-ref"]]},
        {"ref": lib1["bom-ref"], "dependsOn": [core["bom-ref"]]},
        {"ref": core["bom-ref"], "dependsOn": []},
    ]
    return _cdx_document(f"study1/{app}", root, [lib1, core], deps)


def study1_enriched_sbom(app: str) -> str:
    doc = parse_cyclonedx(study1_sbom(app))
    kind, site, technique = HIDDEN_EDGES[app]
    core_ref = f"{LOG4J_CORE}?type=jar"
    edge = DependencyEdge(doc.root_ref, core_ref, kind, Provenance(site, technique))
    return serialize_cyclonedx(_with_edges(doc, [edge]))


def _with_edges(doc: SbomDocument, edges: Sequence[DependencyEdge]) -> SbomDocument:
    return replace(doc, edges=doc.edges + tuple(edges))


def lib1_vex() -> dict[str, Any]:
    return {
        "@context": "https://openvex.dev/ns/v0.2.0",
        "@id": "https://example.org/vex/lib1-2025-0001",
        "author": "lib1 maintainers",
        "timestamp": TIMESTAMP,
        "version": 1,
        "statements": [
            {
                "vulnerability": {"name": CVE_STUDY1},
                "products": [
                    {"@id": LIB1, "subcomponents": [{"@id": LOG4J_CORE}]},
                ],
                "status": "not_affected",
                "justification": "vulnerable_code_not_in_execute_path",
                "impact_statement": "lib1 never starts a log4j socket server",
            }
        ],
    }


_STUDY2_APP = f"pkg:maven/example/variant-app@{VERSION}"


def study2_cyclonedx(with_variants: bool) -> dict[str, Any]:
    root = _cdx_component(_STUDY2_APP, type="application")
    extra: dict[str, Any] = {}
    if with_variants:
        up = parse_purl(LOG4J_API_UPSTREAM)
        extra["pedigree"] = {
            "variants": [
                {"type": "library", "group": up.namespace, "name": up.name, "version": up.version,
                 "purl": LOG4J_API_UPSTREAM}
            ]
        }
    clone = _cdx_component(CLONE, **extra)
    deps = [
        {"ref": root["bom-ref"], "dependsOn": [clone["bom-ref"]]},
        {"ref": clone["bom-ref"], "dependsOn": []},
    ]
    name = "study2/cdx-variants" if with_variants else "study2/cdx"
    return _cdx_document(name, root, [clone], deps)


def _spdx_package(spdx_id: str, purl: str) -> dict[str, Any]:
    p = parse_purl(purl)
    return {
        "SPDXID": spdx_id,
        "name": f"{p.namespace}:{p.name}",
        "versionInfo": p.version,
        "downloadLocation": "NOASSERTION",
        "filesAnalyzed": False,
        "externalRefs": [
            {"referenceCategory": "PACKAGE-MANAGER", "referenceType": "purl", "referenceLocator": purl}
        ],
    }


def study2_spdx(with_variants: bool) -> dict[str, Any]:
    packages = [
        _spdx_package("SPDXRef-Package-variant-app", _STUDY2_APP),
        _spdx_package("SPDXRef-Package-log4j-api-clone", CLONE),
    ]
    rels = [
        {"spdxElementId": "SPDXRef-DOCUMENT", "relationshipType": "DESCRIBES",
         "relatedSpdxElement": "SPDXRef-Package-variant-app"},
        {"spdxElementId": "SPDXRef-Package-variant-app", "relationshipType": "DEPENDS_ON",
         "relatedSpdxElement": "SPDXRef-Package-log4j-api-clone"},
    ]
    if with_variants:
        packages.append(_spdx_package("SPDXRef-Package-log4j-api-upstream", LOG4J_API_UPSTREAM))
        rels.append({"spdxElementId": "SPDXRef-Package-log4j-api-clone", "relationshipType": "hasVariant",
                     "relatedSpdxElement": "SPDXRef-Package-log4j-api-upstream"})
    suffix = "-with-variants" if with_variants else ""
    return {
        "spdxVersion": "SPDX-2.3",
        "dataLicense": "CC0-1.0",
        "SPDXID": "SPDXRef-DOCUMENT",
        "name": f"variant-app{suffix}",
        "documentNamespace": f"https://example.org/spdx/variant-app{suffix}",
        "creationInfo": {"created": TIMESTAMP, "creators": ["Tool: sbomscope-bench"]},
        "packages": packages,
        "relationships": rels,
    }


def vulnerability_records() -> list[dict[str, Any]]:
    def record(vid, aliases, summary, purl, ranges):
        return {
            "schema_version": "1.6.0",
            "id": vid,
            "aliases": aliases,
            "modified": TIMESTAMP,
            "summary": summary,
            "affected": [
                {"package": {"purl": purl},
                 "ranges": [{"type": "ECOSYSTEM", "events": events} for events in ranges]}
            ],
        }

    core = "pkg:maven/org.apache.logging.log4j/log4j-core"
    api = "pkg:maven/org.apache.logging.log4j/log4j-api"
    return [
        record(CVE_STUDY1, [], "Deserialization of untrusted data in log4j-core socket servers",
               core, [[{"introduced": "2.0"}, {"fixed": "2.8.2"}]]),
        record("CVE-2021-44228", ["GHSA-jfh8-c2jp-5v3q"], "Remote code execution via JNDI lookups (Log4Shell)",
               api, [[{"introduced": "2.0-beta9"}, {"fixed": "2.15.0"}]]),
        record("CVE-2021-45046", ["GHSA-7rjr-3q55-vv33"], "Incomplete fix for CVE-2021-44228",
               api, [[{"introduced": "2.0-beta9"}, {"fixed": "2.12.2"}],
                     [{"introduced": "2.13.0"}, {"fixed": "2.16.0"}]]),
    ]


DB_README = """\
Offline vulnerability records for the benchmark fixtures.

CVE-2021-44228 and CVE-2021-45046 are recorded against
org.apache.logging.log4j/log4j-api so that the cloned log4j-api component of
the variant benchmark resolves to them. Public advisories attribute both to
log4j-core; the attribution here is a fixture choice, not a claim about the
real advisories.
"""


def path_example_sbom(with_code_edge: bool) -> str:
    """app -> lib1 -> lib2, optionally with a direct dynamically dispatched app -> lib2 edge."""
    def comp(name):
        return {"type": "library", "bom-ref": name, "name": name, "version": "1.0",
                "purl": f"pkg:maven/example/{name}@1.0"}

    raw = _cdx_document("paths/shortcut" if with_code_edge else "paths/chain", dict(comp("app"), type="application"),
                        [comp("lib1"), comp("lib2")],
                        [{"ref": "app", "dependsOn": ["lib1"]}, {"ref": "lib1", "dependsOn": ["lib2"]},
                         {"ref": "lib2", "dependsOn": []}])
    doc = parse_cyclonedx(raw)
    if with_code_edge:
        edge = DependencyEdge("app", "lib2", EdgeKind.DYNAMIC_DISPATCH,
                              Provenance("app -> lib2 via interface dispatch", "manual-annotation"))
        doc = _with_edges(doc, [edge])
    return serialize_cyclonedx(doc)


def path_example_vex() -> dict[str, Any]:
    return {
        "@context": "https://openvex.dev/ns/v0.2.0",
        "@id": "https://example.org/vex/paths",
        "author": "lib1 maintainers",
        "timestamp": TIMESTAMP,
        "version": 1,
        "statements": [
            {
                "vulnerability": {"name": "vul1"},
                "products": [{"@id": "pkg:maven/example/lib1@1.0",
                              "subcomponents": [{"@id": "pkg:maven/example/lib2@1.0"}]}],
                "status": "not_affected",
                "justification": "vulnerable_code_not_in_execute_path",
            }
        ],
    }


def _dump(obj: Any) -> str:
    return obj if isinstance(obj, str) else json.dumps(obj, indent=2) + "\n"


def _bundled_jar(name: str) -> bytes:
    return resources.files("sbomscope").joinpath("data", "jars", name).read_bytes()


def generate_fixtures(outdir: str | os.PathLike[str]) -> list[str]:
    """Write all fixtures under ``outdir``; returns the sorted relative paths written."""
    files: dict[str, str | bytes] = {}
    for app in STUDY1_APPS:
        files[f"study1/{app}/bom.json"] = _dump(study1_sbom(app))
        if app in HIDDEN_EDGES:
            files[f"study1/{app}/bom-enriched.json"] = study1_enriched_sbom(app)
        for jar in (f"{app}-{VERSION}.jar", f"lib1-{VERSION}.jar", "log4j-core-2.8.1.jar"):
            files[f"study1/{app}/jars/{jar}"] = _bundled_jar(jar)
    files["study1/lib1/lib1.vex.json"] = _dump(lib1_vex())
    for case, fname in STUDY2_FILES.items():
        with_variants = case.endswith("-variants")
        make = study2_cyclonedx if case.startswith("cdx") else study2_spdx
        files[f"study2/{fname}"] = _dump(make(with_variants))
    for rec in vulnerability_records():
        files[f"db/{rec['id']}.json"] = _dump(rec)
    files["db/README.md"] = DB_README
    files["paths/chain-sbom.json"] = path_example_sbom(False)
    files["paths/shortcut-sbom.json"] = path_example_sbom(True)
    files["paths/vex.json"] = _dump(path_example_vex())
    files["expected.json"] = _dump(expected_matrix())

    manifest = {}
    for rel, content in sorted(files.items()):
        data = content.encode() if isinstance(content, str) else content
        path = os.path.join(outdir, *rel.split("/"))
        try:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, "wb") as fh:
                fh.write(data)
        except OSError as exc:
            raise OSError(f"cannot write fixture {path}: {exc}") from exc
        manifest[rel] = hashlib.sha256(data).hexdigest()
    with open(os.path.join(outdir, "MANIFEST.json"), "w", encoding="utf-8") as fh:
        fh.write(_dump(manifest))
    return sorted(manifest) + ["MANIFEST.json"]


# reports and scoring

def detected_ids(findings: Iterable[Finding]) -> list[str]:
    """Advisories still reported after suppression (unsuppressed findings)."""
    return sorted({f.vuln_id for f in findings
                   if f.verdict is None or f.verdict.outcome is not Outcome.SUPPRESSED})


def normalized_report(case: str, findings: Iterable[Finding], phase: Phase | str | None = None) -> dict[str, Any]:
    report: dict[str, Any] = {"case": case, "detected": detected_ids(findings)}
    if phase is not None:
        report["phase"] = Phase(phase).value
    return report


@dataclass(frozen=True)
class CaseScore:
    case: str
    phase: str
    expected: Mapping[str, str]
    actual: tuple[str, ...]
    passed: bool


@dataclass(frozen=True)
class ScoreReport:
    per_case: tuple[CaseScore, ...]
    summary: Mapping[str, int] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.per_case)

    def to_json(self) -> dict[str, Any]:
        return {
            "per_case": [
                {"case": c.case, "phase": c.phase, "expected": dict(c.expected), "actual": list(c.actual),
                 "pass": c.passed}
                for c in self.per_case
            ],
            "summary": dict(self.summary),
        }


def _load(obj: str | os.PathLike[str] | Mapping[str, Any]) -> Mapping[str, Any]:
    if isinstance(obj, Mapping):
        return obj
    with open(obj, encoding="utf-8") as fh:
        return json.load(fh)


def score(
    expected: str | os.PathLike[str] | Mapping[str, Any],
    reports: Iterable[str | os.PathLike[str] | Mapping[str, Any]],
) -> ScoreReport:
    matrix = _load(expected)
    cases = matrix["cases"]
    scored = []
    for raw in reports:
        rep = _load(raw)
        case = rep.get("case")
        if case not in cases:
            raise UnknownCase(f"report names unknown case {case!r}")
        phase = rep.get("phase")
        if phase is None:
            if len(cases[case]) != 1:
                raise UnknownCase(f"report for {case!r} must name one of the phases {sorted(cases[case])}")
            (phase,) = cases[case]
        if phase not in cases[case]:
            raise UnknownCase(f"case {case!r} has no phase {phase!r}")
        want = cases[case][phase]
        actual = tuple(sorted(set(rep.get("detected") or ())))
        passed = all((adv in actual) == (flag == DETECTED) for adv, flag in want.items())
        scored.append(CaseScore(case, phase, dict(want), actual, passed))
    scored.sort(key=lambda c: (c.case, c.phase))
    n_pass = sum(c.passed for c in scored)
    return ScoreReport(tuple(scored), {"pass": n_pass, "fail": len(scored) - n_pass})


# end-to-end runs over generated fixtures

def _scan(db: VulnDatabase, sbom_path: str, vex: Sequence[VexDocument], scope: SuppressionScope,
          lineage: bool = True) -> list[Finding]:
    doc = load_sbom(sbom_path)
    if not lineage:
        doc = doc.without_lineage()
    findings = scan_sbom(db, doc)
    if vex:
        findings = apply_vex(findings, doc, vex, scope=scope)
    return findings


def run_study1(fixtures: str, phase: Phase | str = Phase.WITH_VEX,
               scope: SuppressionScope = SuppressionScope.PATH) -> dict[str, list[Finding]]:
    """Findings per app; WithVex uses the enriched SBOMs and lib1.vex.json."""
    phase = Phase(phase)
    db = load_db(os.path.join(fixtures, "db"))
    vex = [] if phase is Phase.BASE else [load_openvex(os.path.join(fixtures, "study1/lib1/lib1.vex.json"))]
    out = {}
    for app in STUDY1_APPS:
        sbom = _study1_inputs(app, phase)[0]
        out[app] = _scan(db, os.path.join(fixtures, sbom), vex, scope)
    return out


def run_study2(fixtures: str, lineage: bool = True) -> dict[str, list[Finding]]:
    db = load_db(os.path.join(fixtures, "db"))
    return {
        case: _scan(db, os.path.join(fixtures, "study2", fname), [], SuppressionScope.PATH, lineage)
        for case, fname in STUDY2_FILES.items()
    }
