"""Command line: ``sbomscope scan|enrich|bench|paths``.

Exit codes: 0 clean, 1 reported findings (or failing bench cases), 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Sequence

from . import bench
from .enrich import compute_enrichment, enrich_sbom, index_jar_dir
from .identity import MalformedPurl, Purl, parse_purl
from .sbom import MalformedSbom, SbomDocument, SbomFormat, load_sbom, serialize_cyclonedx
from .vex import DEFAULT_PATH_CAP, MalformedVex, Outcome, VexDocument, apply_vex, explain, load_openvex
from .vulndb import Finding, load_db, scan_sbom

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_INPUT = 2


class InputError(Exception):
    pass


@dataclass
class ScanConfig:
    sbom_path: str
    db_path: str
    vex_paths: list[str] = field(default_factory=list)
    output_format: str = "json"
    path_cap: int = DEFAULT_PATH_CAP
    case: str | None = None
    phase: str | None = None


def _load_inputs(sbom_path: str, vex_paths: Sequence[str]) -> tuple[SbomDocument, list[VexDocument]]:
    try:
        doc = load_sbom(sbom_path)
        vex = [load_openvex(p) for p in vex_paths]
    except (OSError, ValueError, MalformedSbom, MalformedVex) as exc:
        raise InputError(str(exc)) from exc
    return doc, vex


def _is_reported(f: Finding) -> bool:
    return f.verdict is None or f.verdict.outcome is not Outcome.SUPPRESSED


def findings_report(doc: SbomDocument, findings: Sequence[Finding], config: ScanConfig) -> dict:
    rows = []
    for f in findings:
        v = f.verdict
        rows.append({
            "advisory": f.vuln_id,
            "component": f.component_ref,
            "matched_identity": str(f.matched_identity),
            "via_lineage": f.via_lineage,
            "verdict": v.outcome.value if v else Outcome.REPORTED.value,
            "uncovered_paths": [list(f.paths[i]) for i in v.uncovered_paths] if v else [],
            "applied_statements": [
                {"index": s.index, "source": s.source_path, "status": s.status.value, "product": s.product}
                for s in v.applied_statements
            ] if v else [],
        })
    report = {
        "sbom": config.sbom_path,
        "findings": rows,
        "detected": bench.detected_ids(findings),
        "diagnostics": list(doc.diagnostics),
    }
    if config.case:
        report["case"] = config.case
    if config.phase:
        report["phase"] = config.phase
    return report


def _table(report: dict) -> str:
    header = ("ADVISORY", "COMPONENT", "VERDICT", "LINEAGE", "UNCOVERED PATHS")
    rows = [header] + [
        (r["advisory"], r["component"], r["verdict"], "yes" if r["via_lineage"] else "no",
         " | ".join(" -> ".join(p) for p in r["uncovered_paths"]) or "-")
        for r in report["findings"]
    ]
    widths = [max(len(row[i]) for row in rows) for i in range(len(header) - 1)]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(row[:-1], widths)) + "  " + row[-1] for row in rows
    )


def cmd_scan(config: ScanConfig, out=None) -> int:
    out = out or sys.stdout
    if not os.path.isdir(config.db_path):
        raise InputError(f"vulnerability database not found: {config.db_path}")
    if not os.path.isfile(config.sbom_path):
        raise InputError(f"SBOM not found: {config.sbom_path}")
    doc, vex = _load_inputs(config.sbom_path, config.vex_paths)
    db = load_db(config.db_path)
    findings = scan_sbom(db, doc)
    if vex:
        findings = apply_vex(findings, doc, vex, path_cap=config.path_cap)
    report = findings_report(doc, findings, config)
    if config.output_format == "table":
        print(_table(report), file=out)
    else:
        print(json.dumps(report, indent=2, sort_keys=True), file=out)
    return EXIT_FINDINGS if any(_is_reported(f) for f in findings) else EXIT_OK


def cmd_enrich(sbom_path: str, jar_dir: str, out_path: str, out=None) -> int:
    out = out or sys.stdout
    if not os.path.isdir(jar_dir):
        raise InputError(f"jar directory not found: {jar_dir}")
    doc, _ = _load_inputs(sbom_path, [])
    if doc.format is not SbomFormat.CYCLONEDX:
        raise InputError("enrich writes CycloneDX and needs a CycloneDX input SBOM")
    diagnostics: list[str] = []
    try:
        indices = index_jar_dir(jar_dir, diagnostics)
    except OSError as exc:
        raise InputError(str(exc)) from exc
    edges = compute_enrichment(doc, indices, diagnostics=diagnostics)
    enriched = enrich_sbom(doc, edges)
    added = len(enriched.edges) - len(doc.edges)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(serialize_cyclonedx(enriched))
    print(f"added {added} edge(s) to {out_path}", file=out)
    for e in edges:
        print(f"  {e.from_ref} -> {e.to_ref} [{e.kind.value}]", file=out)
        for src, dst in e.sites:
            print(f"    site: {src} -> {dst}", file=out)
    for msg in diagnostics:
        print(f"note: {msg}", file=out)
    return EXIT_OK


def cmd_bench_gen(outdir: str, out=None) -> int:
    out = out or sys.stdout
    for rel in bench.generate_fixtures(outdir):
        print(os.path.join(outdir, rel), file=out)
    return EXIT_OK


def cmd_bench_score(expected: str, reports: Sequence[str], out=None) -> int:
    out = out or sys.stdout
    try:
        result = bench.score(expected, reports)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(str(exc)) from exc
    for c in result.per_case:
        want = ", ".join(f"{k}={v}" for k, v in sorted(c.expected.items()))
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.case} [{c.phase}] expected {want}; "
              f"detected {list(c.actual)}", file=out)
    print(f"{result.summary['pass']} passed, {result.summary['fail']} failed", file=out)
    return EXIT_OK if result.all_passed else EXIT_FINDINGS


def _resolve_component(doc: SbomDocument, wanted: str) -> str:
    refs = [c.ref for c in doc.components]
    if wanted in refs:
        return wanted
    try:
        purl: Purl | None = parse_purl(wanted)
    except MalformedPurl:
        purl = None
    hits = [c.ref for c in doc.components
            if (purl is not None and c.purl is not None and purl.matches(c.purl)) or c.name == wanted]
    if len(hits) == 1:
        return hits[0]
    raise InputError(f"unknown component {wanted!r}" if not hits else f"ambiguous component {wanted!r}: {hits}")


def cmd_paths(sbom_path: str, component: str, vex_paths: Sequence[str], out=None) -> int:
    out = out or sys.stdout
    doc, vex = _load_inputs(sbom_path, vex_paths)
    ref = _resolve_component(doc, component)
    comp = doc.component(ref)
    identity = comp.purl or Purl("generic", ref)
    names = sorted({st.vulnerability for d in vex for st in d.statements}) or ["(no VEX)"]
    findings = [Finding(name, ref, identity, False) for name in names]
    for f in apply_vex(findings, doc, vex):
        print(explain(f, doc), file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sbomscope", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="match an SBOM against the offline database and apply VEX")
    scan.add_argument("--sbom", required=True)
    scan.add_argument("--db", required=True)
    scan.add_argument("--vex", action="append", default=[])
    scan.add_argument("--format", choices=("json", "table"), default="json")
    scan.add_argument("--path-cap", type=int, default=DEFAULT_PATH_CAP)
    scan.add_argument("--case", help="bench case id to stamp on the JSON report")
    scan.add_argument("--phase", choices=[p.value for p in bench.Phase])

    enrich = sub.add_parser("enrich", help="add bytecode-derived edges to a CycloneDX SBOM")
    enrich.add_argument("--sbom", required=True)
    enrich.add_argument("--jars", required=True)
    enrich.add_argument("-o", "--output", required=True)

    b = sub.add_parser("bench", help="benchmark fixtures and scoring")
    bsub = b.add_subparsers(dest="bench_command", required=True)
    gen = bsub.add_parser("gen", help="write fixtures")
    gen.add_argument("-o", "--output", required=True)
    sc = bsub.add_parser("score", help="score normalized findings reports")
    sc.add_argument("--expected", required=True)
    sc.add_argument("--reports", nargs="+", required=True)

    paths = sub.add_parser("paths", help="explain root-to-component paths under VEX")
    paths.add_argument("--sbom", required=True)
    paths.add_argument("--component", required=True)
    paths.add_argument("--vex", action="append", default=[])
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "scan":
            return cmd_scan(ScanConfig(args.sbom, args.db, args.vex, args.format, args.path_cap,
                                       args.case, args.phase))
        if args.command == "enrich":
            return cmd_enrich(args.sbom, args.jars, args.output)
        if args.command == "paths":
            return cmd_paths(args.sbom, args.component, args.vex)
        if args.bench_command == "gen":
            return cmd_bench_gen(args.output)
        return cmd_bench_score(args.expected, args.reports)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
