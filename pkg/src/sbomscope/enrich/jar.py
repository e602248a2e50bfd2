"""JAR indexing: class entries and embedded Maven coordinates."""

from __future__ import annotations

import io
import logging
import os
import re
import zipfile
from dataclasses import dataclass, field

__all__ = ["JarIndex", "MalformedArchive", "MavenCoords", "index_jar", "index_jar_dir", "parse_properties"]

log = logging.getLogger(__name__)

_POM_PROPERTIES_RE = re.compile(r"^META-INF/maven/[^/]+/[^/]+/pom\.properties$")
_FILENAME_RE = re.compile(r"^(?P<artifact>.+?)-(?P<version>\d[^/]*)\.jar$")


class MalformedArchive(ValueError):
    pass


@dataclass(frozen=True)
class MavenCoords:
    group: str | None
    artifact: str
    version: str

    def __str__(self) -> str:
        return f"{self.group or 'unknown-group'}:{self.artifact}:{self.version}"


@dataclass(frozen=True)
class JarIndex:
    jar_path: str
    coords: MavenCoords | None
    classes: frozenset[str]
    class_entries: dict[str, str] = field(compare=False)
    data: bytes = field(default=b"", compare=False, repr=False)

    def read_class(self, name: str) -> bytes:
        with zipfile.ZipFile(io.BytesIO(self.data)) as zf:
            return zf.read(self.class_entries[name])


def parse_properties(text: str) -> dict[str, str]:
    """Minimal java.util.Properties reader: ``key=value`` / ``key: value``, ``#``/``!`` comments."""
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line[0] in "#!":
            continue
        m = re.match(r"([^=:\s]+)\s*[=:\s]\s*(.*)$", line)
        if m:
            out[m.group(1)] = m.group(2).strip()
    return out


def _coords_from_pom(zf: zipfile.ZipFile, jar_path: str, diagnostics: list[str]) -> MavenCoords | None:
    found = []
    for entry in sorted(n for n in zf.namelist() if _POM_PROPERTIES_RE.match(n)):
        props = parse_properties(zf.read(entry).decode("utf-8", "replace"))
        if {"groupId", "artifactId", "version"} <= props.keys():
            found.append(MavenCoords(props["groupId"], props["artifactId"], props["version"]))
    if len(found) <= 1:
        return found[0] if found else None
    base = os.path.basename(jar_path)
    for c in found:
        if base == f"{c.artifact}-{c.version}.jar":
            return c
    diagnostics.append(f"{jar_path}: {len(found)} pom.properties entries; using {found[0]}")
    return found[0]


def _coords_from_filename(jar_path: str) -> MavenCoords | None:
    m = _FILENAME_RE.match(os.path.basename(jar_path))
    return MavenCoords(None, m.group("artifact"), m.group("version")) if m else None


def index_jar(data: bytes, jar_path: str = "", diagnostics: list[str] | None = None) -> JarIndex:
    """Index every base ``*.class`` entry and read Maven coordinates.

    Coordinates come from ``META-INF/maven/*/*/pom.properties``; failing that,
    from an ``artifact-version.jar`` file name with the group left unknown.
    """
    diags = diagnostics if diagnostics is not None else []
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except (zipfile.BadZipFile, zipfile.LargeZipFile) as exc:
        raise MalformedArchive(f"{jar_path or '<bytes>'}: {exc}") from exc
    with zf:
        entries = {}
        for name in zf.namelist():
            if not name.endswith(".class") or name.startswith("META-INF/"):
                continue
            cls = name[: -len(".class")]
            if cls.rsplit("/", 1)[-1] in ("module-info", "package-info"):
                continue
            entries.setdefault(cls, name)
        coords = _coords_from_pom(zf, jar_path, diags) or _coords_from_filename(jar_path)
    return JarIndex(jar_path, coords, frozenset(entries), entries, bytes(data))


def index_jar_dir(path: str, diagnostics: list[str] | None = None) -> list[JarIndex]:
    """Index every ``*.jar`` under ``path`` in sorted order; malformed archives are skipped."""
    diags = diagnostics if diagnostics is not None else []
    if not os.path.isdir(path):
        raise FileNotFoundError(f"jar directory not found: {path}")
    jars = []
    for root, _dirs, files in os.walk(path):
        jars.extend(os.path.join(root, f) for f in files if f.endswith(".jar"))
    out = []
    for jar in sorted(jars):
        with open(jar, "rb") as fh:
            data = fh.read()
        try:
            out.append(index_jar(data, jar, diags))
        except MalformedArchive as exc:
            log.warning("skipping %s", exc)
            diags.append(f"skipped {exc}")
    return out
