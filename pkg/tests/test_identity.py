import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from packageurl import PackageURL
from univers.versions import MavenVersion

from sbomscope.identity import (
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


@pytest.mark.parametrize(
    "text, ptype, namespace, name, version",
    [
        ("pkg:maven/example/lib1@1.0-SNAPSHOT", "maven", "example", "lib1", "1.0-SNAPSHOT"),
        ("pkg:maven/org.apache.logging.log4j/log4j-api@2.10.0", "maven", "org.apache.logging.log4j",
         "log4j-api", "2.10.0"),
        ("pkg:x/y", "x", None, "y", None),
    ],
)
def test_parse_purl_examples(text, ptype, namespace, name, version):
    p = parse_purl(text)
    assert (p.ptype, p.namespace, p.name, p.version) == (ptype, namespace, name, version)
    assert str(p) == text


ORACLE_CASES = [
    "pkg:maven/example/lib1@1.0-SNAPSHOT",
    "pkg:maven/org.apache.logging.log4j/log4j-core@2.8.1?type=jar",
    "pkg:maven/uk.co.nichesolutions.logging.log4j/log4j-api@2.6.3-CUSTOM",
    "pkg:maven/org.apache.xmlgraphics/batik-anim@1.9.1?classifier=sources&type=zip",
    "pkg:npm/%40angular/animation@12.3.1",
    "pkg:generic/openssl@1.1.10g?download_url=https://openssl.org/source/openssl-1.1.0g.tar.gz",
    "pkg:golang/google.golang.org/genproto#googleapis/api/annotations",
    "pkg:generic/name%20with%20space@1.0%2Bbuild",
]


@pytest.mark.parametrize("text", ORACLE_CASES)
def test_parse_purl_agrees_with_reference_parser(text):
    ours = parse_purl(text)
    ref = PackageURL.from_string(text)
    assert ours.ptype == ref.type
    assert ours.namespace == ref.namespace
    assert ours.name == ref.name
    assert ours.version == ref.version
    assert dict(ours.qualifiers) == (ref.qualifiers or {})
    assert ours.subpath == ref.subpath


@pytest.mark.parametrize(
    "bad",
    ["", "maven/example/lib1@1.0", "pkg:maven", "pkg:maven/", "pkg:/x", "pkg:maven/a/b%zz@1",
     "pkg:maven/a/%ff%fe", "pkg:1abc/x", "pkg:maven/a/b?=v"],
)
def test_malformed_purl(bad):
    with pytest.raises(MalformedPurl):
        parse_purl(bad)


def test_maven_case_insensitive_and_qualifiers_ignored():
    a = parse_purl("pkg:maven/Org.Example/Lib@1.0?type=jar")
    b = parse_purl("pkg:maven/org.example/lib@1.0")
    assert a.matches(b) and b.matches(a)
    assert parse_purl("pkg:npm/Foo@1").package_key != parse_purl("pkg:npm/foo@1").package_key


def test_versionless_purl_is_wildcard():
    any_version = parse_purl("pkg:maven/example/lib1")
    assert any_version.matches(parse_purl("pkg:maven/example/lib1@2.0"))
    assert not parse_purl("pkg:maven/example/lib1@1.0").matches(parse_purl("pkg:maven/example/lib1@2.0"))


def test_qualifier_order_is_canonical():
    assert str(parse_purl("pkg:maven/a/b@1?type=jar&classifier=x")) == "pkg:maven/a/b@1?classifier=x&type=jar"


_segment = st.text(min_size=1, max_size=8).filter(lambda s: "/" not in s and s not in (".", ".."))
purls = st.builds(
    Purl,
    ptype=st.from_regex(r"[a-z][a-z0-9.+-]{0,6}", fullmatch=True),
    name=st.text(min_size=1, max_size=10),
    namespace=st.one_of(st.none(), st.lists(_segment, min_size=1, max_size=3).map("/".join)),
    version=st.one_of(st.none(), st.text(min_size=1, max_size=10)),
    qualifiers=st.dictionaries(
        st.from_regex(r"[a-z][a-z0-9._-]{0,5}", fullmatch=True), st.text(min_size=1, max_size=8), max_size=3
    ).map(lambda d: tuple(d.items())),
    subpath=st.one_of(st.none(), st.lists(_segment, min_size=1, max_size=3).map("/".join)),
)


@settings(max_examples=1500)
@given(purls)
def test_purl_roundtrip(p):
    assert parse_purl(str(p)) == p


# The reference parser strips surrounding whitespace from tokens and decodes %2F
# before splitting, so both are kept out of this comparison.
_visible = st.text(st.characters(blacklist_categories=("Cs", "Cc", "Zs", "Zl", "Zp")), min_size=1, max_size=10)
_visible_segment = _visible.filter(lambda s: "/" not in s and s not in (".", ".."))
generic_purls = st.builds(
    Purl,
    ptype=st.just("generic"),
    name=_visible_segment,
    namespace=st.one_of(st.none(), st.lists(_visible_segment, min_size=1, max_size=3).map("/".join)),
    version=st.one_of(st.none(), _visible),
    qualifiers=st.dictionaries(st.from_regex(r"[a-z][a-z0-9._-]{0,5}", fullmatch=True), _visible,
                               max_size=3).map(lambda d: tuple(d.items())),
)


@settings(max_examples=300)
@given(generic_purls)
def test_purl_serialization_reads_back_with_reference_parser(p):
    ref = PackageURL.from_string(str(p))
    assert (ref.namespace, ref.name, ref.version) == (p.namespace, p.name, p.version)
    assert (ref.qualifiers or {}) == dict(p.qualifiers)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ("2.8.1", "2.10.0", Ordering.LESS),
        ("1.0-SNAPSHOT", "1.0", Ordering.LESS),
        ("2.6.3-CUSTOM", "2.6.3", Ordering.GREATER),
        ("1", "1.0.0", Ordering.EQUAL),
        ("1.0-ga", "1.0", Ordering.EQUAL),
        ("1.0-alpha-1", "1.0-beta-1", Ordering.LESS),
        ("1.0-rc1", "1.0-SNAPSHOT", Ordering.LESS),
        ("1.0-zeta", "1.1", Ordering.LESS),
        ("2.0-beta9", "2.0", Ordering.LESS),
        ("1.0-alpha", "1-alpha", Ordering.EQUAL),
        ("1-CUSTOM", "1.0.1", Ordering.LESS),
    ],
)
def test_compare_versions_examples(a, b, expected):
    assert compare_versions(a, b) is expected
    assert compare_versions(b, a) is Ordering(-expected)


@pytest.mark.parametrize("a, b", [("2.8.1", "2.10.0"), ("1.0-SNAPSHOT", "1.0"), ("2.6.3-CUSTOM", "2.6.3")])
def test_compare_versions_agrees_with_maven_oracle(a, b):
    want = (MavenVersion(a) > MavenVersion(b)) - (MavenVersion(a) < MavenVersion(b))
    assert int(compare_versions(a, b)) == want


# Versions within the documented subset: dotted numbers plus at most one qualifier.
_qualifier = st.sampled_from(["alpha", "beta", "milestone", "rc", "SNAPSHOT", "CUSTOM", "zeta", "ga"])
subset_versions = st.builds(
    lambda nums, q: ".".join(map(str, nums)) + (f"-{q}" if q else ""),
    st.lists(st.integers(0, 12), min_size=1, max_size=4),
    st.one_of(st.none(), _qualifier),
)


@settings(max_examples=1000)
@given(subset_versions, subset_versions)
def test_version_order_matches_maven_oracle_on_subset(a, b):
    want = (MavenVersion(a) > MavenVersion(b)) - (MavenVersion(a) < MavenVersion(b))
    assert int(compare_versions(a, b)) == want


_piece = st.one_of(st.integers(0, 30).map(str), _qualifier, st.text("xyz", min_size=1, max_size=3))
any_versions = st.one_of(
    st.text(max_size=12),
    st.lists(st.tuples(_piece, st.sampled_from([".", "-", "_", "+", ""])), max_size=5).map(
        lambda parts: "".join(p + s for p, s in parts)
    ),
)


@settings(max_examples=1500)
@given(any_versions, any_versions)
def test_version_order_total_and_antisymmetric(a, b):
    ab, ba = compare_versions(a, b), compare_versions(b, a)
    assert ab in (Ordering.LESS, Ordering.EQUAL, Ordering.GREATER)
    assert ab == -ba
    assert (ab is Ordering.EQUAL) == (VersionKey(a) == VersionKey(b))
    if ab is Ordering.EQUAL:
        assert hash(VersionKey(a)) == hash(VersionKey(b))


@settings(max_examples=1000)
@given(any_versions, any_versions, any_versions)
def test_version_order_transitive(a, b, c):
    for x, y, z in itertools.permutations([a, b, c]):
        if compare_versions(x, y) <= 0 and compare_versions(y, z) <= 0:
            assert compare_versions(x, z) <= 0


@given(any_versions)
def test_equal_strings_compare_equal(a):
    assert compare_versions(a, a) is Ordering.EQUAL


@pytest.mark.parametrize(
    "events, exact, version, expected",
    [
        ([("introduced", "2.0"), ("fixed", "2.8.2")], [], "2.8.1", True),
        ([("introduced", "2.0"), ("fixed", "2.8.2")], [], "2.8.2", False),
        ([("introduced", "2.0"), ("fixed", "2.8.2")], [], "2.0", True),
        ([("introduced", "2.0"), ("fixed", "2.8.2")], [], "2.0-beta9", False),
        ([], ["2.10.0"], "2.10.0", True),
        ([], ["2.10.0"], "2.10.1", False),
        ([("introduced", "0"), ("last_affected", "1.5")], [], "1.5", True),
        ([("introduced", "0"), ("last_affected", "1.5")], [], "1.5.1", False),
        ([("introduced", "1.0")], [], "99", True),
        ([("introduced", "2.0-beta9"), ("fixed", "2.12.2"), ("introduced", "2.13.0"), ("fixed", "2.16.0")],
         [], "2.12.5", False),
        ([("introduced", "2.0-beta9"), ("fixed", "2.12.2"), ("introduced", "2.13.0"), ("fixed", "2.16.0")],
         [], "2.15.0", True),
    ],
)
def test_range_contains_examples(events, exact, version, expected):
    assert range_contains(VersionRange.from_events(events, exact), version) is expected


def _window_oracle(events, exact, v):
    """Materialize [introduced, fixed) / [introduced, last_affected] windows and test membership."""
    key = VersionKey(v)
    if key in {VersionKey(e) for e in exact}:
        return True
    windows = []
    lo = None
    for kind, ver in events:
        if kind == "introduced":
            lo = VersionKey(ver)
        elif lo is not None:
            windows.append((lo, VersionKey(ver), kind == "last_affected"))
            lo = None
    if lo is not None:
        windows.append((lo, None, True))
    return any(
        lo <= key and (hi is None or key < hi or (closed and key == hi)) for lo, hi, closed in windows
    )


_pool = [f"{a}.{b}" for a in range(4) for b in range(4)]


@st.composite
def ranges(draw):
    points = sorted(set(draw(st.lists(st.sampled_from(_pool), max_size=6))), key=VersionKey)
    events = []
    for i, p in enumerate(points):
        kind = "introduced" if i % 2 == 0 else draw(st.sampled_from(["fixed", "last_affected"]))
        events.append((kind, p))
    exact = draw(st.lists(st.sampled_from(_pool), max_size=2))
    return events, exact


@settings(max_examples=1000)
@given(ranges(), st.sampled_from(_pool + ["0", "3.3.1", "4.0", "1.1-rc1"]))
def test_range_contains_agrees_with_window_oracle(r, v):
    events, exact = r
    shuffled = list(reversed(events))  # event input order must not matter
    assert range_contains(VersionRange.from_events(shuffled, exact), v) == _window_oracle(events, exact, v)


def test_component_identity_excludes_primary_and_tags_sources():
    primary = parse_purl("pkg:maven/a/b@1")
    up = parse_purl("pkg:maven/c/d@2")
    ident = ComponentIdentity(
        primary,
        ((primary, LineageSource.CYCLONEDX_PEDIGREE), (up, LineageSource.SPDX_HAS_VARIANT),
         (up, LineageSource.CYCLONEDX_PEDIGREE)),
    )
    assert ident.lineage == ((up, LineageSource.SPDX_HAS_VARIANT),)
    assert ident.all_identities() == [(primary, False), (up, True)]


@given(st.lists(st.sampled_from(["pkg:maven/a/b@1", "pkg:maven/a/b@2", "pkg:maven/c/d@1"]), max_size=4))
def test_primary_never_in_lineage(texts):
    primary = parse_purl("pkg:maven/a/b@1")
    ident = ComponentIdentity(primary, tuple((parse_purl(t), LineageSource.CYCLONEDX_PEDIGREE) for t in texts))
    assert primary not in ident.lineage_purls
    assert len(ident.lineage) == len(set(ident.lineage_purls))


def test_version_key_sorting_is_stable_over_permutations():
    vs = ["1.0-alpha", "1.0-beta", "1.0-milestone", "1.0-rc", "1.0-SNAPSHOT", "1.0", "1.0-custom", "1.1"]
    for perm in itertools.islice(itertools.permutations(vs), 200):
        assert [k.text for k in sorted(map(VersionKey, perm))] == vs
