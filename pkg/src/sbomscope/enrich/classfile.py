"""Constant-pool reader for JVM class files.

Every named type reference a method body can make (call and field owners,
``new``, ``checkcast``/``instanceof``, class literals) is a ``CONSTANT_Class``
entry, so the pool alone yields the referenced classes; no bytecode is
decoded. Member descriptors reachable through ``CONSTANT_NameAndType``
contribute their ``L...;`` types as well.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass

__all__ = ["ClassReferenceSet", "ConstantPool", "MalformedClassFile", "read_constant_pool", "scan_class"]

MAGIC = 0xCAFEBABE

CONSTANT_UTF8 = 1
CONSTANT_INTEGER = 3
CONSTANT_FLOAT = 4
CONSTANT_LONG = 5
CONSTANT_DOUBLE = 6
CONSTANT_CLASS = 7
CONSTANT_STRING = 8
CONSTANT_FIELDREF = 9
CONSTANT_METHODREF = 10
CONSTANT_INTERFACE_METHODREF = 11
CONSTANT_NAME_AND_TYPE = 12
CONSTANT_METHOD_HANDLE = 15
CONSTANT_METHOD_TYPE = 16
CONSTANT_DYNAMIC = 17
CONSTANT_INVOKE_DYNAMIC = 18
CONSTANT_MODULE = 19
CONSTANT_PACKAGE = 20

# Payload size in bytes after the tag, for every fixed-size entry.
_FIXED_SIZE = {
    CONSTANT_INTEGER: 4,
    CONSTANT_FLOAT: 4,
    CONSTANT_LONG: 8,
    CONSTANT_DOUBLE: 8,
    CONSTANT_CLASS: 2,
    CONSTANT_STRING: 2,
    CONSTANT_FIELDREF: 4,
    CONSTANT_METHODREF: 4,
    CONSTANT_INTERFACE_METHODREF: 4,
    CONSTANT_NAME_AND_TYPE: 4,
    CONSTANT_METHOD_HANDLE: 3,
    CONSTANT_METHOD_TYPE: 2,
    CONSTANT_DYNAMIC: 4,
    CONSTANT_INVOKE_DYNAMIC: 4,
    CONSTANT_MODULE: 2,
    CONSTANT_PACKAGE: 2,
}

_OBJECT_TYPE_RE = re.compile(r"L([^;]+);")


class MalformedClassFile(ValueError):
    pass


def _decode_modified_utf8(raw: bytes) -> str:
    # Modified UTF-8 encodes U+0000 as C0 80 and supplementary characters as surrogate pairs.
    text = raw.replace(b"\xc0\x80", b"\x00").decode("utf-8", "surrogatepass")
    return text.encode("utf-16", "surrogatepass").decode("utf-16")


@dataclass(frozen=True)
class ConstantPool:
    """Pool entries by index; ``None`` fills index 0 and the slot after longs/doubles."""

    entries: tuple[tuple[int, object] | None, ...]

    def utf8(self, index: int) -> str:
        entry = self._get(index)
        if entry[0] != CONSTANT_UTF8:
            raise MalformedClassFile(f"constant #{index} is not Utf8 (tag {entry[0]})")
        return entry[1]  # type: ignore[return-value]

    def class_name(self, index: int) -> str:
        entry = self._get(index)
        if entry[0] != CONSTANT_CLASS:
            raise MalformedClassFile(f"constant #{index} is not a Class (tag {entry[0]})")
        return self.utf8(entry[1])  # type: ignore[arg-type]

    def _get(self, index: int) -> tuple[int, object]:
        if not 0 < index < len(self.entries) or self.entries[index] is None:
            raise MalformedClassFile(f"constant pool index {index} out of range")
        return self.entries[index]  # type: ignore[return-value]

    def of_tag(self, tag: int):
        for i, entry in enumerate(self.entries):
            if entry is not None and entry[0] == tag:
                yield i, entry[1]


def read_constant_pool(data: bytes) -> tuple[ConstantPool, int]:
    """Parse the pool; returns it with the offset of ``access_flags``."""
    if len(data) < 10:
        raise MalformedClassFile("truncated header")
    magic, _minor, _major, count = struct.unpack_from(">IHHH", data, 0)
    if magic != MAGIC:
        raise MalformedClassFile(f"bad magic 0x{magic:08X}")
    entries: list[tuple[int, object] | None] = [None]
    pos = 10
    index = 1
    while index < count:
        if pos >= len(data):
            raise MalformedClassFile(f"constant pool truncated at entry #{index}")
        tag = data[pos]
        pos += 1
        if tag == CONSTANT_UTF8:
            if pos + 2 > len(data):
                raise MalformedClassFile(f"constant pool truncated at entry #{index}")
            (length,) = struct.unpack_from(">H", data, pos)
            pos += 2
            raw = data[pos : pos + length]
            if len(raw) != length:
                raise MalformedClassFile(f"constant pool truncated at entry #{index}")
            try:
                value: object = _decode_modified_utf8(raw)
            except UnicodeError as exc:
                raise MalformedClassFile(f"entry #{index}: bad modified UTF-8") from exc
            pos += length
        elif tag in _FIXED_SIZE:
            size = _FIXED_SIZE[tag]
            if pos + size > len(data):
                raise MalformedClassFile(f"constant pool truncated at entry #{index}")
            if size == 2:
                value = struct.unpack_from(">H", data, pos)[0]
            elif tag == CONSTANT_METHOD_HANDLE:
                value = struct.unpack_from(">BH", data, pos)
            elif tag in (CONSTANT_INTEGER, CONSTANT_FLOAT, CONSTANT_LONG, CONSTANT_DOUBLE):
                value = data[pos : pos + size]
            else:
                value = struct.unpack_from(">HH", data, pos)
            pos += size
        else:
            raise MalformedClassFile(f"bad constant pool tag {tag} at entry #{index}")
        entries.append((tag, value))
        index += 1
        if tag in (CONSTANT_LONG, CONSTANT_DOUBLE):
            entries.append(None)
            index += 1
    if len(entries) != count:
        raise MalformedClassFile("long/double entry overruns the constant pool")
    return ConstantPool(tuple(entries)), pos


def _element_type(name: str) -> str | None:
    """Unwrap array class names; ``None`` for primitive arrays."""
    if not name.startswith("["):
        return name
    m = _OBJECT_TYPE_RE.fullmatch(name.lstrip("["))
    return m.group(1) if m else None


@dataclass(frozen=True)
class ClassReferenceSet:
    class_name: str
    referenced: frozenset[str]


def scan_class(data: bytes) -> ClassReferenceSet:
    pool, pos = read_constant_pool(data)
    if pos + 6 > len(data):
        raise MalformedClassFile("truncated after constant pool")
    _access, this_index, _super_index = struct.unpack_from(">HHH", data, pos)
    this_name = pool.class_name(this_index)

    referenced: set[str] = set()
    for _, name_index in pool.of_tag(CONSTANT_CLASS):
        name = _element_type(pool.utf8(name_index))  # type: ignore[arg-type]
        if name:
            referenced.add(name)
    for _, (_name_index, descriptor_index) in pool.of_tag(CONSTANT_NAME_AND_TYPE):  # type: ignore[misc]
        referenced.update(_OBJECT_TYPE_RE.findall(pool.utf8(descriptor_index)))
    referenced.discard(this_name)
    return ClassReferenceSet(this_name, frozenset(referenced))
