"""Assemble the app/lib1/log4j-core class files and jars without a Java toolchain.

Writes deterministic jars to ``src/sbomscope/data/jars`` and two standalone
classes to ``tests/data/classes``. Needs ``jawa`` (dev only)::

    pip install jawa
    python tools/build_class_fixtures.py

If a ``java`` launcher is on PATH (or passed with ``--java``) every app jar is
also executed as a load/verify check.
"""

from __future__ import annotations

import argparse
import io
import os
import shutil
import subprocess
import tempfile
import zipfile

from jawa.assemble import assemble
from jawa.cf import ClassFile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
JAR_DIR = os.path.join(ROOT, "src", "sbomscope", "data", "jars")
CLASS_DIR = os.path.join(ROOT, "tests", "data", "classes")

SERVER = "org/apache/logging/log4j/core/net/server/TcpSocketServer"
CORE_LOGGER = "org/apache/logging/log4j/core/Logger"
LIB1 = "example/lib1/Lib1"
FIXED_TIME = (1980, 1, 1, 0, 0, 0)


def _method(cf, name, descriptor, body, *, static=True, max_stack=4, max_locals=2):
    m = cf.methods.create(name, descriptor, code=True)
    m.access_flags.acc_public = True
    m.access_flags.acc_static = static
    m.code.max_stack = max_stack
    m.code.max_locals = max_locals
    m.code.assemble(assemble(body))
    return m


def _ctor(cf, super_="java/lang/Object"):
    c = cf.constants
    _method(cf, "<init>", "()V", [
        ("aload_0",),
        ("invokespecial", c.create_method_ref(super_, "<init>", "()V")),
        ("return",),
    ], static=False, max_stack=1, max_locals=1)


def _println(cf, text):
    c = cf.constants
    return [
        ("getstatic", c.create_field_ref("java/lang/System", "out", "Ljava/io/PrintStream;")),
        ("ldc", c.create_string(text)),
        ("invokevirtual", c.create_method_ref("java/io/PrintStream", "println", "(Ljava/lang/String;)V")),
    ]


def _save(cf) -> bytes:
    buf = io.BytesIO()
    cf.save(buf)
    return buf.getvalue()


def tcp_socket_server() -> bytes:
    cf = ClassFile.create(SERVER)
    cf.access_flags.acc_public = True
    cf._interfaces.append(cf.constants.create_class("java/lang/Runnable").index)
    c = cf.constants
    _ctor(cf)
    _method(cf, "createSerializedSocketServer", f"(I)L{SERVER};", [
        ("new", c.create_class(SERVER)),
        ("dup",),
        ("invokespecial", c.create_method_ref(SERVER, "<init>", "()V")),
        ("areturn",),
    ])
    _method(cf, "run", "()V", _println(cf, "log4j-core TcpSocketServer.run") + [("return",)],
            static=False, max_locals=1)
    return _save(cf)


def core_logger() -> bytes:
    cf = ClassFile.create(CORE_LOGGER)
    cf.access_flags.acc_public = True
    cf._interfaces.append(cf.constants.create_class("org/apache/logging/log4j/Logger").index)
    c = cf.constants
    _ctor(cf)
    _method(cf, "getLevel", "()Lorg/apache/logging/log4j/Level;", [
        ("getstatic", c.create_field_ref("org/apache/logging/log4j/Level", "INFO",
                                         "Lorg/apache/logging/log4j/Level;")),
        ("areturn",),
    ], static=False, max_locals=1)
    return _save(cf)


def lib1() -> bytes:
    cf = ClassFile.create(LIB1)
    cf.access_flags.acc_public = True
    c = cf.constants
    _ctor(cf)
    _method(cf, "hello", "()V", _println(cf, "lib1 says hello") + [("return",)])
    _method(cf, "server", "(I)Ljava/lang/Runnable;", [
        ("iload_0",),
        ("invokestatic", c.create_method_ref(SERVER, "createSerializedSocketServer", f"(I)L{SERVER};")),
        ("areturn",),
    ])
    return _save(cf)


def _app(body_for) -> bytes:
    cf = ClassFile.create("example/app/Main")
    cf.access_flags.acc_public = True
    _ctor(cf)
    c = cf.constants
    hello = [("invokestatic", c.create_method_ref(LIB1, "hello", "()V"))]
    _method(cf, "main", "([Ljava/lang/String;)V", hello + body_for(c) + [("return",)])
    return _save(cf)


def app_static() -> bytes:
    # Type-1: the log4j-core type is named directly at the call site.
    return _app(lambda c: [
        ("sipush", 4560),
        ("invokestatic", c.create_method_ref(SERVER, "createSerializedSocketServer", f"(I)L{SERVER};")),
        ("invokevirtual", c.create_method_ref(SERVER, "run", "()V")),
    ])


def app_dynamic() -> bytes:
    # Type-2: only the Runnable interface appears at the call site.
    return _app(lambda c: [
        ("sipush", 4560),
        ("invokestatic", c.create_method_ref(LIB1, "server", "(I)Ljava/lang/Runnable;")),
        ("invokeinterface", c.create_interface_method_ref("java/lang/Runnable", "run", "()V"), 1, 0),
    ])


def app_reflective() -> bytes:
    # Type-3: the class name exists only as a string literal.
    return _app(lambda c: [
        ("ldc", c.create_string(SERVER.replace("/", "."))),
        ("invokestatic", c.create_method_ref("java/lang/Class", "forName",
                                             "(Ljava/lang/String;)Ljava/lang/Class;")),
        ("invokevirtual", c.create_method_ref("java/lang/Class", "newInstance", "()Ljava/lang/Object;")),
        ("checkcast", c.create_class("java/lang/Runnable")),
        ("invokeinterface", c.create_interface_method_ref("java/lang/Runnable", "run", "()V"), 1, 0),
    ])


def app_unreachable() -> bytes:
    return _app(lambda c: [])


def guava_caller() -> bytes:
    cf = ClassFile.create("bt/dht/DHTStorage")
    cf.access_flags.acc_public = True
    c = cf.constants
    _ctor(cf)
    _method(cf, "storageDir", "()Ljava/io/File;", [
        ("invokestatic", c.create_method_ref("com/google/common/io/Files", "createTempDir", "()Ljava/io/File;")),
        ("areturn",),
    ])
    return _save(cf)


def empty_class() -> bytes:
    return _save(ClassFile.create("example/Empty"))


def _pom_properties(group, artifact, version) -> bytes:
    return f"artifactId={artifact}\ngroupId={group}\nversion={version}\n".encode()


def write_jar(path, classes, coords=None, main_class=None):
    entries = {}
    manifest = "Manifest-Version: 1.0\r\n"
    if main_class:
        manifest += f"Main-Class: {main_class}\r\n"
    entries["META-INF/MANIFEST.MF"] = (manifest + "\r\n").encode()
    if coords:
        group, artifact, version = coords
        entries[f"META-INF/maven/{group}/{artifact}/pom.properties"] = _pom_properties(*coords)
    for name, data in classes.items():
        entries[name + ".class"] = data
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(entries, key=lambda n: (not n.startswith("META-INF/MANIFEST"), n)):
            info = zipfile.ZipInfo(name, FIXED_TIME)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            zf.writestr(info, entries[name])


APPS = {
    "app-static": app_static,
    "app-dynamic": app_dynamic,
    "app-reflective": app_reflective,
    "app-unreachable": app_unreachable,
}


def build(jar_dir=JAR_DIR, class_dir=CLASS_DIR):
    os.makedirs(jar_dir, exist_ok=True)
    os.makedirs(class_dir, exist_ok=True)
    written = []
    core = os.path.join(jar_dir, "log4j-core-2.8.1.jar")
    write_jar(core, {SERVER: tcp_socket_server(), CORE_LOGGER: core_logger()},
              ("org.apache.logging.log4j", "log4j-core", "2.8.1"))
    lib = os.path.join(jar_dir, "lib1-1.0-SNAPSHOT.jar")
    write_jar(lib, {LIB1: lib1()}, ("example", "lib1", "1.0-SNAPSHOT"))
    written += [core, lib]
    for app, make in APPS.items():
        path = os.path.join(jar_dir, f"{app}-1.0-SNAPSHOT.jar")
        write_jar(path, {"example/app/Main": make()}, ("example", app, "1.0-SNAPSHOT"), "example.app.Main")
        written.append(path)
    for name, data in (("DHTStorage.class", guava_caller()), ("Empty.class", empty_class())):
        path = os.path.join(class_dir, name)
        with open(path, "wb") as fh:
            fh.write(data)
        written.append(path)
    return written


def run_with_java(java, jar_dir=JAR_DIR):
    with tempfile.TemporaryDirectory() as tmp:
        for app in APPS:
            cp = os.pathsep.join(os.path.join(jar_dir, j) for j in (
                f"{app}-1.0-SNAPSHOT.jar", "lib1-1.0-SNAPSHOT.jar", "log4j-core-2.8.1.jar"))
            proc = subprocess.run([java, "-cp", cp, "example.app.Main"], capture_output=True, text=True,
                                  cwd=tmp)
            print(f"{app}: exit {proc.returncode}: {proc.stdout.strip()!r} {proc.stderr.strip()[:200]!r}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--java", default=shutil.which("java"))
    args = ap.parse_args()
    for path in build():
        print("wrote", os.path.relpath(path, ROOT))
    if args.java:
        run_with_java(args.java)


if __name__ == "__main__":
    main()
