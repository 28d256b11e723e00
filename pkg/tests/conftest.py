from __future__ import annotations

import os
import sys
import zipfile
from pathlib import Path

import pytest

from hipaachecker.catalog import builtin_catalog

# make `import oracle` work regardless of how pytest was invoked
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def catalog():
    return builtin_catalog()


@pytest.fixture(scope="session")
def strict_catalog():
    return builtin_catalog("strict")


def write_tree(root: Path, files: dict[str, str]) -> Path:
    """Materialize {relative_path: content} under root."""
    for rel, content in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
    return root


# A source file that satisfies every checkable rule. One line can satisfy
# several rules when the same exception type appears in multiple sub-rules.
ALL_RULES_JAVA = """\
package fixture;

import javax.net.ssl.TrustManager;

public class Compliant {
    void deny() {
        throw new AuthorizationException("no access");
    }

    void store(SQLiteDatabase db) {
        db.execSQL("CREATE TABLE patient (id INTEGER PRIMARY KEY)");
    }

    public void onUserInteraction() {
        resetTimer();
    }

    void secure(HttpsURLConnection conn, String token) throws Exception {
        Cipher cipher = Cipher.getInstance("AES");
        callback = new AppOpsManager.OnOpNotedCallback() {};
        FirebaseAuth auth = FirebaseAuth.getInstance();
        conn.addRequestProperty("Authorization", token);
        byte[] raw = android.util.Base64.decode(token, 0);
    }
}
"""

NO_MATCH_JAVA = """\
package fixture;

public class Plain {
    int add(int a, int b) {
        return a + b;
    }
}
"""


@pytest.fixture
def all_rules_app(tmp_path: Path) -> Path:
    return write_tree(tmp_path / "app_all_rules",
                      {"src/Compliant.java": ALL_RULES_JAVA})


@pytest.fixture
def no_match_app(tmp_path: Path) -> Path:
    return write_tree(tmp_path / "app_plain",
                      {"src/Plain.java": NO_MATCH_JAVA})


# Sources a stub decompiler emits, so APK scans have known content.
STUB_DECOMPILED = {
    "sources/com/example/Audit.java": (
        "package com.example;\n"
        "public class Audit {\n"
        "    AppOpsManager.OnOpNotedCallback callback;\n"
        "    void save(SQLiteDatabase db) {\n"
        "        db.execSQL(\"CREATE TABLE t (id INTEGER PRIMARY KEY)\");\n"
        "    }\n"
        "}\n"
    ),
}

_STUB_SCRIPT = """\
import pathlib
import sys

files = {files!r}
out = pathlib.Path(sys.argv[2])
for rel, content in files.items():
    path = out / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")
"""


def make_stub_decompiler(
    directory: Path, files: dict[str, str] | None = None,
) -> str:
    """Write a decompiler stand-in; returns its command template."""
    script = directory / "stub_decompiler.py"
    script.write_text(
        _STUB_SCRIPT.format(files=files or STUB_DECOMPILED),
        encoding="utf-8")
    return f"{sys.executable} {script} {{apk}} {{out}}"


def make_failing_decompiler(directory: Path) -> str:
    script = directory / "failing_decompiler.py"
    script.write_text(
        "import sys\n"
        "sys.stderr.write('decode error: unsupported dex version\\n')\n"
        "sys.exit(4)\n",
        encoding="utf-8")
    return f"{sys.executable} {script} {{apk}} {{out}}"


def make_sleeping_decompiler(directory: Path) -> str:
    script = directory / "sleeping_decompiler.py"
    script.write_text("import time\ntime.sleep(60)\n", encoding="utf-8")
    return f"{sys.executable} {script} {{apk}} {{out}}"


def make_apk(path: Path, with_dex: bool = True) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w") as zf:
        if with_dex:
            zf.writestr("classes.dex", b"dex\n035\x00stub")
        zf.writestr("AndroidManifest.xml", "<manifest/>")
        zf.writestr("res/values/strings.xml", "<resources/>")
    return path


@pytest.fixture
def sample_apk(tmp_path: Path) -> Path:
    return make_apk(tmp_path / "sample.apk")


@pytest.fixture
def stub_decompiler(tmp_path: Path) -> str:
    return make_stub_decompiler(tmp_path)


@pytest.fixture(autouse=True)
def _no_env_decompiler(monkeypatch):
    """Keep the environment from leaking a decompiler into tests."""
    monkeypatch.delenv("HIPAACHECKER_DECOMPILER", raising=False)


def env_without_pycache() -> dict[str, str]:
    env = dict(os.environ)
    env["PYTHONDONTWRITEBYTECODE"] = "1"
    return env
