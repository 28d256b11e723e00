from __future__ import annotations

import json
import subprocess
import sys

import pytest

from conftest import (
    env_without_pycache,
    make_apk,
    make_failing_decompiler,
    make_stub_decompiler,
    write_tree,
)
from hipaachecker.cli import run

CUSTOM_RULES = """\
[rule] Logging ref=164.312(b)
recommend: add an audit log
[subrule] "Callback" mode=any polarity=evidence
pattern: OnOpNotedCallback
"""


class TestScan:
    def test_compliant_exit_0(self, all_rules_app, capsys):
        assert run(["scan", str(all_rules_app)]) == 0
        out = capsys.readouterr().out
        assert "satisfied 11/11 checkable" in out
        assert "[FAIL]" not in out

    def test_noncompliant_exit_1(self, no_match_app, capsys):
        assert run(["scan", str(no_match_app)]) == 1
        out = capsys.readouterr().out
        assert "satisfied 0/11 checkable" in out
        assert "[PASS]" not in out
        assert "[N/A] 164.312(a)(2)(ii) Emergency_EPHI_Access" in out

    def test_text_is_default_format(self, all_rules_app, tmp_path, capsys,
                                    monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(["scan", str(all_rules_app)])
        assert capsys.readouterr().out
        assert not (tmp_path / "report.json").exists()
        assert not (tmp_path / "report.html").exists()

    def test_json_and_html_written_to_out(self, all_rules_app, tmp_path,
                                          capsys):
        out_dir = tmp_path / "reports"
        code = run(["scan", str(all_rules_app), "--format", "json",
                    "--format", "html", "--out", str(out_dir)])
        assert code == 0
        assert capsys.readouterr().out == ""
        doc = json.loads((out_dir / "report.json").read_text("utf-8"))
        assert doc["app_id"] == "app_all_rules"
        assert doc["scanned_root"] == str(all_rules_app)
        page = (out_dir / "report.html").read_text("utf-8")
        assert page.startswith("<!DOCTYPE html>")

    def test_deterministic_byte_identical_across_workers(self, all_rules_app,
                                                         tmp_path):
        outputs = []
        for i, workers in enumerate(("1", "4")):
            out_dir = tmp_path / f"run{i}"
            code = run(["scan", str(all_rules_app), "--deterministic",
                        "--workers", workers, "--format", "json",
                        "--format", "html", "--out", str(out_dir)])
            assert code == 0
            outputs.append((
                (out_dir / "report.json").read_bytes(),
                (out_dir / "report.html").read_bytes()))
        assert outputs[0] == outputs[1]
        assert b'"timestamp": "1970-01-01T00:00:00Z"' in outputs[0][0]

    def test_custom_rules_file(self, tmp_path, capsys):
        rules = tmp_path / "logging.rules"
        rules.write_text(CUSTOM_RULES, encoding="utf-8")
        app = write_tree(tmp_path / "app", {
            "A.java": "AppOpsManager.OnOpNotedCallback cb;\n"})
        assert run(["scan", str(app), "--rules", str(rules)]) == 0
        out = capsys.readouterr().out
        assert out == ("[PASS] 164.312(b) Logging\n"
                       "satisfied 1/1 checkable\n")

    def test_rules_with_nondefault_profile_is_usage_error(self, tmp_path,
                                                          all_rules_app,
                                                          capsys):
        rules = tmp_path / "r.rules"
        rules.write_text(CUSTOM_RULES, encoding="utf-8")
        code = run(["scan", str(all_rules_app), "--rules", str(rules),
                    "--profile", "strict"])
        assert code == 2
        assert "--rules" in capsys.readouterr().err

    def test_strict_profile_flag(self, tmp_path, capsys):
        app = write_tree(tmp_path / "weak", {
            "A.java": 'Cipher c = Cipher.getInstance("DES");\n'})
        assert run(["scan", str(app), "--profile", "paper"]) == 1
        paper_out = capsys.readouterr().out
        assert "[PASS] 164.312(a)(2)(iv) EPHI_encryption_decryption" \
            in paper_out
        assert run(["scan", str(app), "--profile", "strict"]) == 1
        strict_out = capsys.readouterr().out
        assert "[FAIL] 164.312(a)(2)(iv) EPHI_encryption_decryption" \
            in strict_out

    def test_unreadable_rules_file(self, all_rules_app, capsys):
        code = run(["scan", str(all_rules_app), "--rules", "/no/such.rules"])
        assert code == 2
        assert "cannot read rules file" in capsys.readouterr().err

    def test_bad_rules_syntax(self, tmp_path, all_rules_app, capsys):
        rules = tmp_path / "broken.rules"
        rules.write_text("pattern: orphan\n", encoding="utf-8")
        assert run(["scan", str(all_rules_app),
                    "--rules", str(rules)]) == 2

    def test_missing_target_exit_3(self, tmp_path, capsys):
        assert run(["scan", str(tmp_path / "missing")]) == 3
        assert "error:" in capsys.readouterr().err

    def test_unknown_flag_exit_2(self, all_rules_app, capsys):
        assert run(["scan", str(all_rules_app), "--frobnicate"]) == 2

    def test_missing_subcommand_exit_2(self, capsys):
        assert run([]) == 2

    def test_workers_zero_exit_2(self, all_rules_app, capsys):
        assert run(["scan", str(all_rules_app), "--workers", "0"]) == 2


class TestScanApk:
    def test_apk_scan(self, tmp_path, sample_apk, stub_decompiler, capsys):
        code = run(["scan", str(sample_apk),
                    "--decompiler", stub_decompiler])
        assert code == 1
        out = capsys.readouterr().out
        assert "[PASS] 164.312(b) EPHI_Audit_Control" in out
        assert "[PASS] 164.312(a)(2)(i) Unique_Id" in out

    def test_apk_without_decompiler_exit_2(self, sample_apk, capsys):
        assert run(["scan", str(sample_apk)]) == 2
        assert "HIPAACHECKER_DECOMPILER" in capsys.readouterr().err

    def test_decompiler_from_environment(self, sample_apk, stub_decompiler,
                                         monkeypatch, capsys):
        monkeypatch.setenv("HIPAACHECKER_DECOMPILER", stub_decompiler)
        assert run(["scan", str(sample_apk)]) == 1
        assert "EPHI_Audit_Control" in capsys.readouterr().out

    def test_flag_beats_environment(self, tmp_path, sample_apk, capsys,
                                    monkeypatch):
        monkeypatch.setenv("HIPAACHECKER_DECOMPILER", "/broken {apk} {out}")
        template = make_stub_decompiler(tmp_path)
        assert run(["scan", str(sample_apk), "--decompiler", template]) == 1

    def test_failing_decompiler_exit_3(self, tmp_path, sample_apk, capsys):
        template = make_failing_decompiler(tmp_path)
        code = run(["scan", str(sample_apk), "--decompiler", template])
        assert code == 3
        assert "unsupported dex version" in capsys.readouterr().err

    def test_timeout_flag(self, tmp_path, sample_apk, capsys):
        # a bad timeout value is rejected before anything runs
        template = make_stub_decompiler(tmp_path)
        code = run(["scan", str(sample_apk), "--decompiler", template,
                    "--timeout", "0"])
        assert code == 2
        assert run(["scan", str(sample_apk), "--decompiler", template,
                    "--timeout", "30"]) == 1

    def test_not_an_apk_exit_3(self, tmp_path, stub_decompiler, capsys):
        bogus = tmp_path / "fake.apk"
        bogus.write_bytes(b"not zip data")
        code = run(["scan", str(bogus), "--decompiler", stub_decompiler])
        assert code == 3


def write_manifest(tmp_path, rows):
    manifest = tmp_path / "manifest.csv"
    manifest.write_text(
        "app_id,category,kind,path\n" + "".join(r + "\n" for r in rows),
        encoding="utf-8")
    return manifest


class TestBatch:
    def test_batch_end_to_end(self, tmp_path, all_rules_app, no_match_app,
                              capsys):
        manifest = write_manifest(tmp_path, [
            f"good,medical,source,{all_rules_app}",
            f"bad,health_fitness,source,{no_match_app}",
        ])
        out_dir = tmp_path / "corpus"
        code = run(["batch", "--manifest", str(manifest),
                    "--out", str(out_dir), "--deterministic"])
        assert code == 0
        captured = capsys.readouterr()
        assert "scanned 2/2 apps" in captured.out
        assert (out_dir / "good" / "report.json").is_file()
        assert (out_dir / "bad" / "report.html").is_file()
        stats = (out_dir / "stats.csv").read_text("utf-8")
        assert stats.splitlines()[0] == "metric,category,rule_id,value"
        assert "prevalence,,EPHI_Audit_Control,50.0" in stats

    def test_stats_path_flag(self, tmp_path, all_rules_app, capsys):
        manifest = write_manifest(
            tmp_path, [f"a,medical,source,{all_rules_app}"])
        stats_path = tmp_path / "elsewhere" / "agg.csv"
        code = run(["batch", "--manifest", str(manifest),
                    "--out", str(tmp_path / "w"),
                    "--stats", str(stats_path)])
        assert code == 0
        assert stats_path.is_file()
        assert not (tmp_path / "w" / "stats.csv").exists()

    def test_partial_failure_still_succeeds(self, tmp_path, all_rules_app,
                                            capsys):
        manifest = write_manifest(tmp_path, [
            f"ok,medical,source,{all_rules_app}",
            f"ghost,medical,source,{tmp_path / 'nope'}",
        ])
        code = run(["batch", "--manifest", str(manifest),
                    "--out", str(tmp_path / "w")])
        assert code == 0
        captured = capsys.readouterr()
        assert "failed: ghost:" in captured.err
        assert "scanned 1/2 apps" in captured.out

    def test_all_apps_failing_exit_3(self, tmp_path, capsys):
        manifest = write_manifest(tmp_path, [
            f"ghost,medical,source,{tmp_path / 'nope'}",
        ])
        code = run(["batch", "--manifest", str(manifest),
                    "--out", str(tmp_path / "w")])
        assert code == 3
        assert "no app scanned successfully" in capsys.readouterr().err

    def test_missing_manifest_exit_2(self, tmp_path, capsys):
        code = run(["batch", "--manifest", str(tmp_path / "gone.csv"),
                    "--out", str(tmp_path / "w")])
        assert code == 2
        assert "cannot read manifest" in capsys.readouterr().err

    def test_bad_manifest_header_exit_2(self, tmp_path, capsys):
        manifest = tmp_path / "m.csv"
        manifest.write_text("wrong,header\n", encoding="utf-8")
        code = run(["batch", "--manifest", str(manifest),
                    "--out", str(tmp_path / "w")])
        assert code == 2

    def test_apk_rows_need_decompiler_exit_2(self, tmp_path, capsys):
        apk = make_apk(tmp_path / "a.apk")
        manifest = write_manifest(tmp_path, [f"a,medical,apk,{apk}"])
        code = run(["batch", "--manifest", str(manifest),
                    "--out", str(tmp_path / "w")])
        assert code == 2
        assert "decompiler" in capsys.readouterr().err

    def test_batch_with_apk_and_workers(self, tmp_path, stub_decompiler,
                                        all_rules_app, capsys):
        apk = make_apk(tmp_path / "pkgs" / "a.apk")
        manifest = write_manifest(tmp_path, [
            f"apkapp,medical,apk,{apk}",
            f"srcapp,other,source,{all_rules_app}",
        ])
        code = run(["batch", "--manifest", str(manifest),
                    "--out", str(tmp_path / "w"),
                    "--decompiler", stub_decompiler,
                    "--workers", "2", "--profile", "strict"])
        assert code == 0
        assert "scanned 2/2 apps" in capsys.readouterr().out


class TestRules:
    def test_list_text(self, capsys):
        assert run(["rules", "list"]) == 0
        out = capsys.readouterr().out
        assert ("12 safeguards, 11 checkable rules, 31 sub-rules, "
                "70 patterns") in out
        assert "164.312(a)(2)(ii)" in out
        assert "not checkable" in out

    def test_list_json(self, catalog, capsys):
        assert run(["rules", "list", "--format", "json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["safeguards"] == 12
        assert doc["checkable_rules"] == 11
        assert doc["sub_rules"] == 31
        assert doc["patterns"] == 70
        assert doc["catalog_checksum"] == catalog.checksum
        assert len(doc["rules"]) == 12
        unique = next(r for r in doc["rules"] if r["rule_id"] == "Unique_Id")
        assert unique["sub_rules"][0]["patterns"] == ["PRIMARY KEY"]

    def test_list_strict_profile(self, capsys):
        assert run(["rules", "list", "--format", "json",
                    "--profile", "strict"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["patterns"] == 71

    def test_list_custom_rules(self, tmp_path, capsys):
        rules = tmp_path / "r.rules"
        rules.write_text(CUSTOM_RULES, encoding="utf-8")
        assert run(["rules", "list", "--rules", str(rules)]) == 0
        out = capsys.readouterr().out
        assert "1 safeguards, 1 checkable rules, 1 sub-rules, 1 patterns" \
            in out


class TestRender:
    @pytest.fixture
    def report_json(self, tmp_path, all_rules_app):
        out_dir = tmp_path / "first"
        run(["scan", str(all_rules_app), "--deterministic",
             "--format", "json", "--out", str(out_dir)])
        return out_dir / "report.json"

    def test_default_html(self, tmp_path, report_json, capsys):
        out_dir = tmp_path / "rendered"
        code = run(["render", "--json", str(report_json),
                    "--out", str(out_dir)])
        assert code == 0
        page = (out_dir / "report.html").read_text("utf-8")
        assert "app_all_rules" in page

    def test_text_format(self, report_json, capsys):
        assert run(["render", "--json", str(report_json),
                    "--format", "text"]) == 0
        assert "satisfied 11/11 checkable" in capsys.readouterr().out

    def test_missing_report_exit_2(self, tmp_path, capsys):
        assert run(["render", "--json", str(tmp_path / "no.json")]) == 2

    def test_invalid_json_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        assert run(["render", "--json", str(bad)]) == 2

    def test_wrong_shape_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "shape.json"
        bad.write_text('{"foo": 1}', encoding="utf-8")
        assert run(["render", "--json", str(bad)]) == 2
        assert "unexpected report shape" in capsys.readouterr().err


class TestConsoleScript:
    def test_installed_entry_point(self):
        proc = subprocess.run(
            ["hipaachecker", "rules", "list"],
            capture_output=True, text=True, env=env_without_pycache())
        assert proc.returncode == 0
        assert "70 patterns" in proc.stdout

    def test_module_invocation(self, no_match_app):
        proc = subprocess.run(
            [sys.executable, "-m", "hipaachecker.cli", "scan",
             str(no_match_app)],
            capture_output=True, text=True, env=env_without_pycache())
        assert proc.returncode == 1
        assert "satisfied 0/11 checkable" in proc.stdout
