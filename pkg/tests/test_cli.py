"""Command-line interface: golden outputs and exit codes."""

import subprocess
import sys
from importlib import resources

import pytest

from leakbound.cli import main
from leakbound.dimacs import parse_dimacs
from leakbound.sat import solve


@pytest.fixture(autouse=True)
def in_corpus(monkeypatch):
    monkeypatch.chdir(resources.files("leakbound") / "corpus")


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:      # argparse usage errors
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def test_check_violated(capsys):
    code, out, _ = run(capsys, "check", "modulo.mc", "--policy", "3", "--no-trace")
    assert code == 1
    assert out == (
        "leakbound check modulo.mc: entry modulo, policy N=3, arch 32, unwind k=8\n"
        "Verdict: Violated -- 4 distinct observations for one low input\n"
        "Low input: l=0\n"
        "Run 1: h=0 -> __return=0\n"
        "Run 2: h=2 -> __return=2\n"
        "Run 3: h=1 -> __return=1\n"
        "Run 4: h=3 -> __return=3\n"
    )


def test_check_trace_is_printed_by_default(capsys):
    code, out, _ = run(capsys, "check", "modulo.mc", "-N", "3")
    assert code == 1
    assert "State 1 file " in out and "function main copy 0" in out


def test_check_verified(capsys):
    code, out, _ = run(capsys, "check", "modulo.mc", "--policy", "4")
    assert code == 0
    assert "Verdict: VerifiedComplete -- at most 4 distinction(s) for every execution" in out


def test_check_vacuous(capsys):
    code, out, _ = run(capsys, "check", "modulo.mc", "-N", "6")
    assert code == 2
    assert "at most 4 distinct observation(s) are possible" in out


def test_check_insufficient_bound(capsys):
    code, out, _ = run(capsys, "check", "loop3.mc", "-N", "4", "-k", "2")
    assert code == 3
    assert "Verdict: InsufficientBound -- unwinding assertions fail at k=2; increase --unwind" in out


@pytest.mark.parametrize("arch, code", [("32", 0), ("64", 1)])
def test_padding_leak_depends_on_architecture(capsys, arch, code):
    got, out, _ = run(capsys, "check", "sigaltstack.mc", "--arch", arch, "--policy", "1", "--no-trace")
    assert got == code
    assert f"arch {arch}" in out.splitlines()[0]


def test_capacity(capsys):
    code, out, _ = run(capsys, "capacity", "login.mc")
    assert code == 0
    assert out.splitlines()[1:] == [
        "Capacity: N*=3, 1.585 bits, exact",
        "Probes: N=1 Violated, N=2 Violated, N=4 VerifiedComplete, N=3 VerifiedComplete",
    ]


def test_oracle_classes(capsys):
    code, out, _ = run(capsys, "oracle", "modulo.mc", "--low", "1", "--show-classes")
    assert code == 0
    lines = out.splitlines()
    assert lines[1:3] == ["Low input: l=1", "Classes: 4 (2.000 bits)"]
    assert lines[4].startswith("  class 2: {1, 5, 9, 13, ") and lines[4].endswith("253} -> (2,)")


def test_kv_format(capsys):
    code, out, _ = run(capsys, "check", "modulo.mc", "-N", "4", "--format", "kv")
    assert code == 0
    kv = dict(line.split("=", 1) for line in out.splitlines())
    assert kv == {"command": "check", "file": "modulo.mc", "entry": "modulo", "arch": "32", "policy": "4",
                  "unwind": "8", "unwinding_assertions": "true", "verdict": "VerifiedComplete",
                  "exit_code": "0"}


def test_export_dimacs(capsys, tmp_path):
    target = tmp_path / "q.cnf"
    code, _, _ = run(capsys, "export-dimacs", "modulo.mc", "-N", "3", "-o", str(target))
    assert code == 0
    text = target.read_text()
    assert text.startswith("c map ")
    assert solve(parse_dimacs(text)).sat          # N=3 is violated, so the query is satisfiable
    code, out, _ = run(capsys, "export-dimacs", "modulo.mc", "-N", "4", "--no-map")
    assert out.startswith("p cnf ") and not solve(parse_dimacs(out)).sat


def test_emit_driver_writes_header(capsys, tmp_path):
    target = tmp_path / "driver.c"
    code, _, _ = run(capsys, "emit-driver", "modulo.mc", "-N", "1", "-o", str(target))
    assert code == 0
    assert (tmp_path / "leakbound_stubs.h").exists()
    assert "int main()" in target.read_text()


def test_list_builtins(capsys):
    code, out, _ = run(capsys, "list-builtins")
    assert code == 0
    assert out.splitlines()[:2] == ["void assert(bool)", "    claim checked by the model checker"]
    code, out, _ = run(capsys, "list-builtins", "--format", "kv")
    assert code == 0 and "memcmp" in out


@pytest.mark.parametrize("argv", [
    ("check", "modulo.mc", "--bogus", "-N", "1"),
    ("check", "modulo.mc"),
    ("check", "modulo.mc", "-N", "0"),
    ("check", "nofile.mc", "-N", "1"),
    ("frobnicate",),
])
def test_usage_and_input_errors_exit_4(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 4
    assert "error" in err


def test_program_errors_exit_4(capsys, tmp_path):
    bad = tmp_path / "bad.mc"
    bad.write_text("int f(int x) { return x + ; }\n")
    code, _, err = run(capsys, "check", str(bad), "-N", "1")
    assert code == 4
    assert "bad.mc:1:" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "leakbound", "check", "modulo.mc", "-N", "4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "VerifiedComplete" in proc.stdout
