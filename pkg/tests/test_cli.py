import io
import json
from contextlib import redirect_stderr, redirect_stdout

import pytest

from parallel_lives import cli


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = cli.main(list(argv))
    return code, out.getvalue(), err.getvalue()


class TestRun:
    def test_example1_check_passes(self):
        code, out, _ = run_cli("run", "example1", "--check")
        assert code == 0
        assert "all golden tables match" in out
        assert "0.640000000000 (16/25)" in out

    def test_unknown_scenario_exit_2(self):
        code, _, err = run_cli("run", "does_not_exist")
        assert code == 2
        assert "error" in err

    def test_lives_counts(self):
        code, out, _ = run_cli("run", "example1", "--lives", "25")
        assert code == 0
        assert "q1 (25 lives): 9, 16" in out or "q1 (25 lives): 16, 9" in out

    def test_lives_not_representable_exit_2(self):
        code, _, err = run_cli("run", "wigner_mermin", "--lives", "7")
        assert code == 2
        assert "whole" in err

    def test_json_format_round_trips(self):
        code, out, _ = run_cli("run", "example2", "--format", "json")
        assert code == 0
        doc = json.loads(out)
        assert doc["schema"] == "pl-report/1"
        assert doc["scenario"] == "example2"
        masses = sorted(round(r["mass"] * 2500)
                        for r in doc["tables"]["compare"]["rows"])
        assert masses == [9, 9, 16, 16, 441, 441, 784, 784]

    @pytest.mark.parametrize("name", ["square_well", "eraser_plus_basis",
                                      "remote_entanglement", "chsh_optimal"])
    def test_json_format_serializes_attachments(self, name):
        code, out, _ = run_cli("run", name, "--format", "json")
        assert code == 0
        doc = json.loads(out)
        assert doc["attachments"]
        if name == "square_well":
            prof = doc["attachments"]["square_well"]["after"]
            assert prof["grid"]["bins"] == len(prof["values"]) == 1024
            assert abs(sum(prof["values"]) - 1.0) < 1e-9

    def test_example3_note_in_output(self):
        code, out, _ = run_cli("run", "example3")
        assert code == 0
        assert "note:" in out and "redistributes" in out

    def test_export_csv(self, tmp_path):
        prefix = str(tmp_path / "sq_")
        code, out, _ = run_cli("run", "square_well", "--export-csv", prefix)
        assert code == 0
        files = sorted(p.name for p in tmp_path.iterdir())
        assert any("before" in f for f in files)
        assert any("after" in f for f in files)
        text = (tmp_path / files[0]).read_text()
        assert text.startswith("x,value")

    def test_check_failure_exit_1(self, tmp_path, monkeypatch):
        # a scenario that runs but has no golden tables fails --check
        from parallel_lives import scenarios

        spec = scenarios.builtin("example1")
        doc = json.loads(scenarios.to_json(spec))
        doc["name"] = "custom_variant"
        path = tmp_path / "custom.json"
        path.write_text(json.dumps(doc))
        code, out, _ = run_cli("run", str(path), "--check")
        assert code == 1
        assert "CHECK FAIL" in out


class TestList:
    def test_catalog_listing(self):
        code, out, _ = run_cli("list")
        assert code == 0
        assert "wigner_mermin" in out.split()


class TestBell:
    def test_mermin_output(self):
        code, out, _ = run_cli("bell", "--mode", "mermin", "--rounds", "2000",
                               "--seed", "7")
        assert code == 0
        assert "classical bound: 0.666667" in out
        assert "exact quantum value: 0.750000" in out

    def test_byte_identical_reruns(self):
        a = run_cli("bell", "--mode", "chsh", "--rounds", "1500", "--seed", "11")
        b = run_cli("bell", "--mode", "chsh", "--rounds", "1500", "--seed", "11")
        assert a == b

    def test_bad_rounds(self):
        code, _, err = run_cli("bell", "--mode", "mermin", "--rounds", "0")
        assert code == 2


class TestServeSmoke:
    def test_ephemeral_port_binds_and_prints(self):
        # exercise the server factory directly; cmd_serve loops forever
        from parallel_lives.service import make_server

        server = make_server("127.0.0.1", 0)
        try:
            assert server.server_address[1] > 0
        finally:
            server.server_close()

    def test_port_in_use_exits_2(self):
        from parallel_lives.service import make_server

        server = make_server("127.0.0.1", 0)
        try:
            port = server.server_address[1]
            code, _, err = run_cli("serve", "--port", str(port))
            assert code == 2
            assert "error" in err
        finally:
            server.server_close()
