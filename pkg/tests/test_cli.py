import json
import threading

from oshisim.cli import main


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGen:
    def test_same_seed_twice_is_byte_identical(self, tmp_path, capsys):
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        for out in (out_a, out_b):
            code, _, _ = run_cli(["gen", "--model", "er", "--nodes", "10",
                                  "--seed", "1", "-o", str(out)], capsys)
            assert code == 0
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_stdout_output_is_valid_json(self, capsys):
        code, out, _ = run_cli(["gen", "--model", "ba", "--nodes", "8",
                                "--seed", "2", "-o", "-"], capsys)
        assert code == 0
        doc = json.loads(out)
        assert doc["version"] == 1

    def test_env_seed_override(self, capsys, monkeypatch, tmp_path):
        monkeypatch.setenv("OSHI_SIM_SEED", "7")
        out_env = tmp_path / "env.json"
        code, _, _ = run_cli(["gen", "--model", "er", "--nodes", "6",
                              "--seed", "1", "-o", str(out_env)], capsys)
        assert code == 0
        monkeypatch.delenv("OSHI_SIM_SEED")
        out_flag = tmp_path / "flag.json"
        run_cli(["gen", "--model", "er", "--nodes", "6", "--seed", "7",
                 "-o", str(out_flag)], capsys)
        assert out_env.read_bytes() == out_flag.read_bytes()

    def test_bad_parameters_exit_1_with_diagnostic(self, capsys):
        code, _, err = run_cli(["gen", "--model", "er", "--nodes", "1",
                                "--seed", "1"], capsys)
        assert code == 1
        assert err.startswith("error:") and "\n" == err[-1]


class TestDeploy:
    def test_deploy_prints_convergence_summary(self, tmp_path, capsys):
        topo = tmp_path / "t.json"
        run_cli(["gen", "--model", "er", "--nodes", "5", "--seed", "3",
                 "-o", str(topo)], capsys)
        code, out, _ = run_cli(["deploy", "--topo", str(topo)], capsys)
        assert code == 0
        summary = json.loads(out)
        assert summary["reachability"] == 1.0
        assert summary["converged_at"] > 0

    def test_missing_file_diagnostic(self, capsys):
        code, _, err = run_cli(["deploy", "--topo", "/nope.json"], capsys)
        assert code == 1 and "no such file" in err


class TestTraffic:
    def test_traffic_rejects_zero_rate(self, capsys):
        code, _, err = run_cli(["traffic", "--rate", "0", "--runs", "1"],
                               capsys)
        assert code == 1 and "rate" in err

    def test_traffic_unknown_node_named_in_error(self, capsys):
        code, _, err = run_cli(["traffic", "--src", "ce9", "--runs", "1"],
                               capsys)
        assert code == 1 and "ce9" in err

    def test_traffic_runs_small_experiment(self, capsys):
        code, out, _ = run_cli(["traffic", "--rate", "100", "--runs", "2",
                                "--duration", "40", "--profile", "vxlan",
                                "-o", "-"], capsys)
        assert code == 0
        doc = json.loads(out)
        assert len(doc["runs"]) == 2


class TestMeasure:
    def test_experiment_c_vll_below_ip(self, capsys):
        code, out, _ = run_cli(["measure", "--experiment", "c", "--rates",
                                "2500", "--runs", "2", "-o", "-"], capsys)
        assert code == 0
        doc = json.loads(out)
        assert doc["summary"]["vll_below_ip"] is True
        assert (doc["summary"]["vll_avg_at_top_rate"]
                < doc["summary"]["ip_avg_at_top_rate"])

    def test_experiment_d_ordering(self, capsys):
        code, out, _ = run_cli(["measure", "--experiment", "d", "-o", "-"],
                               capsys)
        assert code == 0
        doc = json.loads(out)
        assert doc["vll_faster"] is True
        assert doc["reference_mbps"] == {"vll": 1555.0, "ip": 1150.0}


class TestServerCommands:
    def test_vll_against_live_server(self, capsys, tmp_path, monkeypatch):
        from oshisim.api import ApiServer
        from oshisim.measure import chain_doc
        from oshisim.topo import deploy
        server = ApiServer(deploy(chain_doc("pe", "none"), seed=2), port=0)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        url = f"http://127.0.0.1:{server.port}"
        try:
            code, out, _ = run_cli(["vll", "add", "--from", "n1:9",
                                    "--to", "n2:9", "--server", url], capsys)
            assert code == 0
            assert json.loads(out)["state"] == "Active"
            code, out, _ = run_cli(["vll", "list", "--server", url], capsys)
            assert len(json.loads(out)["vlls"]) == 1
            code, out, _ = run_cli(["dump-flows", "--node", "n1",
                                    "--server", url], capsys)
            assert code == 0
            assert any(json.loads(line)["table"] == 1
                       for line in out.splitlines())
            code, out, _ = run_cli(["dump-rib", "--node", "n1",
                                    "--server", url], capsys)
            assert code == 0 and "via" in out
            code, _, err = run_cli(["vll", "add", "--from", "ghost:1",
                                    "--to", "n2:8", "--server", url], capsys)
            assert code == 1 and "ghost" in err
        finally:
            server.shutdown()

    def test_vll_add_requires_endpoint_syntax(self, capsys):
        code, _, err = run_cli(["vll", "add", "--from", "pe1", "--to",
                                "pe2:3"], capsys)
        assert code == 1 and "NODE:PORT" in err
