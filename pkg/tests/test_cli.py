import csv

import pytest

from adaptim import cli


def write_chain(tmp_path, text="0 1 1.0\n1 2 1.0\n"):
    f = tmp_path / "g.edges"
    f.write_text(text)
    return str(f)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_trace_csv_shape(tmp_path):
    graph = write_chain(tmp_path)
    out = str(tmp_path / "t.csv")
    rc = cli.main(
        ["trace", "--graph", graph, "--prob", "file", "--policy", "degree",
         "--k", "1", "--d", "1,inf", "--reps", "4", "--seed", "0", "--out", out]
    )
    assert rc == 0
    rows = read_rows(out)
    assert rows[0] == ["policy", "d", "replicate", "round", "active_count", "mean_active", "stderr"]
    body = rows[1:]
    per_rep = [r for r in body if r[2] != ""]
    agg = [r for r in body if r[2] == ""]
    assert per_rep and agg
    for r in per_rep:
        assert r[0] == "degree"
        assert r[1] in ("1", "inf")
        assert r[4] != "" and r[5] == "" and r[6] == ""
    for r in agg:
        assert r[4] == "" and r[5] != "" and r[6] != ""
    # deterministic graph: every replicate identical, stderr all zero
    assert all(float(r[6]) == 0.0 for r in agg)
    # p=1 chain from one seed: the curve is 1, 2, 3
    d1 = [r for r in agg if r[1] == "1"]
    assert [float(r[5]) for r in d1] == [1.0, 2.0, 3.0]


def test_sweep_csv_shape(tmp_path):
    graph = write_chain(tmp_path)
    out = str(tmp_path / "s.csv")
    rc = cli.main(
        ["sweep", "--graph", graph, "--prob", "file", "--policy", "greedy",
         "--k", "1", "--d", "0,1,inf", "--reps", "3", "--rr-samples", "300",
         "--seed", "1", "--out", out]
    )
    assert rc == 0
    rows = read_rows(out)
    assert rows[0] == ["policy", "d", "mean_final", "stderr", "replicates"]
    assert [r[1] for r in rows[1:]] == ["0", "1", "inf"]
    for r in rows[1:]:
        assert r[0] == "greedy"
        assert float(r[2]) == 3.0
        assert float(r[3]) == 0.0
        assert r[4] == "3"


def test_single_node_graph_all_means_one(tmp_path):
    # a self-loop line names one node and contributes no edge
    graph = write_chain(tmp_path, "0 0 1.0\n")
    out = str(tmp_path / "s.csv")
    rc = cli.main(
        ["sweep", "--graph", graph, "--prob", "file", "--policy", "random",
         "--k", "1", "--d", "0,inf", "--reps", "5", "--seed", "0", "--out", out]
    )
    assert rc == 0
    for r in read_rows(out)[1:]:
        assert float(r[2]) == 1.0


def test_sweep_matches_trace_final_aggregate(tmp_path):
    graph = write_chain(tmp_path, "0 1 0.5\n1 2 0.5\n0 2 0.4\n")
    t_out = str(tmp_path / "t.csv")
    s_out = str(tmp_path / "s.csv")
    args = ["--graph", graph, "--prob", "file", "--policy", "degree",
            "--k", "2", "--d", "1", "--reps", "40", "--seed", "9"]
    assert cli.main(["trace", *args, "--out", t_out]) == 0
    assert cli.main(["sweep", *args, "--out", s_out]) == 0
    agg = [r for r in read_rows(t_out)[1:] if r[2] == ""]
    final_mean = float(agg[-1][5])
    sweep_mean = float(read_rows(s_out)[1][2])
    assert final_mean == sweep_mean


def test_single_replicate_aggregate_equals_trace(tmp_path):
    graph = write_chain(tmp_path)
    out = str(tmp_path / "t.csv")
    rc = cli.main(
        ["trace", "--graph", graph, "--prob", "file", "--policy", "degree",
         "--k", "1", "--d", "inf", "--reps", "1", "--seed", "4", "--out", out]
    )
    assert rc == 0
    body = read_rows(out)[1:]
    per_rep = [r for r in body if r[2] != ""]
    agg = [r for r in body if r[2] == ""]
    assert [float(r[4]) for r in per_rep] == [float(r[5]) for r in agg]
    assert all(float(r[6]) == 0.0 for r in agg)


def test_worker_count_does_not_change_output(tmp_path):
    graph = write_chain(tmp_path, "0 1 0.5\n1 2 0.5\n2 0 0.5\n")
    a = str(tmp_path / "a.csv")
    b = str(tmp_path / "b.csv")
    base = ["trace", "--graph", graph, "--prob", "file", "--policy", "degree",
            "--k", "2", "--d", "1,2", "--reps", "30", "--seed", "5"]
    assert cli.main([*base, "--workers", "1", "--out", a]) == 0
    assert cli.main([*base, "--workers", "4", "--out", b]) == 0
    assert open(a, "rb").read() == open(b, "rb").read()


def test_uniform_prob_model(tmp_path):
    graph = write_chain(tmp_path, "0 1\n1 2\n")
    out = str(tmp_path / "s.csv")
    rc = cli.main(
        ["sweep", "--graph", graph, "--prob", "uniform:1.0", "--policy", "degree",
         "--k", "1", "--d", "inf", "--reps", "2", "--seed", "0", "--out", out]
    )
    assert rc == 0
    assert float(read_rows(out)[1][2]) == 3.0


def test_missing_graph_file_is_io_error(tmp_path):
    rc = cli.main(["sweep", "--graph", str(tmp_path / "nope.edges"), "--out", "-"])
    assert rc == 3


def test_malformed_graph_is_io_error(tmp_path):
    graph = write_chain(tmp_path, "0 1 not-a-number\n")
    rc = cli.main(["sweep", "--graph", graph, "--prob", "file", "--out", "-"])
    assert rc == 3


def test_usage_errors_exit_one(tmp_path):
    with pytest.raises(SystemExit) as ei:
        cli.main(["trace"])  # --graph required
    assert ei.value.code == 1
    with pytest.raises(SystemExit) as ei:
        cli.main(["trace", "--graph", "x", "--d", "bogus"])
    assert ei.value.code == 1
    with pytest.raises(SystemExit) as ei:
        cli.main(["nosuchcommand"])
    assert ei.value.code == 1


def test_bad_config_values_exit_one(tmp_path):
    graph = write_chain(tmp_path)
    assert cli.main(["sweep", "--graph", graph, "--prob", "file", "--k", "0"]) == 1
    assert cli.main(["sweep", "--graph", graph, "--prob", "file", "--reps", "0"]) == 1


def test_verify_zero_instances(capsys):
    assert cli.main(["verify", "--instances", "0"]) == 0
    assert "warning" in capsys.readouterr().out


def test_verify_small_battery(capsys):
    assert cli.main(["verify", "--instances", "2", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 7
    assert "FAIL" not in out


def test_verify_reports_failure(monkeypatch, capsys):
    def broken(rng, n, report):
        report.append("n=2 edges: 0->1 p=0.5 | planted failure")
        return False, "planted"

    monkeypatch.setattr(cli, "_verify_estimator", broken)
    rc = cli.main(["verify", "--instances", "1", "--seed", "0"])
    assert rc == 2
    out = capsys.readouterr().out
    assert "FAIL estimator-agreement" in out
    assert "offending instance" in out
