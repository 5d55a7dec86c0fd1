import json

import pytest

from wcsnet.cli import main

HEADERS = {
    "solve": "level,d0,d1",
    "kernel": "i,j,P",
    "intermeeting": "t,exact,spectral,one_term",
    "simulate": "slot,active_fraction",
    "validate": "name,analytic,empirical,statistic,tolerance,passed",
    "sweep": "index,param,value,Lambda,P_on,lambda1,Lambda_iid,Lambda_inf,bound_lower,bound_upper,"
             "mc_P_on,mc_Lambda,error",
}

SMALL_SIM = ["--slots", "5000", "--warmup", "200"]


def call(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("cmd, extra", [
    ("solve", []), ("kernel", []), ("intermeeting", ["--tmax", "20"]), ("simulate", SMALL_SIM),
    ("sweep", ["--param", "L", "--values", "2,4"]),
])
def test_csv_headers(tmp_path, capsys, cmd, extra):
    out = tmp_path / "o.csv"
    code, stdout, _ = call(capsys, cmd, "--out", str(out), *extra)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == HEADERS[cmd]
    json.loads(stdout)


def test_validate_header_and_exit(tmp_path, capsys):
    out = tmp_path / "v.csv"
    code, stdout, err = call(capsys, "validate", "--out", str(out), *SMALL_SIM, "--tolerance", "ks=1",
                             "--tolerance", "tv=1", "--tolerance", "P_on=1", "--tolerance", "p_t=100",
                             "--tolerance", "p_c=100")
    assert out.read_text().splitlines()[0] == HEADERS["validate"]
    assert code == 0 and json.loads(stdout)["passed"]
    assert "PASS" in err
    code, stdout, _ = call(capsys, "validate", *SMALL_SIM, "--tolerance", "P_on=0")
    assert code == 1 and not json.loads(stdout)["passed"]


def test_seventeen_digit_numbers(tmp_path, capsys):
    out = tmp_path / "k.csv"
    call(capsys, "kernel", "--out", str(out))
    value = out.read_text().splitlines()[1].split(",")[2]
    assert value == "%.17g" % float(value)
    assert len(value.replace("0.", "", 1).lstrip("0")) >= 15


def test_solve_outputs(capsys):
    code, out, _ = call(capsys, "solve")
    res = json.loads(out)
    assert code == 0 and res["residual"] < 1e-10
    code, out, _ = call(capsys, "solve", "--set", "m=0")
    assert code == 0 and json.loads(out)["Lambda"] == 0
    code, out, _ = call(capsys, "solve", "--set", "E=1", "--qbd")
    assert code == 0 and json.loads(out)["qbd_max_abs_diff"] < 1e-8


@pytest.mark.parametrize("argv, field", [
    (["solve", "--set", "q=1.5"], "q"),
    (["solve", "--set", "bogus=1"], "bogus"),
    (["solve", "--set", "n"], "n"),
    (["validate", "--tolerance", "nope=1"], "--tolerance"),
    (["sweep", "--param", "v", "--values", "2,1"], "--values"),
])
def test_bad_input_exits_2(capsys, argv, field):
    code, _, err = call(capsys, *argv)
    assert code == 2
    assert field in err


def test_malformed_config_file(tmp_path, capsys):
    path = tmp_path / "c.yaml"
    path.write_text("S: -3\n")
    code, _, err = call(capsys, "solve", "--config", str(path))
    assert code == 2 and "S:" in err


def test_config_file_and_overrides(tmp_path, capsys):
    path = tmp_path / "c.yaml"
    path.write_text("n: 20\nm: 2\nL: 5\n")
    _, a, _ = call(capsys, "solve", "--config", str(path))
    _, b, _ = call(capsys, "solve", "--config", str(path), "--set", "L=6")
    assert json.loads(a)["L"] == 5 and json.loads(b)["L"] == 6


def test_seed_changes_only_simulated_columns(tmp_path, capsys):
    rows = []
    for seed in ("1", "2"):
        out = tmp_path / f"s{seed}.csv"
        call(capsys, "sweep", "--param", "v", "--values", "1,2", "--simulate", "--seed", seed,
             "--out", str(out), *SMALL_SIM)
        rows.append([line.split(",") for line in out.read_text().splitlines()[1:]])
    for a, b in zip(*rows):
        assert a[:10] == b[:10]
        assert a[10:12] != b[10:12]


def test_sweep_parallel_order_and_errors(tmp_path, capsys):
    outs = []
    for jobs in ("1", "3"):
        out = tmp_path / f"j{jobs}.csv"
        code, _, _ = call(capsys, "sweep", "--param", "m", "--values", "1,2,60", "--set", "v=0.3",
                          "--jobs", jobs, "--out", str(out))
        assert code == 0
        outs.append(out.read_text())
    assert outs[0] == outs[1]
    last = outs[0].splitlines()[-1]
    assert last.startswith("2,m,60,") and "ResolutionError" in last


def test_sweep_m_ratio(capsys):
    _, out, _ = call(capsys, "sweep", "--param", "n", "--values", "100,200", "--m-ratio", "0.1")
    rows = json.loads(out)["rows"]
    assert [r["error"] for r in rows] == ["", ""]
    for r in rows:
        assert r["bound_lower"] <= r["Lambda"] <= r["bound_upper"]


def test_simulate_is_byte_reproducible(tmp_path, capsys):
    outs = []
    for i in range(2):
        out, samples = tmp_path / f"a{i}.csv", tmp_path / f"s{i}.txt"
        _, stdout, _ = call(capsys, "simulate", "--seed", "9", "--out", str(out), "--samples-out", str(samples),
                            *SMALL_SIM)
        outs.append((stdout, out.read_bytes(), samples.read_bytes()))
    assert outs[0] == outs[1]
    assert outs[0][2].strip()
