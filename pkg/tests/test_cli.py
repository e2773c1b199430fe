import json
from pathlib import Path

import pytest

from tilecolor import cli


def run(argv):
    return cli.main(argv)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    inst = str(d / "inst.json")
    gcp = str(d / "gcp.json")
    layout = str(d / "layout.json")
    coloring = str(d / "coloring.json")
    assert run(["gen", "planted", "--p", "5", "--seed", "1", "--out", inst]) == 0
    assert run(["reduce", inst, "--profile", "desk", "--seed", "5",
                "--out", gcp, "--debug-layout", layout]) == 0
    assert run(["color", gcp, "--instance", inst, "--witness",
                inst + ".witness.json", "--layout", layout,
                "--seed", "2", "--out", coloring]) == 0
    return {"dir": d, "inst": inst, "gcp": gcp, "layout": layout,
            "coloring": coloring}


def test_gen_deterministic(tmp_path):
    a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    run(["gen", "planted", "--p", "5", "--seed", "3", "--out", a])
    run(["gen", "planted", "--p", "5", "--seed", "3", "--out", b])
    assert Path(a).read_bytes() == Path(b).read_bytes()
    assert Path(a + ".witness.json").read_bytes() == Path(b + ".witness.json").read_bytes()


def test_gen_rtp_start_length(tmp_path):
    out = str(tmp_path / "rtp.json")
    assert run(["gen", "rtp", "--nmax", "16", "--seed", "2",
                "--alphabet", "6", "--out", out]) == 0
    obj = json.loads(Path(out).read_text())
    n = obj["p"]
    assert len(obj["start"]) == 2 * (n - (1 << (n.bit_length() - 1)))


def test_gen_rrtp_demo(tmp_path):
    out = str(tmp_path / "demo.json")
    assert run(["gen", "rrtp-demo", "--p", "8", "--seed", "1", "--out", out]) == 0


def test_reduce_deterministic(pipeline, tmp_path):
    g2 = str(tmp_path / "g2.json")
    run(["reduce", pipeline["inst"], "--profile", "desk", "--seed", "5",
         "--out", g2])
    assert Path(g2).read_bytes() == Path(pipeline["gcp"]).read_bytes()


def test_verify_accepts_and_exit_codes(pipeline, capsys):
    assert run(["verify", pipeline["gcp"], pipeline["coloring"]]) == 0
    out = capsys.readouterr().out
    assert "accept" in out


def test_verify_budget_exit_code(pipeline, tmp_path):
    obj = json.loads(Path(pipeline["coloring"]).read_text())
    for row in obj["colors"]:
        if row[2] == "grey":
            row[2] = "blank"
            break
    bad = str(tmp_path / "bad.json")
    Path(bad).write_text(json.dumps(obj))
    assert run(["verify", pipeline["gcp"], bad]) == 2


def test_verify_rejects_truncated_coloring(pipeline, tmp_path):
    obj = json.loads(Path(pipeline["coloring"]).read_text())
    obj["colors"] = obj["colors"][:-5]
    bad = str(tmp_path / "trunc.json")
    Path(bad).write_text(json.dumps(obj))
    with pytest.raises(ValueError):
        run(["verify", pipeline["gcp"], bad])


def test_extract_round_trip(pipeline, tmp_path):
    out = str(tmp_path / "sq.json")
    assert run(["extract", pipeline["gcp"], pipeline["coloring"],
                "--out", out]) == 0
    sq = json.loads(Path(out).read_text())
    wit = json.loads(Path(pipeline["inst"] + ".witness.json").read_text())
    assert sq["square"] == wit["square"]


def test_extract_refuses_rejected_coloring(pipeline, tmp_path):
    obj = json.loads(Path(pipeline["coloring"]).read_text())
    for row in obj["colors"]:
        if row[2] == "grey":
            row[2] = "blank"
            break
    bad = str(tmp_path / "bad2.json")
    Path(bad).write_text(json.dumps(obj))
    assert run(["extract", pipeline["gcp"], bad, "--out",
                str(tmp_path / "x.json")]) == 2


def test_experiment_csv_schema(tmp_path):
    out = str(tmp_path / "m.csv")
    code = run(["experiment", "matching", "--n", "30", "--b", "4,6",
                "--trials", "300", "--seed", "1", "--out", out])
    lines = Path(out).read_text().strip().splitlines()
    assert lines[0] == "experiment,params,trials,estimate,stderr,reference,tolerance,status"
    assert len(lines) >= 3
    assert code in (0, 1)


def test_experiment_unknown_name():
    with pytest.raises(SystemExit):
        run(["experiment", "nonsense", "--out", "/tmp/x.csv"])


def test_experiment_embedding_small(tmp_path):
    out = str(tmp_path / "e.csv")
    run(["experiment", "embedding", "--rows", "4", "--cols", "4",
         "--host-n", "1500", "--trials", "8", "--seed", "2", "--out", out])
    assert Path(out).exists()


def test_paper_profile_accepted_without_overflow(tmp_path):
    # parameter derivation at paper scale must not overflow or crash; the
    # full run is out of desk scope (documented resource envelope)
    from fractions import Fraction
    from tilecolor.reduction import derive_params
    params = derive_params(73, Fraction(61, 6))
    assert params.node_count > 58_000
    assert params.blank_budget(0) == sum(params.b_vector())
