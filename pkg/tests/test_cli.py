import json

import pytest

from gridcascade.advisor.cli import main
from gridcascade.sampler import load_pool


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--bogus-flag"])
    assert exc.value.code == 2


def test_missing_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_missing_case_exits_3(capsys):
    rc = main(["simulate", "--case", "nope.m", "--lines", "1,2"])
    assert rc == 3
    assert "error:" in capsys.readouterr().err


def test_bad_lines_exits_3(capsys):
    rc = main(["simulate", "--lines", "1,x"])
    assert rc == 3


def test_simulate_exp3_no_post_initial_trips(tmp_path, capsys):
    out = tmp_path / "trace.jsonl"
    rc = main(
        ["simulate", "--case", "ieee30", "--c", "1.0", "--lines", "5,9", "--policy", "exp3", "--out", str(out)]
    )
    assert rc == 0
    pool = load_pool(out)
    trace = pool.traces[0]
    post_trips = [e for e in trace.events if e.kind.value == "line_trip" and e.time > 0]
    assert post_trips == []


def test_simulate_byte_identical(tmp_path):
    args = ["simulate", "--c", "1.5", "--lines", "5,9", "--policy", "exp1"]
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    pool = root / "pool.jsonl.gz"
    assert (
        main(
            [
                "pool",
                "--samples",
                "50",
                "--loadings",
                "1.3,1.6",
                "--policy",
                "exp1",
                "--seed",
                "7",
                "--out",
                str(pool),
            ]
        )
        == 0
    )
    link = root / "link.json"
    load = root / "load.json"
    assert main(["train", "--pool", str(pool), "--target", "link", "--out", str(link)]) == 0
    assert main(["train", "--pool", str(pool), "--target", "load", "--out", str(load)]) == 0
    return pool, link, load


def test_train_deterministic(artifacts, tmp_path):
    pool, link, _ = artifacts
    again = tmp_path / "link2.json"
    assert main(["train", "--pool", str(pool), "--target", "link", "--out", str(again)]) == 0
    assert again.read_bytes() == link.read_bytes()


def test_train_corrupt_pool_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("this is not a pool\n")
    rc = main(["train", "--pool", str(bad), "--target", "link", "--out", str(tmp_path / "m.json")])
    assert rc == 3


def test_evaluate_json(artifacts, capsys):
    pool, link, load = artifacts
    rc = main(["evaluate", "--pool", str(pool), "--link-model", str(link), "--load-model", str(load)])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"link", "load"}
    assert doc["link"]["im"] <= doc["link"]["random"]


def test_rank_csv(artifacts, capsys):
    _, link, load = artifacts
    rc = main(["rank", "--link-model", str(link), "--load-model", str(load), "--format", "csv"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split(",") == ["rank", "branch", "c_d", "c_e"]
    assert len(lines) == 42  # header + 41 branches
    branches = sorted(int(line.split(",")[1]) for line in lines[1:])
    assert branches == list(range(1, 42))


def test_whatif_json(capsys):
    rc = main(
        [
            "whatif",
            "--c",
            "1.8",
            "--w",
            "0.7",
            "--lines",
            "5,9",
            "--policies",
            "exp1,exp3",
            "--grid",
            "0.3,0.6",
        ]
    )
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc["curves"]) == {"exp1", "exp3"}
    assert doc["grid"] == [0.3, 0.6]


def test_whatif_bad_grid_exits_3():
    assert main(["whatif", "--lines", "5,9", "--grid", "0.5,0.2"]) == 3
