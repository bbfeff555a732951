import json
import subprocess
import sys

from nelsonkit.cli import run
from nelsonkit.corpus import corpus_dir
from nelsonkit.macros import elaborate
from nelsonkit.reduce import reduce
from nelsonkit.syntax import parse
from nelsonkit.trace import Trace, TraceStep


def _json_lines(out):
    return [json.loads(line) for line in out.splitlines() if line.strip()]


def test_reduce_bounded(capsys):
    assert run(["reduce", "--ctx", "A,B", "exists st x in A . x in B"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "exists x in A . x in B"


def test_reduce_json_one_document_per_input(capsys):
    assert run(["reduce", "--json", "exists st x . x = x", "exists x . forall st a . a in x"]) == 0
    docs = _json_lines(capsys.readouterr().out)
    assert len(docs) == 2
    assert Trace.from_json(docs[1]).steps[0].rule == "I-swap"


def test_reduce_star_is_negative(capsys):
    assert run(["reduce", "--json", "--file", str(corpus_dir() / "star.txt")]) == 1
    doc = _json_lines(capsys.readouterr().out)[0]
    assert doc["status"] == "unreducible"
    assert [o["var"] for o in doc["report"]["offenders"]] == ["G"]


def test_parse_error_is_usage(capsys):
    assert run(["parse", ")("]) == 2
    assert "line 1, column 1" in capsys.readouterr().err


def test_unknown_subcommand_is_usage():
    assert run(["frobnicate"]) == 2


def test_classify_star(capsys):
    assert run(["classify", "--json", "--file", str(corpus_dir() / "star.txt")]) == 0
    doc = _json_lines(capsys.readouterr().out)[0]
    assert not doc["bounded"] and doc["offenders"][0]["var"] == "G"


def test_check_good_and_bad_traces(tmp_path, capsys):
    _, t = reduce(elaborate(parse("exists x . forall st a . a in x")), set())
    good = tmp_path / "good.json"
    good.write_text(t.dumps())
    assert run(["check", str(good)]) == 0

    before = parse("exists x . forall y . y in x")
    after = parse("forall y . exists x . y in x")
    bad = tmp_path / "bad.jsonl"
    bad.write_text(Trace(before, [TraceStep("bogus", (), before, after, "FO")], after).dumps() + "\n")
    capsys.readouterr()
    assert run(["check", "--json", "--max-size", "2", str(bad)]) == 1
    doc = _json_lines(capsys.readouterr().out)[0]
    assert doc["steps"][0]["verdict"] == "countermodel"


def test_check_equiv(capsys):
    assert run(["check", "--equiv", "exists x . forall y . y in x",
                "forall y . exists x . y in x", "--max-size", "2"]) == 1
    assert run(["check", "--equiv", "~ (x in y & y in x)", "~ x in y | ~ y in x"]) == 0


def test_filter_json(capsys):
    assert run(["filter", "--json", "--V", "a,b,c", "card>=2", "lacks:a"]) == 0
    doc = _json_lines(capsys.readouterr().out)[0]
    assert [s["chosen"] for s in doc["selections"]] == ["A", "C"]
    assert doc["index_size"] == 8
    point = set(doc["ultrafilter_point"])
    assert all(doc["u5"][a] == (a in point) for a in "abc")


def test_filter_bad_candidate_is_usage():
    assert run(["filter", "--V", "a", "card>=x"]) == 2


def test_upower_small_grid(capsys):
    assert run(["upower", "--base", "1", "--index", "1", "--rank", "1", "--depth", "1",
                "--summary"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["mismatches"] == 0 and doc["cells"] > 0


def test_stdin_and_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nelsonkit", "parse", "--json"],
                          input="forall x . x in x\n", capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["internal"] is True
