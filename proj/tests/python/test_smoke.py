import json
import math
import os
from pathlib import Path

import pytest

import negforge as nf

DATA = Path(os.environ.get("NEGFORGE_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))

EATING = (
    "# sent_id = eat\n"
    "1\tShe\t_\tPRON\t_\t_\t3\tnsubj\t_\t_\n"
    "2\twas\t_\tAUX\t_\t_\t3\taux\t_\t_\n"
    "3\teating\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
    "4\tan\t_\tDET\t_\t_\t5\tdet\t_\t_\n"
    "5\tapple\t_\tNOUN\t_\t_\t3\tobj\t_\tSpaceAfter=No\n"
    "6\t.\t_\tPUNCT\t_\t_\t3\tpunct\t_\t_\n"
)


def test_parse_and_rules():
    (s,) = nf.parse_conllu(EATING)
    assert s.sent_id == "eat"
    assert s.text == "She was eating an apple."
    assert len(s) == 6
    assert ("R1", 2) in [(r, i) for i, r in nf.match_rules(s)]
    with pytest.raises(nf.ParseError):
        nf.parse_conllu("1\ta\t_\tX\t_\t_\t9\tdep\t_\t_\n")


def test_masks_round_trip():
    (s,) = nf.parse_conllu(EATING)
    for p in nf.propose_masks(s, granularity="subtree", seed=3):
        fills = [" ".join(t.surface for t in s.tokens[sp["start"] - 1 : sp["end"]]) for sp in p["spans"]]
        fills = [f.replace(" .", ".") for f in fills]
        assert nf.fill_blanks(p["masked_text"], fills) == s.text


def test_generation_and_filter():
    outs = nf.offline_generate("They were cooking.", "They [BLANK] cooking.", num_return=3)
    assert outs == ["weren't [ANSWER]", "were not [ANSWER]", "never were [ANSWER]"]
    answers, reason = nf.parse_completion(outs[0], 1)
    assert reason == "NONE"
    text = nf.fill_blanks("They [BLANK] cooking.", answers)
    res = nf.filter_candidates("They were cooking.", [text, text, "They were cooking."])
    assert [k["text"] for k in res["kept"]] == ["They weren't cooking."]
    assert [r["reason"] for r in res["rejected"]] == ["DUPLICATE", "NO_CUE"]
    assert nf.parse_completion("|> [|> [|> [|> [|> [|>", 1)[1] == "DEGENERATE_SYMBOLS"


def test_metrics():
    assert nf.levenshtein("kitten", "sitting", unit="char") == 3
    assert nf.norm_levenshtein("they were cooking", "they weren't cooking") == pytest.approx(1 / 3)
    assert nf.tree_edit_distance("A(B,C)", "A(C)") == 1
    assert nf.perplexity([-math.log(2)] * 5) == pytest.approx(2.0, abs=1e-12)
    assert nf.self_bleu(["a b c d", "a b c d"]) == pytest.approx(1.0)
    assert nf.self_bleu(["one"]) is None
    assert nf.detect_cues("The car is un desirable")[0]["class"] == "AFFIXAL"
    with pytest.raises(ValueError):
        nf.levenshtein("a", "b", unit="word")


def test_run_stages(tmp_path):
    masked, aug, report = tmp_path / "m.jsonl", tmp_path / "a.jsonl", tmp_path / "r.json"
    cfg = json.dumps({"seed": 1})
    assert nf.run_stage("mask", str(DATA / "demo_corpus.conllu"), str(masked), cfg).startswith("25 sentences")
    nf.run_stage("augment", str(masked), str(aug), cfg)
    rep = json.loads(nf.run_stage("eval", str(aug), str(report), cfg))
    assert rep["sentences"] == 25
    assert rep["nld"]["mean"] < 0.35
    with pytest.raises(OSError):
        nf.run_stage("mask", str(tmp_path / "missing.conllu"), str(masked))
    with pytest.raises(ValueError):
        nf.run_stage("mask", str(masked), str(masked), '{"bogus": 1}')
