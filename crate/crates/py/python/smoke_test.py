"""Smoke test for the climscan_py extension module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`,
then run `python crates/py/python/smoke_test.py`.
"""

import math
import tempfile

import climscan_py as cs


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL: {what}")
    print(f"ok   {what}")


check(cs.reconstruct_abstract({"to": [0, 4], "be": [1, 5], "or": [2], "not": [3]}) == "to be or not to be",
      "abstract reconstruction")
try:
    cs.reconstruct_abstract({"a": [0], "b": [0]})
    check(False, "position conflict raises")
except cs.ClimscanError:
    check(True, "position conflict raises")

params = cs.build_query()
check("publication_year:>1999" in params["filter"], "default query filter chain")

check(cs.cohens_kappa([1, 1, 0, 0], [0, 0, 1, 1]) == -1.0, "kappa -1")
check(abs(cs.cohens_kappa([1, 1, 1, 0, 0, 0, 1, 0, 1, 1], [1, 1, 0, 0, 0, 0, 1, 0, 1, 1]) - 0.8) < 1e-12, "kappa 0.8")
check(abs(cs.pearson([1, 0, 1, 0], [1, 0, 0, 0]) - 0.5 / math.sqrt(0.75)) < 1e-12, "pearson")
check(cs.pearson([1, 1, 1], [1, 2, 3]) is None, "pearson undefined for constant input")

w = cs.normalize_weights({"Q2": 0.4, "Q3": -0.2, "Q4": 0.3, "Q5": 0.0, "Q6": 0.0, "Q7": 0.0})
check(abs(w["Q2"] - 0.8) < 1e-12 and abs(w["Q3"] + 0.4) < 1e-12, "weight normalization")

rows = [[x, 0, 0, 0, 0, 0] for x in (0.9, 0.8, 0.2, 0.1)]
fit = cs.fit_logistic(rows, [1, 1, 0, 0])
check(fit.beta["Q2"] > 0 and abs(sum(fit.weights.values()) - 1) < 1e-9, "logistic fit")

ones = {q: 1.0 for q in ("Q2", "Q3", "Q4", "Q5", "Q6", "Q7")}
check(abs(cs.weighted_score(ones, fit.weights) - 1.0) < 1e-9, "weighted score")

check(cs.q1_filter({"A": 0.9, "B": 0.6, "C": 0.5}) == ["A", "B"], "inclusive Q1 filter")
feats = {"A": ones, "B": ones, "C": {q: 0.0 for q in ones}}
ranked = cs.rank(feats, fit.weights)
check([e.rank for e in ranked.entries] == [1, 2, 3] and ranked.top_tie_size() == 2, "rank ties")

scores = cs.parse_response('Here you go: {"Q1":1,"Q2":0,"Q3":1,"Q4":0,"Q5":1,"Q6":0,"Q7":1}')
check(scores == [1, 0, 1, 0, 1, 0, 1], "response parsing")

work = cs.WorkRecord("W1", "A title", "An abstract about storage.")
prompt = cs.build_prompt(work, scenario="no-shot")
check("Do not hallucinate. Only provide truthful answers." in prompt, "no-shot prompt")

with tempfile.TemporaryDirectory() as d:
    cs.save_corpus([work], f"{d}/c.jsonl")
    check(cs.load_corpus(f"{d}/c.jsonl")[0].abstract_text == work.abstract_text, "corpus round trip")
    config = cs.write_demo(f"{d}/demo", n_eligible=95, n_controls=5)
    summary, ranked = cs.run_pipeline(config)
    print(summary, end="")
    check(len(ranked.control_positions) == 5 and max(ranked.control_positions) <= 15, "demo controls ranked")

print("smoke test passed")
