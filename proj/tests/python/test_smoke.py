import csv
import io
import json
import os

import pytest

import crxo

SOURCE = os.environ.get("CRXO_SOURCE_DIR", os.path.join(os.path.dirname(__file__), "..", ".."))
SCENARIOS = os.path.join(SOURCE, "scenarios")


def dgp_text(name):
    with open(os.path.join(SCENARIOS, name)) as fh:
        return fh.read()


TOY = """cluster_id,period,sequence,treated,outcome
a,1,1,1,1.0
a,1,1,1,2.0
a,2,1,0,0.5
b,1,0,0,0.3
b,2,0,1,1.0
b,2,0,1,2.0
c,1,1,1,2.0
c,2,1,0,0.2
d,1,0,0,0.9
d,2,0,1,1.3
"""


def test_csv_round_trip_and_fit():
    d = crxo.read_trial_csv_text(TOY)
    assert d.n_clusters == 4 and d.n_total == 10
    assert crxo.read_trial_csv_text(d.to_csv()) == d
    assert crxo.validate(d) == []
    iee = crxo.fit(d, "IEEcpw")
    fe = crxo.fit(d, "FEcpw")
    assert iee["delta"] == pytest.approx(fe["delta"], abs=1e-12)
    assert crxo.variance(d, "IEE", "jackknife") > 0


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        crxo.read_trial_csv_text("cluster_id,period,sequence,treated,outcome\na,1,1,1,x\n")
    with pytest.raises(OSError):
        crxo.load_trial_csv("/nonexistent/file.csv")
    two = crxo.read_trial_csv_text("\n".join(TOY.splitlines()[:7]) + "\n")
    with pytest.raises(ValueError, match="leave-one-out removes a sequence"):
        crxo.variance(two, "IEE", "jackknife")


def test_analyze_report_fields():
    d = crxo.read_trial_csv_text(TOY)
    rep = crxo.analyze(d, ["IEE", "NEME", "EMEcpw"], ["model", "jackknife"])
    names = [e["estimator"] for e in rep["estimates"]]
    assert "IEE" in names and "NEME" in names
    assert [i["estimator"] for i in rep["inadmissible"]] == ["EMEcpw"]
    for e in rep["estimates"]:
        for v in e["variance"].values():
            assert v["lower"] <= e["estimate"] <= v["upper"]


def test_estimands_and_plim():
    ics = crxo.estimands(dgp_text("ics.dgp"))
    assert ics["values"]["iATE"] == pytest.approx(0.53333, abs=1e-4)
    assert ics["values"]["cATE"] == pytest.approx(0.4, abs=1e-12)
    assert ics["ICS"] == "yes" and ics["IPS"] == "no"
    dgp = json.loads(dgp_text("ics.dgp"))
    assert crxo.probability_limit("IEEcw", dgp, (0.053, 0.013, 1.0)) == pytest.approx(0.4, abs=1e-9)
    assert crxo.probability_limit("NEME", dgp, (0.053, 0.013, 1.0)) < 0.53


def test_generate_is_deterministic():
    a, truth = crxo.generate_trial(dgp_text("ics.dgp"), 10, 7)
    b, _ = crxo.generate_trial(dgp_text("ics.dgp"), 10, 7)
    assert a == b
    assert set(truth) == {"iATE", "cpATE", "cATE", "pATE"}


def test_simulate_summary():
    text = crxo.simulate(os.path.join(SCENARIOS, "noninfo.scenario"), replicates=3, threads=2)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 14
    assert text == crxo.simulate(os.path.join(SCENARIOS, "noninfo.scenario"), replicates=3, threads=1)
