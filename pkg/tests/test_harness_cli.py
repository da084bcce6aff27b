import csv
import io
import json
import math

import pytest

from aoinet.cli import main
from aoinet.harness import (
    CSV_COLUMNS,
    CurveRow,
    ScenarioError,
    SweepSpec,
    TradeoffCurve,
    emit_report,
    load_report,
    load_scenario,
    run_compare,
    run_sweep,
)
from aoinet.model import AOI, LDA
from aoinet.sim import Scenario

SINGLE_LINK = {
    "nodes": ["s", "d"],
    "links": [{"id": "l", "src": "s", "dst": "d", "capacity_bps": 1.0, "latency_s": 0.0}],
    "flows": [
        {"id": "u", "class": "AoI", "path": ["l"], "size_bits": 0.1},
        {"id": "x", "class": "LDA", "path": ["l"], "size_bits": 0.1},
    ],
    "duration_s": 200.0,
    "scheduler": "SDM",
}


@pytest.fixture
def scenario_file(tmp_path):
    def write(doc=SINGLE_LINK, name="sc.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc, indent=1))
        return str(p)

    return write


class TestLoadScenario:
    def test_minimal(self, scenario_file):
        sc = load_scenario(scenario_file())
        assert isinstance(sc, Scenario)
        assert [f.cls for f in sc.flows] == [AOI, LDA]

    def test_missing_capacity(self, scenario_file):
        doc = json.loads(json.dumps(SINGLE_LINK))
        del doc["links"][0]["capacity_bps"]
        with pytest.raises(ScenarioError, match="capacity_bps"):
            load_scenario(scenario_file(doc))

    def test_lambda_needs_objective(self, scenario_file):
        doc = dict(SINGLE_LINK, **{"lambda": 0.5})
        with pytest.raises(ScenarioError, match="objective required"):
            load_scenario(scenario_file(doc))

    def test_unknown_scheduler(self, scenario_file):
        with pytest.raises(ScenarioError):
            load_scenario(scenario_file(dict(SINGLE_LINK, scheduler="RoundRobin")))

    def test_parse_error_has_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n "nodes": [\n')
        with pytest.raises(ScenarioError, match="line"):
            load_scenario(str(p))

    def test_builtin_topology_reference(self, scenario_file):
        sc = load_scenario(scenario_file({"topology": "swan", "traffic": {"pair_prob": 0.1}}))
        assert len(sc.network.links) > 0 and sc.traffic.pair_prob == 0.1


class TestSweep:
    def test_lambda_monotone_and_sorted(self, scenario_file):
        sc = load_scenario(scenario_file())
        curve = run_sweep(SweepSpec(sc, (2.0, 0.5, 0.125, 0.03125)))
        assert [r.lam for r in curve.rows] == [0.03125, 0.125, 0.5, 2.0]
        assert all(r.status == "ok" for r in curve.rows)
        thr = [r.total_lda_throughput_bps for r in curve.rows]
        aoi = [r.total_aoi_s for r in curve.rows]
        assert all(b <= a for a, b in zip(thr, thr[1:]))
        assert all(b <= a for a, b in zip(aoi, aoi[1:]))

    def test_empty_lambdas(self, scenario_file):
        with pytest.raises(ValueError):
            SweepSpec(load_scenario(scenario_file()), ())

    def test_max_throughput_ignores_lambda(self, scenario_file):
        sc = load_scenario(scenario_file())
        curve = run_sweep(SweepSpec(sc, (0.1, 1.0), objectives=("max_throughput",), schedulers=("FIFO",)))
        a, b = curve.rows
        assert (a.total_lda_throughput_bps, a.total_aoi_s) == (b.total_lda_throughput_bps, b.total_aoi_s)

    def test_totals_are_sums(self, scenario_file):
        row = run_sweep(SweepSpec(load_scenario(scenario_file()), (0.125,))).rows[0]
        assert row.total_aoi_s == math.fsum(v["aoi_s"] for v in row.per_flow.values() if v["class"] == AOI)

    def test_compare_directional(self, scenario_file):
        sc = load_scenario(scenario_file())
        curve = run_compare(sc, pairs=[("lac", "SDM"), ("max_throughput", "FIFO")])
        (lac,) = curve.select(objective="lac")
        (mt,) = curve.select(objective="max_throughput")
        assert lac.total_aoi_s < mt.total_aoi_s
        assert lac.total_lda_throughput_bps <= mt.total_lda_throughput_bps + 1e-9

    def test_compare_deterministic(self, scenario_file):
        sc = load_scenario(scenario_file())
        a = run_compare(sc, ["SDM"], ["lac"], seeds=[3])
        b = run_compare(sc, ["SDM"], ["lac"], seeds=[3])
        assert emit_report(a, "csv", None) == emit_report(b, "csv", None)

    def test_failed_row_reported(self, scenario_file, monkeypatch):
        import aoinet.harness as harness

        def broken(*args, **kwargs):
            raise harness.SolverError("did not converge")

        monkeypatch.setattr(harness, "solve", broken)
        row = run_sweep(SweepSpec(load_scenario(scenario_file()), (0.125, 0.5))).rows[1]
        assert row.status == "failed" and "did not converge" in row.reason
        assert math.isnan(row.total_aoi_s)


class TestReports:
    def curve(self):
        return TradeoffCurve([CurveRow("lac", 0.125, "SDM", 0, 1.5, 2.5, per_flow={"u": {"aoi_s": 2.5}})])

    def test_csv_header(self, tmp_path):
        text = emit_report(self.curve(), "csv", str(tmp_path / "r.csv"))
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[0] == "objective,lambda,scheduler,seed,total_lda_throughput_bps,total_aoi_s,status"
        assert len(lines) == 2

    def test_json_round_trip(self, tmp_path):
        path = tmp_path / "r.json"
        emit_report(self.curve(), "json", str(path))
        assert load_report(str(path)).to_dict() == self.curve().to_dict()

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "r.csv"
        emit_report(self.curve(), "csv", str(path))
        row = load_report(str(path)).rows[0]
        assert (row.objective, row.lam, row.total_aoi_s, row.status) == ("lac", 0.125, 2.5, "ok")

    def test_failed_row(self):
        c = TradeoffCurve([CurveRow("lac", 0.1, "SDM", 0, status="failed", reason="SolverError: boom")])
        row = next(csv.DictReader(io.StringIO(emit_report(c, "csv", None))))
        assert row["status"] == "failed" and row["total_aoi_s"] == ""
        assert json.loads(emit_report(c, "json", None))["rows"][0]["reason"] == "SolverError: boom"


class TestCli:
    def test_solve(self, scenario_file, capsys):
        assert main(["solve", "--scenario", scenario_file(), "--lambda", "0.125"]) == 0
        out = json.loads(capsys.readouterr().out)
        values = {e["flow"]: e["value"] for e in out["flows"]}
        # Stationarity on a unit link: lambda / (2 mu^2) = s.
        assert values["u"] == pytest.approx(math.sqrt(0.125 / 0.2), rel=1e-6)

    def test_simulate_csv(self, scenario_file, capsys):
        rc = main(["simulate", "--scenario", scenario_file(), "--objective", "lac", "--format", "csv", "--duration", "100"])
        assert rc == 0
        header = capsys.readouterr().out.splitlines()[0]
        assert header == "flow,class,aoi_s,u_avg,p_avg,q_avg,throughput_bps"

    def test_sweep_to_file(self, scenario_file, tmp_path):
        out = tmp_path / "sweep.csv"
        rc = main(["sweep", "--scenario", scenario_file(), "--lambda", "0.125,0.5", "--format", "csv", "--out", str(out)])
        assert rc == 0
        assert len(out.read_text().splitlines()) == 3

    def test_compare(self, scenario_file, capsys):
        assert main(["compare", "--scenario", scenario_file(), "--seed", "0,1"]) == 0
        rows = json.loads(capsys.readouterr().out)["rows"]
        assert {(r["objective"], r["scheduler"]) for r in rows} == {("lac", "SDM"), ("max_throughput", "FIFO")}

    def test_analyze(self, capsys):
        assert main(["analyze", "--d-t", "1", "--T-i", "2", "--steps", "4", "--scheduler", "TDM"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "gamma,tdm_throughput,tdm_aoi,sdm_throughput,sdm_aoi,objective"
        assert len(lines) == 5

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["solve"])
        assert exc.value.code == 1

    def test_usage_error_multiple_values(self, scenario_file):
        assert main(["solve", "--scenario", scenario_file(), "--lambda", "0.1,0.2"]) == 1

    def test_validation_error(self, scenario_file, capsys):
        assert main(["simulate", "--scenario", scenario_file(), "--lambda", "0.5"]) == 2
        assert "objective required" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["solve", "--scenario", str(tmp_path / "none.json")]) == 2

    def test_runtime_error(self, scenario_file, monkeypatch):
        import aoinet.cli as cli

        def broken(sc):
            raise cli.SimulationError("event budget exceeded")

        monkeypatch.setattr(cli, "run", broken)
        assert main(["simulate", "--scenario", scenario_file()]) == 3
