import csv
import io
import json

import numpy as np
import pytest

from msvcj.cli import main
from msvcj.config import ModelConfig, bermudan_config, example_config
from msvcj.errors import ValidationError

CAP_VARS = [0.0113571, 0.0231179, 0.0372341, 0.0524117, 0.0713913, 0.0891357]


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def cap_config():
    return {"chain": {"states_var": CAP_VARS, "transition": np.full((6, 6), 1 / 6).tolist(), "tau": 1.0,
                      "initial_var": CAP_VARS[0]},
            "market": {"spot": 100, "strike": 100, "rate": 0.0, "maturity": 200.0}}


class TestConfig:
    def test_round_trip(self):
        cfg = ModelConfig.from_dict(example_config())
        again = ModelConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again.to_dict() == cfg.to_dict()
        assert again.model().kind == "ms_svcj"

    def test_model_selection(self):
        raw = example_config()
        del raw["pea"]
        assert ModelConfig.from_dict(raw).model().kind == "ms_svj"
        del raw["jumps"]
        assert ModelConfig.from_dict(raw).model().kind == "ms_sv"

    def test_pea_needs_jumps(self):
        raw = example_config()
        del raw["jumps"]
        with pytest.raises(ValidationError, match="jumps"):
            ModelConfig.from_dict(raw)

    def test_unknown_keys(self):
        raw = example_config()
        raw["chain"]["sigma"] = 1
        with pytest.raises(ValidationError, match="unknown"):
            ModelConfig.from_dict(raw)
        with pytest.raises(ValidationError, match="unknown"):
            ModelConfig.from_dict({**example_config(), "extra": {}})

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{")
        with pytest.raises(ValidationError, match="JSON"):
            ModelConfig.load(p)


class TestCli:
    def test_price_eu(self, tmp_path, capsys):
        code, out, _ = run(capsys, "price-eu", "--config", write(tmp_path, example_config()))
        assert code == 0
        assert json.loads(out)["price"] == pytest.approx(0.9696, abs=1e-3)

    def test_out_file(self, tmp_path, capsys):
        target = tmp_path / "res.json"
        code, out, _ = run(capsys, "price-eu", "--config", write(tmp_path, example_config()), "--out", str(target))
        assert code == 0 and out == ""
        assert json.loads(target.read_text())["model"] == "ms_svcj"

    def test_bad_transition_row(self, tmp_path, capsys):
        raw = example_config()
        raw["chain"]["transition"][2] = [0.05, 0.05, 0.85, 0.5]
        code, _, err = run(capsys, "price-eu", "--config", write(tmp_path, raw))
        assert code == 2
        assert "row 2" in err and err.startswith("error [price-eu]")

    def test_missing_config(self, capsys):
        code, _, err = run(capsys, "price-eu")
        assert code == 2 and "--config" in err

    def test_triple_cap_exit(self, tmp_path, capsys):
        code, _, err = run(capsys, "aiv", "--config", write(tmp_path, cap_config()), "--triple-cap", "100000")
        assert code == 3
        assert "574481758200" in err and "m=6" in err

    @pytest.mark.slow
    def test_triple_cap_exit_default_cap(self, tmp_path, capsys):
        code, _, err = run(capsys, "aiv", "--config", write(tmp_path, cap_config()))
        assert code == 3 and "574481758200" in err

    def test_aiv_csv(self, tmp_path, capsys):
        path = tmp_path / "aiv.csv"
        code, out, _ = run(capsys, "aiv", "--config", write(tmp_path, example_config()), "--csv", str(path))
        res = json.loads(out)
        rows = list(csv.reader(path.open()))
        assert code == 0 and rows[0] == ["v", "prob"] and len(rows) - 1 == res["support_size"]
        assert res["support_size"] <= res["support_bound"]

    def test_bias(self, tmp_path, capsys):
        code, out, _ = run(capsys, "bias", "--config", write(tmp_path, example_config()))
        res = json.loads(out)
        assert code == 0
        assert res["expected_bias"] == pytest.approx(2.07e-6, rel=0.01)

    def test_mc_small(self, tmp_path, capsys):
        path = tmp_path / "runs.csv"
        code, out, _ = run(capsys, "mc", "--config", write(tmp_path, example_config()), "--paths", "2000",
                           "--runs", "3", "--substeps", "30", "--csv", str(path), "--seed", "4")
        res = json.loads(out)
        assert code == 0 and len(res["per_run"]) == 3 and res["ci95"][0] < res["mean"] < res["ci95"][1]
        assert len(path.read_text().splitlines()) == 4

    def test_mc_misaligned(self, tmp_path, capsys):
        code, _, err = run(capsys, "mc", "--config", write(tmp_path, example_config()), "--substeps", "31",
                           "--paths", "10", "--runs", "2")
        assert code == 2 and "multiple" in err

    def test_price_berm(self, tmp_path, capsys):
        code, out, _ = run(capsys, "price-berm", "--config", write(tmp_path, bermudan_config()),
                           "--n-points", "50", "--spots", "100")
        r = json.loads(out)["results"][0]
        assert code == 0 and r["tangent"] == pytest.approx(14.886, abs=0.02)
        assert r["tangent"] <= r["secant"]

    def test_lsm(self, tmp_path, capsys):
        code, out, _ = run(capsys, "lsm", "--config", write(tmp_path, bermudan_config()), "--paths", "4000",
                           "--runs", "2")
        assert code == 0 and json.loads(out)["mean"] == pytest.approx(14.89, abs=0.6)

    def test_calibrate(self, tmp_path, capsys):
        raw = example_config()
        raw["calibration"] = {"box": {"intensity": [2.9, 3.1], "log_mean": [-0.026, -0.024],
                                      "log_var": [0.0049, 0.0051]}}
        raw["numerics"].update(n_hermite=8, n_laguerre=4)
        q = tmp_path / "q.csv"
        q.write_text("strike,bid,ask\n50,2.9,3.1\n55,0.9,1.0\n")
        px = tmp_path / "px.csv"
        prices = 100 * np.exp(np.cumsum(np.random.default_rng(0).normal(0, 0.01, 60)))
        px.write_text("date,close\n" + "".join(f"{np.datetime64('2019-01-01') + i},{p}\n"
                                               for i, p in enumerate(prices)))
        code, out, _ = run(capsys, "calibrate", "--config", write(tmp_path, raw), "--quotes", str(q),
                           "--prices", str(px), "--iters", "3")
        res = json.loads(out)
        assert code == 0 and res["calibration"]["iterations"] == 3
        assert "q1" in res["boxplot"]

    def test_bench_csv(self, tmp_path, capsys):
        path = tmp_path / "bench.csv"
        code, _, _ = run(capsys, "bench", "--m", "2", "--L", "6,8", "--csv", str(path))
        rows = list(csv.DictReader(path.open()))
        assert code == 0 and len(rows) == 4
        assert {r["algo"] for r in rows} == {"ce", "rr"}

    def test_bench_stdout(self, capsys):
        code, out, _ = run(capsys, "bench", "--m", "2", "--L", "5", "--algos", "rr")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and rows[0]["algo"] == "rr"
