import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from limprophet.cli import main
from limprophet.env import DomainError
from limprophet.harness import (ExperimentConfig, paired_ratio, resolve_algorithm, run_experiment, verify,
                                worker_count, write_report)

U01 = {"family": "uniform", "params": {"a": 0.0, "b": 1.0}}


def cfg(**kw):
    d = {"env": {"kind": "uniform", "n": 2, "k": 1}, "dist": U01, "algorithm": "rank1",
         "trials": 400, "seed": 3}
    d.update(kw)
    return d


def test_benchmark_only_mean_of_max():
    rep = run_experiment(ExperimentConfig.from_dict(cfg(benchmark_only=True, trials=20_000)), workers=1)
    assert abs(rep.welfare.mean_opt - 2 / 3) < 0.01


def test_same_seed_same_body():
    c = ExperimentConfig.from_dict(cfg(order="decreasing", reserve={"kind": "single-sample"}))
    a, b = run_experiment(c, workers=1), run_experiment(c, workers=1)
    assert json.dumps(a.body(), sort_keys=True) == json.dumps(b.body(), sort_keys=True)
    par = run_experiment(c, workers=2)
    assert json.dumps(par.body(), sort_keys=True) == json.dumps(a.body(), sort_keys=True)


def test_report_fields_and_ratio():
    rep = run_experiment(ExperimentConfig.from_dict(cfg(
        env={"kind": "uniform", "n": 256, "k": 64}, algorithm="rehearsal", order="increasing", trials=200)))
    body = rep.body()
    assert body["ratio"] == pytest.approx(body["mean_welfare"] / body["mean_opt"])
    assert body["ci_half_width"] == pytest.approx(1.96 * body["ratio_se"]) and body["ratio_se"] > 0
    assert "wall_clock" not in body and "wall_clock" in json.loads(rep.to_json())


def test_csv_schema(tmp_path):
    rep = run_experiment(ExperimentConfig.from_dict(cfg(trials=5)))
    path = tmp_path / "out.csv"
    write_report(rep, str(path))
    rows = list(csv.reader(io.StringIO(path.read_text())))
    assert rows[0] == ["trial", "welfare", "revenue", "opt", "winners"]
    assert [int(r[0]) for r in rows[1:]] == list(range(5))


def test_paired_ratio_by_hand():
    pr = paired_ratio([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])
    assert pr.ratio == 0.5 and pr.stderr == 0.0
    alg, opt = np.array([1.0, 0.0, 2.0, 1.0]), np.array([2.0, 1.0, 2.0, 3.0])
    r = alg.mean() / opt.mean()
    se = np.std(alg - r * opt, ddof=1) / (2 * opt.mean())
    assert paired_ratio(alg, opt).stderr == pytest.approx(se)


def test_exhaustive_order_reports_minimiser():
    c = ExperimentConfig.from_dict(cfg(env={"kind": "uniform", "n": 4, "k": 2}, algorithm="uniform-k",
                                       order="exhaustive", trials=20))
    rep = run_experiment(c)
    for rec in rep.records:
        assert sorted(rec.order) == [0, 1, 2, 3]
    with pytest.raises(DomainError):
        ExperimentConfig.from_dict(cfg(env={"kind": "uniform", "n": 9, "k": 1}, order="exhaustive"))


def test_fixed_order_and_config_errors():
    ExperimentConfig.from_dict(cfg(order={"fixed": [1, 0]}))
    with pytest.raises(DomainError):
        run_experiment(ExperimentConfig.from_dict(cfg(order={"fixed": [0, 0]}, trials=1)))
    with pytest.raises(DomainError):
        ExperimentConfig.from_dict(cfg(algorithm="graphic"))
    with pytest.raises(DomainError):
        ExperimentConfig.from_dict(cfg(trials=0))
    with pytest.raises(DomainError):
        ExperimentConfig.from_dict(cfg(order="sideways"))
    with pytest.raises(DomainError):
        resolve_algorithm("nope")
    assert resolve_algorithm("graphic-kp")[0] == "graphic"


def test_worker_env(monkeypatch):
    monkeypatch.setenv("LIMPROPHET_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("LIMPROPHET_WORKERS", "x")
    assert worker_count() == 1


def test_verify_dispatch():
    res = verify("order-lemma")
    assert res and all(r.passed for r in res)
    with pytest.raises(DomainError):
        verify("everything")


def test_cli_verbs(tmp_path, capsys):
    assert main(["list-algorithms"]) == 0
    assert "graphic-kp" in capsys.readouterr().out
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg(trials=50)))
    out = tmp_path / "r.json"
    assert main(["run", str(path), "-o", str(out)]) == 0
    assert json.loads(out.read_text())["trials"] == 50
    path.write_text(json.dumps(cfg(algorithm="graphic")))
    assert main(["run", str(path)]) == 2
    with pytest.raises(SystemExit):
        main(["verify", "bogus"])


def test_cli_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "limprophet", "verify", "order-lemma"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("PASS")


@pytest.mark.parametrize("name", ["rehearsal_k64.json", "graphic_sample_reserve.json"])
def test_shipped_configs_parse(name):
    from pathlib import Path
    c = ExperimentConfig.from_file(str(Path(__file__).parents[1] / "configs" / name))
    assert c.trials >= 1000
