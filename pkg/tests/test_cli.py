import csv
import functools
import json

import numpy as np
import pytest

from tpsieve import cli
from tpsieve.cli import EXIT_BAD_INPUT, EXIT_NONCONVERGED, EXIT_OK, main, read_csv
from tpsieve.model import default_hyperparams, load_model


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


def read_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def config_line(err):
    line = next(ln for ln in err.splitlines() if ln.startswith("config: "))
    return json.loads(line[len("config: "):])


@pytest.fixture
def cos_csv(tmp_path):
    x = np.linspace(0, 1, 101)
    return write_csv(tmp_path / "cos.csv", ["x", "y"], zip(x.tolist(), np.cos(np.pi * x).tolist()))


@pytest.fixture
def random_csv(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.random((120, 3))
    y = np.sin(3 * X[:, 0]) + X[:, 1] * X[:, 2] + 0.1 * rng.normal(size=120)
    return write_csv(tmp_path / "r.csv", ["a", "y", "b", "c"],
                     [[r[0], v, r[1], r[2]] for r, v in zip(X.tolist(), y.tolist())])


def test_index_small(capsys):
    assert main(["index", "--d", "3", "--dprime", "3", "--max-prod", "2", "--no-timestamp"]) == 0
    rows = read_rows(capsys.readouterr().out)
    assert [[int(r[k]) for k in ("j1", "j2", "j3")] for r in rows] == \
        [[1, 1, 1], [2, 1, 1], [1, 2, 1], [1, 1, 2]]
    assert [int(r["c"]) for r in rows] == [1, 2, 2, 2]


def test_index_by_count_and_errors(capsys):
    assert main(["index", "--d", "2", "--count", "5", "--no-timestamp"]) == 0
    assert len(read_rows(capsys.readouterr().out)) == 5
    assert main(["index", "--d", "2"]) == EXIT_BAD_INPUT
    assert main(["index", "--d", "2", "--dprime", "3", "--count", "4"]) == EXIT_BAD_INPUT


def test_timestamp_header_and_stability(tmp_path, capsys):
    args = ["index", "--d", "3", "--max-prod", "6"]
    main(args)
    assert capsys.readouterr().out.startswith("# generated ")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(args + ["--no-timestamp", "--out", str(a)])
    main(args + ["--no-timestamp", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_fit_cosine(cos_csv, tmp_path, capsys):
    out = tmp_path / "m.json"
    code = main(["fit", "--data", cos_csv, "--outcome", "y", "--J", "5", "--lambda", "1e-6",
                 "--out", str(out), "--json"])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["train_mse"] <= 1e-6
    assert load_model(out).index.d == 1


def test_fit_text_output(cos_csv, capsys):
    assert main(["fit", "--data", cos_csv, "--outcome", "y", "--J", "5", "--lambda", "1e-6"]) == 0
    out = capsys.readouterr().out
    assert "training MSE" in out
    assert float(out.split("training MSE = ")[1].split()[0]) <= 1e-6


def test_missing_outcome_column(cos_csv, capsys):
    assert main(["fit", "--data", cos_csv, "--outcome", "target"]) == EXIT_BAD_INPUT
    assert "target" in capsys.readouterr().err


def test_default_hyperparameters_echoed(random_csv, capsys):
    assert main(["fit", "--data", random_csv, "--outcome", "y", "--J", "0", "--dprime", "2"]) == 0
    cfg = config_line(capsys.readouterr().err)
    dflt = default_hyperparams(120, 3, 2)
    assert cfg["J"] == dflt.J
    assert cfg["lambda"] == pytest.approx(dflt.lam, rel=1e-15)
    assert cfg["features"] == ["a", "b", "c"]


def test_fit_with_cv_and_holdout(random_csv, capsys):
    code = main(["fit", "--data", random_csv, "--outcome", "y", "--dprime", "2",
                 "--cv-folds", "4", "--cv-lambdas", "8", "--j-grid", "5,10,20",
                 "--holdout", "0.25", "--json"])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["J"] in (5, 10, 20)
    assert summary["holdout_r2"] is not None and summary["holdout_r2"] > 0.3


def test_nonconvergence_exit_code(random_csv, monkeypatch, capsys):
    # a single sweep cannot meet the KKT tolerance
    one_sweep = functools.partial(cli.FitConfig, max_sweeps=1)
    monkeypatch.setattr(cli, "FitConfig", one_sweep)
    args = ["fit", "--data", random_csv, "--outcome", "y", "--dprime", "3", "--J", "60",
            "--lambda", "1e-6"]
    assert main(args) == EXIT_NONCONVERGED
    assert "did not converge" in capsys.readouterr().err
    assert main(args + ["--allow-nonconverged"]) == EXIT_OK


def test_predict_round_trip(random_csv, tmp_path, capsys):
    model = tmp_path / "m.json"
    assert main(["fit", "--data", random_csv, "--outcome", "y", "--dprime", "2", "--J", "15",
                 "--out", str(model)]) == 0
    capsys.readouterr()
    p1, p2 = tmp_path / "p1.csv", tmp_path / "p2.csv"
    assert main(["predict", "--model", str(model), "--data", random_csv, "--outcome", "y",
                 "--out", str(p1)]) == 0
    assert main(["predict", "--model", str(model), "--data", random_csv, "--outcome", "y",
                 "--out", str(p2)]) == 0
    assert p1.read_bytes() == p2.read_bytes()
    preds = np.array([float(r["prediction"]) for r in read_rows(p1.read_text())])
    assert p1.read_text().splitlines()[0] == "prediction"

    _, X, _ = read_csv(random_csv, "y")
    np.testing.assert_array_equal(preds, load_model(model).predict(X))


def test_predict_dimension_mismatch(random_csv, tmp_path, capsys):
    model = tmp_path / "m.json"
    main(["fit", "--data", random_csv, "--outcome", "y", "--J", "5", "--out", str(model)])
    small = write_csv(tmp_path / "s.csv", ["a", "b"], [[0.1, 0.2], [0.3, 0.4]])
    assert main(["predict", "--model", str(model), "--data", small]) == EXIT_BAD_INPUT
    assert "expects 3" in capsys.readouterr().err


def test_predict_bad_model_file(random_csv, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 99}')
    assert main(["predict", "--model", str(bad), "--data", random_csv]) == EXIT_BAD_INPUT


def test_bad_csv(tmp_path):
    p = write_csv(tmp_path / "t.csv", ["x", "y"], [[0.1, "abc"]])
    assert main(["fit", "--data", p, "--outcome", "y"]) == EXIT_BAD_INPUT
    assert main(["fit", "--data", str(tmp_path / "none.csv"), "--outcome", "y"]) == EXIT_BAD_INPUT


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["index", "--d", "2", "--count", "3", "--bogus"])
    assert exc.value.code == 2


def test_invalid_simulation_settings_exit_code(capsys):
    assert main(["simulate", "--truth", "poly", "--d", "3", "--D", "1"]) == EXIT_BAD_INPUT
    assert main(["simulate", "--methods", "sieve-magic"]) == EXIT_BAD_INPUT


def test_threads_env(monkeypatch, cos_csv, capsys):
    monkeypatch.setenv("SIEVE_THREADS", "2")
    main(["fit", "--data", cos_csv, "--outcome", "y", "--J", "5"])
    assert config_line(capsys.readouterr().err)["threads"] == 2
    main(["fit", "--data", cos_csv, "--outcome", "y", "--J", "5", "--threads", "3"])
    assert config_line(capsys.readouterr().err)["threads"] == 3


def test_simulate_interaction_additive_fails(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    code = main(["simulate", "--truth", "interaction", "--d", "4", "--D", "2", "--n", "2000",
                 "--snr", "30", "--methods", "sieve-lasso,sieve-additive", "--out", str(out)])
    assert code == 0
    rows = {r["method"]: r for r in read_rows(out.read_text())}
    assert float(rows["sieve-additive"]["r2"]) <= 0.1
    assert float(rows["sieve-lasso"]["r2"]) >= 0.5


def test_bench_single_method_matches_simulate(tmp_path, capsys):
    common = ["--truth", "poly", "--d", "3", "--D", "2", "--n", "150", "--n-test", "300",
              "--methods", "krr", "--no-timestamp"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", *common, "--out", str(a)]) == 0
    assert main(["bench", *common, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    summary = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert set(summary) == {"krr"}
