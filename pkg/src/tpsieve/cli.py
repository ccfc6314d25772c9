"""Command-line interface: fit, predict, simulate, index, bench.

Exit codes: 0 success, 2 bad input, 3 solver did not converge.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys

import numpy as np

from .basis import BasisKind
from .model import (
    OLS,
    PENALIZED,
    CVConfig,
    Dataset,
    FitConfig,
    ModelFormatError,
    resolve_config,
    fit_sieve,
    load_model,
    save_model,
)
from .simulate import METHODS, TRUTHS, SimulationSpec, evaluate, simulate
from .unravel import IndexBudgetError, generate_index_matrix, index_matrix_for_count

EXIT_OK, EXIT_BAD_INPUT, EXIT_NONCONVERGED = 0, 2, 3


class BadInput(Exception):
    pass


def read_csv(path, outcome: str | None = None):
    """Numeric CSV with a header row -> (feature names, X, y or None)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            body = [row for row in reader if row]
    except (OSError, UnicodeDecodeError) as exc:
        raise BadInput(f"cannot read {path}: {exc}") from exc
    if not header:
        raise BadInput(f"{path} has no header row")
    header = [h.strip() for h in header]
    if outcome is not None and outcome not in header:
        raise BadInput(f"outcome column {outcome!r} not found in {path}")
    try:
        data = np.array([[float(v) for v in row] for row in body], dtype=np.float64)
    except ValueError as exc:
        raise BadInput(f"{path}: non-numeric value ({exc})") from exc
    if data.size == 0:
        raise BadInput(f"{path} has no data rows")
    if data.shape[1] != len(header):
        raise BadInput(f"{path}: rows have {data.shape[1]} fields, header has {len(header)}")
    if outcome is None:
        return header, data, None
    k = header.index(outcome)
    names = header[:k] + header[k + 1:]
    return names, np.delete(data, k, axis=1), data[:, k]


def _write_csv(rows, fields, out, timestamp: bool):
    buf = io.StringIO()
    if timestamp:
        buf.write(f"# generated {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r[f]) for f in fields])
    if out in (None, "-"):
        sys.stdout.write(buf.getvalue())
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _echo(args, resolved: dict):
    print("config: " + json.dumps(resolved, sort_keys=True, default=str), file=sys.stderr)


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    try:
        return max(1, int(os.environ.get("SIEVE_THREADS", "1")))
    except ValueError:
        raise BadInput("SIEVE_THREADS must be an integer") from None


# -- subcommands -----------------------------------------------------------

def run_fit(args) -> int:
    names, X, y = read_csv(args.data, args.outcome)
    n = X.shape[0]
    test = None
    if args.holdout:
        if not 0.0 < args.holdout < 1.0:
            raise BadInput("--holdout must be a fraction in (0, 1)")
        perm = np.random.default_rng(args.seed).permutation(n)
        n_test = max(1, int(round(args.holdout * n)))
        test = Dataset(X[perm[:n_test]], y[perm[:n_test]])
        X, y = X[perm[n_test:]], y[perm[n_test:]]
    data = Dataset(X, y)
    cv = None
    if args.cv_folds:
        grid = tuple(int(v) for v in args.j_grid.split(",")) if args.j_grid else None
        cv = CVConfig(folds=args.cv_folds, n_lambdas=args.cv_lambdas, j_grid=grid, seed=args.seed)
    cfg = FitConfig(estimator=args.estimator, basis=args.basis, d_prime=args.dprime, J=args.J,
                    lam=args.lam, cv=cv, penalize_intercept=args.penalize_intercept,
                    threads=_threads(args))
    if cv is None:
        cfg = resolve_config(cfg, data.n, data.d)
    model = fit_sieve(data, cfg)
    resolved = {"command": "fit", "data": args.data, "outcome": args.outcome, "features": names,
                "estimator": model.meta["estimator"], "basis": model.basis.value,
                "d": data.d, "d_prime": model.index.d_prime, "J": model.meta["J"],
                "lambda": model.meta["lambda"], "cv_folds": args.cv_folds,
                "holdout": args.holdout, "seed": args.seed, "out": args.out,
                "penalize_intercept": args.penalize_intercept, "threads": cfg.threads}
    _echo(args, resolved)
    fitted = model.predict(data.features)
    summary = {"train_mse": float(np.mean((data.outcome - fitted) ** 2)),
               "converged": model.meta["converged"], "J": model.meta["J"],
               "lambda": model.meta["lambda"]}
    if test is not None:
        m = evaluate(model, test)
        summary.update(holdout_mse=m.mse, holdout_r2=m.r2)
    if args.out:
        save_model(model, args.out)
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        print(f"J = {summary['J']}  lambda = {summary['lambda']:.6g}")
        print(f"training MSE = {summary['train_mse']:.6g}")
        if test is not None:
            r2 = "NA" if summary["holdout_r2"] is None else f"{summary['holdout_r2']:.6g}"
            print(f"holdout MSE = {summary['holdout_mse']:.6g}  holdout R2 = {r2}")
        if not model.meta["converged"]:
            print("warning: solver did not converge", file=sys.stderr)
    if not model.meta["converged"] and not args.allow_nonconverged:
        return EXIT_NONCONVERGED
    return EXIT_OK


def run_predict(args) -> int:
    model = load_model(args.model)
    names, X, _ = read_csv(args.data, args.outcome)
    if X.shape[1] != model.d:
        raise BadInput(f"model expects {model.d} feature columns, data has {X.shape[1]}")
    _echo(args, {"command": "predict", "model": args.model, "data": args.data,
                 "features": names, "d": model.d, "out": args.out})
    pred = model.predict(X)
    _write_csv([{"prediction": float(v)} for v in pred], ["prediction"], args.out, False)
    if args.json:
        print(json.dumps({"n": int(pred.size)}), file=sys.stderr)
    return EXIT_OK


def _parse_methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise BadInput(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    return methods


SIM_FIELDS = ["method", "truth", "d", "D", "n", "snr", "seed", "mse", "r2"]


def _simulate_rows(args, methods):
    rows = []
    for r in range(args.reps):
        spec = SimulationSpec(truth=args.truth, d=args.d, D=args.D, n_train=args.n,
                              n_test=args.n_test, snr=args.snr, seed=args.seed + r)
        rows.extend(simulate(spec, methods, d_prime=args.dprime, folds=args.folds))
    return rows


def run_simulate(args) -> int:
    methods = _parse_methods(args.methods)
    _echo(args, {"command": args.command, "truth": args.truth, "d": args.d, "D": args.D,
                 "n": args.n, "n_test": args.n_test, "snr": args.snr, "seed": args.seed,
                 "reps": args.reps, "methods": methods, "dprime": args.dprime,
                 "folds": args.folds, "out": args.out})
    rows = _simulate_rows(args, methods)
    _write_csv(rows, SIM_FIELDS, args.out, not args.no_timestamp)
    if args.command == "bench" or args.json:
        summary = {}
        for m in methods:
            r2 = [r["r2"] for r in rows if r["method"] == m and r["r2"] is not None]
            mse = [r["mse"] for r in rows if r["method"] == m]
            summary[m] = {"mean_mse": math.fsum(mse) / len(mse),
                          "mean_r2": math.fsum(r2) / len(r2) if r2 else None}
        print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def run_index(args) -> int:
    if (args.max_prod is None) == (args.count is None):
        raise BadInput("give exactly one of --max-prod or --count")
    dprime = args.dprime or args.d
    _echo(args, {"command": "index", "d": args.d, "dprime": dprime,
                 "max_prod": args.max_prod, "count": args.count, "out": args.out})
    if args.max_prod is not None:
        index = generate_index_matrix(args.d, dprime, args.max_prod)
    else:
        index = index_matrix_for_count(args.d, dprime, args.count)
    fields = [f"j{k + 1}" for k in range(args.d)] + ["c"]
    rows = [dict(zip(fields, [*map(int, r), int(c)])) for r, c in zip(index.rows, index.c)]
    _write_csv(rows, fields, args.out, not args.no_timestamp)
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tpsieve", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="machine-readable summary")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $SIEVE_THREADS or 1)")

    f = sub.add_parser("fit", help="fit a sieve model to a CSV file")
    f.add_argument("--data", required=True)
    f.add_argument("--outcome", required=True)
    f.add_argument("--estimator", choices=(OLS, PENALIZED), default=PENALIZED)
    f.add_argument("--basis", choices=[k.value for k in BasisKind], default="cosine")
    f.add_argument("--dprime", type=int, default=1)
    f.add_argument("--J", type=int, default=0, help="basis count; 0 uses the default rule")
    f.add_argument("--lambda", dest="lam", type=float, default=0.0,
                   help="penalty; 0 uses sqrt(log J / n)")
    f.add_argument("--cv-folds", type=int, default=0)
    f.add_argument("--cv-lambdas", type=int, default=50)
    f.add_argument("--j-grid", default=None, help="comma-separated J values for CV")
    f.add_argument("--holdout", type=float, default=0.0)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", default=None, help="model JSON path")
    f.add_argument("--allow-nonconverged", action="store_true")
    f.add_argument("--no-penalize-intercept", dest="penalize_intercept", action="store_false")
    common(f)
    f.set_defaults(func=run_fit)

    pr = sub.add_parser("predict", help="predict with a saved model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--outcome", default=None, help="column to drop before predicting")
    pr.add_argument("--out", default=None)
    common(pr)
    pr.set_defaults(func=run_predict)

    for name, default_methods in (("simulate", "sieve-lasso"), ("bench", ",".join(METHODS))):
        s = sub.add_parser(name, help=f"{name} on synthetic data")
        s.add_argument("--truth", choices=TRUTHS, default="poly")
        s.add_argument("--d", type=int, default=4)
        s.add_argument("--D", type=int, default=2)
        s.add_argument("--n", type=int, default=800)
        s.add_argument("--n-test", type=int, default=2000)
        s.add_argument("--snr", type=float, default=3.0)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--reps", type=int, default=1)
        s.add_argument("--methods", default=default_methods)
        s.add_argument("--dprime", type=int, default=2)
        s.add_argument("--folds", type=int, default=5)
        s.add_argument("--out", default=None)
        s.add_argument("--no-timestamp", action="store_true")
        common(s)
        s.set_defaults(func=run_simulate)

    ix = sub.add_parser("index", help="dump an index matrix as CSV")
    ix.add_argument("--d", type=int, required=True)
    ix.add_argument("--dprime", type=int, default=None)
    ix.add_argument("--max-prod", type=int, default=None)
    ix.add_argument("--count", type=int, default=None)
    ix.add_argument("--out", default=None)
    ix.add_argument("--no-timestamp", action="store_true")
    common(ix)
    ix.set_defaults(func=run_index)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BadInput, ModelFormatError, IndexBudgetError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
