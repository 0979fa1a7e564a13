"""Command-line entry point: ``stkr run | sweep-p | sweep-eta | verify | import-linqs``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import experiments as ex
from . import oracle
from .graph_data import (CORA_CLASS_ORDER, INDUCTIVE, TRANSDUCTIVE, DatasetFormatError,
                         DatasetValidationError, convert_linqs, save_dataset)

_MODES = {"t": TRANSDUCTIVE, "i": INDUCTIVE, TRANSDUCTIVE: TRANSDUCTIVE, INDUCTIVE: INDUCTIVE}


def _add_experiment_args(p):
    p.add_argument("--config", help="key-value config file; flags override it")
    p.add_argument("--dataset", action="append",
                   help="directory with edges.txt and labels.txt (repeatable)")
    p.add_argument("--method", choices=ex.METHODS)
    p.add_argument("--mode", choices=sorted(_MODES))
    p.add_argument("--p-test", type=float)
    p.add_argument("--seeds", help="e.g. 0-9 or 0,3,5")
    p.add_argument("--grid", help="key-value grid file, e.g. 'beta = 1e-2, 1e-3'")
    p.add_argument("--tol", type=float)
    p.add_argument("--step", help="'auto', 'power', 'prescribed' or a number")
    p.add_argument("--out", help="output directory for CSV files")


def _config(args, method=None) -> ex.ExperimentConfig:
    text = Path(args.config).read_text() if args.config else ""
    grid = ex.parse_grid(Path(args.grid).read_text()) if args.grid else None
    return ex.config_from_kv(
        text,
        datasets=tuple(args.dataset) if args.dataset else None,
        method=args.method or method,
        mode=_MODES[args.mode] if args.mode else None,
        p_test=args.p_test,
        seeds=tuple(ex.parse_list(args.seeds, int)) if args.seeds else None,
        grid=grid,
        tol=args.tol,
        step=args.step,
        out=args.out,
    )


def cmd_run(args):
    cfg = _config(args)
    rows = ex.run_experiment(cfg)
    sys.stdout.write(ex.summary_csv(rows))
    failed = [r for r in rows if r.status != "ok"]
    for r in failed:
        print(f"seed {r.seed}: {r.status}", file=sys.stderr)
    return 0


def cmd_sweep(args, key):
    cfg = _config(args, method="stkr-poly" if key == "p" else "stkr-lap")
    if key == "p":
        values = ex.parse_list(args.p_list, int) if args.p_list else ex.POWERS
        table = ex.sweep_p(cfg, values)
    else:
        values = ex.parse_list(args.eta_list, float) if args.eta_list else ex.ETAS
        table = ex.sweep_eta(cfg, values)
    sys.stdout.write(ex.sweep_text(key, table))
    return 0


def _random_psd_weights(rng, N):
    B = sp.random(2 * N, N, density=0.3, random_state=rng).toarray()
    B[:, B.sum(axis=0) == 0] = 1.0
    return B.T @ B


def cmd_verify(args):
    sk = oracle.make_synthetic_kernel(N=args.N, seed=args.seed)
    decay = oracle.approximation_decay(sk, [50, 200, 800], p=2, trials=args.trials, seed=args.seed)
    frac, slope = decay.monotone_fraction(group=10), decay.loglog_slope()
    rate = oracle.eigenvalue_concentration(sk, 200, trials=100, delta=0.05, seed=args.seed)
    rng = np.random.Generator(np.random.Philox(args.seed))
    ident = max(oracle.laplacian_identity_check(_random_psd_weights(rng, 12), eta, 20,
                                                args.seed + i)
                for i, eta in enumerate([0.0, 0.5, 0.9] * 7))
    sys.stdout.write(decay.to_text())
    checks = [
        ("decay monotone fraction", frac, frac >= 0.9),
        ("decay log-log slope", slope, -0.9 <= slope <= -0.1),
        ("top eigenvalue bound pass-rate", rate, rate >= 0.93),
        ("laplacian identity max rel. error", ident, ident <= 1e-8),
    ]
    for name, val, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {val:.4g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "decay.tsv").write_text(decay.to_text())
    return 0 if all(ok for *_, ok in checks) else 1


def cmd_import_linqs(args):
    order = CORA_CLASS_ORDER if args.cora_order else None
    ds = convert_linqs(args.content, args.cites, order, name=args.name)
    out = save_dataset(ds, args.out)
    print(f"wrote {ds.num_nodes} nodes, {ds.num_edges} edges, {ds.num_classes} classes to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stkr", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="grid search with validation selection over seeds")
    _add_experiment_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep-p", help="accuracy of s(l) = l^p for each p")
    _add_experiment_args(p)
    p.add_argument("--p-list", help="default 1,2,4,6,8")
    p.set_defaults(func=lambda a: cmd_sweep(a, "p"))

    p = sub.add_parser("sweep-eta", help="accuracy of the inverse Laplacian for each eta")
    _add_experiment_args(p)
    p.add_argument("--eta-list")
    p.set_defaults(func=lambda a: cmd_sweep(a, "eta"))

    p = sub.add_parser("verify", help="empirical checks on synthetic kernels")
    p.add_argument("--N", type=int, default=2000)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("import-linqs", help="convert LINQS .content/.cites files")
    p.add_argument("--content", required=True)
    p.add_argument("--cites", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="")
    p.add_argument("--cora-order", action="store_true",
                   help="number Cora classes in the Planetoid order")
    p.set_defaults(func=cmd_import_linqs)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ex.ConfigError, DatasetFormatError, DatasetValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
