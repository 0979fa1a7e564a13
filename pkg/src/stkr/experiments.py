"""Seeded node-classification benchmark: grids, validation selection, CSVs."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kpca as kp
from .graph_data import (INDUCTIVE, MODES, TRANSDUCTIVE, GraphDataset, load_dataset_dir,
                         make_split, mask_visible)
from .kernel import build_normalized_kernel, kernel_rows
from .labelprop import LabelPropConfig
from .solvers import (DEFAULT_TOL, ConvergenceError, SingularSystemError, fit_direct, predict,
                      richardson_path)
from .transform import PolyTransform, TransformDomainError, inverse_laplacian

logger = logging.getLogger(__name__)

METHODS = ("lp", "stkr-lap", "stkr-poly", "stkr-topd", "krr")

ITERS = [1, 2, 4, 8, 16, 32]
ETAS = [0.7, 0.8, 0.9, 0.99, 0.999, 0.9999, 0.99999, 0.999999]
BETAS = [10.0 ** k for k in range(3, -9, -1)]
DIMS = [32, 64, 128, 256, 512]
POWERS = [1, 2, 4, 6, 8]

# Key order fixes the enumeration order and therefore tie-breaking.
GRID_KEYS = {
    "lp": ("eta", "T"),
    "stkr-lap": ("eta", "beta", "T"),
    "stkr-poly": ("p", "beta", "T"),
    "stkr-topd": ("d", "beta"),
    "krr": ("beta",),
}
_INT_KEYS = {"T", "p", "d"}


def default_grid(method: str) -> dict:
    grids = {
        "lp": {"eta": ETAS, "T": ITERS},
        "stkr-lap": {"eta": ETAS, "beta": BETAS, "T": ITERS},
        "stkr-poly": {"p": [8], "beta": BETAS, "T": ITERS},
        "stkr-topd": {"d": DIMS, "beta": BETAS},
        "krr": {"beta": BETAS},
    }
    return {k: list(v) for k, v in grids[method].items()}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple
    method: str
    mode: str = TRANSDUCTIVE
    p_test: float = 0.01
    seeds: tuple = tuple(range(10))
    grid: dict = field(default_factory=dict)
    tol: float = DEFAULT_TOL
    step: str = "auto"
    train_size: int | None = None
    val_size: int | None = None
    out: str | None = None

    def __post_init__(self):
        if isinstance(self.datasets, (str, os.PathLike)):
            object.__setattr__(self, "datasets", (str(self.datasets),))
        object.__setattr__(self, "datasets", tuple(str(d) for d in self.datasets))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.method == "lp" and self.mode == INDUCTIVE:
            raise ConfigError("label propagation is transductive only")
        if not self.datasets:
            raise ConfigError("no dataset given")
        if not self.seeds:
            raise ConfigError("no seeds given")
        grid = default_grid(self.method)
        for k, v in dict(self.grid).items():
            if k not in GRID_KEYS[self.method]:
                raise ConfigError(f"grid key {k!r} not used by {self.method}")
            grid[k] = list(v)
        # An empty T list switches STKR to the exact solve.
        if self.method in ("stkr-lap", "stkr-poly") and grid.get("T") == []:
            if self.method == "stkr-lap":
                raise ConfigError("stkr-lap has no direct solver; give a T grid")
            grid.pop("T")
        for k, v in grid.items():
            if not v:
                raise ConfigError(f"grid for {k!r} is empty")
            grid[k] = [int(x) if k in _INT_KEYS else float(x) for x in v]
        object.__setattr__(self, "grid", grid)

    def points(self) -> list[dict]:
        keys = [k for k in GRID_KEYS[self.method] if k in self.grid]
        return [dict(zip(keys, vals)) for vals in itertools.product(*(self.grid[k] for k in keys))]


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    method: str
    mode: str
    p_test: float
    seed: int
    params: str
    val_acc: float
    test_acc: float
    iterations: int
    status: str = "ok"
    fit_seconds: float = 0.0


RESULT_FIELDS = ("dataset", "method", "mode", "p_test", "seed", "params", "val_acc",
                 "test_acc", "iterations", "status")
SUMMARY_FIELDS = ("dataset", "method", "mode", "p_test", "seeds", "test_mean", "test_std",
                  "val_mean", "val_std")


def format_params(point: dict) -> str:
    return ";".join(f"{k}={v!r}" for k, v in point.items())


def accuracy(scores, labels) -> float:
    """Argmax accuracy; ties go to the lowest class id."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        return float("nan")
    return float(np.mean(np.argmax(np.asarray(scores), axis=1) == labels))


# --------------------------------------------------------------------------
# per-seed task


@dataclass
class SeedTask:
    """Train-time view of one split plus the kernel rows used for scoring.

    Only ``Y`` (one-hot train labels) ever reaches a fit routine; val and
    test labels stay here for scoring.
    """

    gram: object
    Y: np.ndarray
    val_rows: object
    test_rows: object
    val_labels: np.ndarray
    test_labels: np.ndarray
    val_pos: np.ndarray | None
    test_pos: np.ndarray | None


def build_task(ds: GraphDataset, cfg: ExperimentConfig, seed: int) -> SeedTask:
    split = make_split(ds, seed, cfg.p_test, cfg.train_size, cfg.val_size, mode=cfg.mode)
    vg = mask_visible(ds, split)
    gram, _ = build_normalized_kernel(vg)
    Y = np.eye(ds.num_classes)[ds.labels[split.train_ids]]
    if cfg.mode == TRANSDUCTIVE:
        vpos, tpos = vg.index_of(split.val_ids), vg.index_of(split.test_ids)
        vrows, trows = gram.matrix[vpos], gram.matrix[tpos]
    else:
        vpos = tpos = None
        vrows = kernel_rows(ds, vg, split.val_ids)
        trows = kernel_rows(ds, vg, split.test_ids)
    return SeedTask(gram, Y, vrows, trows, ds.labels[split.val_ids], ds.labels[split.test_ids],
                    vpos, tpos)


_SKIPPABLE = (ConvergenceError, SingularSystemError, TransformDomainError, kp.RankError,
              np.linalg.LinAlgError)


def _stkr_candidates(task: SeedTask, cfg: ExperimentConfig, transform_of):
    """Yield ``(point, val_scores, test_scores, iterations)`` for STKR grids."""
    outer = [k for k in GRID_KEYS[cfg.method] if k in cfg.grid and k != "T"]
    Ts = cfg.grid.get("T")
    for vals in itertools.product(*(cfg.grid[k] for k in outer)):
        point = dict(zip(outer, vals))
        try:
            t = transform_of(point)
            if Ts is None:
                models = {None: fit_direct(task.gram, t, point["beta"], task.Y)}
            else:
                models = richardson_path(task.gram, t, point["beta"], task.Y, Ts,
                                         step=cfg.step, tol=cfg.tol)
        except _SKIPPABLE as exc:
            logger.info("skipping %s: %s", point, exc)
            continue
        for T in (Ts or [None]):
            m = models[T]
            full = dict(point) if T is None else {**point, "T": T}
            yield full, predict(m, task.val_rows), predict(m, task.test_rows), m.iterations


def _lp_candidates(task: SeedTask, cfg: ExperimentConfig):
    S = task.gram.matrix / task.gram.size
    N = task.gram.size
    y0 = np.zeros((N, task.Y.shape[1]))
    y0[: task.gram.n] = task.Y
    Ts = sorted(cfg.grid["T"])
    for eta in cfg.grid["eta"]:
        LabelPropConfig(eta, Ts[-1])
        out = y0.copy()
        for it in range(1, Ts[-1] + 1):
            out = eta * (S @ out) + y0
            if it in Ts:
                yield {"eta": eta, "T": it}, out[task.val_pos], out[task.test_pos], it


def _topd_candidates(task: SeedTask, cfg: ExperimentConfig):
    n = task.gram.n
    Gm = task.gram.matrix[n:, n:]
    dmax = max(cfg.grid["d"])
    try:
        full = kp.fit_kpca(Gm, min(dmax, Gm.shape[0]))
    except kp.RankError as exc:
        logger.info("kernel PCA failed: %s", exc)
        return
    train_rows = task.gram.matrix[:n, n:]
    val_rows = task.val_rows[:, n:]
    test_rows = task.test_rows[:, n:]
    for d in cfg.grid["d"]:
        try:
            model = kp.truncate(full, d)
        except kp.RankError as exc:
            logger.info("skipping d=%d: %s", d, exc)
            continue
        F = kp.features(model, train_rows)
        Fv, Ft = kp.features(model, val_rows), kp.features(model, test_rows)
        for beta in cfg.grid["beta"]:
            fitted = kp.fit_probe(model, F, task.Y, beta)
            yield {"d": d, "beta": beta}, Fv @ fitted.weights, Ft @ fitted.weights, 0


def candidates(task: SeedTask, cfg: ExperimentConfig):
    if cfg.method == "lp":
        return _lp_candidates(task, cfg)
    if cfg.method == "stkr-topd":
        return _topd_candidates(task, cfg)
    if cfg.method == "stkr-lap":
        return _stkr_candidates(task, cfg, lambda pt: inverse_laplacian(pt["eta"]))
    if cfg.method == "stkr-poly":
        return _stkr_candidates(task, cfg, lambda pt: PolyTransform.monomial(pt["p"]))
    return _stkr_candidates(task, cfg, lambda pt: PolyTransform((1.0,)))


def run_seed(ds: GraphDataset, cfg: ExperimentConfig, seed: int) -> ResultRow:
    """Fit every grid point, keep the first one with the best val accuracy."""
    t0 = time.perf_counter()
    name = ds.name or "dataset"
    try:
        task = build_task(ds, cfg, seed)
        best = None
        for point, sv, st, iters in candidates(task, cfg):
            va = accuracy(sv, task.val_labels)
            if best is None or va > best[1]:
                best = (point, va, accuracy(st, task.test_labels), iters)
    except (ValueError, RuntimeError) as exc:
        return ResultRow(name, cfg.method, cfg.mode, cfg.p_test, seed, "", float("nan"),
                         float("nan"), 0, f"failed: {exc}", time.perf_counter() - t0)
    elapsed = time.perf_counter() - t0
    if best is None:
        return ResultRow(name, cfg.method, cfg.mode, cfg.p_test, seed, "", float("nan"),
                         float("nan"), 0, "failed: every grid point failed", elapsed)
    point, va, ta, iters = best
    return ResultRow(name, cfg.method, cfg.mode, cfg.p_test, seed, format_params(point), va, ta,
                     iters, "ok", elapsed)


def _worker(args):
    ds, cfg, seed = args
    return run_seed(ds, cfg, seed)


def thread_count() -> int:
    raw = os.environ.get("STKR_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"STKR_THREADS must be an integer, got {raw!r}") from None


def run_experiment(cfg: ExperimentConfig, datasets: dict | None = None) -> list[ResultRow]:
    """All (dataset, seed) rows in (dataset, seed) order.

    ``datasets`` may map config dataset entries to already-loaded graphs.
    Seeds run in a process pool of ``STKR_THREADS`` workers; ordering of
    the returned rows does not depend on completion order.
    """
    datasets = dict(datasets or {})
    jobs = []
    for path in cfg.datasets:
        ds = datasets.get(path)
        if ds is None:
            ds = datasets[path] = load_dataset_dir(path)
        jobs += [(ds, cfg, s) for s in cfg.seeds]
    workers = min(thread_count(), len(jobs))
    if workers <= 1:
        rows = [_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_worker, jobs))
    if cfg.out:
        write_outputs(rows, cfg.out)
    return rows


# --------------------------------------------------------------------------
# aggregation and files


def _fmt(x: float) -> str:
    return "nan" if np.isnan(x) else f"{x:.6f}"


def summarize(rows) -> list[dict]:
    groups = {}
    for r in rows:
        groups.setdefault((r.dataset, r.method, r.mode, r.p_test), []).append(r)
    out = []
    for (dsn, method, mode, p_test), rs in groups.items():
        ok = [r for r in rs if r.status == "ok"]
        test = np.array([r.test_acc for r in ok]) * 100
        val = np.array([r.val_acc for r in ok]) * 100

        def stats(a):
            if len(a) == 0:
                return float("nan"), float("nan")
            return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0

        tm, ts = stats(test)
        vm, vs = stats(val)
        out.append({"dataset": dsn, "method": method, "mode": mode, "p_test": p_test,
                    "seeds": len(ok), "test_mean": tm, "test_std": ts,
                    "val_mean": vm, "val_std": vs})
    return out


def results_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_FIELDS)
    for r in rows:
        w.writerow([r.dataset, r.method, r.mode, repr(r.p_test), r.seed, r.params,
                    _fmt(r.val_acc), _fmt(r.test_acc), r.iterations, r.status])
    return buf.getvalue()


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for s in summarize(rows):
        w.writerow([s["dataset"], s["method"], s["mode"], repr(s["p_test"]), s["seeds"],
                    _fmt(s["test_mean"]), _fmt(s["test_std"]), _fmt(s["val_mean"]),
                    _fmt(s["val_std"])])
    return buf.getvalue()


def timings_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("dataset", "method", "mode", "seed", "fit_seconds"))
    for r in rows:
        w.writerow([r.dataset, r.method, r.mode, r.seed, f"{r.fit_seconds:.3f}"])
    return buf.getvalue()


def write_outputs(rows, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(results_csv(rows), encoding="utf-8")
    (out / "summary.csv").write_text(summary_csv(rows), encoding="utf-8")
    (out / "timings.csv").write_text(timings_csv(rows), encoding="utf-8")
    return out


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRow:
    value: float
    mean: float
    std: float
    seeds: int


def _sweep(cfg: ExperimentConfig, key: str, values, datasets=None) -> list[SweepRow]:
    table = []
    for v in values:
        sub = replace(cfg, grid={**cfg.grid, key: [v]}, out=None)
        s = summarize(run_experiment(sub, datasets))[0]
        table.append(SweepRow(v, s["test_mean"], s["test_std"], s["seeds"]))
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"sweep_{key}.tsv").write_text(sweep_text(key, table), encoding="utf-8")
    return table


def sweep_p(cfg: ExperimentConfig, p_list=POWERS, datasets=None) -> list[SweepRow]:
    """Best-validated test accuracy of ``s(l) = l^p`` for each ``p``."""
    if cfg.method != "stkr-poly":
        raise ConfigError("sweep-p needs method stkr-poly")
    if any(int(p) != p or p < 1 for p in p_list):
        raise ConfigError("powers must be positive integers")
    return _sweep(cfg, "p", [int(p) for p in p_list], datasets)


def sweep_eta(cfg: ExperimentConfig, eta_list=ETAS, datasets=None) -> list[SweepRow]:
    """Best-validated test accuracy of the inverse Laplacian for each ``eta``."""
    if cfg.method != "stkr-lap":
        raise ConfigError("sweep-eta needs method stkr-lap")
    if any(not 0 < e < 1 for e in eta_list):
        raise ConfigError("eta values must lie in (0, 1)")
    return _sweep(cfg, "eta", list(eta_list), datasets)


def sweep_text(key: str, table) -> str:
    lines = [f"{key}\tmean\tstd\tseeds"]
    lines += [f"{r.value!r}\t{_fmt(r.mean)}\t{_fmt(r.std)}\t{r.seeds}" for r in table]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# key-value config files


def parse_list(text: str, cast=float) -> list:
    """``"1,2,4"``, ``"1e3 1e2"`` or an integer range ``"0-9"``."""
    text = text.strip()
    if cast is int and "-" in text and "," not in text and " " not in text:
        lo, _, hi = text.partition("-")
        return list(range(int(lo), int(hi) + 1))
    return [cast(x) for x in text.replace(",", " ").split()]


def parse_kv(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        out[key.strip()] = val.strip()
    return out


def parse_grid(text: str) -> dict:
    grid = {}
    for k, v in parse_kv(text).items():
        k = k.removeprefix("grid.")
        grid[k] = parse_list(v, int if k in _INT_KEYS else float)
    return grid


def config_from_kv(text: str, **overrides) -> ExperimentConfig:
    kv = parse_kv(text)
    fields = {"grid": {}}
    for k, v in kv.items():
        if k.startswith("grid."):
            name = k[5:]
            fields["grid"][name] = parse_list(v, int if name in _INT_KEYS else float)
        elif k in ("dataset", "datasets"):
            fields["datasets"] = tuple(v.replace(",", " ").split())
        elif k == "seeds":
            fields["seeds"] = tuple(parse_list(v, int))
        elif k in ("p_test", "tol"):
            fields[k] = float(v)
        elif k in ("train_size", "val_size"):
            fields[k] = int(v)
        elif k in ("method", "mode", "step", "out"):
            fields[k] = v
        else:
            raise ConfigError(f"unknown config key {k!r}")
    for k, v in overrides.items():
        if v is None:
            continue
        if k == "grid":
            fields["grid"] = {**fields["grid"], **v}
        else:
            fields[k] = v
    for k in ("datasets", "method"):
        if k not in fields:
            raise ConfigError(f"missing required setting {k!r}")
    return ExperimentConfig(**fields)
