"""Per-k sweeps over both model families, with resumable run directories.

A run directory holds

* ``config.json``   the sweep parameters, verbatim;
* ``records.jsonl`` one record per finished k, sorted by k;
* ``timings.jsonl`` wall-clock runtimes (kept apart so records are byte-stable);
* ``summary.json``  the aggregate recomputed from the records;
* ``manifest.json`` sha256 of the three files above.

Every write goes through a temporary file and ``os.replace``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .bisample import erm_revenue_enclosure, ratio
from .curve import curve_from_dict
from .gauge import Weighting, lower_gauge
from .model import build_lower_model, build_upper_model, extract_curve
from .solve import SolveOptions, certified_bound, default_options, solve

log = logging.getLogger(__name__)

PARTIAL = "partial, non-certifying"
CERTIFIED = "certified"


class RunDirError(RuntimeError):
    pass


class ReportMismatch(RunDirError):
    pass


@dataclass(frozen=True)
class ErrorBudget:
    n: int
    riemann_error: float
    normalization_loss: float


def error_budget(n: int) -> ErrorBudget:
    """Discretisation error 2/(n-1) + (5n-6)/n^2 and area factor (n-1)/(n+1)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return ErrorBudget(n, 2.0 / (n - 1) + (5 * n - 6) / n**2, (n - 1) / (n + 1))


# --- per-k tasks (top level so they pickle) -----------------------------------


def _options(opts: dict) -> SolveOptions:
    return SolveOptions(**opts)


def upper_task(n: int, k: int, opts: dict, tol: float) -> tuple[dict, float]:
    t0 = time.perf_counter()
    rec: dict = {"k": k, "q_opt": (k - 1) / n}
    try:
        model = build_upper_model(n, k)
        res = solve(model, _options(opts))
        rec.update(status=res.status.value, model_value=res.incumbent_value, dual_bound=res.dual_bound)
        if res.incumbent is None:
            raise RuntimeError(f"no incumbent ({res.status.value})")
        curve = extract_curve(model, res.incumbent)
        rec["curve"] = curve.to_dict()
        rec["exact"] = ratio(curve, tol).to_dict()
        rec["error"] = None
    except Exception as exc:  # recorded, the sweep goes on
        rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec, time.perf_counter() - t0


def lower_task(n: int, N: int, weighting: str, k: int, opts: dict, tiered: bool, tol: float,
               strengthen: bool = False) -> tuple[dict, float]:
    t0 = time.perf_counter()
    rec: dict = {"k": k}
    try:
        gauge = lower_gauge(n, N, k, weighting)
        lo, hi = gauge.optimal_interval
        rec["gauge"] = {"opt_index": gauge.opt_index, "q_lo": lo, "q_hi": hi, "m": gauge.meta.get("m")}
        rec["q_opt"] = 0.5 * (lo + hi)
        options = _options(opts)
        if tiered:
            options = replace(options, relative_gap=default_options(weighting, N, k).relative_gap)
        rec["relative_gap"] = options.relative_gap
        model = build_lower_model(gauge, strengthen=strengthen)
        res = solve(model, options)
        rec.update(status=res.status.value, incumbent=res.incumbent_value, dual_bound=res.dual_bound)
        rec["certified"] = certified_bound(res)
        if res.incumbent is not None:
            curve = extract_curve(model, res.incumbent)
            rec["curve"] = curve.to_dict()
            # the lower model may never exceed the revenue of its own primal curve
            rec["primal_revenue"] = erm_revenue_enclosure(curve, tol).to_dict()
        rec["error"] = None
    except Exception as exc:
        rec["error"] = f"{type(exc).__name__}: {exc}"
        rec["certified"] = None
    return rec, time.perf_counter() - t0


# --- aggregation -------------------------------------------------------------


def aggregate_upper(records: list[dict], n: int) -> dict:
    ok = [r for r in records if r.get("error") is None]
    budget = error_budget(n) if n >= 2 else None
    out = {"family": "upper", "n": n, "completed": len(ok), "expected": n + 1,
           "failed": sorted(r["k"] for r in records if r.get("error") is not None)}
    if ok:
        best = min(ok, key=lambda r: (r["exact"]["upper"], r["k"]))
        out["best_upper"] = best["exact"]["upper"]
        out["best_upper_k"] = best["k"]
        out["min_model_value"] = min(r["model_value"] for r in ok)
        duals = [r["dual_bound"] for r in ok]
        # a time-limited k may lack a bound; then no certified minimum exists
        out["min_dual_bound"] = None if None in duals else min(duals)
        out["riemann_error"] = budget.riemann_error
        # the discretisation error turns the model minimum into a (weak) lower bound
        out["implied_lower"] = out["min_model_value"] - budget.riemann_error
        out["implied_lower_certified"] = (
            None if out["min_dual_bound"] is None else out["min_dual_bound"] - budget.riemann_error
        )
    return out


def aggregate_lower(records: list[dict], n: int, N: int, weighting: str) -> dict:
    done = {r["k"]: r for r in records if r.get("error") is None and r.get("certified") is not None}
    missing = [k for k in range(1, N + 1) if k not in done]
    out = {"family": "lower", "n": n, "N": N, "weighting": weighting, "completed": len(done), "expected": N,
           "failed": sorted(r["k"] for r in records if r.get("error") is not None)}
    if done:
        worst = min(done.values(), key=lambda r: (r["certified"], r["k"]))
        out["alpha_lower"] = worst["certified"]
        out["alpha_lower_k"] = worst["k"]
        out["status"] = CERTIFIED if not missing else PARTIAL
    else:
        out["alpha_lower"] = None
        out["status"] = PARTIAL
    return out


def _aggregate(config: dict, records: list[dict]) -> dict:
    if config["family"] == "upper":
        return aggregate_upper(records, config["n"])
    return aggregate_lower(records, config["n"], config["N"], config["weighting"])


# --- run directory ---------------------------------------------------------------


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class RunDir:
    def __init__(self, path, config: dict):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.config = config
        cfg = self.path / "config.json"
        if cfg.exists():
            existing = json.loads(cfg.read_text())
            if existing != config:
                raise RunDirError(f"{cfg} holds a different configuration; use a fresh run directory")
        else:
            _atomic_write(cfg, _dumps(config) + "\n")
        self.records: dict[int, dict] = {}
        self.timings: dict[int, float] = {}
        rec_path = self.path / "records.jsonl"
        if rec_path.exists():
            for line in rec_path.read_text().splitlines():
                if line.strip():
                    r = json.loads(line)
                    self.records[r["k"]] = r
        tim_path = self.path / "timings.jsonl"
        if tim_path.exists():
            for line in tim_path.read_text().splitlines():
                if line.strip():
                    t = json.loads(line)
                    self.timings[t["k"]] = t["runtime"]

    def done(self, k: int) -> bool:
        r = self.records.get(k)
        return r is not None and r.get("error") is None

    def put(self, record: dict, runtime: float) -> None:
        self.records[record["k"]] = record
        self.timings[record["k"]] = runtime
        self.flush()

    def flush(self) -> dict:
        recs = [self.records[k] for k in sorted(self.records)]
        _atomic_write(self.path / "records.jsonl", "".join(_dumps(r) + "\n" for r in recs))
        _atomic_write(
            self.path / "timings.jsonl",
            "".join(_dumps({"k": k, "runtime": self.timings[k]}) + "\n" for k in sorted(self.timings)),
        )
        summary = _aggregate(self.config, recs)
        _atomic_write(self.path / "summary.json", _dumps(summary) + "\n")
        manifest = {name: _sha(self.path / name) for name in ("config.json", "records.jsonl", "summary.json")}
        _atomic_write(self.path / "manifest.json", _dumps(manifest) + "\n")
        return summary


@dataclass
class BoundReport:
    family: str
    config: dict
    records: list[dict]
    aggregate: dict
    total_runtime: float = 0.0

    @property
    def partial(self) -> bool:
        if self.family == "lower":
            return self.aggregate.get("status") != CERTIFIED
        return bool(self.aggregate.get("failed")) or self.aggregate["completed"] < self.aggregate["expected"]

    def plot_rows(self) -> list[tuple[float, float | None, float | None]]:
        """(q_opt_midpoint, model_value, certified_or_exact), one per k."""
        rows = []
        for r in self.records:
            if self.family == "upper":
                exact = r.get("exact", {}).get("upper") if r.get("exact") else None
                rows.append((r["q_opt"], r.get("model_value"), exact))
            else:
                rows.append((r.get("q_opt"), r.get("incumbent"), r.get("certified")))
        return rows

    def plot_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["q_opt_midpoint", "model_value", "certified_or_exact"])
        for row in self.plot_rows():
            w.writerow(["" if v is None else repr(float(v)) for v in row])
        return buf.getvalue()


def _run(config: dict, tasks: dict[int, tuple], fn, run_dir, workers: int) -> BoundReport:
    rd = RunDir(run_dir, config) if run_dir is not None else None
    records: dict[int, dict] = {}
    timings: dict[int, float] = {}
    if rd is not None:
        for k in list(tasks):
            if rd.done(k):
                records[k] = rd.records[k]
                timings[k] = rd.timings.get(k, 0.0)
                del tasks[k]

    def accept(rec, runtime):
        records[rec["k"]] = rec
        timings[rec["k"]] = runtime
        if rd is not None:
            rd.put(rec, runtime)
        log.info("k=%s done in %.1fs%s", rec["k"], runtime, f" ({rec['error']})" if rec.get("error") else "")

    if workers <= 1:
        for k in sorted(tasks):
            accept(*fn(*tasks[k]))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, *tasks[k]) for k in sorted(tasks)]
            try:
                for fut in as_completed(futures):
                    accept(*fut.result())
            except KeyboardInterrupt:
                for fut in futures:
                    fut.cancel()
                raise
    recs = [records[k] for k in sorted(records)]
    if rd is not None:
        agg = rd.flush()
    else:
        agg = _aggregate(config, recs)
    return BoundReport(config["family"], config, recs, agg, sum(timings.values()))


def _opts_dict(options: SolveOptions) -> dict:
    return asdict(options)


def run_upper_sweep(n: int, options: SolveOptions | None = None, *, ks=None, tol: float = 1e-6,
                    run_dir=None, workers: int = 1) -> BoundReport:
    if n < 2:
        raise ValueError("n must be at least 2")
    options = options or SolveOptions()
    ks = sorted(set(ks)) if ks is not None else list(range(1, n + 2))
    if any(not 1 <= k <= n + 1 for k in ks):
        raise ValueError(f"k must lie in 1..{n + 1}")
    opts = _opts_dict(options)
    config = {"family": "upper", "n": n, "ks": ks, "tol": tol, "solve": _config_opts(opts)}
    tasks = {k: (n, k, opts, tol) for k in ks}
    return _run(config, tasks, upper_task, run_dir, workers)


def run_lower_sweep(n: int, N: int, weighting=Weighting.APPROX_UNIFORM, options: SolveOptions | None = None, *,
                    tiered: bool | None = None, strengthen: bool = False, ks=None, tol: float = 1e-6,
                    run_dir=None, workers: int = 1) -> BoundReport:
    """Certified lower bound on the worst-case ratio.

    With ``tiered`` (the default when ``options`` is None) each k gets the
    default gap tier and ``options.relative_gap`` is ignored; otherwise
    ``options`` is used verbatim for all k. ``strengthen`` selects the
    tightened but equivalent formulation of :func:`build_lower_model`.
    """
    if n < 2 or N < 2:
        raise ValueError("need n >= 2 and N >= 2")
    weighting = Weighting.parse(weighting).value
    ks = sorted(set(ks)) if ks is not None else list(range(1, N + 1))
    if any(not 1 <= k <= N for k in ks):
        raise ValueError(f"k must lie in 1..{N}")
    if tiered is None:
        tiered = options is None
    opts = _opts_dict(options or SolveOptions())
    config = {"family": "lower", "n": n, "N": N, "weighting": weighting, "ks": ks, "tol": tol,
              "solve": _config_opts(opts), "tiered": tiered, "strengthen": strengthen}
    if tiered:
        config["solve"].pop("relative_gap")
    tasks = {k: (n, N, weighting, k, opts, tiered, tol, strengthen) for k in ks}
    return _run(config, tasks, lower_task, run_dir, workers)


def _config_opts(opts: dict) -> dict:
    # the scratch directory does not change results
    return {k: v for k, v in opts.items() if k != "workdir"}


def load_report(run_dir) -> BoundReport:
    """Load a run directory, verifying the manifest and the stored aggregate."""
    path = Path(run_dir)
    try:
        manifest = json.loads((path / "manifest.json").read_text())
        config = json.loads((path / "config.json").read_text())
        summary = json.loads((path / "summary.json").read_text())
    except FileNotFoundError as exc:
        raise RunDirError(f"{path} is not a complete run directory: {exc}") from exc
    for name, digest in manifest.items():
        if _sha(path / name) != digest:
            raise ReportMismatch(f"{name} does not match its manifest hash")
    records = [json.loads(l) for l in (path / "records.jsonl").read_text().splitlines() if l.strip()]
    recomputed = _aggregate(config, records)
    if recomputed != summary:
        raise ReportMismatch("summary.json disagrees with the aggregate recomputed from records.jsonl")
    total = 0.0
    tim = path / "timings.jsonl"
    if tim.exists():
        total = sum(json.loads(l)["runtime"] for l in tim.read_text().splitlines() if l.strip())
    return BoundReport(config["family"], config, records, summary, total)


def record_curve(record: dict):
    return curve_from_dict(record["curve"]) if record.get("curve") else None
