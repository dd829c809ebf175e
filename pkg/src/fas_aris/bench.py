"""Parameter sweeps over schemes, CSV/JSON emission and figure data.

Every (value, trial) cell draws one channel realization and runs all
requested schemes on it, so scheme comparisons are paired. Cells are
independent and may run in a process pool whose size is capped by the
``FAS_ARIS_THREADS`` environment variable (default 1, i.e. in-process).
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .ao import optimize
from .baselines import run_baseline
from .channel import assemble_channels
from .errors import ConfigError, FasArisError
from .metrics import check_feasibility
from .scenario import (RNG_ALGORITHM, ScenarioConfig, parse_key_values, sample_scenario)

PARAMETERS = ("p0_dbm", "aris_x", "m_elements", "n_paths", "n_antennas", "region_over_lambda")
SCHEMES = ("proposed", "fpa", "eas", "random", "passive")
_BASELINE_KIND = {"fpa": "fpa", "eas": "eas", "random": "random_phase", "passive": "passive"}
_INT_PARAMETERS = ("m_elements", "n_paths", "n_antennas")
THREADS_ENV = "FAS_ARIS_THREADS"


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    schemes: tuple = ("proposed",)
    trials: int = 20
    seed_base: int = 0

    def __post_init__(self):
        if self.parameter not in PARAMETERS:
            raise ConfigError(f"unknown sweep parameter {self.parameter!r}; "
                              f"expected one of {', '.join(PARAMETERS)}")
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if not self.values:
            raise ConfigError("sweep values must be nonempty")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ConfigError(f"unknown schemes {bad}; expected a subset of {', '.join(SCHEMES)}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be an integer >= 1")


def load_spec(path) -> SweepSpec:
    """Sweep spec file: ``parameter``, ``values``, ``schemes``, ``trials``, ``seed_base`` keys."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read sweep spec {path}: {exc}") from None
    kv = parse_key_values(text, str(path))
    unknown = sorted(set(kv) - {"parameter", "values", "schemes", "trials", "seed_base"})
    if unknown:
        raise ConfigError(f"unknown sweep spec keys: {', '.join(unknown)}")
    if "parameter" not in kv or "values" not in kv:
        raise ConfigError("sweep spec needs 'parameter' and 'values'")
    try:
        values = tuple(float(v) for v in kv["values"].replace(",", " ").split())
        trials = int(kv.get("trials", 20))
        seed_base = int(kv.get("seed_base", 0))
    except ValueError as exc:
        raise ConfigError(f"bad sweep spec value: {exc}") from None
    schemes = tuple(kv.get("schemes", "proposed").replace(",", " ").split())
    return SweepSpec(kv["parameter"], values, schemes, trials, seed_base)


def apply_parameter(cfg: ScenarioConfig, parameter: str, value) -> ScenarioConfig:
    if parameter == "aris_x":
        return cfg.replace(aris_pos=(float(value),) + tuple(cfg.aris_pos[1:]))
    if parameter == "region_over_lambda":
        return cfg.replace(region_half=0.5 * float(value) * cfg.wavelength)
    if parameter in _INT_PARAMETERS:
        if float(value) != int(value):
            raise ConfigError(f"{parameter} must be an integer, got {value!r}")
        value = int(value)
    if parameter not in PARAMETERS:
        raise ConfigError(f"unknown sweep parameter {parameter!r}")
    return cfg.replace(**{parameter: value})


@dataclass(frozen=True)
class ResultRow:
    parameter_value: float
    scheme: str
    trial: int
    seed: int
    rate_bits: float
    outer_iters: int
    wall_ms: float
    feasible: bool


COLUMNS = tuple(f.name for f in fields(ResultRow))


@dataclass(frozen=True)
class SummaryRow:
    parameter_value: float
    scheme: str
    count: int
    mean: float
    stderr: float


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[ResultRow]
    summary: list[SummaryRow]
    digests: dict = field(default_factory=dict)  # (value, trial) -> draw digest
    traces: dict = field(default_factory=dict)  # (value, trial, scheme) -> rate trace


def run_scheme(scheme: str, draw, cfg: ScenarioConfig, seed: int):
    """Returns (rate, outer iterations, feasible, trace)."""
    if scheme == "proposed":
        state = optimize(draw, cfg, seed)
        sol = state.solution
        ok = check_feasibility(sol, assemble_channels(draw, sol.layout, cfg), cfg).ok
        return sol.rate_bits, state.iter, ok, list(state.rate_trace)
    res = run_baseline(_BASELINE_KIND[scheme], draw, cfg, seed)
    return res.solution.rate_bits, res.state.iter, res.feasible, list(res.state.rate_trace)


def _run_cell(args):
    cfg, parameter, value, trial, seed, schemes = args
    cfg_v = apply_parameter(cfg, parameter, value)
    draw = sample_scenario(cfg_v, seed)
    rows, traces = [], {}
    for scheme in schemes:
        t0 = time.perf_counter()
        try:
            rate, iters, ok, trace = run_scheme(scheme, draw, cfg_v, seed)
        except (FasArisError, np.linalg.LinAlgError, ValueError):
            rate, iters, ok, trace = math.nan, 0, False, []
        wall = 1e3 * (time.perf_counter() - t0)
        rows.append(ResultRow(float(value), scheme, trial, seed, float(rate), int(iters), wall, bool(ok)))
        traces[scheme] = trace
    return (float(value), trial), draw.digest(), rows, traces


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _sort_key(row: ResultRow):
    return (row.parameter_value, SCHEMES.index(row.scheme), row.trial)


def summarize(rows: list[ResultRow]) -> list[SummaryRow]:
    """Mean and standard error per (value, scheme); infeasible rows are excluded."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.parameter_value, r.scheme), [])
        if r.feasible and math.isfinite(r.rate_bits):
            groups[(r.parameter_value, r.scheme)].append(r.rate_bits)
    out = []
    for (value, scheme), rates in sorted(groups.items(), key=lambda kv: (kv[0][0], SCHEMES.index(kv[0][1]))):
        x = np.asarray(rates, dtype=float)
        mean = float(x.mean()) if len(x) else math.nan
        se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
        out.append(SummaryRow(value, scheme, len(x), mean, se))
    return out


def run_sweep(spec: SweepSpec, cfg: ScenarioConfig, workers: int | None = None) -> SweepResult:
    # validate every value up front so config errors surface before any work
    for v in spec.values:
        apply_parameter(cfg, spec.parameter, v)
    tasks = [(cfg, spec.parameter, v, t, spec.seed_base + t, spec.schemes)
             for v in spec.values for t in range(spec.trials)]
    workers = worker_count() if workers is None else max(1, int(workers))
    if workers == 1 or len(tasks) == 1:
        results = [_run_cell(a) for a in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            results = list(pool.map(_run_cell, tasks))
    rows, digests, traces = [], {}, {}
    for key, digest, cell_rows, cell_traces in results:
        digests[key] = digest
        rows.extend(cell_rows)
        for scheme, trace in cell_traces.items():
            traces[key + (scheme,)] = trace
    rows.sort(key=_sort_key)
    return SweepResult(spec, rows, summarize(rows), digests, traces)


# ---------------------------------------------------------------------------
# files


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_rows_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(COLUMNS)
        for r in rows:
            wr.writerow([_fmt(getattr(r, c)) for c in COLUMNS])


def read_rows_csv(path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        if header != COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        out = []
        for rec in rd:
            d = dict(zip(COLUMNS, rec))
            out.append(ResultRow(float(d["parameter_value"]), d["scheme"], int(d["trial"]),
                                 int(d["seed"]), float(d["rate_bits"]), int(d["outer_iters"]),
                                 float(d["wall_ms"]), d["feasible"] == "true"))
    return out


def write_summary_csv(summary, path) -> None:
    cols = [f.name for f in fields(SummaryRow)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for s in summary:
            wr.writerow([_fmt(getattr(s, c)) for c in cols])


def metadata(spec: SweepSpec | None, cfg: ScenarioConfig, **extra) -> dict:
    from . import __version__

    meta = {
        "package_version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "config": cfg.to_mapping(),
        "baseline_choices": {"random_positions_optimized": True, "passive_positions_optimized": True},
    }
    if spec is not None:
        meta["spec"] = asdict(spec)
    meta.update(extra)
    return meta


def write_sweep(result: SweepResult, cfg: ScenarioConfig, out_dir, stem: str = "sweep") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.csv", out / f"{stem}_summary.csv", out / f"{stem}_meta.json"]
    write_rows_csv(result.rows, paths[0])
    write_summary_csv(result.summary, paths[1])
    digests = {f"{v!r}/{t}": d for (v, t), d in sorted(result.digests.items())}
    paths[2].write_text(json.dumps(metadata(result.spec, cfg, draw_digests=digests), indent=2,
                                   default=list) + "\n", encoding="utf-8")
    return paths


# ---------------------------------------------------------------------------
# figures

FIGURES = {
    # figure id -> (sweep parameter, values, x label)
    "p0": ("p0_dbm", (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0), "P0 (dBm)"),
    "aris_x": ("aris_x", tuple(float(x) for x in range(10, 91, 10)), "ARIS x-coordinate (m)"),
    "m": ("m_elements", (2, 4, 6, 8, 10), "reflecting elements M"),
    "l": ("n_paths", (2, 3, 4, 5, 6, 7, 8), "paths L"),
    "n": ("n_antennas", (2, 4, 6), "antennas N"),
    "range": ("region_over_lambda", (1.0, 2.0, 3.0, 4.0), "A / lambda"),
}
FIGURE_IDS = ("convergence",) + tuple(FIGURES)
CONVERGENCE_N = (2, 4, 6)


def _plot(series: dict, xlabel: str, ylabel: str, path: Path, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for label, (x, y, err) in series.items():
        ax.errorbar(x, y, yerr=err, marker="o", ms=3, capsize=3, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_figure_data(figure_id: str, cfg: ScenarioConfig, out_dir, *, trials: int = 20,
                     schemes=SCHEMES, seed_base: int = 0, workers: int | None = None) -> list[Path]:
    """Write ``<figure_id>.csv`` and ``<figure_id>.svg`` (plus ``<figure_id>_meta.json``)."""
    if figure_id not in FIGURE_IDS:
        raise ConfigError(f"unknown figure {figure_id!r}; expected one of {', '.join(FIGURE_IDS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, svg_path, meta_path = out / f"{figure_id}.csv", out / f"{figure_id}.svg", out / f"{figure_id}_meta.json"
    if figure_id == "convergence":
        spec = SweepSpec("n_antennas", CONVERGENCE_N, ("proposed",), trials, seed_base)
        res = run_sweep(spec, cfg, workers)
        length = max((len(tr) for tr in res.traces.values()), default=1)
        table = {}
        for n in CONVERGENCE_N:
            padded = []
            for t in range(trials):
                tr = res.traces.get((float(n), t, "proposed")) or [math.nan]
                padded.append(tr + [tr[-1]] * (length - len(tr)))
            table[n] = np.nanmean(np.array(padded, dtype=float), axis=0)
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iteration"] + [f"rate_n{n}" for n in CONVERGENCE_N])
            for k in range(length):
                wr.writerow([k] + [_fmt(float(table[n][k])) for n in CONVERGENCE_N])
        it = np.arange(length)
        _plot({f"N = {n}": (it, table[n], None) for n in CONVERGENCE_N}, "outer iteration",
              "rate (bits/s/Hz)", svg_path, "AO convergence")
        write_rows_csv(res.rows, out / "convergence_runs.csv")
    else:
        parameter, values, xlabel = FIGURES[figure_id]
        spec = SweepSpec(parameter, values, tuple(schemes), trials, seed_base)
        res = run_sweep(spec, cfg, workers)
        write_rows_csv(res.rows, csv_path)
        series = {}
        for scheme in spec.schemes:
            pts = [s for s in res.summary if s.scheme == scheme]
            series[scheme] = ([s.parameter_value for s in pts], [s.mean for s in pts],
                              [s.stderr for s in pts])
        _plot(series, xlabel, "rate (bits/s/Hz)", svg_path, f"rate versus {xlabel}")
    meta_path.write_text(json.dumps(metadata(spec, cfg, figure=figure_id), indent=2, default=list)
                         + "\n", encoding="utf-8")
    return [csv_path, svg_path, meta_path]
