"""Command-line experiment driver.

Subcommands ``optimize``, ``takeover``, ``diversity`` and ``snapshot`` run a
parameter sweep and write CSV/PGM files into ``--out``; ``compare`` runs a
t-test on the best costs of two per-run CSV files.

Per-run CSV:        sweep_value,run_index,seed,best_cost,generations
Aggregate CSV:      sweep_value,mean,std,n,censored
Diversity CSV:      generation,gD,vD,hD
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .engine import REPLACE_MODES, EngineConfig, RunRecord, run
from .grid import GridShape
from .measures import DEFAULT_CENSOR_CAP, TakeoverConfig, mean_std, pgm_bytes, t_test, takeover_time
from .qap import QapInstance, load_qaplib
from .selection import make_selection

log = logging.getLogger("cellgrid")

RUN_COLUMNS = ("sweep_value", "run_index", "seed", "best_cost", "generations")
AGGREGATE_COLUMNS = ("sweep_value", "mean", "std", "n", "censored")
DIVERSITY_COLUMNS = ("generation", "gD", "vD", "hD")
MODES = ("optimize", "takeover", "diversity", "snapshot")
SEED_ENV = "CELLGRID_SEED"
DEFAULT_SNAPSHOTS = (1, 300, 500, 1000, 1500)


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str
    selection: str = "binary"
    sweep: tuple[float, ...] = (0.0,)
    k: int = 2
    instance: Path | None = None
    runs: int = 1
    generations: int = 2000
    seed: int = 0
    out: Path = Path("results")
    metric_every: int = 1
    jobs: int = 1
    swap_matrices: bool = False
    tie_replace: str = "strict"
    grid: GridShape = GridShape(20, 20)
    snapshot_at: tuple[int, ...] = DEFAULT_SNAPSHOTS
    max_generations: int = DEFAULT_CENSOR_CAP
    unconditional: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise SpecError(f"unknown mode {self.mode!r}")
        if self.runs < 1:
            raise SpecError("runs must be >= 1")
        if self.generations < 0:
            raise SpecError("generations must be >= 0")
        if self.jobs < 1:
            raise SpecError("jobs must be >= 1")
        if self.metric_every < 1:
            raise SpecError("metric-every must be >= 1")
        if self.tie_replace not in REPLACE_MODES:
            raise SpecError(f"tie-replace must be one of {REPLACE_MODES}")
        if not self.sweep:
            raise SpecError("empty sweep")
        if self.mode != "takeover" and self.instance is None:
            raise SpecError(f"{self.mode} needs --instance")
        for v in self.sweep:
            try:
                make_selection(self.selection, v, self.k)
            except ValueError as exc:
                raise SpecError(str(exc)) from None

    def operator(self, value: float):
        return make_selection(self.selection, value, self.k)


# ------------------------------------------------------------------ formatting


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _label(value: float) -> str:
    return format(value, "g")


# ------------------------------------------------------------------- running


def _engine_config(spec: ExperimentSpec, inst: QapInstance, value: float, run_index: int,
                   metrics: bool = False, snapshots: bool = False) -> EngineConfig:
    return EngineConfig(
        instance=inst,
        shape=spec.grid,
        selection=spec.operator(value),
        generations=spec.generations,
        seed=spec.seed + run_index,
        replace=spec.tie_replace,
        metric_every=spec.metric_every if metrics else 0,
        snapshot_at=spec.snapshot_at if snapshots else (),
    )


def _run_all(configs: list[EngineConfig], jobs: int) -> list[RunRecord]:
    if jobs <= 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=min(jobs, len(configs))) as pool:
        return list(pool.map(run, configs))


def _optimize_like(spec: ExperimentSpec, inst: QapInstance, metrics: bool) -> dict[str, str]:
    tasks = [(v, i) for v in spec.sweep for i in range(spec.runs)]
    records = _run_all([_engine_config(spec, inst, v, i, metrics=metrics) for v, i in tasks], spec.jobs)
    run_rows = []
    agg_rows = []
    files: dict[str, str] = {}
    for v in spec.sweep:
        mine = [(i, rec) for (tv, i), rec in zip(tasks, records) if tv == v]
        costs = [rec.best_cost for _, rec in mine]
        run_rows.extend((v, i, rec.seed, rec.best_cost, rec.generations) for i, rec in mine)
        mean, std = mean_std(costs)
        agg_rows.append((v, mean, std, len(costs), 0))
        if metrics:
            series = np.array([[row[0], row[2], row[3], row[4]] for _, rec in mine for row in rec.series])
            series = series.reshape(len(mine), -1, 4).mean(axis=0)
            rows = [(int(g), a, b, c) for g, a, b, c in series]
            files[f"diversity_{_label(v)}.csv"] = _csv_text(DIVERSITY_COLUMNS, rows)
    files["runs.csv"] = _csv_text(RUN_COLUMNS, run_rows)
    files["aggregate.csv"] = _csv_text(AGGREGATE_COLUMNS, agg_rows)
    return files


def _takeover(spec: ExperimentSpec) -> dict[str, str]:
    run_rows = []
    agg_rows = []
    for point, v in enumerate(spec.sweep):
        seed = spec.seed + point
        cfg = TakeoverConfig(
            selection=spec.operator(v),
            shape=spec.grid,
            replications=spec.runs,
            max_generations=spec.max_generations,
            unconditional=spec.unconditional,
        )
        res = takeover_time(np.random.default_rng(seed & ((1 << 64) - 1)), cfg)
        for i, t in enumerate(res.times.tolist()):
            run_rows.append((v, i, seed, None, t if t >= 0 else None))
        agg_rows.append((v, res.mean, res.std, res.completed.size, res.n_censored))
        log.info("takeover %s=%s mean=%s censored=%d", spec.selection, v, res.mean, res.n_censored)
    return {
        "runs.csv": _csv_text(RUN_COLUMNS, run_rows),
        "aggregate.csv": _csv_text(AGGREGATE_COLUMNS, agg_rows),
    }


def _snapshot(spec: ExperimentSpec, inst: QapInstance) -> dict[str, bytes]:
    configs = [_engine_config(spec, inst, v, 0, snapshots=True) for v in spec.sweep]
    records = _run_all(configs, spec.jobs)
    files: dict[str, bytes] = {}
    nested = len(spec.sweep) > 1
    for v, rec in zip(spec.sweep, records):
        prefix = f"{spec.selection}_{_label(v)}/" if nested else ""
        for g, image in sorted(rec.snapshots.items()):
            files[f"{prefix}snap_g{g}.pgm"] = pgm_bytes(image)
    return files


def run_experiment(spec: ExperimentSpec) -> list[Path]:
    """Run `spec` and write its result files, returning their paths.

    Nothing is written unless every run succeeds; files land atomically via
    a temporary name.
    """
    inst = None
    if spec.mode != "takeover":
        inst = load_qaplib(spec.instance, swap_matrices=spec.swap_matrices)
        log.info("loaded %s (n=%d)", inst.name, inst.n)
    if spec.mode == "optimize":
        files = _optimize_like(spec, inst, metrics=False)
    elif spec.mode == "diversity":
        files = _optimize_like(spec, inst, metrics=True)
    elif spec.mode == "snapshot":
        files = _snapshot(spec, inst)
    else:
        files = _takeover(spec)
    return _write_all(spec.out, files)


def _write_all(out: Path, files: dict[str, str | bytes]) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        for name, content in files.items():
            path = out / name
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(path.name + ".partial")
            data = content.encode("utf-8") if isinstance(content, str) else content
            tmp.write_bytes(data)
            written.append(tmp)
        final = []
        for tmp in written:
            dest = tmp.with_name(tmp.name[: -len(".partial")])
            os.replace(tmp, dest)
            final.append(dest)
        return final
    except BaseException:
        for tmp in written:
            tmp.unlink(missing_ok=True)
        raise


# ------------------------------------------------------------------- compare


def _read_best_costs(path: Path) -> list[float]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"sweep_value", "best_cost"} - set(reader.fieldnames or ())
        if missing:
            raise SpecError(f"{path}: missing column(s) {', '.join(sorted(missing))}")
        rows = list(reader)
    points = {r["sweep_value"] for r in rows}
    if len(points) != 1:
        raise SpecError(f"{path}: expected a single sweep point, found {len(points)}")
    try:
        return [float(r["best_cost"]) for r in rows]
    except ValueError:
        raise SpecError(f"{path}: best_cost column has empty or non-numeric values") from None


def compare(path_a: Path, path_b: Path, equal_var: bool = False, alternative: str = "two-sided",
            level: float = 0.05) -> str:
    a = _read_best_costs(Path(path_a))
    b = _read_best_costs(Path(path_b))
    res = t_test(a, b, equal_var=equal_var, alternative=alternative)
    ma, sa = mean_std(a)
    mb, sb = mean_std(b)
    verdict = "significant" if res.p < level else "not significant"
    return "\n".join([
        f"a: {path_a} n={len(a)} mean={fmt(ma)} std={fmt(sa)}",
        f"b: {path_b} n={len(b)} mean={fmt(mb)} std={fmt(sb)}",
        f"t={res.t!r} df={res.df!r} p={res.p!r}",
        f"decision: {verdict} at level {level:g} ({alternative})",
    ]) + "\n"


# ---------------------------------------------------------------- arguments

_INT_KEYS = {"k", "runs", "generations", "seed", "metric_every", "jobs", "max_generations"}
_BOOL_KEYS = {"swap_matrices", "unconditional"}


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise SpecError(f"bad number list {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise SpecError(f"bad integer list {text!r}") from None


def read_config(path: Path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _coerce(key: str, value):
    if value is None:
        return None
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _BOOL_KEYS:
            if isinstance(value, bool):
                return value
            return str(value).lower() in ("1", "true", "yes", "on")
        if key == "sweep" or key == "param":
            return _floats(value) if not isinstance(value, tuple) else value
        if key == "snapshot_at":
            return _ints(value) if not isinstance(value, tuple) else value
        if key == "grid":
            return value if isinstance(value, GridShape) else GridShape.parse(str(value))
        if key in ("instance", "out"):
            return Path(value)
    except ValueError as exc:
        raise SpecError(f"bad value for {key}: {exc}") from None
    return value


_MODE_HELP = {
    "optimize": "best cost per run over a parameter sweep",
    "takeover": "takeover time replications over a parameter sweep",
    "diversity": "mean gD/vD/hD series over a parameter sweep",
    "snapshot": "local diversity PGM snapshots of one run per sweep value",
}

_SPEC_KEYS = ("selection", "sweep", "param", "k", "instance", "runs", "generations", "seed", "out",
              "metric_every", "jobs", "swap_matrices", "tie_replace", "grid", "snapshot_at",
              "max_generations", "unconditional")


def build_spec(mode: str, args: argparse.Namespace) -> ExperimentSpec:
    """Merge flags over config-file values over built-in defaults."""
    conf = read_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(conf) - set(_SPEC_KEYS)
    if unknown:
        raise SpecError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    merged = {}
    for key in _SPEC_KEYS:
        flag = getattr(args, key, None)
        if flag is None or flag is False:
            flag = None
        merged[key] = _coerce(key, flag if flag is not None else conf.get(key))
    param = merged.pop("param")
    sweep = merged.pop("sweep")
    if sweep is None:
        sweep = param
    values = {k: v for k, v in merged.items() if v is not None}
    if values.get("selection", "binary") == "binary":
        sweep = (0.0,)
    elif not sweep:
        raise SpecError(f"{values['selection']} selection needs --param or --sweep")
    if "seed" not in values:
        env = os.environ.get(SEED_ENV)
        if env:
            try:
                values["seed"] = int(env)
            except ValueError:
                raise SpecError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    if mode == "takeover" and "runs" not in values:
        values["runs"] = 1000
    if "jobs" not in values:
        values["jobs"] = os.cpu_count() or 1
    return ExperimentSpec(mode=mode, sweep=tuple(sweep), **values)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellgrid", description="Cellular GA experiments on a torus.")
    sub = parser.add_subparsers(dest="command", required=True)

    for mode in MODES:
        p = sub.add_parser(mode, help=_MODE_HELP[mode])
        p.add_argument("-v", "--verbose", action="count", default=0)
        p.add_argument("--config", type=Path, help="key = value file; flags override it")
        p.add_argument("--instance", help="QAPLIB instance file")
        p.add_argument("--selection", choices=("binary", "stochastic", "anisotropic"))
        group = p.add_mutually_exclusive_group()
        group.add_argument("--param", help="single operator parameter (r or alpha)")
        group.add_argument("--sweep", help="comma-separated parameter values")
        p.add_argument("--k", type=int, help="anisotropic tournament size (default 2)")
        p.add_argument("--runs", type=int, help="runs per sweep point (takeover: replications)")
        p.add_argument("--generations", type=int)
        p.add_argument("--seed", type=int, help=f"base seed (fallback: ${SEED_ENV}, then 0)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--metric-every", type=int, help="diversity sampling cadence in generations")
        p.add_argument("--jobs", type=int, help="parallel runs (default: CPU count)")
        p.add_argument("--swap-matrices", action="store_true", default=None,
                       help="read the distance matrix first in the instance file")
        p.add_argument("--tie-replace", choices=REPLACE_MODES,
                       help="child replaces incumbent on equal cost: never (strict) or on a coin flip")
        p.add_argument("--grid", help="grid shape ROWSxCOLS (default 20x20)")
        p.add_argument("--snapshot-at", help="generations to snapshot (default 1,300,500,1000,1500)")
        p.add_argument("--max-generations", type=int, help="takeover censoring cap")
        p.add_argument("--unconditional", action="store_true", default=None,
                       help="takeover: tournament winner always replaces the incumbent")

    c = sub.add_parser("compare", help="t-test on best costs of two per-run CSV files")
    c.add_argument("-v", "--verbose", action="count", default=0)
    c.add_argument("results_a", type=Path)
    c.add_argument("results_b", type=Path)
    c.add_argument("--equal-var", action="store_true", help="pooled-variance Student test instead of Welch")
    c.add_argument("--alternative", choices=("two-sided", "less", "greater"), default="two-sided")
    c.add_argument("--level", type=float, default=0.05)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "compare":
            sys.stdout.write(compare(args.results_a, args.results_b, args.equal_var,
                                     args.alternative, args.level))
            return 0
        spec = build_spec(args.command, args)
        for path in run_experiment(spec):
            print(path)
        return 0
    except (OSError, ValueError) as exc:
        print(f"cellgrid: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
