"""Experiment specs, check records, deterministic artifact writers and the
experiment runner behind the command line.

Reports are meant to be diffed: JSON has sorted keys, CSV floats use 17
significant digits in scientific notation with LF line endings, and the
wall-clock time goes to a separate sidecar file so that two runs with the
same spec and seed produce byte-identical reports.
"""
from __future__ import annotations

import copy
import io
import json
import math
import os
import platform
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, MGTLabError
from .normlab import DecayFit

KINDS = ("roots", "kernels", "decay", "oscint", "inviscid", "nonlinear", "accept")

# Allowed keys per block with their defaults.  ``None`` marks "computed
# from other settings".
DEFAULTS: dict = {
    "kind": "accept",
    "seed": 20240611,
    "threads": 1,
    "params": {"tau": 1.0, "delta": 1.0, "m": 0.5},
    "grid": {"rmax": 12.0, "nodes": 1024, "r_min": 1e-3, "r_max": 1e3, "r_points": 500,
             "t_min": 1e2, "t_max": 1e5, "t_points": 25},
    "kernels": {"r": [0.01, 0.1, 1.0, 10.0], "t_max": 10.0, "t_points": 101},
    "decay": {"n": 3, "s": 0.0, "k": 0, "width": 1.0},
    "oscint": {"n": 3, "s": 0.0, "c": 2.0, "eps": 0.25},
    "inviscid": {"deltas": [1e-1, 1e-2, 1e-3, 1e-4], "n": 3, "width": 1.0},
    "nonlinear": {"kind": "westervelt", "k_ab": 0.5, "n": 1, "L": 64 * math.pi, "points": 1024,
                  "amplitude": 1e-2, "width_sq": 4.0, "T": None, "dt": 0.0125, "tol": 1e-10,
                  "s": 0.0, "picard": True},
    "accept": {"criteria": list(range(1, 11)), "fast": False},
    "output": {"dir": "out"},
}


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    seed: int
    threads: int
    params: dict
    grid: dict
    blocks: dict
    output: dict

    def block(self, name: str) -> dict:
        return self.blocks[name]

    def echo(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "params": self.params, "grid": self.grid,
                "block": self.blocks.get(self.kind, {})}


def _merge(path: str, default: dict, given) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"'{path}' must be a mapping")
    out = copy.deepcopy(default)
    for key, val in given.items():
        if key not in default:
            raise ConfigError(f"unknown config key '{path}.{key}'")
        out[key] = val
    return out


def load_spec(source=None) -> ExperimentSpec:
    """Build a validated spec from a mapping, a YAML/JSON path, or nothing
    (all defaults).  Unknown keys raise ConfigError naming the key."""
    if source is None:
        raw: dict = {}
    elif isinstance(source, dict):
        raw = source
    else:
        text = Path(source).read_text(encoding="utf-8")
        raw = yaml.safe_load(text) or {}
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
    for key in raw:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key '{key}'")
    kind = raw.get("kind", DEFAULTS["kind"])
    if kind not in KINDS:
        raise ConfigError(f"config key 'kind' must be one of {KINDS}, got {kind!r}")
    seed = raw.get("seed", DEFAULTS["seed"])
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ConfigError("config key 'seed' must be an unsigned 64-bit integer")
    threads = raw.get("threads", DEFAULTS["threads"])
    if not isinstance(threads, int) or threads < 1:
        raise ConfigError("config key 'threads' must be a positive integer")
    blocks = {}
    for name in ("kernels", "decay", "oscint", "inviscid", "nonlinear", "accept"):
        blocks[name] = _merge(name, DEFAULTS[name], raw.get(name, {}))
    crit = blocks["accept"]["criteria"]
    if not isinstance(crit, list) or any(c not in range(1, 11) for c in crit):
        raise ConfigError("config key 'accept.criteria' must list criteria numbers 1..10")
    return ExperimentSpec(kind, seed, threads,
                          _merge("params", DEFAULTS["params"], raw.get("params", {})),
                          _merge("grid", DEFAULTS["grid"], raw.get("grid", {})),
                          blocks,
                          _merge("output", DEFAULTS["output"], raw.get("output", {})))


def make_rng(seed: int) -> np.random.Generator:
    """The single generator for all randomized sweeps (Philox counter-based)."""
    return np.random.Generator(np.random.Philox(seed))


# ------------------------------------------------------------ check records

@dataclass(frozen=True)
class CheckRecord:
    name: str
    measured: float
    expected: float
    tolerance: float
    passed: bool
    criterion: int = 0
    note: str = ""


def compare_rates(measured, expected: float, tol: float, sided: str = "two",
                  name: str = "rate", criterion: int = 0) -> CheckRecord:
    """Two-sided: |measured - expected| <= tol.  Upper: measured <= expected + tol.

    ``measured`` may be a DecayFit; an invalid fit fails the check.
    """
    note = ""
    if isinstance(measured, DecayFit):
        fit = measured
        measured = fit.exponent
        if not fit.valid:
            note = f"fit invalid (points={fit.points}, rss={fit.rss:.3g})"
    if sided == "two":
        ok = abs(measured - expected) <= tol
    elif sided == "upper":
        ok = measured <= expected + tol
    else:
        raise ValueError(f"sided must be 'two' or 'upper', got {sided!r}")
    ok = bool(ok) and not note
    return CheckRecord(name, float(measured), float(expected), float(tol), ok, criterion,
                       note or sided)


def check_at_most(name: str, measured: float, bound: float, criterion: int = 0, note: str = "") -> CheckRecord:
    return CheckRecord(name, float(measured), float(bound), 0.0, bool(measured <= bound), criterion, note)


def check_at_least(name: str, measured: float, bound: float, criterion: int = 0, note: str = "") -> CheckRecord:
    return CheckRecord(name, float(measured), float(bound), 0.0, bool(measured >= bound), criterion, note)


def failed_check(name: str, exc: BaseException, criterion: int = 0) -> CheckRecord:
    return CheckRecord(name, math.nan, math.nan, math.nan, False, criterion,
                       f"{type(exc).__name__}: {exc}")


# ------------------------------------------------------------------ writers

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.16e}"
    return str(x)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_bytes(header, rows) -> bytes:
    buf = io.StringIO(newline="")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue().encode("utf-8")


def write_csv(path, header, rows) -> None:
    _atomic_write(Path(path), csv_bytes(header, rows))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def json_bytes(obj) -> bytes:
    return (json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def write_json(path, obj) -> None:
    _atomic_write(Path(path), json_bytes(obj))


# ------------------------------------------------------------------- report

@dataclass
class RunReport:
    spec: dict
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    documents: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    versions: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {"spec": self.spec, "checks": [asdict(c) for c in self.checks],
                "pass": self.passed, "versions": self.versions}

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        for name, (header, rows) in sorted(self.tables.items()):
            write_csv(out / f"{name}.csv", header, rows)
        for name, doc in sorted(self.documents.items()):
            write_json(out / f"{name}.json", doc)
        write_json(out / "report.json", self.as_dict())
        write_json(out / "timing.json", {"wall_clock_seconds": self.wall_clock})


def versions() -> dict:
    import scipy

    from . import __version__
    return {"mgtlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


# ------------------------------------------------------------------- runner

def run(spec: ExperimentSpec, out_dir=None) -> RunReport:
    """Execute the named experiment, collect checks, write artifacts."""
    from . import acceptance, experiments
    from .jmgt import set_threads

    set_threads(spec.threads)
    t0 = time.perf_counter()
    report = RunReport(spec.echo(), versions=versions())
    if spec.kind == "accept":
        acceptance.run_suite(spec, report)
    else:
        try:
            checks, tables, docs = experiments.RUNNERS[spec.kind](spec)
            report.checks.extend(checks)
            report.tables.update(tables)
            report.documents.update(docs)
        except MGTLabError as exc:
            report.checks.append(failed_check(spec.kind, exc))
    report.wall_clock = time.perf_counter() - t0
    if out_dir is not None:
        report.write(out_dir)
    return report


def run_isolated(tasks, threads: int = 1) -> list:
    """Run ``(name, criterion, fn)`` tasks; each fn returns (checks, tables).
    An exception becomes a failing record instead of stopping the suite.
    Results come back in task order."""
    def one(task):
        name, crit, fn = task
        try:
            return fn()
        except Exception as exc:  # isolation: record and continue
            return [failed_check(name, exc, crit)], {}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, tasks))
    return [one(t) for t in tasks]
