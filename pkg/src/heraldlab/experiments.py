"""Experiment registry with content-addressed result caching.

A config names an experiment, input refs (builtin expressions or files), a
parameter grid, optimizer options, and a seed.  Results are cached under a
fingerprint of the canonicalized config plus the artifact version: replaying
an identical config serves the stored record byte-for-byte and re-emits
identical CSV/JSON/SVG outputs.  Timings live inside the record, so a cache
hit reproduces even them; corrupt cache entries are detected by checksum and
recomputed.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import io
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    HeraldBlock,
    HeraldSpec,
    blocksize_bound,
    cor42_bound,
    cor43_bound,
    cor53_bound,
    thm51_compare,
)
from .channels import resolve_channel
from .games import GameOpts, monogamy_game_bound, multi_bob_values, resolve_game
from .holevo import HolevoOpts
from .render import render_svg, write_atomic

ARTIFACT_VERSION = 1


def _expand_axis(axis: str, values) -> list:
    """A grid axis is an explicit list or a 'start:end:points' range string."""
    if isinstance(values, str):
        parts = values.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid axis '{axis}' range must be start:end:points")
        start, end, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError(f"grid axis '{axis}' needs at least one point")
        return [float(v) for v in np.linspace(start, end, count)]
    if not isinstance(values, (list, tuple)) or not values:
        raise ValueError(f"grid axis '{axis}' must be a nonempty list or range string")
    if not all(isinstance(v, (int, float)) for v in values):
        raise ValueError(f"grid axis '{axis}' must contain numbers")
    return list(values)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    inputs: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    opts: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str | None = None
    out_files: dict | None = None  # per-format paths: {"csv": ..., "json": ..., "svg": ...}
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.experiment, str) or not self.experiment:
            raise ValueError("config field 'experiment' must be a nonempty string")
        if not isinstance(self.grid, dict) or not self.grid:
            raise ValueError("config field 'grid' must be a nonempty mapping")
        object.__setattr__(
            self, "grid", {k: _expand_axis(k, v) for k, v in self.grid.items()}
        )
        if not isinstance(self.inputs, dict):
            raise ValueError("config field 'inputs' must be a mapping")
        if not isinstance(self.opts, dict):
            raise ValueError("config field 'opts' must be a mapping")
        if not isinstance(self.seed, int):
            raise ValueError("config field 'seed' must be an integer")
        if self.out_files is not None:
            bad = set(self.out_files) - {"csv", "json", "svg"}
            if bad:
                raise ValueError(f"config field 'out' has unknown formats: {sorted(bad)}")

    def identity(self) -> dict:
        """The cache identity: everything that affects computed values."""
        return {
            "experiment": self.experiment,
            "inputs": self.inputs,
            "grid": {k: list(v) for k, v in self.grid.items()},
            "opts": self.opts,
            "seed": self.seed,
            "artifact_version": ARTIFACT_VERSION,
        }

    def basename(self) -> str:
        return self.name or self.experiment


_CONFIG_FIELDS = {
    "experiment", "inputs", "channels", "grid", "opts", "seed",
    "out_dir", "out", "name",
}


def config_from_dict(data: dict) -> ExperimentConfig:
    unknown = set(data) - _CONFIG_FIELDS
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    if "experiment" not in data:
        raise ValueError("config field 'experiment' is required")
    inputs = dict(data.get("inputs", {}))
    if "channels" in data:
        if not isinstance(data["channels"], list):
            raise ValueError("config field 'channels' must be a list")
        inputs.setdefault("channels", data["channels"])
    return ExperimentConfig(
        experiment=data["experiment"],
        inputs=inputs,
        grid=data.get("grid", {}),
        opts=data.get("opts", {}),
        seed=data.get("seed", 0),
        out_dir=data.get("out_dir"),
        out_files=data.get("out"),
        name=data.get("name", ""),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_fingerprint(config: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(config.identity()).encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class ResultRecord:
    experiment: str
    fingerprint: str
    columns: tuple[str, ...]
    rows: tuple[dict, ...]
    environment: dict
    timings: dict
    cached: bool = False

    def payload(self) -> dict:
        return {
            "experiment": self.experiment,
            "fingerprint": self.fingerprint,
            "columns": list(self.columns),
            "rows": [dict(r) for r in self.rows],
            "environment": dict(self.environment),
            "timings": dict(self.timings),
        }


def _environment_stamp() -> dict:
    return {
        "package": __version__,
        "artifact_version": ARTIFACT_VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


# --- the registry ------------------------------------------------------------


def _holevo_opts(config: ExperimentConfig) -> HolevoOpts:
    allowed = {"ensemble_size", "restarts", "tol", "max_iters", "basis_seed"}
    kwargs = {k: v for k, v in config.opts.items() if k in allowed}
    return HolevoOpts(seed=config.seed, **kwargs)


def _game_opts(config: ExperimentConfig) -> GameOpts:
    allowed = {"restarts", "max_sweeps", "tol", "inner_iters", "grad_eps"}
    kwargs = {k: v for k, v in config.opts.items() if k in allowed}
    return GameOpts(seed=config.seed, **kwargs)


def _report_row(rep, **extra) -> dict:
    row = dict(extra)
    row.update(
        lhs=float(rep.lhs),
        rhs=float(rep.rhs),
        slack=float(rep.slack),
        verdict=rep.verdict,
    )
    return row


def _primary_channel(config: ExperimentConfig) -> str:
    if "channel" in config.inputs:
        return config.inputs["channel"]
    channels = config.inputs.get("channels")
    return channels[0] if channels else "identity(2)"


def _timed_row(start: float, row: dict) -> dict:
    row["wall_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
    return row


def _erasure_sweep(config: ExperimentConfig, jobs: int) -> tuple[tuple, list]:
    phi = resolve_channel(_primary_channel(config))
    hopts = _holevo_opts(config)
    lams = list(config.grid["lam"])

    def point(lam):
        start = time.perf_counter()
        rep = cor53_bound(phi, float(lam), hopts)
        row = _report_row(rep, lam=float(lam))
        row["restarts_used"] = rep.details.get("restarts_used", hopts.restarts)
        return _timed_row(start, row)

    rows = _parallel_map(point, lams, jobs)
    cols = ("lam", "lhs", "rhs", "slack", "verdict", "restarts_used", "wall_ms")
    return cols, rows


def _erasure_sweep_svg(rows):
    xs = [r["lam"] for r in rows]
    series = [
        (xs, [r["lhs"] for r in rows], "achieved rate"),
        (xs, [r["rhs"] for r in rows], "capacity budget"),
    ]
    style = {"xlabel": "erasure weight lam", "ylabel": "bits",
             "title": "erasure capacity sweep"}
    return series, style


def _heralded_additivity(config: ExperimentConfig, jobs: int) -> tuple[tuple, list]:
    phi = resolve_channel(_primary_channel(config))
    bystander = config.inputs.get("bystander")
    phi0 = resolve_channel(bystander) if bystander else None
    hopts = _holevo_opts(config)
    n = int(config.inputs.get("n", 2))
    ks = [int(k) for k in config.grid["k"]]

    def point(k):
        start = time.perf_counter()
        spec = HeraldSpec((HeraldBlock(tuple([phi] * n), k),))
        out = [_report_row(cor42_bound(spec, hopts), n=n, k=k, bound="heralded-capacity")]
        if phi0 is not None:
            out.append(
                _report_row(cor43_bound(phi0, spec, hopts), n=n, k=k, bound="joint-capacity")
            )
        wall = round((time.perf_counter() - start) * 1000.0, 3)
        for row in out:
            row["wall_ms"] = wall
        return out

    rows = [r for chunk in _parallel_map(point, ks, jobs) for r in chunk]
    cols = ("n", "k", "bound", "lhs", "rhs", "slack", "verdict", "wall_ms")
    return cols, rows


def _heralded_additivity_svg(rows):
    series = []
    for bound in sorted({r["bound"] for r in rows}):
        sub = [r for r in rows if r["bound"] == bound]
        series.append(([r["k"] for r in sub], [r["slack"] for r in sub], bound))
    return series, {"xlabel": "herald count k", "ylabel": "slack (bits)",
                    "title": "heralded additivity slack"}


def _erasure_vs_herald(config: ExperimentConfig, jobs: int) -> tuple[tuple, list]:
    phi = resolve_channel(_primary_channel(config))
    hopts = _holevo_opts(config)
    points = [(int(n), float(lam)) for n in config.grid["n"] for lam in config.grid["lam"]]

    def point(nl):
        n, lam = nl
        start = time.perf_counter()
        rep = thm51_compare(phi, n, lam, hopts)
        row = _report_row(rep, n=n, lam=lam)
        row["restarts_used"] = rep.details.get("restarts_used", hopts.restarts)
        return _timed_row(start, row)

    rows = _parallel_map(point, points, jobs)
    cols = ("n", "lam", "lhs", "rhs", "slack", "verdict", "restarts_used", "wall_ms")
    return cols, rows


def _erasure_vs_herald_svg(rows):
    series = []
    for n in sorted({r["n"] for r in rows}):
        sub = [r for r in rows if r["n"] == n]
        xs = [r["lam"] for r in sub]
        series.append((xs, [r["lhs"] for r in sub], f"gap n={n}"))
        series.append((xs, [r["rhs"] for r in sub], f"budget n={n}"))
    return series, {"xlabel": "erasure weight lam", "ylabel": "bits",
                    "title": "iid erasure vs exact-count heralding"}


def _blocksize(config: ExperimentConfig, jobs: int) -> tuple[tuple, list]:
    f_values = config.inputs.get("f_values")
    if f_values is not None:
        f_values = {
            "f1": [float(v) for v in f_values["f1"]],
            "f_pot": [float(v) for v in f_values["f_pot"]],
        }
        phis = None
        if "channels" in config.inputs:
            phis = [resolve_channel(c) for c in config.inputs["channels"]]
    elif "channels" in config.inputs:
        phis = [resolve_channel(c) for c in config.inputs["channels"]]
    else:
        phi = resolve_channel(config.inputs.get("channel", "identity(2)"))
        phis = [phi] * int(config.inputs.get("count", 2))
    hopts = _holevo_opts(config)
    lams = [float(v) for v in config.grid["lam"]]

    def point(lam):
        start = time.perf_counter()
        rep = blocksize_bound(phis, lam, f_values=f_values, opts=hopts)
        row = _report_row(
            rep, lam=lam, coefficient=float(rep.details["coefficient"])
        )
        row["restarts_used"] = 0 if f_values is not None else hopts.restarts
        return _timed_row(start, row)

    rows = _parallel_map(point, lams, jobs)
    cols = ("lam", "coefficient", "lhs", "rhs", "slack", "verdict",
            "restarts_used", "wall_ms")
    return cols, rows


def _blocksize_svg(rows):
    xs = [r["lam"] for r in rows]
    series = [
        (xs, [r["lhs"] for r in rows], "joint ensemble"),
        (xs, [r["rhs"] for r in rows], "single-shot + correction"),
    ]
    return series, {"xlabel": "herald weight lam", "ylabel": "bits",
                    "title": "entangled blocksize budget"}


def _games_monogamy(config: ExperimentConfig, jobs: int) -> tuple[tuple, list]:
    game = resolve_game(config.inputs.get("game", "chsh"))
    d_a = int(config.inputs.get("dA", 2))
    d_b = int(config.inputs.get("dB", 2))
    gopts = _game_opts(config)
    ns = [int(n) for n in config.grid["n"]]

    def point(n):
        start = time.perf_counter()
        rep = multi_bob_values([game] * n, d_a, [d_b] * n, gopts)
        gap = rep.details["gap"]
        budget = monogamy_game_bound(n, d_a)
        return _timed_row(start, {
            "n": n,
            "classical": float(rep.classical),
            "entangled_lower": float(rep.entangled_lower),
            "gap": float(gap),
            "budget": float(budget),
            "verdict": "PASS" if gap <= budget + 1e-9 else "INCONCLUSIVE",
        })

    rows = _parallel_map(point, ns, jobs)
    cols = ("n", "classical", "entangled_lower", "gap", "budget", "verdict", "wall_ms")
    return cols, rows


def _games_monogamy_svg(rows):
    xs = [r["n"] for r in rows]
    series = [
        (xs, [r["gap"] for r in rows], "achieved gap"),
        (xs, [r["budget"] for r in rows], "monogamy budget"),
    ]
    return series, {"xlabel": "number of Bobs", "ylabel": "winning-probability gap",
                    "title": "shared-Alice advantage vs monogamy budget"}


EXPERIMENTS = {
    "erasure-sweep": (_erasure_sweep, _erasure_sweep_svg),
    "heralded-additivity": (_heralded_additivity, _heralded_additivity_svg),
    "thm51": (_erasure_vs_herald, _erasure_vs_herald_svg),
    "blocksize": (_blocksize, _blocksize_svg),
    "games-monogamy": (_games_monogamy, _games_monogamy_svg),
}


def _parallel_map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --- cache and outputs ------------------------------------------------------------


def _record_checksum(payload: dict) -> str:
    return hashlib.sha256(canonical_json(payload).encode()).hexdigest()


def _cache_path(cache_dir, fingerprint: str) -> Path:
    return Path(cache_dir) / f"{fingerprint}.json"


def _load_cached(cache_dir, fingerprint: str) -> ResultRecord | None:
    path = _cache_path(cache_dir, fingerprint)
    if not path.exists():
        return None
    try:
        stored = json.loads(path.read_text(encoding="utf-8"))
        checksum = stored.pop("checksum")
    except (json.JSONDecodeError, KeyError, OSError):
        return None
    if _record_checksum(stored) != checksum:
        return None  # corrupt entry: recompute
    if stored.get("fingerprint") != fingerprint:
        return None
    return ResultRecord(
        experiment=stored["experiment"],
        fingerprint=stored["fingerprint"],
        columns=tuple(stored["columns"]),
        rows=tuple(stored["rows"]),
        environment=stored["environment"],
        timings=stored["timings"],
        cached=True,
    )


def _store_record(cache_dir, record: ResultRecord) -> None:
    payload = record.payload()
    payload["checksum"] = _record_checksum(record.payload())
    path = _cache_path(cache_dir, record.fingerprint)
    if path.exists():
        return  # write-once: concurrent writers produce identical bytes anyway
    write_atomic(path, json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _output_paths(config: ExperimentConfig) -> dict[str, Path]:
    paths: dict[str, Path] = {}
    if config.out_dir is not None:
        base = config.basename()
        out = Path(config.out_dir)
        paths = {fmt: out / f"{base}.{fmt}" for fmt in ("csv", "json", "svg")}
    if config.out_files:
        paths.update({fmt: Path(p) for fmt, p in config.out_files.items()})
    return paths


def _emit_outputs(config: ExperimentConfig, record: ResultRecord) -> list[Path]:
    paths = _output_paths(config)
    written = []

    if "csv" in paths:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(record.columns)
        for row in record.rows:
            writer.writerow([_csv_cell(row[c]) for c in record.columns])
        write_atomic(paths["csv"], buf.getvalue())
        written.append(paths["csv"])

    if "json" in paths:
        write_atomic(
            paths["json"], json.dumps(record.payload(), indent=1, sort_keys=True) + "\n"
        )
        written.append(paths["json"])

    if "svg" in paths:
        _, svg_fn = EXPERIMENTS[record.experiment]
        series, style = svg_fn(list(record.rows))
        write_atomic(paths["svg"], render_svg(series, style))
        written.append(paths["svg"])
    return written


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def run(config: ExperimentConfig, cache_dir=".cache", jobs: int = 1) -> ResultRecord:
    """Execute (or replay) an experiment; emit CSV/JSON/SVG when out_dir set."""
    if config.experiment not in EXPERIMENTS:
        raise ValueError(
            f"unknown experiment {config.experiment!r}; "
            f"registered: {sorted(EXPERIMENTS)}"
        )
    fingerprint = config_fingerprint(config)
    record = _load_cached(cache_dir, fingerprint)
    if record is None:
        point_fn, _ = EXPERIMENTS[config.experiment]
        start = time.perf_counter()
        columns, rows = point_fn(config, jobs)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        record = ResultRecord(
            experiment=config.experiment,
            fingerprint=fingerprint,
            columns=tuple(columns),
            rows=tuple(rows),
            environment=_environment_stamp(),
            timings={"total_ms": elapsed_ms, "points": len(rows)},
            cached=False,
        )
        _store_record(cache_dir, record)
    _emit_outputs(config, record)
    return record
