"""Parameter sweeps over the channel width m.

One row per m: construct and verify a channel, build and exhaustively
check the facilitator code in both orientations, estimate the best
no-facilitator sum rate with the alternating optimizer, and evaluate the
closed-form bounds. The measured gap (facilitator rate minus optimizer
estimate) over-estimates the true gap, since the optimizer only lower
bounds the no-facilitator sum capacity; records carry the restart count
so readers can judge the estimate.

Persistence: channels under channels/ (binary), one JSON line per record
appended to records.jsonl as soon as the row finishes (crash-safe), the
full table rewritten to records.csv at the end, polygon vertex files
under regions/, and a gap-vs-m series for plotting. A row that fails is
recorded with its error message and the sweep continues.

Sweeps are reproducible: per-row seeds are derived from the config seed
and m only, so identical configs give identical records except wall_time.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .bounds import (
    cf_inner_region,
    cf_outer_region,
    ie_inner_sum,
    ie_outer_sum_asymptotic,
    theorem_gap,
)
from .capacity import maximize_sum_rate
from .channel import (
    ConstructionParams,
    construct_channel,
    default_f,
    default_g,
    default_p,
    memory_cap,
    serialize_channel,
)
from .coding import CfCode, Orientation, monte_carlo_error, verify_zero_error
from .errors import CoopcapError

__all__ = [
    "ExperimentConfig",
    "ExperimentRecord",
    "run_sweep",
    "export_records",
    "export_csv",
    "export_jsonl",
    "load_jsonl",
    "plot_data",
    "CSV_COLUMNS",
]

_RULES = ("default", "explicit")


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep settings. f_rule/g_rule pick between the width-derived
    schedules and explicit per-m lists (f_values/g_values, aligned with
    m_values)."""

    m_values: tuple[int, ...]
    epsilon: float = 0.05
    p_override: float | None = None
    f_rule: str = "default"
    g_rule: str = "default"
    f_values: tuple[int, ...] | None = None
    g_values: tuple[int, ...] | None = None
    restarts: int = 8
    tol: float = 1e-8
    max_iters: int = 100
    monte_carlo_trials: int = 0
    seed: int = 0
    output_dir: str = "sweep_out"

    def __post_init__(self):
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        if self.f_values is not None:
            object.__setattr__(self, "f_values", tuple(int(v) for v in self.f_values))
        if self.g_values is not None:
            object.__setattr__(self, "g_values", tuple(int(v) for v in self.g_values))
        if not self.m_values:
            raise ValueError("m_values must be nonempty")
        cap = memory_cap()
        for m in self.m_values:
            if not 1 <= m <= cap:
                raise ValueError(f"m={m} outside 1..{cap} (memory cap)")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.p_override is not None and not 0.0 <= self.p_override <= 1.0:
            raise ValueError(f"p_override must be in [0, 1], got {self.p_override}")
        for rule, values, name in (
            (self.f_rule, self.f_values, "f"),
            (self.g_rule, self.g_values, "g"),
        ):
            if rule not in _RULES:
                raise ValueError(f"{name}_rule must be one of {_RULES}, got {rule!r}")
            if rule == "explicit":
                if values is None or len(values) != len(self.m_values):
                    raise ValueError(
                        f"{name}_rule=explicit needs {name}_values aligned with m_values"
                    )
        if self.restarts < 0:
            raise ValueError(f"restarts must be >= 0, got {self.restarts}")
        if self.monte_carlo_trials < 0:
            raise ValueError(f"monte_carlo_trials must be >= 0, got {self.monte_carlo_trials}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def params_for(self, index: int) -> ConstructionParams:
        m = self.m_values[index]
        f = self.f_values[index] if self.f_rule == "explicit" else default_f(m)
        g = self.g_values[index] if self.g_rule == "explicit" else default_g(m)
        p = self.p_override if self.p_override is not None else default_p(self.epsilon)
        return ConstructionParams(
            m=m, p=p, epsilon=self.epsilon, f_of_m=f, g_of_m=g, seed=self.seed + m
        )


CSV_COLUMNS = (
    "m",
    "g",
    "delta",
    "p",
    "seed",
    "attempts",
    "cf_sum_rate",
    "cf_pairs",
    "cf_failures",
    "ie_estimate",
    "ie_inner",
    "ie_outer_asym",
    "gap",
    "gap_lower",
    "gap_upper",
)


@dataclass(frozen=True)
class ExperimentRecord:
    """One sweep row. delta is the facilitator link rate, equal to the
    block exponent g the channel was built with. When error is set the
    row failed at some phase and later numeric fields hold nan."""

    m: int
    g: int
    delta: float
    p: float
    seed: int
    attempts: int
    cf_sum_rate: float
    cf_pairs: int
    cf_failures: int
    ie_estimate: float
    ie_inner: float
    ie_outer_asym: float
    gap: float
    gap_lower: float
    gap_upper: float
    wall_time: dict = field(default_factory=dict)
    mc_error: float | None = None
    error: str | None = None


def _failed_record(params: ConstructionParams, message: str) -> ExperimentRecord:
    nan = float("nan")
    return ExperimentRecord(
        m=params.m,
        g=params.g_of_m,
        delta=float(params.g_of_m),
        p=params.p,
        seed=params.seed,
        attempts=0,
        cf_sum_rate=nan,
        cf_pairs=0,
        cf_failures=0,
        ie_estimate=nan,
        ie_inner=nan,
        ie_outer_asym=nan,
        gap=nan,
        gap_lower=nan,
        gap_upper=nan,
        error=message,
    )


def _run_row(config: ExperimentConfig, index: int, channels_dir: Path) -> ExperimentRecord:
    params = config.params_for(index)
    m, g = params.m, params.g_of_m
    walls = {}
    t0 = time.perf_counter()
    channel = construct_channel(params)
    walls["construct"] = time.perf_counter() - t0
    serialize_channel(channel, channels_dir / f"m{m}.maccf", binary=True)

    t0 = time.perf_counter()
    pairs = failures = 0
    for orientation in Orientation:
        report = verify_zero_error(CfCode(channel, orientation))
        pairs += report.pairs_checked
        failures += report.failures
    mc = None
    if config.monte_carlo_trials > 0:
        mc = monte_carlo_error(
            CfCode(channel, Orientation.R1_FULL),
            config.monte_carlo_trials,
            seed=config.seed + 10000 + m,
        )
    walls["code"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    opt = maximize_sum_rate(
        channel,
        restarts=config.restarts,
        seed=config.seed + 20000 + m,
        max_iters=config.max_iters,
        tol=config.tol,
    )
    walls["optimize"] = time.perf_counter() - t0

    cf_rate = float(2 * m - g)
    bracket = theorem_gap(m, float(g), params.epsilon)
    return ExperimentRecord(
        m=m,
        g=g,
        delta=float(g),
        p=params.p,
        seed=params.seed,
        attempts=channel.construction_attempts or 0,
        cf_sum_rate=cf_rate,
        cf_pairs=pairs,
        cf_failures=failures,
        ie_estimate=opt.value,
        ie_inner=ie_inner_sum(m, g),
        ie_outer_asym=ie_outer_sum_asymptotic(m, params.epsilon),
        gap=cf_rate - opt.value,
        gap_lower=bracket.lower,
        gap_upper=bracket.upper,
        wall_time=walls,
        mc_error=mc,
    )


def run_sweep(config: ExperimentConfig) -> list[ExperimentRecord]:
    out = Path(config.output_dir)
    channels_dir = out / "channels"
    channels_dir.mkdir(parents=True, exist_ok=True)
    records = []
    with open(out / "records.jsonl", "a", encoding="utf-8") as log:
        for index in range(len(config.m_values)):
            try:
                record = _run_row(config, index, channels_dir)
            except (CoopcapError, ValueError, OSError) as exc:
                record = _failed_record(config.params_for(index), str(exc))
            records.append(record)
            log.write(json.dumps(asdict(record)) + "\n")
            log.flush()
    export_csv(records, out / "records.csv")
    plot_data(records, out)
    return records


def export_csv(records, path) -> None:
    """Flat table, exactly the CSV_COLUMNS columns (no wall times)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for record in records:
            d = asdict(record)
            writer.writerow([d[c] for c in CSV_COLUMNS])


def export_jsonl(records, path) -> None:
    """Every field of every record, one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(asdict(record)) + "\n")


def export_records(records, path, format: str) -> None:
    if format == "csv":
        export_csv(records, path)
    elif format == "jsonl":
        export_jsonl(records, path)
    else:
        raise ValueError(f"format must be 'csv' or 'jsonl', got {format!r}")


def load_jsonl(path) -> list[ExperimentRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(ExperimentRecord(**json.loads(line)))
    return records


def plot_data(records, out_dir) -> list[Path]:
    """Polygon vertex files for each row's inner/outer regions plus the
    gap-versus-m series; returns the written paths."""
    out = Path(out_dir)
    regions = out / "regions"
    regions.mkdir(parents=True, exist_ok=True)
    written = []
    for record in records:
        if record.error is not None:
            continue
        for name, region in (
            ("cf_inner", cf_inner_region(record.m, record.g)),
            ("cf_outer", cf_outer_region(record.m, record.delta)),
        ):
            path = regions / f"{name}_m{record.m}.poly"
            with open(path, "w", encoding="utf-8") as fh:
                for x, y in region.vertices:
                    fh.write(f"{x!r} {y!r}\n")
            written.append(path)
    series = out / "gap_vs_m.csv"
    with open(series, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "gap", "gap_lower", "gap_upper"])
        for record in records:
            if record.error is None:
                writer.writerow([record.m, record.gap, record.gap_lower, record.gap_upper])
    written.append(series)
    return written
