"""Seeded multi-run experiments, CSV output and layer comparison."""

from __future__ import annotations

import csv
import enum
import io
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from shuffle_gossip.analytic import DropVariant
from shuffle_gossip.model_sim import simulate_model
from shuffle_gossip.ode_model import OdeSolution
from shuffle_gossip.pair_chain import build_matrix
from shuffle_gossip.params import ParameterError, ProtocolParams
from shuffle_gossip.protocol_sim import ShuffleNetwork, WarmUpError
from shuffle_gossip.topology import Topology

CSV_HEADER = ("round", "repl_mean", "repl_std", "cov_mean", "cov_std")
COMPARISON_HEADER = ("round", "repl_a", "repl_b", "repl_diff", "repl_in_band",
                     "cov_a", "cov_b", "cov_diff", "cov_in_band")


class SchemaError(ValueError):
    """Summaries or CSV files that cannot be compared or parsed."""


class Layer(str, enum.Enum):
    PROTOCOL = "protocol"
    MODEL = "model"
    ODE = "ode"


def fmt(value: float) -> str:
    return f"{value:.10g}"


@dataclass(frozen=True)
class ExperimentConfig:
    params: ProtocolParams
    topology: Topology
    layer: Layer = Layer.MODEL
    variant: DropVariant = DropVariant.SIMPLIFIED
    warmup_rounds: int = 1000
    rounds: int = 2000
    replicates: int = 1
    base_seed: int = 20240101
    placement: str = "single"
    check_conservation: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer", Layer(self.layer))
        object.__setattr__(self, "variant", DropVariant(self.variant))
        if self.replicates < 1:
            raise ParameterError("replicate count must be at least 1")
        if self.rounds < 1:
            raise ParameterError("measurement rounds must be at least 1")
        if self.warmup_rounds < 0:
            raise ParameterError("warm-up rounds must be non-negative")
        if self.topology.size != self.params.N:
            raise ParameterError(
                f"topology {self.topology.describe()} has {self.topology.size} nodes, N={self.params.N}")
        if self.layer is Layer.ODE and not self.topology.is_complete:
            raise ParameterError("the ode layer models full connectivity only")

    def replicate_rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.base_seed + index))


@dataclass
class ReplicateResult:
    replication: np.ndarray
    coverage: np.ndarray
    conservation_violations: int = 0
    drop_trials: int = 0
    drop_hits: int = 0


@dataclass
class RunSummary:
    repl_mean: np.ndarray
    repl_std: np.ndarray
    cov_mean: np.ndarray
    cov_std: np.ndarray
    config: ExperimentConfig | None = None
    conservation_violations: int = 0
    replicates: list[ReplicateResult] = field(default_factory=list, repr=False)

    @property
    def rounds(self) -> int:
        return len(self.repl_mean) - 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for t in range(len(self.repl_mean)):
            writer.writerow([t, fmt(self.repl_mean[t]), fmt(self.repl_std[t]),
                             fmt(self.cov_mean[t]), fmt(self.cov_std[t])])
        return buf.getvalue()

    def tail_mean(self, rounds: int) -> float:
        return float(np.mean(self.repl_mean[-rounds:]))


def _protocol_replicate(config: ExperimentConfig, rng: np.random.Generator) -> ReplicateResult:
    net = ShuffleNetwork(config.params, config.topology).place_items(rng, config.placement)
    violations = 0
    present = net.distinct_items() if config.check_conservation else None

    def check():
        nonlocal present, violations
        if present is not None:
            now = net.distinct_items()
            violations += int(np.setdiff1d(present, now, assume_unique=True).size)
            present = now

    for _ in range(config.warmup_rounds):
        net.run_round(rng)
        check()
    if not net.all_full():
        short = int(np.count_nonzero(net.sizes < config.params.c))
        raise WarmUpError(f"{short} caches not full after {config.warmup_rounds} warm-up rounds")
    run = net.insert_and_track(rng)
    if present is not None:
        present = net.distinct_items()
    for _ in range(config.rounds):
        run.step(rng)
        check()
    trials, hits = net.drop_frequency
    return ReplicateResult(np.asarray(run.replication), np.asarray(run.coverage),
                           conservation_violations=violations + net.conservation_violations,
                           drop_trials=trials, drop_hits=hits)


def run_replicate(config: ExperimentConfig, index: int) -> ReplicateResult:
    """Replicate ``index`` of ``config``; depends only on base_seed + index."""
    rng = config.replicate_rng(index)
    if config.layer is Layer.PROTOCOL:
        return _protocol_replicate(config, rng)
    if config.layer is Layer.MODEL:
        matrix = build_matrix(config.params, config.variant)
        x, y = simulate_model(config.topology, matrix, config.rounds, rng)
        return ReplicateResult(x, y)
    x, y = OdeSolution(config.params).trajectory(config.rounds)
    return ReplicateResult(x, y)


def _run_indexed(args: tuple[ExperimentConfig, int]) -> ReplicateResult:
    return run_replicate(*args)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> RunSummary:
    """Run all replicates and reduce them in replicate order.

    The ode layer is deterministic, so it is evaluated once whatever the
    replicate count.
    """
    count = 1 if config.layer is Layer.ODE else config.replicates
    jobs = [(config, i) for i in range(count)]
    if workers > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_indexed, jobs))
    else:
        results = [_run_indexed(job) for job in jobs]
    return summarize(results, config)


def summarize(results: Sequence[ReplicateResult],
              config: ExperimentConfig | None = None) -> RunSummary:
    x = np.stack([r.replication for r in results])
    y = np.stack([r.coverage for r in results])
    if len(results) > 1:
        x_std, y_std = x.std(axis=0, ddof=1), y.std(axis=0, ddof=1)
    else:
        x_std, y_std = np.zeros(x.shape[1]), np.zeros(y.shape[1])
    return RunSummary(repl_mean=x.mean(axis=0), repl_std=x_std, cov_mean=y.mean(axis=0),
                      cov_std=y_std, config=config,
                      conservation_violations=sum(r.conservation_violations for r in results),
                      replicates=list(results))


def rounds_to_fraction(summary: RunSummary, fraction: float = 0.9,
                       target: float | None = None) -> int | None:
    """First round whose mean replication reaches ``fraction * target``.

    ``target`` defaults to the stationary replication c/n of the config.
    """
    if target is None:
        if summary.config is None:
            raise ValueError("target required for a summary without config")
        target = summary.config.params.stationary_replication
    hits = np.flatnonzero(summary.repl_mean >= fraction * target)
    return int(hits[0]) if hits.size else None


# comparison ---------------------------------------------------------------

@dataclass
class LayerComparison:
    repl_diff: np.ndarray
    cov_diff: np.ndarray
    repl_in_band: np.ndarray
    cov_in_band: np.ndarray
    repl_a: np.ndarray
    repl_b: np.ndarray
    cov_a: np.ndarray
    cov_b: np.ndarray
    burn_in: int
    required: float
    metrics: tuple[str, ...]

    def fraction_in_band(self, metric: str) -> float:
        band = self.repl_in_band if metric == "replication" else self.cov_in_band
        tail = band[self.burn_in + 1:]
        return float(np.mean(tail)) if tail.size else 1.0

    @property
    def passed(self) -> bool:
        return all(self.fraction_in_band(m) >= self.required for m in self.metrics)

    def summary_line(self) -> str:
        parts = [f"{m} {100 * self.fraction_in_band(m):.1f}%" for m in self.metrics]
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict}: " + ", ".join(parts)
                + f" of rounds after {self.burn_in} within band (need {100 * self.required:.0f}%)")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COMPARISON_HEADER)
        for t in range(len(self.repl_diff)):
            writer.writerow([t, fmt(self.repl_a[t]), fmt(self.repl_b[t]), fmt(self.repl_diff[t]),
                             int(self.repl_in_band[t]), fmt(self.cov_a[t]), fmt(self.cov_b[t]),
                             fmt(self.cov_diff[t]), int(self.cov_in_band[t])])
        return buf.getvalue()


def compare_layers(a: RunSummary, b: RunSummary, *, burn_in: int = 10,
                   required: float = 0.95,
                   metrics: Sequence[str] = ("replication", "coverage"),
                   resolution: float = 0.0) -> LayerComparison:
    """Check b's mean against a's mean ± a's std, round by round.

    ``resolution`` widens the band to at least that half-width; the default
    of zero is the plain one-std band.
    """
    if len(a.repl_mean) != len(b.repl_mean):
        raise SchemaError(f"round counts differ: {a.rounds} vs {b.rounds}")
    if a.config is not None and b.config is not None and a.config.params != b.config.params:
        raise SchemaError(f"parameters differ: {a.config.params} vs {b.config.params}")
    for m in metrics:
        if m not in ("replication", "coverage"):
            raise ValueError(f"unknown metric {m!r}")
    repl_diff = np.abs(b.repl_mean - a.repl_mean)
    cov_diff = np.abs(b.cov_mean - a.cov_mean)
    return LayerComparison(
        repl_diff=repl_diff, cov_diff=cov_diff,
        repl_in_band=repl_diff <= np.maximum(a.repl_std, resolution),
        cov_in_band=cov_diff <= np.maximum(a.cov_std, resolution),
        repl_a=a.repl_mean, repl_b=b.repl_mean, cov_a=a.cov_mean, cov_b=b.cov_mean,
        burn_in=burn_in, required=required, metrics=tuple(metrics))


# files --------------------------------------------------------------------

def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to a temporary sibling and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_summary_csv(path: str | os.PathLike) -> RunSummary:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise SchemaError(f"{path}: expected header {','.join(CSV_HEADER)}")
    body = rows[1:]
    if not body:
        raise SchemaError(f"{path}: no data rows")
    try:
        data = np.array([[float(v) for v in row] for row in body])
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric value ({exc})") from None
    if data.shape[1] != len(CSV_HEADER) or not np.array_equal(data[:, 0], np.arange(len(body))):
        raise SchemaError(f"{path}: rows must be numbered 0..{len(body) - 1}")
    if not np.all(np.isfinite(data)):
        raise SchemaError(f"{path}: non-finite value")
    return RunSummary(repl_mean=data[:, 1], repl_std=data[:, 2],
                      cov_mean=data[:, 3], cov_std=data[:, 4])


# sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    s: int
    rounds_to_90: int | None
    replication_at: float
    coverage_at: float
    at_round: int


def sweep_s(config: ExperimentConfig, s_values: Sequence[int], at_round: int | None = None,
            workers: int = 1) -> list[SweepRow]:
    """Rerun ``config`` for each buffer size; report x(t*) and time to 90% of c/n."""
    at = config.rounds if at_round is None else at_round
    if not 0 <= at <= config.rounds:
        raise ParameterError(f"round {at} outside 0..{config.rounds}")
    rows = []
    for s in s_values:
        p = config.params
        cfg = replace(config, params=ProtocolParams(n=p.n, c=p.c, s=s, N=p.N))
        summary = run_experiment(cfg, workers=workers)
        rows.append(SweepRow(s=s, rounds_to_90=rounds_to_fraction(summary, 0.9),
                             replication_at=float(summary.repl_mean[at]),
                             coverage_at=float(summary.cov_mean[at]), at_round=at))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["s", "rounds_to_90pct", "round", "repl_mean", "cov_mean"])
    for r in rows:
        writer.writerow([r.s, "" if r.rounds_to_90 is None else r.rounds_to_90, r.at_round,
                         fmt(r.replication_at), fmt(r.coverage_at)])
    return buf.getvalue()


def fastest(rows: Sequence[SweepRow]) -> SweepRow | None:
    reached = [r for r in rows if r.rounds_to_90 is not None]
    return min(reached, key=lambda r: (r.rounds_to_90, -r.replication_at)) if reached else None
