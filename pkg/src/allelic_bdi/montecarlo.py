"""Ensemble simulation, empirical distributions and Monte Carlo diagnostics.

Reproducibility contract: replicate ``i`` of a run with master seed ``S``
always uses the stream ``numpy.random.default_rng([S, i])``, and merged
tallies are plain integer sums, so results are bit-identical for fixed
inputs no matter how replicates are partitioned across workers.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import IO, Any, Callable, Iterable, Mapping

import numpy as np

from . import __version__ as _pkg_version
from .ctmc import DEFAULT_MAX_EVENTS, simulate, simulate_bdi, simulate_branching
from .errors import DomainError
from .formulae import ModelParams
from .partitions import AllelicPartition
from .urn import group_count_trace

ENGINES = ("multiplicity", "branching", "bdi")


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Weighted tallies over partitions or integers.

    ``weights`` maps outcomes to nonnegative weights summing to ``total``
    (replicate counts for ensembles, occupation times for long runs).
    """

    weights: Mapping[Any, float]
    total: float
    replicates: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.total <= 0.0:
            raise DomainError("the total weight must be > 0")
        acc = 0.0
        for w in self.weights.values():
            if w < 0.0:
                raise DomainError("weights must be >= 0")
            acc += w
        if not math.isclose(acc, self.total, rel_tol=1e-9, abs_tol=1e-12):
            raise DomainError(f"weights sum to {acc}, expected {self.total}")

    def probabilities(self) -> dict[Any, float]:
        return {key: w / self.total for key, w in self.weights.items()}

    def map_keys(self, fn: Callable[[Any], Any]) -> "EmpiricalDistribution":
        merged: dict[Any, float] = {}
        for key, w in self.weights.items():
            new_key = fn(key)
            merged[new_key] = merged.get(new_key, 0.0) + w
        return EmpiricalDistribution(merged, self.total, self.replicates, self.seed)

    def size_marginal(self) -> "EmpiricalDistribution":
        return self.map_keys(lambda m: m.size)

    def group_marginal(self) -> "EmpiricalDistribution":
        return self.map_keys(lambda m: m.num_groups)

    def joint_groups_size(self) -> "EmpiricalDistribution":
        return self.map_keys(lambda m: (m.num_groups, m.size))

    def restrict(self, predicate: Callable[[Any], bool]) -> dict[Any, float]:
        """Probabilities of the keys passing ``predicate`` (not renormalized)."""
        return {k: w / self.total for k, w in self.weights.items() if predicate(k)}

    def mean(self) -> float:
        return sum(k * w for k, w in self.weights.items()) / self.total

    def variance(self) -> float:
        mean = self.mean()
        return sum((k - mean) ** 2 * w for k, w in self.weights.items()) / self.total


def _replicate_outcome(engine: str, params: ModelParams, t_end: float, rng, max_events: int):
    if engine == "multiplicity":
        return simulate(params, t_end, rng, max_events=max_events).final_state()
    if engine == "branching":
        return simulate_branching(params, t_end, rng, max_events=max_events).final_state()
    if engine == "bdi":
        return simulate_bdi(params, t_end, rng, max_events=max_events).final_value
    raise DomainError(f"unknown engine {engine!r}; expected one of {ENGINES}")


def _run_chunk(args: tuple) -> Counter:
    params, t_end, seed, engine, start, stop, max_events = args
    tallies: Counter = Counter()
    for i in range(start, stop):
        rng = np.random.default_rng([seed, i])
        tallies[_replicate_outcome(engine, params, t_end, rng, max_events)] += 1
    return tallies


def run_ensemble(
    params: ModelParams,
    t_end: float,
    replicates: int,
    seed: int,
    engine: str = "multiplicity",
    *,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> EmpiricalDistribution:
    """Tally the time-``t_end`` state over independent replicates.

    Partition engines tally final partitions (size and group marginals are
    derived views); the ``bdi`` engine tallies integer sizes.  The output is
    a deterministic function of (params, t_end, replicates, seed, engine)
    alone - worker count only affects wall time.
    """
    if replicates < 1:
        raise DomainError("need at least one replicate")
    if engine not in ENGINES:
        raise DomainError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    if seed < 0:
        raise DomainError("the seed must be >= 0")
    workers = min(workers, max(1, replicates // 64))  # pool startup isn't worth tiny runs
    if workers <= 1:
        tallies = _run_chunk((params, t_end, seed, engine, 0, replicates, max_events))
    else:
        chunk = max(1, -(-replicates // (workers * 4)))
        jobs = [
            (params, t_end, seed, engine, lo, min(lo + chunk, replicates), max_events)
            for lo in range(0, replicates, chunk)
        ]
        tallies = Counter()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_chunk, jobs):
                tallies.update(part)
    return EmpiricalDistribution(dict(tallies), float(replicates), replicates, seed)


def _tail(probs: Mapping[Any, float]) -> float:
    return max(0.0, 1.0 - sum(probs.values()))


def _coerce_probs(dist) -> Mapping[Any, float]:
    if isinstance(dist, EmpiricalDistribution):
        return dist.probabilities()
    if hasattr(dist, "probs"):  # TruncatedDistribution
        return dist.probs
    if isinstance(dist, Mapping):
        return dist
    raise DomainError(f"unsupported distribution type {type(dist).__name__}")


def tv_distance(p, q) -> float:
    """Total variation distance between two (possibly truncated) laws.

    Computed as half the L1 difference over the union of stored supports
    plus half of each side's unstored tail mass; exact whenever each law's
    missing mass lives where the other has none (truncation against an
    empirical law, in particular).
    """
    p_probs, q_probs = _coerce_probs(p), _coerce_probs(q)
    for probs in (p_probs, q_probs):
        mass = 0.0
        for value in probs.values():
            if value < -1e-12:
                raise DomainError("distributions must be nonnegative")
            mass += value
        if mass > 1.0 + 1e-9:
            raise DomainError(f"mass {mass} exceeds 1")
    core = 0.0
    for key in p_probs.keys() | q_probs.keys():
        core += abs(p_probs.get(key, 0.0) - q_probs.get(key, 0.0))
    return 0.5 * core + 0.5 * (_tail(p_probs) + _tail(q_probs))


def stationary_occupation(
    params: ModelParams,
    horizon: float,
    burn_in: float,
    seed: int,
    *,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> EmpiricalDistribution:
    """Occupation fractions of one long run after a burn-in (mu > 1).

    Simulates a single trajectory on [0, horizon] and weights each visited
    partition by the time spent there beyond ``burn_in``.
    """
    params.require_reversible()
    if not 0.0 <= burn_in < horizon:
        raise DomainError("need 0 <= burn_in < horizon")
    trajectory = simulate(
        params, horizon, np.random.default_rng([seed, 0]), max_events=max_events
    )
    weights: dict[AllelicPartition, float] = {}
    t_prev = 0.0
    state_prev = trajectory.initial
    for t, state in trajectory.iter_states():
        if t > 0.0:
            lo, hi = max(t_prev, burn_in), t
            if hi > lo:
                weights[state_prev] = weights.get(state_prev, 0.0) + (hi - lo)
            t_prev, state_prev = t, state
        else:
            state_prev = state
    lo = max(t_prev, burn_in)
    if horizon > lo:
        weights[state_prev] = weights.get(state_prev, 0.0) + (horizon - lo)
    return EmpiricalDistribution(weights, horizon - burn_in, None, seed)


@dataclass(frozen=True)
class GrowthRow:
    """Cross-replicate statistics of the group count at one checkpoint.

    Two normalizations are always reported: K_n / log(n) (NaN at n = 1) and
    K_n / n^power.  ``cv`` columns are sample coefficient of variation.
    """

    n: int
    mean_groups: float
    sd_groups: float
    log_norm_mean: float
    log_norm_cv: float
    pow_norm_mean: float
    pow_norm_cv: float


def growth_report(
    params: ModelParams,
    n_max: int,
    runs: int,
    seed: int,
    *,
    power: float | None = None,
) -> list[GrowthRow]:
    """Group-count growth statistics over independent urn runs.

    ``power`` defaults to alpha, the exponent under which the group count of
    the two-parameter urn has a nondegenerate limit (at alpha = 0 the power
    normalization degenerates to the raw count and the log column is the
    meaningful one, approaching theta).
    """
    if runs < 2:
        raise DomainError("need at least two runs for dispersion statistics")
    if power is None:
        power = params.alpha
    traces = []
    for r in range(runs):
        rng = np.random.default_rng([seed, r])
        traces.append(group_count_trace(n_max, params, rng))
    rows = []
    for column, (n, _) in enumerate(traces[0]):
        counts = np.array([trace[column][1] for trace in traces], dtype=float)
        mean = float(counts.mean())
        sd = float(counts.std(ddof=1))
        log_n = math.log(n)
        if log_n > 0.0:
            log_mean, log_cv = mean / log_n, sd / mean
        else:
            log_mean = log_cv = float("nan")
        scale = float(n**power)
        rows.append(
            GrowthRow(
                n=n,
                mean_groups=mean,
                sd_groups=sd,
                log_norm_mean=log_mean,
                log_norm_cv=log_cv,
                pow_norm_mean=mean / scale,
                pow_norm_cv=sd / mean,
            )
        )
    return rows


def _key_text(key) -> str:
    if isinstance(key, AllelicPartition):
        return key.encode()
    if isinstance(key, (int, np.integer)):
        return str(int(key))
    raise DomainError(f"cannot serialize histogram key of type {type(key).__name__}")


def _sort_key(key):
    if isinstance(key, AllelicPartition):
        return (key.size, key.encode())
    if isinstance(key, (int, np.integer)):
        return (int(key), "")
    raise DomainError(f"cannot serialize histogram key of type {type(key).__name__}")


def write_histogram_csv(
    dist: EmpiricalDistribution, file: str | IO[str], metadata: Mapping[str, object] | None = None
) -> None:
    """Write tallies as ``key,count,probability`` CSV with a metadata header."""
    own = isinstance(file, str)
    fh: IO[str] = open(file, "w", newline="") if own else file
    try:
        meta: dict[str, object] = {"artifact": "allelic-bdi", "version": _pkg_version}
        meta["total_weight"] = dist.total
        if dist.replicates is not None:
            meta["replicates"] = dist.replicates
        if dist.seed is not None:
            meta["seed"] = dist.seed
        if metadata:
            meta.update(metadata)
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        fh.write("key,count,probability\n")
        for key in sorted(dist.weights, key=_sort_key):
            w = dist.weights[key]
            count = int(w) if float(w).is_integer() else repr(w)
            fh.write(f"{_key_text(key)},{count},{w / dist.total!r}\n")
    finally:
        if own:
            fh.close()


def write_growth_csv(
    rows: Iterable[GrowthRow], file: str | IO[str], metadata: Mapping[str, object] | None = None
) -> None:
    own = isinstance(file, str)
    fh: IO[str] = open(file, "w", newline="") if own else file
    try:
        meta: dict[str, object] = {"artifact": "allelic-bdi", "version": _pkg_version}
        if metadata:
            meta.update(metadata)
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        fh.write(
            "n,mean_groups,sd_groups,log_norm_mean,log_norm_cv,pow_norm_mean,pow_norm_cv\n"
        )
        for row in rows:
            fh.write(
                f"{row.n},{row.mean_groups!r},{row.sd_groups!r},{row.log_norm_mean!r},"
                f"{row.log_norm_cv!r},{row.pow_norm_mean!r},{row.pow_norm_cv!r}\n"
            )
    finally:
        if own:
            fh.close()
