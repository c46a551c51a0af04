"""Command-line entry point.

Four subcommands: ``exact`` (pointwise or tabulated law evaluation),
``simulate`` (trajectories and ensembles), ``verify`` (reversibility and
stationary-identity checks over a parameter grid) and ``diagnose``
(group-count growth statistics of the urn sampler).

Exit codes: 0 success, 1 verification failure, 2 invalid parameters or
malformed input, 3 runaway guard tripped.  Every stochastic subcommand
requires ``--seed`` and is bit-reproducible from its flag set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import IO, Sequence

import numpy as np

from . import __version__ as _pkg_version
from .ctmc import DEFAULT_MAX_EVENTS, simulate, simulate_branching, write_trajectory_csv
from .errors import DomainError, PartitionParseError, RunawayError
from .formulae import ModelParams, esf, neg_bin_pmf, nbin_time_param, psf
from .montecarlo import (
    ENGINES,
    growth_report,
    run_ensemble,
    tv_distance,
    write_growth_csv,
    write_histogram_csv,
)
from .partitions import AllelicPartition, enumerate_partitions
from .stationary import (
    PARTITION_BALANCE_MAX_SIZE,
    alpha0_marginal,
    mixture_consistency_scan,
    partition_balance_scan,
    partition_stationary_pmf,
    partition_stationary_truncated,
    size_balance_scan,
    size_stationary_pmf,
    stationary_mass_comparison,
    weight_series_gap,
)

SIZE_BALANCE_TOLERANCE = 1e-12
PARTITION_BALANCE_TOLERANCE = 1e-11
MIXTURE_TOLERANCE = 1e-12
MASS_TOLERANCE = 1e-8
SERIES_TOLERANCE = 1e-10

# default verification grids; a --alpha/--theta/--mu flag pins one dimension
SIZE_THETA_GRID = (0.5, 1.0, 2.5)
SIZE_MU_GRID = (1.5, 2.0, 5.0)
PARTITION_ALPHA_GRID = (0.1, 0.5, 0.9)
PARTITION_MU_GRID = (1.2, 2.0, 5.0)


def _need(condition: bool, message: str) -> None:
    if not condition:
        raise DomainError(message)


def _open_out(path: str | None) -> tuple[IO[str], bool]:
    if path is None:
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_table(path: str | None, key_name: str, rows, meta: dict) -> None:
    fh, own = _open_out(path)
    try:
        header = {"artifact": "allelic-bdi", "version": _pkg_version}
        header.update(meta)
        for key, value in header.items():
            fh.write(f"# {key}={value}\n")
        fh.write(f"{key_name},value\n")
        for key, value in rows:
            fh.write(f"{key},{value:.12g}\n")
    finally:
        if own:
            fh.close()


def _write_json(path: str | None, payload: dict) -> None:
    fh, own = _open_out(path)
    try:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    finally:
        if own:
            fh.close()


def cmd_exact(args) -> int:
    kind = args.kind
    if kind == "bt":
        _need(args.mu is not None, "bt requires --mu")
        _need(args.t is not None, "bt requires --t")
        print(f"{nbin_time_param(args.mu, args.t):.12g}")
        return 0

    if kind == "lambda":
        _need(args.theta is not None, "lambda requires --theta")
        _need(args.mu is not None, "lambda requires --mu")
        if args.table:
            rows = [
                (str(n), size_stationary_pmf(n, args.theta, args.mu))
                for n in range(args.max_size + 1)
            ]
            meta = {"kind": "lambda", "theta": args.theta, "mu": args.mu}
            _write_table(args.out, "n", rows, meta)
        else:
            _need(args.n is not None, "lambda requires --n or --table")
            print(f"{size_stationary_pmf(args.n, args.theta, args.mu):.12g}")
        return 0

    if kind == "esf":
        _need(args.theta is not None, "esf requires --theta")
        params = ModelParams(0.0, args.theta)
        meta = {"kind": kind, "theta": args.theta}
    elif kind == "psf":
        _need(args.alpha is not None, "psf requires --alpha")
        _need(args.theta is not None, "psf requires --theta")
        params = ModelParams(args.alpha, args.theta)
        meta = {"kind": kind, "alpha": args.alpha, "theta": args.theta}
    else:  # pi
        _need(args.alpha is not None, "pi requires --alpha")
        _need(args.theta is not None, "pi requires --theta")
        _need(args.mu is not None, "pi requires --mu")
        params = ModelParams(args.alpha, args.theta, args.mu)
        meta = {"kind": kind, "alpha": args.alpha, "theta": args.theta, "mu": args.mu}

    if args.table:
        if kind == "pi":
            rows = [
                (m.encode(), partition_stationary_pmf(m, params))
                for n in range(args.max_size + 1)
                for m in enumerate_partitions(n)
            ]
            meta["max_size"] = args.max_size
        else:
            _need(args.n is not None, f"{kind} --table requires --n")
            rows = [(m.encode(), psf(args.n, params, m)) for m in enumerate_partitions(args.n)]
            meta["n"] = args.n
        _write_table(args.out, "partition", rows, meta)
        return 0

    _need(args.partition is not None, f"{kind} requires --partition or --table")
    m = AllelicPartition.decode(args.partition)
    if kind == "pi":
        value = partition_stationary_pmf(m, params)
    else:
        n = args.n if args.n is not None else m.size
        value = esf(n, args.theta, m) if kind == "esf" else psf(n, params, m)
    print(f"{value:.12g}")
    return 0


def _simulate_summary(args, params: ModelParams, dist) -> dict:
    if args.engine == "bdi":
        size_dist, group_dist = dist, None
    else:
        size_dist, group_dist = dist.size_marginal(), dist.group_marginal()
    moments = {"size": {"mean": size_dist.mean(), "variance": size_dist.variance()}}
    if group_dist is not None:
        moments["groups"] = {"mean": group_dist.mean(), "variance": group_dist.variance()}

    b = nbin_time_param(params.mu, args.t)
    size_probs = size_dist.probabilities()
    n_hi = max(size_probs)
    reference = {n: neg_bin_pmf(n, params.theta, b) for n in range(n_hi + 1)}
    tv: dict[str, object] = {"size_vs_neg_binomial": tv_distance(size_probs, reference)}

    if group_dist is not None:
        bound = min(args.tv_max_size, PARTITION_BALANCE_MAX_SIZE)
        empirical = {m: p for m, p in dist.probabilities().items() if m.size <= bound}
        if params.alpha == 0.0:
            exact = {
                m: alpha0_marginal(m, params.theta, params.mu, args.t)
                for n in range(bound + 1)
                for m in enumerate_partitions(n)
            }
            tv["partition_vs_poisson_product"] = tv_distance(empirical, exact)
            tv["partition_truncation"] = bound
        elif params.mu > 1.0:
            exact = partition_stationary_truncated(params, bound).probs
            tv["partition_vs_stationary"] = tv_distance(empirical, exact)
            tv["partition_truncation"] = bound

    return {
        "artifact": "allelic-bdi",
        "version": _pkg_version,
        "command": "simulate",
        "parameters": {"alpha": params.alpha, "theta": params.theta, "mu": params.mu},
        "t": args.t,
        "replicates": args.replicates,
        "seed": args.seed,
        "engine": args.engine,
        "moments": moments,
        "tv": tv,
    }


def cmd_simulate(args) -> int:
    params = ModelParams(args.alpha, args.theta, args.mu)
    if params.theta <= 0.0:
        raise DomainError(
            "simulation starts from the empty partition, which requires theta > 0: "
            "with theta <= 0 the empty state has total event rate 0 and the run "
            "never leaves it"
        )
    _need(args.t >= 0.0, "--t must be >= 0")
    _need(args.replicates >= 1, "--replicates must be >= 1")
    _need(args.workers >= 1, "--workers must be >= 1")

    if args.trajectory is not None:
        if args.engine == "bdi":
            raise DomainError(
                "--trajectory requires a partition engine (multiplicity or branching)"
            )
        engine_fn = simulate if args.engine == "multiplicity" else simulate_branching
        trajectory = engine_fn(
            params, args.t, np.random.default_rng([args.seed, 0]), max_events=args.max_events
        )
        write_trajectory_csv(
            trajectory,
            args.trajectory,
            params=params,
            seed=args.seed,
            metadata={"engine": args.engine},
        )
        if args.histogram is None and args.summary is None:
            return 0

    dist = run_ensemble(
        params,
        args.t,
        args.replicates,
        args.seed,
        args.engine,
        workers=args.workers,
        max_events=args.max_events,
    )
    if args.histogram is not None:
        meta = {
            "alpha": params.alpha,
            "theta": params.theta,
            "mu": params.mu,
            "t": args.t,
            "engine": args.engine,
        }
        write_histogram_csv(dist, args.histogram, metadata=meta)
    _write_json(args.summary, _simulate_summary(args, params, dist))
    return 0


def cmd_verify(args) -> int:
    if args.mu is not None and not args.mu > 1.0:
        raise DomainError("reversible regime requires mu > 1")
    _need(args.size_max >= 1, "--size-max must be >= 1")
    fault = args.inject_fault

    size_thetas = [args.theta] if args.theta is not None else list(SIZE_THETA_GRID)
    size_mus = [args.mu] if args.mu is not None else list(SIZE_MU_GRID)
    alphas = [args.alpha] if args.alpha is not None else list(PARTITION_ALPHA_GRID)
    part_mus = [args.mu] if args.mu is not None else list(PARTITION_MU_GRID)

    def part_thetas(alpha: float) -> list[float]:
        # one point inside (-alpha, 0), where the balance identities hold in
        # signed form, plus two ordinary positive rates
        return [args.theta] if args.theta is not None else [-alpha / 2.0, 0.5, 2.0]

    size_points = []
    for theta in size_thetas:
        for mu in size_mus:
            pmf = None
            if fault:
                pmf = lambda n, th=theta, m=mu: size_stationary_pmf(n, th, m) * (
                    1.01 if n == 3 else 1.0
                )
            scan = size_balance_scan(theta, mu, args.size_max, pmf)
            size_points.append(
                {
                    "theta": theta,
                    "mu": mu,
                    "n_max": args.size_max,
                    "max_residual": scan.max_residual,
                    "worst_transition": scan.worst_transition,
                }
            )

    partition_points = []
    mixture_points = []
    mass_points = []
    for alpha in alphas:
        for theta in part_thetas(alpha):
            for mu in part_mus:
                params = ModelParams(alpha, theta, mu)
                pmf = None
                if fault:
                    pmf = lambda m, p=params: partition_stationary_pmf(m, p) * (
                        1.01 if m.num_groups % 2 else 1.0
                    )
                scan = partition_balance_scan(params, args.max_size, pmf)
                partition_points.append(
                    {
                        "alpha": alpha,
                        "theta": theta,
                        "mu": mu,
                        "s_max": args.max_size,
                        "max_residual": scan.max_residual,
                        "worst_state": scan.worst_state,
                        "worst_transition": scan.worst_transition,
                    }
                )
                scan = mixture_consistency_scan(params, args.max_size)
                mixture_points.append(
                    {
                        "alpha": alpha,
                        "theta": theta,
                        "mu": mu,
                        "s_max": args.max_size,
                        "max_residual": scan.max_residual,
                        "worst_state": scan.worst_state,
                    }
                )
                pi_sum, lambda_sum = stationary_mass_comparison(
                    params, PARTITION_BALANCE_MAX_SIZE
                )
                mass_points.append(
                    {
                        "alpha": alpha,
                        "theta": theta,
                        "mu": mu,
                        "bound": PARTITION_BALANCE_MAX_SIZE,
                        "pi_sum": pi_sum,
                        "lambda_sum": lambda_sum,
                        "max_residual": abs(pi_sum - lambda_sum),
                    }
                )

    series_points = []
    for alpha in alphas:
        for mu in part_mus:
            gap = weight_series_gap(alpha, mu, args.series_terms)
            series_points.append(
                {
                    "alpha": alpha,
                    "mu": mu,
                    "terms": args.series_terms,
                    "max_residual": gap,
                }
            )

    def suite(name: str, tolerance: float, points: list[dict]) -> dict:
        worst = max(p["max_residual"] for p in points)
        return {
            "name": name,
            "tolerance": tolerance,
            "points": points,
            "max_residual": worst,
            "pass": worst <= tolerance,
        }

    suites = [
        suite("size_detailed_balance", SIZE_BALANCE_TOLERANCE, size_points),
        suite("partition_detailed_balance", PARTITION_BALANCE_TOLERANCE, partition_points),
        suite("mixture_equality", MIXTURE_TOLERANCE, mixture_points),
        suite("mass_consistency", MASS_TOLERANCE, mass_points),
        suite("weight_series_identity", SERIES_TOLERANCE, series_points),
    ]
    ok = all(s["pass"] for s in suites)
    report = {
        "artifact": "allelic-bdi",
        "version": _pkg_version,
        "command": "verify",
        "fault_injected": fault,
        "suites": suites,
        "pass": ok,
    }
    _write_json(args.out, report)
    return 0 if ok else 1


def cmd_diagnose(args) -> int:
    params = ModelParams(args.alpha, args.theta)
    rows = growth_report(params, args.n_max, args.runs, args.seed, power=args.power)
    meta = {
        "alpha": args.alpha,
        "theta": args.theta,
        "n_max": args.n_max,
        "runs": args.runs,
        "seed": args.seed,
        "power": args.power if args.power is not None else params.alpha,
    }
    fh, own = _open_out(args.out)
    try:
        write_growth_csv(rows, fh, metadata=meta)
    finally:
        if own:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="allelic-bdi",
        description=(
            "Exact laws, Gillespie simulation, reversibility verification and "
            "growth diagnostics for the birth-death-immigration chain on "
            "allelic partitions."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {_pkg_version}"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    exact = sub.add_parser(
        "exact",
        help="evaluate an exact law at one point or as a table",
        description=(
            "Evaluate the Ewens (esf) or Pitman (psf) sampling formula, the "
            "stationary partition law (pi), the stationary size law (lambda) "
            "or the time parameter b(t) (bt).  Single values print at 12 "
            "significant digits; --table writes CSV."
        ),
    )
    exact.add_argument(
        "kind", choices=("esf", "psf", "pi", "lambda", "bt"), help="which law to evaluate"
    )
    exact.add_argument("--n", type=int, help="sample or population size, an integer >= 0")
    exact.add_argument("--alpha", type=float, help="within-family skew, in [0, 1)")
    exact.add_argument("--theta", type=float, help="immigration rate, > -alpha")
    exact.add_argument(
        "--mu", type=float, help="per-individual death rate, >= 0 (> 1 for pi and lambda)"
    )
    exact.add_argument("--t", type=float, help="elapsed time, >= 0 (bt only)")
    exact.add_argument(
        "--partition", help='allelic partition such as "1^2 3^1" ("0" for the empty one)'
    )
    exact.add_argument(
        "--table", action="store_true", help="tabulate the law over a state range as CSV"
    )
    exact.add_argument(
        "--max-size",
        type=int,
        default=12,
        help="population-size bound of pi/lambda tables (default %(default)s)",
    )
    exact.add_argument("--out", help="write the table to this file instead of stdout")
    exact.add_argument("--config", help="JSON file of flag values; explicit flags win")
    exact.set_defaults(func=cmd_exact)

    sim = sub.add_parser(
        "simulate",
        help="run trajectory or ensemble simulations",
        description=(
            "Simulate the chain from the empty partition on [0, t].  An "
            "ensemble of --replicates runs is tallied at time t; --histogram, "
            "--summary and --trajectory choose the outputs (default: JSON "
            "summary on stdout)."
        ),
    )
    sim.add_argument(
        "--alpha", type=float, default=0.0, help="within-family skew, in [0, 1) (default 0)"
    )
    sim.add_argument(
        "--theta",
        type=float,
        required=True,
        help="immigration rate; must be > 0 to leave the empty initial state",
    )
    sim.add_argument(
        "--mu", type=float, default=0.0, help="per-individual death rate, >= 0 (default 0)"
    )
    sim.add_argument("--t", type=float, required=True, help="simulation horizon, >= 0")
    sim.add_argument(
        "--replicates",
        type=int,
        default=1000,
        help="independent runs in the ensemble, >= 1 (default %(default)s)",
    )
    sim.add_argument(
        "--seed",
        type=int,
        required=True,
        help="master seed, >= 0; replicate i draws from the stream [seed, i]",
    )
    sim.add_argument(
        "--engine",
        choices=ENGINES,
        default="multiplicity",
        help="multiplicity: partition-level Gillespie; branching: individual-level "
        "construction; bdi: size process only (default %(default)s)",
    )
    sim.add_argument(
        "--workers",
        type=int,
        default=os.cpu_count() or 1,
        help="worker processes, >= 1; never affects results (default: processor count)",
    )
    sim.add_argument(
        "--max-events",
        type=int,
        default=DEFAULT_MAX_EVENTS,
        help="per-run event cap before the runaway guard trips (default %(default)s)",
    )
    sim.add_argument(
        "--tv-max-size",
        type=int,
        default=12,
        help="population-size bound of the partition TV comparison (default %(default)s)",
    )
    sim.add_argument("--histogram", help="write final-state tallies to this CSV file")
    sim.add_argument("--summary", help="write the JSON summary to this file (default: stdout)")
    sim.add_argument(
        "--trajectory",
        help="write one sample path (drawn from the stream [seed, 0]) to this CSV file",
    )
    sim.add_argument("--config", help="JSON file of flag values; explicit flags win")
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser(
        "verify",
        help="verify reversibility and the stationary identities",
        description=(
            "Scan detailed balance of the size and partition chains, the "
            "mixture representation of pi, mass consistency between pi and "
            "lambda, and the weight-series identity over a parameter grid.  "
            "Exit 1 if any residual exceeds its tolerance (the report is "
            "still written)."
        ),
    )
    ver.add_argument(
        "--alpha", type=float, help="pin the alpha grid {0.1, 0.5, 0.9} to one value in (0, 1)"
    )
    ver.add_argument(
        "--theta",
        type=float,
        help="pin the theta grids (size: {0.5, 1, 2.5}; partition: {-alpha/2, 0.5, 2}) "
        "to one value > -alpha",
    )
    ver.add_argument(
        "--mu",
        type=float,
        help="pin the mu grids (size: {1.5, 2, 5}; partition: {1.2, 2, 5}) to one value > 1",
    )
    ver.add_argument(
        "--max-size",
        type=int,
        default=12,
        help="partition-state bound s(m) <= N of the scans, at most 14 (default %(default)s)",
    )
    ver.add_argument(
        "--size-max",
        type=int,
        default=200,
        help="population bound of the size balance scan (default %(default)s)",
    )
    ver.add_argument(
        "--series-terms",
        type=int,
        default=10_000,
        help="terms kept in the weight-series identity (default %(default)s)",
    )
    ver.add_argument("--out", help="write the JSON report to this file (default: stdout)")
    ver.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    ver.add_argument("--config", help="JSON file of flag values; explicit flags win")
    ver.set_defaults(func=cmd_verify)

    diag = sub.add_parser(
        "diagnose",
        help="group-count growth statistics of the urn sampler",
        description=(
            "Run independent urn chains to --n-max items and report the mean, "
            "spread and normalized growth of the group count at logarithmic "
            "checkpoints as CSV."
        ),
    )
    diag.add_argument(
        "--alpha", type=float, default=0.0, help="within-family skew, in [0, 1) (default 0)"
    )
    diag.add_argument("--theta", type=float, required=True, help="new-group rate, > -alpha")
    diag.add_argument(
        "--n-max",
        type=int,
        default=100_000,
        help="final sample size, an integer >= 10 (default %(default)s)",
    )
    diag.add_argument(
        "--runs", type=int, default=200, help="independent urn runs, >= 2 (default %(default)s)"
    )
    diag.add_argument(
        "--seed",
        type=int,
        required=True,
        help="master seed, >= 0; run r draws from the stream [seed, r]",
    )
    diag.add_argument(
        "--power", type=float, help="exponent of the power normalization (default: alpha)"
    )
    diag.add_argument("--out", help="write the CSV report to this file (default: stdout)")
    diag.add_argument("--config", help="JSON file of flag values; explicit flags win")
    diag.set_defaults(func=cmd_diagnose)

    return parser


def _expand_config(argv: list[str]) -> list[str]:
    """Replace ``--config FILE`` with the flag tokens the file encodes.

    The tokens are inserted right after the subcommand, so flags given
    explicitly on the command line take precedence (argparse keeps the last
    occurrence).  Boolean true becomes a bare flag; false and null entries
    are dropped.
    """
    index = path = None
    consumed = 0
    for i, token in enumerate(argv):
        if token == "--config":
            if i + 1 >= len(argv):
                raise DomainError("--config requires a file path")
            index, path, consumed = i, argv[i + 1], 2
            break
        if token.startswith("--config="):
            index, path, consumed = i, token.split("=", 1)[1], 1
            break
    if index is None:
        return argv
    if index == 0:
        raise DomainError("--config must follow a subcommand")
    try:
        with open(path) as fh:
            mapping = json.load(fh)
    except OSError as exc:
        raise DomainError(f"cannot read config file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DomainError(f"config file {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(mapping, dict):
        raise DomainError("the config file must hold a JSON object of flag values")
    injected: list[str] = []
    for key, value in mapping.items():
        flag = "--" + str(key).lstrip("-").replace("_", "-")
        if value is True:
            injected.append(flag)
        elif value is False or value is None:
            continue
        elif isinstance(value, (list, dict)):
            raise DomainError(f"config entry {key!r} must be a scalar")
        else:
            injected.extend((flag, str(value)))
    rest = argv[:index] + argv[index + consumed :]
    return rest[:1] + injected + rest[1:]


def main(argv: Sequence[str] | None = None) -> int:
    raw = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_expand_config(raw))
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors and --help/--version
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 2
    except PartitionParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RunawayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    sys.exit(main())
