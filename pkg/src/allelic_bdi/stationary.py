"""Stationary laws of the reversible regime (mu > 1) and their verification.

The size process is reversible with respect to the negative-binomial law

    lambda(n) = theta_(n) / n! * mu^{-n} * (1 - 1/mu)^theta,

and the partition-valued chain with alpha in (0, 1) with respect to

    pi(m) = C * (theta/alpha)_(k) * prod_i Poisson(m_i; w_i * mu^{-i}),
    C = exp(1 - (1 - 1/mu)^alpha) * (1 - 1/mu)^theta,

with w_i = alpha_weight(alpha, i).  The infinite product of Poisson vacancy
factors collapses against C (the weight series sums to 1 - (1 - 1/mu)^alpha),
so pi is evaluated from the stored entries alone.  Equivalently pi is the
lambda-mixture of Pitman sampling formulae, which collapses to the single
term at n = s(m); both routes are exposed and checked against each other.

For theta in (-alpha, 0) the same expressions satisfy the detailed-balance
identities algebraically but carry a sign ((theta/alpha)_(k) < 0 for k >= 1),
i.e. they form a signed measure rather than a probability distribution; the
evaluators return those signed values and the balance checks handle them,
while the probability-only helpers insist on theta > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import BoundExceededError, DomainError
from .formulae import (
    ModelParams,
    SignedLogValue,
    log_alpha_weight,
    log_ascending_factorial,
    log_factorial,
    neg_bin_pmf,
    nbin_time_param,
    poisson_product_prob,
    psf,
)
from .partitions import AllelicPartition, TransitionEvent, enumerate_partitions

#: States with populations beyond this are never enumerated by the scanners.
PARTITION_BALANCE_MAX_SIZE = 14


def size_stationary_pmf(n: int, theta: float, mu: float) -> float:
    """lambda(n) = theta_(n) / n! * mu^{-n} * (1 - 1/mu)^theta, mu > 1.

    A probability mass function for theta > 0; for theta <= 0 the returned
    values are the signed quantities that still satisfy detailed balance.
    """
    if not mu > 1.0:
        raise DomainError("reversible regime requires mu > 1")
    if n < 0:
        raise DomainError("the population size must be >= 0")
    asc = log_ascending_factorial(theta, n)
    if asc.sign == 0:
        return 0.0
    return asc.sign * math.exp(
        asc.log_magnitude - log_factorial(n) - n * math.log(mu) + theta * math.log1p(-1.0 / mu)
    )


def size_stationary_log_range(theta: float, mu: float, n_max: int) -> np.ndarray:
    """log lambda(n) for n = 0..n_max as one array (theta > 0 only)."""
    if not mu > 1.0:
        raise DomainError("reversible regime requires mu > 1")
    if theta <= 0.0:
        raise DomainError("the log table requires theta > 0")
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    steps = np.arange(n_max, dtype=float)
    log_asc = np.concatenate(([0.0], np.cumsum(np.log(theta + steps))))
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(steps + 1.0))))
    n = np.arange(n_max + 1)
    return log_asc - log_fact - n * math.log(mu) + theta * math.log1p(-1.0 / mu)


def _signed_log_pi(m: AllelicPartition, params: ModelParams) -> SignedLogValue:
    log_p = params.theta * math.log1p(-1.0 / params.mu)
    sign = 1
    k = m.num_groups
    if k:
        lead = log_ascending_factorial(params.theta / params.alpha, k)
        if lead.sign == 0:
            return SignedLogValue.zero()
        sign = lead.sign
        log_p += lead.log_magnitude
    log_mu = math.log(params.mu)
    for i, mi in m:
        log_p += mi * (log_alpha_weight(params.alpha, i) - i * log_mu) - log_factorial(mi)
    return SignedLogValue(sign, log_p)


def partition_stationary_pmf(m: AllelicPartition, params: ModelParams) -> float:
    """The reversible law pi(m); requires alpha in (0, 1) and mu > 1.

    Signed for theta < 0 (see the module docstring); a genuine probability
    for theta > 0, where summing over all partitions with s(m) = n yields
    exactly lambda(n).
    """
    if params.alpha == 0.0:
        raise DomainError(
            "pi is parameterized by alpha in (0, 1); the alpha = 0 regime "
            "is covered by the Poisson-product limit"
        )
    params.require_reversible()
    return _signed_log_pi(m, params).to_float()


def normalizing_constant(params: ModelParams) -> float:
    """C = exp(1 - (1 - 1/mu)^alpha) * (1 - 1/mu)^theta."""
    if params.alpha == 0.0:
        raise DomainError("the constant is defined for alpha in (0, 1)")
    params.require_reversible()
    base = -math.expm1(math.log1p(-1.0 / params.mu) * params.alpha)  # 1 - (1-1/mu)^alpha
    return math.exp(base) * math.exp(params.theta * math.log1p(-1.0 / params.mu))


def partition_stationary_via_mixture(
    m: AllelicPartition, params: ModelParams, n_trunc: int
) -> float:
    """pi(m) evaluated as the mixture sum_n PSF_n(m) * lambda(n).

    The Pitman formula vanishes except at n = s(m), so the sum is the single
    product psf(s(m)) * lambda(s(m)); the result is asserted to match the
    closed form within 1e-10 relative before being returned.
    """
    if params.alpha == 0.0:
        raise DomainError("the mixture is parameterized by alpha in (0, 1)")
    params.require_reversible()
    n = m.size
    if n > n_trunc:
        raise DomainError(f"truncation bound {n_trunc} is below the partition size {n}")
    value = psf(n, params, m) * size_stationary_pmf(n, params.theta, params.mu)
    closed = partition_stationary_pmf(m, params)
    if not math.isclose(value, closed, rel_tol=1e-10):
        raise ArithmeticError(
            f"mixture and closed form disagree at {m.encode()!r}: {value!r} vs {closed!r}"
        )
    return value


@dataclass(frozen=True)
class TruncatedDistribution:
    """A distribution restricted to states within a size bound.

    Stores genuine probabilities (all >= 0, total mass <= 1); whatever mass
    lies beyond the bound is implicit and picked up by total-variation
    computations as tail mass.
    """

    bound: int
    probs: Mapping[object, float]

    def __post_init__(self):
        mass = 0.0
        for p in self.probs.values():
            if p < 0.0:
                raise DomainError("probabilities must be >= 0")
            mass += p
        if mass > 1.0 + 1e-9:
            raise DomainError(f"captured mass {mass} exceeds 1")

    @property
    def mass(self) -> float:
        return sum(self.probs.values())


def partition_stationary_truncated(params: ModelParams, bound: int) -> TruncatedDistribution:
    """pi tabulated over all partitions with s(m) <= bound (theta > 0)."""
    if params.theta <= 0.0:
        raise DomainError("the truncated stationary table requires theta > 0")
    if bound > PARTITION_BALANCE_MAX_SIZE:
        raise BoundExceededError(
            f"stationary tables are capped at s <= {PARTITION_BALANCE_MAX_SIZE}"
        )
    probs: dict[AllelicPartition, float] = {}
    for n in range(bound + 1):
        for m in enumerate_partitions(n):
            probs[m] = partition_stationary_pmf(m, params)
    return TruncatedDistribution(bound, probs)


@dataclass(frozen=True)
class BalanceScan:
    """Worst-case outcome of a detailed-balance sweep."""

    max_residual: float
    worst_state: str
    worst_transition: str
    pairs_checked: int


def size_balance_scan(
    theta: float,
    mu: float,
    n_max: int,
    pmf: Callable[[int], float] | None = None,
) -> BalanceScan:
    """Check lambda(n) * (theta + n) = lambda(n+1) * mu * (n+1) for n < n_max.

    Residuals are relative.  With the default pmf the comparison runs in log
    space; a replacement pmf (e.g. a deliberately perturbed table) is checked
    in plain floats.
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    if pmf is None:
        if theta <= 0.0:
            raise DomainError("the balance scan requires theta > 0")
        log_lam = size_stationary_log_range(theta, mu, n_max)
        n = np.arange(n_max, dtype=float)
        delta = log_lam[:-1] + np.log(theta + n) - log_lam[1:] - np.log(mu * (n + 1.0))
        residuals = np.abs(np.expm1(delta))
    else:
        if not mu > 1.0:
            raise DomainError("reversible regime requires mu > 1")
        residuals = np.empty(n_max)
        for i in range(n_max):
            lhs = pmf(i) * (theta + i)
            rhs = pmf(i + 1) * mu * (i + 1)
            if lhs == 0.0:
                residuals[i] = 0.0 if rhs == 0.0 else math.inf
            else:
                residuals[i] = abs(lhs - rhs) / abs(lhs)
    worst = int(np.argmax(residuals))
    return BalanceScan(
        max_residual=float(residuals[worst]),
        worst_state=str(worst),
        worst_transition=f"{worst}->{worst + 1}",
        pairs_checked=n_max,
    )


def size_detailed_balance_residual(
    theta: float, mu: float, n_max: int, pmf: Callable[[int], float] | None = None
) -> float:
    return size_balance_scan(theta, mu, n_max, pmf).max_residual


def _up_transitions(m: AllelicPartition, params: ModelParams):
    """(event, formal up-rate, reverse death index) for every up move from m.

    The new-family rate theta + alpha * k is used exactly as written even
    when nonpositive (possible only at the empty state with theta <= 0),
    because that is the expression the balance identity is stated with.
    """
    yield TransitionEvent.new_family(), params.theta + params.alpha * m.num_groups, 1
    for i, c in m:
        yield TransitionEvent.growth(i), (i - params.alpha) * c, i + 1


def partition_balance_scan(
    params: ModelParams,
    s_max: int,
    pmf: Callable[[AllelicPartition], float] | None = None,
) -> BalanceScan:
    """Check pi(m) q(m'|m) = pi(m') q(m|m') over every up move with s(m) <= s_max.

    Each up transition (new family, or growth of a size-i group) is paired
    with its reversing death; relative residuals are computed on signed log
    values so the theta < 0 regime is covered.  A sign mismatch or one-sided
    zero reports an infinite residual.
    """
    if params.alpha == 0.0:
        raise DomainError("the partition balance scan requires alpha in (0, 1)")
    params.require_reversible()
    if s_max < 0:
        raise DomainError("s_max must be >= 0")
    if s_max > PARTITION_BALANCE_MAX_SIZE:
        raise BoundExceededError(
            f"balance scans are capped at s <= {PARTITION_BALANCE_MAX_SIZE}"
        )

    if pmf is None:
        log_pi_of = lambda m: _signed_log_pi(m, params)  # noqa: E731
    else:
        log_pi_of = lambda m: SignedLogValue.from_float(pmf(m))  # noqa: E731
    cache: dict[AllelicPartition, SignedLogValue] = {}

    def log_pi(m: AllelicPartition) -> SignedLogValue:
        out = cache.get(m)
        if out is None:
            out = cache[m] = log_pi_of(m)
        return out

    mu = params.mu
    worst = -1.0
    worst_state = worst_transition = ""
    pairs = 0
    for n in range(s_max + 1):
        for m in enumerate_partitions(n):
            for event, q_up, rev_index in _up_transitions(m, params):
                m_next = m.apply_event(event)
                q_down = mu * rev_index * m_next.multiplicity(rev_index)
                lhs = log_pi(m) * SignedLogValue.from_float(q_up)
                rhs = log_pi(m_next) * SignedLogValue.from_float(q_down)
                pairs += 1
                if lhs.sign == 0 and rhs.sign == 0:
                    residual = 0.0
                elif lhs.sign != rhs.sign:
                    residual = math.inf
                else:
                    residual = abs(math.expm1(lhs.log_magnitude - rhs.log_magnitude))
                if residual > worst:
                    worst = residual
                    worst_state = m.encode()
                    worst_transition = str(event)
    return BalanceScan(worst, worst_state, worst_transition, pairs)


def partition_detailed_balance_residual(
    params: ModelParams,
    s_max: int,
    pmf: Callable[[AllelicPartition], float] | None = None,
) -> float:
    return partition_balance_scan(params, s_max, pmf).max_residual


def mixture_consistency_scan(params: ModelParams, s_max: int) -> BalanceScan:
    """Worst relative gap between pi and its mixture form over s(m) <= s_max.

    The mixture form is psf(s(m)) * lambda(s(m)) (the only surviving term of
    the size mixture); residuals are relative to the closed form, compared on
    signed values so theta < 0 is covered.
    """
    if params.alpha == 0.0:
        raise DomainError("the mixture scan requires alpha in (0, 1)")
    params.require_reversible()
    if s_max < 0:
        raise DomainError("s_max must be >= 0")
    if s_max > PARTITION_BALANCE_MAX_SIZE:
        raise BoundExceededError(
            f"stationary scans are capped at s <= {PARTITION_BALANCE_MAX_SIZE}"
        )
    worst = -1.0
    worst_state = ""
    checked = 0
    for n in range(s_max + 1):
        lam = size_stationary_pmf(n, params.theta, params.mu)
        for m in enumerate_partitions(n):
            closed = partition_stationary_pmf(m, params)
            mixed = psf(n, params, m) * lam
            checked += 1
            if closed == 0.0:
                residual = 0.0 if mixed == 0.0 else math.inf
            else:
                residual = abs(mixed - closed) / abs(closed)
            if residual > worst:
                worst = residual
                worst_state = m.encode()
    return BalanceScan(worst, worst_state, "mixture-vs-closed-form", checked)


def stationary_mass_comparison(params: ModelParams, bound: int) -> tuple[float, float]:
    """(sum of pi over s(m) <= bound, sum of lambda over n <= bound).

    The two sums agree exactly in real arithmetic because the Pitman formula
    is a probability distribution on each size slice; the observable gap is
    pure floating-point error.  Signed for theta < 0.
    """
    if params.alpha == 0.0:
        raise DomainError("the mass comparison requires alpha in (0, 1)")
    params.require_reversible()
    if bound > PARTITION_BALANCE_MAX_SIZE:
        raise BoundExceededError(
            f"stationary scans are capped at s <= {PARTITION_BALANCE_MAX_SIZE}"
        )
    pi_sum = 0.0
    lambda_sum = 0.0
    for n in range(bound + 1):
        lambda_sum += size_stationary_pmf(n, params.theta, params.mu)
        for m in enumerate_partitions(n):
            pi_sum += partition_stationary_pmf(m, params)
    return pi_sum, lambda_sum


def weight_series_gap(alpha: float, mu: float, terms: int = 10_000) -> float:
    """|sum_{i<=terms} w_i mu^{-i} - (1 - (1-1/mu)^alpha)| for mu > 1.

    The series converges geometrically (ratio 1/mu), so a few hundred terms
    already put the truncation error below double precision.
    """
    if not mu > 1.0:
        raise DomainError("the weight series identity requires mu > 1")
    if terms < 1:
        raise DomainError("need at least one term")
    # smallest to largest so the partial sum accumulates without cancellation
    total = 0.0
    for i in range(terms, 0, -1):
        total += math.exp(log_alpha_weight(alpha, i) - i * math.log(mu))
    closed = -math.expm1(alpha * math.log1p(-1.0 / mu))
    return abs(total - closed)


def alpha0_marginal(m: AllelicPartition, theta: float, mu: float, t: float) -> float:
    """Time-t law of the alpha = 0 chain from the empty state.

    The multiplicities are independent Poissons with rates
    theta * b(t)^i / i, b(t) = nbin_time_param(mu, t); valid for every
    mu >= 0, not only the reversible regime.
    """
    return poisson_product_prob(m, theta, nbin_time_param(mu, t))


def alpha0_limit_rate(i: int, theta: float, mu: float) -> float:
    """Limiting Poisson rate of m_i for the alpha = 0 chain.

    theta / i for mu <= 1 (the transient and null cases, where the limit is
    of the scaled process) and theta * mu^{-i} / i for mu > 1.
    """
    if i < 1:
        raise DomainError("the group size must be >= 1")
    if theta <= 0.0:
        raise DomainError("the limit rates require theta > 0")
    if mu < 0.0:
        raise DomainError("mu must be >= 0")
    if mu > 1.0:
        return theta * mu ** (-i) / i
    return theta / i


def _as_probabilities(dist) -> Mapping[object, float]:
    if isinstance(dist, TruncatedDistribution):
        return dist.probs
    if hasattr(dist, "probabilities"):
        return dist.probabilities()
    if isinstance(dist, Mapping):
        return dist
    raise DomainError(f"unsupported distribution type {type(dist).__name__}")


def conditional_given_size(dist, n: int) -> dict[AllelicPartition, float]:
    """Renormalized slice {s(m) = n} of a distribution over partitions.

    Accepts a TruncatedDistribution, an empirical distribution or a plain
    mapping; raises if the slice carries no mass.  Applied to the exact
    stationary table this recovers the Pitman sampling formula at n.
    """
    if n < 0:
        raise DomainError("the slice size must be >= 0")
    probs = _as_probabilities(dist)
    slice_probs = {m: p for m, p in probs.items() if m.size == n and p > 0.0}
    total = sum(slice_probs.values())
    if total <= 0.0:
        raise DomainError(f"the distribution carries no mass on partitions of size {n}")
    return {m: p / total for m, p in slice_probs.items()}
