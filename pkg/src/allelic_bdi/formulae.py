"""Exact sampling-formula evaluators and their numeric substrate.

Everything here is computed in log space.  Ascending factorials
x*(x+1)*...*(x+n-1) are the only quantities that can go negative on the
allowed parameter range (theta may sit in (-alpha, 0)), so they are returned
as a sign plus log magnitude; all downstream probabilities recombine signs
explicitly instead of exponentiating blindly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from scipy.special import gammaln

from .errors import DomainError

if TYPE_CHECKING:  # pragma: no cover - import cycle guard for annotations only
    from .partitions import AllelicPartition

#: Ascending factorials with at most this many factors are accumulated term by
#: term (absolute log error ~1e-14, needed by the detailed-balance checks);
#: longer ones fall back to log-gamma differences.
_DIRECT_PRODUCT_LIMIT = 512

_LOG_FACTORIAL = [0.0]


@dataclass(frozen=True)
class ModelParams:
    """The three parameters of the model.

    * ``alpha`` in [0, 1): within-family skew; 0 gives the one-parameter
      (Ewens/Hoppe) dynamics.
    * ``theta`` > -alpha: immigration rate (new-family pressure).
    * ``mu`` >= 0: per-individual death rate; mu > 1 is the positive-recurrent
      ("reversible") regime, mu = 0 the pure-birth construction.
    """

    alpha: float
    theta: float
    mu: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.theta > -self.alpha:
            raise DomainError(f"theta must exceed -alpha = {-self.alpha}, got {self.theta}")
        if not self.mu >= 0.0:
            raise DomainError(f"mu must be >= 0, got {self.mu}")

    def require_reversible(self) -> None:
        if not self.mu > 1.0:
            raise DomainError("reversible regime requires mu > 1")


@dataclass(frozen=True)
class SignedLogValue:
    """A real number stored as sign in {-1, 0, +1} and log of its magnitude.

    ``sign == 0`` means the value is exactly zero and ``log_magnitude`` is
    meaningless (kept at -inf).
    """

    sign: int
    log_magnitude: float

    @classmethod
    def zero(cls) -> "SignedLogValue":
        return cls(0, float("-inf"))

    @classmethod
    def one(cls) -> "SignedLogValue":
        return cls(1, 0.0)

    @classmethod
    def from_float(cls, value: float) -> "SignedLogValue":
        if value == 0.0:
            return cls.zero()
        return cls(1 if value > 0 else -1, math.log(abs(value)))

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)

    def __mul__(self, other: "SignedLogValue") -> "SignedLogValue":
        if self.sign == 0 or other.sign == 0:
            return SignedLogValue.zero()
        return SignedLogValue(self.sign * other.sign, self.log_magnitude + other.log_magnitude)


def log_factorial(n: int) -> float:
    """log(n!), cached cumulatively so repeated calls are O(1)."""
    if n < 0:
        raise DomainError("factorial argument must be >= 0")
    while len(_LOG_FACTORIAL) <= n:
        _LOG_FACTORIAL.append(_LOG_FACTORIAL[-1] + math.log(len(_LOG_FACTORIAL)))
    return _LOG_FACTORIAL[n]


def log_ascending_factorial(x: float, n: int) -> SignedLogValue:
    """x * (x+1) * ... * (x+n-1) as a SignedLogValue; the empty product is 1.

    Non-positive leading factors (possible while x + j < 0.5) are folded in
    one by one, so the sign comes out right for negative ``x``; a factor that
    is exactly zero short-circuits to the zero value.
    """
    if n < 0:
        raise DomainError("ascending factorial needs n >= 0")
    if n == 0:
        return SignedLogValue.one()
    sign = 1
    log_mag = 0.0
    j = 0
    while j < n and x + j < 0.5:
        factor = x + j
        if factor == 0.0:
            return SignedLogValue.zero()
        if factor < 0.0:
            sign = -sign
        log_mag += math.log(abs(factor))
        j += 1
    remaining = n - j
    if remaining:
        base = x + j
        if remaining <= _DIRECT_PRODUCT_LIMIT:
            for r in range(remaining):
                log_mag += math.log(base + r)
        else:
            log_mag += float(gammaln(base + remaining) - gammaln(base))
    return SignedLogValue(sign, log_mag)


def esf(n: int, theta: float, m: "AllelicPartition") -> float:
    """Ewens sampling formula: the law of the partition of a sample of size n.

    P(m) = n! / theta_(n) * prod_i (theta / i)^{m_i} / m_i!  on {s(m) = n},
    where theta_(n) is the ascending factorial.  Requires theta > 0.
    """
    if theta <= 0.0:
        raise DomainError("the Ewens sampling formula requires theta > 0")
    if n < 0:
        raise DomainError("sample size must be >= 0")
    if m.size != n:
        return 0.0
    if n == 0:
        return 1.0
    log_p = log_factorial(n) - log_ascending_factorial(theta, n).log_magnitude
    log_theta = math.log(theta)
    for i, mi in m:
        log_p += mi * (log_theta - math.log(i)) - log_factorial(mi)
    return math.exp(log_p)


def psf(n: int, params: ModelParams, m: "AllelicPartition") -> float:
    """Pitman sampling formula, the two-parameter extension of ``esf``.

    Evaluated in the normalized form

        P(m) = n! * (theta/alpha)_(k) / theta_(n) * prod_i w_i^{m_i} / m_i!

    with k = num_groups(m) and w_i = alpha_weight(alpha, i).  The leading
    factors of the two ascending factorials are cancelled analytically
    ((theta/alpha)_(k) / theta_(n) = (1/alpha) * (theta/alpha + 1)_(k-1)
    / (theta + 1)_(n-1)), which removes the 0/0 at theta = 0 and keeps every
    remaining factor positive on the whole parameter range.  At alpha = 0 the
    Ewens formula is used directly (same code path as ``esf``).
    """
    if params.alpha == 0.0:
        return esf(n, params.theta, m)
    if n < 0:
        raise DomainError("sample size must be >= 0")
    if m.size != n:
        return 0.0
    if n == 0:
        return 1.0
    alpha, theta = params.alpha, params.theta
    k = m.num_groups
    log_p = (
        log_factorial(n)
        - math.log(alpha)
        + log_ascending_factorial(theta / alpha + 1.0, k - 1).log_magnitude
        - log_ascending_factorial(theta + 1.0, n - 1).log_magnitude
    )
    for i, mi in m:
        log_p += mi * log_alpha_weight(alpha, i) - log_factorial(mi)
    return math.exp(log_p)


def log_alpha_weight(alpha: float, i: int) -> float:
    """log of alpha_weight(alpha, i); positive arguments throughout."""
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha weights are defined for alpha in (0, 1)")
    if i < 1:
        raise DomainError("the weight index must be >= 1")
    return (
        math.log(alpha)
        + log_ascending_factorial(1.0 - alpha, i - 1).log_magnitude
        - log_factorial(i)
    )


def alpha_weight(alpha: float, i: int) -> float:
    """The size-biased weight sequence w_i = alpha * (1-alpha)_(i-1) / i!.

    w_1 = alpha, and w_{i+1} / w_i = (i - alpha) / (i + 1); the sequence sums
    to 1 over i >= 1 with a heavy i^{-(1+alpha)} tail.
    """
    return math.exp(log_alpha_weight(alpha, i))


def neg_bin_pmf(n: int, theta: float, b: float) -> float:
    """Negative-binomial pmf  theta_(n) / n! * (1-b)^theta * b^n  (theta > 0)."""
    if theta <= 0.0:
        raise DomainError("the negative-binomial shape theta must be > 0")
    if not 0.0 <= b < 1.0:
        raise DomainError("the negative-binomial parameter b must lie in [0, 1)")
    if n < 0:
        raise DomainError("the count must be >= 0")
    if b == 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(
        log_ascending_factorial(theta, n).log_magnitude
        - log_factorial(n)
        + theta * math.log1p(-b)
        + n * math.log(b)
    )


def poisson_pmf(x: int, rate: float) -> float:
    """Poisson pmf; a zero rate degenerates to a point mass at 0."""
    if rate < 0.0:
        raise DomainError("the Poisson rate must be >= 0")
    if x < 0:
        raise DomainError("the count must be >= 0")
    if rate == 0.0:
        return 1.0 if x == 0 else 0.0
    return math.exp(x * math.log(rate) - rate - log_factorial(x))


def nbin_time_param(mu: float, t: float) -> float:
    """Success parameter b(t) of the negative-binomial size marginal.

    b(t) = (e^{(1-mu) t} - 1) / (e^{(1-mu) t} - mu) for mu != 1 and
    t / (1 + t) at mu = 1; the branch switches within 1e-8 of mu = 1, where
    the two expressions agree to the same order.  b(0) = 0, b is increasing
    in t, and for mu > 1 it climbs to 1/mu.
    """
    if mu < 0.0:
        raise DomainError("mu must be >= 0")
    if t < 0.0:
        raise DomainError("time must be >= 0")
    if t == 0.0:
        return 0.0
    if abs(mu - 1.0) < 1e-8:
        return t / (1.0 + t)
    if mu > 1.0:
        x = math.exp((1.0 - mu) * t)  # in (0, 1]
        return (1.0 - x) / (mu - x)
    x = math.exp(-(1.0 - mu) * t)  # in (0, 1]
    b = (1.0 - x) / (1.0 - mu * x)
    # keep the advertised range [0, 1) when the float quotient rounds to 1
    return min(b, math.nextafter(1.0, 0.0))


def poisson_product_prob(m: "AllelicPartition", theta: float, b: float) -> float:
    """Probability of ``m`` under independent Poisson multiplicities.

    m_i ~ Poisson(theta * b^i / i) independently over all i >= 1.  The
    infinite product of the vacancy factors e^{-theta b^i / i} collapses to
    (1-b)^theta, so only stored entries contribute beyond that.
    """
    if theta <= 0.0:
        raise DomainError("the Poisson-product law requires theta > 0")
    if not 0.0 <= b < 1.0:
        raise DomainError("b must lie in [0, 1)")
    if b == 0.0:
        return 1.0 if m.size == 0 else 0.0
    log_p = theta * math.log1p(-b)
    log_theta, log_b = math.log(theta), math.log(b)
    for i, mi in m:
        log_p += mi * (log_theta + i * log_b - math.log(i)) - log_factorial(mi)
    return math.exp(log_p)
