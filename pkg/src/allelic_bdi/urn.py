"""Sequential urn construction of the two-parameter sampling formula.

One urn step takes a partition of n to a partition of n + 1: a new singleton
group appears with probability (theta + alpha * k) / (theta + n), and an
existing group of size i grows with probability (i - alpha) * m_i /
(theta + n).  After n steps from the empty state the partition is distributed
exactly by the Pitman sampling formula; alpha = 0 recovers the Hoppe urn and
the Ewens formula.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .formulae import ModelParams
from .partitions import AllelicPartition, TransitionEvent

_BLOCK = 1 << 14


def _check_urn_params(params: ModelParams) -> None:
    if params.alpha == 0.0 and params.theta <= 0.0:
        raise DomainError("the urn with alpha = 0 requires theta > 0")


def urn_step_distribution(
    m: AllelicPartition, params: ModelParams
) -> list[tuple[TransitionEvent, float]]:
    """Distribution of the next urn move from ``m``.

    Returned in a fixed order: the new-family event first, then growth events
    by increasing group size.  From the empty state the first move is a new
    family with probability one (for theta <= 0 the generic normalizer
    theta + s(m) would be nonpositive there, so the case is taken literally).
    """
    _check_urn_params(params)
    if m.size == 0:
        return [(TransitionEvent.new_family(), 1.0)]
    denom = params.theta + m.size  # > 0: size >= 1 and theta > -alpha > -1
    out = [(TransitionEvent.new_family(), (params.theta + params.alpha * m.num_groups) / denom)]
    for i, c in m:
        out.append((TransitionEvent.growth(i), (i - params.alpha) * c / denom))
    return out


def sample_psf(n: int, params: ModelParams, rng: np.random.Generator) -> AllelicPartition:
    """Draw one partition of size ``n`` by running the urn ``n`` steps."""
    if n < 1:
        raise DomainError("the sample size must be >= 1")
    _check_urn_params(params)
    m = AllelicPartition.empty()
    for _ in range(n):
        choices = urn_step_distribution(m, params)
        u = rng.random()
        acc = 0.0
        event = choices[-1][0]  # guard against u landing on accumulated round-off
        for ev, p in choices:
            acc += p
            if u < acc:
                event = ev
                break
        m = m.apply_event(event)
    return m


def default_checkpoints(n_max: int) -> tuple[int, ...]:
    """Geometric checkpoint grid ceil(10^{j/4}) <= n_max, always ending at n_max."""
    points = set()
    j = 0
    while True:
        n = math.ceil(10.0 ** (j / 4.0))
        if n > n_max:
            break
        points.add(n)
        j += 1
    points.add(n_max)
    return tuple(sorted(points))


def group_count_trace(
    n_max: int,
    params: ModelParams,
    rng: np.random.Generator,
    checkpoints: tuple[int, ...] | None = None,
) -> list[tuple[int, int]]:
    """Group counts (n, k_n) along one urn run, recorded at checkpoints.

    Only the pair (sample size, group count) is tracked: under the urn the
    group count is itself a Markov chain (a new group forms with probability
    (theta + alpha * k) / (theta + n) regardless of how the current groups
    are sized), so the full partition never needs to be materialized and runs
    to n = 10^5 and beyond stay cheap.
    """
    if n_max < 10:
        raise DomainError("the trace needs n_max >= 10")
    _check_urn_params(params)
    marks = default_checkpoints(n_max) if checkpoints is None else tuple(sorted(set(checkpoints)))
    if marks and (marks[0] < 1 or marks[-1] > n_max):
        raise DomainError("checkpoints must lie in [1, n_max]")
    mark_set = set(marks)
    theta, alpha = params.theta, params.alpha
    out = []
    k = 0
    block = rng.random(_BLOCK)
    bi = 0
    for n in range(n_max):
        if bi == len(block):
            block = rng.random(_BLOCK)
            bi = 0
        u = block[bi]
        bi += 1
        if n == 0:  # forced new group from the empty urn
            k = 1
        elif u * (theta + n) < theta + alpha * k:
            k += 1
        if (n + 1) in mark_set:
            out.append((n + 1, k))
    return out
