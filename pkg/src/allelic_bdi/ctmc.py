"""Continuous-time dynamics on allelic partitions.

Three engines share one event vocabulary:

* ``simulate`` - Gillespie simulation of the multiplicity-level chain, whose
  rates from state m are theta + alpha * k(m) for a new family,
  (i - alpha) * m_i for growth of a size-i group and mu * i * m_i for a death
  in one, for a total jump rate of theta + (1 + mu) * s(m).
* ``simulate_bdi`` - the population-size process alone (birth theta + n,
  death mu * n), a plain integer birth-death-immigration chain.
* ``simulate_branching`` - an individual-level construction: unit-rate
  reproduction with the oldest member of each family founding a new family
  with probability alpha, exponential(mu) lifetimes, and immigration at rate
  theta.  It emits the induced multiplicity-level trajectory, which has the
  same law as ``simulate``.

From the empty state with theta <= 0 every engine has total rate zero and
returns an eventless trajectory; starting such runs is refused at the CLI
level instead.
"""

from __future__ import annotations

import io
from bisect import bisect_right
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Mapping

import numpy as np

from . import __version__ as _pkg_version
from .errors import DomainError, RunawayError
from .formulae import ModelParams
from .partitions import AllelicPartition, EventKind, TransitionEvent

DEFAULT_MAX_EVENTS = 10**8


def _event_weights(counts: dict[int, int], num_groups: int, params: ModelParams):
    """Yield (kind, index, weight) in the fixed selection order.

    The new-family weight theta + alpha * k is emitted only when positive;
    with k >= 1 it cannot be negative on the valid parameter range, and at
    the empty state a nonpositive value means the chain is frozen.
    """
    new_family = params.theta + params.alpha * num_groups
    if num_groups:
        assert new_family >= 0.0
    if new_family > 0.0:
        yield EventKind.NEW_FAMILY, None, new_family
    sizes = sorted(counts)
    alpha = params.alpha
    for i in sizes:
        yield EventKind.GROWTH, i, (i - alpha) * counts[i]
    if params.mu > 0.0:
        mu = params.mu
        for i in sizes:
            yield EventKind.DEATH, i, mu * i * counts[i]


def rates(m: AllelicPartition, params: ModelParams) -> list[tuple[TransitionEvent, float]]:
    """Positive-rate transition table from state ``m``.

    The rates sum to theta + (1 + mu) * s(m) whenever the new-family rate is
    positive; with mu = 0 no death events appear.
    """
    return [
        (TransitionEvent(kind, index), w)
        for kind, index, w in _event_weights(m.as_dict(), m.num_groups, params)
        if w > 0.0
    ]


def size_process_rates(n: int, params: ModelParams) -> tuple[float, float]:
    """(birth rate, death rate) of the size process at population ``n``."""
    if n < 0:
        raise DomainError("population size must be >= 0")
    return params.theta + n, params.mu * n


@dataclass(frozen=True)
class Trajectory:
    """A finite piece of one sample path of the multiplicity-level chain.

    ``events`` holds (jump time, event) pairs with strictly increasing times
    in (0, horizon]; the state at any time is recovered by replaying them
    from ``initial``.
    """

    initial: AllelicPartition
    events: tuple[tuple[float, TransitionEvent], ...]
    horizon: float

    def __post_init__(self):
        if self.horizon < 0.0:
            raise DomainError("the horizon must be >= 0")
        prev = 0.0
        for t, _ in self.events:
            if not t > prev:
                raise DomainError("jump times must be strictly increasing and positive")
            prev = t
        if self.events and self.events[-1][0] > self.horizon:
            raise DomainError("jump times must not exceed the horizon")

    def __len__(self) -> int:
        return len(self.events)

    def _replay(self) -> Iterator[tuple[float, AllelicPartition]]:
        state = self.initial
        yield 0.0, state
        for t, ev in self.events:
            state = state.apply_event(ev)
            yield t, state

    def state_at(self, t: float) -> AllelicPartition:
        if not 0.0 <= t <= self.horizon:
            raise DomainError(f"query time {t} outside [0, {self.horizon}]")
        state = self.initial
        for tau, ev in self.events:
            if tau > t:
                break
            state = state.apply_event(ev)
        return state

    def final_state(self) -> AllelicPartition:
        state = None
        for _, state in self._replay():
            pass
        return state

    def iter_states(self) -> Iterator[tuple[float, AllelicPartition]]:
        """(time, state) pairs starting with (0, initial)."""
        return self._replay()


@dataclass(frozen=True)
class SizeTrajectory:
    """Sample path of the integer size process: values after each jump."""

    times: tuple[float, ...]
    values: tuple[int, ...]
    horizon: float
    initial: int = 0

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise DomainError("times and values must have equal length")
        prev = 0.0
        for t in self.times:
            if not t > prev:
                raise DomainError("jump times must be strictly increasing and positive")
            prev = t
        if self.times and self.times[-1] > self.horizon:
            raise DomainError("jump times must not exceed the horizon")

    def value_at(self, t: float) -> int:
        if not 0.0 <= t <= self.horizon:
            raise DomainError(f"query time {t} outside [0, {self.horizon}]")
        idx = bisect_right(self.times, t)
        return self.initial if idx == 0 else self.values[idx - 1]

    @property
    def final_value(self) -> int:
        return self.values[-1] if self.values else self.initial

    def occupation(self, burn_in: float = 0.0) -> dict[int, float]:
        """Time spent in each value on (burn_in, horizon]."""
        if not 0.0 <= burn_in < self.horizon:
            raise DomainError("burn_in must lie in [0, horizon)")
        out: dict[int, float] = {}
        t_prev, v_prev = 0.0, self.initial
        for t, v in zip(self.times + (self.horizon,), self.values + (self.final_value,)):
            lo, hi = max(t_prev, burn_in), t
            if hi > lo:
                out[v_prev] = out.get(v_prev, 0.0) + (hi - lo)
            t_prev, v_prev = t, v
        return out


def _runaway(engine: str, events: int, t: float, cap: int) -> RunawayError:
    return RunawayError(
        f"{engine} run exceeded the event cap of {cap} at simulated time {t:.6g}",
        events=events,
        time=t,
    )


def simulate(
    params: ModelParams,
    t_end: float,
    rng: np.random.Generator,
    *,
    initial: AllelicPartition | None = None,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> Trajectory:
    """Gillespie simulation of the multiplicity-level chain on [0, t_end].

    Starts from the empty state unless ``initial`` is given.  The total jump
    rate theta + (1 + mu) * s is updated in O(1) from the running size; event
    selection walks the sparse support (new family, then growth and death by
    increasing group size).  Exceeding ``max_events`` raises
    :class:`RunawayError`.
    """
    if t_end < 0.0:
        raise DomainError("t_end must be >= 0")
    start = AllelicPartition.empty() if initial is None else initial
    counts = start.as_dict()
    s, k = start.size, start.num_groups
    theta, mu = params.theta, params.mu
    t = 0.0
    events: list[tuple[float, TransitionEvent]] = []
    while True:
        total = theta + (1.0 + mu) * s if s else (theta if theta > 0.0 else 0.0)
        if total <= 0.0:
            break
        dt = rng.exponential(1.0 / total)
        if t + dt > t_end:
            break
        t += dt
        if len(events) >= max_events:
            raise _runaway("multiplicity", len(events), t, max_events)
        u = rng.random() * total
        acc = 0.0
        kind = index = None
        for kind, index, w in _event_weights(counts, k, params):
            acc += w
            if u < acc:
                break
        # on accumulated round-off the walk falls through to the last event
        if kind is EventKind.NEW_FAMILY:
            counts[1] = counts.get(1, 0) + 1
            s += 1
            k += 1
        elif kind is EventKind.GROWTH:
            if counts[index] == 1:
                del counts[index]
            else:
                counts[index] -= 1
            counts[index + 1] = counts.get(index + 1, 0) + 1
            s += 1
        else:
            if counts[index] == 1:
                del counts[index]
            else:
                counts[index] -= 1
            if index > 1:
                counts[index - 1] = counts.get(index - 1, 0) + 1
            else:
                k -= 1
            s -= 1
        events.append((t, TransitionEvent(kind, index)))
    return Trajectory(start, tuple(events), t_end)


def simulate_bdi(
    params: ModelParams,
    t_end: float,
    rng: np.random.Generator,
    *,
    initial: int = 0,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> SizeTrajectory:
    """Simulate the size process alone (birth theta + n, death mu * n)."""
    if t_end < 0.0:
        raise DomainError("t_end must be >= 0")
    if initial < 0:
        raise DomainError("the initial size must be >= 0")
    theta, mu = params.theta, params.mu
    n = initial
    t = 0.0
    times: list[float] = []
    values: list[int] = []
    while True:
        birth = theta + n if (n or theta > 0.0) else 0.0
        total = birth + mu * n
        if total <= 0.0:
            break
        dt = rng.exponential(1.0 / total)
        if t + dt > t_end:
            break
        t += dt
        if len(times) >= max_events:
            raise _runaway("size-process", len(times), t, max_events)
        n = n + 1 if rng.random() * total < birth else n - 1
        times.append(t)
        values.append(n)
    return SizeTrajectory(tuple(times), tuple(values), t_end, initial)


class AgentPopulation:
    """Individual-level population state for the branching construction.

    Families are lists of member birth times in increasing order, so index 0
    is each family's oldest living member.  With theta > 0 immigrants found
    families at rate theta and every member reproduces at unit rate, the
    offspring of a family's oldest member founding a new family with
    probability alpha.  With theta in (-alpha, 0] there is no immigration;
    instead the population's overall oldest member produces joiners at rate
    1 - alpha and founders at rate alpha + theta.  Either way the induced
    rates aggregate to the multiplicity-level table of :func:`rates`.
    """

    __slots__ = ("families",)

    def __init__(self, families: Iterable[Iterable[float]] = ()):
        self.families: list[list[float]] = []
        for fam in families:
            members = [float(b) for b in fam]
            if not members:
                raise DomainError("families must be nonempty")
            if any(b2 <= b1 for b1, b2 in zip(members, members[1:])):
                raise DomainError("member birth times must be strictly increasing")
            self.families.append(members)

    @classmethod
    def from_group_sizes(cls, sizes: Iterable[int]) -> "AgentPopulation":
        """A population with the given family sizes and distinct past birth times."""
        pop = cls()
        clock = 0.0
        for size in sizes:
            if size < 1:
                raise DomainError("family sizes must be >= 1")
            clock -= size
            pop.families.append([clock + j for j in range(size)])
        return pop

    @property
    def size(self) -> int:
        return sum(len(f) for f in self.families)

    @property
    def num_groups(self) -> int:
        return len(self.families)

    def family_sizes(self) -> list[int]:
        return [len(f) for f in self.families]

    def to_partition(self) -> AllelicPartition:
        return AllelicPartition.from_group_sizes(self.family_sizes())

    def oldest_family(self) -> int:
        """Index of the family holding the population's oldest member."""
        if not self.families:
            raise DomainError("the population is empty")
        return min(range(len(self.families)), key=lambda fi: self.families[fi][0])

    def locate(self, idx: int) -> tuple[int, int]:
        """(family, position) of the idx-th individual in family-list order."""
        if idx < 0:
            raise DomainError("individual index must be >= 0")
        for fi, fam in enumerate(self.families):
            if idx < len(fam):
                return fi, idx
            idx -= len(fam)
        raise DomainError("individual index beyond population size")

    def event_rates(self, params: ModelParams) -> list[tuple[TransitionEvent, float]]:
        """Multiplicity-level rate table induced by the per-individual clocks.

        Built by summing individual contributions (not by delegating to
        :func:`rates`), so tests can confirm the two constructions agree.
        """
        theta, alpha, mu = params.theta, params.alpha, params.mu
        new_family = theta if theta > 0.0 else 0.0
        growth: dict[int, float] = {}
        death: dict[int, float] = {}
        oldest = self.oldest_family() if self.families and theta <= 0.0 else None
        for fi, fam in enumerate(self.families):
            i = len(fam)
            if mu > 0.0:
                death[i] = death.get(i, 0.0) + mu * i
            growth[i] = growth.get(i, 0.0) + (i - 1)  # non-oldest members always join
            growth[i] += 1.0 - alpha  # the family's oldest joins at rate 1 - alpha
            if fi == oldest:
                new_family += alpha + theta  # overall-oldest founds at rate alpha + theta
            else:
                new_family += alpha
        out: list[tuple[TransitionEvent, float]] = []
        if new_family > 0.0:
            out.append((TransitionEvent.new_family(), new_family))
        out.extend((TransitionEvent.growth(i), w) for i, w in sorted(growth.items()) if w > 0.0)
        out.extend((TransitionEvent.death(i), w) for i, w in sorted(death.items()) if w > 0.0)
        return out


def simulate_branching(
    params: ModelParams,
    t_end: float,
    rng: np.random.Generator,
    *,
    initial: AgentPopulation | None = None,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> Trajectory:
    """Simulate the individual-level construction, emitting partition events.

    Deaths use a single exponential clock at the aggregate rate mu * s plus a
    uniform victim, and births one at the aggregate birth rate plus a
    weighted parent choice, which is distributionally identical to
    per-individual clocks.  The returned trajectory has the same law as the
    one produced by :func:`simulate`.
    """
    if t_end < 0.0:
        raise DomainError("t_end must be >= 0")
    pop = AgentPopulation() if initial is None else AgentPopulation(initial.families)
    start = pop.to_partition()
    theta, alpha, mu = params.theta, params.alpha, params.mu
    t = 0.0
    events: list[tuple[float, TransitionEvent]] = []
    while True:
        s = pop.size
        if theta > 0.0:
            immigration = theta
            birth_total = float(s)
        else:
            immigration = 0.0
            birth_total = s + theta if s else 0.0  # overall oldest births at rate 1 + theta
        total = immigration + birth_total + mu * s
        if total <= 0.0:
            break
        dt = rng.exponential(1.0 / total)
        if t + dt > t_end:
            break
        t += dt
        if len(events) >= max_events:
            raise _runaway("branching", len(events), t, max_events)
        u = rng.random() * total
        if u < immigration:
            pop.families.append([t])
            event = TransitionEvent.new_family()
        elif u < immigration + birth_total:
            v = u - immigration
            if theta > 0.0:
                fi, pos = pop.locate(min(s - 1, int(v)))
            else:
                fi, pos = _weighted_parent(pop, v, theta)
            fam = pop.families[fi]
            i = len(fam)
            if pos == 0:
                if theta > 0.0 or fi != pop.oldest_family():
                    p_new = alpha
                else:
                    p_new = (alpha + theta) / (1.0 + theta)
            else:
                p_new = 0.0
            if p_new > 0.0 and rng.random() < p_new:
                pop.families.append([t])
                event = TransitionEvent.new_family()
            else:
                fam.append(t)
                event = TransitionEvent.growth(i)
        else:
            v = u - immigration - birth_total
            fi, pos = pop.locate(min(s - 1, int(v / mu)))
            fam = pop.families[fi]
            i = len(fam)
            del fam[pos]
            if not fam:
                del pop.families[fi]
            event = TransitionEvent.death(i)
        events.append((t, event))
    return Trajectory(start, tuple(events), t_end)


def _weighted_parent(pop: AgentPopulation, v: float, theta: float) -> tuple[int, int]:
    # theta <= 0: every individual reproduces at unit rate except the overall
    # oldest, whose rate is 1 + theta
    oldest = pop.oldest_family()
    acc = 0.0
    last = (0, 0)
    for fi, fam in enumerate(pop.families):
        for pos in range(len(fam)):
            acc += 1.0 + theta if (fi == oldest and pos == 0) else 1.0
            last = (fi, pos)
            if v < acc:
                return fi, pos
    return last


def write_trajectory_csv(
    trajectory: Trajectory,
    file: str | IO[str],
    *,
    params: ModelParams | None = None,
    seed: int | None = None,
    metadata: Mapping[str, object] | None = None,
) -> None:
    """Write a trajectory as CSV with a commented metadata header.

    Columns are time, event_kind, event_index (empty for new-family events)
    and the population size and group count after the event.
    """
    own = isinstance(file, str)
    fh: IO[str] = open(file, "w", newline="") if own else file
    try:
        meta: dict[str, object] = {"artifact": "allelic-bdi", "version": _pkg_version}
        if params is not None:
            meta.update(alpha=params.alpha, theta=params.theta, mu=params.mu)
        if seed is not None:
            meta["seed"] = seed
        meta["horizon"] = trajectory.horizon
        meta["initial"] = trajectory.initial.encode()
        if metadata:
            meta.update(metadata)
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        fh.write("time,event_kind,event_index,s,k\n")
        states = trajectory.iter_states()
        next(states)  # skip the initial state row
        for (t, ev), (_, state) in zip(trajectory.events, states):
            idx = "" if ev.index is None else str(ev.index)
            fh.write(f"{t!r},{ev.kind.value},{idx},{state.size},{state.num_groups}\n")
    finally:
        if own:
            fh.close()
