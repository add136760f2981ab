"""Preemptive single-server scheduling disciplines as pure state machines.

Seven policies: srpt, fifo, ps, fb, mlf, rmlf, ermlf.  All are blind (they
never see job sizes) except SRPT, whose state alone carries remaining work.
The multilevel-feedback family keeps jobs in priority queues and demotes a
job one level each time its attained service reaches a randomized target.

The driving loop (see simulator) interacts with a policy through:

    arrival(jid, t[, size])   new job released; size only for non-blind
    completion(jid)           job finished, remove it
    alloc()                   current allocation {jid: rate}, sum <= 1
    internal_gap(alloc)       (dt, jid) until the policy changes allocation
                              on its own (target hit / share crossing)
    internal_event(jid)       apply the event announced by the immediately
                              preceding internal_gap call
    advance(dt, alloc)        credit dt * rate of attained service
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .distributions import RandomStream
from .errors import InternalConsistencyError, ParameterError

THETA = 12.0

# Attained-service values of jobs sharing a processor stay bitwise equal by
# construction; the tolerance below is a guard, not a load-bearing quantity.
TIE_TOL = 1e-9


@dataclass(frozen=True)
class BetaFactor:
    """Randomized target multiplier of one job: factor = max(1, 2 - beta)."""
    j: int
    beta: float        # +inf for j = 1 (degenerate rate theta * ln 1 = 0)
    factor: float      # always in [1, 2]


def beta_from_uniform(j: int, u: float) -> BetaFactor:
    """Inverse-CDF draw of beta with P(beta <= x) = 1 - exp(-theta x ln j)."""
    if j < 1:
        raise ParameterError(f"job index must be >= 1, got {j}")
    if j == 1:
        return BetaFactor(1, math.inf, 1.0)
    beta = -math.log1p(-u) / (THETA * math.log(j))
    return BetaFactor(j, beta, max(1.0, 2.0 - beta))


def draw_beta(j: int, stream: RandomStream) -> BetaFactor:
    # Always consumes exactly one uniform, including j = 1, so that coupled
    # runs stay aligned draw-for-draw with the job index.
    return beta_from_uniform(j, stream.uniform())


def mlf_target(level: int, factor) -> float:
    """Service target 2**level * factor; level may be negative."""
    f = factor.factor if isinstance(factor, BetaFactor) else float(factor)
    return math.ldexp(f, level)


def lowest_unreached_level(attained: float, factor: float) -> int:
    """min{z : attained <= 2**z * factor}; exact via frexp, no logarithms."""
    if attained <= 0:
        raise InternalConsistencyError("displaced job has no attained service")
    m, e = math.frexp(attained / factor)
    return e - 1 if m == 0.5 else e


def star_exit_level(attained: float, factor: float) -> int:
    """Destination log2(attained/factor) + 1; must be an integer."""
    lg = math.log2(attained / factor)
    k = round(lg)
    if abs(lg - k) > 1e-9:
        raise InternalConsistencyError(
            f"star target {attained!r} is not a power of two multiple of {factor!r}")
    return k + 1


# --- decision rules exposed as plain functions for direct testing ----------

def srpt_decision(active) -> int | None:
    """active: iterable of (id, remaining, release); least remaining wins,
    ties broken by earlier release, then smaller id."""
    best = None
    for jid, rem, rel in active:
        key = (rem, rel, jid)
        if best is None or key < best:
            best = key
    return None if best is None else best[2]


def fifo_decision(active) -> int | None:
    """active: iterable of (id, release); earliest release wins."""
    best = None
    for jid, rel in active:
        key = (rel, jid)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]


def share_rates(policy: str, attained: dict[int, float]) -> dict[int, float]:
    """PS: 1/k each.  FB: equal split over the least-attained set."""
    if not attained:
        return {}
    if policy == "ps":
        r = 1.0 / len(attained)
        return {j: r for j in attained}
    if policy == "fb":
        m = min(attained.values())
        tie = [j for j, a in attained.items() if a <= m + TIE_TOL]
        r = 1.0 / len(tie)
        return {j: r for j in tie}
    raise ParameterError(f"share_rates expects 'ps' or 'fb', got {policy!r}")


# --- policy state machines ---------------------------------------------------

class Policy:
    name = "?"
    blind = True

    def arrival(self, jid: int, t: float) -> None:
        raise NotImplementedError

    def completion(self, jid: int) -> None:
        raise NotImplementedError

    def alloc(self) -> dict[int, float]:
        raise NotImplementedError

    def internal_gap(self, alloc) -> tuple[float, int] | None:
        return None

    def internal_event(self, jid: int) -> None:
        raise InternalConsistencyError(f"{self.name} has no internal events")

    def advance(self, dt: float, alloc) -> None:
        pass


class Srpt(Policy):
    name = "srpt"
    blind = False

    def __init__(self):
        self.jobs: dict[int, list[float]] = {}  # jid -> [remaining, release]

    def arrival(self, jid, t, size):
        self.jobs[jid] = [size, t]

    def completion(self, jid):
        del self.jobs[jid]

    def alloc(self):
        jid = srpt_decision((j, rs[0], rs[1]) for j, rs in self.jobs.items())
        return {} if jid is None else {jid: 1.0}

    def advance(self, dt, alloc):
        for jid in alloc:
            self.jobs[jid][0] -= dt


class Fifo(Policy):
    name = "fifo"

    def __init__(self):
        self.order: deque[int] = deque()  # arrival order == release order

    def arrival(self, jid, t):
        self.order.append(jid)

    def completion(self, jid):
        if not self.order or self.order[0] != jid:
            raise InternalConsistencyError("FIFO completion out of order")
        self.order.popleft()

    def alloc(self):
        return {self.order[0]: 1.0} if self.order else {}


class Ps(Policy):
    name = "ps"

    def __init__(self):
        self.active: set[int] = set()

    def arrival(self, jid, t):
        self.active.add(jid)

    def completion(self, jid):
        self.active.remove(jid)

    def alloc(self):
        if not self.active:
            return {}
        r = 1.0 / len(self.active)
        return {j: r for j in self.active}


class Fb(Policy):
    """Foreground-background: serve the least-attained set, shared equally."""

    name = "fb"

    def __init__(self):
        self.attained: dict[int, float] = {}
        self._pending_level: float | None = None

    def arrival(self, jid, t):
        self.attained[jid] = 0.0

    def completion(self, jid):
        del self.attained[jid]

    def alloc(self):
        return share_rates("fb", self.attained)

    def internal_gap(self, alloc):
        # Time until the serving tie set catches up with the next attained
        # level; the set then expands (allocation change, no queue event).
        if not alloc:
            return None
        m = self.attained[next(iter(alloc))]
        nxt = None
        for j, a in self.attained.items():
            if j not in alloc and (nxt is None or a < nxt):
                nxt = a
        if nxt is None:
            return None
        self._pending_level = nxt
        rep = min(alloc)
        return (nxt - m) * len(alloc), rep

    def internal_event(self, jid):
        # Snap the advanced group onto the level it just reached so that the
        # enlarged tie set is bitwise equal.
        lvl = self._pending_level
        if lvl is None:
            raise InternalConsistencyError("FB crossing without a pending level")
        for j, a in self.attained.items():
            if abs(a - lvl) <= TIE_TOL:
                self.attained[j] = lvl
        self._pending_level = None

    def advance(self, dt, alloc):
        if not alloc:
            return
        k = len(alloc)
        base = self.attained[next(iter(alloc))]
        new = base + dt / k
        for j in alloc:
            self.attained[j] = new


class _MlfJob:
    __slots__ = ("attained", "level", "target", "factor")

    def __init__(self, factor: float, level: int, target: float):
        self.attained = 0.0
        self.level = level
        self.target = target
        self.factor = factor


class Rmlf(Policy):
    """Randomized multilevel feedback over queues Q0, Q1, ...

    Always runs the front of the lowest non-empty queue.  A new job enters
    the back of Q0 with target 2**0 * factor; on reaching its target a job
    moves down one queue and the target doubles.
    """

    name = "rmlf"

    def __init__(self, stream: RandomStream | None = None):
        if stream is None:
            raise ParameterError(f"{self.name} requires a random stream")
        self.stream = stream
        self.queues: dict[int, deque[int]] = {}
        self.jobs: dict[int, _MlfJob] = {}

    def _factor(self, jid: int) -> float:
        return draw_beta(jid, self.stream).factor

    def arrival(self, jid, t):
        f = self._factor(jid)
        self.jobs[jid] = _MlfJob(f, 0, f)
        self.queues.setdefault(0, deque()).append(jid)

    def _pop_front(self, jid):
        level = self.jobs[jid].level
        q = self.queues[level]
        if q[0] != jid:
            raise InternalConsistencyError(f"job {jid} is not at the front of Q{level}")
        q.popleft()
        if not q:
            del self.queues[level]

    def completion(self, jid):
        self._pop_front(jid)
        del self.jobs[jid]

    def alloc(self):
        if not self.queues:
            return {}
        z = min(self.queues)
        return {self.queues[z][0]: 1.0}

    def internal_gap(self, alloc):
        for jid in alloc:
            job = self.jobs[jid]
            return job.target - job.attained, jid
        return None

    def internal_event(self, jid):
        job = self.jobs[jid]
        self._pop_front(jid)
        job.attained = job.target  # exact landing on the target
        job.level += 1
        job.target *= 2.0
        self.queues.setdefault(job.level, deque()).append(jid)

    def advance(self, dt, alloc):
        for jid in alloc:
            self.jobs[jid].attained += dt

    def order_snapshot(self) -> list[int]:
        """Job ids from highest queue to lowest, front to back."""
        seq: list[int] = []
        for z in sorted(self.queues, reverse=True):
            seq.extend(self.queues[z])
        return seq


class Mlf(Rmlf):
    """Deterministic multilevel feedback: every factor forced to 2, so the
    targets are exactly 2**(i+1).  Consumes no randomness."""

    name = "mlf"

    def __init__(self, stream=None):
        super().__init__(stream=stream or _NULL_STREAM)

    def _factor(self, jid):
        return 2.0


class _NullStream:
    def uniform(self):  # pragma: no cover - never drawn by Mlf
        raise InternalConsistencyError("mlf must not consume randomness")


_NULL_STREAM = _NullStream()


class Ermlf(Policy):
    """RMLF extended to arbitrarily small job sizes.

    Queues Q_z for all integers z plus a one-slot queue for the most recent
    arrival, which is served at top priority until it completes, reaches its
    initial target, or is displaced by the next arrival.
    """

    name = "ermlf"

    def __init__(self, stream: RandomStream | None = None):
        if stream is None:
            raise ParameterError("ermlf requires a random stream")
        self.stream = stream
        self.queues: dict[int, deque[int]] = {}
        self.star: int | None = None
        self.jobs: dict[int, _MlfJob] = {}

    def arrival(self, jid, t):
        f = draw_beta(jid, self.stream).factor
        if self.star is not None:
            prev = self.star
            if prev != jid - 1:
                raise InternalConsistencyError(
                    f"star slot held {prev}, expected most recent arrival {jid - 1}")
            pj = self.jobs[prev]
            z = lowest_unreached_level(pj.attained, pj.factor)
            pj.level = z
            pj.target = math.ldexp(pj.factor, z)
            self.queues.setdefault(z, deque()).append(prev)
            self.star = None
            if min(self.queues) != z:
                raise InternalConsistencyError("order preservation violated on displacement")
        if self.queues:
            zstar = min(self.queues)
            target = math.ldexp(f, zstar - 1)
        else:
            target = f  # empty system: initial target 2**0 * factor
        job = _MlfJob(f, 0, target)
        job.level = None
        self.jobs[jid] = job
        self.star = jid

    def completion(self, jid):
        if self.star == jid:
            self.star = None
        else:
            self._pop_front(jid)
        del self.jobs[jid]

    def _pop_front(self, jid):
        level = self.jobs[jid].level
        q = self.queues[level]
        if q[0] != jid:
            raise InternalConsistencyError(f"job {jid} is not at the front of Q{level}")
        q.popleft()
        if not q:
            del self.queues[level]

    def alloc(self):
        if self.star is not None:
            return {self.star: 1.0}
        if not self.queues:
            return {}
        z = min(self.queues)
        return {self.queues[z][0]: 1.0}

    def internal_gap(self, alloc):
        for jid in alloc:
            job = self.jobs[jid]
            return job.target - job.attained, jid
        return None

    def internal_event(self, jid):
        job = self.jobs[jid]
        job.attained = job.target
        if self.star == jid:
            dest = star_exit_level(job.attained, job.factor)
            self.star = None
        else:
            self._pop_front(jid)
            dest = job.level + 1
        job.level = dest
        job.target *= 2.0
        self.queues.setdefault(dest, deque()).append(jid)

    def advance(self, dt, alloc):
        for jid in alloc:
            self.jobs[jid].attained += dt

    def order_snapshot(self) -> list[int]:
        seq: list[int] = []
        for z in sorted(self.queues, reverse=True):
            seq.extend(self.queues[z])
        if self.star is not None:
            seq.append(self.star)
        return seq


def verify_order_invariant(policy) -> None:
    """Raise if an older unfinished job sits in a lower queue than a younger
    one, or behind it within the same queue."""
    seq = policy.order_snapshot()
    for a, b in zip(seq, seq[1:]):
        if a >= b:
            raise InternalConsistencyError(f"queue order violated: {seq}")


POLICY_NAMES = ("srpt", "fifo", "ps", "fb", "mlf", "rmlf", "ermlf")

_CONSTRUCTORS = {
    "srpt": lambda stream: Srpt(),
    "fifo": lambda stream: Fifo(),
    "ps": lambda stream: Ps(),
    "fb": lambda stream: Fb(),
    "mlf": lambda stream: Mlf(),
    "rmlf": Rmlf,
    "ermlf": Ermlf,
}


def make_policy(name: str, stream: RandomStream | None = None) -> Policy:
    try:
        ctor = _CONSTRUCTORS[name.lower()]
    except KeyError:
        raise ParameterError(
            f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}") from None
    return ctor(stream)
