"""Event-driven execution of a policy on an instance.

Continuous time is advanced event-to-event; between events priority policies
serve one job at unit rate and sharing policies serve per their share map.
Candidate events within EVENT_SNAP of the earliest one are treated as
coincident and dispatched in the order completion < target hit < arrival
(a job whose remaining work and target gap vanish together completes, it
does not migrate).  State landed on by an event is snapped exactly (remaining
to zero, attained to the target), so scaling an instance by a power of two
scales every simulated time exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .distributions import POLICY_SUBSTREAM, make_stream
from .errors import InternalConsistencyError, ParameterError
from .instance import Instance
from .policies import Policy, make_policy

EVENT_SNAP = 1e-9

_COMPLETION, _TARGET, _ARRIVAL = 0, 1, 2
_KIND_NAMES = ("completion", "target", "arrival")


class SimCycle(NamedTuple):
    first_job_id: int
    last_job_id: int
    N: int
    P: float
    I: float | None
    start: float
    end: float
    sojourn_sum: float


@dataclass
class SimResult:
    policy: str
    seed: int | None
    releases: np.ndarray
    sizes: np.ndarray
    completions: np.ndarray
    sojourns: np.ndarray
    work_at_arrival: np.ndarray   # workload found by each arrival, own size excluded
    cycles: list[SimCycle]
    rho: float | None = None
    mu: float | None = None

    def total_flow(self) -> float:
        return float(self.sojourns.sum())

    def n_jobs(self) -> int:
        return int(self.releases.size)


def next_internal_event(policy: Policy, remaining: dict[int, float]):
    """Earliest completion or target hit under the policy's current
    allocation: (dt, kind, jid) with kind 'completion' or 'target'."""
    alloc = policy.alloc()
    if not alloc:
        return None
    cands = [(remaining[j] / r, _COMPLETION, j) for j, r in alloc.items()]
    gap = policy.internal_gap(alloc)
    if gap is not None:
        cands.append((gap[0], _TARGET, gap[1]))
    dt, kind, jid = _pick(cands)[1]
    return dt, _KIND_NAMES[kind], jid


def _pick(cands):
    """(dtmin, winning candidate): minimal dt; candidates within EVENT_SNAP
    of it are coincident and ranked by kind, then job id."""
    dtmin = cands[0][0]
    for c in cands:
        if c[0] < dtmin:
            dtmin = c[0]
    lim = dtmin + EVENT_SNAP
    best = None
    for c in cands:
        if c[0] <= lim and (best is None or (c[1], c[2]) < (best[1], best[2])):
            best = c
    return dtmin, best


def simulate(inst: Instance, policy: str | Policy, seed: int = 0) -> SimResult:
    """Run policy on inst; exact per-job sojourns and per-cycle statistics."""
    if isinstance(policy, str):
        pol = make_policy(policy, make_stream(seed, POLICY_SUBSTREAM))
    else:
        pol = policy
    rel = inst.releases.tolist()
    siz = inst.sizes.tolist()
    n = len(rel)
    completions = [0.0] * n
    work_at = [0.0] * n
    remaining: dict[int, float] = {}
    cycles: list[SimCycle] = []
    blind = pol.blind

    i = 0                # next arrival index (jid = i + 1)
    t = 0.0
    busy_end = 0.0       # cycle start + sizes released so far
    prev_end: float | None = None
    cyc_start = 0.0
    cyc_first = cyc_last = 0
    cyc_sojourn = 0.0

    while i < n or remaining:
        if not remaining:
            # Idle server: jump exactly onto the next release.
            t = rel[i]
            jid = i + 1
            work_at[i] = 0.0
            remaining[jid] = siz[i]
            if blind:
                pol.arrival(jid, t)
            else:
                pol.arrival(jid, t, siz[i])
            cyc_start = t
            cyc_first = cyc_last = jid
            cyc_sojourn = 0.0
            busy_end = t + siz[i]
            i += 1
            continue

        alloc = pol.alloc()
        if not alloc:
            raise InternalConsistencyError(
                f"{pol.name} idles while {len(remaining)} jobs are unfinished")
        cands = [(remaining[j] / r, _COMPLETION, j) for j, r in alloc.items()]
        gap = pol.internal_gap(alloc)
        if gap is not None:
            cands.append((gap[0], _TARGET, gap[1]))
        if i < n:
            cands.append((rel[i] - t, _ARRIVAL, i + 1))
        dt, (_, kind, jid) = _pick(cands)

        if dt > 0.0:
            pol.advance(dt, alloc)
            for j, r in alloc.items():
                remaining[j] -= dt * r
            t += dt

        if kind == _COMPLETION:
            del remaining[jid]
            pol.completion(jid)
            completions[jid - 1] = t
            cyc_sojourn += t - rel[jid - 1]
            if not remaining:
                idle = None if prev_end is None else cyc_start - prev_end
                cycles.append(SimCycle(cyc_first, cyc_last, cyc_last - cyc_first + 1,
                                       t - cyc_start, idle, cyc_start, t, cyc_sojourn))
                prev_end = t
        elif kind == _TARGET:
            pol.internal_event(jid)
        else:  # arrival into a busy system
            t = rel[i]
            work_at[i] = busy_end - t
            busy_end += siz[i]
            remaining[jid] = siz[i]
            if blind:
                pol.arrival(jid, t)
            else:
                pol.arrival(jid, t, siz[i])
            cyc_last = jid
            i += 1

    rel_arr = inst.releases
    comp_arr = np.array(completions)
    meta = inst.meta
    return SimResult(
        policy=pol.name,
        seed=seed if isinstance(policy, str) else None,
        releases=rel_arr,
        sizes=inst.sizes,
        completions=comp_arr,
        sojourns=comp_arr - rel_arr,
        work_at_arrival=np.array(work_at),
        cycles=cycles,
        rho=None if meta is None else meta.rho,
        mu=None if meta is None else meta.mu,
    )


def brute_force_min_flow(inst: Instance) -> float:
    """Minimum total flow time over all preemptive schedules, by exhaustive
    search over which available job runs between consecutive event epochs
    (releases and completions); an optimal preemptive single-machine
    schedule only switches jobs at such epochs."""
    n = len(inst)
    if n > 4:
        raise ParameterError(f"brute force limited to 4 jobs, got {n}")
    if n == 0:
        return 0.0
    rel = inst.releases.tolist()
    siz = inst.sizes.tolist()
    best = math.inf

    def rec(t: float, rem: tuple, flow: float) -> None:
        nonlocal best
        if flow >= best:
            return
        unfinished = [j for j in range(n) if rem[j] > 0.0]
        if not unfinished:
            best = flow
            return
        active = [j for j in unfinished if rel[j] <= t]
        if not active:
            rec(min(rel[j] for j in unfinished), rem, flow)
            return
        nxt = min((rel[j] for j in unfinished if rel[j] > t), default=math.inf)
        for j in active:
            finish = t + rem[j]
            if finish <= nxt:
                nrem = rem[:j] + (0.0,) + rem[j + 1:]
                rec(finish, nrem, flow + (finish - rel[j]))
            else:
                nrem = rem[:j] + (rem[j] - (nxt - t),) + rem[j + 1:]
                rec(nxt, nrem, flow)

    rec(min(rel), tuple(siz), 0.0)
    return best


# --- exports -----------------------------------------------------------------

def jobs_to_csv(result: SimResult, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "release", "size", "completion", "sojourn"])
    for k in range(result.n_jobs()):
        w.writerow([k + 1, repr(float(result.releases[k])), repr(float(result.sizes[k])),
                    repr(float(result.completions[k])), repr(float(result.sojourns[k]))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def sim_cycles_to_csv(result: SimResult, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cycle", "N", "P", "I", "sum_sojourn"])
    for idx, c in enumerate(result.cycles, start=1):
        w.writerow([idx, c.N, repr(c.P), "" if c.I is None else repr(c.I),
                    repr(c.sojourn_sum)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def summary_stats(result: SimResult) -> dict:
    n = result.n_jobs()
    return {
        "policy": result.policy,
        "seed": result.seed,
        "jobs": n,
        "cycles": len(result.cycles),
        "total_flow": result.total_flow(),
        "mean_sojourn": result.total_flow() / n if n else None,
        "rho": result.rho,
        "mu": result.mu,
    }
