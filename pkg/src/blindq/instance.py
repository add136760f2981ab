"""Finite job instances: construction, validation, scaling, file I/O, and
policy-independent busy-period decomposition driven by the workload process."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .distributions import (
    ARRIVAL_SUBSTREAM,
    SIZE_SUBSTREAM,
    DistributionSpec,
    RandomStream,
    make_stream,
    sample_block,
    system_load,
    validate,
)
from .errors import EmptyInstanceError, ParameterError, ParseError

# Absolute tolerance (work units) for deciding that an arrival finds the
# system empty, i.e. that it closes the running busy period.
CYCLE_TOL = 1e-9

FILE_HEADER = "# blindq-instance v1"


class Job(NamedTuple):
    id: int          # 1-based, in release order
    release: float
    size: float


class CycleRecord(NamedTuple):
    first_job_id: int
    last_job_id: int
    N: int           # arrivals in the cycle
    P: float         # busy duration, end - start
    I: float | None  # idle time preceding the cycle; None for the first
    start: float
    end: float


@dataclass(frozen=True)
class InstanceMeta:
    rho: float | None = None
    mu: float | None = None
    arrival: DistributionSpec | None = None
    size: DistributionSpec | None = None


class Instance:
    """Immutable ordered job list; releases strictly increasing, sizes > 0."""

    __slots__ = ("releases", "sizes", "meta")

    def __init__(self, releases, sizes, meta: InstanceMeta | None = None):
        releases = np.asarray(releases, dtype=float)
        sizes = np.asarray(sizes, dtype=float)
        if releases.shape != sizes.shape or releases.ndim != 1:
            raise ParameterError("releases and sizes must be 1-D and equally long")
        if releases.size:
            if releases[0] < 0:
                raise ParameterError(f"first release must be >= 0, got {releases[0]}")
            if not np.all(np.diff(releases) > 0):
                raise ParameterError("release times must be strictly increasing")
            if not np.all(sizes > 0):
                raise ParameterError("job sizes must be strictly positive")
        releases.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "releases", releases)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "meta", meta)

    def __setattr__(self, name, value):  # immutability guard
        raise AttributeError("Instance is immutable")

    def __len__(self) -> int:
        return int(self.releases.size)

    @property
    def jobs(self) -> list[Job]:
        return [Job(i + 1, float(r), float(s))
                for i, (r, s) in enumerate(zip(self.releases, self.sizes))]

    def __eq__(self, other) -> bool:
        return (isinstance(other, Instance)
                and np.array_equal(self.releases, other.releases)
                and np.array_equal(self.sizes, other.sizes))

    def __repr__(self) -> str:
        return f"Instance({len(self)} jobs)"


def generate(arrival: DistributionSpec, size: DistributionSpec,
             target_cycles: int, seed: int = 0, *,
             streams: tuple[RandomStream, RandomStream] | None = None) -> Instance:
    """Instance containing exactly target_cycles complete busy periods.

    Generation keeps drawing arrivals until the workload recursion closes the
    target-th cycle; the arrival that would open the next cycle is discarded.
    """
    validate(arrival)
    validate(size)
    rho, mu = system_load(arrival, size)  # raises on unstable input
    meta = InstanceMeta(rho=rho, mu=mu, arrival=arrival, size=size)
    if target_cycles < 0:
        raise ParameterError("target_cycles must be >= 0")
    if target_cycles == 0:
        return Instance(np.empty(0), np.empty(0), meta)
    if streams is None:
        streams = (make_stream(seed, ARRIVAL_SUBSTREAM),
                   make_stream(seed, SIZE_SUBSTREAM))
    astream, bstream = streams

    chunk = 1 << 15
    a_buf: list[float] = []
    b_buf: list[float] = []
    ai = bi = 0
    rels: list[float] = []
    szs: list[float] = []
    t = 0.0
    busy_end = 0.0
    cycles_done = 0
    k = 0
    while True:
        if ai >= len(a_buf):
            a_buf = sample_block(arrival, astream, chunk).tolist()
            ai = 0
        if bi >= len(b_buf):
            b_buf = sample_block(size, bstream, chunk).tolist()
            bi = 0
        b = b_buf[bi]
        bi += 1
        if k == 0:
            r = 0.0
            busy_end = b
        else:
            r = t + a_buf[ai]
            ai += 1
            if r >= busy_end - CYCLE_TOL:
                cycles_done += 1
                if cycles_done == target_cycles:
                    break
                busy_end = r + b
            else:
                busy_end += b
        rels.append(r)
        szs.append(b)
        t = r
        k += 1
    return Instance(np.array(rels), np.array(szs), meta)


def busy_periods(inst: Instance) -> list[CycleRecord]:
    """Busy periods from the workload process alone: unit-speed drain between
    releases, jump by the job size at each release.  Policy-independent."""
    rel = inst.releases.tolist()
    siz = inst.sizes.tolist()
    n = len(rel)
    out: list[CycleRecord] = []
    prev_end: float | None = None
    i = 0
    while i < n:
        start = rel[i]
        first = i
        busy_end = start + siz[i]
        i += 1
        while i < n and rel[i] < busy_end - CYCLE_TOL:
            busy_end += siz[i]
            i += 1
        idle = None if prev_end is None else start - prev_end
        out.append(CycleRecord(first + 1, i, i - first, busy_end - start,
                               idle, start, busy_end))
        prev_end = busy_end
    return out


def scaling_exponent(inst: Instance) -> int:
    """Largest g with 2**-g * min(size) >= 2, as floor(log2(min size)) - 1."""
    if len(inst) == 0:
        raise EmptyInstanceError("scaling exponent of an empty instance")
    bmin = float(inst.sizes.min())
    return math.floor(math.log2(bmin)) - 1


def scale(inst: Instance, factor: float) -> Instance:
    """Every release and size multiplied by factor; job ids unchanged."""
    if not factor > 0:
        raise ParameterError(f"scale factor must be > 0, got {factor}")
    meta = inst.meta
    if meta is not None:
        meta = InstanceMeta(rho=meta.rho,
                            mu=None if meta.mu is None else meta.mu * factor)
    return Instance(inst.releases * factor, inst.sizes * factor, meta)


def serialize(inst: Instance, path=None) -> str:
    """Text form: header line, then one 'release size' pair per line."""
    lines = [FILE_HEADER]
    lines.extend(f"{float(r)!r} {float(s)!r}"
                 for r, s in zip(inst.releases, inst.sizes))
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def parse(source) -> Instance:
    """Inverse of serialize; raises ParseError naming the offending line."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source) as fh:
            text = fh.read()
    lines = text.splitlines()
    if not lines or lines[0].strip() != FILE_HEADER:
        raise ParseError(f"expected header {FILE_HEADER!r}", line=1)
    rels: list[float] = []
    szs: list[float] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'release size', got {raw!r}", line=lineno)
        try:
            r, s = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"non-numeric field in {raw!r}", line=lineno) from None
        if not math.isfinite(r) or not math.isfinite(s):
            raise ParseError(f"non-finite value in {raw!r}", line=lineno)
        if s <= 0:
            raise ParseError(f"non-positive size {s!r}", line=lineno)
        if rels and r <= rels[-1]:
            raise ParseError(
                f"release {r!r} not after previous release {rels[-1]!r}", line=lineno)
        if not rels and r < 0:
            raise ParseError(f"negative first release {r!r}", line=lineno)
        rels.append(r)
        szs.append(s)
    return Instance(np.array(rels), np.array(szs))


def cycles_to_csv(cycles: list[CycleRecord], path=None) -> str:
    """CSV export with columns (cycle_index, N, P, I, start, end)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["cycle_index", "N", "P", "I", "start", "end"])
    for idx, c in enumerate(cycles, start=1):
        writer.writerow([idx, c.N, repr(c.P),
                         "" if c.I is None else repr(c.I),
                         repr(c.start), repr(c.end)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
