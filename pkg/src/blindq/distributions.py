"""Seeded sampling of interarrival/job-size laws with exact moment metadata.

Streams are counter-based (Philox keyed by (seed, substream)), so a draw is a
pure function of (seed, substream, counter) and replications can be coupled
or parallelised without coordination.  Substream conventions:

    0  interarrival times
    1  job sizes
    2  policy randomness (target randomisation)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, UnstableSystemError

ARRIVAL_SUBSTREAM = 0
SIZE_SUBSTREAM = 1
POLICY_SUBSTREAM = 2

# Uniform draws consumed per sample, by kind (scaled delegates to its inner law).
DRAWS_PER_SAMPLE = {
    "exponential": 1,
    "deterministic": 0,
    "uniform": 1,
    "pareto": 1,
    "hyperexponential": 2,
}

# Smallest uniform fed into inverse CDFs; keeps every sample strictly positive.
_U_FLOOR = 2.0 ** -53


class RandomStream:
    """Reproducible uniform source identified by (seed, substream, counter)."""

    __slots__ = ("seed", "substream", "counter", "_gen")

    def __init__(self, seed: int, substream: int, counter: int = 0):
        self.seed = int(seed)
        self.substream = int(substream)
        self.counter = 0
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF,
                        self.substream & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))
        if counter:
            self.skip(counter)

    def uniforms(self, n: int) -> np.ndarray:
        """Next n uniforms in [0, 1); advances the counter by n."""
        self.counter += int(n)
        return self._gen.random(int(n))

    def uniform(self) -> float:
        self.counter += 1
        return float(self._gen.random())

    def skip(self, n: int) -> None:
        """Discard n uniforms (replay positioning)."""
        n = int(n)
        while n > 0:
            chunk = min(n, 1 << 16)
            self._gen.random(chunk)
            self.counter += chunk
            n -= chunk

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"RandomStream(seed={self.seed}, substream={self.substream}, counter={self.counter})"


def make_stream(seed: int, substream: int) -> RandomStream:
    return RandomStream(seed, substream)


@dataclass(frozen=True)
class DistributionSpec:
    """Tagged description of a positive law plus its parameters.

    kinds: exponential(rate), deterministic(value), uniform(lo, hi),
    pareto(shape), hyperexponential(w1..wk, rate1..ratek),
    scaled(inner, divisor) which divides inner samples by divisor in (0, 1).
    """

    kind: str
    params: tuple[float, ...] = ()
    inner: "DistributionSpec | None" = field(default=None)

    def __str__(self) -> str:
        return format_spec(self)


def exponential(rate: float) -> DistributionSpec:
    if not rate > 0:
        raise ParameterError(f"exponential rate must be > 0, got {rate}")
    return DistributionSpec("exponential", (float(rate),))


def exponential_mean(mean: float) -> DistributionSpec:
    if not mean > 0:
        raise ParameterError(f"exponential mean must be > 0, got {mean}")
    return DistributionSpec("exponential", (1.0 / float(mean),))


def deterministic(value: float) -> DistributionSpec:
    if not value > 0:
        raise ParameterError(f"deterministic value must be > 0, got {value}")
    return DistributionSpec("deterministic", (float(value),))


def uniform(lo: float, hi: float) -> DistributionSpec:
    if not 0 < lo < hi:
        raise ParameterError(f"uniform requires 0 < lo < hi, got ({lo}, {hi})")
    return DistributionSpec("uniform", (float(lo), float(hi)))


def pareto(shape: float) -> DistributionSpec:
    # Scale fixed at 1 (support [1, inf), CDF 1 - x^-shape); rescale via scaled().
    if not shape > 1:
        raise ParameterError(f"pareto shape must be > 1 for a finite mean, got {shape}")
    return DistributionSpec("pareto", (float(shape),))


def hyperexponential(weights, rates) -> DistributionSpec:
    weights = tuple(float(w) for w in weights)
    rates = tuple(float(r) for r in rates)
    if len(weights) != len(rates) or not weights:
        raise ParameterError("hyperexponential needs matching, non-empty weights and rates")
    if any(w <= 0 for w in weights) or any(r <= 0 for r in rates):
        raise ParameterError("hyperexponential weights and rates must be > 0")
    total = sum(weights)
    weights = tuple(w / total for w in weights)
    return DistributionSpec("hyperexponential", weights + rates)


def scaled(inner: DistributionSpec, divisor: float) -> DistributionSpec:
    if not 0 < divisor < 1:
        raise ParameterError(f"scaled divisor must lie in (0, 1), got {divisor}")
    validate(inner)
    return DistributionSpec("scaled", (float(divisor),), inner=inner)


def validate(spec: DistributionSpec) -> None:
    """Re-check invariants of a spec built outside the factory functions."""
    k, p = spec.kind, spec.params
    if k == "exponential":
        if len(p) != 1 or not p[0] > 0:
            raise ParameterError(f"bad exponential params {p}")
    elif k == "deterministic":
        if len(p) != 1 or not p[0] > 0:
            raise ParameterError(f"bad deterministic params {p}")
    elif k == "uniform":
        if len(p) != 2 or not 0 < p[0] < p[1]:
            raise ParameterError(f"bad uniform params {p}")
    elif k == "pareto":
        if len(p) != 1 or not p[0] > 1:
            raise ParameterError(f"bad pareto params {p}")
    elif k == "hyperexponential":
        if len(p) < 2 or len(p) % 2 or any(x <= 0 for x in p):
            raise ParameterError(f"bad hyperexponential params {p}")
    elif k == "scaled":
        if len(p) != 1 or not 0 < p[0] < 1 or spec.inner is None:
            raise ParameterError(f"bad scaled params {p}")
        validate(spec.inner)
    else:
        raise ParameterError(f"unknown distribution kind {k!r}")


def sample_block(spec: DistributionSpec, stream: RandomStream, n: int) -> np.ndarray:
    """n i.i.d. samples; consumes DRAWS_PER_SAMPLE[kind] * n uniforms."""
    n = int(n)
    k, p = spec.kind, spec.params
    if k == "exponential":
        u = np.maximum(stream.uniforms(n), _U_FLOOR)
        return -np.log1p(-u) / p[0]
    if k == "deterministic":
        return np.full(n, p[0])
    if k == "uniform":
        u = np.maximum(stream.uniforms(n), _U_FLOOR)
        return p[0] + (p[1] - p[0]) * u
    if k == "pareto":
        u = stream.uniforms(n)
        return np.power(1.0 - u, -1.0 / p[0])
    if k == "hyperexponential":
        m = len(p) // 2
        cumw = np.cumsum(p[:m])
        rates = np.array(p[m:])
        u = stream.uniforms(2 * n).reshape(n, 2)
        idx = np.searchsorted(cumw, u[:, 0], side="right")
        idx = np.minimum(idx, m - 1)
        ue = np.maximum(u[:, 1], _U_FLOOR)
        return -np.log1p(-ue) / rates[idx]
    if k == "scaled":
        return sample_block(spec.inner, stream, n) / p[0]
    raise ParameterError(f"unknown distribution kind {k!r}")


def sample(spec: DistributionSpec, stream: RandomStream) -> float:
    """One draw from the law; see sample_block for counter consumption."""
    return float(sample_block(spec, stream, 1)[0])


def moments(spec: DistributionSpec) -> tuple[float, float, float]:
    """Exact (mean, second moment, sup of finite moment orders); inf allowed."""
    k, p = spec.kind, spec.params
    if k == "exponential":
        rate = p[0]
        return 1.0 / rate, 2.0 / rate**2, math.inf
    if k == "deterministic":
        return p[0], p[0] ** 2, math.inf
    if k == "uniform":
        lo, hi = p
        return (lo + hi) / 2.0, (lo * lo + lo * hi + hi * hi) / 3.0, math.inf
    if k == "pareto":
        b = p[0]
        mean = b / (b - 1.0)
        second = b / (b - 2.0) if b > 2 else math.inf
        return mean, second, b
    if k == "hyperexponential":
        m = len(p) // 2
        w, rates = p[:m], p[m:]
        mean = sum(wi / ri for wi, ri in zip(w, rates))
        second = sum(2.0 * wi / ri**2 for wi, ri in zip(w, rates))
        return mean, second, math.inf
    if k == "scaled":
        mean, second, alpha = moments(spec.inner)
        r = p[0]
        return mean / r, second / r**2, alpha
    raise ParameterError(f"unknown distribution kind {k!r}")


def system_load(arrival: DistributionSpec, size: DistributionSpec) -> tuple[float, float]:
    """(rho, mu) of the queue: rho = E[B]/E[A], mu = E[A] - E[B]."""
    ea = moments(arrival)[0]
    eb = moments(size)[0]
    if eb >= ea:
        raise UnstableSystemError(
            f"unstable system: E[size]={eb} >= E[interarrival]={ea}")
    rho = eb / ea
    mu = ea * (1.0 - rho)
    return rho, mu


# --- compact text form (used by the CLI and config files) -------------------
#
#   exp:<mean>                       exponential with the given MEAN
#   det:<value>                      deterministic
#   uniform:<lo>,<hi>                uniform on (lo, hi)
#   pareto:<shape>                   Pareto, scale 1, support [1, inf)
#   hyperexp:<w1>,..,<wk>;<r1>,..,<rk>   mixture weights; component rates
#   scaled:<divisor>:<inner>         inner samples divided by divisor

def parse_spec(text: str) -> DistributionSpec:
    text = text.strip()
    kind, sep, rest = text.partition(":")
    kind = kind.lower()
    try:
        if kind in ("exp", "exponential"):
            return exponential_mean(float(rest))
        if kind in ("det", "deterministic"):
            return deterministic(float(rest))
        if kind == "uniform":
            lo, hi = (float(x) for x in rest.split(","))
            return uniform(lo, hi)
        if kind == "pareto":
            return pareto(float(rest))
        if kind in ("hyperexp", "hyperexponential"):
            wpart, _, rpart = rest.partition(";")
            w = [float(x) for x in wpart.split(",")]
            r = [float(x) for x in rpart.split(",")]
            return hyperexponential(w, r)
        if kind == "scaled":
            divisor, _, inner = rest.partition(":")
            return scaled(parse_spec(inner), float(divisor))
    except ParameterError:
        raise
    except ValueError as exc:
        raise ParameterError(f"cannot parse distribution {text!r}: {exc}") from None
    raise ParameterError(f"unknown distribution kind in {text!r}")


def format_spec(spec: DistributionSpec) -> str:
    k, p = spec.kind, spec.params
    if k == "exponential":
        return f"exp:{1.0 / p[0]!r}"
    if k == "deterministic":
        return f"det:{p[0]!r}"
    if k == "uniform":
        return f"uniform:{p[0]!r},{p[1]!r}"
    if k == "pareto":
        return f"pareto:{p[0]!r}"
    if k == "hyperexponential":
        m = len(p) // 2
        w = ",".join(repr(x) for x in p[:m])
        r = ",".join(repr(x) for x in p[m:])
        return f"hyperexp:{w};{r}"
    if k == "scaled":
        return f"scaled:{p[0]!r}:{format_spec(spec.inner)}"
    raise ParameterError(f"unknown distribution kind {k!r}")
