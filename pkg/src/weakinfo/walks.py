"""Monte Carlo diagnostics for scaled asymmetric random walks.

Every walk is a sum of independent Bernoulli components.  Component ``c``
takes value ``high_c`` with probability ``p_c`` and ``low_c`` otherwise:

* ``binomial(p)``      one component on ``{-1, +1}``
* ``bernoulli01(p)``   one component on ``{0, 1}``
* ``trinomial(p, q)``  two components on ``{-1/2, +1/2}``; their sum is the
  three-point step on ``{-1, 0, 1}``
* ``multinomial(N, probs)``  ``N - 1`` components on ``{-1/2, +1/2}``

With ``sigma_c`` the component's standard deviation and ``mu_c`` its mean,
the endpoint ``Z_1`` is normalised in one of two ways:

``centered`` (default)
    ``Z = sum_c (S_c - n mu_c) / (sigma_c sqrt(n)) + sum_c mu_c``; the limit is
    ``N(sum mu_c, #components)``, i.e. drift ``2p-1``, ``p`` or ``p+q-1``.
``raw``
    ``Z = sum_c S_c / (sigma_c sqrt(n))``; at fixed ``n`` this is close to
    ``N(sqrt(n) sum mu_c / sigma_c, #components)``.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from weakinfo.errors import DegenerateVariance, ValidationError

BATCH = 1 << 16
KINDS = ("binomial", "bernoulli01", "trinomial", "multinomial")


@dataclass(frozen=True)
class WalkSpec:
    kind: str
    probs: tuple
    n: int
    sigma: Optional[float] = None
    normalization: str = "centered"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        want = {"binomial": 1, "bernoulli01": 1, "trinomial": 2}.get(self.kind)
        if want is not None and len(self.probs) != want:
            raise ValidationError(f"{self.kind} takes {want} probability parameter(s)")
        if not self.probs:
            raise ValidationError("need at least one probability")
        if any(not 0 <= p <= 1 for p in self.probs):
            raise ValidationError(f"probabilities must lie in [0, 1], got {self.probs}")
        if self.n < 1:
            raise ValidationError("n must be positive")
        if self.normalization not in ("centered", "raw"):
            raise ValidationError("normalization must be 'centered' or 'raw'")
        if self.sigma is not None and (len(self.probs) != 1 or self.sigma <= 0):
            raise ValidationError("sigma override needs a single-component walk and sigma > 0")

    def components(self) -> list[tuple]:
        """``(p, low, high)`` per Bernoulli component."""
        if self.kind == "binomial":
            return [(self.probs[0], -1.0, 1.0)]
        if self.kind == "bernoulli01":
            return [(self.probs[0], 0.0, 1.0)]
        return [(p, -0.5, 0.5) for p in self.probs]

    def scales(self) -> list[float]:
        out = []
        for p, lo, hi in self.components():
            if self.sigma is not None:
                out.append(float(self.sigma))
                continue
            s = (hi - lo) * math.sqrt(p * (1 - p))
            if s == 0:
                warnings.warn(
                    f"component with p={p} has zero variance; scaling by sigma=1", DegenerateVariance, stacklevel=3
                )
                s = 1.0
            out.append(s)
        return out


@dataclass(frozen=True)
class LimitSpec:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValidationError("limit variance must be positive")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


def limit_of(spec: WalkSpec) -> LimitSpec:
    """Normal law the normalised endpoint is compared against."""
    comps = spec.components()
    means = [lo + (hi - lo) * p for p, lo, hi in comps]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateVariance)
        scales = spec.scales()
    if spec.normalization == "centered":
        return LimitSpec(float(sum(means)), float(len(comps)))
    return LimitSpec(math.sqrt(spec.n) * sum(m / s for m, s in zip(means, scales)), float(len(comps)))


def stated_drift(spec: WalkSpec) -> float:
    """Drift per unit time as stated for each kind: ``2p-1``, ``p``, ``p+q-1``, ``sum(p_i - 1/2)``."""
    return float(sum(lo + (hi - lo) * p for p, lo, hi in spec.components()))


def _batch(spec: WalkSpec, size: int, rng: np.random.Generator, scales) -> np.ndarray:
    z = np.zeros(size)
    root = math.sqrt(spec.n)
    for (p, lo, hi), s in zip(spec.components(), scales):
        hits = rng.binomial(spec.n, p, size)
        total = lo * spec.n + (hi - lo) * hits
        if spec.normalization == "centered":
            mu = lo + (hi - lo) * p
            z += (total - spec.n * mu) / (s * root) + mu
        else:
            z += total / (s * root)
    return z


def simulate_endpoint(spec: WalkSpec, samples: int, seed: int = 0, threads: int = 1) -> np.ndarray:
    """Draw ``samples`` endpoints ``Z_1``.

    Each component's hit count is sampled from its exact ``Binomial(n, p)``
    law.  Batch ``b`` of size ``2**16`` uses ``default_rng([seed, b])``, so the
    output is identical for any thread count.
    """
    if samples < 1:
        raise ValidationError("samples must be at least 1")
    scales = spec.scales()
    sizes = [min(BATCH, samples - start) for start in range(0, samples, BATCH)]

    def run(b: int) -> np.ndarray:
        return _batch(spec, sizes[b], np.random.default_rng([seed, b]), scales)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    return np.concatenate(parts)


def simulate_limit(limit: LimitSpec, samples: int, seed: int = 0) -> np.ndarray:
    """Direct draws from the limit normal law (the null reference)."""
    return np.random.default_rng([seed, 1 << 30]).normal(limit.mean, limit.sd, samples)


def ks_distance(samples, limit: LimitSpec) -> float:
    """Two-sided KS statistic against ``N(limit.mean, limit.variance)``."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 100:
        raise ValidationError("ks_distance needs at least 100 samples")
    return float(stats.kstest(samples, stats.norm(limit.mean, limit.sd).cdf).statistic)


def empirical_char_fn(samples, u_grid) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    u = np.asarray(u_grid, dtype=float)
    return np.array([np.mean(np.exp(1j * ui * samples)) for ui in u])


def char_fn_distance(samples, limit: LimitSpec, u_grid: Optional[Sequence[float]] = None) -> float:
    """``max_u |phi_emp(u) - exp(i u mean - u^2 var / 2)|`` over ``u_grid``."""
    u = np.linspace(-5.0, 5.0, 64) if u_grid is None else np.asarray(u_grid, dtype=float)
    target = np.exp(1j * u * limit.mean - 0.5 * u**2 * limit.variance)
    return float(np.max(np.abs(empirical_char_fn(samples, u) - target)))


def trinomial_decomposition(p, q) -> dict:
    """Step law of ``B1 + B2 - 1`` with ``B1 ~ Bernoulli(p)``, ``B2 ~ Bernoulli(q)`` independent."""
    if not (0 <= p <= 1 and 0 <= q <= 1):
        raise ValidationError("p and q must lie in [0, 1]")
    return {1: p * q, 0: p * (1 - q) + (1 - p) * q, -1: (1 - p) * (1 - q)}


def bernoulli_convolution(probs: Sequence) -> dict:
    """Law of ``sum_i B_i - len(probs) // 2``, built outcome by outcome.

    For two components this is the law of ``B1 + B2 - 1``.
    """
    law: dict = {0: 1}
    for p in probs:
        nxt: dict = {}
        for v, m in law.items():
            nxt[v + 1] = nxt.get(v + 1, 0) + m * p
            nxt[v] = nxt.get(v, 0) + m * (1 - p)
        law = nxt
    shift = len(probs) // 2
    return {v - shift: m for v, m in law.items()}


def trinomial_char_fn(p, q, u) -> np.ndarray:
    """Product of the two Bernoulli characteristic functions, shifted by ``-1``."""
    u = np.asarray(u, dtype=float)
    return (p * np.exp(1j * u) + 1 - p) * (q * np.exp(1j * u) + 1 - q) * np.exp(-1j * u)


def sample_trinomial_steps(p: float, q: float, size: int, seed: int = 0) -> np.ndarray:
    """Draw steps straight from the three-point law (not via the components)."""
    law = trinomial_decomposition(p, q)
    rng = np.random.default_rng(seed)
    return rng.choice([1, 0, -1], size=size, p=[float(law[1]), float(law[0]), float(law[-1])])


@dataclass(frozen=True)
class WalkRow:
    kind: str
    n: int
    samples: int
    seed: int
    mean: float
    var: float
    ks: float
    charfn_gap: float


def walk_table(
    kind: str,
    probs: Sequence[float],
    n_list: Sequence[int],
    samples: int,
    seeds: Sequence[int],
    normalization: str = "centered",
    sigma: Optional[float] = None,
    threads: int = 1,
) -> list[WalkRow]:
    """One row per ``(n, seed)`` in the given order."""
    jobs = [(n, s) for n in n_list for s in seeds]

    def one(job) -> WalkRow:
        n, seed = job
        spec = WalkSpec(kind, tuple(probs), n, sigma, normalization)
        z = simulate_endpoint(spec, samples, seed)
        lim = limit_of(spec)
        return WalkRow(kind, n, samples, seed, float(np.mean(z)), float(np.var(z, ddof=1)),
                       ks_distance(z, lim), char_fn_distance(z, lim))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, jobs))
    return [one(j) for j in jobs]
