"""Discretised anticipations on refining lattices and their convergence.

Walks are symmetric with ``r = 0``.  A ``k``-move walk is the sum of
``k - 1`` independent fair Bernoulli steps centred at 1/2, so its moves carry
risk-neutral masses ``Binomial(k - 1, 1/2)``.  Terminal class ``counts`` is
embedded at ``2 * sum_i counts[i] * v_i / sqrt(n)`` with ``v_i = (k-1)/2 - i``;
for the binomial walk that is ``(2j - n) / sqrt(n)``.  The embedded endpoint
converges to ``N(0, k - 1)``.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import norm

from weakinfo.errors import ValidationError
from weakinfo.lattice import MultinomialEconomy, TerminalLaw, build_economy, reference_masses
from weakinfo.utility import UtilitySpec
from weakinfo.valuation import GaussianLaw, value_continuous, value_discrete

_FACTOR_SPREAD = 0.2


def walk_moves(walk: str) -> int:
    """Number of moves for ``binomial``, ``trinomial`` or ``multinomial:<k>``."""
    if walk == "binomial":
        return 2
    if walk == "trinomial":
        return 3
    kind, _, arg = walk.partition(":")
    if kind == "multinomial" and arg.isdigit() and int(arg) >= 2:
        return int(arg)
    raise ValidationError(f"walk must be binomial, trinomial or multinomial:<k>, got {walk!r}")


def walk_economy(walk: str, n: int, exact: bool = False) -> MultinomialEconomy:
    """Symmetric ``n``-step lattice for ``walk`` with zero rate and unit start price."""
    k = walk_moves(walk)
    levels = [Fraction(k - 1, 2) - i for i in range(k)]
    probs = [Fraction(math.comb(k - 1, i), 2 ** (k - 1)) for i in range(k)]
    h = Fraction(1, 5) if exact else _FACTOR_SPREAD / math.sqrt(n)
    if exact:
        factors = [1 + h * v / (k - 1) for v in levels]
    else:
        factors = [1 + h * float(v) / (k - 1) for v in levels]
    return build_economy(n, factors, 0, 1, probs, exact=exact)


def embed(counts, n: int) -> float:
    k = len(counts)
    return 2.0 * sum(c * ((k - 1) / 2 - i) for i, c in enumerate(counts)) / math.sqrt(n)


def limit_variance(walk: str) -> float:
    return float(walk_moves(walk) - 1)


@dataclass(frozen=True)
class AnticipationFamily:
    """A bounded density ``xi`` relative to the limit endpoint law ``N(0, variance)``.

    ``xi`` is normalised so that its integral against the limit law is one.
    """

    name: str
    xi: Callable = field(repr=False)
    variance: float = 1.0
    bound: float = math.inf

    @property
    def limit_law(self) -> GaussianLaw:
        return GaussianLaw(0.0, self.variance)

    @classmethod
    def flat(cls, variance: float = 1.0) -> "AnticipationFamily":
        return cls("flat", lambda y: np.ones_like(np.asarray(y, dtype=float)), variance, 1.0)

    @classmethod
    def tilted_gaussian(cls, theta: float, variance: float = 1.0, cap_sigmas: Optional[float] = 8.0):
        """``xi(y) ∝ min(exp(theta y), exp(theta y_cap))`` with ``y_cap = cap_sigmas * sd``.

        ``cap_sigmas=None`` gives the uncapped exponential tilt, whose density is
        unbounded on growing lattices.
        """
        sd = math.sqrt(variance)
        if cap_sigmas is None:
            z = math.exp(theta**2 * variance / 2)
            return cls(f"tilt:{theta!r}", lambda y: np.exp(theta * np.asarray(y, dtype=float)) / z, variance)
        y_cap = cap_sigmas * sd
        if theta < 0:
            y_cap = -y_cap
        # E[min(e^{theta Y}, e^{theta y_cap})] for Y ~ N(0, variance)
        z = math.exp(theta**2 * variance / 2) * norm.cdf((abs(y_cap) - abs(theta) * variance) / sd) + math.exp(
            theta * y_cap
        ) * norm.sf(abs(y_cap) / sd)
        cap = math.exp(theta * y_cap)

        def xi(y):
            return np.minimum(np.exp(theta * np.asarray(y, dtype=float)), cap) / z

        return cls(f"tilt:{theta!r}", xi, variance, cap / z)


def parse_family(text: str, walk: str, cap_sigmas: Optional[float] = 8.0) -> AnticipationFamily:
    """``flat`` or ``tilt:<theta>`` relative to the walk's limit law."""
    var = limit_variance(walk)
    if text == "flat":
        return AnticipationFamily.flat(var)
    kind, _, arg = text.partition(":")
    if kind == "tilt" and arg:
        try:
            theta = float(arg)
        except ValueError:
            raise ValidationError(f"xi: bad tilt {arg!r}") from None
        return AnticipationFamily.tilted_gaussian(theta, var, cap_sigmas)
    raise ValidationError(f"xi: expected 'flat' or 'tilt:<theta>', got {text!r}")


@dataclass(frozen=True)
class Discretization:
    economy: MultinomialEconomy
    points: dict = field(repr=False)
    nu: TerminalLaw = field(repr=False)
    density: dict = field(repr=False)

    @property
    def sup_density(self) -> float:
        return max(self.density.values())


def discretize_anticipation(family: AnticipationFamily, n: int, walk: str = "binomial") -> Discretization:
    """Induce ``nu_n`` on the ``n``-step lattice from ``family``.

    ``xi_n(class) = xi(point) / sum_c' xi(point') P~_Y(c')``, then
    ``nu_n = xi_n * P~_Y``.
    """
    if n < 1:
        raise ValidationError("n must be positive")
    econ = walk_economy(walk, n)
    classes = econ.classes()
    ref = np.array(reference_masses(econ, classes))
    pts = np.array([embed(c, n) for c in classes])
    raw = np.asarray(family.xi(pts), dtype=float)
    dens = raw / math.fsum(raw * ref)
    mass = dens * ref
    mass = mass / math.fsum(mass)
    nu = TerminalLaw(n, econ.k, dict(zip(classes, mass.tolist())))
    return Discretization(econ, dict(zip(classes, pts.tolist())), nu, dict(zip(classes, dens.tolist())))


@dataclass(frozen=True)
class SweepRow:
    n: int
    u_discrete: float
    u_limit: float
    abs_error: float
    seconds: float
    multiplier: float
    sup_density: float


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple
    u_limit: float
    multiplier_limit: float

    @property
    def errors(self) -> list[float]:
        return [r.abs_error for r in self.rows]

    @property
    def tail_decreasing(self) -> bool:
        """Last three errors strictly decreasing."""
        e = self.errors[-3:]
        return len(e) == 3 and e[0] > e[1] > e[2]

    @property
    def sup_density(self) -> float:
        return max(r.sup_density for r in self.rows)


def convergence_sweep(
    family: AnticipationFamily,
    utility: UtilitySpec,
    x: float,
    walk: str = "binomial",
    n_list: Sequence[int] = (64, 128, 256, 512, 1024, 2048, 4096),
    threads: int = 1,
) -> ConvergenceReport:
    """Discrete values ``u(x, nu_n)`` against the continuous value ``u(x, nu)``."""
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValidationError("n_list must be strictly increasing")
    limit = value_continuous(family.xi, family.limit_law, utility, x)

    def one(n: int) -> SweepRow:
        t0 = time.perf_counter()
        disc = discretize_anticipation(family, n, walk)
        res = value_discrete(disc.economy, disc.nu, utility, x)
        return SweepRow(
            n, res.value, limit.value, abs(res.value - limit.value),
            time.perf_counter() - t0, res.multiplier, disc.sup_density,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = tuple(pool.map(one, n_list))
    else:
        rows = tuple(one(n) for n in n_list)
    return ConvergenceReport(rows, limit.value, limit.multiplier)


@dataclass(frozen=True)
class LemmaReport:
    rows: tuple  # (n, integral_n, integral_limit, abs_diff)
    sup_norm: float

    @property
    def diffs(self) -> list[float]:
        return [r[3] for r in self.rows]


def lemma_integral_check(
    f_family: Callable,
    mu_family: Callable,
    n_list: Sequence[int],
    limit_law=None,
    order: int = 200,
) -> LemmaReport:
    """Compare ``int f_n d mu_n`` with ``int f_0 d mu_0``.

    ``f_family(n, y)`` gives ``f_n`` (``n = 0`` is the limit), ``mu_family(n)``
    returns ``(points, masses)``, and ``limit_law.rule(order)`` integrates the
    limit.  ``sup_norm`` is the largest ``|f_n|`` seen on the supports, a
    sampled stand-in for the uniform bound the convergence needs.
    """
    limit_law = limit_law or GaussianLaw()
    nodes, weights = limit_law.rule(order)
    f0 = np.asarray(f_family(0, nodes), dtype=float)
    limit = math.fsum(weights * f0)
    rows, sup = [], float(np.max(np.abs(f0)))
    for n in n_list:
        pts, masses = mu_family(n)
        fn = np.asarray(f_family(n, np.asarray(pts, dtype=float)), dtype=float)
        val = math.fsum(np.asarray(masses, dtype=float) * fn)
        sup = max(sup, float(np.max(np.abs(fn))))
        rows.append((n, val, limit, abs(val - limit)))
    return LemmaReport(tuple(rows), sup)


def binomial_endpoint_law(n: int):
    """Points and masses of the scaled symmetric binomial endpoint ``(2j - n)/sqrt(n)``."""
    econ = walk_economy("binomial", n)
    classes = econ.classes()
    return np.array([embed(c, n) for c in classes]), np.array(reference_masses(econ, classes))
