"""Discrete multinomial economies: one bond, one risky asset, k moves per step.

Nodes are identified by count classes ``(j_1, ..., j_k)`` -- how many times
each move has occurred -- rather than by price level, so two classes whose
prices coincide (e.g. ``b**2 == a*c``) are never merged.  Moves are indexed
from 0, with move 0 the largest factor.

Arithmetic is float by default.  Passing ``exact=True`` to
:func:`build_economy` stores every parameter as a :class:`fractions.Fraction`
and all derived masses stay exact.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, NamedTuple, Sequence, Union

from weakinfo.errors import (
    ArbitrageError,
    CapExceeded,
    ClassMismatch,
    InvalidMeasure,
    Underdetermined,
    ValidationError,
)

Number = Union[float, Fraction]
CountClass = tuple  # tuple[int, ...] summing to the node's time index

DEFAULT_PATH_CAP = 10**7

_SUM_TOL = 1e-14
_MARTINGALE_TOL = 1e-12


def to_number(value, exact: bool) -> Number:
    """Coerce ``value`` (number or ``"p/q"`` / decimal string) to the working type."""
    if exact:
        if isinstance(value, float):
            return Fraction(repr(value))
        return Fraction(value)
    if isinstance(value, str):
        return float(Fraction(value))
    return float(value)


def multiplicity(counts: Sequence[int]) -> int:
    """Number of move sequences with the given counts (a multinomial coefficient)."""
    total = 0
    result = 1
    for c in counts:
        total += c
        result *= math.comb(total, c)
    return result


def count_classes(m: int, k: int) -> list[CountClass]:
    """All count classes at time ``m`` for ``k`` moves, in descending lexicographic order."""
    if k == 1:
        return [(m,)]
    out = []
    for first in range(m, -1, -1):
        for rest in count_classes(m - first, k - 1):
            out.append((first,) + rest)
    return out


def n_classes(m: int, k: int) -> int:
    return math.comb(m + k - 1, k - 1)


def step(counts: CountClass, move: int) -> CountClass:
    return counts[:move] + (counts[move] + 1,) + counts[move + 1:]


def _is_class(counts, m: int, k: int) -> bool:
    return (
        isinstance(counts, tuple)
        and len(counts) == k
        and all(isinstance(c, int) and c >= 0 for c in counts)
        and sum(counts) == m
    )


@dataclass(frozen=True)
class MultinomialEconomy:
    """An ``n_periods``-step lattice with ``k`` gross-return factors.

    Parameters
    ----------
    n_periods : int
        Number of trading periods.
    factors : tuple
        Strictly decreasing, strictly positive gross returns per step.
    rate : Number
        Risk-free rate per step; the bond grows by ``1 + rate`` each step.
    initial_price : Number
        Price of the risky asset at time 0.
    risk_neutral : tuple
        One-step martingale measure, ``sum(p * a) == 1 + rate``.
    exact : bool
        Whether all parameters are :class:`~fractions.Fraction`.
    """

    n_periods: int
    factors: tuple
    rate: Number
    initial_price: Number
    risk_neutral: tuple
    exact: bool = False

    def __post_init__(self):
        if not isinstance(self.n_periods, int) or self.n_periods < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n_periods!r}")
        f = self.factors
        if len(f) < 2:
            raise ValidationError("need at least two factors")
        if any(a <= 0 for a in f):
            raise ValidationError(f"factors must be positive, got {f}")
        if any(f[i] <= f[i + 1] for i in range(len(f) - 1)):
            raise ValidationError(f"factors must be strictly decreasing, got {f}")
        if self.rate <= -1:
            raise ValidationError(f"rate must exceed -1, got {self.rate}")
        if self.initial_price <= 0:
            raise ValidationError(f"initial_price must be positive, got {self.initial_price}")
        growth = 1 + self.rate
        if not f[-1] < growth < f[0]:
            raise ArbitrageError(
                f"no-arbitrage requires {f[-1]} < 1 + r = {growth} < {f[0]}"
            )
        p = self.risk_neutral
        if len(p) != len(f):
            raise InvalidMeasure(f"risk_neutral has {len(p)} entries for {len(f)} factors")
        if any(pi <= 0 for pi in p):
            raise InvalidMeasure(f"risk-neutral masses must be positive, got {p}")
        total = sum(p)
        drift = sum(pi * a for pi, a in zip(p, f))
        if self.exact:
            if total != 1:
                raise InvalidMeasure(f"risk-neutral masses sum to {total}, not 1")
            if drift != growth:
                raise InvalidMeasure(
                    f"martingale constraint fails: sum(p*a) = {drift} != 1 + r = {growth}"
                )
        else:
            if abs(math.fsum(p) - 1) > _SUM_TOL:
                raise InvalidMeasure(f"risk-neutral masses sum to {total!r}, not 1")
            if abs(drift - growth) > _MARTINGALE_TOL:
                raise InvalidMeasure(
                    f"martingale constraint fails: sum(p*a) = {drift!r} != 1 + r = {growth!r}"
                )

    @property
    def k(self) -> int:
        return len(self.factors)

    @property
    def growth(self) -> Number:
        return 1 + self.rate

    def classes(self, m: int | None = None) -> list[CountClass]:
        return count_classes(self.n_periods if m is None else m, self.k)

    def is_class(self, counts, m: int | None = None) -> bool:
        return _is_class(counts, self.n_periods if m is None else m, self.k)

    def price(self, counts: CountClass) -> Number:
        return self.initial_price * math.prod(a**j for a, j in zip(self.factors, counts))

    def path_steps(self) -> int:
        return self.k**self.n_periods * self.n_periods

    def price_aliases(self, m: int, rel_tol: float = 1e-12) -> list[list[CountClass]]:
        """Groups of distinct time-``m`` classes that share a price level."""
        priced = sorted(((float(self.price(c)), c) for c in self.classes(m)), key=lambda t: t[0])
        groups, current = [], [priced[0]]
        for prev, cur in zip(priced, priced[1:]):
            if math.isclose(prev[0], cur[0], rel_tol=rel_tol):
                current.append(cur)
            else:
                if len(current) > 1:
                    groups.append(sorted(c for _, c in current))
                current = [cur]
        if len(current) > 1:
            groups.append(sorted(c for _, c in current))
        return groups


def build_economy(
    n: int,
    factors: Sequence,
    rate=0,
    initial_price=1,
    risk_neutral: Sequence | None = None,
    exact: bool = False,
) -> MultinomialEconomy:
    """Validate parameters and return a :class:`MultinomialEconomy`.

    For two factors the risk-neutral vector is derived when omitted; for more
    it must be supplied, since a one-asset trinomial market is incomplete.

    >>> build_economy(1, (2, 0.5), 0).risk_neutral
    (0.3333333333333333, 0.6666666666666666)
    """
    fac = tuple(to_number(a, exact) for a in factors)
    r = to_number(rate, exact)
    s = to_number(initial_price, exact)
    if len(fac) >= 2 and not fac[-1] < 1 + r < fac[0]:
        raise ArbitrageError(f"no-arbitrage requires {fac[-1]} < 1 + r = {1 + r} < {fac[0]}")
    if risk_neutral is None:
        if len(fac) != 2:
            raise Underdetermined(
                f"{len(fac)} factors admit many martingale measures; supply risk_neutral"
            )
        up = (1 + r - fac[1]) / (fac[0] - fac[1])
        p = (up, 1 - up)
    else:
        p = tuple(to_number(x, exact) for x in risk_neutral)
    return MultinomialEconomy(n, fac, r, s, p, exact)


def trinomial_risk_neutral(factors: Sequence, rate, middle) -> tuple:
    """The martingale measure of a trinomial step with middle mass ``middle``.

    Raises :class:`InvalidMeasure` if the resulting outer masses are not positive.
    """
    a, b, c = factors
    rest = 1 - middle
    target = 1 + rate - middle * b
    up = (target - rest * c) / (a - c)
    down = rest - up
    if up <= 0 or down <= 0 or middle <= 0:
        raise InvalidMeasure(f"middle mass {middle} gives non-positive masses ({up}, {down})")
    return (up, middle, down)


def reference_masses(economy: MultinomialEconomy, classes: Sequence[CountClass]) -> list[Number]:
    """Risk-neutral probability of each terminal class, without path enumeration."""
    p = economy.risk_neutral
    if economy.exact:
        return [multiplicity(c) * math.prod(pi**j for pi, j in zip(p, c)) for c in classes]
    if economy.n_periods <= 200:
        return [float(multiplicity(c)) * math.prod(pi**j for pi, j in zip(p, c)) for c in classes]
    logp = [math.log(pi) for pi in p]
    return [
        math.exp(math.log(multiplicity(c)) + math.fsum(j * lp for j, lp in zip(c, logp)))
        for c in classes
    ]


@dataclass(frozen=True)
class TerminalLaw:
    """A probability law over the terminal count classes of an ``n``-step, ``k``-move lattice.

    Classes absent from ``masses`` carry zero mass.  ``masses`` is stored in
    canonical (descending lexicographic) class order.
    """

    n: int
    k: int
    masses: Mapping[CountClass, Number] = field(repr=False)

    def __post_init__(self):
        bad = [c for c in self.masses if not _is_class(c, self.n, self.k)]
        if bad:
            raise ClassMismatch(
                f"classes {bad[:3]} are not terminal classes of a {self.n}-step {self.k}-move lattice"
            )
        if any(v < 0 for v in self.masses.values()):
            raise ValidationError("terminal masses must be nonnegative")
        ordered = dict(sorted(self.masses.items(), reverse=True))
        object.__setattr__(self, "masses", ordered)
        values = list(ordered.values())
        if any(isinstance(v, Fraction) for v in values) and all(
            isinstance(v, (Fraction, int)) for v in values
        ):
            if sum(values) != 1:
                raise ValidationError(f"terminal masses sum to {sum(values)}, not 1")
        elif abs(math.fsum(values) - 1) > _SUM_TOL:
            raise ValidationError(f"terminal masses sum to {math.fsum(values)!r}, not 1")

    @property
    def equivalent(self) -> bool:
        """True when every terminal class carries strictly positive mass."""
        positive = sum(1 for v in self.masses.values() if v > 0)
        return positive == n_classes(self.n, self.k)

    @property
    def exact(self) -> bool:
        return all(isinstance(v, (Fraction, int)) for v in self.masses.values())

    def mass(self, counts: CountClass) -> Number:
        return self.masses.get(counts, 0)

    def support(self) -> list[CountClass]:
        return [c for c, v in self.masses.items() if v > 0]

    def as_float(self) -> "TerminalLaw":
        return TerminalLaw(self.n, self.k, {c: float(v) for c, v in self.masses.items()})

    @classmethod
    def from_pairs(cls, n: int, k: int, pairs, exact: bool = False) -> "TerminalLaw":
        return cls(n, k, {tuple(int(x) for x in c): to_number(v, exact) for c, v in pairs})


def reference_terminal_law(economy: MultinomialEconomy) -> TerminalLaw:
    """Law of the terminal class under the risk-neutral measure."""
    classes = economy.classes()
    return TerminalLaw(economy.n_periods, economy.k, dict(zip(classes, reference_masses(economy, classes))))


class LatticePath(NamedTuple):
    moves: tuple
    classes: tuple  # count class at times 0..n


def path_classes(moves: Sequence[int], k: int) -> tuple:
    counts = [0] * k
    out = [tuple(counts)]
    for mv in moves:
        counts[mv] += 1
        out.append(tuple(counts))
    return tuple(out)


def _check_cap(economy: MultinomialEconomy, cap: int) -> None:
    if economy.path_steps() > cap:
        raise CapExceeded(economy.path_steps(), cap)


def iter_moves(economy: MultinomialEconomy, cap: int = DEFAULT_PATH_CAP) -> Iterator[tuple]:
    _check_cap(economy, cap)
    return itertools.product(range(economy.k), repeat=economy.n_periods)


def enumerate_paths(economy: MultinomialEconomy, cap: int = DEFAULT_PATH_CAP) -> list[LatticePath]:
    """All ``k**n`` move sequences in lexicographic order, with their class history."""
    return [LatticePath(mv, path_classes(mv, economy.k)) for mv in iter_moves(economy, cap)]


@dataclass(frozen=True)
class PathMeasure:
    """Probability weights on the ``k**n`` paths, aligned with :func:`iter_moves` order."""

    n: int
    k: int
    paths: tuple = field(repr=False)
    weights: tuple = field(repr=False)

    def __post_init__(self):
        if len(self.paths) != len(self.weights):
            raise ValidationError("paths and weights differ in length")
        if any(w < 0 for w in self.weights):
            raise ValidationError("path weights must be nonnegative")
        if self.exact:
            if sum(self.weights) != 1:
                raise ValidationError("path weights do not sum to 1")
        elif abs(math.fsum(self.weights) - 1) > 1e-12:
            raise ValidationError(f"path weights sum to {math.fsum(self.weights)!r}")

    @property
    def exact(self) -> bool:
        return all(isinstance(w, (Fraction, int)) for w in self.weights)

    def as_dict(self) -> dict:
        return dict(zip(self.paths, self.weights))

    def terminal_class(self, path: tuple) -> CountClass:
        counts = [0] * self.k
        for mv in path:
            counts[mv] += 1
        return tuple(counts)


def risk_neutral_path_measure(economy: MultinomialEconomy, cap: int = DEFAULT_PATH_CAP) -> PathMeasure:
    """Product measure with i.i.d. moves drawn from ``economy.risk_neutral``."""
    p = economy.risk_neutral
    paths = tuple(iter_moves(economy, cap))
    weights = tuple(math.prod(p[mv] for mv in path) for path in paths)
    return PathMeasure(economy.n_periods, economy.k, paths, weights)


def terminal_law(economy: MultinomialEconomy, measure: PathMeasure) -> TerminalLaw:
    """Push a path measure forward onto terminal count classes."""
    if measure.n != economy.n_periods or measure.k != economy.k:
        raise ClassMismatch("path measure does not live on this lattice")
    masses: dict = {}
    for path, w in zip(measure.paths, measure.weights):
        c = measure.terminal_class(path)
        masses[c] = masses.get(c, 0) + w
    if not measure.exact:
        masses = {c: float(v) for c, v in masses.items()}
    return TerminalLaw(economy.n_periods, economy.k, masses)
