"""The minimal measure attached to a terminal anticipation, and its diagnostics.

Given a law ``nu`` on terminal count classes, the minimal measure keeps the
risk-neutral conditional law of the path given its terminal class and
reweights classes by ``nu``.  Under the i.i.d. risk-neutral measure every
path into a class is equally likely, so the path weight is simply
``nu(class) / multiplicity(class)`` and the risk-neutral vector drops out.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Union

import numpy as np

from weakinfo.errors import ClassMismatch, UnreachableState, ValidationError
from weakinfo.lattice import (
    DEFAULT_PATH_CAP,
    CountClass,
    MultinomialEconomy,
    Number,
    PathMeasure,
    TerminalLaw,
    iter_moves,
    multiplicity,
    reference_masses,
    risk_neutral_path_measure,
    step,
)


@dataclass(frozen=True)
class WeakInfoMeasure:
    """Minimal measure for the anticipation ``nu`` on ``economy``.

    Attributes
    ----------
    prefix_weight : dict
        ``(m, counts) -> `` probability of any single length-``m`` path prefix
        ending in ``counts``.  All prefixes into the same class share it.
    marginals : dict
        ``(m, counts) -> `` probability of being in class ``counts`` at time ``m``.
    density : dict
        Terminal class -> ``nu(class) / P~(class)``, the density with respect to
        the risk-neutral measure.
    paths : PathMeasure or None
        Path weights, present when the lattice was enumerated.
    """

    economy: MultinomialEconomy
    nu: TerminalLaw
    prefix_weight: Mapping = field(repr=False)
    marginals: Mapping = field(repr=False)
    density: Mapping = field(repr=False)
    paths: PathMeasure | None = field(default=None, repr=False)

    @property
    def exact(self) -> bool:
        return self.nu.exact and self.economy.exact


def _check_law(economy: MultinomialEconomy, nu: TerminalLaw) -> None:
    if nu.n != economy.n_periods or nu.k != economy.k:
        raise ClassMismatch(
            f"anticipation lives on a {nu.n}-step {nu.k}-move lattice, "
            f"economy is {economy.n_periods}-step {economy.k}-move"
        )


def minimal_measure(
    economy: MultinomialEconomy,
    nu: TerminalLaw,
    enumerate_paths: bool = True,
    cap: int = DEFAULT_PATH_CAP,
) -> WeakInfoMeasure:
    """Build the minimal measure associated with the anticipation ``nu``."""
    _check_law(economy, nu)
    if not economy.exact and nu.exact:
        nu = nu.as_float()
    n, k = economy.n_periods, economy.k

    prefix: dict = {}
    for c in economy.classes(n):
        prefix[(n, c)] = nu.mass(c) / multiplicity(c)
    for m in range(n - 1, -1, -1):
        for c in economy.classes(m):
            prefix[(m, c)] = sum(prefix[(m + 1, step(c, e))] for e in range(k))
    marginals = {key: multiplicity(key[1]) * w for key, w in prefix.items()}

    terminal = economy.classes(n)
    ref = reference_masses(economy, terminal)
    density = {c: nu.mass(c) / r for c, r in zip(terminal, ref)}

    paths = None
    if enumerate_paths:
        moves = tuple(iter_moves(economy, cap))
        weights = []
        for mv in moves:
            counts = [0] * k
            for e in mv:
                counts[e] += 1
            weights.append(prefix[(n, tuple(counts))])
        paths = PathMeasure(n, k, moves, tuple(weights))
    return WeakInfoMeasure(economy, nu, prefix, marginals, density, paths)


def transition_probability(measure: WeakInfoMeasure, m: int, state: CountClass, move: int) -> Number:
    """Probability of taking ``move`` at time ``m`` from class ``state``.

    Closed form: with ``l = n - m`` steps left, a prefix in ``state`` carries
    weight ``sum_j C(l; j - state) * nu(j) / C(n; j)`` over terminal classes
    ``j`` reachable from ``state``; the numerator restricts to continuations
    whose first step is ``move``, i.e. ``C(l - 1; j - state - e_move)``.
    """
    econ = measure.economy
    n, k = econ.n_periods, econ.k
    if not 0 <= m < n:
        raise ValidationError(f"time index must satisfy 0 <= m < {n}, got {m}")
    if not econ.is_class(state, m):
        raise ValidationError(f"{state!r} is not a time-{m} class of a {k}-move lattice")
    if not 0 <= move < k:
        raise ValidationError(f"move must be in 0..{k - 1}, got {move}")

    num = 0
    den = 0
    for j, mass in measure.nu.masses.items():
        if mass == 0:
            continue
        rest = tuple(a - b for a, b in zip(j, state))
        if min(rest) < 0:
            continue
        if measure.exact:
            base = Fraction(mass) / multiplicity(j)
        else:
            base = mass / multiplicity(j)
        den += multiplicity(rest) * base
        if rest[move] > 0:
            after = rest[:move] + (rest[move] - 1,) + rest[move + 1:]
            num += multiplicity(after) * base
    if den == 0:
        raise UnreachableState(f"class {state} at time {m} has zero probability")
    return num / den


def transition_table(measure: WeakInfoMeasure) -> list[tuple]:
    """``(m, state, move, probability)`` for every reachable node."""
    econ = measure.economy
    rows = []
    for m in range(econ.n_periods):
        for c in econ.classes(m):
            if measure.marginals[(m, c)] == 0:
                continue
            for e in range(econ.k):
                rows.append((m, c, e, transition_probability(measure, m, c, e)))
    return rows


def path_transitions(paths: PathMeasure) -> dict:
    """Brute-force ``P[move at m | class at m]`` by summing enumerated path weights.

    Returns ``(m, state, move) -> probability`` for classes with positive mass.
    """
    k = paths.k
    joint: dict = {}
    occupancy: dict = {}
    for path, w in zip(paths.paths, paths.weights):
        counts = [0] * k
        for m, e in enumerate(path):
            c = tuple(counts)
            occupancy[(m, c)] = occupancy.get((m, c), 0) + w
            joint[(m, c, e)] = joint.get((m, c, e), 0) + w
            counts[e] += 1
    out = {}
    for (m, c), total in occupancy.items():
        if total == 0:
            continue
        for e in range(k):
            out[(m, c, e)] = joint.get((m, c, e), 0) / total
    return out


@dataclass(frozen=True)
class MarkovReport:
    max_deviation: Number
    per_time: tuple
    histories: int
    aliases: dict  # time -> groups of classes sharing a price level


def markov_check(measure: WeakInfoMeasure) -> MarkovReport:
    """Compare history-conditioned and class-conditioned move probabilities.

    Every positive-probability prefix is visited; the deviation between
    ``P[move | prefix]`` and ``P[move | class of prefix]`` is tracked, both
    computed from the enumerated path weights.
    """
    if measure.paths is None:
        raise ValidationError("markov_check needs an enumerated path measure")
    paths = measure.paths
    econ = measure.economy
    n, k = econ.n_periods, econ.k
    by_class = path_transitions(paths)

    prefix_mass: dict = {}
    for path, w in zip(paths.paths, paths.weights):
        for m in range(n + 1):
            key = path[:m]
            prefix_mass[key] = prefix_mass.get(key, 0) + w

    per_time = [0] * n
    histories = 0
    for prefix, mass in prefix_mass.items():
        m = len(prefix)
        if m == n or mass == 0:
            continue
        histories += 1
        counts = [0] * k
        for e in prefix:
            counts[e] += 1
        c = tuple(counts)
        for e in range(k):
            given_history = prefix_mass.get(prefix + (e,), 0) / mass
            dev = abs(given_history - by_class[(m, c, e)])
            if dev > per_time[m]:
                per_time[m] = dev
    aliases = {m: g for m in range(1, n + 1) if (g := econ.price_aliases(m))}
    return MarkovReport(max(per_time), tuple(per_time), histories, aliases)


def _square(d):
    return d * d


def _xlogx(d):
    d = float(d)
    return d * math.log(d) if d > 0 else 0.0


PHI: dict[str, Callable] = {"square": _square, "xlogx": _xlogx}


@dataclass(frozen=True)
class MinimalityReport:
    phi: str
    baseline: float
    gaps: tuple = field(repr=False)

    @property
    def min_gap(self) -> float:
        return min(self.gaps)

    @property
    def violations(self) -> int:
        return sum(1 for g in self.gaps if g < -1e-12)


def _divergence(weights, reference, phi) -> Number:
    return sum(r * phi(w / r) for w, r in zip(weights, reference))


def sample_competitor(measure: WeakInfoMeasure, rng: np.random.Generator) -> tuple:
    """Random path weights with terminal law ``nu``: mass is split within each class
    by a flat Dirichlet draw, so every weight stays positive on supported classes."""
    paths = measure.paths
    draws = rng.standard_exponential(len(paths.paths))
    groups: dict = {}
    for idx, path in enumerate(paths.paths):
        groups.setdefault(paths.terminal_class(path), []).append(idx)
    out = [0] * len(draws)
    exact = measure.exact
    for c, idxs in groups.items():
        mass = measure.nu.mass(c)
        if exact:
            raw = [Fraction(float(draws[i])) for i in idxs]
        else:
            raw = [float(draws[i]) for i in idxs]
        total = sum(raw)
        for i, v in zip(idxs, raw):
            out[i] = mass * v / total
    return tuple(out)


def minimality_check(
    economy: MultinomialEconomy,
    nu: TerminalLaw,
    phi: Union[str, Callable] = "square",
    trials: int = 1000,
    seed: int = 0,
    threads: int = 1,
) -> MinimalityReport:
    """Sample measures with terminal law ``nu`` and compare convex divergences.

    Each gap is ``E~[phi(dQ/dP~)] - E~[phi(dP^nu/dP~)]``; minimality says it is
    never negative.  Trial ``t`` draws from ``default_rng([seed, t])`` so the
    result does not depend on ``threads``.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    if not nu.equivalent:
        raise ValidationError("minimality_check needs an equivalent anticipation")
    name = phi if isinstance(phi, str) else getattr(phi, "__name__", "custom")
    fn = PHI[phi] if isinstance(phi, str) else phi
    measure = minimal_measure(economy, nu)
    reference = risk_neutral_path_measure(economy).weights
    baseline = _divergence(measure.paths.weights, reference, fn)

    def one(t: int):
        q = sample_competitor(measure, np.random.default_rng([seed, t]))
        return _divergence(q, reference, fn) - baseline

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            gaps = tuple(pool.map(one, range(trials)))
    else:
        gaps = tuple(one(t) for t in range(trials))
    return MinimalityReport(name, baseline, gaps)
