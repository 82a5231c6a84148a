"""Financial value of weak information, optimal wealth, and binomial replication.

In a complete market the insider's optimal terminal wealth on terminal class
``y`` is ``I(Lambda / xi(y))`` where ``xi = d nu / d P~_Y`` and the multiplier
``Lambda`` makes the discounted risk-neutral price of that wealth equal the
initial capital ``x``.  The value is the ``nu``-expectation of its utility.

Discounting: budgets under ``P~`` carry the factor ``(1 + r)**-n``; utility is
applied to undiscounted terminal wealth.  Hence without information
(``nu = P~_Y``) the value is ``U(x * (1 + r)**n)``, which is ``U(x)`` at ``r = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.special import roots_hermitenorm

from weakinfo.errors import (
    BracketFailure,
    IncompleteMarket,
    NotEquivalent,
    QuadratureDivergence,
    ValidationError,
)
from weakinfo.lattice import (
    CountClass,
    MultinomialEconomy,
    TerminalLaw,
    iter_moves,
    multiplicity,
    path_classes,
    reference_masses,
    step,
)
from weakinfo.utility import UtilitySpec

_LAMBDA_RANGE = (1e-300, 1e300)
_NEGLIGIBLE = 1e-280


def budget(utility: UtilitySpec, multiplier: float, xi, reference, discount: float = 1.0) -> float:
    """Discounted risk-neutral price of the terminal profile ``I(multiplier / xi)``."""
    with np.errstate(over="ignore", divide="ignore"):
        wealth = utility.inverse_marginal(multiplier / np.asarray(xi, dtype=float))
    return math.fsum(np.asarray(wealth * np.asarray(reference, dtype=float), dtype=float).ravel()) * discount


def solve_lambda(
    utility: UtilitySpec,
    xi,
    reference,
    x: float,
    discount: float = 1.0,
    n: int = 0,
    rtol: float = 1e-15,
) -> float:
    """Multiplier ``Lambda`` with ``sum_y I(Lambda/xi(y)) P~_Y(y) * discount**n == x``.

    The budget is strictly decreasing in ``Lambda``, so after expanding a
    bracket geometrically from ``U'(x)`` the root is found by bisection in
    ``log Lambda``.
    """
    if not x > 0:
        raise ValidationError(f"initial wealth must be positive, got {x}")
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise NotEquivalent("density must be strictly positive on every class")
    disc = float(discount) ** n

    def excess(lam: float) -> float:
        b = budget(utility, lam, xi, reference, disc)
        return b - x if np.isfinite(b) else math.inf

    guess = float(utility.marginal(x))
    if not np.isfinite(guess) or guess <= 0:
        guess = 1.0
    lo = hi = guess
    while excess(lo) < 0:
        lo /= 16
        if lo < _LAMBDA_RANGE[0]:
            raise BracketFailure("budget stays below x as the multiplier shrinks")
    while excess(hi) > 0:
        hi *= 16
        if hi > _LAMBDA_RANGE[1]:
            raise BracketFailure("budget stays above x as the multiplier grows")
    if lo < _LAMBDA_RANGE[0] or hi > _LAMBDA_RANGE[1]:
        raise BracketFailure(f"multiplier leaves [{_LAMBDA_RANGE[0]:g}, {_LAMBDA_RANGE[1]:g}]")
    if lo == hi:
        return lo
    for _ in range(400):
        mid = math.sqrt(lo * hi)
        f = excess(mid)
        if abs(f) <= rtol * x:
            return mid
        if f > 0:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < 4e-16:
            break
    return lo if abs(excess(lo)) <= abs(excess(hi)) else hi


@dataclass(frozen=True)
class WealthProcess:
    """Optimal wealth per node ``(m, counts)``; ``values[(0, (0,)*k)] == x``."""

    economy: MultinomialEconomy
    values: Mapping = field(repr=False)


@dataclass(frozen=True)
class HedgeStrategy:
    """Holdings chosen at node ``(m, counts)`` and kept over ``(m, m+1]``.

    ``shares`` counts units of the risky asset, ``bond`` is the cash amount
    placed in the bond at time ``m``.
    """

    economy: MultinomialEconomy
    shares: Mapping = field(repr=False)
    bond: Mapping = field(repr=False)


@dataclass(frozen=True)
class ValuationResult:
    value: float
    multiplier: float
    budget_residual: float
    terminal_wealth: Mapping = field(repr=False)
    density: Mapping = field(repr=False)
    wealth: Optional[WealthProcess] = field(default=None, repr=False)
    hedge: Optional[HedgeStrategy] = field(default=None, repr=False)
    quadrature_residual: Optional[float] = None


def _class_arrays(economy: MultinomialEconomy, nu: TerminalLaw):
    if nu.n != economy.n_periods or nu.k != economy.k:
        raise ValidationError("anticipation and economy have different lattice shapes")
    classes = economy.classes()
    ref = np.array([float(v) for v in reference_masses(economy, classes)])
    mass = np.array([float(nu.mass(c)) for c in classes])
    # far-tail classes of long lattices reach float underflow; below this
    # cutoff they are dropped (total weight < 1e-276 even for n = 10**4)
    keep = ref > _NEGLIGIBLE
    if np.any(mass[keep] <= 0):
        raise NotEquivalent("anticipation gives zero mass to some terminal class")
    if math.fsum(mass[~keep]) > 1e-12:
        raise ValidationError("anticipation puts mass where the reference mass underflows")
    classes = [c for c, k in zip(classes, keep) if k]
    return classes, ref[keep], mass[keep]


def value_discrete(economy: MultinomialEconomy, nu: TerminalLaw, utility: UtilitySpec, x: float) -> ValuationResult:
    """Value of the anticipation ``nu`` for capital ``x`` on a lattice economy.

    Works on terminal classes only, so the lattice is never enumerated.
    """
    classes, ref, mass = _class_arrays(economy, nu)
    xi = mass / ref
    n = economy.n_periods
    disc = 1.0 / float(economy.growth)
    lam = solve_lambda(utility, xi, ref, x, disc, n)
    wealth = utility.inverse_marginal(lam / xi)
    value = math.fsum(mass * utility.value(wealth))
    residual = budget(utility, lam, xi, ref, disc**n) - x
    return ValuationResult(
        value,
        lam,
        residual,
        dict(zip(classes, wealth.tolist())),
        dict(zip(classes, xi.tolist())),
    )


class GaussianLaw:
    """``N(mean, variance)`` with Gauss-Hermite rules of any order."""

    def __init__(self, mean: float = 0.0, variance: float = 1.0):
        if variance <= 0:
            raise ValidationError("variance must be positive")
        self.mean = float(mean)
        self.variance = float(variance)

    def rule(self, order: int):
        nodes, weights = roots_hermitenorm(order)
        return self.mean + math.sqrt(self.variance) * nodes, weights / math.sqrt(2 * math.pi)

    def __repr__(self):
        return f"GaussianLaw({self.mean!r}, {self.variance!r})"


class FixedRule:
    """A fixed node/weight list; refinement is not possible."""

    def __init__(self, nodes, weights):
        self.nodes = np.asarray(nodes, dtype=float)
        self.weights = np.asarray(weights, dtype=float)

    def rule(self, order: int):
        return self.nodes, self.weights


def _continuous_once(xi: Callable, nodes, weights, utility: UtilitySpec, x: float):
    dens = np.asarray(xi(nodes), dtype=float)
    if np.any(dens <= 0) or not np.all(np.isfinite(dens)):
        raise ValidationError("density must be finite and positive on the quadrature nodes")
    lam = solve_lambda(utility, dens, weights, x)
    wealth = utility.inverse_marginal(lam / dens)
    value = math.fsum(weights * dens * utility.value(wealth))
    residual = budget(utility, lam, dens, weights) - x
    return value, lam, residual, wealth, dens


def value_continuous(
    xi: Callable,
    reference_law,
    utility: UtilitySpec,
    x: float,
    order: int = 64,
    max_order: int = 1024,
    tol: float = 1e-10,
) -> ValuationResult:
    """Continuous-time value ``int (U o I)(Lambda/xi) d nu`` by quadrature against ``P_Y``.

    ``reference_law`` exposes ``rule(order) -> (nodes, weights)``.  The order
    doubles until the value moves by less than ``tol``; exceeding
    ``max_order`` first raises :class:`QuadratureDivergence`.  A
    :class:`FixedRule` is evaluated once and reports no residual.
    """
    if isinstance(reference_law, FixedRule):
        nodes, weights = reference_law.rule(0)
        v, lam, res, wealth, dens = _continuous_once(xi, nodes, weights, utility, x)
        return ValuationResult(v, lam, res, dict(zip(nodes.tolist(), wealth.tolist())),
                               dict(zip(nodes.tolist(), dens.tolist())))
    nodes, weights = reference_law.rule(order)
    prev = _continuous_once(xi, nodes, weights, utility, x)
    while True:
        order *= 2
        if order > max_order:
            raise QuadratureDivergence(
                f"quadrature did not settle to {tol:g} by order {max_order}"
            )
        nodes, weights = reference_law.rule(order)
        cur = _continuous_once(xi, nodes, weights, utility, x)
        delta = abs(cur[0] - prev[0])
        if delta < tol:
            v, lam, res, wealth, dens = cur
            return ValuationResult(
                v, lam, res,
                dict(zip(nodes.tolist(), wealth.tolist())),
                dict(zip(nodes.tolist(), dens.tolist())),
                quadrature_residual=delta,
            )
        prev = cur


def _conditional_reference(economy: MultinomialEconomy, counts: CountClass, target: CountClass) -> float:
    rest = tuple(t - c for t, c in zip(target, counts))
    if min(rest) < 0:
        return 0.0
    p = economy.risk_neutral
    return float(multiplicity(rest) * math.prod(pi**j for pi, j in zip(p, rest)))


def optimal_wealth_process(
    economy: MultinomialEconomy,
    nu: TerminalLaw,
    utility: UtilitySpec,
    x: float,
    result: Optional[ValuationResult] = None,
) -> WealthProcess:
    """Optimal wealth at every node.

    ``V_m = (1+r)**-(n-m) * sum_y W(y) P~[Y = y | class at m]`` with ``W`` the
    optimal terminal profile.  Computed directly from the conditional
    risk-neutral law, not by backward induction, so the martingale property
    is a genuine check.
    """
    if result is None:
        result = value_discrete(economy, nu, utility, x)
    n = economy.n_periods
    growth = float(economy.growth)
    terminal = economy.classes()
    values = {}
    for m in range(n + 1):
        disc = growth ** -(n - m)
        for c in economy.classes(m):
            if m == n:
                values[(m, c)] = result.terminal_wealth[c]
                continue
            values[(m, c)] = disc * math.fsum(
                result.terminal_wealth[y] * _conditional_reference(economy, c, y) for y in terminal
            )
    return WealthProcess(economy, values)


def martingale_residual(process: WealthProcess) -> float:
    """``max |E~[V_{m+1} | node] / (1+r) - V_m|`` over all non-terminal nodes."""
    econ = process.economy
    p = [float(v) for v in econ.risk_neutral]
    growth = float(econ.growth)
    worst = 0.0
    for m in range(econ.n_periods):
        for c in econ.classes(m):
            ahead = math.fsum(p[e] * process.values[(m + 1, step(c, e))] for e in range(econ.k))
            worst = max(worst, abs(ahead / growth - process.values[(m, c)]))
    return worst


def hedge_strategy(economy: MultinomialEconomy, wealth: WealthProcess) -> HedgeStrategy:
    """Replicating holdings for a binomial wealth process.

    At each node the share count solves the two-state system
    ``shares * S_m * a_e + bond * (1 + r) = V_{m+1}(e)``.
    """
    if economy.k != 2:
        raise IncompleteMarket(f"replication needs a binomial lattice, got {economy.k} moves")
    a_up, a_down = (float(a) for a in economy.factors)
    growth = float(economy.growth)
    shares, bond = {}, {}
    for m in range(economy.n_periods):
        for c in economy.classes(m):
            s = float(economy.price(c))
            v_up = wealth.values[(m + 1, step(c, 0))]
            v_down = wealth.values[(m + 1, step(c, 1))]
            theta = (v_up - v_down) / (s * (a_up - a_down))
            shares[(m, c)] = theta
            bond[(m, c)] = (v_down - theta * s * a_down) / growth
    return HedgeStrategy(economy, shares, bond)


@dataclass(frozen=True)
class ReplicationReport:
    max_error: float
    self_financing_error: float
    min_wealth: float

    @property
    def admissible(self) -> bool:
        return self.min_wealth >= 0


def simulate_strategy(strategy: HedgeStrategy, x: float, wealth: Optional[WealthProcess] = None) -> ReplicationReport:
    """Run the strategy forward along every path starting from capital ``x``.

    Along each path the portfolio value is carried forward from the previous
    holdings only.  ``max_error`` compares it with ``wealth`` node by node;
    ``self_financing_error`` is the gap between the carried value and the cost
    of the next holdings at the same prices.
    """
    econ = strategy.economy
    n = econ.n_periods
    growth = float(econ.growth)
    max_err = sf_err = 0.0
    min_v = math.inf
    for moves in iter_moves(econ):
        hist = path_classes(moves, econ.k)
        v = float(x)
        for m in range(n + 1):
            c = hist[m]
            s = float(econ.price(c))
            min_v = min(min_v, v)
            if wealth is not None:
                max_err = max(max_err, abs(v - wealth.values[(m, c)]))
            if m == n:
                break
            theta, cash = strategy.shares[(m, c)], strategy.bond[(m, c)]
            sf_err = max(sf_err, abs(theta * s + cash - v))
            s_next = float(econ.price(hist[m + 1]))
            v = theta * s_next + cash * growth
    return ReplicationReport(max_err, sf_err, min_v)
