"""Utility functions with their inverse marginal utility and convex conjugate.

All evaluators are vectorised over numpy arrays.  ``U(x) = -inf`` for
``x <= 0`` by convention.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, minimize_scalar

from weakinfo.errors import ValidationError


@dataclass(frozen=True)
class UtilitySpec:
    """A utility ``U`` on ``(0, inf)`` together with ``I = (U')^{-1}``.

    ``dU`` is optional; when missing, :meth:`marginal` falls back to central
    differences, which is only used for validation and never for solving.
    """

    tag: str
    U: Callable = field(repr=False)
    I: Callable = field(repr=False)
    dU: Optional[Callable] = field(default=None, repr=False)
    alpha: Optional[float] = None

    def value(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(x > 0, self.U(np.where(x > 0, x, 1.0)), -np.inf)
        return out if out.ndim else float(out)

    def marginal(self, x):
        x = np.asarray(x, dtype=float)
        if self.dU is not None:
            out = self.dU(x)
        else:
            h = 1e-5 * x
            out = (self.U(x + h) - self.U(x - h)) / (2 * h)
        return out if np.ndim(out) else float(out)

    def inverse_marginal(self, y):
        out = self.I(np.asarray(y, dtype=float))
        return out if np.ndim(out) else float(out)

    def conjugate(self, y):
        """``max_x U(x) - x y``, attained at ``x = I(y)``."""
        x = self.inverse_marginal(y)
        return self.value(x) - x * np.asarray(y, dtype=float)

    @property
    def label(self) -> str:
        return f"power:{self.alpha!r}" if self.tag == "power" else self.tag

    @classmethod
    def power(cls, alpha: float) -> "UtilitySpec":
        """``U(x) = x**alpha / alpha`` for ``0 < alpha < 1``."""
        alpha = float(alpha)
        if not 0 < alpha < 1:
            raise ValidationError(f"power utility needs 0 < alpha < 1, got {alpha}")
        return cls(
            "power",
            lambda x: x**alpha / alpha,
            lambda y: y ** (1.0 / (alpha - 1.0)),
            lambda x: x ** (alpha - 1.0),
            alpha,
        )

    @classmethod
    def log(cls) -> "UtilitySpec":
        return cls("log", np.log, lambda y: 1.0 / y, lambda x: 1.0 / x)

    @classmethod
    def custom(cls, U: Callable, I: Callable, dU: Optional[Callable] = None, tag: str = "custom"):
        return cls(tag, U, I, dU)

    @classmethod
    def mixture(cls, weights: Sequence[float], gammas: Sequence[float]) -> "UtilitySpec":
        """Sum of CRRA terms: ``U'(x) = sum_i w_i x**(-gamma_i)`` with ``w_i, gamma_i > 0``.

        ``gamma == 1`` contributes ``w log x``.  ``I`` is found by root finding in
        ``log x``, so it is exact to solver precision rather than closed form.
        """
        w = np.asarray(weights, dtype=float)
        g = np.asarray(gammas, dtype=float)
        if np.any(w <= 0) or np.any(g <= 0):
            raise ValidationError("mixture weights and curvatures must be positive")

        def U(x):
            x = np.asarray(x, dtype=float)[..., None]
            with np.errstate(divide="ignore"):
                terms = np.where(
                    np.isclose(g, 1.0), w * np.log(x), w * x ** (1 - g) / np.where(np.isclose(g, 1.0), 1.0, 1 - g)
                )
            return terms.sum(axis=-1)

        def dU(x):
            x = np.asarray(x, dtype=float)[..., None]
            return (w * x ** (-g)).sum(axis=-1)

        def solve(y: float) -> float:
            f = lambda t: np.log((w * np.exp(-g * t)).sum()) - np.log(y)
            lo, hi = -1.0, 1.0
            while f(lo) < 0:
                lo *= 2
            while f(hi) > 0:
                hi *= 2
            return float(np.exp(brentq(f, lo, hi, xtol=1e-15, rtol=1e-15)))

        def I(y):
            y = np.asarray(y, dtype=float)
            return np.vectorize(solve, otypes=[float])(y)

        return cls("mixture", U, I, dU)

    @classmethod
    def from_table(cls, x: Sequence[float], u: Sequence[float], du: Sequence[float]) -> "UtilitySpec":
        """Tabulated utility: columns ``x``, ``U(x)`` and marginal ``U'(x)``.

        ``U`` is a monotone cubic in ``log x``; ``I`` interpolates the reversed
        pairs ``(U'(x), x)`` in log-log space.  Outside the table ``U`` continues
        as ``a + b log x`` and ``I`` as a power law, so the Inada limits survive.
        """
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        du = np.asarray(du, dtype=float)
        if x.ndim != 1 or len(x) < 3 or not (len(x) == len(u) == len(du)):
            raise ValidationError("utility table needs three equal-length columns of >= 3 rows")
        if np.any(np.diff(x) <= 0) or np.any(x <= 0):
            raise ValidationError("utility table x column must be positive and increasing")
        if np.any(np.diff(u) <= 0) or np.any(du <= 0) or np.any(np.diff(du) >= 0):
            raise ValidationError("utility table must be increasing with decreasing positive marginal")
        lx, ldu = np.log(x), np.log(du)
        u_of_lx = PchipInterpolator(lx, u, extrapolate=False)
        lx_of_ldu = PchipInterpolator(ldu[::-1], lx[::-1], extrapolate=False)
        lo_slope = x[0] * du[0]
        hi_slope = x[-1] * du[-1]
        tail_lo = (lx[1] - lx[0]) / (ldu[1] - ldu[0])
        tail_hi = (lx[-1] - lx[-2]) / (ldu[-1] - ldu[-2])

        def U(v):
            t = np.log(np.asarray(v, dtype=float))
            out = u_of_lx(t)
            out = np.where(t < lx[0], u[0] + lo_slope * (t - lx[0]), out)
            return np.where(t > lx[-1], u[-1] + hi_slope * (t - lx[-1]), out)

        def I(y):
            s = np.log(np.asarray(y, dtype=float))
            out = lx_of_ldu(s)
            out = np.where(s > ldu[0], lx[0] + tail_lo * (s - ldu[0]), out)
            out = np.where(s < ldu[-1], lx[-1] + tail_hi * (s - ldu[-1]), out)
            return np.exp(out)

        return cls("table", U, I)


def load_utility_table(path) -> UtilitySpec:
    """Read a CSV with header ``x,U,dU`` into a tabulated utility."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"x", "U", "dU"}:
        raise ValidationError(f"{path}: expected CSV header x,U,dU")
    cols = {k: [float(r[k]) for r in rows] for k in ("x", "U", "dU")}
    return UtilitySpec.from_table(cols["x"], cols["U"], cols["dU"])


def parse_utility(text: str) -> UtilitySpec:
    """``"log"``, ``"power:<alpha>"`` or ``"table:<csv path>"``."""
    text = text.strip()
    if text == "log":
        return UtilitySpec.log()
    kind, _, arg = text.partition(":")
    if kind == "power" and arg:
        try:
            alpha = float(arg)
        except ValueError:
            raise ValidationError(f"utility: bad power exponent {arg!r}") from None
        return UtilitySpec.power(alpha)
    if kind == "table" and arg:
        if not Path(arg).is_file():
            raise ValidationError(f"utility: table file not found: {arg}")
        return load_utility_table(arg)
    raise ValidationError(f"utility: expected 'log', 'power:<alpha>' or 'table:<path>', got {text!r}")


@dataclass(frozen=True)
class UtilityCheck:
    increasing: bool
    concave: bool
    inada: bool
    inverse_error: float
    inverse_tol: float

    @property
    def ok(self) -> bool:
        return self.increasing and self.concave and self.inada and self.inverse_error <= self.inverse_tol


def validate_utility(utility: UtilitySpec, grid: Optional[Sequence[float]] = None) -> UtilityCheck:
    """Finite-difference shape checks, Inada limits via ``I``, and ``I(U'(x)) == x``."""
    x = np.geomspace(1e-3, 1e3, 61) if grid is None else np.asarray(grid, dtype=float)
    u = utility.value(x)
    increasing = bool(np.all(np.diff(u) > 0))
    # concavity: slopes between consecutive grid points must decrease
    slopes = np.diff(u) / np.diff(x)
    concave = bool(np.all(np.diff(slopes) < 0))
    i_small, i_one, i_big = utility.inverse_marginal(np.array([1e12, 1.0, 1e-12]))
    # I must head to 0 as y grows and to infinity as y shrinks; a factor of 100
    # over 24 decades still admits curvature up to about 6
    inada = bool(0 < i_small < 1e-2 * i_one and i_big > 1e2 * i_one)
    back = utility.inverse_marginal(utility.marginal(x))
    err = float(np.max(np.abs(back - x) / x))
    tol = 1e-10 if utility.dU is not None else 1e-6
    return UtilityCheck(increasing, concave, inada, err, tol)


@dataclass(frozen=True)
class DualityReport:
    y: tuple
    conjugate: tuple
    numeric_max: tuple
    value_gap: float
    argmax_gap: float

    @property
    def ok(self) -> bool:
        return self.value_gap <= 1e-8


def duality_check(utility: UtilitySpec, grid: Sequence[float]) -> DualityReport:
    """Maximise ``U(x) - x y`` by golden-section search around ``I(y)``.

    ``value_gap`` is the largest ``|numeric max - (U(I(y)) - I(y) y)|`` scaled by
    ``max(1, |conjugate|)``; ``argmax_gap`` is the largest relative distance of
    the numeric maximiser from ``I(y)`` (limited to ~1e-8 by the flat optimum).
    """
    ys = np.asarray(grid, dtype=float)
    if np.any(ys <= 0):
        raise ValidationError("duality grid must be positive")
    conj, best, vgap, agap = [], [], 0.0, 0.0
    for y in ys:
        x0 = float(utility.inverse_marginal(y))
        target = float(utility.conjugate(y))
        res = minimize_scalar(
            lambda t: -(float(utility.value(np.exp(t))) - np.exp(t) * y),
            bracket=(np.log(x0) - 1.0, np.log(x0), np.log(x0) + 1.0),
            method="golden",
            tol=1e-12,
        )
        found = -float(res.fun)
        conj.append(target)
        best.append(found)
        vgap = max(vgap, abs(found - target) / max(1.0, abs(target)))
        agap = max(agap, abs(np.exp(res.x) - x0) / x0)
    return DualityReport(tuple(ys.tolist()), tuple(conj), tuple(best), vgap, agap)
