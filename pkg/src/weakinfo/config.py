"""YAML input files: economies, terminal laws, and run configs.

Numbers may be written as YAML numbers or as strings holding decimals or
exact fractions (``"1/3"``).  Every loader returns the raw file text next to
the parsed object so reports can echo inputs byte for byte.
"""
from __future__ import annotations

from pathlib import Path

import yaml

from weakinfo.errors import ValidationError
from weakinfo.lattice import MultinomialEconomy, TerminalLaw, build_economy

ECONOMY_KEYS = {"n", "factors", "rate", "initial_price", "risk_neutral"}


def read_text(path, label: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"{label} file not found: {path}")
    return p.read_text()


def parse_yaml(text: str, label: str):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"{label}: not valid YAML ({exc})") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{label}: expected a mapping at top level")
    return data


def economy_from_dict(data: dict, exact: bool = False, label: str = "economy") -> MultinomialEconomy:
    unknown = set(data) - ECONOMY_KEYS
    if unknown:
        raise ValidationError(f"{label}: unknown field(s) {sorted(unknown)}")
    for key in ("n", "factors"):
        if key not in data:
            raise ValidationError(f"{label}: missing field '{key}'")
    if not isinstance(data["n"], int):
        raise ValidationError(f"{label}: field 'n' must be an integer")
    if not isinstance(data["factors"], list):
        raise ValidationError(f"{label}: field 'factors' must be a list")
    try:
        return build_economy(
            data["n"],
            data["factors"],
            data.get("rate", 0),
            data.get("initial_price", 1),
            data.get("risk_neutral"),
            exact=exact,
        )
    except (TypeError, ZeroDivisionError) as exc:
        raise ValidationError(f"{label}: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise type(exc)(f"{label}: {exc}") from None
        raise ValidationError(f"{label}: {exc}") from None


def load_economy(path, exact: bool = False) -> tuple[MultinomialEconomy, str]:
    text = read_text(path, "economy")
    return economy_from_dict(parse_yaml(text, str(path)), exact, str(path)), text


def law_from_dict(data: dict, economy: MultinomialEconomy, exact: bool = False, label: str = "nu") -> TerminalLaw:
    """``masses`` is a list of ``[counts, mass]`` pairs; optional ``n``/``k`` must match the economy."""
    if "masses" not in data or not isinstance(data["masses"], list):
        raise ValidationError(f"{label}: missing list field 'masses'")
    for key, want in (("n", economy.n_periods), ("k", economy.k)):
        if key in data and data[key] != want:
            raise ValidationError(f"{label}: field '{key}' is {data[key]}, economy has {want}")
    pairs = []
    for i, item in enumerate(data["masses"]):
        if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], list)):
            raise ValidationError(f"{label}: masses[{i}] must be [counts, mass]")
        pairs.append((tuple(item[0]), item[1]))
    try:
        return TerminalLaw.from_pairs(economy.n_periods, economy.k, pairs, exact=exact)
    except (TypeError, ZeroDivisionError) as exc:
        raise ValidationError(f"{label}: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise type(exc)(f"{label}: {exc}") from None
        raise ValidationError(f"{label}: {exc}") from None


def load_terminal_law(path, economy: MultinomialEconomy, exact: bool = False) -> tuple[TerminalLaw, str]:
    text = read_text(path, "nu")
    return law_from_dict(parse_yaml(text, str(path)), economy, exact, str(path)), text


def load_run_config(path) -> tuple[dict, str]:
    text = read_text(path, "config")
    data = parse_yaml(text, str(path))
    opts = {k.replace("-", "_"): v for k, v in data.items()}
    if "n_list" in opts:
        if "n" in opts:
            raise ValidationError(f"{path}: give only one of 'n' and 'n_list'")
        opts["n"] = opts.pop("n_list")
    return opts, text
