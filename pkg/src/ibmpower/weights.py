"""Closed registry of weight functions with analytic derivatives and antiderivatives."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class WeightFunction:
    name: str
    f: Callable
    f1: Callable
    f2: Callable
    F: Callable  # antiderivative, F(0) = 0
    bounded_derivs: bool
    deriv_bounds: tuple[float, float]


def _const(c):
    return lambda x: np.zeros_like(np.asarray(x, dtype=float)) + c


_REGISTRY = {
    "one": WeightFunction(
        "one", _const(1.0), _const(0.0), _const(0.0),
        lambda x: np.asarray(x, dtype=float) * 1.0, True, (0.0, 0.0)),
    "identity": WeightFunction(
        "identity", lambda x: np.asarray(x, dtype=float) * 1.0, _const(1.0), _const(0.0),
        lambda x: 0.5 * np.square(x), True, (1.0, 0.0)),
    "cos": WeightFunction(
        "cos", np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin, True, (1.0, 1.0)),
    "sin": WeightFunction(
        "sin", np.sin, np.cos, lambda x: -np.sin(x), lambda x: 1.0 - np.cos(x), True, (1.0, 1.0)),
    "atan": WeightFunction(
        "atan", np.arctan,
        lambda x: 1.0 / (1.0 + np.square(x)),
        lambda x: -2.0 * x / np.square(1.0 + np.square(x)),
        lambda x: x * np.arctan(x) - 0.5 * np.log1p(np.square(x)),
        True, (1.0, 3 * np.sqrt(3) / 8)),
    "cauchy": WeightFunction(
        "cauchy", lambda x: 1.0 / (1.0 + np.square(x)),
        lambda x: -2.0 * x / np.square(1.0 + np.square(x)),
        lambda x: (6.0 * np.square(x) - 2.0) / (1.0 + np.square(x)) ** 3,
        np.arctan, True, (3 * np.sqrt(3) / 8, 2.0)),
}

REGISTRY_NAMES = tuple(_REGISTRY)


def registry_get(name: str) -> WeightFunction:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown weight {name!r}; registry contains {', '.join(REGISTRY_NAMES)}") from None


def check_weight(w: WeightFunction, h: float = 1e-5, tol: float = 1e-6) -> None:
    """Raise AssertionError if ``w`` violates its declared derivative bounds or F' != f."""
    grid = np.linspace(-50.0, 50.0, 20001)
    if w.bounded_derivs:
        b1, b2 = w.deriv_bounds
        assert np.max(np.abs(w.f1(grid))) <= b1 + 1e-12, f"{w.name}: sup|f'| exceeds {b1}"
        assert np.max(np.abs(w.f2(grid))) <= b2 + 1e-12, f"{w.name}: sup|f''| exceeds {b2}"
    xs = np.linspace(-5.0, 5.0, 100)
    fd = (w.F(xs + h) - w.F(xs - h)) / (2 * h)
    err = np.max(np.abs(fd - w.f(xs)))
    assert err <= tol, f"{w.name}: F' differs from f by {err:g}"
    assert abs(float(w.F(0.0))) == 0.0, f"{w.name}: F(0) != 0"
