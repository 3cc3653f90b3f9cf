"""Birkhoff averages and ensemble dispersion as ergodicity diagnostics.

Small dispersion of time averages is consistent with ergodicity at the given
horizon; it proves nothing about the limit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInput
from .maps import SmoothMap


@dataclass(frozen=True)
class Observable:
    label: str
    fn: Callable[[np.ndarray], np.ndarray]
    space_average: float

    def __call__(self, X) -> np.ndarray:
        return self.fn(np.atleast_2d(X))


def trig_observable(k, kind: str = "cos") -> Observable:
    """cos or sin of 2 pi k.x for an integer frequency vector k != 0 (space average 0)."""
    k = np.asarray(k, dtype=int)
    if k.shape != (3,) or not k.any():
        raise InvalidInput("frequency must be a nonzero integer triple")
    trig = {"cos": np.cos, "sin": np.sin}[kind]
    expr = ""
    for c, v in zip(k, "xyz"):
        if c:
            sign = "-" if c < 0 else ("+" if expr else "")
            expr += sign + (v if abs(c) == 1 else f"{abs(c)}{v}")
    label = f"{kind}(2pi({expr}))" if np.count_nonzero(k) > 1 or k[k != 0][0] < 0 else f"{kind}(2pi{expr})"
    kf = k.astype(float)
    return Observable(label, lambda X: trig(2 * np.pi * (X @ kf)), 0.0)


def constant_observable(c: float = 1.0) -> Observable:
    return Observable(f"const({c:g})", lambda X: np.full(len(X), float(c)), float(c))


def default_observables() -> list[Observable]:
    return [trig_observable(k) for k in ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1))]


def time_averages(f: SmoothMap, observables: list[Observable], X0: np.ndarray, horizons) -> np.ndarray:
    """Running averages of every observable at each horizon; shape (len(horizons), len(obs), E).

    One orbit pass serves all horizons: the running sums are read off at each
    requested n.
    """
    hs = sorted(int(h) for h in horizons)
    if hs[0] < 1:
        raise InvalidInput("horizons must be positive")
    x = np.atleast_2d(np.asarray(X0, dtype=float)).copy()
    sums = np.zeros((len(observables), len(x)))
    out = np.empty((len(hs), len(observables), len(x)))
    j = 0
    for n in range(1, hs[-1] + 1):
        for i, ob in enumerate(observables):
            sums[i] += ob(x)
        x = f(x)
        while j < len(hs) and hs[j] == n:
            out[j] = sums / n
            j += 1
    return out


def birkhoff_average(f: SmoothMap, obs: Observable, x0, n: int):
    """(1/n) sum_{j<n} obs(f^j x0); ``x0`` may be a batch."""
    if n < 1:
        raise InvalidInput("n must be positive")
    x0 = np.asarray(x0, dtype=float)
    r = time_averages(f, [obs], x0, [n])[0, 0]
    return float(r[0]) if x0.ndim == 1 else r


def ensemble_points(size: int, seed: int) -> np.ndarray:
    """Member i is drawn from its own child seed, independent of the ensemble size."""
    return np.array([np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,))).random(3)
                     for i in range(size)])


@dataclass
class DispersionReport:
    observable: str
    ensemble_size: int
    n: int
    averages: np.ndarray
    deviation: float
    space_average: float
    seed: int

    def to_dict(self) -> dict:
        return {"observable": self.observable, "ensemble": self.ensemble_size, "n": self.n,
                "deviation": self.deviation, "mean": float(self.averages.mean()),
                "space_average": self.space_average, "seed": self.seed}


def dispersion_ladder(f: SmoothMap, observables: list[Observable], ensemble_size: int, horizons,
                      seed: int = 0) -> list[DispersionReport]:
    if ensemble_size < 30:
        raise InvalidInput("ensemble_size must be at least 30")
    X0 = ensemble_points(ensemble_size, seed)
    hs = sorted(int(h) for h in horizons)
    A = time_averages(f, observables, X0, hs)
    out = []
    for a, n in enumerate(hs):
        for i, ob in enumerate(observables):
            out.append(DispersionReport(ob.label, ensemble_size, n, A[a, i], float(A[a, i].std()),
                                        ob.space_average, seed))
    return out


def dispersion_experiment(f: SmoothMap, obs: Observable, ensemble_size: int, n: int,
                          seed: int = 0) -> DispersionReport:
    """Standard deviation across the ensemble of the time averages of ``obs``."""
    return dispersion_ladder(f, [obs], ensemble_size, [n], seed)[0]


def ergodicity_contrast(base: SmoothMap, deformed: SmoothMap, observables: list[Observable],
                        ensemble_size: int, horizons, seed: int = 0) -> list[dict]:
    """Side-by-side dispersion table with the ratio deformed / base per observable and horizon."""
    rb = dispersion_ladder(base, observables, ensemble_size, horizons, seed)
    rd = rb if deformed is base else dispersion_ladder(deformed, observables, ensemble_size, horizons, seed)
    rows = []
    for b, d in zip(rb, rd):
        ratio = d.deviation / b.deviation if b.deviation > 0 else (1.0 if d.deviation == 0 else np.inf)
        rows.append({"observable": b.observable, "n": b.n, "base": b.deviation, "deformed": d.deviation,
                     "ratio": float(ratio)})
    return rows
