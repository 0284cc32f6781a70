"""Reaction-rate models and a sampling falsifier for their hypotheses.

Every model returns nonnegative rates (the sign of each species' source
lives in ``signs``), stops when any coordinate is exhausted, and is
globally Lipschitz.  Lipschitz constants are measured in the l1 norm of the
state, ``|r_i(x) - r_i(y)| <= k * sum_j |x_j - y_j|``; the ``k N`` factors
in the energy and Gronwall bounds come from that convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class ReactionModel:
    name: str
    n_species: int
    rate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lipschitz_k: float
    signs: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.signs) != self.n_species:
            raise ValueError("one sign per species required")
        if any(s not in (-1, 1) for s in self.signs):
            raise ValueError("signs must be -1 or +1")


def evaluate(model: ReactionModel, x) -> np.ndarray:
    """Rate vector for state(s) ``x``; species on axis 0, any trailing shape."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != model.n_species:
        raise ValueError(f"state has {x.shape[0]} components, model expects {model.n_species}")
    if not np.all(np.isfinite(x)):
        raise ValueError("state must be finite")
    return model.rate(x)


def _clip01(x):
    return np.clip(x, 0.0, 1.0)


def zero_model(n_species: int, signs: Sequence[int] | None = None) -> ReactionModel:
    signs = tuple(signs) if signs is not None else (1,) * n_species
    return ReactionModel("zero", n_species, lambda x: np.zeros_like(x), 0.0, signs)


def clipped_mass_action(rate_constants: Sequence[float], signs: Sequence[int]) -> ReactionModel:
    """r_i(x) = k_i * prod_j min(max(x_j, 0), 1).

    Each clipped factor lies in [0, 1] and is 1-Lipschitz, so the product
    is 1-Lipschitz in l1 and r_i is k_i-Lipschitz.
    """
    k = np.asarray(rate_constants, dtype=float)
    if np.any(k < 0):
        raise ValueError("rate constants must be nonnegative")
    n = len(k)

    def rate(x):
        p = np.prod(_clip01(x), axis=0)
        return k.reshape((n,) + (1,) * (x.ndim - 1)) * p

    return ReactionModel("clipped_mass_action", n, rate, float(k.max(initial=0.0)),
                         tuple(signs), tuple(k))


def linear_chain(rate_constants: Sequence[float], signs: Sequence[int]) -> ReactionModel:
    """Rate proportional to the scarcest species: r_i(x) = k_i * min_j clip(x_j)."""
    k = np.asarray(rate_constants, dtype=float)
    if np.any(k < 0):
        raise ValueError("rate constants must be nonnegative")
    n = len(k)

    def rate(x):
        p = np.min(_clip01(x), axis=0)
        return k.reshape((n,) + (1,) * (x.ndim - 1)) * p

    return ReactionModel("linear_chain", n, rate, float(k.max(initial=0.0)),
                         tuple(signs), tuple(k))


def unclipped_mass_action(rate_constants: Sequence[float], signs: Sequence[int]) -> ReactionModel:
    """Plain product kinetics.  Only locally Lipschitz: kept as a negative control.

    The documented constant is the clipped one, which the sampler must refute
    on any box wider than the unit cube.
    """
    k = np.asarray(rate_constants, dtype=float)
    n = len(k)

    def rate(x):
        p = np.prod(np.maximum(x, 0.0), axis=0)
        return k.reshape((n,) + (1,) * (x.ndim - 1)) * p

    return ReactionModel("unclipped_mass_action", n, rate, float(k.max(initial=0.0)),
                         tuple(signs), tuple(k))


MODELS = {
    "zero": lambda params, signs: zero_model(len(signs), signs),
    "clipped_mass_action": clipped_mass_action,
    "linear_chain": linear_chain,
    "unclipped_mass_action": unclipped_mass_action,
}


def make_model(name: str, params: Sequence[float], signs: Sequence[int]) -> ReactionModel:
    try:
        factory = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown kinetics {name!r}; choose from {sorted(MODELS)}") from None
    model = factory(list(params), list(signs))
    if model.n_species != len(signs):
        raise ValueError(
            f"kinetics {name!r} got {model.n_species} rate constants for {len(signs)} species")
    return model


@dataclass
class HypothesisReport:
    max_lipschitz_ratio: float
    min_rate: float
    max_rate_at_zero: float
    lipschitz_k: float
    h1_ok: bool
    h2_ok: bool
    h3_ok: bool

    @property
    def passed(self) -> bool:
        return self.h1_ok and self.h2_ok and self.h3_ok


def verify_hypotheses(model: ReactionModel, sample_count: int = 2000,
                      box=(-0.5, 1.5), seed: int = 0) -> HypothesisReport:
    """Try to falsify the rate hypotheses by random sampling inside ``box``.

    ``box`` is either a (lo, hi) pair applied to every coordinate or a pair
    of per-species arrays.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    n = model.n_species
    lo = np.broadcast_to(np.asarray(box[0], dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(box[1], dtype=float), (n,))
    x = lo[:, None] + (hi - lo)[:, None] * rng.random((n, sample_count))
    # half the partners are close neighbours, which is where kinks show up
    scale = np.where(np.arange(sample_count) % 2 == 0, 1.0, 1e-3)
    y = x + scale * (hi - lo)[:, None] * (rng.random((n, sample_count)) - 0.5)
    y = np.clip(y, lo[:, None], hi[:, None])
    rx, ry = evaluate(model, x), evaluate(model, y)
    dist = np.sum(np.abs(x - y), axis=0)
    ok = dist > 0
    ratios = np.max(np.abs(rx - ry), axis=0)[ok] / dist[ok]
    max_ratio = float(ratios.max(initial=0.0))

    z = x.copy()
    z[rng.integers(0, n, sample_count), np.arange(sample_count)] = 0.0
    rz = evaluate(model, z)
    min_rate = float(min(rx.min(), ry.min(), rz.min()))
    max_zero = float(np.abs(rz).max())

    return HypothesisReport(
        max_lipschitz_ratio=max_ratio,
        min_rate=min_rate,
        max_rate_at_zero=max_zero,
        lipschitz_k=model.lipschitz_k,
        h1_ok=max_ratio <= model.lipschitz_k * (1.0 + 1e-9),
        h2_ok=min_rate >= 0.0,
        h3_ok=max_zero == 0.0,
    )
