"""Morality-as-cooperation domains, moral foundation profiles and game primitives."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .world import FOUNDATIONS, N_FOUNDATIONS, FramingVector, Source, frame_salience

MAC_DOMAINS = (
    "Kin",
    "Group",
    "Reciprocity",
    "Heroism",
    "Deference",
    "Fairness",
    "Property",
    "Pathogen",
)
N_MAC = len(MAC_DOMAINS)

NORM_TOL = 1e-9


class ProfileError(ValueError):
    pass


def _normalized(weights: Sequence[float], names: Sequence[str], normalize: bool) -> tuple[float, ...]:
    w = np.asarray([float(x) for x in weights], dtype=float)
    if w.shape != (len(names),):
        raise ProfileError(f"expected {len(names)} weights, got {w.shape[0] if w.ndim else 0}")
    if np.any(w < 0) or np.any(np.isnan(w)):
        raise ProfileError("profile weights must be non-negative")
    total = math.fsum(w)
    if normalize:
        if total <= 0:
            raise ProfileError("cannot normalize an all-zero profile")
        w = w / total
    elif abs(total - 1.0) > NORM_TOL:
        raise ProfileError(f"profile weights sum to {total}, not 1")
    return tuple(float(x) for x in w)


class _Profile:
    names: tuple[str, ...] = ()

    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", _normalized(self.weights, self.names, normalize=False))

    @classmethod
    def of(cls, normalize: bool = True, **weights: float):
        unknown = set(weights) - set(cls.names)
        if unknown:
            raise ProfileError(f"unknown component(s): {sorted(unknown)}")
        raw = [weights.get(n, 0.0) for n in cls.names]
        return cls(_normalized(raw, cls.names, normalize))

    @classmethod
    def from_weights(cls, weights: Sequence[float], normalize: bool = True):
        return cls(_normalized(weights, cls.names, normalize))

    @classmethod
    def uniform(cls):
        n = len(cls.names)
        return cls(tuple([1.0 / n] * n))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def __getitem__(self, name: str) -> float:
        return self.weights[self.names.index(name)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.weights))


@dataclass(frozen=True)
class MacProfile(_Profile):
    weights: tuple[float, ...]
    names = MAC_DOMAINS


@dataclass(frozen=True)
class EmftProfile(_Profile):
    weights: tuple[float, ...]
    names = FOUNDATIONS


@dataclass(frozen=True)
class MacEmftMap:
    """Row-stochastic coupling from cooperative domains to foundations."""

    matrix: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (N_MAC, N_FOUNDATIONS):
            raise ProfileError(f"map must be {N_MAC}x{N_FOUNDATIONS}, got {m.shape}")
        if np.any(m < 0):
            raise ProfileError("map coefficients must be non-negative")
        sums = m.sum(axis=1)
        if np.any(sums <= 0):
            bad = [MAC_DOMAINS[i] for i in np.flatnonzero(sums <= 0)]
            raise ProfileError(f"rows without a positive entry: {bad}")
        m = m / sums[:, None]
        object.__setattr__(self, "matrix", tuple(tuple(float(x) for x in row) for row in m))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float)

    def row(self, domain: str) -> dict[str, float]:
        return dict(zip(FOUNDATIONS, self.matrix[MAC_DOMAINS.index(domain)]))


_DEFAULT_ROWS: Mapping[str, Mapping[str, float]] = {
    "Kin": {"Care": 1.0},
    "Group": {"Loyalty": 1.0},
    "Reciprocity": {"FairnessEquity": 0.5, "FairnessProportionality": 0.5},
    "Heroism": {"Loyalty": 0.5, "Care": 0.5},
    "Deference": {"Authority": 0.5, "Liberty": 0.5},
    "Fairness": {"FairnessEquity": 0.5, "FairnessProportionality": 0.5},
    # no Ownership foundation; possession is read as a Liberty concern
    "Property": {"Liberty": 1.0},
    "Pathogen": {"Purity": 1.0},
}


def default_mac_emft_map() -> MacEmftMap:
    rows = []
    for dom in MAC_DOMAINS:
        spec = _DEFAULT_ROWS[dom]
        rows.append(tuple(spec.get(f, 0.0) for f in FOUNDATIONS))
    return MacEmftMap(tuple(rows))


def map_from_rows(rows: Sequence[Sequence[float]]) -> MacEmftMap:
    return MacEmftMap(tuple(tuple(float(x) for x in r) for r in rows))


def mac_to_emft(mac: MacProfile, mapping: MacEmftMap | None = None) -> EmftProfile:
    mapping = mapping or default_mac_emft_map()
    m = mapping.as_array()
    v = mac.as_array()
    if v.shape[0] != m.shape[0]:
        raise ProfileError("MAC profile and map have mismatched dimensions")
    out = v @ m
    return EmftProfile.from_weights(out, normalize=True)


@dataclass(frozen=True)
class KinGameParams:
    r: float
    B: float
    C: float

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ProfileError("relatedness r must lie in [0, 1]")
        if self.B < 0 or self.C < 0:
            raise ProfileError("benefit and cost must be >= 0")


@dataclass(frozen=True)
class ContestGameParams:
    V: float
    C: float

    def __post_init__(self):
        if not (self.V > 0 and self.C > 0):
            raise ProfileError("Hawk-Dove needs V > 0 and C > 0")


def hamilton_cooperate(p: KinGameParams) -> bool:
    # strict: indifference does not count as cooperation
    return p.r * p.B > p.C


def hawk_dove_payoffs(V: float, C: float) -> np.ndarray:
    """Row player's payoff matrix, strategies ordered (Hawk, Dove)."""
    return np.array([[(V - C) / 2.0, V], [0.0, V / 2.0]])


def hawk_dove_ess(p: ContestGameParams) -> float:
    """Equilibrium probability of playing Hawk."""
    return min(1.0, p.V / p.C)


def moral_alarm(framing: FramingVector, profile: EmftProfile, violation: float) -> float:
    if not 0.0 <= violation <= 1.0:
        raise ProfileError("violation must lie in [0, 1]")
    return violation * frame_salience(framing, profile)


def hypocrisy_penalty(source: Source) -> float:
    return 1.0 if source.hypocrisy_flag else 0.0


def _half_l1(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(a - b).sum())


def profile_distance(a, b, layer_weights: Sequence[float] = (1 / 3, 1 / 3, 1 / 3)) -> float:
    """Distance between two agents over their moral and virtue/bias layers.

    MAC and EMFT layers use half the L1 distance (total variation). The
    virtue/bias layer is a box of unit-interval dials, so it uses the mean
    absolute difference instead, which keeps it in [0, 1] as well.
    """
    w = np.asarray(layer_weights, dtype=float)
    if w.shape != (3,) or np.any(w < 0) or w.sum() <= 0:
        raise ProfileError("layer_weights must be three non-negative numbers")
    w = w / w.sum()
    d_mac = _half_l1(a.mac.as_array(), b.mac.as_array())
    d_emft = _half_l1(a.emft.as_array(), b.emft.as_array())
    va, vb = a.trait_vector(), b.trait_vector()
    d_traits = float(np.abs(va - vb).mean()) if va.size else 0.0
    return float(min(1.0, w[0] * d_mac + w[1] * d_emft + w[2] * d_traits))
