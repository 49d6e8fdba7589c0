"""Finite stand-in for Solomonoff's mixture with description-length priors.

The countable mixture over all computable distributions is truncated to an
explicit component list. Each component's prior is ``2**-description_bits``;
totals below one are kept as a semimeasure and never renormalized.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import logsumexp

from .models import (
    AlphabetError,
    ConstantSymbol,
    MarkovChain,
    Model,
    PeriodicPattern,
    Sequence,
    Uniform,
    as_array,
)

__all__ = [
    "Mixture",
    "Posterior",
    "prior_from_description_bits",
    "log_mix_prob",
    "batch_log_mix_prob",
    "posterior",
    "default_zoo",
    "MASS_TOL",
]

MASS_TOL = 1e-12
LN2 = math.log(2.0)


@dataclass(frozen=True)
class Posterior:
    log_weights: tuple[float, ...]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_weights))


@dataclass(frozen=True)
class Mixture:
    """Weighted list of ``(log_prior, model)`` pairs (priors in nats)."""

    components: tuple[tuple[float, Model], ...]
    normalization: Literal["normalized", "semimeasure"] = "normalized"

    def __post_init__(self):
        comps = tuple((float(lp), m) for lp, m in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        alphabets = {m.alphabet for _, m in comps}
        if len(alphabets) != 1:
            raise AlphabetError(f"mixture components disagree on alphabet: {sorted(alphabets)}")
        if any(math.isnan(lp) or lp == math.inf for lp, _ in comps):
            raise ValueError("log priors must be finite or -inf")
        total = self.total_mass
        if total > 1.0 + MASS_TOL:
            raise ValueError(f"prior mass {total!r} exceeds 1; not a valid semimeasure")
        if self.normalization == "normalized" and abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"normalized mixture has prior mass {total!r}")

    @classmethod
    def from_weights(cls, weights, models) -> "Mixture":
        with np.errstate(divide="ignore"):
            log_w = np.log(np.asarray(weights, dtype=np.float64))
        total = float(np.sum(weights))
        flag = "normalized" if abs(total - 1.0) <= MASS_TOL else "semimeasure"
        return cls(tuple(zip(log_w.tolist(), models)), flag)

    @property
    def alphabet(self) -> int:
        return self.components[0][1].alphabet

    @property
    def models(self) -> list[Model]:
        return [m for _, m in self.components]

    @property
    def log_priors(self) -> np.ndarray:
        return np.array([lp for lp, _ in self.components])

    @property
    def total_mass(self) -> float:
        return float(math.fsum(math.exp(lp) for lp, _ in self.components))

    def __len__(self) -> int:
        return len(self.components)

    def index_of(self, model: Model) -> int:
        for i, (_, m) in enumerate(self.components):
            if m == model:
                return i
        raise KeyError(f"model {model!r} is not a component of this mixture")

    def component_log_probs(self, batch) -> np.ndarray:
        """``(components, count)`` matrix of per-sequence log-probabilities."""
        arr = as_array(batch, self.alphabet)
        return np.stack([m.log_prob_many(arr) for _, m in self.components])

    def extended(self, extra: "Mixture | list[tuple[float, Model]]") -> "Mixture":
        comps = extra.components if isinstance(extra, Mixture) else tuple(extra)
        merged = self.components + tuple(comps)
        total = math.fsum(math.exp(lp) for lp, _ in merged)
        flag = "normalized" if abs(total - 1.0) <= MASS_TOL else "semimeasure"
        return Mixture(merged, flag)


def prior_from_description_bits(models) -> Mixture:
    """Mixture with priors ``2**-description_bits``; errors if the mass exceeds 1."""
    models = list(models)
    if not models:
        raise ValueError("need at least one model")
    for m in models:
        if not math.isfinite(m.description_bits):
            raise ValueError("description_bits must be finite")
    log_priors = [-m.description_bits * LN2 for m in models]
    total = math.fsum(math.exp(lp) for lp in log_priors)
    if total > 1.0 + MASS_TOL:
        raise ValueError(f"description lengths give prior mass {total:.6g} > 1")
    flag = "normalized" if abs(total - 1.0) <= MASS_TOL else "semimeasure"
    return Mixture(tuple(zip(log_priors, models)), flag)


def _lse(a: np.ndarray, axis=0) -> np.ndarray:
    return logsumexp(a, axis=axis)


def log_mix_prob_many(S: Mixture, batch) -> np.ndarray:
    lq = S.component_log_probs(batch)
    return _lse(S.log_priors[:, None] + lq, axis=0)


def log_mix_prob(S: Mixture, x: Sequence) -> float:
    """``log sum_n pi_n Q_n(x)``; ``-inf`` when no component supports x."""
    if isinstance(x, Sequence) and x.alphabet != S.alphabet:
        raise AlphabetError(f"sequence alphabet {x.alphabet} != mixture alphabet {S.alphabet}")
    if len(x) == 0:
        raise ValueError("empty sequences cannot be scored")
    return float(log_mix_prob_many(S, x)[0])


def _batch_terms(S: Mixture, batch) -> np.ndarray:
    """Per-component ``log pi_n + sum_b log Q_n(x_b)``."""
    items = list(batch)
    if not items:
        raise ValueError("batch must be non-empty")
    for x in items:
        if isinstance(x, Sequence) and x.alphabet != S.alphabet:
            raise AlphabetError(f"sequence alphabet {x.alphabet} != mixture alphabet {S.alphabet}")
    lengths = {len(x) for x in items}
    if len(lengths) == 1:
        lq = S.component_log_probs(items).sum(axis=1)
    else:
        lq = sum(S.component_log_probs([x])[:, 0] for x in items)
    return S.log_priors + lq


def batch_log_mix_prob(S: Mixture, batch) -> float:
    """``log sum_n pi_n prod_b Q_n(x_b)`` for a batch of Sequences."""
    return float(_lse(_batch_terms(S, batch)))


def posterior(S: Mixture, batch) -> Posterior:
    """Posterior over components after observing ``batch`` (may be empty)."""
    items = list(batch)
    terms = S.log_priors if not items else _batch_terms(S, items)
    norm = _lse(terms)
    if norm == -math.inf:
        raise ValueError("posterior undefined: every component assigns zero probability")
    return Posterior(tuple((terms - norm).tolist()))


def _primitive(pattern: tuple[int, ...]) -> bool:
    p = len(pattern)
    return all(pattern != pattern[:d] * (p // d) for d in range(1, p) if p % d == 0)


def default_zoo(alphabet: int = 2, *, max_period: int = 4, grid=(0.1, 0.3, 0.5, 0.7, 0.9)) -> list[Model]:
    """Default alternative models with their description lengths (bits).

    ============================  =====================================
    component                     description_bits
    ============================  =====================================
    uniform (fair coin if binary)  1
    constant symbol s              4 + ceil(log2 A)
    primitive period-p pattern     6 + p * ceil(log2 A)
    order-1 Markov grid entry      8 (binary) / 6 + ceil(log2 A) (A > 2)
    ============================  =====================================

    Binary Markov entries range over ``P(1|0), P(1|1)`` in ``grid``; larger
    alphabets use "sticky" chains with self-transition probability in
    ``grid`` and the remaining mass spread evenly. Periodic patterns are only
    enumerated while ``A**p <= 256``.
    """
    sym_bits = math.ceil(math.log2(alphabet))
    zoo: list[Model] = [Uniform(alphabet, 1.0)]
    zoo += [ConstantSymbol(alphabet, s, 4.0 + sym_bits) for s in range(alphabet)]
    for p in range(2, max_period + 1):
        if alphabet**p > 256:
            break
        for pat in itertools.product(range(alphabet), repeat=p):
            if _primitive(pat):
                zoo.append(PeriodicPattern(alphabet, pat, 6.0 + p * sym_bits))
    if alphabet == 2:
        for p01, p11 in itertools.product(grid, grid):
            zoo.append(MarkovChain(((1 - p01, p01), (1 - p11, p11)), None, 8.0))
    else:
        for stay in grid:
            rest = (1.0 - stay) / (alphabet - 1)
            rows = tuple(tuple(stay if i == j else rest for j in range(alphabet)) for i in range(alphabet))
            zoo.append(MarkovChain(rows, None, 6.0 + sym_bits))
    return zoo
