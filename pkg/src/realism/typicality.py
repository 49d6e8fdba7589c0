"""Weak and strong typicality, and exhaustive typical-set counting.

All quantities are in nats. Membership uses the strict inequality
``deviation < delta``; sequences exactly on the boundary are excluded.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .models import (
    MarkovChain,
    Model,
    Sequence,
    UnsupportedModelError,
    _IIDModel,
    as_array,
    iter_all_sequences,
)

__all__ = [
    "TypicalityReport",
    "weak_typicality",
    "weak_deviation_many",
    "strong_typicality_distance",
    "enumerate_typical_set",
    "membership_rate",
    "ENUMERATION_BUDGET",
]

ENUMERATION_BUDGET = 1 << 24
LN2 = math.log(2.0)


@dataclass(frozen=True)
class TypicalityReport:
    per_symbol_neg_log_prob: float
    entropy_rate: float
    deviation: float
    delta: float
    member: bool


def _rate(P: Model) -> float:
    if not isinstance(P, (_IIDModel, MarkovChain)):
        raise UnsupportedModelError(f"typicality needs an i.i.d. or Markov model, got {P.kind}")
    return P.entropy_rate()


def weak_deviation_many(P: Model, batch) -> np.ndarray:
    """``|-(1/N) log P(x) - H|`` for each row of a batch."""
    h = _rate(P)
    arr = as_array(batch, P.alphabet)
    if isinstance(P, _IIDModel):
        rate = P.per_symbol_neg_log_prob(arr)
    else:
        rate = -P.log_prob_many(arr) / arr.shape[1]
    return np.abs(rate - h)


def weak_typicality(P: Model, x: Sequence, delta: float) -> TypicalityReport:
    if delta <= 0:
        raise ValueError("delta must be positive")
    h = _rate(P)
    if isinstance(x, Sequence) and x.alphabet != P.alphabet:
        raise ValueError("alphabet mismatch")
    arr = as_array(x, P.alphabet)
    if isinstance(P, _IIDModel):
        rate = float(P.per_symbol_neg_log_prob(arr)[0])
    else:
        rate = float(-P.log_prob_many(arr)[0] / arr.shape[1])
    dev = abs(rate - h)
    return TypicalityReport(rate, h, dev, delta, dev < delta)


def strong_typicality_distance(P: Model, x: Sequence) -> float:
    """L1 distance between the empirical symbol histogram and P's marginal."""
    if not isinstance(P, _IIDModel):
        raise UnsupportedModelError(f"strong typicality needs an i.i.d. model, got {P.kind}")
    arr = as_array(x, P.alphabet)
    if arr.shape[1] == 0:
        raise ValueError("empty sequences cannot be scored")
    counts = np.bincount(arr[0], minlength=P.alphabet)
    return float(np.abs(counts / arr.shape[1] - P.marginal).sum())


def _count_chunk(P: Model, h: float, delta: float, arr: np.ndarray) -> int:
    if isinstance(P, _IIDModel):
        rate = P.per_symbol_neg_log_prob(arr)
    else:
        rate = -P.log_prob_many(arr) / arr.shape[1]
    return int((np.abs(rate - h) < delta).sum())


def enumerate_typical_set(P: Model, N: int, delta: float, *, workers: int = 1) -> tuple[int, float]:
    """Exact size of the weakly typical set and the bound ``2**((N*H + N*delta)/ln 2)``.

    ``H`` is the entropy rate, so for Markov chains the bound is stated with
    ``N * rate``; every member has ``P(x) > exp(-N(H + delta))``, which is
    what makes the bound hold.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    h = _rate(P)
    if P.alphabet**N > ENUMERATION_BUDGET:
        raise ValueError(f"enumeration budget exceeded: {P.alphabet}^{N} > 2^24 sequences")
    chunks = iter_all_sequences(P.alphabet, N)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            count = sum(pool.map(lambda a: _count_chunk(P, h, delta, a), chunks))
    else:
        count = sum(_count_chunk(P, h, delta, a) for a in chunks)
    bound = 2.0 ** ((N * h + N * delta) / LN2)
    return count, bound


def membership_rate(P: Model, N: int, delta: float, samples: int, seed: int) -> float:
    """Monte Carlo estimate of ``P^N(A_delta^N)``."""
    rng = np.random.default_rng(seed)
    arr = P.sample_many(rng, samples, N)
    return float((weak_deviation_many(P, arr) < delta).mean())
