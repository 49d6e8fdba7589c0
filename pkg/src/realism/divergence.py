"""Exact divergences and sample-based estimators.

KL and TV are computed exactly (closed form for i.i.d./Markov models,
enumeration otherwise); the variational f-divergence bound is evaluated by
exhaustive summation; ``sandwich_verify`` estimates the per-sample batched
critic by seeded Monte Carlo.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .mixture import Mixture
from .models import MarkovChain, Model, _IIDModel, as_array, iter_all_sequences

__all__ = [
    "SandwichResult",
    "kl_exact",
    "kl_enumerated",
    "tv_exact",
    "f_div_bound",
    "optimal_critic",
    "mmd2",
    "features",
    "sandwich_verify",
    "batch_seeds",
]

ENUMERATION_BUDGET = 1 << 24


def _chain_form(model: Model) -> tuple[np.ndarray, np.ndarray] | None:
    """(initial, transition) for i.i.d. and Markov models, else None."""
    if isinstance(model, _IIDModel):
        p = model.marginal
        return p, np.tile(p, (len(p), 1))
    if isinstance(model, MarkovChain):
        return model.start, model.matrix
    return None


def _kl_vec(q: np.ndarray, p: np.ndarray) -> float:
    """``sum q log(q/p)`` with 0 log 0 = 0 and +inf on support violations."""
    support = q > 0
    if np.any(p[support] == 0):
        return math.inf
    return float(np.sum(q[support] * (np.log(q[support]) - np.log(p[support]))))


def kl_enumerated(Q: Model, P: Model, N: int) -> float:
    """KL(Q^N || P^N) by summing over every sequence of length N."""
    _check_budget(Q, N)
    total = 0.0
    for arr in iter_all_sequences(Q.alphabet, N):
        lq = Q.log_prob_many(arr)
        lp = P.log_prob_many(arr)
        m = lq > -np.inf
        if np.any(lp[m] == -np.inf):
            return math.inf
        total += float(np.sum(np.exp(lq[m]) * (lq[m] - lp[m])))
    return total


def kl_exact(Q: Model, P: Model, N: int) -> float:
    """KL between the length-N laws of Q and P, in nats.

    i.i.d. and Markov models use the exact forward recursion over time
    marginals; other kinds fall back to enumeration.
    """
    if Q.alphabet != P.alphabet:
        raise ValueError("alphabet mismatch")
    if N < 1:
        raise ValueError("N must be >= 1")
    fq, fp = _chain_form(Q), _chain_form(P)
    if fq is None or fp is None:
        return kl_enumerated(Q, P, N)
    (q0, qt), (p0, pt) = fq, fp
    total = _kl_vec(q0, p0)
    if math.isinf(total):
        return total
    row_kl = np.array([_kl_vec(qt[i], pt[i]) for i in range(len(q0))])
    marginal = q0
    for _ in range(N - 1):
        active = marginal > 0
        if np.any(np.isinf(row_kl[active])):
            return math.inf
        total += float(marginal[active] @ row_kl[active])
        marginal = marginal @ qt
    return total


def _check_budget(model: Model, N: int) -> None:
    if model.alphabet**N > ENUMERATION_BUDGET:
        raise ValueError(f"enumeration budget exceeded: {model.alphabet}^{N} > 2^24")


def tv_exact(Q: Model, P: Model, N: int) -> tuple[float, float]:
    """Total variation by enumeration, and the optimal observer's success rate."""
    if Q.alphabet != P.alphabet:
        raise ValueError("alphabet mismatch")
    _check_budget(Q, N)
    acc = 0.0
    for arr in iter_all_sequences(Q.alphabet, N):
        acc += float(np.abs(np.exp(Q.log_prob_many(arr)) - np.exp(P.log_prob_many(arr))).sum())
    tv = 0.5 * acc
    return tv, 0.5 * tv + 0.5


def optimal_critic(Q: Model, P: Model) -> Callable[[np.ndarray], np.ndarray]:
    """The KL-tight critic ``T(x) = log Q(x) - log P(x) + 1`` (vectorized)."""

    def critic(batch) -> np.ndarray:
        lq = Q.log_prob_many(batch)
        lp = P.log_prob_many(batch)
        out = lq - np.where(lp == -np.inf, 0.0, lp) + 1.0
        out[(lp == -np.inf) & (lq > -np.inf)] = np.inf
        out[(lp == -np.inf) & (lq == -np.inf)] = -np.inf
        return out

    return critic


def f_div_bound(T: Callable[[np.ndarray], np.ndarray], Q: Model, P: Model, N: int) -> float:
    """``E_Q[T] - E_P[exp(T - 1)]``, the KL variational lower bound, by enumeration.

    ``T`` maps a ``(count, N)`` array to scores. Overflow in ``exp`` makes the
    bound ``-inf`` (valid but vacuous).
    """
    _check_budget(Q, N)
    eq = 0.0
    ep = 0.0
    for arr in iter_all_sequences(Q.alphabet, N):
        t = np.asarray(T(arr), dtype=np.float64)
        q = np.exp(Q.log_prob_many(arr))
        p = np.exp(P.log_prob_many(arr))
        mq = q > 0
        eq += float(np.sum(q[mq] * t[mq]))
        mp = p > 0
        with np.errstate(over="ignore"):
            ep += float(np.sum(p[mp] * np.exp(t[mp] - 1.0)))
    if math.isinf(ep) or math.isnan(ep):
        return -math.inf
    return eq - ep


def features(batch, alphabet: int, feature_map: str = "histogram") -> np.ndarray:
    """Per-sequence normalized histograms: ``histogram`` or ``kgram:k`` (k <= 3)."""
    if feature_map == "histogram":
        k = 1
    elif feature_map.startswith("kgram:"):
        k = int(feature_map.split(":", 1)[1])
        if not 1 <= k <= 3:
            raise ValueError("k-gram order must be 1, 2 or 3")
    else:
        raise ValueError(f"unknown feature map {feature_map!r}")
    arr = as_array(batch, alphabet)
    n = arr.shape[1]
    if n < k:
        raise ValueError("sequences shorter than the k-gram order")
    code = np.zeros((arr.shape[0], n - k + 1), dtype=np.int64)
    for j in range(k):
        code = code * alphabet + arr[:, j : n - k + 1 + j]
    dim = alphabet**k
    out = np.zeros((arr.shape[0], dim))
    for i in range(arr.shape[0]):
        out[i] = np.bincount(code[i], minlength=dim)
    return out / (n - k + 1)


def mmd2(X, Y, feature_map: str = "histogram", alphabet: int | None = None) -> float:
    """Squared distance between mean feature vectors of two sample sets.

    ``X`` and ``Y`` are lists of Sequences (featurized with ``feature_map``)
    or precomputed 2-D feature arrays.
    """
    fx = _featurize(X, feature_map, alphabet)
    fy = _featurize(Y, feature_map, alphabet)
    if fx.shape[1] != fy.shape[1]:
        raise ValueError(f"feature dimension mismatch: {fx.shape[1]} vs {fy.shape[1]}")
    diff = fx.mean(axis=0) - fy.mean(axis=0)
    return float(diff @ diff)


def _featurize(data, feature_map, alphabet) -> np.ndarray:
    if isinstance(data, np.ndarray) and data.dtype.kind == "f":
        if data.ndim != 2 or data.shape[0] == 0:
            raise ValueError("feature arrays must be non-empty and 2-D")
        return data
    items = list(data)
    if not items:
        raise ValueError("sample sets must be non-empty")
    a = alphabet or items[0].alphabet
    return features(items, a, feature_map)


@dataclass(frozen=True)
class SandwichResult:
    kl: float
    lower: float
    estimate: float
    std_error: float
    B: int
    num_batches: int


def batch_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent per-batch seed sequences derived from one master seed."""
    return np.random.SeedSequence(seed).spawn(count)


def _batch_score(P: Model, S: Mixture, Q: Model, B: int, N: int, seeds) -> np.ndarray:
    arr = np.concatenate([Q.sample_many(np.random.default_rng(s), B, N) for s in seeds])
    lq = S.component_log_probs(arr).reshape(len(S), len(seeds), B).sum(axis=2)
    lp = P.log_prob_many(arr).reshape(len(seeds), B).sum(axis=1)
    log_s = logsumexp(S.log_priors[:, None] + lq, axis=0)
    return (log_s - lp) / B


def sandwich_verify(
    Q: Model,
    P: Model,
    S: Mixture,
    B: int,
    num_batches: int,
    seed: int,
    N: int,
    *,
    workers: int = 1,
    chunk: int = 1000,
) -> SandwichResult:
    """Monte Carlo of ``(1/B) E_{Q^B}[U^B]`` next to ``KL`` and ``KL - log(1/pi_Q)/B``.

    Batch ``i`` is drawn from its own child seed, and per-chunk results are
    concatenated in index order, so the result does not depend on ``workers``.
    """
    if B < 1 or num_batches < 2:
        raise ValueError("need B >= 1 and at least two batches")
    try:
        idx = S.index_of(Q)
    except KeyError:
        raise ValueError("Q must be a component of S") from None
    log_pi_q = float(S.log_priors[idx])
    kl = kl_exact(Q, P, N)
    seeds = batch_seeds(seed, num_batches)
    parts = [seeds[i : i + chunk] for i in range(0, num_batches, chunk)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            scores = list(pool.map(lambda s: _batch_score(P, S, Q, B, N, s), parts))
    else:
        scores = [_batch_score(P, S, Q, B, N, s) for s in parts]
    u = np.concatenate(scores)
    est = float(u.mean())
    se = float(u.std(ddof=1) / math.sqrt(num_batches))
    return SandwichResult(kl, kl + log_pi_q / B, est, se, B, num_batches)
