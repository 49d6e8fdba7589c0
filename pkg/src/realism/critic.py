"""Universal critics: randomness deficiency against a finite mixture.

Orientation: ``u = log S(x) - log P(x)``. Large ``u`` means the data is
better explained by some simple alternative than by ``P``, i.e. it looks
*unrealistic*. ``u = +inf`` when ``P(x) = 0``.

The sequential critic also offers the reward orientation
``log P(x) - log S(x | history)``, where large means realistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import logsumexp

from .mixture import Mixture, Posterior, posterior
from .models import AlphabetError, Model, Sequence, as_array

__all__ = [
    "CriticReport",
    "universal_critic",
    "batched_critic",
    "sequential_critic",
    "sequential_scores",
    "mdl_critic",
    "np_test",
    "deficiency",
]


def deficiency(log_s: float, log_p: float) -> float:
    """``log_s - log_p`` with the extended-real conventions used throughout."""
    if log_p == -math.inf:
        return math.inf
    if log_s == -math.inf:
        return -math.inf
    return log_s - log_p


@dataclass(frozen=True)
class CriticReport:
    log_p: float
    log_s: float
    u: float
    per_step: tuple[float, ...] | None = None
    posterior: Posterior | None = None


def _check(P: Model, S: Mixture, items) -> None:
    if P.alphabet != S.alphabet:
        raise AlphabetError(f"model alphabet {P.alphabet} != mixture alphabet {S.alphabet}")
    for x in items:
        if isinstance(x, Sequence) and x.alphabet != P.alphabet:
            raise AlphabetError(f"sequence alphabet {x.alphabet} != model alphabet {P.alphabet}")
        if len(x) == 0:
            raise ValueError("empty sequences cannot be scored")


def universal_critic(P: Model, S: Mixture, x: Sequence) -> CriticReport:
    _check(P, S, [x])
    log_p = P.log_prob(x)
    log_s = float(logsumexp(S.log_priors + S.component_log_probs(x)[:, 0]))
    return CriticReport(log_p, log_s, deficiency(log_s, log_p))


def _step_terms(P: Model, S: Mixture, batch) -> tuple[np.ndarray, np.ndarray]:
    """Component log-probs ``(K, B)`` and model log-probs ``(B,)`` for a batch."""
    items = list(batch)
    if not items:
        raise ValueError("batch must be non-empty")
    _check(P, S, items)
    if len({len(x) for x in items}) == 1:
        arr = as_array(items, P.alphabet)
        return S.component_log_probs(arr), P.log_prob_many(arr)
    lq = np.stack([S.component_log_probs(x)[:, 0] for x in items], axis=1)
    return lq, np.array([P.log_prob(x) for x in items])


def _sequential_from_terms(log_priors, lq, lp) -> np.ndarray:
    """Deficiency-oriented per-step scores ``log S(x_b | x^{b-1}) - log P(x_b)``."""
    # The empty history has mass 1, so step one uses the raw (possibly
    # sub-normalized) priors and the steps telescope to the batched score.
    cum = log_priors.copy()
    steps = np.empty(lq.shape[1])
    norm = 0.0
    for b in range(lq.shape[1]):
        if norm == -math.inf:
            raise ValueError("posterior undefined: history has zero probability under every component")
        nxt = cum + lq[:, b]
        nxt_norm = float(logsumexp(nxt))
        steps[b] = deficiency(nxt_norm - norm if nxt_norm > -math.inf else -math.inf, float(lp[b]))
        cum, norm = nxt, nxt_norm
    return steps


def batched_critic(P: Model, S: Mixture, batch, *, steps: bool = False) -> CriticReport:
    """Batched critic ``log sum_n pi_n prod_b Q_n(x_b) - sum_b log P(x_b)``.

    With ``steps=True`` the report also carries the per-step sequential
    scores, which telescope to ``u``.
    """
    lq, lp = _step_terms(P, S, batch)
    log_p = float(lp.sum())
    log_s = float(logsumexp(S.log_priors + lq.sum(axis=1)))
    per_step = None
    post = None
    if steps:
        per_step = tuple(_sequential_from_terms(S.log_priors, lq, lp).tolist())
        if log_s > -math.inf:
            post = posterior(S, batch)
    return CriticReport(log_p, log_s, deficiency(log_s, log_p), per_step, post)


def sequential_critic(
    P: Model,
    S: Mixture,
    history,
    x: Sequence,
    orientation: Literal["deficiency", "reward"] = "deficiency",
) -> float:
    """Score ``x`` after updating the mixture on ``history``.

    ``deficiency`` (default): ``log S(x | history) - log P(x)``, large means
    unrealistic, consistent with :func:`universal_critic`.
    ``reward``: the negation, ``log P(x) - log S(x | history)``.

    A non-empty history enters through the normalized posterior; an empty
    history uses the raw priors, so for a semimeasure the scores of a batch
    still sum to the batched critic.
    """
    _check(P, S, [x])
    history = list(history)
    # Empty history: raw priors, so the score coincides with the universal critic.
    weights = np.asarray(posterior(S, history).log_weights) if history else S.log_priors
    lq = S.component_log_probs(x)[:, 0]
    log_s_cond = float(logsumexp(weights + lq))
    score = deficiency(log_s_cond, P.log_prob(x))
    if orientation == "reward":
        return -score
    if orientation != "deficiency":
        raise ValueError(f"unknown orientation {orientation!r}")
    return score


def sequential_scores(P: Model, S: Mixture, batch) -> np.ndarray:
    """Deficiency-oriented sequential scores for each position of ``batch``."""
    lq, lp = _step_terms(P, S, batch)
    return _sequential_from_terms(S.log_priors, lq, lp)


def mdl_critic(P: Model, S: Mixture, x: Sequence) -> tuple[float, int]:
    """Best single component: ``max_n (log pi_n + log Q_n(x)) - log P(x)``."""
    _check(P, S, [x])
    terms = S.log_priors + S.component_log_probs(x)[:, 0]
    best = int(np.argmax(terms))
    return deficiency(float(terms[best]), P.log_prob(x)), best


def np_test(P: Model, S: Mixture, x: Sequence, eta: float) -> Literal["realistic", "unrealistic"]:
    """Likelihood-ratio threshold test: rejects iff ``u > eta`` (ties accepted)."""
    u = universal_critic(P, S, x).u
    return "unrealistic" if u > eta else "realistic"
