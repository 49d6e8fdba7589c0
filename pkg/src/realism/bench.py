"""Detection benchmark: realistic vs corrupted corpora, scored by every detector.

Each item is a batch of sequences generated from its own child seed, so the
corpus (and every score) is the same no matter how many workers build it.
Single-sample detectors look at the first sequence of an item; the batched
critic with batch size ``B`` looks at the first ``B``.

Corruptions
-----------
constant              the all-zeros sequence
alternating-01        ``0101...01``
periodic              a random primitive pattern of period 3 or 4, tiled
wrong-bias            i.i.d. Bernoulli(``bias``) (binary alphabets only)
memorized-duplicate   draws from a model that memorized ``memorized_size``
                      sequences sampled from P; each negative item has its
                      own memorized set, and that model joins S with a
                      description length of ``memorized_size * N * log2 A + 32``
                      bits (the cost of storing the data)
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .complexity import Codec, code_length
from .mixture import Mixture, _primitive, default_zoo, prior_from_description_bits
from .models import AlphabetError, MemorizedDataset, Model, Uniform, bernoulli
from .typicality import weak_deviation_many

__all__ = [
    "Scenario",
    "RocResult",
    "roc",
    "run_scenario",
    "builtin_scenarios",
    "CORRUPTIONS",
    "DETECTORS",
    "component_lr_aucs",
]

CORRUPTIONS = ("constant", "alternating-01", "periodic", "wrong-bias", "memorized-duplicate")
DETECTORS = ("neg_log_p", "weak_typicality", "compression_deficiency", "universal_critic", "batched_critic")
MEMORIZED_OVERHEAD_BITS = 32


@dataclass(frozen=True)
class RocResult:
    detector: str
    points: tuple[tuple[float, float], ...]
    auc: float


def roc(pos_scores, neg_scores, detector: str = "") -> RocResult:
    """ROC of "positive = flagged" with larger scores more anomalous.

    Here ``pos_scores`` are the scores of the class to detect. Equal scores
    form one ROC step; AUC is the trapezoid area, so ties count one half.
    ``+inf`` sorts above every finite score.
    """
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both score lists must be non-empty")
    if np.isnan(pos).any() or np.isnan(neg).any():
        raise ValueError("scores must not be NaN")
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    tpr = (pos.size - np.searchsorted(pos_sorted, thresholds, side="left")) / pos.size
    fpr = (neg.size - np.searchsorted(neg_sorted, thresholds, side="left")) / neg.size
    fpr = np.concatenate([[0.0], fpr])
    tpr = np.concatenate([[0.0], tpr])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocResult(detector, tuple(zip(fpr.tolist(), tpr.tolist())), auc)


@dataclass(frozen=True)
class Scenario:
    name: str
    p_model: Model
    corruption: str
    length: int = 128
    bias: float = 0.7
    memorized_size: int = 2
    zoo: tuple[Model, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.corruption not in CORRUPTIONS:
            raise ValueError(f"unknown corruption {self.corruption!r}")
        if self.corruption == "wrong-bias" and self.p_model.alphabet != 2:
            raise AlphabetError("wrong-bias corruption needs a binary alphabet")
        if not self.zoo:
            object.__setattr__(self, "zoo", tuple(default_zoo(self.p_model.alphabet)))

    def positive(self, rng: np.random.Generator, batch: int) -> np.ndarray:
        return self.p_model.sample_many(rng, batch, self.length)

    def negative(self, rng: np.random.Generator, batch: int) -> tuple[np.ndarray, Model | None]:
        """A corrupted batch, plus the item-specific model to add to S (if any)."""
        n, a = self.length, self.p_model.alphabet
        if self.corruption == "constant":
            return np.zeros((batch, n), dtype=np.int64), None
        if self.corruption == "alternating-01":
            row = np.arange(n, dtype=np.int64) % 2
            return np.tile(row, (batch, 1)), None
        if self.corruption == "periodic":
            choices = [
                pat
                for p in (3, 4)
                if a**p <= 256
                for pat in itertools.product(range(a), repeat=p)
                if _primitive(pat)
            ]
            pat = np.asarray(choices[int(rng.integers(len(choices)))], dtype=np.int64)
            row = np.tile(pat, -(-n // len(pat)))[:n]
            return np.tile(row, (batch, 1)), None
        if self.corruption == "wrong-bias":
            return bernoulli(self.bias).sample_many(rng, batch, n), None
        stored = self.p_model.sample_many(rng, self.memorized_size, n)
        bits = self.memorized_size * n * math.log2(a) + MEMORIZED_OVERHEAD_BITS
        q = MemorizedDataset(a, tuple(map(tuple, stored.tolist())), bits)
        return q.sample_many(rng, batch, n), q

    def mixture(self, extra: list[Model]) -> Mixture:
        return prior_from_description_bits(list(self.zoo) + list(extra))


def builtin_scenarios(length: int = 128, p_model: Model | None = None) -> list[Scenario]:
    p = p_model or Uniform(2)
    out = [
        Scenario("constant", p, "constant", length),
        Scenario("alternating", p, "alternating-01", length),
        Scenario("periodic", p, "periodic", length),
    ]
    if p.alphabet == 2:
        out.append(Scenario("wrong-bias", p, "wrong-bias", length))
    out.append(Scenario("memorized", p, "memorized-duplicate", length))
    return out


def _parse_detector(name: str, default_batch: int) -> tuple[str, int]:
    base, _, arg = name.partition(":")
    if base not in DETECTORS:
        raise ValueError(f"unknown detector {name!r}")
    if base == "batched_critic":
        return base, int(arg) if arg else default_batch
    return base, 1


def _item(scenario: Scenario, seed: np.random.SeedSequence, positive: bool, batch: int):
    rng = np.random.default_rng(seed)
    if positive:
        return scenario.positive(rng, batch), None
    return scenario.negative(rng, batch)


def run_scenario(
    scenario: Scenario,
    detectors,
    n_per_class: int,
    seed: int,
    *,
    batch: int = 8,
    codec: Codec | None = None,
    workers: int = 1,
) -> list[RocResult]:
    """Score ``n_per_class`` realistic and corrupted items with each detector."""
    if n_per_class < 10:
        raise ValueError("n_per_class must be at least 10")
    parsed = [_parse_detector(d, batch) for d in detectors]
    b_max = max(b for _, b in parsed)
    codec = codec or Codec("arith", order=2)
    seeds = np.random.SeedSequence(seed).spawn(2 * n_per_class)
    jobs = [(s, i < n_per_class) for i, s in enumerate(seeds)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            items = list(pool.map(lambda j: _item(scenario, j[0], j[1], b_max), jobs))
    else:
        items = [_item(scenario, s, pos, b_max) for s, pos in jobs]
    extra = [q for _, q in items if q is not None]
    S = scenario.mixture(extra)
    P = scenario.p_model
    if P.alphabet != S.alphabet:
        raise AlphabetError("scenario model and mixture disagree on alphabet")
    arr = np.stack([x for x, _ in items])  # (items, b_max, N)
    n_items, _, n = arr.shape
    flat = arr.reshape(-1, n)
    lp = P.log_prob_many(flat).reshape(n_items, b_max)
    lq = None
    results = []
    for name, (base, b) in zip(detectors, parsed):
        if base == "neg_log_p":
            scores = -lp[:, 0]
        elif base == "weak_typicality":
            scores = weak_deviation_many(P, arr[:, 0, :])
        elif base == "compression_deficiency":
            bits = np.array([code_length(codec, row.astype(np.uint8).tobytes()) for row in arr[:, 0, :]])
            scores = -lp[:, 0] / math.log(2.0) - bits
        else:
            if lq is None:
                lq = S.component_log_probs(flat).reshape(len(S), n_items, b_max)
            log_s = logsumexp(S.log_priors[:, None] + lq[:, :, :b].sum(axis=2), axis=0)
            log_p = lp[:, :b].sum(axis=1)
            scores = np.where(log_p == -np.inf, np.inf, log_s - np.where(log_p == -np.inf, 0.0, log_p))
        # Corrupted items are the class to detect.
        results.append(roc(scores[n_per_class:], scores[:n_per_class], name))
    return results


def component_lr_aucs(scenario: Scenario, n_per_class: int, seed: int) -> list[float]:
    """AUC of every single-component likelihood-ratio detector ``log Q_m - log P``."""
    seeds = np.random.SeedSequence(seed).spawn(2 * n_per_class)
    items = [_item(scenario, s, i < n_per_class, 1) for i, s in enumerate(seeds)]
    S = scenario.mixture([q for _, q in items if q is not None])
    flat = np.concatenate([x for x, _ in items])
    lp = scenario.p_model.log_prob_many(flat)
    out = []
    for _, m in S.components:
        lr = m.log_prob_many(flat) - lp
        out.append(roc(lr[n_per_class:], lr[:n_per_class]).auc)
    return out

