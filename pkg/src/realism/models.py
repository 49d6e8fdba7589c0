"""Exact computable probability models over finite alphabets.

Every model reports log-probabilities in nats, uses ``-inf`` for zero
probability, and carries ``description_bits``: the coding cost of naming the
model, from which mixture priors ``2**-description_bits`` are derived.

Models are immutable. Batched evaluation (``log_prob_many``) takes a 2-D
integer array of shape ``(count, length)`` and is the path every other module
uses for enumeration and Monte Carlo work; ``log_prob`` is the same
computation on a single row, so both routes agree bit for bit.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from functools import cached_property
from typing import ClassVar, Iterable

import numpy as np

__all__ = [
    "AlphabetError",
    "UnsupportedModelError",
    "Sequence",
    "Model",
    "IIDCategorical",
    "Uniform",
    "ConstantSymbol",
    "MarkovChain",
    "PeriodicPattern",
    "MemorizedDataset",
    "bernoulli",
    "log_prob",
    "conditional_log_prob",
    "entropy_rate",
    "sample",
    "as_array",
]

NORMALIZATION_TOL = 1e-12
STATIONARY_TOL = 1e-12
STATIONARY_MAX_ITER = 100_000


class AlphabetError(ValueError):
    """A symbol or sequence does not belong to the model's alphabet."""


class UnsupportedModelError(ValueError):
    """The operation has no closed form for this kind of model."""


@dataclass(frozen=True)
class Sequence:
    """A finite string of symbol indices ``0 .. alphabet-1``."""

    symbols: tuple[int, ...]
    alphabet: int = 2

    def __post_init__(self):
        if self.alphabet < 2:
            raise ValueError(f"alphabet size must be >= 2, got {self.alphabet}")
        symbols = tuple(int(s) for s in self.symbols)
        object.__setattr__(self, "symbols", symbols)
        for s in symbols:
            if not 0 <= s < self.alphabet:
                raise AlphabetError(f"symbol {s} outside alphabet of size {self.alphabet}")

    def __len__(self) -> int:
        return len(self.symbols)

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.asarray(self.symbols, dtype=np.int64)
        arr.setflags(write=False)
        return arr

    @classmethod
    def from_string(cls, text: str, alphabet: int = 2) -> "Sequence":
        """Parse ``"0110"``-style strings; digits then letters (base 36)."""
        try:
            symbols = tuple(int(ch, 36) for ch in text.strip())
        except ValueError as exc:
            raise AlphabetError(f"cannot parse sequence {text!r}") from exc
        return cls(symbols, alphabet)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Sequence":
        return cls(tuple(data), 256)

    @classmethod
    def from_array(cls, arr, alphabet: int) -> "Sequence":
        return cls(tuple(int(s) for s in np.asarray(arr).ravel()), alphabet)

    def to_string(self) -> str:
        if self.alphabet > 36:
            raise ValueError("string form only exists for alphabets up to 36 symbols")
        return "".join(np.base_repr(s, 36).lower() for s in self.symbols)

    def to_bytes(self) -> bytes:
        if self.alphabet > 256:
            raise ValueError("byte form only exists for alphabets up to 256 symbols")
        return bytes(self.symbols)

    def __str__(self) -> str:
        return self.to_string() if self.alphabet <= 36 else repr(self.symbols)


def as_array(batch, alphabet: int | None = None) -> np.ndarray:
    """Stack Sequences (or an int array) into a ``(count, length)`` array."""
    if isinstance(batch, np.ndarray):
        arr = batch
    elif isinstance(batch, Sequence):
        arr = batch.array[None, :]
    else:
        items = list(batch)
        if not items:
            raise ValueError("empty batch")
        lengths = {len(s) for s in items}
        if len(lengths) != 1:
            raise ValueError("batched evaluation needs equal-length sequences")
        if alphabet is not None:
            for s in items:
                if isinstance(s, Sequence) and s.alphabet != alphabet:
                    raise AlphabetError(
                        f"sequence alphabet {s.alphabet} does not match model alphabet {alphabet}"
                    )
        arr = np.array([s.array if isinstance(s, Sequence) else s for s in items], dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def _log(p) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(p, dtype=np.float64))


def _check_distribution(p: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError(f"{what}: probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > NORMALIZATION_TOL:
        raise ValueError(f"{what}: probabilities sum to {p.sum()!r}, not 1")


class Model(abc.ABC):
    """A computable distribution over sequences with exact log-probabilities."""

    kind: ClassVar[str]
    description_bits: float

    @property
    @abc.abstractmethod
    def alphabet(self) -> int: ...

    @abc.abstractmethod
    def _log_prob_many(self, arr: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def conditional_log_prob(self, prefix, symbol: int) -> float:
        """``log P(symbol | prefix)``; the prefix may be empty."""

    @abc.abstractmethod
    def sample_many(self, rng: np.random.Generator, count: int, length: int) -> np.ndarray: ...

    def _check_description_bits(self) -> None:
        if not math.isfinite(self.description_bits) or self.description_bits < 0:
            raise ValueError(f"description_bits must be finite and >= 0, got {self.description_bits}")

    def _validate(self, arr: np.ndarray) -> np.ndarray:
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("expected a (count, length) array of symbols")
        if arr.shape[1] == 0:
            raise ValueError("empty sequences cannot be scored")
        if arr.size and (arr.min() < 0 or arr.max() >= self.alphabet):
            raise AlphabetError(f"symbols outside alphabet of size {self.alphabet}")
        return arr

    def log_prob_many(self, batch) -> np.ndarray:
        """Log-probabilities (nats) of each row of a ``(count, length)`` array."""
        return self._log_prob_many(self._validate(as_array(batch, self.alphabet)))

    def log_prob(self, x: Sequence) -> float:
        if isinstance(x, Sequence) and x.alphabet != self.alphabet:
            raise AlphabetError(f"sequence alphabet {x.alphabet} != model alphabet {self.alphabet}")
        return float(self.log_prob_many(as_array(x))[0])

    def _check_symbol(self, prefix, symbol: int) -> np.ndarray:
        if isinstance(prefix, Sequence):
            if prefix.alphabet != self.alphabet:
                raise AlphabetError(f"prefix alphabet {prefix.alphabet} != model alphabet {self.alphabet}")
            prefix = prefix.array
        prefix = np.asarray(prefix, dtype=np.int64).ravel()
        if not 0 <= symbol < self.alphabet or (prefix.size and (prefix.min() < 0 or prefix.max() >= self.alphabet)):
            raise AlphabetError(f"symbol outside alphabet of size {self.alphabet}")
        return prefix

    def sample(self, n: int, seed: int) -> Sequence:
        if n < 1:
            raise ValueError("sample length must be >= 1")
        rng = np.random.default_rng(seed)
        return Sequence.from_array(self.sample_many(rng, 1, n)[0], self.alphabet)

    def entropy_rate(self) -> float:
        raise UnsupportedModelError(f"no closed-form entropy rate for {self.kind}")


class _IIDModel(Model):
    """Shared machinery for models with i.i.d. symbols."""

    @property
    @abc.abstractmethod
    def marginal(self) -> np.ndarray: ...

    @property
    def alphabet(self) -> int:
        return len(self.marginal)

    @cached_property
    def symbol_log_probs(self) -> np.ndarray:
        return _log(self.marginal)

    @cached_property
    def _groups(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # Symbols sharing one log-probability are counted together, so a
        # sequence's log-probability under a uniform marginal is exactly
        # N * log p regardless of which symbols it contains.
        values, group_of = np.unique(self.symbol_log_probs, return_inverse=True)
        masses = np.array([self.marginal[group_of == g].sum() for g in range(len(values))])
        return values, group_of.ravel(), masses

    def group_counts(self, arr: np.ndarray) -> np.ndarray:
        values, group_of, _ = self._groups
        g = group_of[arr]
        return np.stack([(g == k).sum(axis=1) for k in range(len(values))], axis=1)

    def _log_prob_many(self, arr: np.ndarray) -> np.ndarray:
        values, _, _ = self._groups
        counts = self.group_counts(arr)
        out = np.zeros(arr.shape[0])
        impossible = np.zeros(arr.shape[0], dtype=bool)
        for k, v in enumerate(values):
            if np.isneginf(v):
                impossible |= counts[:, k] > 0
            else:
                out += counts[:, k] * v
        out[impossible] = -np.inf
        return out

    def per_symbol_neg_log_prob(self, arr: np.ndarray) -> np.ndarray:
        """``-(1/N) log P`` computed from symbol frequencies.

        Uses frequencies ``count/N`` so that a single-group marginal yields
        exactly ``-log p``, with no rounding from multiplying and dividing by N.
        """
        arr = self._validate(as_array(arr, self.alphabet))
        values, _, _ = self._groups
        counts = self.group_counts(arr)
        n = arr.shape[1]
        out = np.zeros(arr.shape[0])
        impossible = np.zeros(arr.shape[0], dtype=bool)
        for k, v in enumerate(values):
            if np.isneginf(v):
                impossible |= counts[:, k] > 0
            else:
                out -= (counts[:, k] / n) * v
        out[impossible] = np.inf
        return out

    def conditional_log_prob(self, prefix, symbol: int) -> float:
        self._check_symbol(prefix, symbol)
        return float(self.symbol_log_probs[symbol])

    def sample_many(self, rng, count, length):
        return rng.choice(self.alphabet, size=(count, length), p=self.marginal)

    def entropy_rate(self) -> float:
        values, _, masses = self._groups
        h = 0.0
        for v, m in zip(values, masses):
            if m > 0:
                h -= m * v
        return h


@dataclass(frozen=True)
class IIDCategorical(_IIDModel):
    """Independent symbols with a fixed categorical marginal."""

    probs: tuple[float, ...]
    description_bits: float = 0.0
    kind: ClassVar[str] = "iid-categorical"

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.probs) < 2:
            raise ValueError("alphabet size must be >= 2")
        _check_distribution(np.asarray(self.probs), "iid-categorical")
        self._check_description_bits()

    @cached_property
    def marginal(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=np.float64)


def bernoulli(p: float, description_bits: float = 0.0) -> IIDCategorical:
    """Binary i.i.d. model with ``P(1) = p``."""
    return IIDCategorical((1.0 - p, p), description_bits)


@dataclass(frozen=True)
class Uniform(_IIDModel):
    size: int
    description_bits: float = 0.0
    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("alphabet size must be >= 2")
        self._check_description_bits()

    @cached_property
    def marginal(self) -> np.ndarray:
        return np.full(self.size, 1.0 / self.size)

    @cached_property
    def symbol_log_probs(self) -> np.ndarray:
        return np.full(self.size, -math.log(self.size))


@dataclass(frozen=True)
class ConstantSymbol(_IIDModel):
    """Point mass on the sequence ``symbol symbol ... symbol``."""

    size: int
    symbol: int
    description_bits: float = 0.0
    kind: ClassVar[str] = "constant-symbol"

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("alphabet size must be >= 2")
        if not 0 <= self.symbol < self.size:
            raise AlphabetError(f"symbol {self.symbol} outside alphabet of size {self.size}")
        self._check_description_bits()

    @cached_property
    def marginal(self) -> np.ndarray:
        p = np.zeros(self.size)
        p[self.symbol] = 1.0
        return p

    def sample_many(self, rng, count, length):
        return np.full((count, length), self.symbol, dtype=np.int64)


@dataclass(frozen=True)
class MarkovChain(Model):
    """First-order Markov chain; ``initial=None`` starts from the stationary law."""

    transition: tuple[tuple[float, ...], ...]
    initial: tuple[float, ...] | None = None
    description_bits: float = 0.0
    kind: ClassVar[str] = "markov-order1"

    def __post_init__(self):
        rows = tuple(tuple(float(p) for p in row) for row in self.transition)
        object.__setattr__(self, "transition", rows)
        a = len(rows)
        if a < 2 or any(len(r) != a for r in rows):
            raise ValueError("transition matrix must be square with size >= 2")
        for i, row in enumerate(rows):
            _check_distribution(np.asarray(row), f"transition row {i}")
        if self.initial is not None:
            init = tuple(float(p) for p in self.initial)
            object.__setattr__(self, "initial", init)
            if len(init) != a:
                raise ValueError("initial distribution size does not match transition matrix")
            _check_distribution(np.asarray(init), "initial distribution")
        self._check_description_bits()

    @property
    def alphabet(self) -> int:
        return len(self.transition)

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.transition, dtype=np.float64)

    @cached_property
    def stationary(self) -> np.ndarray:
        """Unique stationary distribution of the lazy chain ``(T + I) / 2``.

        The lazy matrix is squared repeatedly, so after k rounds the iterate
        has taken 2^k power-iteration steps. Iteration stops once successive
        iterates agree to rounding; failing to reach ``STATIONARY_TOL``
        within ``STATIONARY_MAX_ITER`` equivalent steps is an error.
        """
        t = self.matrix
        a = self.alphabet
        if np.linalg.matrix_rank(t.T - np.eye(a), tol=1e-9) != a - 1:
            raise UnsupportedModelError("Markov chain has no unique stationary distribution")
        power = 0.5 * (t + np.eye(a))
        pi = np.full(a, 1.0 / a) @ power
        change = math.inf
        steps = 1
        while steps < STATIONARY_MAX_ITER:
            power = power @ power
            power /= power.sum(axis=1, keepdims=True)
            nxt = pi @ power
            nxt /= nxt.sum()
            change = np.abs(nxt - pi).max()
            pi = nxt
            steps *= 2
            if change < 1e-15:
                break
        if change >= STATIONARY_TOL:
            raise UnsupportedModelError("stationary distribution did not converge")
        return pi

    @cached_property
    def start(self) -> np.ndarray:
        return self.stationary if self.initial is None else np.asarray(self.initial)

    @cached_property
    def _log_t(self) -> np.ndarray:
        return _log(self.matrix)

    @cached_property
    def _log_start(self) -> np.ndarray:
        return _log(self.start)

    def _log_prob_many(self, arr):
        out = self._log_start[arr[:, 0]].copy()
        for t in range(1, arr.shape[1]):
            out += self._log_t[arr[:, t - 1], arr[:, t]]
        return out

    def conditional_log_prob(self, prefix, symbol):
        prefix = self._check_symbol(prefix, symbol)
        if prefix.size == 0:
            return float(self._log_start[symbol])
        return float(self._log_t[prefix[-1], symbol])

    def sample_many(self, rng, count, length):
        cdf_start = np.cumsum(self.start)
        cdf = np.cumsum(self.matrix, axis=1)
        u = rng.random((count, length))
        out = np.empty((count, length), dtype=np.int64)
        out[:, 0] = np.minimum(np.searchsorted(cdf_start, u[:, 0], side="right"), self.alphabet - 1)
        for t in range(1, length):
            rows = cdf[out[:, t - 1]]
            out[:, t] = np.minimum((u[:, t, None] >= rows).sum(axis=1), self.alphabet - 1)
        return out

    def entropy_rate(self) -> float:
        t = self.matrix
        with np.errstate(divide="ignore", invalid="ignore"):
            row_h = -np.where(t > 0, t * np.log(t), 0.0).sum(axis=1)
        return float(self.stationary @ row_h)


@dataclass(frozen=True)
class PeriodicPattern(Model):
    """Point mass on ``pattern`` tiled from position 0 and cut to length N."""

    size: int
    pattern: tuple[int, ...]
    description_bits: float = 0.0
    kind: ClassVar[str] = "periodic-pattern"

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(int(s) for s in self.pattern))
        if self.size < 2:
            raise ValueError("alphabet size must be >= 2")
        if not self.pattern:
            raise ValueError("pattern must be non-empty")
        if any(not 0 <= s < self.size for s in self.pattern):
            raise AlphabetError("pattern symbol outside alphabet")
        self._check_description_bits()

    @property
    def alphabet(self) -> int:
        return self.size

    def tile(self, length: int) -> np.ndarray:
        reps = -(-length // len(self.pattern))
        return np.tile(np.asarray(self.pattern, dtype=np.int64), reps)[:length]

    def _log_prob_many(self, arr):
        hit = (arr == self.tile(arr.shape[1])).all(axis=1)
        return np.where(hit, 0.0, -np.inf)

    def conditional_log_prob(self, prefix, symbol):
        prefix = self._check_symbol(prefix, symbol)
        return 0.0 if self.pattern[prefix.size % len(self.pattern)] == symbol else -math.inf

    def sample_many(self, rng, count, length):
        return np.tile(self.tile(length), (count, 1))


@dataclass(frozen=True)
class MemorizedDataset(Model):
    """Uniform mixture of point masses on stored sequences (multiplicity counts)."""

    size: int
    dataset: tuple[tuple[int, ...], ...]
    description_bits: float = 0.0
    kind: ClassVar[str] = "memorized-dataset"

    def __post_init__(self):
        data = tuple(tuple(int(s) for s in (d.symbols if isinstance(d, Sequence) else d)) for d in self.dataset)
        object.__setattr__(self, "dataset", data)
        if not data:
            raise ValueError("memorized dataset must be non-empty")
        if any(not d for d in data):
            raise ValueError("stored sequences must be non-empty")
        if any(not 0 <= s < self.size for d in data for s in d):
            raise AlphabetError("stored sequence symbol outside alphabet")
        self._check_description_bits()

    @property
    def alphabet(self) -> int:
        return self.size

    @cached_property
    def _by_length(self) -> dict[int, np.ndarray]:
        groups: dict[int, list] = {}
        for d in self.dataset:
            groups.setdefault(len(d), []).append(d)
        return {n: np.asarray(v, dtype=np.int64) for n, v in groups.items()}

    def _log_prob_many(self, arr):
        stored = self._by_length.get(arr.shape[1])
        if stored is None:
            return np.full(arr.shape[0], -np.inf)
        counts = np.zeros(arr.shape[0])
        for row in stored:
            counts += (arr == row).all(axis=1)
        return _log(counts) - math.log(len(self.dataset))

    def conditional_log_prob(self, prefix, symbol):
        prefix = tuple(self._check_symbol(prefix, symbol).tolist())
        k = len(prefix)
        den = sum(1 for d in self.dataset if len(d) > k and d[:k] == prefix) if k else len(self.dataset)
        num = sum(1 for d in self.dataset if len(d) > k and d[:k] == prefix and d[k] == symbol)
        if den == 0 or num == 0:
            return -math.inf
        return math.log(num) - math.log(den)

    def sample_many(self, rng, count, length):
        stored = self._by_length.get(length)
        if stored is None:
            raise ValueError(f"no stored sequences of length {length}")
        # Draw over the whole dataset so the law is exactly Q_D restricted to this length.
        idx = rng.integers(0, len(stored), size=count)
        return stored[idx].copy()


def log_prob(model: Model, x: Sequence) -> float:
    return model.log_prob(x)


def conditional_log_prob(model: Model, prefix, symbol: int) -> float:
    return model.conditional_log_prob(prefix, symbol)


def entropy_rate(model: Model) -> float:
    return model.entropy_rate()


def sample(model: Model, n: int, seed: int) -> Sequence:
    return model.sample(n, seed)


def all_sequences(alphabet: int, length: int) -> np.ndarray:
    """Every sequence of the given length, lexicographic, as a 2-D array."""
    total = alphabet**length
    idx = np.arange(total, dtype=np.int64)
    powers = alphabet ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers) % alphabet


def iter_all_sequences(alphabet: int, length: int, chunk: int = 1 << 16) -> Iterable[np.ndarray]:
    """Chunks of the lexicographic enumeration, for spaces too big to hold at once."""
    total = alphabet**length
    powers = alphabet ** np.arange(length - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield (idx[:, None] // powers) % alphabet
