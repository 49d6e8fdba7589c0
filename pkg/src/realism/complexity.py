"""Deterministic lossless codecs and the compression-based deficiency score.

Code lengths stand in for Kolmogorov complexity, so they must be exact and
reproducible. Every code stream starts with a 5-byte header:

    byte 0      codec id: high nibble = kind, low nibble = parameter
                (order k for arithmetic coding, log2(window) - 8 for LZ)
    bytes 1-4   uncompressed length, big-endian uint32

and the reported bit length is ``40 + payload bits``. Payload bits are
counted exactly (the final partial byte is padded with zeros but the padding
is not counted).

Kinds
-----
store   raw bytes.
rle     (run length 1..255, value) byte pairs.
lz      LZSS: flag bit 0 + 8-bit literal, or flag bit 1 + offset-1 in
        log2(window) bits + (length-3) in 4 bits; greedy matching over a
        hash chain of depth 32.
arith   adaptive order-k byte model (k in 0, 1, 2) driving a 32-bit binary
        arithmetic coder. Each context starts with every count at 1; a coded
        symbol gains 32; when a context total exceeds 65536 every count is
        halved (rounding up, so counts never reach 0). Missing context bytes
        at the start of the stream read as 0. Renormalization follows the
        classic low/high scheme: emit while the top bits agree, defer
        (underflow) while ``low`` is in the second quarter and ``high`` in
        the third; the stream ends with a single 1 bit and the decoder reads
        zeros past the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numba import njit

from .models import Model, Sequence

__all__ = [
    "Codec",
    "CompressResult",
    "DeficiencyScore",
    "compress",
    "decompress",
    "code_length",
    "compression_deficiency",
    "HEADER_BITS",
]

HEADER_BITS = 40
_KIND_IDS = {"store": 0, "rle": 1, "lz": 2, "arith": 3}
_ID_KINDS = {v: k for k, v in _KIND_IDS.items()}

_MASK = (1 << 32) - 1
_HALF = 1 << 31
_QUARTER = 1 << 30
_INC = 32
_LIMIT = 1 << 16


@dataclass(frozen=True)
class Codec:
    kind: Literal["store", "rle", "lz", "arith"] = "arith"
    order: int = 2
    window: int = 4096

    def __post_init__(self):
        if self.kind not in _KIND_IDS:
            raise ValueError(f"unknown codec kind {self.kind!r}")
        if self.kind == "arith" and self.order not in (0, 1, 2):
            raise ValueError("arithmetic codec order must be 0, 1 or 2")
        if self.kind == "lz":
            wbits = int(math.log2(self.window))
            if 1 << wbits != self.window or not 8 <= wbits <= 23:
                raise ValueError("lz window must be a power of two between 2^8 and 2^23")

    @property
    def param(self) -> int:
        if self.kind == "arith":
            return self.order
        if self.kind == "lz":
            return int(math.log2(self.window)) - 8
        return 0

    @property
    def codec_id(self) -> int:
        return (_KIND_IDS[self.kind] << 4) | self.param

    @classmethod
    def from_id(cls, codec_id: int) -> "Codec":
        kind = _ID_KINDS.get(codec_id >> 4)
        if kind is None:
            raise ValueError(f"unknown codec id {codec_id}")
        param = codec_id & 0xF
        if kind == "arith":
            return cls(kind, order=param)
        if kind == "lz":
            return cls(kind, window=1 << (param + 8))
        return cls(kind)

    @classmethod
    def parse(cls, name: str) -> "Codec":
        """``store``, ``rle``, ``lz`` / ``lz:4096``, ``arith0`` .. ``arith2``."""
        if name.startswith("arith"):
            return cls("arith", order=int(name[5:] or 2))
        if name.startswith("lz"):
            _, _, w = name.partition(":")
            return cls("lz", window=int(w or 4096))
        return cls(name)

    def __str__(self) -> str:
        if self.kind == "arith":
            return f"arith{self.order}"
        if self.kind == "lz":
            return f"lz:{self.window}"
        return self.kind


@dataclass(frozen=True)
class CompressResult:
    code: bytes
    bits: int


@dataclass(frozen=True)
class DeficiencyScore:
    neg_log_p_bits: float
    code_bits: int
    deficiency_bits: float


# ---- bit-level kernels ----


@njit(cache=True)
def _put_bit(out, nbits, bit):
    if bit:
        out[nbits >> 3] |= np.uint8(0x80 >> (nbits & 7))
    return nbits + 1


@njit(cache=True)
def _put_bits(out, nbits, value, width):
    for i in range(width - 1, -1, -1):
        nbits = _put_bit(out, nbits, (value >> i) & 1)
    return nbits


@njit(cache=True)
def _get_bit(buf, pos):
    if (pos >> 3) >= buf.shape[0]:
        return 0
    return (buf[pos >> 3] >> (7 - (pos & 7))) & 1


@njit(cache=True)
def _get_bits(buf, pos, width):
    v = 0
    for _ in range(width):
        v = (v << 1) | _get_bit(buf, pos)
        pos += 1
    return v


@njit(cache=True)
def _rle_encode(data):
    n = data.shape[0]
    out = np.empty(2 * n, dtype=np.uint8)
    j = 0
    i = 0
    while i < n:
        v = data[i]
        run = 1
        while i + run < n and run < 255 and data[i + run] == v:
            run += 1
        out[j] = run
        out[j + 1] = v
        j += 2
        i += run
    return out[:j]


@njit(cache=True)
def _rle_decode(payload, n):
    out = np.empty(n, dtype=np.uint8)
    j = 0
    for i in range(0, payload.shape[0] - 1, 2):
        run = payload[i]
        v = payload[i + 1]
        for _ in range(run):
            if j < n:
                out[j] = v
                j += 1
    return out


@njit(cache=True)
def _lz_encode(data, wbits):
    n = data.shape[0]
    window = 1 << wbits
    out = np.zeros((n * 9 + 7) // 8 + 8, dtype=np.uint8)
    head = np.full(1 << 16, -1, dtype=np.int64)
    prev = np.full(max(n, 1), -1, dtype=np.int64)
    nbits = 0
    i = 0
    max_len = 18
    while i < n:
        best_len = 0
        best_dist = 0
        if i + 2 < n:
            h = ((np.int64(data[i]) << 8) ^ (np.int64(data[i + 1]) << 4) ^ np.int64(data[i + 2])) & 0xFFFF
            cand = head[h]
            depth = 0
            while cand >= 0 and i - cand <= window and depth < 32:
                length = 0
                limit = min(max_len, n - i)
                while length < limit and data[cand + length] == data[i + length]:
                    length += 1
                if length > best_len:
                    best_len = length
                    best_dist = i - cand
                    if length == limit:
                        break
                cand = prev[cand]
                depth += 1
        if best_len >= 3:
            nbits = _put_bit(out, nbits, 1)
            nbits = _put_bits(out, nbits, best_dist - 1, wbits)
            nbits = _put_bits(out, nbits, best_len - 3, 4)
            step = best_len
        else:
            nbits = _put_bit(out, nbits, 0)
            nbits = _put_bits(out, nbits, np.int64(data[i]), 8)
            step = 1
        for k in range(i, i + step):
            if k + 2 < n:
                hk = ((np.int64(data[k]) << 8) ^ (np.int64(data[k + 1]) << 4) ^ np.int64(data[k + 2])) & 0xFFFF
                prev[k] = head[hk]
                head[hk] = k
        i += step
    return out[: (nbits + 7) // 8], nbits


@njit(cache=True)
def _lz_decode(payload, n, wbits):
    out = np.empty(n, dtype=np.uint8)
    pos = 0
    j = 0
    while j < n:
        if _get_bit(payload, pos):
            pos += 1
            dist = _get_bits(payload, pos, wbits) + 1
            pos += wbits
            length = _get_bits(payload, pos, 4) + 3
            pos += 4
            for _ in range(length):
                if j < n:
                    out[j] = out[j - dist]
                    j += 1
        else:
            pos += 1
            out[j] = _get_bits(payload, pos, 8)
            pos += 8
            j += 1
    return out


@njit(cache=True)
def _context(data, i, order):
    c = 0
    for k in range(order, 0, -1):
        c = c << 8
        if i - k >= 0:
            c |= np.int64(data[i - k])
    return c


@njit(cache=True)
def _row(slots, totals, ctx, used):
    # Context rows are handed out in order of first use, so tables stay dense.
    r = slots[ctx]
    if r < 0:
        r = used
        slots[ctx] = r
        totals[r] = 256
        used += 1
    return r, used


@njit(cache=True)
def _bump(extra, totals, ctx, s):
    extra[ctx, s] += _INC
    totals[ctx] += _INC
    if totals[ctx] > _LIMIT:
        t = 256
        for k in range(256):
            extra[ctx, k] >>= 1
            t += extra[ctx, k]
        totals[ctx] = t


@njit(cache=True)
def _arith_encode(data, order):
    n = data.shape[0]
    slots, extra, totals = _model_tables(n, order)
    used = 0
    out = np.zeros(n * 3 + 16, dtype=np.uint8)
    nbits = 0
    low = np.int64(0)
    high = np.int64(_MASK)
    pending = 0
    for i in range(n):
        ctx, used = _row(slots, totals, _context(data, i, order), used)
        s = np.int64(data[i])
        cum = s
        for k in range(s):
            cum += extra[ctx, k]
        freq = 1 + np.int64(extra[ctx, s])
        total = totals[ctx]
        rng = high - low + 1
        high = low + (cum + freq) * rng // total - 1
        low = low + cum * rng // total
        while ((low ^ high) & _HALF) == 0:
            bit = low >> 31
            nbits = _put_bit(out, nbits, bit)
            for _ in range(pending):
                nbits = _put_bit(out, nbits, bit ^ 1)
            pending = 0
            low = (low << 1) & _MASK
            high = ((high << 1) & _MASK) | 1
        while (low & ~high & _QUARTER) != 0:
            pending += 1
            low = ((low << 1) ^ _HALF) & _MASK
            high = (((high ^ _HALF) << 1) | _HALF | 1) & _MASK
        _bump(extra, totals, ctx, s)
    nbits = _put_bit(out, nbits, 1)
    return out[: (nbits + 7) // 8], nbits


@njit(cache=True)
def _arith_decode(payload, n, order):
    slots, extra, totals = _model_tables(n, order)
    used = 0
    out = np.empty(n, dtype=np.uint8)
    low = np.int64(0)
    high = np.int64(_MASK)
    code = np.int64(0)
    pos = 0
    for _ in range(32):
        code = (code << 1) | _get_bit(payload, pos)
        pos += 1
    for i in range(n):
        ctx, used = _row(slots, totals, _context(out, i, order), used)
        total = totals[ctx]
        rng = high - low + 1
        value = ((code - low + 1) * total - 1) // rng
        s = 0
        cum = 0
        while True:
            f = 1 + np.int64(extra[ctx, s])
            if cum + f > value:
                break
            cum += f
            s += 1
        freq = 1 + np.int64(extra[ctx, s])
        out[i] = s
        high = low + (cum + freq) * rng // total - 1
        low = low + cum * rng // total
        while ((low ^ high) & _HALF) == 0:
            low = (low << 1) & _MASK
            high = ((high << 1) & _MASK) | 1
            code = ((code << 1) & _MASK) | _get_bit(payload, pos)
            pos += 1
        while (low & ~high & _QUARTER) != 0:
            low = ((low << 1) ^ _HALF) & _MASK
            high = (((high ^ _HALF) << 1) | _HALF | 1) & _MASK
            code = (code & _HALF) | ((code << 1) & (_MASK >> 1)) | _get_bit(payload, pos)
            pos += 1
        _bump(extra, totals, ctx, s)
    return out


@njit(cache=True)
def _model_tables(n, order):
    # Counts are stored as (count - 1) so a zeroed row is the initial state.
    n_ctx = 1 << (8 * order)
    rows = min(n, n_ctx)
    slots = np.full(n_ctx, -1, dtype=np.int32)
    return slots, np.zeros((rows, 256), dtype=np.uint16), np.zeros(rows, dtype=np.int64)


def _as_bytes(data) -> np.ndarray:
    if isinstance(data, np.ndarray):
        return np.ascontiguousarray(data, dtype=np.uint8)
    return np.frombuffer(bytes(data), dtype=np.uint8)


def compress(codec: Codec, data: bytes) -> CompressResult:
    """Compress a non-empty byte string; ``bits`` includes the 40-bit header."""
    arr = _as_bytes(data)
    n = arr.shape[0]
    if n == 0:
        raise ValueError("data must be non-empty")
    if n >= 1 << 32:
        raise ValueError("data too long for the 32-bit length field")
    header = bytes([codec.codec_id]) + n.to_bytes(4, "big")
    if codec.kind == "store":
        payload, pbits = arr.tobytes(), 8 * n
    elif codec.kind == "rle":
        enc = _rle_encode(arr)
        payload, pbits = enc.tobytes(), 8 * enc.shape[0]
    elif codec.kind == "lz":
        enc, pbits = _lz_encode(arr, codec.param + 8)
        payload = enc.tobytes()
    else:
        enc, pbits = _arith_encode(arr, codec.order)
        payload = enc.tobytes()
    return CompressResult(header + payload, HEADER_BITS + int(pbits))


def decompress(code: bytes) -> bytes:
    if len(code) < 5:
        raise ValueError("code stream shorter than its header")
    codec = Codec.from_id(code[0])
    n = int.from_bytes(code[1:5], "big")
    payload = np.frombuffer(code[5:], dtype=np.uint8)
    if codec.kind == "store":
        out = payload[:n]
    elif codec.kind == "rle":
        out = _rle_decode(payload, n)
    elif codec.kind == "lz":
        out = _lz_decode(payload, n, codec.param + 8)
    else:
        out = _arith_decode(payload, n, codec.order)
    return bytes(out)


def code_length(codec: Codec, data: bytes) -> int:
    return compress(codec, data).bits


def compression_deficiency(P: Model, x, codec: Codec) -> DeficiencyScore:
    """``-log2 P(x) - C(x)`` in bits.

    ``x`` is either a byte string (``P`` must be over 256 symbols) or a
    :class:`Sequence` with at most 256 symbols, coded one symbol per byte.
    """
    if isinstance(x, Sequence):
        if x.alphabet != P.alphabet:
            raise ValueError(f"sequence alphabet {x.alphabet} != model alphabet {P.alphabet}")
        seq, raw = x, x.to_bytes()
    else:
        if P.alphabet != 256:
            raise ValueError("byte input needs a model over the 256-symbol byte alphabet")
        raw = bytes(x)
        seq = Sequence.from_bytes(raw)
    log_p = P.log_prob(seq)
    bits = code_length(codec, raw)
    neg_log_p_bits = math.inf if log_p == -math.inf else -log_p / math.log(2.0)
    return DeficiencyScore(neg_log_p_bits, bits, neg_log_p_bits - bits)
