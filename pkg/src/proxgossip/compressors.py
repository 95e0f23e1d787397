"""Contractive communication compressors with certified factors.

Every compressor Q here satisfies E ||x - Q[x]||^2 <= alpha^2 ||x||^2 with
a known alpha^2 < 1: identity (alpha^2 = 0), top-k and random-k
sparsification (alpha^2 = 1 - k/d), and rescaled stochastic quantization
(alpha^2 = 1 - 1/tau with tau = 1 + min(d/s^2, sqrt(d)/s)).  compress
returns both the dense output Q[x] and an encoded message whose bit cost
feeds the communication accounting of the simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class CertificationError(RuntimeError):
    """Measured contraction ratio exceeded the certified factor."""

    def __init__(self, kind: str, measured: float, bound: float):
        self.kind = kind
        self.measured = measured
        self.bound = bound
        super().__init__(
            f"compressor {kind!r} failed certification: measured ratio "
            f"{measured:.6g} > allowed {bound:.6g}"
        )


@dataclass(frozen=True)
class Compressor:
    """Descriptor of a vector-to-vector contraction.

    kind: "identity" | "topk" | "randk" | "qsgd"; ratio is the kept
    fraction for topk/randk, levels the quantization parameter s for qsgd.
    """

    kind: str
    ratio: float = 1.0
    levels: int = 1

    def keep_count(self, d: int) -> int:
        # ceil(ratio * d), guarded against float products like 0.7*10 = 7.000...01
        return int(math.ceil(self.ratio * d - 1e-9))

    def alpha_sq(self, d: int) -> float:
        """Certified contraction factor alpha^2 at dimension d."""
        if d < 1:
            raise ValueError(f"need d >= 1, got {d}")
        if self.kind == "identity":
            return 0.0
        if self.kind in ("topk", "randk"):
            return 1.0 - self.keep_count(d) / d
        if self.kind == "qsgd":
            s = self.levels
            tau = 1.0 + min(d / s**2, math.sqrt(d) / s)
            return 1.0 - 1.0 / tau
        raise ValueError(f"unknown compressor kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "identity":
            return "identity"
        if self.kind in ("topk", "randk"):
            return f"{self.kind}({self.ratio:g})"
        return f"qsgd(s={self.levels})"


def identity() -> Compressor:
    return Compressor(kind="identity")


def topk(ratio: float) -> Compressor:
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"topk ratio must be in (0, 1], got {ratio}")
    return Compressor(kind="topk", ratio=float(ratio))


def randk(ratio: float) -> Compressor:
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"randk ratio must be in (0, 1], got {ratio}")
    return Compressor(kind="randk", ratio=float(ratio))


def qsgd(levels: int) -> Compressor:
    if levels < 1:
        raise ValueError(f"qsgd needs levels >= 1, got {levels}")
    return Compressor(kind="qsgd", levels=int(levels))


@dataclass(frozen=True, eq=False)
class CompressedMessage:
    """Encoded form of Q[x] plus its accounted size in bits."""

    kind: str
    dim: int
    bit_cost: int
    payload: dict


def bit_cost(q: Compressor, d: int) -> int:
    """Accounted message size in bits for one compressed vector.

    Values are 64-bit floats, sparse indices take ceil(log2 d) bits, qsgd
    sends the norm plus one sign bit and ceil(log2(s+1)) level bits per
    coordinate.
    """
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    if q.kind == "identity":
        return 64 * d
    if q.kind in ("topk", "randk"):
        k = q.keep_count(d)
        return k * (64 + math.ceil(math.log2(d)))
    if q.kind == "qsgd":
        return 64 + d * (1 + math.ceil(math.log2(q.levels + 1)))
    raise ValueError(f"unknown compressor kind {q.kind!r}")


def _decode_sparse(dim: int, indices: np.ndarray, values: np.ndarray) -> np.ndarray:
    out = np.zeros(dim)
    out[indices] = values
    return out


def _decode_qsgd(dim: int, norm: float, signs: np.ndarray, levels: np.ndarray,
                 s: int, tau: float) -> np.ndarray:
    return signs * (norm / s) * levels / tau


def compress(q: Compressor, x: np.ndarray, rng: np.random.Generator | None = None):
    """Apply Q to x, returning (Q[x], CompressedMessage).

    randk and qsgd consume the random stream; topk and identity ignore it.
    topk breaks magnitude ties by keeping the lower index.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    if q.kind == "identity":
        y = x.copy()
        msg = CompressedMessage("identity", d, bit_cost(q, d), {"values": y.copy()})
        return y, msg
    if q.kind in ("topk", "randk"):
        k = q.keep_count(d)
        if q.kind == "topk":
            # stable sort on -|x| keeps the lower index first among ties
            idx = np.argsort(-np.abs(x), kind="stable")[:k]
        else:
            if rng is None:
                raise ValueError("randk needs a random stream")
            idx = rng.choice(d, size=k, replace=False)
        idx = np.sort(idx)
        vals = x[idx].copy()
        y = _decode_sparse(d, idx, vals)
        msg = CompressedMessage(q.kind, d, bit_cost(q, d),
                                {"indices": idx, "values": vals})
        return y, msg
    if q.kind == "qsgd":
        if rng is None:
            raise ValueError("qsgd needs a random stream")
        s = q.levels
        tau = 1.0 + min(d / s**2, math.sqrt(d) / s)
        norm = float(np.linalg.norm(x))
        xi = rng.random(d)
        if norm == 0.0:
            levels = np.zeros(d)
            signs = np.zeros(d)
        else:
            levels = np.floor(s * np.abs(x) / norm + xi)
            signs = np.sign(x)
        y = _decode_qsgd(d, norm, signs, levels, s, tau)
        msg = CompressedMessage("qsgd", d, bit_cost(q, d),
                                {"norm": norm, "signs": signs, "levels": levels,
                                 "s": s, "tau": tau})
        return y, msg
    raise ValueError(f"unknown compressor kind {q.kind!r}")


def decode(msg: CompressedMessage) -> np.ndarray:
    """Reconstruct Q[x] exactly from the encoded message."""
    if msg.kind == "identity":
        return msg.payload["values"].copy()
    if msg.kind in ("topk", "randk"):
        return _decode_sparse(msg.dim, msg.payload["indices"], msg.payload["values"])
    if msg.kind == "qsgd":
        p = msg.payload
        return _decode_qsgd(msg.dim, p["norm"], p["signs"], p["levels"], p["s"], p["tau"])
    raise ValueError(f"unknown message kind {msg.kind!r}")


def compress_columns(q: Compressor, m: np.ndarray, rngs) -> np.ndarray:
    """Apply Q to each column of a d x n matrix with per-column streams."""
    out = np.empty_like(m)
    for i in range(m.shape[1]):
        rng = rngs[i] if rngs is not None else None
        out[:, i], _ = compress(q, m[:, i], rng)
    return out


def certify_alpha(q: Compressor, d: int, trials: int, rng: np.random.Generator) -> float:
    """Empirically certify E ||x - Q[x]||^2 <= alpha^2 ||x||^2 at dimension d.

    Unit-norm Gaussian directions are drawn; deterministic kinds are held
    to the max observed ratio, randomized kinds to the mean plus 3 standard
    errors.  Raises CertificationError on failure, else returns the
    measured ratio.
    """
    if trials < 1000:
        raise ValueError(f"need at least 1000 trials, got {trials}")
    bound = q.alpha_sq(d)
    ratios = np.empty(trials)
    for t in range(trials):
        x = rng.standard_normal(d)
        x /= np.linalg.norm(x)
        y, _ = compress(q, x, rng)
        r = x - y
        ratios[t] = float(r @ r)
    if q.kind in ("identity", "topk"):
        measured = float(ratios.max())
        allowed = bound + 1e-12
    else:
        measured = float(ratios.mean())
        se = float(ratios.std(ddof=1)) / math.sqrt(trials)
        allowed = bound + 3.0 * se + 1e-12
    if measured > allowed:
        raise CertificationError(q.describe(), measured, allowed)
    return measured
