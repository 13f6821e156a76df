"""Multi-task loss terms with analytic gradients, softplus triplet loss,
hardest-example mining and PK batch sampling.

Each loss returns ``(value, gradient)`` so a downstream trainer can consume
the gradients directly; nothing here updates parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax, softmax

from mcasv.formats import EmbeddingSet  # noqa: F401  (re-exported)
from mcasv.rng import make_rng

BCE_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    lambda_vad: float = 0.1
    lambda_enh: float = 0.0005

    def __post_init__(self):
        if self.lambda_vad < 0 or self.lambda_enh < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass(frozen=True)
class TripletConfig:
    margin: float = 0.0
    beta: float = 1.0
    distance: str = "euclidean"
    K: int = 4
    P_spk: int = 60
    normalize: bool = False

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.K < 2 or self.P_spk < 2:
            raise ValueError("PK sampling needs K >= 2 and P_spk >= 2")
        if self.distance != "euclidean":
            raise ValueError(f"unsupported distance {self.distance!r}")

    @property
    def batch_size(self) -> int:
        return self.K * self.P_spk


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy and its gradient w.r.t. ``logits`` (B, C)."""
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels))
    if y.shape != (z.shape[0],):
        raise ValueError(f"{y.size} labels for {z.shape[0]} examples")
    if np.any(y < 0) or np.any(y >= z.shape[1]):
        raise ValueError(f"labels must lie in [0, {z.shape[1]})")
    rows = np.arange(z.shape[0])
    loss = -log_softmax(z, axis=1)[rows, y].mean()
    grad = softmax(z, axis=1)
    grad[rows, y] -= 1.0
    return float(loss), grad / z.shape[0]


def frame_bce(pred, labels, eps: float = BCE_EPS):
    """Mean frame-wise binary cross-entropy; gradient w.r.t. ``pred``.

    Predictions are clamped to [eps, 1 - eps]; the clamp passes no gradient.
    """
    p_raw = np.asarray(pred, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p_raw.shape != y.shape:
        raise ValueError(f"{p_raw.shape} predictions vs {y.shape} labels")
    p = np.clip(p_raw, eps, 1.0 - eps)
    loss = -(y * np.log(p) + (1.0 - y) * np.log1p(-p)).mean()
    grad = (p - y) / (p * (1.0 - p)) / p.size
    grad = np.where((p_raw > eps) & (p_raw < 1.0 - eps), grad, 0.0)
    return float(loss), grad


def spec_mae(pred, target):
    """Mean absolute error over all T-F bins; subgradient 0 at exact ties."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    diff = p - t
    return float(np.abs(diff).mean()), np.sign(diff) / diff.size


def compose_loss(l_emb: float, l_vad: float, l_enh: float, w: LossWeights = LossWeights(),
                 enh_enabled: bool = True) -> float:
    base = l_emb + w.lambda_vad * l_vad
    return base + w.lambda_enh * l_enh if enh_enabled else base


def softplus(x, beta: float = 1.0):
    """beta^-1 log(1 + exp(beta x)), switching to x + exp(-beta x)/beta for beta x > 30."""
    x = np.asarray(x, dtype=np.float64)
    bx = beta * x
    big = bx > 30.0
    safe = np.where(big, 0.0, bx)
    return np.where(big, x + np.exp(-np.where(big, bx, 0.0)) / beta, np.log1p(np.exp(safe)) / beta)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def triplet_loss(a, p, n, cfg: TripletConfig = TripletConfig()):
    """Softplus triplet loss f_beta(d(a,p) - d(a,n) + m), averaged over rows.

    Returns ``(loss, (grad_a, grad_p, grad_n))``. Gradients at d = 0 use the
    zero subgradient.
    """
    a, p, n = (np.asarray(v, dtype=np.float64) for v in (a, p, n))
    if not a.shape == p.shape == n.shape:
        raise ValueError(f"embedding shapes differ: {a.shape}, {p.shape}, {n.shape}")
    single = a.ndim == 1
    a, p, n = np.atleast_2d(a), np.atleast_2d(p), np.atleast_2d(n)
    d_ap = np.linalg.norm(a - p, axis=1)
    d_an = np.linalg.norm(a - n, axis=1)
    x = d_ap - d_an + cfg.margin
    losses = softplus(x, cfg.beta)
    s = _sigmoid(cfg.beta * x)[:, None] / a.shape[0]
    u_ap = np.divide(a - p, d_ap[:, None], out=np.zeros_like(a), where=d_ap[:, None] > 0)
    u_an = np.divide(a - n, d_an[:, None], out=np.zeros_like(a), where=d_an[:, None] > 0)
    g_a, g_p, g_n = s * (u_ap - u_an), -s * u_ap, s * u_an
    if single:
        g_a, g_p, g_n = g_a[0], g_p[0], g_n[0]
    return float(losses.mean()), (g_a, g_p, g_n)


def pairwise_distances(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def _l2_normalize(x):
    norm = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("cannot length-normalize a zero embedding")
    return x / norm


def mine_hardest_batch(batch, cfg: TripletConfig = TripletConfig(), speakers=None):
    """Hardest positive and negative per anchor.

    ``batch`` is an :class:`EmbeddingSet` or a (B, D) array with ``speakers``
    given. Ties go to the lowest row index. Returns ``(triples, loss,
    per_anchor_losses)`` with ``triples`` as (anchor, positive, negative).
    """
    if isinstance(batch, EmbeddingSet):
        x, speakers = batch.vectors, batch.speakers
    else:
        x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    spk = np.asarray(speakers)
    if spk.shape != (x.shape[0],):
        raise ValueError("one speaker id per row is required")
    if cfg.normalize:
        x = _l2_normalize(x)
    names, counts = np.unique(spk, return_counts=True)
    if np.any(counts < 2):
        lonely = names[counts < 2].tolist()
        raise ValueError(f"speakers {lonely} have a single row; hardest positive undefined")
    if names.size < 2:
        raise ValueError("mining needs at least two speakers in the batch")

    dist = pairwise_distances(x)
    same = spk[:, None] == spk[None, :]
    rows = np.arange(x.shape[0])
    pos_d = np.where(same & (rows[:, None] != rows[None, :]), dist, -np.inf)
    neg_d = np.where(~same, dist, np.inf)
    positive = np.argmax(pos_d, axis=1)
    negative = np.argmin(neg_d, axis=1)
    x_ = dist[rows, positive] - dist[rows, negative] + cfg.margin
    per_anchor = softplus(x_, cfg.beta)
    triples = [(int(a), int(p), int(n)) for a, p, n in zip(rows, positive, negative)]
    return triples, float(per_anchor.mean()), per_anchor


def pk_sample(speakers, K: int = 4, P_spk: int = 60, seed: int = 0) -> np.ndarray:
    """Row indices for a batch of ``P_spk`` distinct speakers with ``K`` rows each.

    Speakers with fewer than ``K`` rows are sampled with replacement.
    """
    spk = np.asarray(speakers)
    names = np.unique(spk)
    if names.size < P_spk:
        raise ValueError(f"pool has {names.size} speakers, batch needs {P_spk}")
    rng = make_rng(seed)
    chosen = rng.choice(names.size, size=P_spk, replace=False)
    out = []
    for k in chosen:
        rows = np.flatnonzero(spk == names[k])
        out.append(rng.choice(rows, size=K, replace=rows.size < K))
    return np.concatenate(out)
