"""Contrastive fine-tuning of the sentence encoder (stage 1).

Labeled data is turned into positive pairs (same class, target similarity
1) and negative pairs (different class, target 0). Both sides of a pair
are embedded by the one shared projection matrix, Siamese style, and W is
updated by gradient descent on the squared error between the embedding
cosine and the binary target. The gradient is exact: it flows through the
L2 normalization of both embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Dataset
from .encoder import EncoderModel, feature_arrays, featurize
from .errors import TrainingError, ValidationError
from .rng import SplitMix64, derive_seed

# Feature vectors are passed around as (indices, values) array pairs.
Features = tuple[np.ndarray, np.ndarray]

LossTrajectory = list[float]

MAX_PAIRS = 20_000_000


@dataclass(frozen=True)
class SentencePair:
    """Index pair into a training dataset with its binary similarity target."""

    a_idx: int
    b_idx: int
    target: int

    def __post_init__(self):
        if self.a_idx == self.b_idx:
            raise ValidationError("pair indices must differ")
        if self.target not in (0, 1):
            raise ValidationError(f"pair target must be 0 or 1, got {self.target}")


@dataclass(frozen=True)
class ContrastiveConfig:
    """Stage-1 hyper-parameters.

    learning_rate keeps the canonical fine-tuning value; the effective
    gradient step is learning_rate * lr_scale, with lr_scale sized for the
    linear desk-scale encoder (default gives an effective step of 0.5).
    """

    iterations: int = 5
    epochs: int = 1
    learning_rate: float = 1e-5
    lr_scale: float = 5e4
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.lr_scale <= 0:
            raise ValueError(f"lr_scale must be positive, got {self.lr_scale}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def effective_lr(self) -> float:
        return self.learning_rate * self.lr_scale


def generate_pairs(d: Dataset, iterations: int, seed: int) -> list[SentencePair]:
    """Sample 2 * iterations * N training pairs, seeded and reproducible.

    For each example, per round: one positive partner drawn uniformly from
    the rest of its class, one negative partner drawn uniformly from all
    other classes. Emission order is example-major, one (positive,
    negative) pair per round.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    n = len(d.examples)
    if 2 * iterations * n > MAX_PAIRS:
        raise ValueError(
            f"2 * iterations * N = {2 * iterations * n} exceeds the pair budget {MAX_PAIRS}"
        )
    by_class: dict[str, list[int]] = {}
    for i, ex in enumerate(d.examples):
        by_class.setdefault(ex.label, []).append(i)
    if len(by_class) < 2:
        raise ValidationError("pair generation needs >= 2 label classes with examples")
    for label, members in by_class.items():
        if len(members) < 2:
            raise ValidationError(
                f"class {label!r} has a single example; no positive partner exists"
            )
    complements = {
        label: [i for i in range(n) if d.examples[i].label != label] for label in by_class
    }
    position_in_class = {}
    for members in by_class.values():
        for pos, i in enumerate(members):
            position_in_class[i] = pos

    rng = SplitMix64(seed)
    pairs: list[SentencePair] = []
    for i in range(n):
        label = d.examples[i].label
        members = by_class[label]
        others = complements[label]
        pos_i = position_in_class[i]
        for _ in range(iterations):
            k = rng.bounded(len(members) - 1)
            if k >= pos_i:
                k += 1
            pairs.append(SentencePair(a_idx=i, b_idx=members[k], target=1))
            pairs.append(SentencePair(a_idx=i, b_idx=others[rng.bounded(len(others))], target=0))
    return pairs


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; defined as 0 when either vector has zero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"cosine arguments have different shapes: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def pair_loss(e_a: np.ndarray, e_b: np.ndarray, target: int) -> float:
    """Squared error between embedding cosine and the binary target."""
    if target not in (0, 1):
        raise ValueError(f"target must be 0 or 1, got {target}")
    return (target - cosine(e_a, e_b)) ** 2


def dataset_features(model: EncoderModel, d: Dataset) -> list[Features]:
    """Precomputed sparse feature arrays for every example in dataset order."""
    return [
        feature_arrays(featurize(model.tokenizer, model.hash_dim, ex.text)) for ex in d.examples
    ]


def _batch_terms(
    W: np.ndarray, features: Sequence[Features], pairs: Sequence[SentencePair]
) -> tuple[float, dict[int, np.ndarray]]:
    """Mean pair loss and per-example raw-projection gradients for one batch.

    Returns (mean_loss, du) where du[i] is d(mean loss)/d(u_i) for the raw
    projection u_i = W^T x_i. Pairs are accumulated sequentially in batch
    order; zero-feature examples embed to the zero vector, contribute the
    cosine-0 convention to the loss, and receive no gradient.
    """
    cache: dict[int, tuple[np.ndarray, float]] = {}

    def projected(i: int) -> tuple[np.ndarray, float]:
        hit = cache.get(i)
        if hit is None:
            idx, val = features[i]
            u = val @ W[idx] if len(idx) else np.zeros(W.shape[1])
            r = float(np.linalg.norm(u))
            e = u / r if r > 0.0 else u
            hit = (e, r)
            cache[i] = hit
        return hit

    inv_b = 1.0 / len(pairs)
    loss_sum = 0.0
    du: dict[int, np.ndarray] = {}
    for pair in pairs:
        e_a, r_a = projected(pair.a_idx)
        e_b, r_b = projected(pair.b_idx)
        if r_a == 0.0 or r_b == 0.0:
            loss_sum += float(pair.target) ** 2
            continue
        c = float(np.dot(e_a, e_b))
        diff = pair.target - c
        loss_sum += diff * diff
        coeff = -2.0 * diff * inv_b
        for i, e_self, e_other, r in ((pair.a_idx, e_a, e_b, r_a), (pair.b_idx, e_b, e_a, r_b)):
            grad_u = coeff * (e_other - c * e_self) / r
            acc = du.get(i)
            if acc is None:
                du[i] = grad_u
            else:
                acc += grad_u
    return loss_sum * inv_b, du


def pair_batch_loss(
    W: np.ndarray, features: Sequence[Features], pairs: Sequence[SentencePair]
) -> float:
    """Mean pair loss of a batch at the given W (forward pass only)."""
    loss, _ = _batch_terms(W, features, pairs)
    return loss


def pair_batch_gradient(
    W: np.ndarray, features: Sequence[Features], pairs: Sequence[SentencePair]
) -> tuple[float, np.ndarray]:
    """Mean pair loss and its full analytic gradient with respect to W."""
    loss, du = _batch_terms(W, features, pairs)
    grad = np.zeros_like(W)
    for i, g in du.items():
        idx, val = features[i]
        if len(idx):
            np.add.at(grad, idx, val[:, None] * g[None, :])
    return loss, grad


def train_contrastive(
    model: EncoderModel, d: Dataset, cfg: ContrastiveConfig
) -> tuple[EncoderModel, LossTrajectory]:
    """Fine-tune the encoder on sampled pairs; returns a new model and the
    per-epoch mean pair loss.

    Pairs are sampled once, then reshuffled every epoch. Mini-batches of
    cfg.batch_size (last partial batch kept) are processed sequentially;
    each update applies the full analytic gradient of the mean batch loss.
    The input model is left untouched.
    """
    pairs = generate_pairs(d, cfg.iterations, derive_seed(cfg.seed, "pairs"))
    features = dataset_features(model, d)
    W = model.W.copy()
    lr = cfg.effective_lr

    trajectory: LossTrajectory = []
    for epoch in range(cfg.epochs):
        epoch_rng = SplitMix64(derive_seed(cfg.seed, "epoch-shuffle", epoch))
        order = epoch_rng.shuffled(pairs)
        loss_sum = 0.0
        for batch_index, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = order[start : start + cfg.batch_size]
            loss, du = _batch_terms(W, features, batch)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss in epoch {epoch}, batch {batch_index}")
            rows = []
            deltas = []
            for i, g in du.items():
                if not np.isfinite(g).all():
                    raise TrainingError(
                        f"non-finite gradient in epoch {epoch}, batch {batch_index}"
                    )
                idx, val = features[i]
                if len(idx):
                    rows.append(idx)
                    deltas.append(val[:, None] * (-lr * g)[None, :])
            if rows:
                np.add.at(W, np.concatenate(rows), np.concatenate(deltas))
            loss_sum += loss * len(batch)
        trajectory.append(loss_sum / len(order))

    trained = EncoderModel(
        tokenizer=model.tokenizer,
        hash_dim=model.hash_dim,
        embed_dim=model.embed_dim,
        W=W,
        init_seed=model.init_seed,
    )
    return trained, trajectory
