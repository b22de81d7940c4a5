"""Contrastive adapter training on frozen embeddings: MLP forward, InfoNCE, SGD."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class TrainingError(RuntimeError):
    pass


@dataclass
class MlpAdapter:
    """One-hidden-layer tanh MLP with L2-normalized output."""

    W1: np.ndarray  # d_in x d_h
    b1: np.ndarray  # d_h
    W2: np.ndarray  # d_h x d_out
    b2: np.ndarray  # d_out

    @classmethod
    def init(cls, d_in: int, d_h: int, d_out: int, rng: np.random.Generator) -> "MlpAdapter":
        scale_1 = 1.0 / np.sqrt(d_in)
        scale_2 = 1.0 / np.sqrt(d_h)
        return cls(
            W1=rng.uniform(-scale_1, scale_1, size=(d_in, d_h)),
            b1=np.zeros(d_h),
            W2=rng.uniform(-scale_2, scale_2, size=(d_h, d_out)),
            b2=np.zeros(d_out),
        )

    def params(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def copy(self) -> "MlpAdapter":
        return MlpAdapter(*(p.copy() for p in self.params()))

    def save(self, path: str) -> None:
        obj = {
            "d_in": self.W1.shape[0],
            "d_h": self.W1.shape[1],
            "d_out": self.W2.shape[1],
            "W1": self.W1.tolist(),
            "b1": self.b1.tolist(),
            "W2": self.W2.tolist(),
            "b2": self.b2.tolist(),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh)

    @classmethod
    def load(cls, path: str) -> "MlpAdapter":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(
            W1=np.asarray(obj["W1"], dtype=np.float64),
            b1=np.asarray(obj["b1"], dtype=np.float64),
            W2=np.asarray(obj["W2"], dtype=np.float64),
            b2=np.asarray(obj["b2"], dtype=np.float64),
        )


def _forward_batch(adapter: MlpAdapter, X: np.ndarray):
    """Forward pass keeping intermediates for backprop."""
    A = X @ adapter.W1 + adapter.b1
    H = np.tanh(A)
    Z = H @ adapter.W2 + adapter.b2
    norms = np.linalg.norm(Z, axis=1, keepdims=True)
    if np.any(norms < 1e-12):
        raise TrainingError("zero-norm adapter output before normalization")
    Y = Z / norms
    return Y, (X, H, Z, norms)


def forward(adapter: MlpAdapter, x: np.ndarray) -> np.ndarray:
    """L2-normalize(W2ᵀ tanh(W1ᵀ x + b1) + b2)."""
    Y, _ = _forward_batch(adapter, x[None, :])
    return Y[0]


def infonce_loss(C: np.ndarray, M: np.ndarray, tau: float) -> float:
    """Symmetric-free InfoNCE over in-batch negatives, with log-sum-exp stabilization."""
    if C.shape != M.shape or C.shape[0] < 2:
        raise TrainingError("need matching matrices with n >= 2 rows")
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(M))):
        raise TrainingError("non-finite inputs")
    S = (C @ M.T) / tau
    m = S.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(S - m).sum(axis=1))
    return float(np.mean(lse - np.diag(S)))


def _loss_and_grad_on_outputs(C: np.ndarray, M: np.ndarray, tau: float):
    """InfoNCE value and its gradients with respect to the unit-norm outputs."""
    n = C.shape[0]
    S = (C @ M.T) / tau
    m = S.max(axis=1, keepdims=True)
    E = np.exp(S - m)
    P = E / E.sum(axis=1, keepdims=True)  # row-wise softmax
    loss = float(np.mean((m[:, 0] + np.log(E.sum(axis=1))) - np.diag(S)))
    dS = (P - np.eye(n)) / (n * tau)
    dC = dS @ M
    dM = dS.T @ C
    return loss, dC, dM


def _backprop(adapter: MlpAdapter, cache, dY: np.ndarray) -> list[np.ndarray]:
    X, H, Z, norms = cache
    # normalization backward: dZ = (dY - (dY.y) y) / ||z||
    Y = Z / norms
    dZ = (dY - (np.sum(dY * Y, axis=1, keepdims=True)) * Y) / norms
    dW2 = H.T @ dZ
    db2 = dZ.sum(axis=0)
    dH = dZ @ adapter.W2.T
    dA = dH * (1 - H**2)
    dW1 = X.T @ dA
    db1 = dA.sum(axis=0)
    return [dW1, db1, dW2, db2]


def gradients(
    text_adapter: MlpAdapter,
    music_adapter: MlpAdapter,
    X_text: np.ndarray,
    X_music: np.ndarray,
    tau: float,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Exact analytic gradients of the InfoNCE loss through both adapters."""
    if X_text.shape[0] != X_music.shape[0] or X_text.shape[0] < 2:
        raise TrainingError("batch must contain >= 2 aligned pairs")
    C, cache_c = _forward_batch(text_adapter, X_text)
    M, cache_m = _forward_batch(music_adapter, X_music)
    loss, dC, dM = _loss_and_grad_on_outputs(C, M, tau)
    return loss, _backprop(text_adapter, cache_c, dC), _backprop(music_adapter, cache_m, dM)


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    tau: float = 0.07
    batch_size: int = 8
    epochs: int = 20
    seed: int = 0
    d_hidden: int = 0  # 0 -> same as input dim
    d_out: int = 0  # 0 -> same as input dim
    shared_adapter: bool = False

    def __post_init__(self):
        if self.learning_rate < 0 or self.tau <= 0 or self.batch_size < 2 or self.epochs < 1:
            raise TrainingError("invalid training configuration")


@dataclass
class TrainResult:
    text_adapter: MlpAdapter
    music_adapter: MlpAdapter
    epoch_losses: list[float] = field(default_factory=list)


def train(pairs: list[tuple[np.ndarray, np.ndarray]], config: TrainConfig) -> TrainResult:
    """Plain SGD over seeded shuffled mini-batches; deterministic given seed."""
    if len(pairs) < config.batch_size:
        raise TrainingError("need at least batch_size pairs")
    X_text = np.stack([p[0] for p in pairs]).astype(np.float64)
    X_music = np.stack([p[1] for p in pairs]).astype(np.float64)
    d_in = X_text.shape[1]
    d_h = config.d_hidden or d_in
    d_out = config.d_out or d_in
    rng = np.random.default_rng(config.seed)
    text_adapter = MlpAdapter.init(d_in, d_h, d_out, rng)
    music_adapter = text_adapter if config.shared_adapter else MlpAdapter.init(
        X_music.shape[1], d_h, d_out, rng
    )
    n = len(pairs)
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n - config.batch_size + 1, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, g_text, g_music = gradients(
                text_adapter, music_adapter, X_text[idx], X_music[idx], config.tau
            )
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            if music_adapter is text_adapter:
                g_text = [gt + gm for gt, gm in zip(g_text, g_music)]
                g_music = None
            for p, g in zip(text_adapter.params(), g_text):
                p -= config.learning_rate * g
            if g_music is not None:
                for p, g in zip(music_adapter.params(), g_music):
                    p -= config.learning_rate * g
            batch_losses.append(loss)
        losses.append(float(np.mean(batch_losses)))
    return TrainResult(text_adapter=text_adapter, music_adapter=music_adapter, epoch_losses=losses)
