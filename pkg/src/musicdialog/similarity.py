"""Implicit-feedback weighted ALS and top-k item similarity annotation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class SimilarityError(ValueError):
    pass


@dataclass
class InteractionMatrix:
    n_users: int
    n_items: int
    entries: list[tuple[int, int, float]] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for u, i, c in self.entries:
            if not (0 <= u < self.n_users and 0 <= i < self.n_items):
                raise SimilarityError(f"entry ({u},{i}) out of range")
            if c <= 0:
                raise SimilarityError(f"non-positive count at ({u},{i})")
            if (u, i) in seen:
                raise SimilarityError(f"duplicate entry ({u},{i})")
            seen.add((u, i))

    def by_user(self) -> list[list[tuple[int, float]]]:
        rows: list[list[tuple[int, float]]] = [[] for _ in range(self.n_users)]
        for u, i, c in self.entries:
            rows[u].append((i, c))
        return rows

    def by_item(self) -> list[list[tuple[int, float]]]:
        cols: list[list[tuple[int, float]]] = [[] for _ in range(self.n_items)]
        for u, i, c in self.entries:
            cols[i].append((u, c))
        return cols


@dataclass
class FactorModel:
    U: np.ndarray
    V: np.ndarray
    reg: float
    alpha: float

    @property
    def d(self) -> int:
        return self.U.shape[1]


def weighted_loss(model: FactorModel, m: InteractionMatrix) -> float:
    """Exact confidence-weighted objective over all user-item cells (dense)."""
    if model.U.shape[0] != m.n_users or model.V.shape[0] != m.n_items:
        raise SimilarityError("model/matrix dimension mismatch")
    P = np.zeros((m.n_users, m.n_items))
    C = np.ones((m.n_users, m.n_items))
    for u, i, c in m.entries:
        P[u, i] = 1.0
        C[u, i] = 1.0 + model.alpha * c
    R = P - model.U @ model.V.T
    loss = float(np.sum(C * R * R))
    loss += model.reg * (float(np.sum(model.U**2)) + float(np.sum(model.V**2)))
    return loss


def _half_sweep(X: np.ndarray, Y: np.ndarray, rows, reg: float, alpha: float) -> None:
    """Solve the exact ridge system for each row of X given fixed Y."""
    d = Y.shape[1]
    YtY = Y.T @ Y
    regI = reg * np.eye(d)
    for r, obs in enumerate(rows):
        A = YtY + regI
        b = np.zeros(d)
        for j, count in obs:
            cw = alpha * count  # c_uj - 1
            yj = Y[j]
            A = A + cw * np.outer(yj, yj)
            b += (1.0 + cw) * yj
        X[r] = np.linalg.solve(A, b)


def _balance_scales(U: np.ndarray, V: np.ndarray) -> None:
    """Rescale each latent dimension so column norms match across U and V.

    Leaves U @ V.T unchanged and never increases the regularization term,
    removing the scale indeterminacy that tiny regularization cannot fix.
    """
    nu = np.linalg.norm(U, axis=0)
    nv = np.linalg.norm(V, axis=0)
    mask = (nu > 0) & (nv > 0)
    s = np.ones_like(nu)
    s[mask] = np.sqrt(nv[mask] / nu[mask])
    U *= s
    V /= s


def als_fit(
    m: InteractionMatrix,
    d: int = 32,
    reg: float = 0.1,
    alpha: float = 40.0,
    iters: int = 15,
    seed: int = 0,
    loss_trace: list[float] | None = None,
) -> FactorModel:
    """Alternating least squares for implicit feedback (preference/confidence form).

    Deterministic given seed; each sweep solves exact closed-form ridge systems
    for the user matrix then the item matrix.
    """
    if iters < 1 or d < 1 or reg < 0 or alpha <= 0:
        raise SimilarityError("invalid hyperparameters")
    rng = np.random.default_rng(seed)
    U = rng.uniform(-0.01, 0.01, size=(m.n_users, d))
    V = rng.uniform(-0.01, 0.01, size=(m.n_items, d))
    model = FactorModel(U=U, V=V, reg=reg, alpha=alpha)
    users = m.by_user()
    items = m.by_item()
    for it in range(iters):
        _half_sweep(U, V, users, reg, alpha)
        _half_sweep(V, U, items, reg, alpha)
        _balance_scales(U, V)
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
            raise SimilarityError(f"non-finite factors at iteration {it}")
        if loss_trace is not None:
            loss_trace.append(weighted_loss(model, m))
    return model


def topk_similar_items(model: FactorModel, item: int, k: int) -> list[tuple[int, float]]:
    """k highest-cosine items excluding the query; ties broken by ascending index."""
    if not (0 <= item < model.V.shape[0]):
        raise SimilarityError(f"item index {item} out of range")
    if k < 1:
        raise SimilarityError("k must be >= 1")
    norms = np.linalg.norm(model.V, axis=1)
    if norms[item] == 0:
        raise SimilarityError(f"item {item} has a zero-norm vector")
    safe = np.where(norms > 0, norms, 1.0)
    unit = model.V / safe[:, None]
    scores = unit @ unit[item]
    scores[norms == 0] = -np.inf
    order = sorted(
        (j for j in range(model.V.shape[0]) if j != item),
        key=lambda j: (-scores[j], j),
    )
    return [(j, float(scores[j])) for j in order[:k]]


def load_interactions(path: str) -> tuple[InteractionMatrix, list[str], list[str]]:
    """Read interaction JSONL ({"user","item","count"}) into an indexed matrix.

    Repeated (user, item) pairs accumulate their counts.
    """
    users: dict[str, int] = {}
    items: dict[str, int] = {}
    counts: dict[tuple[int, int], float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            u = users.setdefault(obj["user"], len(users))
            i = items.setdefault(obj["item"], len(items))
            c = float(obj["count"])
            if c <= 0:
                raise SimilarityError(f"non-positive count for {obj['user']}/{obj['item']}")
            counts[(u, i)] = counts.get((u, i), 0.0) + c
    matrix = InteractionMatrix(
        n_users=len(users),
        n_items=len(items),
        entries=[(u, i, c) for (u, i), c in counts.items()],
    )
    user_ids = sorted(users, key=users.get)
    item_ids = sorted(items, key=items.get)
    return matrix, user_ids, item_ids


def write_neighbors(model: FactorModel, item_ids: list[str], k: int, path: str) -> int:
    """Emit per-item top-k neighbor JSONL records."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for idx, tid in enumerate(item_ids):
            neighbors = topk_similar_items(model, idx, k)
            fh.write(
                json.dumps(
                    {
                        "track_id": tid,
                        "neighbors": [
                            {"track_id": item_ids[j], "score": round(s, 8)}
                            for j, s in neighbors
                        ],
                    }
                )
                + "\n"
            )
            n += 1
    return n
