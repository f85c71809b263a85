"""Standardized training pipeline: normalization, splitting, minibatch loop.

The routine is deliberately plain: global min-max normalization fit on the
training split, a seeded 50/25/25 column split, Adam (or SGD) on the mean
squared reconstruction loss, full-batch validation each epoch, and early
stopping that restores the best-validation parameters.  Constrained
classes train through their unconstrained parametrizations, so the
constraint residual recorded in the history stays at roundoff level.

Everything is deterministic given the config seed; wall-clock time only
appears as a reporting column.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .architecture import ParamVector, SymmetricAutoencoder, assemble, loss_on_batch
from .autodiff import gradient
from .linalg import NumericalError, require_matrix

__all__ = [
    "TrainConfig",
    "EpochRecord",
    "TrainHistory",
    "EvalMetrics",
    "minmax_normalize",
    "apply_minmax",
    "undo_minmax",
    "split",
    "train",
    "evaluate",
    "adam_step",
    "sgd_step",
    "AdamState",
]

HISTORY_HEADER = "epoch,train_loss,val_loss,wall_time_s,constraint_residual"


@dataclass
class TrainConfig:
    epochs: int = 1500
    patience: int = 500
    learning_rate: float = 1e-3
    batch_size: int = 8
    seed: int = 0
    optimizer: str = "adam"
    log_every: int = 1

    def __post_init__(self):
        if min(self.epochs, self.patience, self.batch_size, self.log_every) <= 0:
            raise ValueError("epochs, patience, batch_size and log_every must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.patience > self.epochs:
            raise ValueError("patience cannot exceed the epoch budget")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    wall_time_s: float
    constraint_residual: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    epochs_run: int = 0

    def to_csv(self, path):
        lines = [HISTORY_HEADER]
        for r in self.records:
            lines.append(
                f"{r.epoch},{r.train_loss:.10g},{r.val_loss:.10g},"
                f"{r.wall_time_s:.10g},{r.constraint_residual:.10g}"
            )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class EvalMetrics:
    mse: float
    mre: float


# -- data preparation -------------------------------------------------------


def minmax_normalize(U: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Scale all entries into [0, 1] by the global min and max.

    Constant data cannot be scaled; it is returned unchanged with the
    neutral range ``(0, 1)`` and a warning.
    """
    U = require_matrix(U, "snapshot matrix")
    lo = float(U.min())
    hi = float(U.max())
    if hi == lo:
        warnings.warn("constant data: min-max normalization left input unchanged")
        return U.copy(), 0.0, 1.0
    return (U - lo) / (hi - lo), lo, hi


def apply_minmax(U: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Apply a previously fitted normalization (values may leave [0, 1])."""
    return (np.asarray(U, dtype=np.float64) - lo) / (hi - lo)


def undo_minmax(U: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return np.asarray(U, dtype=np.float64) * (hi - lo) + lo


def split(U: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded disjoint column split: 50% train, 25% validation, rest test."""
    U = require_matrix(U, "snapshot matrix")
    S = U.shape[1]
    if S < 4:
        raise ValueError(f"need at least 4 snapshots to split, got {S}")
    perm = np.random.default_rng(seed).permutation(S)
    n_train = S // 2
    n_val = S // 4
    return (
        U[:, perm[:n_train]].copy(),
        U[:, perm[n_train : n_train + n_val]].copy(),
        U[:, perm[n_train + n_val :]].copy(),
    )


# -- optimizers --------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per leaf."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def like(cls, leaves: list[np.ndarray]) -> "AdamState":
        return cls(
            m=[np.zeros_like(x) for x in leaves],
            v=[np.zeros_like(x) for x in leaves],
        )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> list[np.ndarray]:
    """One Adam update with bias correction; mutates ``state``, returns new params."""
    state.t += 1
    corr1 = 1.0 - beta1**state.t
    corr2 = 1.0 - beta2**state.t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * (g * g)
        m_hat = state.m[i] / corr1
        v_hat = state.v[i] / corr2
        out.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
    return out


def sgd_step(params, grads, lr: float) -> list[np.ndarray]:
    return [p - lr * g for p, g in zip(params, grads)]


# -- training loop ------------------------------------------------------------


def train(
    theta0: ParamVector,
    train_U: np.ndarray,
    val_U: np.ndarray,
    config: TrainConfig,
) -> tuple[ParamVector, TrainHistory]:
    """Minibatch optimization with early stopping on the validation loss.

    Shuffles the training columns each epoch with the config seed, takes one
    optimizer step per minibatch (the last short batch is kept), evaluates
    the validation loss full-batch at each epoch end, and stops after
    ``patience`` epochs without improvement.  Returns the parameters of the
    best validation epoch together with the logged history.
    """
    train_U = require_matrix(train_U, "training data")
    val_U = require_matrix(val_U, "validation data")
    rng = np.random.default_rng(config.seed)
    S = train_U.shape[1]
    B = config.batch_size

    theta = theta0.copy()
    leaves = theta.leaves()
    adam = AdamState.like(leaves) if config.optimizer == "adam" else None

    def program(leaf_vars, batch):
        return loss_on_batch(theta.class_tag, theta.act, theta.with_leaves(leaf_vars), batch)

    history = TrainHistory()
    best_val = np.inf
    best_leaves = [x.copy() for x in leaves]
    best_epoch = 0
    stall = 0
    t_start = time.perf_counter()

    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(S)
        sq_sum = 0.0
        for start in range(0, S, B):
            batch = train_U[:, perm[start : start + B]]
            loss, grads = gradient(program, leaves, batch)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite training loss at epoch {epoch}, "
                    f"batch {start // B + 1}"
                )
            if config.optimizer == "adam":
                leaves = adam_step(leaves, grads, adam, config.learning_rate)
            else:
                leaves = sgd_step(leaves, grads, config.learning_rate)
            sq_sum += loss * batch.shape[1]
        train_loss = sq_sum / S

        theta.layers = theta.with_leaves(leaves)
        psi = assemble(theta)
        val_resid = val_U - psi.reconstruct(val_U)
        val_loss = float(np.sum(val_resid * val_resid)) / val_U.shape[1]
        if not np.isfinite(val_loss):
            raise NumericalError(f"non-finite validation loss at epoch {epoch}")

        if epoch % config.log_every == 0 or epoch == config.epochs:
            history.records.append(
                EpochRecord(
                    epoch=epoch,
                    train_loss=train_loss,
                    val_loss=val_loss,
                    wall_time_s=time.perf_counter() - t_start,
                    constraint_residual=psi.constraint_residual(),
                )
            )

        if val_loss < best_val:
            best_val = val_loss
            best_leaves = [x.copy() for x in leaves]
            best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                break

    history.best_epoch = best_epoch
    history.epochs_run = epoch
    theta.layers = theta.with_leaves(best_leaves)
    return theta, history


def evaluate(psi: SymmetricAutoencoder, U_test: np.ndarray) -> EvalMetrics:
    """Mean squared error and mean relative error over test columns.

    Zero-norm test columns cannot contribute a relative error; they are
    skipped with a warning.
    """
    U_test = require_matrix(U_test, "test data")
    recon = psi.reconstruct(U_test)
    diff = U_test - recon
    sq = np.sum(diff * diff, axis=0)
    mse = float(np.mean(sq))
    norms = np.sqrt(np.sum(U_test * U_test, axis=0))
    ok = norms > 0.0
    if not np.all(ok):
        warnings.warn(f"skipping {int(np.sum(~ok))} zero-norm test sample(s) in MRE")
    mre = float(np.mean(np.sqrt(sq[ok]) / norms[ok])) if np.any(ok) else 0.0
    return EvalMetrics(mse=mse, mre=mre)
