"""Dense float64 matrix arithmetic, activations, losses, optimizers, gradient check.

Everything operates on plain numpy float64 arrays. ``matrix`` is the validating
constructor: values entering the numeric core must be finite.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyMaskError, ShapeError

BCE_CLAMP = 1e-12
ADAM_EPS = 1e-8


def matrix(values, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Build a validated 2-D float64 array (row-major).

    Rejects non-finite entries and, when rows/cols are given, wrong shapes.
    """
    arr = np.array(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got ndim={arr.ndim}")
    if rows is not None and arr.shape != (rows, cols):
        raise ShapeError(f"expected shape {(rows, cols)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite (NaN/Inf rejected)")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


ACTIVATIONS = ("relu", "sigmoid", "linear")


def activation(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        return _sigmoid(x)
    if kind == "linear":
        return np.array(x, dtype=np.float64)
    raise ValueError(f"unknown activation kind {kind!r}")


def activation_grad(kind: str, x: np.ndarray) -> np.ndarray:
    """Derivative evaluated at the pre-activation. relu'(0) is defined as 0."""
    if kind == "relu":
        return (x > 0).astype(np.float64)
    if kind == "sigmoid":
        s = _sigmoid(x)
        return s * (1.0 - s)
    if kind == "linear":
        return np.ones_like(x)
    raise ValueError(f"unknown activation kind {kind!r}")


def loss(
    kind: str,
    prediction: np.ndarray,
    target: np.ndarray,
    mask: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Return (scalar loss, gradient wrt prediction).

    bce: predictions clamped to [eps, 1-eps] before the log, mean over cells.
    masked-mse: mean squared error over mask-selected cells only; the gradient
    is zero elsewhere.
    """
    if prediction.shape != target.shape:
        raise ShapeError(f"prediction {prediction.shape} vs target {target.shape}")
    if kind == "bce":
        n = prediction.size
        p = np.clip(prediction, BCE_CLAMP, 1.0 - BCE_CLAMP)
        value = -np.sum(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)) / n
        inside = (prediction > BCE_CLAMP) & (prediction < 1.0 - BCE_CLAMP)
        grad = np.where(inside, (p - target) / (p * (1.0 - p)), 0.0) / n
        return float(value), grad
    if kind == "masked-mse":
        if mask is None:
            raise ValueError("masked-mse requires a mask")
        if mask.shape != prediction.shape:
            raise ShapeError(f"mask {mask.shape} vs prediction {prediction.shape}")
        nsel = float(mask.sum())
        if nsel == 0:
            raise EmptyMaskError("masked-mse over an all-zero mask")
        diff = (prediction - target) * mask
        value = float(np.sum(diff * diff) / nsel)
        grad = 2.0 * diff / nsel
        return value, grad
    raise ValueError(f"unknown loss kind {kind!r}")


class SgdMomentum:
    """v <- mu*v + g; p <- p - lr*v. lr=0 leaves parameters bit-exact."""

    kind = "sgd-momentum"

    def __init__(self, learning_rate: float, momentum: float = 0.0):
        if learning_rate < 0:
            raise ValueError("learning rate must be non-negative")
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        if self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in params]
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            if p.shape != g.shape:
                raise ShapeError(f"param {p.shape} vs grad {g.shape}")
            self.velocity[i] = self.momentum * self.velocity[i] + g
            out.append(p - self.learning_rate * self.velocity[i])
        return out


class Adam:
    """Bias-corrected first/second moment update, eps=1e-8."""

    kind = "adam"

    def __init__(
        self,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = ADAM_EPS,
    ):
        if learning_rate < 0:
            raise ValueError("learning rate must be non-negative")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            if p.shape != g.shape:
                raise ShapeError(f"param {p.shape} vs grad {g.shape}")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1 ** self.t)
            v_hat = self.v[i] / (1.0 - self.beta2 ** self.t)
            out.append(p - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


def make_optimizer(kind: str, learning_rate: float, momentum: float = 0.9,
                   betas: tuple[float, float] = (0.9, 0.999)):
    if kind in ("sgd", "sgd-momentum"):
        return SgdMomentum(learning_rate, momentum)
    if kind == "adam":
        return Adam(learning_rate, betas[0], betas[1])
    raise ValueError(f"unknown optimizer kind {kind!r}")


def gradcheck(
    f,
    params: list[np.ndarray],
    analytic_grads: list[np.ndarray],
    epsilon: float = 1e-5,
) -> float:
    """Max relative error between analytic gradients and central differences.

    ``f(params) -> float`` is re-evaluated with each coordinate perturbed by
    +/- epsilon. Relative error is |a-n| / max(|a|, |n|, 1e-8).
    """
    if not (1e-7 <= epsilon <= 1e-3):
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    max_err = 0.0
    for p, g in zip(params, analytic_grads):
        if p.shape != g.shape:
            raise ShapeError(f"param {p.shape} vs grad {g.shape}")
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + epsilon
            f_plus = f(params)
            p[idx] = orig - epsilon
            f_minus = f(params)
            p[idx] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise FloatingPointError("non-finite function value during gradcheck")
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            a = float(g[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            max_err = max(max_err, err)
            it.iternext()
    return max_err
