"""Three-layer perceptron regressor (d : k : 1) and its quasi-Newton trainer.

Hidden activation is tanh, output is linear. Training minimizes the halved
mean squared error with full-batch L-BFGS (two-loop recursion, strong Wolfe
line search). Models carry the normalization parameters they were trained
with, so prediction accepts raw features and returns raw-unit targets.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset import Dataset, NormalizationParams, fit_normalization

MODEL_FORMAT_VERSION = 1


class NumericalError(Exception):
    """Non-finite values encountered during optimization."""


@dataclass(frozen=True)
class NetworkSpec:
    input_width: int
    hidden_width: int
    output_width: int = 1

    def __post_init__(self):
        if self.input_width < 1 or self.hidden_width < 1:
            raise ValueError("layer widths must be positive")
        if self.output_width != 1:
            raise ValueError("output width is fixed to 1 for regression")

    def __str__(self) -> str:
        return f"{self.input_width}:{self.hidden_width}:{self.output_width}"

    @property
    def n_params(self) -> int:
        d, k = self.input_width, self.hidden_width
        return k * d + k + k + 1


@dataclass(frozen=True)
class MlpModel:
    w1: np.ndarray  # (k, d)
    b1: np.ndarray  # (k,)
    w2: np.ndarray  # (k,)
    b2: float
    norm: NormalizationParams

    def __post_init__(self):
        for arr in (self.w1, self.b1, self.w2):
            if not np.all(np.isfinite(arr)):
                raise ValueError("model weights must be finite")
        if not np.isfinite(self.b2):
            raise ValueError("model weights must be finite")
        k, d = self.w1.shape
        if self.b1.shape != (k,) or self.w2.shape != (k,):
            raise ValueError("inconsistent layer shapes")

    @property
    def spec(self) -> NetworkSpec:
        k, d = self.w1.shape
        return NetworkSpec(input_width=d, hidden_width=k)


@dataclass(frozen=True)
class TrainConfig:
    lbfgs_memory: int = 10
    max_iter: int = 300
    grad_tol: float = 1e-6
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    init_scale_seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if not (0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0):
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.lbfgs_memory < 1 or self.max_iter < 1 or self.restarts < 1:
            raise ValueError("memory, max_iter, restarts must be positive")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")


@dataclass(frozen=True)
class TrainReport:
    final_loss: float
    iterations: int
    converged: bool
    elapsed_seconds: float


def init_model(spec: NetworkSpec, seed: int, norm: NormalizationParams | None = None) -> MlpModel:
    """Uniform weights in +/- sqrt(6 / (fan_in + fan_out)), zero biases."""
    rng = np.random.default_rng(seed)
    d, k = spec.input_width, spec.hidden_width
    lim1 = np.sqrt(6.0 / (d + k))
    lim2 = np.sqrt(6.0 / (k + 1))
    if norm is None:
        norm = NormalizationParams(
            center=np.zeros(d), scale=np.ones(d), target_center=0.0, target_scale=1.0
        )
    return MlpModel(
        w1=rng.uniform(-lim1, lim1, size=(k, d)),
        b1=np.zeros(k),
        w2=rng.uniform(-lim2, lim2, size=k),
        b2=0.0,
        norm=norm,
    )


def forward(m: MlpModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (m.w1.shape[1],):
        raise ValueError(f"expected input of length {m.w1.shape[1]}, got shape {x.shape}")
    return float(m.w2 @ np.tanh(m.w1 @ x + m.b1) + m.b2)


def forward_batch(m: MlpModel, xs: np.ndarray) -> np.ndarray:
    return np.tanh(xs @ m.w1.T + m.b1) @ m.w2 + m.b2


def flatten(m: MlpModel) -> np.ndarray:
    """Canonical flattening: w1 row-major, b1, w2, b2."""
    return np.concatenate([m.w1.ravel(), m.b1, m.w2, [m.b2]])


def unflatten(theta: np.ndarray, spec: NetworkSpec, norm: NormalizationParams) -> MlpModel:
    d, k = spec.input_width, spec.hidden_width
    if theta.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} parameters, got {theta.shape}")
    w1 = theta[: k * d].reshape(k, d)
    b1 = theta[k * d : k * d + k]
    w2 = theta[k * d + k : k * d + 2 * k]
    b2 = float(theta[-1])
    return MlpModel(w1=w1.copy(), b1=b1.copy(), w2=w2.copy(), b2=b2, norm=norm)


def loss_and_gradient(m: MlpModel, xs: np.ndarray, ys: np.ndarray) -> tuple[float, np.ndarray]:
    """Halved MSE and its exact analytic gradient in flattening order."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    n = xs.shape[0]
    if xs.shape[1] != m.w1.shape[1] or ys.shape[0] != n:
        raise ValueError("dimension mismatch between model and batch")
    h = np.tanh(xs @ m.w1.T + m.b1)  # (n, k)
    pred = h @ m.w2 + m.b2
    resid = pred - ys
    loss = float(0.5 * np.mean(resid**2))

    d_pred = resid / n  # (n,)
    g_w2 = h.T @ d_pred
    g_b2 = float(d_pred.sum())
    d_h = np.outer(d_pred, m.w2) * (1.0 - h**2)  # (n, k)
    g_w1 = d_h.T @ xs
    g_b1 = d_h.sum(axis=0)
    grad = np.concatenate([g_w1.ravel(), g_b1, g_w2, [g_b2]])
    return loss, grad


def _cubic_interp(a_lo, f_lo, g_lo, a_hi, f_hi) -> float:
    # quadratic interpolation fallback keeps the zoom step simple and safe
    denom = 2.0 * (f_hi - f_lo - g_lo * (a_hi - a_lo))
    if denom == 0.0:
        return 0.5 * (a_lo + a_hi)
    a = a_lo - g_lo * (a_hi - a_lo) ** 2 / denom
    lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
    span = hi - lo
    if not np.isfinite(a) or a < lo + 0.1 * span or a > hi - 0.1 * span:
        return 0.5 * (a_lo + a_hi)
    return float(a)


def _strong_wolfe(
    objective: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x: np.ndarray,
    f0: float,
    g0: np.ndarray,
    direction: np.ndarray,
    c1: float,
    c2: float,
    max_evals: int = 50,
) -> tuple[float, float, np.ndarray]:
    """Bracketing-and-zoom line search; returns (alpha, f, grad) at the
    accepted point satisfying the strong Wolfe conditions."""
    dphi0 = float(g0 @ direction)
    if dphi0 >= 0:
        raise NumericalError("line search requires a descent direction")

    def phi(alpha: float) -> tuple[float, np.ndarray, float]:
        f, g = objective(x + alpha * direction)
        return f, g, float(g @ direction)

    def zoom(a_lo, f_lo, d_lo, a_hi, f_hi, evals) -> tuple[float, float, np.ndarray]:
        for _ in range(max_evals - evals):
            a = _cubic_interp(a_lo, f_lo, d_lo, a_hi, f_hi)
            f, g, dphi = phi(a)
            if f > f0 + c1 * a * dphi0 or f >= f_lo:
                a_hi, f_hi = a, f
            else:
                if abs(dphi) <= -c2 * dphi0:
                    return a, f, g
                if dphi * (a_hi - a_lo) >= 0:
                    a_hi, f_hi = a_lo, f_lo
                a_lo, f_lo, d_lo = a, f, dphi
            if abs(a_hi - a_lo) < 1e-16:
                break
        f, g, _ = phi(a_lo)
        return a_lo, f, g

    a_prev, f_prev, d_prev = 0.0, f0, dphi0
    a = 1.0
    for i in range(max_evals):
        f, g, dphi = phi(a)
        if not np.isfinite(f):
            a = 0.5 * (a_prev + a)
            continue
        if f > f0 + c1 * a * dphi0 or (f >= f_prev and i > 0):
            return zoom(a_prev, f_prev, d_prev, a, f, i + 1)
        if abs(dphi) <= -c2 * dphi0:
            return a, f, g
        if dphi >= 0:
            return zoom(a, f, dphi, a_prev, f_prev, i + 1)
        a_prev, f_prev, d_prev = a, f, dphi
        a *= 2.0
    # exhausted the budget: fall back to the last finite trial point
    f, g = objective(x + a_prev * direction)
    return a_prev, f, g


def lbfgs_minimize(
    objective: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    cfg: TrainConfig,
) -> tuple[np.ndarray, TrainReport]:
    """Two-loop-recursion L-BFGS with strong Wolfe line search.

    Stops at ||grad||_inf < grad_tol or max_iter. Curvature pairs with
    s'y <= 1e-10 ||s|| ||y|| are discarded; the initial inverse-Hessian
    scale is s'y / y'y from the most recent kept pair.
    """
    start = time.perf_counter()
    x = np.array(x0, dtype=float)
    f, g = objective(x)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise NumericalError("non-finite objective or gradient at iteration 0")

    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    iterations = 0
    converged = bool(np.max(np.abs(g)) < cfg.grad_tol)

    while not converged and iterations < cfg.max_iter:
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if y_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
            q *= gamma
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        direction = -q
        if g @ direction >= 0:
            direction = -g  # restart on a non-descent direction

        alpha, f_new, g_new = _strong_wolfe(
            objective, x, f, g, direction, cfg.wolfe_c1, cfg.wolfe_c2
        )
        if not (np.isfinite(f_new) and np.all(np.isfinite(g_new))):
            raise NumericalError(f"non-finite objective or gradient at iteration {iterations + 1}")
        x_new = x + alpha * direction
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > cfg.lbfgs_memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x, f, g = x_new, f_new, g_new
        iterations += 1
        converged = bool(np.max(np.abs(g)) < cfg.grad_tol)

    report = TrainReport(
        final_loss=float(f),
        iterations=iterations,
        converged=converged,
        elapsed_seconds=time.perf_counter() - start,
    )
    return x, report


def train(
    spec: NetworkSpec,
    train_set: Dataset,
    cfg: TrainConfig,
    norm: NormalizationParams | None = None,
) -> tuple[MlpModel, TrainReport]:
    """Trains on the given raw dataset; normalization is fit here when not
    supplied. Runs cfg.restarts seeded initializations and keeps the model
    with the lowest final training loss (ties: lowest restart index)."""
    if norm is None:
        norm = fit_normalization(train_set)
    xs = (train_set.features - norm.center) / norm.scale
    ys = (train_set.targets - norm.target_center) / norm.target_scale

    start = time.perf_counter()
    best: tuple[float, int, np.ndarray, TrainReport] | None = None
    total_iters = 0
    for r in range(cfg.restarts):
        m0 = init_model(spec, seed=cfg.init_scale_seed + r, norm=norm)

        def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
            return loss_and_gradient(unflatten(theta, spec, norm), xs, ys)

        theta, rep = lbfgs_minimize(objective, flatten(m0), cfg)
        total_iters += rep.iterations
        if best is None or rep.final_loss < best[0]:
            best = (rep.final_loss, r, theta, rep)
    assert best is not None
    _, _, theta, rep = best
    elapsed = time.perf_counter() - start
    model = unflatten(theta, spec, norm)
    return model, TrainReport(
        final_loss=rep.final_loss,
        iterations=total_iters,
        converged=rep.converged,
        elapsed_seconds=elapsed,
    )


def predict(m: MlpModel, ds: Dataset) -> np.ndarray:
    """Predicts raw-unit targets from raw features."""
    if ds.d != m.w1.shape[1]:
        raise ValueError(f"dataset width {ds.d} does not match model input {m.w1.shape[1]}")
    xs = (ds.features - m.norm.center) / m.norm.scale
    z = forward_batch(m, xs)
    return z * m.norm.target_scale + m.norm.target_center


def save_model(m: MlpModel, path) -> None:
    """Versioned JSON document; floats at 17 significant digits so the
    save -> load -> predict round trip is bit-identical."""
    def f17(v: float) -> str:
        return f"{v:.17g}"

    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "spec": {"input_width": m.spec.input_width, "hidden_width": m.spec.hidden_width, "output_width": 1},
        "w1": [[f17(v) for v in row] for row in m.w1],
        "b1": [f17(v) for v in m.b1],
        "w2": [f17(v) for v in m.w2],
        "b2": f17(m.b2),
        "norm": {
            "center": [f17(v) for v in m.norm.center],
            "scale": [f17(v) for v in m.norm.scale],
            "target_center": f17(m.norm.target_center),
            "target_scale": f17(m.norm.target_scale),
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_model(path) -> MlpModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {doc.get('format_version')}")
    norm = NormalizationParams(
        center=np.array([float(v) for v in doc["norm"]["center"]]),
        scale=np.array([float(v) for v in doc["norm"]["scale"]]),
        target_center=float(doc["norm"]["target_center"]),
        target_scale=float(doc["norm"]["target_scale"]),
    )
    return MlpModel(
        w1=np.array([[float(v) for v in row] for row in doc["w1"]]),
        b1=np.array([float(v) for v in doc["b1"]]),
        w2=np.array([float(v) for v in doc["w2"]]),
        b2=float(doc["b2"]),
        norm=norm,
    )
