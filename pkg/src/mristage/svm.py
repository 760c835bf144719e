"""Binary soft-margin SVM with RBF kernel and per-sample cost caps.

The dual problem

    max W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t. 0 <= a_i <= C_i,  sum_i a_i y_i = 0

is solved by sequential minimal optimization with maximal-violating-pair
working-set selection. Kernel rows are computed on demand behind an LRU
cache so training never materializes the full kernel matrix.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Curvature floor for a working pair; keeps the step finite when the
# 2x2 kernel block is numerically singular.
_TAU = 1e-12

_ITERATION_CAP = 1_000_000


class SvmError(ValueError):
    """Invalid training input or model usage."""


@dataclass(frozen=True)
class KernelParams:
    """RBF kernel K(x, y) = exp(-gamma * ||x - y||^2)."""

    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise SvmError(f"gamma must be finite and > 0, got {self.gamma!r}")


@dataclass(frozen=True)
class TrainConfig:
    """Solver controls; base_cost is the scale multiplied into class weights."""

    base_cost: float = 1.0
    kkt_tolerance: float = 1e-3
    max_iterations: int | None = None  # None: 1000*n, capped
    kernel_cache_bytes: int = 64 * 2**20
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.base_cost) and self.base_cost > 0):
            raise SvmError(f"base_cost must be > 0, got {self.base_cost!r}")
        if not (math.isfinite(self.kkt_tolerance) and self.kkt_tolerance > 0):
            raise SvmError(f"kkt_tolerance must be > 0, got {self.kkt_tolerance!r}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise SvmError("max_iterations must be >= 1")
        if self.kernel_cache_bytes < 0:
            raise SvmError("kernel_cache_bytes must be >= 0")

    def iteration_limit(self, n: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return min(1000 * n, _ITERATION_CAP)


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2); 1.0 at zero distance."""
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise SvmError(f"kernel arguments must be equal-length vectors, got {xv.shape} vs {yv.shape}")
    if not (math.isfinite(gamma) and gamma > 0):
        raise SvmError(f"gamma must be finite and > 0, got {gamma!r}")
    diff = xv - yv
    return float(np.exp(-gamma * float(diff @ diff)))


class _KernelCache:
    """LRU cache of kernel matrix rows keyed by training index."""

    def __init__(self, X: np.ndarray, gamma: float, budget_bytes: int):
        self._X = X
        self._gamma = gamma
        self._sq = np.einsum("ij,ij->i", X, X)
        row_bytes = X.shape[0] * 8
        self._capacity = budget_bytes // row_bytes if row_bytes else 0
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        d2 = self._sq + self._sq[i] - 2.0 * (self._X @ self._X[i])
        np.maximum(d2, 0.0, out=d2)
        row = np.exp(-self._gamma * d2)
        if self._capacity > 0:
            self._rows[i] = row
            while len(self._rows) > self._capacity:
                self._rows.popitem(last=False)
        return row


@dataclass
class BinarySvmModel:
    """Trained binary classifier: support vectors, dual coefficients, bias.

    coefficients[k] = alpha_k * y_k for support vector k; cost_caps holds
    the per-sample box bound each support vector was trained under.
    """

    support_vectors: np.ndarray
    coefficients: np.ndarray
    cost_caps: np.ndarray
    bias: float
    kernel: KernelParams
    converged: bool
    kkt_violation: float
    n_train: int
    # full dual vector from training, kept for diagnostics; not serialized
    train_alphas: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    @property
    def n_support(self) -> int:
        return self.support_vectors.shape[0]

    def decision_value(self, x) -> float:
        """f(x) = sum_k coef_k K(sv_k, x) + b; sign(f) is the label, 0 -> +1."""
        xv = np.asarray(x, dtype=float)
        if xv.shape != (self.dim,):
            raise SvmError(f"input has shape {xv.shape}, model expects ({self.dim},)")
        return float(self.decision_values(xv[None, :])[0])

    def decision_values(self, X) -> np.ndarray:
        """Vectorized decision function over rows of X."""
        Xv = np.asarray(X, dtype=float)
        if Xv.ndim != 2 or Xv.shape[1] != self.dim:
            raise SvmError(f"input has shape {Xv.shape}, model expects (*, {self.dim})")
        if self.n_support == 0:
            return np.full(Xv.shape[0], self.bias)
        sv = self.support_vectors
        d2 = (
            np.einsum("ij,ij->i", Xv, Xv)[:, None]
            + np.einsum("ij,ij->i", sv, sv)[None, :]
            - 2.0 * (Xv @ sv.T)
        )
        np.maximum(d2, 0.0, out=d2)
        K = np.exp(-self.kernel.gamma * d2)
        return K @ self.coefficients + self.bias


def predict_sign(value: float) -> int:
    """Binary label from a decision value; exact zero resolves to +1."""
    return 1 if value >= 0.0 else -1


def smo_train(rows, y, per_sample_cost, kernel: KernelParams,
              cfg: TrainConfig | None = None) -> BinarySvmModel:
    """Maximize the weighted soft-margin dual by pairwise updates.

    Each step picks the maximal violating pair (i from the set that can
    grow the objective upward, j from the set that can move down), takes
    the analytic step along the equality-feasible direction, and clips it
    to the per-sample box. Stops when the worst KKT violation drops to
    cfg.kkt_tolerance or the iteration budget runs out (model is then
    flagged non-converged).
    """
    if cfg is None:
        cfg = TrainConfig()
    X = np.ascontiguousarray(rows, dtype=float)
    yv = np.asarray(y, dtype=float)
    C = np.asarray(per_sample_cost, dtype=float)
    n = X.shape[0]
    if X.ndim != 2 or n < 2:
        raise SvmError("training needs at least 2 rows")
    if yv.shape != (n,) or not np.all(np.isin(yv, (-1.0, 1.0))):
        raise SvmError("labels must be -1/+1, one per row")
    if np.all(yv > 0) or np.all(yv < 0):
        raise SvmError("single-class input: both labels must be present")
    if C.shape != (n,) or not np.all(np.isfinite(C)) or not np.all(C > 0):
        raise SvmError("per-sample costs must be positive and finite, one per row")

    alphas = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - e'a at a = 0
    cache = _KernelCache(X, kernel.gamma, cfg.kernel_cache_bytes)
    tol = cfg.kkt_tolerance
    limit = cfg.iteration_limit(n)

    converged = False
    violation = math.inf
    for _ in range(limit):
        crit = -yv * grad
        up = ((yv > 0) & (alphas < C)) | ((yv < 0) & (alphas > 0))
        low = ((yv > 0) & (alphas > 0)) | ((yv < 0) & (alphas < C))
        i = int(np.argmax(np.where(up, crit, -np.inf)))
        j = int(np.argmin(np.where(low, crit, np.inf)))
        violation = crit[i] - crit[j]
        if violation <= tol:
            converged = True
            break

        Ki = cache.row(i)
        Kj = cache.row(j)
        curvature = Ki[i] + Kj[j] - 2.0 * Ki[j]
        if curvature <= _TAU:
            curvature = _TAU
        room_i = (C[i] - alphas[i]) if yv[i] > 0 else alphas[i]
        room_j = alphas[j] if yv[j] > 0 else (C[j] - alphas[j])
        step = min(violation / curvature, room_i, room_j)
        if step <= 0.0:
            break  # numerically stuck; leave flagged non-converged

        alphas[i] += yv[i] * step
        alphas[j] -= yv[j] * step
        # keep box feasibility exact when the step was bound-limited
        if step == room_i:
            alphas[i] = C[i] if yv[i] > 0 else 0.0
        if step == room_j:
            alphas[j] = 0.0 if yv[j] > 0 else C[j]
        grad += step * yv * (Ki - Kj)

    np.clip(alphas, 0.0, C, out=alphas)

    crit = -yv * grad
    interior = (alphas > 0) & (alphas < C)
    if np.any(interior):
        bias = float(crit[interior].mean())
    else:
        up = ((yv > 0) & (alphas < C)) | ((yv < 0) & (alphas > 0))
        low = ((yv > 0) & (alphas > 0)) | ((yv < 0) & (alphas < C))
        hi = crit[up].max() if np.any(up) else 0.0
        lo = crit[low].min() if np.any(low) else 0.0
        bias = float((hi + lo) / 2.0)

    support = alphas > 0
    return BinarySvmModel(
        support_vectors=X[support].copy(),
        coefficients=(alphas * yv)[support].copy(),
        cost_caps=C[support].copy(),
        bias=bias,
        kernel=kernel,
        converged=converged,
        kkt_violation=float(violation),
        n_train=n,
        train_alphas=alphas,
    )


def dual_objective(alphas, rows, y, kernel: KernelParams) -> float:
    """W(a) = sum a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij (dense evaluation)."""
    a = np.asarray(alphas, dtype=float)
    X = np.asarray(rows, dtype=float)
    yv = np.asarray(y, dtype=float)
    n = X.shape[0]
    if a.shape != (n,) or yv.shape != (n,):
        raise SvmError("alphas, rows, and labels must agree in length")
    d2 = (
        np.einsum("ij,ij->i", X, X)[:, None]
        + np.einsum("ij,ij->i", X, X)[None, :]
        - 2.0 * (X @ X.T)
    )
    np.maximum(d2, 0.0, out=d2)
    K = np.exp(-kernel.gamma * d2)
    ay = a * yv
    return float(a.sum() - 0.5 * (ay @ K @ ay))


# --- serialization ---------------------------------------------------------

_MODEL_FORMAT = "binary-rbf-svm"
_MODEL_VERSION = 1


def save_model(model: BinarySvmModel, path) -> None:
    """One file: JSON header line, then float32 blocks (svs, coefs, caps)."""
    path = Path(path)
    header = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "gamma": model.kernel.gamma,
        "bias": model.bias,
        "n_support": model.n_support,
        "dim": model.dim,
        "n_train": model.n_train,
        "converged": model.converged,
        "kkt_violation": model.kkt_violation,
    }
    blob = (
        model.support_vectors.astype("<f4").tobytes(order="C")
        + model.coefficients.astype("<f4").tobytes()
        + model.cost_caps.astype("<f4").tobytes()
    )
    data = json.dumps(header).encode("utf-8") + b"\n" + blob
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> BinarySvmModel:
    path = Path(path)
    raw = path.read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise SvmError(f"model file {path}: missing header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SvmError(f"model file {path}: bad header ({exc})") from exc
    if header.get("format") != _MODEL_FORMAT or header.get("version") != _MODEL_VERSION:
        raise SvmError(f"model file {path}: unsupported format/version")
    s = int(header["n_support"])
    m = int(header["dim"])
    blob = raw[nl + 1:]
    expected = 4 * (s * m + 2 * s)
    if len(blob) != expected:
        raise SvmError(f"model file {path}: payload is {len(blob)} bytes, expected {expected}")
    svs = np.frombuffer(blob[: 4 * s * m], dtype="<f4").reshape(s, m).astype(float)
    coefs = np.frombuffer(blob[4 * s * m: 4 * s * (m + 1)], dtype="<f4").astype(float)
    caps = np.frombuffer(blob[4 * s * (m + 1):], dtype="<f4").astype(float)
    return BinarySvmModel(
        support_vectors=svs,
        coefficients=coefs,
        cost_caps=caps,
        bias=float(header["bias"]),
        kernel=KernelParams(float(header["gamma"])),
        converged=bool(header["converged"]),
        kkt_violation=float(header["kkt_violation"]),
        n_train=int(header["n_train"]),
    )
