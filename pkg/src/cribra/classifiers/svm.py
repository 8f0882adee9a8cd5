"""Soft-margin RBF SVM trained with Platt's sequential minimal optimization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SingleClassInput
from .standardize import Standardizer, check_rows


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a - b||^2) for every row pair."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


@dataclass(frozen=True)
class SvmConfig:
    C: float = 100.0
    gamma: float = 0.1
    tol: float = 1e-3
    max_passes: int = 50
    seed: int = 0
    eps: float = 1e-8


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray  # standardized coordinates
    alphas: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    c: float
    standardizer: Standardizer
    config: SvmConfig = field(default_factory=SvmConfig)
    info: dict = field(default_factory=dict)

    @property
    def width(self) -> int:
        return self.standardizer.width

    def decision_function(self, X) -> np.ndarray:
        Z = self.standardizer.transform(X)
        if len(self.alphas) == 0:
            return np.full(len(Z), self.bias)
        return rbf_kernel(Z, self.support_vectors, self.gamma) @ self.alphas + self.bias

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)


def predict_svm(model: SvmModel, x) -> dict:
    """Label (+1/-1, a zero score counts as +1) and raw score for one row."""
    score = float(model.decision_function(np.asarray(x, dtype=np.float64)[None, :] if np.ndim(x) == 1 else x)[0])
    return {"label": 1 if score >= 0 else -1, "score": score}


def dual_objective(alpha, y, K) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


class _Smo:
    def __init__(self, K, y, cfg: SvmConfig):
        self.K = K
        self.y = y
        self.C = cfg.C
        self.tol = cfg.tol
        self.eps = cfg.eps
        self.rng = np.random.default_rng(cfg.seed)
        n = len(y)
        self.alpha = np.zeros(n)
        self.b = 0.0
        # error cache E_i = f(x_i) - y_i, kept exact for every point
        self.E = -y.astype(np.float64)

    def _snap(self, a: float) -> float:
        if a < 1e-12 * self.C:
            return 0.0
        if a > self.C * (1.0 - 1e-12):
            return self.C
        return a

    def take_step(self, i1, i2) -> bool:
        if i1 == i2:
            return False
        K, y, C = self.K, self.y, self.C
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = y[i1], y[i2]
        E1, E2 = self.E[i1], self.E[i2]
        s = y1 * y2
        if y1 != y2:
            L, H = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            L, H = max(0.0, a2 + a1 - C), min(C, a2 + a1)
        if H - L < self.eps:
            return False
        k11, k12, k22 = K[i1, i1], K[i1, i2], K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2_new = min(max(a2 + y2 * (E1 - E2) / eta, L), H)
        else:
            f1 = y1 * (E1 - self.b) - a1 * k11 - s * a2 * k12
            f2 = y2 * (E2 - self.b) - s * a1 * k12 - a2 * k22
            L1 = a1 + s * (a2 - L)
            H1 = a1 + s * (a2 - H)
            l_obj = L1 * f1 + L * f2 + 0.5 * L1 * L1 * k11 + 0.5 * L * L * k22 + s * L * L1 * k12
            h_obj = H1 * f1 + H * f2 + 0.5 * H1 * H1 * k11 + 0.5 * H * H * k22 + s * H * H1 * k12
            if l_obj < h_obj - self.eps:
                a2_new = L
            elif l_obj > h_obj + self.eps:
                a2_new = H
            else:
                a2_new = a2
        if abs(a2_new - a2) < self.eps * (a2_new + a2 + self.eps):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        if a1_new < 0:
            a2_new += s * a1_new
            a1_new = 0.0
        elif a1_new > C:
            a2_new += s * (a1_new - C)
            a1_new = C
        # snap round-off onto the box so bound membership is exact
        a1_new, a2_new = self._snap(a1_new), self._snap(a2_new)
        d1 = y1 * (a1_new - a1)
        d2 = y2 * (a2_new - a2)
        b1 = self.b - E1 - d1 * k11 - d2 * k12
        b2 = self.b - E2 - d1 * k12 - d2 * k22
        if 0 < a1_new < C:
            b_new = b1
        elif 0 < a2_new < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        self.E += d1 * K[:, i1] + d2 * K[:, i2] + (b_new - self.b)
        self.b = b_new
        self.alpha[i1] = a1_new
        self.alpha[i2] = a2_new
        return True

    def examine(self, i2) -> int:
        y2, a2, E2 = self.y[i2], self.alpha[i2], self.E[i2]
        r2 = E2 * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return 0
        n = len(self.y)
        nonbound = np.flatnonzero((self.alpha > 0) & (self.alpha < self.C))
        if len(nonbound) > 1:
            i1 = int(nonbound[np.argmax(np.abs(self.E[nonbound] - E2))])
            if self.take_step(i1, i2):
                return 1
        # seeded random starting points for the fallback sweeps
        if len(nonbound):
            start = int(self.rng.integers(len(nonbound)))
            for i1 in np.roll(nonbound, -start):
                if self.take_step(int(i1), i2):
                    return 1
        start = int(self.rng.integers(n))
        for i1 in np.roll(np.arange(n), -start):
            if self.take_step(int(i1), i2):
                return 1
        return 0

    def _bound_bias(self) -> None:
        """With no free alphas b is only bracketed; move it to the middle of the KKT interval."""
        free = (self.alpha > 0) & (self.alpha < self.C)
        if free.any():
            return
        v = self.y - (self.E - self.b + self.y)  # y_i - f_i(without b)
        up = self.y > 0
        at_c = self.alpha >= self.C
        lower = v[(~at_c & up) | (at_c & ~up)]
        upper = v[(~at_c & ~up) | (at_c & up)]
        if len(lower) and len(upper):
            b_new = 0.5 * (lower.max() + upper.min())
        elif len(lower):
            b_new = lower.max()
        else:
            b_new = upper.min()
        self.E += b_new - self.b
        self.b = float(b_new)

    def run(self, max_passes: int) -> int:
        n = len(self.y)
        changed, examine_all, passes = 0, True, 0
        while (changed > 0 or examine_all) and passes < max_passes:
            changed = 0
            if examine_all:
                self._bound_bias()
                for i in range(n):
                    changed += self.examine(i)
            else:
                for i in np.flatnonzero((self.alpha > 0) & (self.alpha < self.C)):
                    changed += self.examine(int(i))
            if examine_all:
                examine_all = False
                passes += 1
            elif changed == 0:
                examine_all = True
        return passes

    def kkt_violation(self) -> float:
        """Largest violation of the KKT conditions, in units of y*E."""
        r = self.E * self.y
        viol = np.zeros_like(r)
        lo = self.alpha <= 0
        hi = self.alpha >= self.C
        mid = ~lo & ~hi
        viol[lo] = np.maximum(0.0, -r[lo])
        viol[hi] = np.maximum(0.0, r[hi])
        viol[mid] = np.abs(r[mid])
        return float(viol.max()) if len(viol) else 0.0


def _as_sign_labels(y) -> np.ndarray:
    y = np.asarray(y)
    out = np.where(y.astype(np.float64) > 0, 1.0, -1.0)
    return out


def train_svm(X, y, config: SvmConfig = SvmConfig()) -> SvmModel:
    """Fit a standardizer on ``X`` and solve the SVM dual by SMO.

    ``y`` holds +1 (cribriform) / -1 labels; any positive value counts as +1.
    """
    X = check_rows(X)
    y = _as_sign_labels(y)
    if len(y) != len(X):
        raise ValueError("X and y lengths differ")
    if not ((y > 0).any() and (y < 0).any()):
        raise SingleClassInput("SVM training needs examples of both classes")
    std = Standardizer.fit(X)
    Z = std.transform(X)
    K = rbf_kernel(Z, Z, config.gamma)
    smo = _Smo(K, y, config)
    passes = smo.run(config.max_passes)
    sv = smo.alpha > 0
    info = {
        "passes": passes,
        "n_support": int(sv.sum()),
        "dual_objective": dual_objective(smo.alpha, y, K),
        "kkt_violation": smo.kkt_violation(),
        "alpha_full": smo.alpha.copy(),
    }
    return SvmModel(Z[sv], (smo.alpha * y)[sv], float(smo.b), config.gamma, config.C, std, config, info)
