"""Soft-margin RBF support vector machine trained with SMO, one-vs-one for K classes.

Defaults follow the usual R/libsvm conventions: features z-scored with
the training mean and sample standard deviation, C = 1, and
gamma = 0.0018 (close to 1/531, i.e. 1/num_features for LBP vectors).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import LabeledDataset
from .errors import InvalidInputError, NumericError, ParseError

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.0018
DEFAULT_COST = 1.0
DEFAULT_TOL = 1e-3
GRAM_CACHE_ROWS = 4096
MODEL_FORMAT = "armload-svm"
MODEL_VERSION = 1
_TAU = 1e-12


def rbf_kernel(a, b, gamma: float) -> float:
    """exp(-gamma * ||a - b||^2)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InvalidInputError(f"kernel arguments differ in dimension: {a.shape} vs {b.shape}")
    if not gamma > 0:
        raise InvalidInputError("gamma must be positive")
    d = a - b
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_matrix(A, B, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(np.atleast_2d(A), np.atleast_2d(B), "sqeuclidean"))


@dataclass(frozen=True)
class ScalingParams:
    mean: np.ndarray
    std: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.std == 0


def fit_scaling(train) -> ScalingParams:
    """Per-dimension mean and sample (n-1) standard deviation."""
    x = train.features if isinstance(train, LabeledDataset) else np.asarray(train, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInputError("scaling needs a non-empty 2-D training matrix")
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.zeros(x.shape[1])
    # exact-constant columns can leave rounding residue in std
    std[np.all(x == x[0], axis=0)] = 0.0
    return ScalingParams(mean, std)


def apply_scaling(params: ScalingParams | None, x) -> np.ndarray:
    """z-score ``x`` (a vector or a matrix of rows); constant dimensions map to 0."""
    x = np.asarray(x, dtype=np.float64)
    if params is None:
        return x
    if x.shape[-1] != params.mean.shape[0]:
        raise InvalidInputError(
            f"feature dimension {x.shape[-1]} != scaling dimension {params.mean.shape[0]}")
    safe = np.where(params.std > 0, params.std, 1.0)
    return np.where(params.std > 0, (x - params.mean) / safe, 0.0)


@dataclass
class BinaryResult:
    alphas: np.ndarray
    bias: float
    iterations: int
    converged: bool
    max_violation: float


def _pick(values, mask, priority, largest):
    """Index of the extreme of ``values`` over ``mask``; exact ties go to the lowest priority."""
    v = np.where(mask, values, -np.inf if largest else np.inf)
    best = v.max() if largest else v.min()
    tied = np.flatnonzero(v == best)
    return int(tied[np.argmin(priority[tied])]), float(best)


def smo(K: np.ndarray | None, y: np.ndarray, C: float, tol: float = DEFAULT_TOL,
        max_iter: int | None = None, seed: int = 0, kernel_row=None) -> BinaryResult:
    """Solve max_a sum(a) - 1/2 a'Qa s.t. 0 <= a <= C, y'a = 0 with Q_ij = y_i y_j K_ij.

    Each step updates the maximal violating pair: the first index is the
    largest KKT violator among those that can move up, the second the
    lower-set index maximising the gap |E_i - E_j|. Stops when the gap is
    at most ``tol``. Either pass the Gram matrix ``K`` or a ``kernel_row(i)``
    callback.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    row = (lambda i: K[i]) if K is not None else kernel_row
    diag = np.ones(n) if K is None else np.diag(K).copy()
    priority = np.random.default_rng(seed).permutation(n)

    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - sum(a)
    it = 0
    gap = np.inf
    converged = False
    for it in range(1, max_iter + 1):
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            converged = True
            break
        i, m_up = _pick(yg, up, priority, largest=True)
        j, m_low = _pick(yg, low, priority, largest=False)
        gap = m_up - m_low
        if gap <= tol:
            converged = True
            break
        ki, kj = row(i), row(j)
        qij = y[i] * y[j] * ki[j]
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = diag[i] + diag[j] + 2 * qij
            delta = (-grad[i] - grad[j]) / max(quad, _TAU)
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = diag[i] + diag[j] - 2 * qij
            delta = (grad[i] - grad[j]) / max(quad, _TAU)
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        di, dj = ni - ai, nj - aj
        alpha[i], alpha[j] = ni, nj
        grad += y * (y[i] * di * ki + y[j] * dj * kj)
    else:
        logger.warning("SMO stopped after %d iterations with KKT gap %.3g > tol %.3g",
                       max_iter, gap, tol)

    # bias from free multipliers, else the midpoint of the feasible interval
    yg = y * grad
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        rho = float(yg[free].mean())
    else:
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub) and np.isfinite(lb) else float(
            ub if np.isfinite(ub) else lb)
    if not np.all(np.isfinite(alpha)) or not np.isfinite(rho):
        raise NumericError("SMO produced non-finite multipliers")
    return BinaryResult(alpha, -rho, it, converged, float(gap))


def dual_objective(alpha, y, K) -> float:
    """sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij."""
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


def train_binary(pos, neg, gamma: float = DEFAULT_GAMMA, C: float = DEFAULT_COST,
                 tol: float = DEFAULT_TOL, max_iter: int | None = None, seed: int = 0):
    """Train on already-scaled positive and negative rows.

    Returns ``(alphas, b)``; ``alphas`` follows the row order of ``pos``
    then ``neg``, and the decision function is
    ``sum_i alphas[i] * y_i * K(x_i, x) + b``.
    """
    pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(neg, dtype=np.float64))
    if pos.size == 0 or neg.size == 0:
        raise InvalidInputError("both classes need at least one training vector")
    if pos.shape[1] != neg.shape[1]:
        raise InvalidInputError("positive and negative vectors differ in dimension")
    if not gamma > 0 or not C > 0:
        raise InvalidInputError("gamma and C must be positive")
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    res = _solve(X, y, gamma, C, tol, max_iter, seed)
    return res.alphas, res.bias


def _solve(X, y, gamma, C, tol, max_iter, seed) -> BinaryResult:
    if X.shape[0] <= GRAM_CACHE_ROWS:
        return smo(rbf_matrix(X, X, gamma), y, C, tol, max_iter, seed)
    return smo(None, y, C, tol, max_iter, seed,
               kernel_row=lambda i: rbf_matrix(X[i], X, gamma)[0])


@dataclass
class PairMachine:
    positive: str
    negative: str
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    alphas: np.ndarray = field(default=None, repr=False)  # full vector, training only
    labels: np.ndarray = field(default=None, repr=False)

    def decision(self, Xs: np.ndarray, gamma: float) -> np.ndarray:
        if self.support_vectors.shape[0] == 0:
            return np.full(Xs.shape[0], self.bias)
        return rbf_matrix(Xs, self.support_vectors, gamma) @ self.dual_coef + self.bias


@dataclass
class SvmModel:
    gamma: float
    cost: float
    classes: tuple
    machines: list
    scaling: ScalingParams | None
    extras: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        if self.scaling is not None:
            return self.scaling.mean.shape[0]
        for m in self.machines:
            if m.support_vectors.size:
                return m.support_vectors.shape[1]
        return self.extras.get("dim", 0)

    def decision_values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise InvalidInputError(f"feature dimension {X.shape[1]} != model dimension {self.dim}")
        Xs = apply_scaling(self.scaling, X)
        return np.stack([m.decision(Xs, self.gamma) for m in self.machines], axis=1)

    def to_dict(self) -> dict:
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kernel": {"type": "rbf", "gamma": self.gamma},
            "cost": self.cost,
            "classes": list(self.classes),
            "dim": self.dim,
            "scaling": None if self.scaling is None else {
                "mean": self.scaling.mean.tolist(), "std": self.scaling.std.tolist()},
            "machines": [{
                "positive": m.positive, "negative": m.negative,
                "support_vectors": m.support_vectors.tolist(),
                "dual_coef": m.dual_coef.tolist(), "bias": m.bias,
            } for m in self.machines],
        }
        doc.update(self.extras)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SvmModel":
        try:
            if doc.get("format") != MODEL_FORMAT:
                raise ParseError(f"not an {MODEL_FORMAT} document")
            if int(doc["version"]) > MODEL_VERSION:
                raise ParseError(f"model version {doc['version']} is newer than supported")
            sc = doc["scaling"]
            scaling = None if sc is None else ScalingParams(
                np.asarray(sc["mean"], dtype=np.float64), np.asarray(sc["std"], dtype=np.float64))
            dim = int(doc.get("dim", 0))
            machines = [PairMachine(
                str(m["positive"]), str(m["negative"]),
                np.asarray(m["support_vectors"], dtype=np.float64).reshape(-1, dim),
                np.asarray(m["dual_coef"], dtype=np.float64), float(m["bias"]))
                for m in doc["machines"]]
            known = {"format", "version", "kernel", "cost", "classes", "scaling", "machines"}
            extras = {k: v for k, v in doc.items() if k not in known}
            return cls(float(doc["kernel"]["gamma"]), float(doc["cost"]),
                       tuple(str(c) for c in doc["classes"]), machines, scaling, extras)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed model document: {exc}") from None

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "SvmModel":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from None
        return cls.from_dict(doc)


def train_multiclass(train: LabeledDataset, gamma: float = DEFAULT_GAMMA, C: float = DEFAULT_COST,
                     seed: int = 0, scale: bool = True, tol: float = DEFAULT_TOL) -> SvmModel:
    """One binary machine per unordered pair of classes present in ``train``."""
    if not gamma > 0 or not C > 0:
        raise InvalidInputError("gamma and C must be positive")
    present = [c for c in train.alphabet if c in set(train.labels)]
    if len(present) < 2:
        raise InvalidInputError(f"need at least 2 classes to train, found {len(present)}")
    scaling = fit_scaling(train) if scale else None
    Xs = apply_scaling(scaling, train.features)
    labels = np.array(train.labels, dtype=object)
    machines = []
    for a, b in combinations(present, 2):
        idx = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[idx] == a, 1.0, -1.0)
        res = _solve(Xs[idx], y, gamma, C, tol, None, seed)
        sv = res.alphas > 0
        machines.append(PairMachine(a, b, Xs[idx][sv].copy(), (res.alphas * y)[sv], res.bias,
                                    alphas=res.alphas, labels=y))
    return SvmModel(gamma, C, tuple(present), machines, scaling, {"dim": train.dim})


def vote(model: SvmModel, decisions: np.ndarray) -> list:
    """One-vs-one majority vote.

    Ties go to the class with the largest summed |decision| over the
    machines it won, then to the earliest class in the alphabet.
    """
    index = {c: i for i, c in enumerate(model.classes)}
    out = []
    for row in np.atleast_2d(decisions):
        votes = np.zeros(len(model.classes), dtype=np.int64)
        strength = np.zeros(len(model.classes))
        for m, d in zip(model.machines, row):
            winner = index[m.positive] if d > 0 else index[m.negative]
            votes[winner] += 1
            strength[winner] += abs(d)
        best = np.flatnonzero(votes == votes.max())
        if best.size > 1:
            s = strength[best]
            best = best[s == s.max()]
        out.append(model.classes[int(best[0])])
    return out


def predict_many(model: SvmModel, X) -> list:
    return vote(model, model.decision_values(X))


def predict(model: SvmModel, x) -> str:
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("predict takes a single feature vector")
    return predict_many(model, x[None, :])[0]
