"""Two-step estimation of the P statistic from labeled data.

For each block of the partition the chain rule splits the target
p(y_i = 1, s_y = s | x) into p(s_y = s | x), fit by one multinomial
logistic model over the block's count, and p(y_i = 1 | s_y, x), fit by
one binary logistic model per label with the count appended to the
features. Both fitters are written here from scratch: full-batch
gradient descent with Barzilai-Borwein step sizes and Armijo
backtracking, ridge penalty on everything but intercepts, lambda
chosen by 3-fold cross validation.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .errors import DataFormatError, DimensionError, DomainError, NumericalError
from .factor import ESTIMATED_D_TOL, LabelPartition, f_gfm_batch

DEFAULT_LAMBDA_GRID = (0.001, 0.01, 0.1, 1.0, 10.0)
MAX_ITERATIONS = 1000
GRAD_TOL = 1e-6
ARMIJO_C = 1e-4
MIN_BACKTRACK_STEP = 1e-20


@dataclass(frozen=True)
class ClassificationTask:
    """Design matrix, integer targets, and the number of classes."""

    x: np.ndarray
    y: np.ndarray
    n_classes: int

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.x, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.int64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise DimensionError("task needs x (n, d) and y (n,) with equal n")
        if x.shape[0] < 1:
            raise DimensionError("task needs at least one row")
        if not np.isfinite(x).all():
            raise NumericalError("task features must be finite")
        if self.n_classes < 2:
            raise DomainError("a task needs at least two classes")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise DomainError(f"targets must lie in 0..{self.n_classes - 1}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.x.shape[0]


def reduce_to_count_task(data, block):
    """Multiclass task: predict how many of the block's labels are on."""
    block = _check_block(data, block)
    counts = data.labels[:, block].sum(axis=1).astype(np.int64)
    return ClassificationTask(data.features, counts, len(block) + 1)


def reduce_to_label_task(data, block, i, s_encoding="numeric"):
    """Binary task for label i given the features and the block count.

    The block's count s_y joins the features either as one numeric
    column (default) or one-hot over 0..m_k (s_encoding="onehot").
    """
    block = _check_block(data, block)
    if i not in block:
        raise DomainError(f"label {i} is not in block {block}")
    counts = data.labels[:, block].sum(axis=1).astype(np.int64)
    x = np.column_stack(
        [data.features.astype(np.float64), _encode_s(counts, len(block), s_encoding)]
    )
    return ClassificationTask(x, data.labels[:, i].astype(np.int64), 2)


def _check_block(data, block):
    block = tuple(int(j) for j in block)
    m = data.labels.shape[1]
    if len(block) == 0 or len(set(block)) != len(block):
        raise DomainError("block must list distinct labels")
    if any(j < 0 or j >= m for j in block):
        raise DomainError(f"block indices must lie in 0..{m - 1}")
    return block


def _encode_s(counts, block_size, s_encoding):
    if s_encoding == "numeric":
        return counts.astype(np.float64)[:, None]
    if s_encoding == "onehot":
        out = np.zeros((counts.shape[0], block_size + 1), dtype=np.float64)
        out[np.arange(counts.shape[0]), counts] = 1.0
        return out
    raise DomainError(f"unknown s encoding {s_encoding!r}")


def _minimize(value_grad, w0, max_iter=MAX_ITERATIONS, gtol=GRAD_TOL):
    """Monotone descent: steepest direction, BB step, Armijo backtracking.

    Returns (w, info) where info carries the per-iteration objective
    history (non-increasing by construction), the final gradient norm,
    and the iteration count.
    """
    w = np.array(w0, dtype=np.float64)
    f, g = value_grad(w)
    if not np.isfinite(f) or not np.isfinite(g).all():
        raise NumericalError("objective not finite at the starting point")
    history = [f]
    gnorm = float(np.sqrt(g @ g))
    step = 1.0
    iterations = 0
    while iterations < max_iter and gnorm > gtol:
        t = min(max(step, 1e-12), 1e12)
        accepted = False
        while t >= MIN_BACKTRACK_STEP:
            w_new = w - t * g
            f_new, g_new = value_grad(w_new)
            if np.isfinite(f_new) and f_new <= f - ARMIJO_C * t * gnorm * gnorm:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        s = w_new - w
        yv = g_new - g
        sy = float(s @ yv)
        step = float(s @ s) / sy if sy > 1e-300 else t * 2.0
        w, f, g = w_new, f_new, g_new
        gnorm = float(np.sqrt(g @ g))
        history.append(f)
        iterations += 1
    return w, {
        "iterations": iterations,
        "grad_norm": gnorm,
        "objective_history": history,
    }


def _with_intercept(x):
    return np.column_stack([x, np.ones(x.shape[0])])


def binary_value_grad(task, lam):
    """Penalized-NLL objective and gradient for a binary task.

    Weight layout: one entry per feature column, intercept last; the
    intercept is not penalized. Used by fit_binary and by gradient
    tests against finite differences.
    """
    xd = _with_intercept(task.x)
    yf = task.y.astype(np.float64)
    n, d = xd.shape
    pen = np.ones(d)
    pen[-1] = 0.0

    def vg(w):
        z = xd @ w
        val = float(np.mean(np.logaddexp(0.0, z) - yf * z))
        grad = xd.T @ (expit(z) - yf) / n
        if lam:
            val += 0.5 * lam * float((pen * w) @ w)
            grad = grad + lam * pen * w
        return val, grad

    return vg, d


def multinomial_value_grad(task, lam):
    """Penalized-NLL objective and gradient for a multiclass task.

    Weights are a (n_classes, d+1) matrix flattened row-major, each
    row being one class's feature weights with the intercept last;
    intercepts are not penalized.
    """
    xd = _with_intercept(task.x)
    n, d = xd.shape
    c = task.n_classes
    onehot = np.zeros((n, c))
    onehot[np.arange(n), task.y] = 1.0
    pen = np.ones((c, d))
    pen[:, -1] = 0.0
    rows = np.arange(n)

    def vg(wflat):
        w = wflat.reshape(c, d)
        z = xd @ w.T
        lse = logsumexp(z, axis=1)
        val = float(np.mean(lse - z[rows, task.y]))
        probs = np.exp(z - lse[:, None])
        grad = (probs - onehot).T @ xd / n
        if lam:
            val += 0.5 * lam * float(((pen * w) * w).sum())
            grad = grad + lam * pen * w
        return val, grad.ravel()

    return vg, c * d


@dataclass(frozen=True)
class BinaryModel:
    """Logistic model; weights = feature columns then intercept."""

    weights: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "weights", np.asarray(self.weights, dtype=np.float64)
        )

    def decision(self, x):
        return x @ self.weights[:-1] + self.weights[-1]

    def predict_proba(self, x):
        """p(y = 1 | x) for an (n, d) design; always in (0, 1)."""
        return expit(self.decision(x))


@dataclass(frozen=True)
class MultinomialModel:
    """Softmax model; weights (n_classes, d+1), intercept column last."""

    weights: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "weights", np.asarray(self.weights, dtype=np.float64)
        )

    @property
    def n_classes(self):
        return self.weights.shape[0]

    def predict_proba(self, x):
        """Class probabilities, rows summing to 1 within 1e-12."""
        z = x @ self.weights[:, :-1].T + self.weights[:, -1]
        z = z - logsumexp(z, axis=1)[:, None]
        return np.exp(z)


def fit_binary(task, lam, w0=None, max_iter=MAX_ITERATIONS, gtol=GRAD_TOL):
    """Fit a ridge-penalized binary logistic model on the task.

    Deterministic given (task, lam, w0); starts from zeros unless a
    warm start is given. Converges to gradient norm <= gtol or stops
    at the iteration cap, whichever comes first.
    """
    if task.n_classes != 2:
        raise DomainError("fit_binary needs a two-class task")
    _check_lambda(lam)
    vg, dim = binary_value_grad(task, lam)
    w, info = _minimize(vg, np.zeros(dim) if w0 is None else w0, max_iter, gtol)
    return BinaryModel(w, lam), info


def fit_multinomial(task, lam, w0=None, max_iter=MAX_ITERATIONS, gtol=GRAD_TOL):
    """Fit a ridge-penalized multinomial logistic model on the task."""
    _check_lambda(lam)
    vg, dim = multinomial_value_grad(task, lam)
    w, info = _minimize(vg, np.zeros(dim) if w0 is None else w0, max_iter, gtol)
    return MultinomialModel(w.reshape(task.n_classes, -1), lam), info


def _check_lambda(lam):
    if not np.isfinite(lam) or lam < 0:
        raise DomainError("lambda must be a finite non-negative real")


def _heldout_nll(task, rows, model):
    """Unpenalized mean NLL of `model` on the given task rows."""
    x = task.x[rows]
    y = task.y[rows]
    if isinstance(model, BinaryModel):
        z = model.decision(x)
        return float(np.mean(np.logaddexp(0.0, z) - y * z))
    z = x @ model.weights[:, :-1].T + model.weights[:, -1]
    lse = logsumexp(z, axis=1)
    return float(np.mean(lse - z[np.arange(len(y)), y]))


def fold_assignment(n, folds, rng):
    """Deterministic fold ids: a seeded permutation taken modulo folds."""
    perm = rng.permutation(n)
    out = np.empty(n, dtype=np.int64)
    out[perm] = np.arange(n) % folds
    return out


# CV refits only rank lambdas, so they may stop earlier than final
# fits; held-out NLL differences between grid values dwarf a 1e-4
# gradient residual.
CV_MAX_ITERATIONS = 300
CV_GRAD_TOL = 1e-4


def select_lambda(task, grid=DEFAULT_LAMBDA_GRID, folds=3, rng=None):
    """Grid value minimizing mean held-out NLL over k folds.

    Ties go to the smaller lambda. Fold assignment is a deterministic
    function of the rng state and the row index. Folds that would be
    empty on either side (n < folds) are skipped. CV refits warm-start
    from the previous grid value's solution and use the looser CV
    stopping rule, purely as a speed-up; the selected lambda is
    returned for a cold full-tolerance fit by the caller.
    """
    grid = [float(v) for v in grid]
    if not grid:
        raise DomainError("lambda grid must be non-empty")
    if sorted(grid) != grid:
        grid = sorted(grid)
    if rng is None:
        raise DomainError("select_lambda needs an rng for fold assignment")
    if len(grid) == 1:
        return grid[0]
    fold_of = fold_assignment(task.n, folds, rng)
    fit = fit_binary if task.n_classes == 2 else fit_multinomial
    total = np.zeros(len(grid))
    weight = np.zeros(len(grid))
    for fold in range(folds):
        held = np.flatnonzero(fold_of == fold)
        kept = np.flatnonzero(fold_of != fold)
        if len(held) == 0 or len(kept) == 0:
            continue
        sub = ClassificationTask(task.x[kept], task.y[kept], task.n_classes)
        w0 = None
        for gi, lam in enumerate(grid):
            model, _ = fit(
                sub, lam, w0=w0, max_iter=CV_MAX_ITERATIONS, gtol=CV_GRAD_TOL
            )
            w0 = model.weights.ravel().copy()
            total[gi] += _heldout_nll(task, held, model) * len(held)
            weight[gi] += len(held)
    if weight.max() == 0:
        return grid[0]
    mean_nll = total / np.maximum(weight, 1)
    best = 0
    for gi in range(1, len(grid)):
        if mean_nll[gi] < mean_nll[best]:
            best = gi
    return grid[best]


def combine_chain_rule(count_probs, label_probs):
    """P entries by the chain rule: p_is = p(s_y = s) * p(y_i = 1 | s).

    count_probs is (..., m+1) over s = 0..m; label_probs is
    (..., m, m) with [..., i, s-1] = p(y_i = 1 | s_y = s). The s = 0
    column of count_probs contributes nothing to P (no label can be
    on), which is why P plus the recovered d suffice downstream.
    """
    count_probs = np.asarray(count_probs, dtype=np.float64)
    label_probs = np.asarray(label_probs, dtype=np.float64)
    return count_probs[..., None, 1:] * label_probs


@dataclass(frozen=True)
class BlockModels:
    """Trained models for one block: count model plus per-label models.

    For the default two-step method label_models holds BinaryModels;
    for the direct baseline (method="direct") it holds one
    MultinomialModel per label over the classes y_i * s_y = 0..m_k and
    count_model is unused for P (kept for the recovered d comparison).
    """

    block: tuple
    count_model: MultinomialModel
    label_models: tuple
    count_lambda: float
    label_lambdas: tuple

    def __post_init__(self):
        object.__setattr__(self, "block", tuple(int(j) for j in self.block))
        object.__setattr__(self, "label_models", tuple(self.label_models))
        object.__setattr__(
            self, "label_lambdas", tuple(float(v) for v in self.label_lambdas)
        )


@dataclass(frozen=True)
class TrainedEstimator:
    """Per-block estimated models plus everything needed to predict."""

    partition: LabelPartition
    blocks: tuple
    n_features: int
    s_encoding: str = "numeric"
    method: str = "two-step"
    d_tol: float = ESTIMATED_D_TOL

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if len(self.blocks) != self.partition.n_blocks:
            raise DimensionError("one BlockModels needed per partition block")
        for bm, labels in zip(self.blocks, self.partition.blocks):
            if bm.block != labels:
                raise DimensionError("block models out of step with partition")
        if self.method not in ("two-step", "direct"):
            raise DomainError(f"unknown method {self.method!r}")

    def _features(self, features):
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise DimensionError(
                f"expected (n, {self.n_features}) features, got {x.shape}"
            )
        return x

    def p_matrices(self, k, features):
        """Estimated (n, m_k, m_k) P tables for block k on each row."""
        x = self._features(features)
        bm = self.blocks[k]
        mk = len(bm.block)
        if self.method == "direct":
            label_p = np.stack(
                [model.predict_proba(x)[:, 1:] for model in bm.label_models],
                axis=1,
            )
            return label_p
        count_probs = bm.count_model.predict_proba(x)
        label_probs = np.empty((x.shape[0], mk, mk))
        for s in range(1, mk + 1):
            xs = np.column_stack(
                [x, _encode_s(np.full(x.shape[0], s, dtype=np.int64), mk, self.s_encoding)]
            )
            for i, model in enumerate(bm.label_models):
                label_probs[:, i, s - 1] = model.predict_proba(xs)
        return combine_chain_rule(count_probs, label_probs)

    def predict(self, features, return_stats=False):
        """Expected-F maximizing predictions for each feature row.

        Returns the (n, m) 0/1 prediction array; with return_stats,
        also a dict holding the predicted expected F under the
        estimated distribution and the count of rows whose recovered
        d_0 fell below -d_tol (clamped, not fatal).
        """
        x = self._features(features)
        block_ps = [self.p_matrices(k, x) for k in range(self.partition.n_blocks)]
        h, values, n_bad = f_gfm_batch(
            self.partition, block_ps, tol=self.d_tol, clamp=True
        )
        if return_stats:
            return h, {"expected_f": values, "n_inconsistent": n_bad}
        return h

    def to_json(self):
        def model_obj(model):
            return {
                "weights": np.asarray(model.weights).tolist(),
                "lambda": float(model.lam),
            }

        obj = {
            "partition": json.loads(self.partition.to_json()),
            "n_features": self.n_features,
            "s_encoding": self.s_encoding,
            "method": self.method,
            "d_tol": self.d_tol,
            "blocks": [
                {
                    "block": [j + 1 for j in bm.block],
                    "count": model_obj(bm.count_model),
                    "labels": [model_obj(m) for m in bm.label_models],
                }
                for bm in self.blocks
            ],
        }
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text):
        try:
            obj = json.loads(text)
            partition = LabelPartition(
                int(obj["partition"]["m"]),
                tuple(
                    tuple(int(i) - 1 for i in b) for b in obj["partition"]["blocks"]
                ),
            )
            method = obj.get("method", "two-step")
            blocks = []
            for bobj in obj["blocks"]:
                count = MultinomialModel(
                    np.asarray(bobj["count"]["weights"], dtype=np.float64),
                    float(bobj["count"]["lambda"]),
                )
                label_cls = BinaryModel if method == "two-step" else MultinomialModel
                labels = tuple(
                    label_cls(
                        np.asarray(mobj["weights"], dtype=np.float64),
                        float(mobj["lambda"]),
                    )
                    for mobj in bobj["labels"]
                )
                blocks.append(
                    BlockModels(
                        tuple(int(j) - 1 for j in bobj["block"]),
                        count,
                        labels,
                        count.lam,
                        tuple(m.lam for m in labels),
                    )
                )
            return cls(
                partition,
                tuple(blocks),
                int(obj["n_features"]),
                obj.get("s_encoding", "numeric"),
                method,
                float(obj.get("d_tol", ESTIMATED_D_TOL)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, (DimensionError, DomainError)):
                raise
            raise DataFormatError(f"bad estimator JSON: {exc}") from exc


def estimate_p_matrix(est, k, x):
    """Estimated P for block k at a single feature vector x."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None]
    return est.p_matrices(k, x)[0]


def fit_estimator(
    data,
    partition,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    folds=3,
    rng=None,
    s_encoding="numeric",
    method="two-step",
    d_tol=ESTIMATED_D_TOL,
):
    """Train all per-block models on a dataset.

    rng drives only the cross-validation fold assignments; it is
    split into one child stream per model in a fixed order (per block:
    count model, then labels), so results do not depend on evaluation
    order. Deterministic given (data, partition, settings, rng seed).
    """
    if rng is None:
        raise DomainError("fit_estimator needs an rng for cross validation")
    if data.labels.shape[1] != partition.m:
        raise DimensionError(
            f"dataset has {data.labels.shape[1]} labels, partition wants {partition.m}"
        )
    if data.n < 1:
        raise DimensionError("cannot fit on an empty dataset")
    streams = iter(rng.spawn(sum(len(b) + 1 for b in partition.blocks)))
    blocks = []
    for block in partition.blocks:
        count_task = reduce_to_count_task(data, block)
        count_lam = select_lambda(count_task, lambda_grid, folds, next(streams))
        count_model, _ = fit_multinomial(count_task, count_lam)
        label_models = []
        label_lams = []
        for i in block:
            if method == "direct":
                task = _direct_label_task(data, block, i)
                lam = select_lambda(task, lambda_grid, folds, next(streams))
                model, _ = fit_multinomial(task, lam)
            else:
                task = reduce_to_label_task(data, block, i, s_encoding)
                lam = select_lambda(task, lambda_grid, folds, next(streams))
                model, _ = fit_binary(task, lam)
            label_models.append(model)
            label_lams.append(lam)
        blocks.append(
            BlockModels(block, count_model, tuple(label_models), count_lam, tuple(label_lams))
        )
    return TrainedEstimator(
        partition, tuple(blocks), data.features.shape[1], s_encoding, method, d_tol
    )


def _direct_label_task(data, block, i):
    """Baseline reduction: predict y_i * s_y in one multiclass model.

    Estimates p_is in one shot instead of the chain rule; kept as a
    comparison flag because its implied d_0 often goes negative.
    """
    block = _check_block(data, block)
    counts = data.labels[:, block].sum(axis=1).astype(np.int64)
    target = data.labels[:, i].astype(np.int64) * counts
    return ClassificationTask(data.features, target, len(block) + 1)
