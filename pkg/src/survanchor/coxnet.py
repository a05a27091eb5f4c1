"""Cox-loss multilayer perceptron with an inspectable embedding layer.

The network is ``f(x) = g(phi(x))``: the encoder ``phi`` is a stack of
fully-connected layers (ReLU between them) whose last activation is either
division by the Euclidean norm or ReLU, and ``g`` is one affine map to a
real risk score.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .data import Standardizer, SplitPlan, SurvivalDataset
from .errors import (
    DimensionMismatch,
    DivergedLoss,
    InconsistentRowCount,
    MalformedBundle,
    NoEvents,
    NoEventsInBatch,
    NormalizationGuard,
)
from .survstats import BreslowBaseline, concordance_index, fit_breslow

log = logging.getLogger(__name__)

_NORM_GUARD = 1e-12
BUNDLE_VERSION = 1


# --- loss ---------------------------------------------------------------------

def _check_batch(event):
    if not np.asarray(event).astype(bool).any():
        raise NoEventsInBatch("batch contains no events")


def cox_loss(scores, time, event) -> float:
    """Negative Cox partial log-likelihood with risk sets {j : y_j >= y_i}.

    Summed (not averaged) over events; risk sets are formed within the
    arrays given, so passing a minibatch yields the minibatch loss.
    """
    _check_batch(event)
    loss, _ = kernels.cox_loss_grad(scores, time, event)
    return float(loss)


def cox_loss_gradient(scores, time, event) -> np.ndarray:
    """d(cox_loss)/d(score_k) = -event_k + exp(s_k) * sum_{i: event, y_i <= y_k} 1/R_i."""
    _check_batch(event)
    _, grad = kernels.cox_loss_grad(scores, time, event)
    return grad


# --- network --------------------------------------------------------------------

@dataclass(frozen=True)
class MlpArchitecture:
    input_dim: int
    n_layers: int = 2
    embedding_dim: int = 8
    final_activation: str = "unit_norm"
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.n_layers < 1 or self.embedding_dim < 1:
            raise ValueError("input_dim, n_layers and embedding_dim must be >= 1")
        if self.final_activation not in ("unit_norm", "relu"):
            raise ValueError(f"unknown final activation {self.final_activation!r}")


def init_params(arch: MlpArchitecture, rng: np.random.Generator | None = None) -> list[np.ndarray]:
    """Fan-in scaled uniform weights: He limits before ReLU, LeCun otherwise.

    Biases are uniform on +-1/sqrt(fan_in). Zero biases would send a row whose
    hidden units are all inactive to the zero vector, which cannot be normalized.
    """
    rng = np.random.default_rng(arch.seed) if rng is None else rng
    params = []
    fan_in = arch.input_dim
    for layer in range(arch.n_layers):
        relu_next = layer < arch.n_layers - 1 or arch.final_activation == "relu"
        limit = math.sqrt((6.0 if relu_next else 3.0) / fan_in)
        params.append(rng.uniform(-limit, limit, (fan_in, arch.embedding_dim)))
        params.append(rng.uniform(-1.0, 1.0, arch.embedding_dim) / math.sqrt(fan_in))
        fan_in = arch.embedding_dim
    limit = math.sqrt(3.0 / fan_in)
    params.append(rng.uniform(-limit, limit, (fan_in, 1)))
    params.append(np.zeros(1))
    return params


def _normalize_rows(z: np.ndarray):
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    small = norms[:, 0] < _NORM_GUARD
    if small.any():
        warnings.warn(f"{int(small.sum())} embedding(s) with norm < {_NORM_GUARD}; "
                      "left unnormalized", NormalizationGuard, stacklevel=3)
    safe = np.where(small[:, None], 1.0, norms)
    return z / safe, safe, small


def encoder_forward(params, X, final_activation: str, cache: list | None = None) -> np.ndarray:
    n_layers = len(params) // 2 - 1
    h = X
    for layer in range(n_layers):
        W, b = params[2 * layer], params[2 * layer + 1]
        z = h @ W + b
        last = layer == n_layers - 1
        if last and final_activation == "unit_norm":
            out, norms, small = _normalize_rows(z)
            step = ("norm", h, out, norms, small)
        else:
            out = np.maximum(z, 0.0)
            step = ("relu", h, z)
        if cache is not None:
            cache.append(step)
        h = out
    return h


def network_forward(params, X, final_activation: str):
    """Risk scores and the cache needed by :func:`network_backward`."""
    cache: list = []
    U = encoder_forward(params, X, final_activation, cache)
    f = (U @ params[-2] + params[-1])[:, 0]
    return f, (cache, U)


def network_backward(params, cache, dscores) -> list[np.ndarray]:
    steps, U = cache
    grads = [None] * len(params)
    df = np.asarray(dscores, dtype=float)[:, None]
    grads[-2] = U.T @ df
    grads[-1] = df.sum(axis=0)
    dh = df @ params[-2].T
    for layer in range(len(steps) - 1, -1, -1):
        kind, h_in = steps[layer][0], steps[layer][1]
        if kind == "norm":
            _, _, out, norms, small = steps[layer]
            # Jacobian of v -> v/|v| is (I - y y^T)/|v|
            dz = (dh - out * np.sum(out * dh, axis=1, keepdims=True)) / norms
            dz[small] = dh[small]
        else:
            dz = dh * (steps[layer][2] > 0)
        grads[2 * layer] = h_in.T @ dz
        grads[2 * layer + 1] = dz.sum(axis=0)
        dh = dz @ params[2 * layer].T
    return grads


def loss_and_grads(params, X, time, event, final_activation="unit_norm"):
    """Summed Cox loss of the whole network on (X, time, event) and its parameter gradients."""
    _check_batch(event)
    f, cache = network_forward(params, X, final_activation)
    loss, dscores = kernels.cox_loss_grad(f, time, event)
    return float(loss), network_backward(params, cache, dscores)


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# --- model -----------------------------------------------------------------------

@dataclass(eq=False)
class CoxMlpModel:
    arch: MlpArchitecture
    params: list[np.ndarray]
    baseline: BreslowBaseline | None = None
    standardizer: Standardizer | None = None
    hyperparameters: dict = field(default_factory=dict)
    training_log: list[dict] = field(default_factory=list)

    def _prepare(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.arch.input_dim:
            raise DimensionMismatch(f"expected {self.arch.input_dim} input columns, got shape {X.shape}")
        return X if self.standardizer is None else self.standardizer.transform(X)

    def embed(self, X) -> np.ndarray:
        return encoder_forward(self.params, self._prepare(X), self.arch.final_activation)

    def head(self, U) -> np.ndarray:
        return (np.asarray(U, dtype=float) @ self.params[-2] + self.params[-1])[:, 0]

    def risk(self, X) -> np.ndarray:
        return self.head(self.embed(X))

    def to_dict(self) -> dict:
        return {
            "architecture": asdict(self.arch),
            "params": [p.tolist() for p in self.params],
            "baseline": self.baseline.to_dict() if self.baseline is not None else None,
            "standardizer": self.standardizer.to_dict() if self.standardizer is not None else None,
            "hyperparameters": self.hyperparameters,
        }

    @classmethod
    def from_dict(cls, d) -> "CoxMlpModel":
        arch = MlpArchitecture(**d["architecture"])
        params = [np.asarray(p, dtype=float) for p in d["params"]]
        base = BreslowBaseline.from_dict(d["baseline"]) if d.get("baseline") else None
        std = Standardizer.from_dict(d["standardizer"]) if d.get("standardizer") else None
        return cls(arch, params, base, std, d.get("hyperparameters", {}))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CoxMlpModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# --- training ---------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    batch_sizes: tuple[int, ...] = (64, 128)
    learning_rates: tuple[float, ...] = (0.01, 0.001)
    layer_counts: tuple[int, ...] = (1, 2, 3, 4)
    embedding_dims: tuple[int, ...] = (5, 6, 7, 8, 9, 10)
    max_epochs: int = 100
    patience: int = 10
    final_activation: str = "unit_norm"
    seed: int = 0
    standardize: bool = True
    n_jobs: int = 1

    def __post_init__(self):
        for name in ("batch_sizes", "learning_rates", "layer_counts", "embedding_dims"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} must be nonempty")
            object.__setattr__(self, name, values)

    def grid(self) -> list[dict]:
        return [
            {"batch_size": bs, "learning_rate": lr, "n_layers": L, "embedding_dim": d}
            for bs, lr, L, d in itertools.product(self.batch_sizes, self.learning_rates,
                                                  self.layer_counts, self.embedding_dims)
        ]


@dataclass
class GridResult:
    index: int
    hyperparameters: dict
    best_val_concordance: float
    best_epoch: int
    params: list[np.ndarray] | None
    log: list[dict]
    failure: str | None = None


def _train_one(index, hp, cfg: TrainConfig, Xtr, ttr, etr, Xva, tva, eva) -> GridResult:
    rng = np.random.default_rng([cfg.seed, index])
    arch = MlpArchitecture(Xtr.shape[1], hp["n_layers"], hp["embedding_dim"], cfg.final_activation)
    params = init_params(arch, rng)
    opt = Adam(params, lr=hp["learning_rate"])
    best_c, best_epoch, best_params, wait = -math.inf, -1, None, 0
    rows: list[dict] = []
    n, bs = Xtr.shape[0], hp["batch_size"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NormalizationGuard)
        for epoch in range(cfg.max_epochs):
            perm = rng.permutation(n)
            total, batches = 0.0, 0
            for start in range(0, n, bs):
                idx = perm[start:start + bs]
                e = etr[idx]
                n_events = int(e.sum())
                if n_events == 0:
                    continue
                f, cache = network_forward(params, Xtr[idx], cfg.final_activation)
                loss, dscores = kernels.cox_loss_grad(f, ttr[idx], e)
                if not math.isfinite(loss) or not np.all(np.isfinite(dscores)):
                    return GridResult(index, hp, best_c, best_epoch, best_params, rows,
                                      failure=f"non-finite loss at epoch {epoch}")
                grads = network_backward(params, cache, dscores / n_events)
                opt.step(params, grads)
                total += loss / n_events
                batches += 1
            val_f = network_forward(params, Xva, cfg.final_activation)[0]
            if not np.all(np.isfinite(val_f)):
                return GridResult(index, hp, best_c, best_epoch, best_params, rows,
                                  failure=f"non-finite scores at epoch {epoch}")
            val_c = concordance_index(val_f, tva, eva)
            rows.append({"grid_index": index, **hp, "epoch": epoch,
                         "loss": total / max(batches, 1), "val_concordance": val_c})
            if val_c > best_c:
                best_c, best_epoch, wait = val_c, epoch, 0
                best_params = [p.copy() for p in params]
            else:
                wait += 1
                if wait >= cfg.patience:
                    break
    return GridResult(index, hp, best_c, best_epoch, best_params, rows)


def train(ds: SurvivalDataset, plan: SplitPlan, config: TrainConfig = TrainConfig()) -> CoxMlpModel:
    """Sweep the hyperparameter grid and return the best model by validation concordance.

    Each grid point trains with Adam on shuffled minibatches (risk sets
    within the batch, loss averaged over the batch's events) and stops after
    ``patience`` epochs without a validation-concordance improvement. The
    winner's Breslow baseline is fitted on the training role.
    """
    tr, va = plan.indices("train"), plan.indices("validation")
    if tr.size == 0 or va.size == 0:
        raise NoEvents("train and validation roles must be nonempty")
    if not ds.event[tr].any() or not ds.event[va].any():
        raise NoEvents("train and validation roles must both contain events")

    std = Standardizer.fit(ds, tr) if config.standardize else None
    X = std.transform(ds.features) if std is not None else ds.features
    args = (config, X[tr], ds.time[tr], ds.event[tr], X[va], ds.time[va], ds.event[va])
    grid = config.grid()

    if config.n_jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            futures = [pool.submit(_train_one, i, hp, *args) for i, hp in enumerate(grid)]
            results = [fut.result() for fut in futures]
    else:
        results = [_train_one(i, hp, *args) for i, hp in enumerate(grid)]

    training_log = [row for r in results for row in r.log]
    usable = [r for r in results if r.params is not None and r.failure is None]
    for r in results:
        if r.failure:
            log.warning("grid point %d %s: %s", r.index, r.hyperparameters, r.failure)
    if not usable:
        raise DivergedLoss("every grid point diverged")
    best = max(usable, key=lambda r: (r.best_val_concordance, -r.index))

    hp = best.hyperparameters
    arch = MlpArchitecture(ds.D, hp["n_layers"], hp["embedding_dim"], config.final_activation, config.seed)
    model = CoxMlpModel(arch, best.params, standardizer=std,
                        hyperparameters={**hp, "grid_index": best.index, "best_epoch": best.best_epoch,
                                         "val_concordance": best.best_val_concordance},
                        training_log=training_log)
    model.baseline = fit_breslow(model.risk(ds.features[tr]), ds.time[tr], ds.event[tr])
    return model


LOG_COLUMNS = ("grid_index", "batch_size", "learning_rate", "n_layers", "embedding_dim",
               "epoch", "loss", "val_concordance")


def write_training_log(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in LOG_COLUMNS])


# --- embedding bundles ---------------------------------------------------------------

@dataclass(eq=False)
class EmbeddingBundle:
    """Embedding vectors row-aligned with ids and (optionally) survival labels."""

    embeddings: np.ndarray
    ids: list[str]
    times: np.ndarray | None = None
    events: np.ndarray | None = None
    source: str = ""

    def __post_init__(self):
        U = np.asarray(self.embeddings, dtype=float)
        if U.ndim != 2:
            raise MalformedBundle("embeddings must be a 2-D array")
        n = U.shape[0]
        self.embeddings = U
        self.ids = [str(i) for i in self.ids]
        if len(self.ids) != n:
            raise InconsistentRowCount(f"{len(self.ids)} ids for {n} embeddings")
        if self.times is not None:
            self.times = np.asarray(self.times, dtype=float)
            if self.times.shape != (n,):
                raise InconsistentRowCount(f"{self.times.size} times for {n} embeddings")
            if (self.times < 0).any() or not np.isfinite(self.times).all():
                raise MalformedBundle("times must be finite and nonnegative")
        if self.events is not None:
            self.events = np.asarray(self.events)
            if self.events.shape != (n,):
                raise InconsistentRowCount(f"{self.events.size} events for {n} embeddings")
            if not np.isin(self.events, (0, 1)).all():
                raise MalformedBundle("events must be 0 or 1")
            self.events = self.events.astype(np.int64)
        if not np.isfinite(U).all():
            raise MalformedBundle("embeddings must be finite")

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def d(self) -> int:
        return self.embeddings.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.times is not None and self.events is not None

    def subset(self, rows) -> "EmbeddingBundle":
        rows = np.asarray(rows)
        return EmbeddingBundle(
            self.embeddings[rows], [self.ids[i] for i in rows],
            None if self.times is None else self.times[rows],
            None if self.events is None else self.events[rows], self.source)

    def to_json(self) -> dict:
        out = {"version": BUNDLE_VERSION, "d": self.d, "n": self.n, "ids": list(self.ids),
               "embeddings": self.embeddings.tolist(), "source": self.source}
        if self.times is not None:
            out["times"] = self.times.tolist()
        if self.events is not None:
            out["events"] = self.events.tolist()
        return out

    @classmethod
    def from_json(cls, obj) -> "EmbeddingBundle":
        if not isinstance(obj, dict):
            raise MalformedBundle("bundle must be a JSON object")
        for key in ("version", "d", "n", "ids", "embeddings"):
            if key not in obj:
                raise MalformedBundle(f"bundle is missing {key!r}")
        if obj["version"] != BUNDLE_VERSION:
            raise MalformedBundle(f"unsupported bundle version {obj['version']!r}")
        try:
            U = np.asarray(obj["embeddings"], dtype=float).reshape(-1, int(obj["d"])) \
                if len(obj["embeddings"]) else np.zeros((0, int(obj["d"])))
        except (TypeError, ValueError) as exc:
            raise MalformedBundle(f"bad embeddings: {exc}") from None
        if U.shape[0] != int(obj["n"]) or len(obj["embeddings"]) != int(obj["n"]):
            raise InconsistentRowCount(f"n={obj['n']} but {len(obj['embeddings'])} embedding rows")
        if any(len(row) != int(obj["d"]) for row in obj["embeddings"]):
            raise MalformedBundle(f"every embedding row must have d={obj['d']} entries")
        return cls(U, obj["ids"], obj.get("times"), obj.get("events"), obj.get("source", ""))


def encode(model: CoxMlpModel, inputs, times=None, events=None, ids=None,
           source: str = "coxnet") -> EmbeddingBundle:
    """Embed raw feature rows with the model's encoder."""
    U = model.embed(inputs)
    ids = [str(i) for i in range(U.shape[0])] if ids is None else list(ids)
    return EmbeddingBundle(U, ids, times, events, source)


def encode_dataset(model: CoxMlpModel, ds: SurvivalDataset, rows=None, source="coxnet") -> EmbeddingBundle:
    rows = np.arange(ds.n) if rows is None else np.asarray(rows)
    return encode(model, ds.features[rows], ds.time[rows], ds.event[rows], ds.ids[rows], source)


def export_bundle(bundle: EmbeddingBundle, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle.to_json(), fh, sort_keys=True)
        fh.write("\n")


def import_bundle(path) -> EmbeddingBundle:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedBundle(f"{path}: {exc}") from None
    return EmbeddingBundle.from_json(obj)
