"""Mixture-model clustering of embeddings and log-rank based choice of k."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyClusterCollapse, NoEvents, NotUnitNorm
from .special import bessel_ratio, log_bessel_iv
from .survstats import logrank_test

KAPPA_MIN, KAPPA_MAX = 1e-3, 1e4
VAR_FLOOR = 1e-6
WEIGHT_FLOOR = 1e-8
MAX_RESCUES = 3


@dataclass(eq=False)
class MixtureFit:
    """A fitted mixture. Cluster indices are 0-based."""

    kind: str
    weights: np.ndarray
    means: np.ndarray
    kappas: np.ndarray | None
    variances: np.ndarray | None
    responsibilities: np.ndarray
    log_likelihood: float
    n_iter: int
    history: list[float] = field(default_factory=list)
    rescues: int = 0

    @property
    def k(self) -> int:
        return self.weights.size

    @property
    def assignments(self) -> np.ndarray:
        return np.argmax(self.responsibilities, axis=1)

    def log_joint(self, X) -> np.ndarray:
        """log(weight_j) + log density_j(x) for each row and component."""
        X = np.asarray(X, dtype=float)
        if self.kind == "vmf":
            return _vmf_log_joint(X, self.weights, self.means, self.kappas)
        return _gauss_log_joint(X, self.weights, self.means, self.variances)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.log_joint(X), axis=1)

    def to_json(self) -> dict:
        comps = []
        for j in range(self.k):
            c = {"weight": float(self.weights[j]), "mean": self.means[j].tolist()}
            if self.kappas is not None:
                c["kappa"] = float(self.kappas[j])
            if self.variances is not None:
                c["variance"] = self.variances[j].tolist()
            comps.append(c)
        return {"kind": self.kind, "k": self.k, "components": comps,
                "assignments": self.assignments.tolist(),
                "log_likelihood": self.log_likelihood, "n_iter": self.n_iter,
                "rescues": self.rescues}


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    top = a.max(axis=1, keepdims=True)
    return (top + np.log(np.exp(a - top).sum(axis=1, keepdims=True)))[:, 0]


# --- von Mises-Fisher -----------------------------------------------------------

def vmf_log_normalizer(d: int, kappa: float) -> float:
    """log C_d(kappa) for the vMF density C_d(kappa) exp(kappa mu.x) on S^{d-1}."""
    nu = 0.5 * d - 1.0
    return nu * math.log(kappa) - 0.5 * d * math.log(2.0 * math.pi) - log_bessel_iv(nu, kappa)


def _vmf_log_joint(X, weights, means, kappas):
    d = X.shape[1]
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    logc = np.array([vmf_log_normalizer(d, k) for k in kappas])
    return logw + logc + (X @ means.T) * kappas


def estimate_kappa(rbar: float, d: int) -> float:
    """Solve A_d(kappa) = rbar: Banerjee et al. starting point plus Newton steps.

    The result is clamped to [KAPPA_MIN, KAPPA_MAX]; since the per-component
    objective is concave in kappa the clamped root is the constrained maximizer.
    """
    if rbar <= 0:
        return KAPPA_MIN
    if rbar >= 1.0 - 1e-12:
        return KAPPA_MAX
    kappa = rbar * (d - rbar * rbar) / (1.0 - rbar * rbar)
    kappa = min(max(kappa, KAPPA_MIN), KAPPA_MAX)
    nu = 0.5 * d - 1.0
    for _ in range(50):
        a = bessel_ratio(nu, kappa)
        slope = 1.0 - a * a - (d - 1.0) / kappa * a
        if slope <= 0:
            break
        step = (a - rbar) / slope
        new = min(max(kappa - step, 0.5 * kappa), 2.0 * kappa)
        converged = abs(new - kappa) <= 1e-12 * kappa
        kappa = new
        if converged:
            break
    return min(max(kappa, KAPPA_MIN), KAPPA_MAX)


def _vmf_mstep(X, resp, prev_means):
    n, d = X.shape
    Nk = resp.sum(axis=0)
    S = resp.T @ X
    norms = np.linalg.norm(S, axis=1)
    means = np.where(norms[:, None] > 0, S / np.where(norms > 0, norms, 1.0)[:, None], prev_means)
    rbar = np.where(Nk > 0, norms / np.where(Nk > 0, Nk, 1.0), 0.0)
    kappas = np.array([estimate_kappa(min(r, 1.0), d) for r in rbar])
    return Nk / n, means, kappas


# --- Gaussian (diagonal) ---------------------------------------------------------

def _gauss_log_joint(X, weights, means, variances):
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    inv = 1.0 / variances
    quad = (X * X) @ inv.T - 2.0 * X @ (means * inv).T + np.sum(means * means * inv, axis=1)
    logdet = np.sum(np.log(2.0 * np.pi * variances), axis=1)
    return logw - 0.5 * (quad + logdet)


def _gauss_mstep(X, resp, prev_means):
    n = X.shape[0]
    Nk = resp.sum(axis=0)
    safe = np.where(Nk > 0, Nk, 1.0)[:, None]
    means = np.where(Nk[:, None] > 0, (resp.T @ X) / safe, prev_means)
    var = np.empty_like(means)
    for j in range(means.shape[0]):
        diff = X - means[j]
        var[j] = (resp[:, j] @ (diff * diff)) / safe[j]
    return Nk / n, means, np.maximum(var, VAR_FLOOR)


# --- seeding ----------------------------------------------------------------------

def kmeans_pp_seeds(X, k, rng, metric="euclidean") -> np.ndarray:
    """k-means++ seeding over distinct rows weighted by multiplicity.

    Working on distinct rows makes the seeds independent of row order and
    of duplicating the whole data set.
    """
    uniq, counts = np.unique(X, axis=0, return_counts=True)
    w = counts.astype(float)
    if uniq.shape[0] < k:
        raise ValueError(f"need at least k={k} distinct rows, got {uniq.shape[0]}")
    chosen = [int(rng.choice(uniq.shape[0], p=w / w.sum()))]
    dist = _seed_distance(uniq, uniq[chosen[0]], metric)
    for _ in range(1, k):
        p = w * dist
        total = p.sum()
        if total <= 0:
            remaining = np.setdiff1d(np.arange(uniq.shape[0]), chosen)
            nxt = int(rng.choice(remaining))
        else:
            nxt = int(rng.choice(uniq.shape[0], p=p / total))
        chosen.append(nxt)
        dist = np.minimum(dist, _seed_distance(uniq, uniq[nxt], metric))
    return uniq[chosen].copy()


def _seed_distance(U, c, metric):
    if metric == "cosine":
        return np.maximum(1.0 - U @ c, 0.0)
    diff = U - c
    return np.sum(diff * diff, axis=1)


# --- EM driver ----------------------------------------------------------------------

def _run_em(X, k, rng, kind, tol, max_iter) -> MixtureFit:
    n, d = X.shape
    if kind == "vmf":
        means = kmeans_pp_seeds(X, k, rng, "cosine")
        rbar = float(np.linalg.norm(X.mean(axis=0)))
        kappas = np.full(k, estimate_kappa(rbar, d))
        variances = None
    else:
        means = kmeans_pp_seeds(X, k, rng, "euclidean")
        variances = np.tile(np.maximum(X.var(axis=0), VAR_FLOOR), (k, 1))
        kappas = None
    weights = np.full(k, 1.0 / k)

    history: list[float] = []
    rescues = 0
    for it in range(max_iter + 1):
        if kind == "vmf":
            lj = _vmf_log_joint(X, weights, means, kappas)
        else:
            lj = _gauss_log_joint(X, weights, means, variances)
        ll_rows = _logsumexp_rows(lj)
        resp = np.exp(lj - ll_rows[:, None])
        history.append(float(ll_rows.mean()))
        if len(history) > 1 and abs(history[-1] - history[-2]) < tol:
            break
        if it == max_iter:
            break

        if kind == "vmf":
            weights, means, kappas = _vmf_mstep(X, resp, means)
        else:
            weights, means, variances = _gauss_mstep(X, resp, means)

        starved = np.flatnonzero(weights < WEIGHT_FLOOR)
        for j in starved:
            rescues += 1
            if rescues > MAX_RESCUES:
                raise EmptyClusterCollapse(
                    f"component {j} collapsed after {MAX_RESCUES} rescues (k={k})")
            # restart the component at the worst-explained point
            worst = int(np.argmin(resp.max(axis=1)))
            means[j] = X[worst]
            weights[j] = 1.0 / n
            if kind == "vmf":
                kappas[j] = float(np.median(kappas))
            else:
                variances[j] = np.maximum(X.var(axis=0), VAR_FLOOR)
        if starved.size:
            weights = weights / weights.sum()

    return MixtureFit(kind, weights, means, kappas, variances, resp,
                      float(ll_rows.sum()), it, history, rescues)


def _fit(X, k, seed, tol, max_iter, n_init, kind) -> MixtureFit:
    n = X.shape[0]
    if k < 1 or n < k:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        fit = _run_em(X, k, rng, kind, tol, max_iter)
        if best is None or fit.log_likelihood > best.log_likelihood:
            best = fit
    return best


def fit_vmf_mixture(embeddings, k: int, seed: int = 0, tol: float = 1e-6,
                    max_iter: int = 500, n_init: int = 1) -> MixtureFit:
    """EM for a k-component von Mises-Fisher mixture on unit vectors.

    ``tol`` applies to the change in mean per-point log-likelihood. With
    ``n_init > 1`` the run with the highest final log-likelihood is kept.
    """
    X = np.asarray(embeddings, dtype=float)
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-6)
    if bad.size:
        raise NotUnitNorm(f"row {int(bad[0])} has norm {norms[bad[0]]:.8g}")
    return _fit(X, k, seed, tol, max_iter, n_init, "vmf")


def fit_gaussian_mixture(embeddings, k: int, seed: int = 0, tol: float = 1e-6,
                         max_iter: int = 500, n_init: int = 1) -> MixtureFit:
    """EM for a k-component Gaussian mixture with diagonal covariances."""
    X = np.asarray(embeddings, dtype=float)
    return _fit(X, k, seed, tol, max_iter, n_init, "gaussian")


def fit_mixture(embeddings, k, kind="vmf", **kwargs) -> MixtureFit:
    if kind == "vmf":
        return fit_vmf_mixture(embeddings, k, **kwargs)
    if kind == "gaussian":
        return fit_gaussian_mixture(embeddings, k, **kwargs)
    raise ValueError(f"unknown mixture kind {kind!r}")


# --- choosing k ------------------------------------------------------------------------

@dataclass(eq=False)
class KSelectionReport:
    """Pairwise log-rank p-values between clusters, for each k tried."""

    pvalues: dict[int, list[float]]
    omitted_pairs: dict[int, int]
    failures: dict[int, str] = field(default_factory=dict)
    chosen_k: int | None = None
    threshold: float = 0.01
    fits: dict[int, MixtureFit] = field(default_factory=dict, repr=False)

    def to_json(self) -> dict:
        return {
            "pvalues": {str(k): v for k, v in sorted(self.pvalues.items())},
            "omitted_pairs": {str(k): v for k, v in sorted(self.omitted_pairs.items())},
            "failures": {str(k): v for k, v in sorted(self.failures.items())},
            "chosen_k": self.chosen_k,
            "threshold": self.threshold,
        }

    @classmethod
    def from_json(cls, obj) -> "KSelectionReport":
        return cls({int(k): list(v) for k, v in obj["pvalues"].items()},
                   {int(k): int(v) for k, v in obj.get("omitted_pairs", {}).items()},
                   {int(k): v for k, v in obj.get("failures", {}).items()},
                   obj.get("chosen_k"), obj.get("threshold", 0.01))


def pairwise_logrank(assignments, time, event, k) -> tuple[list[float], int]:
    """p-values for every unordered pair of nonempty clusters, and the count skipped."""
    pvals, omitted = [], 0
    members = [np.flatnonzero(assignments == j) for j in range(k)]
    for a in range(k):
        for b in range(a + 1, k):
            ia, ib = members[a], members[b]
            if ia.size == 0 or ib.size == 0:
                omitted += 1
                continue
            try:
                pvals.append(logrank_test(time[ia], event[ia], time[ib], event[ib]).p_value)
            except NoEvents:
                omitted += 1
    return pvals, omitted


def knee_rule(pvalues: dict[int, list[float]], threshold: float = 0.01) -> int | None:
    """Largest k before the first k whose p-values exceed ``threshold``.

    Returns None when the very first k already exceeds it or no k does.
    """
    prev = None
    for k in sorted(pvalues):
        ps = pvalues[k]
        if ps and max(ps) > threshold:
            return prev
        prev = k
    return None


def k_sweep(embeddings, time, event, k_range=range(2, 9), kind="vmf", seed=0,
            n_init=5, tol=1e-6, max_iter=500, threshold=0.01) -> KSelectionReport:
    """Cluster for each k and collect pairwise log-rank p-values between clusters."""
    X = np.asarray(embeddings, dtype=float)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event)
    if time.shape[0] != X.shape[0] or event.shape[0] != X.shape[0]:
        raise ValueError("labels must be row-aligned with embeddings")
    pvalues, omitted, failures, fits = {}, {}, {}, {}
    for k in k_range:
        try:
            fit = fit_mixture(X, k, kind, seed=seed, tol=tol, max_iter=max_iter, n_init=n_init)
        except (EmptyClusterCollapse, ValueError) as exc:
            failures[k] = str(exc)
            continue
        fits[k] = fit
        pvalues[k], omitted[k] = pairwise_logrank(fit.assignments, time, event, k)
    return KSelectionReport(pvalues, omitted, failures, knee_rule(pvalues, threshold),
                            threshold, fits)
