"""Shared builders for the test suite (independent of the code under test where it matters)."""
import functools

import numpy as np

FOUR_GROUP_MEANS = (2.0, 5.0, 8.0, 11.0)


def sample_vmf(mu, kappa, n, rng):
    """Wood's rejection sampler for the von Mises-Fisher distribution."""
    mu = np.asarray(mu, dtype=float)
    mu = mu / np.linalg.norm(mu)
    d = mu.size
    b = (-2 * kappa + np.sqrt(4 * kappa ** 2 + (d - 1) ** 2)) / (d - 1)
    x0 = (1 - b) / (1 + b)
    c = kappa * x0 + (d - 1) * np.log(1 - x0 ** 2)
    w = np.empty(n)
    for i in range(n):
        while True:
            z = rng.beta((d - 1) / 2, (d - 1) / 2)
            cand = (1 - (1 + b) * z) / (1 - (1 - b) * z)
            if kappa * cand + (d - 1) * np.log(1 - x0 * cand) - c >= np.log(rng.uniform()):
                w[i] = cand
                break
    v = rng.standard_normal((n, d))
    v -= np.outer(v @ mu, mu)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return w[:, None] * mu + np.sqrt(1 - w ** 2)[:, None] * v


def angle_deg(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    cos = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.degrees(np.arccos(np.clip(cos, -1, 1))))


def brute_concordance(risk, time, event):
    conc = tied = comp = 0
    n = len(risk)
    for i in range(n):
        for j in range(n):
            if event[i] and time[i] < time[j]:
                comp += 1
                if risk[i] > risk[j]:
                    conc += 1
                elif risk[i] == risk[j]:
                    tied += 1
    return conc, tied, comp


def brute_cox_loss(scores, time, event):
    total = 0.0
    for i in range(len(scores)):
        if event[i]:
            at_risk = [scores[j] for j in range(len(scores)) if time[j] >= time[i]]
            top = max(at_risk)
            total -= scores[i] - (top + np.log(sum(np.exp(s - top) for s in at_risk)))
    return total


@functools.lru_cache(maxsize=None)
def four_group_run(seed):
    """Synthetic 4-group data, a trained network, and anchor/visualization bundles."""
    from survanchor.coxnet import TrainConfig, encode_dataset, train
    from survanchor.data import SyntheticSpec, generate_synthetic, make_splits

    ds, labels = generate_synthetic(SyntheticSpec(means=FOUR_GROUP_MEANS, n_samples=4000, seed=seed))
    plan = make_splits(ds, seed=seed)
    cfg = TrainConfig(batch_sizes=(64,), learning_rates=(0.01,), layer_counts=(2,),
                      embedding_dims=(8,), seed=seed)
    model = train(ds, plan, cfg)
    anchor_rows, vis_rows = plan.indices("anchor"), plan.indices("visualization")
    return {
        "ds": ds, "labels": labels, "plan": plan, "model": model,
        "anchor": encode_dataset(model, ds, anchor_rows), "vis": encode_dataset(model, ds, vis_rows),
        "anchor_labels": labels[anchor_rows], "vis_labels": labels[vis_rows],
    }
