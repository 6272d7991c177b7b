"""Independent reference implementations used to pin expected values.

Everything here is deliberately written from the textbook definitions using
different machinery than the package (scipy t quantiles, direct DFT sums,
set-based range arithmetic, list-based Rosner deletion) so agreement is
evidence, not tautology.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy import stats as sps


def rosner_esd(values, alpha: float = 0.05, max_outliers: int | None = None) -> set[int]:
    """Rosner's generalized ESD via scipy t quantiles and list deletion."""
    values = list(map(float, values))
    n = len(values)
    if max_outliers is None:
        max_outliers = max(1, math.ceil(0.02 * n))
    max_outliers = min(max_outliers, n - 2)
    data = list(enumerate(values))
    stats_r = []
    candidates = []
    for _ in range(max_outliers):
        vals = np.array([v for _, v in data])
        m = vals.mean()
        s = vals.std(ddof=1)
        if s == 0:
            break
        devs = np.abs(vals - m)
        pos = int(np.argmax(devs))
        stats_r.append(devs[pos] / s)
        candidates.append(data[pos][0])
        del data[pos]
    found = 0
    for i in range(len(stats_r), 0, -1):
        p = 1.0 - alpha / (2.0 * (n - i + 1))
        t = sps.t.ppf(p, n - i - 1)
        lam = (n - i) * t / math.sqrt((n - i - 1 + t * t) * (n - i + 1))
        if stats_r[i - 1] > lam:
            found = i
            break
    return set(candidates[:found])


def sr_saliency_direct(window, q: int = 3, eps: float = 1e-8) -> list[float]:
    """Spectral-residual saliency by explicit DFT sums (no FFT library)."""
    N = len(window)
    forward = [
        sum(window[t] * cmath.exp(-2j * cmath.pi * f * t / N) for t in range(N))
        for f in range(N)
    ]
    amp = [abs(z) for z in forward]
    ph = [cmath.phase(z) for z in forward]
    la = [math.log(a + eps) for a in amp]
    pad = q // 2
    padded = [la[0]] * pad + la + [la[-1]] * pad
    smooth = [sum(padded[i : i + q]) / q for i in range(N)]
    spectrum = [cmath.exp(la[i] - smooth[i] + 1j * ph[i]) for i in range(N)]
    return [
        abs(sum(spectrum[f] * cmath.exp(2j * cmath.pi * f * t / N) for f in range(N)) / N)
        for t in range(N)
    ]


def brute_lof(train: np.ndarray, queries: np.ndarray, k: int,
              floor: float = 1e-12) -> np.ndarray:
    """Textbook novelty LOF from the definitions, nested loops throughout."""
    train = np.asarray(train, dtype=float)
    queries = np.asarray(queries, dtype=float)
    T = train.shape[0]

    def dist(a, b):
        return max(math.sqrt(float(((a - b) ** 2).sum())), floor)

    def neighbors_of_train(i):
        ds = sorted((dist(train[i], train[j]), j) for j in range(T) if j != i)
        return ds[:k]

    k_dist = {}
    nbrs = {}
    for i in range(T):
        ds = neighbors_of_train(i)
        k_dist[i] = ds[-1][0]
        nbrs[i] = [j for _, j in ds]

    def lrd_train(i):
        reach = [max(k_dist[j], dist(train[i], train[j])) for j in nbrs[i]]
        return 1.0 / (sum(reach) / len(reach))

    lrd = {i: lrd_train(i) for i in range(T)}

    out = np.empty(queries.shape[0])
    for qi in range(queries.shape[0]):
        ds = sorted((dist(queries[qi], train[j]), j) for j in range(T))
        knn = ds[:k]
        reach = [max(k_dist[j], d) for d, j in knn]
        lrd_q = 1.0 / (sum(reach) / len(reach))
        lof = sum(lrd[j] for _, j in knn) / len(knn) / lrd_q
        out[qi] = max(lof - 1.0, 0.0)
    return out


def finite_difference_grads(loss_fn, params: dict[str, np.ndarray],
                            h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central differences of ``loss_fn()`` wrt every entry of ``params``.

    ``loss_fn`` must read the (mutated in place) ``params`` dict.
    """
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gf[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def gradient_relative_error(analytic: dict, numeric: dict) -> float:
    """Worst per-tensor relative error, norm-based."""
    worst = 0.0
    for name in analytic:
        a = np.asarray(analytic[name]).ravel()
        n = np.asarray(numeric[name]).ravel()
        denom = max(np.linalg.norm(a) + np.linalg.norm(n), 1e-8)
        worst = max(worst, float(np.linalg.norm(a - n) / denom))
    return worst


def brute_ranges(binary) -> list[list[int]]:
    sets, cur = [], []
    for i, v in enumerate(binary):
        if v:
            cur.append(i)
        elif cur:
            sets.append(cur)
            cur = []
    if cur:
        sets.append(cur)
    return sets


def brute_range_recall(real_binary, pred_binary, alpha: float = 0.0) -> float:
    """Range recall from set arithmetic over index sets."""
    real_rs = brute_ranges(real_binary)
    pred_union = {i for r in brute_ranges(pred_binary) for i in r}
    if not real_rs:
        return 1.0
    total = 0.0
    for r in real_rs:
        hit = set(r) & pred_union
        existence = 1.0 if hit else 0.0
        overlap = len(hit) / len(r)
        total += alpha * existence + (1.0 - alpha) * overlap
    return total / len(real_rs)


def brute_range_precision(real_binary, pred_binary) -> float:
    return brute_range_recall(pred_binary, real_binary, alpha=0.0)


def brute_best_range_f1(scores, truth_binary, thresholds: int = 100,
                        alpha: float = 0.0):
    """Threshold sweep with the same grid contract, set-based metrics."""
    scores = np.asarray(scores, dtype=float)
    lo, hi = float(scores.min()), float(scores.max())
    if hi <= lo:
        return 0.0, lo, 0.0, 0.0
    best = (0.0, lo, 0.0, 0.0)
    have_best = False
    for i in range(1, thresholds + 1):
        theta = lo + (hi - lo) * (i / (thresholds + 1))
        pred = (scores >= theta).astype(int)
        p = brute_range_precision(truth_binary, pred)
        r = brute_range_recall(truth_binary, pred, alpha=alpha)
        f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        if not have_best or f1 > best[0]:
            best = (f1, theta, p, r)
            have_best = True
    return best
