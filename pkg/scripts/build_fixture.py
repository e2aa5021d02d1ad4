"""Rebuild the reconstructed 27-village township table.

Only group summaries of the township are known.  This script searches for a
table whose per-cluster means and sample SDs equal the cluster summaries
exactly (before rounding), whose ADV/SCV summaries sit close to the
administrative ones, and whose SGI-SREI correlation is near -0.58.  No two
villages may sit closer than a small Mahalanobis spacing.  Candidates are kept
only if Mahalanobis average-linkage clustering recovers the four clusters.

    python scripts/build_fixture.py [--seed N] [--tries N] [--write]
"""
import argparse
import csv
import sys
from pathlib import Path

import numpy as np
import torch
from scipy.optimize import minimize

from villagestress.classify import (StressMatrix, adjusted_rand_index, cluster_villages,
                                    lda_classify, lda_fit)
from villagestress.stats import anova_oneway, pearson_r

OUT = Path(__file__).resolve().parents[1] / "src" / "villagestress" / "data"

# (name, cluster, admin)
VILLAGES = [
    ("Zhangjiayuzi", 1, "ADV"), ("Yaowugou", 1, "SCV"), ("Xingdunzi", 1, "SCV"),
    ("Wazidi", 1, "ADV"),
    ("Bama", 2, "ADV"), ("Wangjia'anzi", 2, "ADV"), ("Shashandongtou", 2, "ADV"),
    ("Huangdungou", 2, "ADV"), ("Zhujiapo", 2, "ADV"), ("Huangcao'an", 2, "SCV"),
    ("Shuilianyu", 2, "ADV"),
    ("Xinan'guanzhuang", 3, "SCV"), ("Dongchipuo", 3, "ADV"), ("Aishandong", 3, "SCV"),
    ("Changshanzhuang", 4, "SCV"), ("Shuangquanyuzi", 4, "SCV"), ("Dongliugou", 4, "ADV"),
    ("Shangliugou", 4, "ADV"), ("Cuijiazhuang", 4, "SCV"), ("Dongjiazhuang", 4, "ADV"),
    ("Henghe", 4, "SCV"), ("Yezhuwang", 4, "ADV"), ("Wanliuzhuang", 4, "ADV"),
    ("Liujiachengzi", 4, "SCV"), ("Mamuchi", 4, "SCV"), ("Xiaohuoling", 4, "ADV"),
    ("Xibeiguanzhuang", 4, "SCV"),
]

# cluster -> per-indicator (mean, sd), indicator order SGI, SREI, WI, AII
CLUSTER_SUMMARY = {
    1: [(0.512, 0.181), (0.370, 0.162), (0.575, 0.075), (0.158, 0.045)],
    2: [(0.594, 0.237), (0.458, 0.180), (0.569, 0.050), (0.463, 0.108)],
    3: [(0.013, 0.012), (0.873, 0.033), (0.557, 0.051), (0.324, 0.062)],
    4: [(0.262, 0.212), (0.730, 0.149), (0.695, 0.061), (0.292, 0.117)],
}
ADMIN_SUMMARY = {
    "ADV": [(0.450, 0.311), (0.578, 0.229), (0.595, 0.067), (0.394, 0.151)],
    "SCV": [(0.242, 0.165), (0.677, 0.219), (0.673, 0.090), (0.248, 0.117)],
}
ADMIN_F_BAND = [(5.0, 1e9), (0.0, 2.5), (5.0, 1e9), (5.0, 1e9)]
TARGET_R = {(0, 1): -0.5816, (1, 2): 0.328, (0, 3): 0.258}
WEIGHTS = (0.0, 0.001, 0.003, 0.01, 0.02, 0.05, 0.1, 0.2)
MIN_SPACING = 0.3
BOUNDS = [(0.0, 1.0), (0.0, 1.0), (0.3, 1.0), (0.0, 1.0)]

clusters = np.array([c for _, c, _ in VILLAGES])
admin = np.array([a for _, _, a in VILLAGES])


def project(z):
    """Rescale each cluster block to the target per-cluster mean and SD."""
    out = torch.empty_like(z)
    for c, summary in CLUSTER_SUMMARY.items():
        rows = torch.as_tensor(clusters == c)
        block = z[rows]
        block = (block - block.mean(dim=0)) / block.std(dim=0, unbiased=True)
        stats = torch.tensor(summary, dtype=z.dtype)
        out[rows] = stats[:, 0] + stats[:, 1] * block
    return out


def corr(a, b):
    a = a - a.mean()
    b = b - b.mean()
    return (a @ b) / torch.sqrt((a @ a) * (b @ b))


def mahalanobis(x):
    xc = x - x.mean(dim=0)
    prec = torch.linalg.inv(xc.T @ xc / (len(x) - 1))
    diff = x[:, None, :] - x[None, :, :]
    return torch.sqrt(torch.einsum("ijk,kl,ijl->ij", diff, prec, diff) + 1e-12)


def crowding(x, floor=MIN_SPACING):
    # push apart villages that sit closer than the floor (no duplicated rows)
    d = mahalanobis(x)[torch.triu_indices(len(x), len(x), 1).unbind()]
    return (torch.clamp(floor - d, min=0.0) ** 2).sum()


def separation(x, tau=20.0, margin=0.0):
    # smooth "largest within-cluster distance below smallest between-cluster distance"
    d = mahalanobis(x)
    total = x.new_zeros(())
    for c in CLUSTER_SUMMARY:
        own = torch.as_tensor(clusters == c)
        m = int(own.sum())
        intra = d[own][:, own][torch.triu_indices(m, m, 1).unbind()]
        inter = d[own][:, ~own].reshape(-1)
        smax = torch.logsumexp(tau * intra, 0) / tau
        smin = -torch.logsumexp(-tau * inter, 0) / tau
        total = total + torch.clamp(smax - smin + margin, min=0.0) ** 2
    return total


def two_group_f(a, b):
    na, nb = len(a), len(b)
    grand = (a.sum() + b.sum()) / (na + nb)
    between = na * (a.mean() - grand) ** 2 + nb * (b.mean() - grand) ** 2
    within = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
    return between / (within / (na + nb - 2))


def fit_loss(x):
    total = x.new_zeros(())
    adv = torch.as_tensor(admin == "ADV")
    for label, summary in ADMIN_SUMMARY.items():
        rows = torch.as_tensor(admin == label)
        for j, (_, s) in enumerate(summary):
            total = total + 4.0 * (x[rows, j].std(unbiased=True) - s) ** 2
    # only the ADV-SCV gap is reachable for every indicator (the AII grand means differ)
    for j in range(4):
        gap = x[adv, j].mean() - x[~adv, j].mean()
        want = ADMIN_SUMMARY["ADV"][j][0] - ADMIN_SUMMARY["SCV"][j][0]
        total = total + 10.0 * (gap - want) ** 2
    # keep the administrative F statistics clear of the p = 0.05 cut-off
    for j, (lo, hi) in enumerate(ADMIN_F_BAND):
        f = two_group_f(x[adv, j], x[~adv, j])
        total = total + torch.clamp(lo - f, min=0) ** 2 + torch.clamp(f - hi, min=0) ** 2
    for (i, j), r in TARGET_R.items():
        total = total + 0.5 * (corr(x[:, i], x[:, j]) - r) ** 2
    for j, (lo, hi) in enumerate(BOUNDS):
        total = total + 50.0 * (torch.clamp(lo - x[:, j], min=0) ** 2).sum()
        total = total + 50.0 * (torch.clamp(x[:, j] - hi, min=0) ** 2).sum()
    return total


def objective(weight):
    def f(flat):
        z = torch.tensor(flat.reshape(27, 4), dtype=torch.float64, requires_grad=True)
        x = project(z)
        value = fit_loss(x) + 5.0 * crowding(x)
        if weight:
            value = value + weight * separation(x)
        value.backward()
        return float(value.detach()), z.grad.numpy().ravel().copy()
    return f


LO, HI = np.array(BOUNDS).T


def raw(flat):
    with torch.no_grad():
        return project(torch.tensor(flat.reshape(27, 4), dtype=torch.float64)).numpy()


def realize(flat):
    # the bound penalty is soft; clip the last few 1e-4 after rounding
    return np.clip(np.round(raw(flat), 4), LO, HI)


def bound_excess(flat):
    x = raw(flat)
    return max(0.0, (LO - x).max(), (x - HI).max())


def evaluate(x):
    m = StressMatrix([f"V{i + 1:02d}" for i in range(27)], x, tuple(admin))
    cl = cluster_villages(m)
    labels = cl.cut(4).labels
    ari = adjusted_rand_index(clusters, labels)
    acc = lda_classify(lda_fit(m)).correct
    admin_stars = [anova_oneway([x[admin == a, j] for a in ("ADV", "SCV")]).p < 0.05
                   for j in range(4)]
    return ari, acc, admin_stars, pearson_r(x[:, 0], x[:, 1]), (x[:, 3] >= 0.36).mean()


def min_spacing(x):
    with torch.no_grad():
        d = mahalanobis(torch.as_tensor(x, dtype=torch.float64)).numpy()
    return d[np.triu_indices(len(x), 1)].min()


def score(x):
    """Lower is better; None when a hard requirement fails."""
    ari, acc, stars, r, share = evaluate(x)
    if ari != 1.0 or stars != [True, False, True, True] or abs(r + 0.5816) > 0.05:
        return None
    if min_spacing(x) < 0.5 * MIN_SPACING:
        return None
    return abs(r + 0.5816) + 0.02 * abs(acc - 20) + 0.1 * abs(share - 0.68)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tries", type=int, default=30)
    ap.add_argument("--write", action="store_true")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    best = None
    for attempt in range(args.tries):
        flat = rng.normal(size=108)
        # raise the separation weight until average linkage recovers the clusters
        for weight in WEIGHTS:
            flat = minimize(objective(weight), flat, jac=True, method="L-BFGS-B",
                            options={"maxiter": 5000}).x
            x = realize(flat)
            ari, acc, stars, r, share = evaluate(x)
            if ari == 1.0:
                break
        s = score(x) if bound_excess(flat) <= 1e-3 else None
        print(f"try {attempt} w={weight}: ari={ari:.3f} lda={acc}/27 admin_sig={stars} "
              f"r={r:.4f} aii>=0.36={share:.2f} spacing={min_spacing(x):.3f} "
              f"excess={bound_excess(flat):.1e} score={s}", file=sys.stderr)
        if s is not None and (best is None or s < best[0]):
            best = (s, x)
    if best is None:
        sys.exit("no acceptable candidate found")
    if args.write:
        write(best[1])


def write(x):
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "township27.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "name", "admin_category", "sgi", "srei", "wi", "aii"])
        for i, (name, _, a) in enumerate(VILLAGES):
            w.writerow([f"V{i + 1:02d}", name, a] + [f"{v:.4f}" for v in x[i]])
    with open(OUT / "township27_clusters.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["village_id", "cluster"])
        for i, (_, c, _) in enumerate(VILLAGES):
            w.writerow([f"V{i + 1:02d}", c])


if __name__ == "__main__":
    main()
