import numpy as np
from scipy.stats import chi2


def meridian_points(d, thetas):
    """Points at geodesic distance theta from the first axis, along one meridian."""
    thetas = np.asarray(thetas, dtype=float)
    pts = np.zeros((thetas.size, d + 1))
    pts[:, 0] = np.cos(thetas)
    pts[:, 1] = np.sin(thetas)
    return pts


def gof_pvalue(dist, draws, cells=50):
    """Chi-square goodness of fit over the first `cells` support atoms plus a
    tail bucket; the pmf operation is the oracle."""
    support = np.array([n for n in range(10 * cells) if dist.in_support(n)][:cells])
    probs = np.array([dist.pmf(int(n)) for n in support])
    tail = 1.0 - probs.sum()
    pos = np.searchsorted(support, draws)
    pos = np.clip(pos, 0, cells - 1)
    in_cell = support[pos] == draws
    counts = np.bincount(pos[in_cell], minlength=cells).astype(float)
    observed = np.append(counts, np.count_nonzero(~in_cell))
    expected = len(draws) * np.append(probs, tail)
    keep = expected > 0
    stat = np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep])
    return chi2.sf(stat, df=keep.sum() - 1)
