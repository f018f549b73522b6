"""Independent reference implementations used only by the tests.

Nothing here imports the package under test.  The BH and TreeBH oracles work
from the step-up definition (find the largest k with p_(k) <= k q / m) rather
than from the adjusted-p formula the package uses.
"""

from __future__ import annotations

import math

import mpmath


def bh_reject_bruteforce(pvals, q):
    """Indices rejected by BH at level q: the k smallest, k = max{i : p_(i) <= i q / m}."""
    m = len(pvals)
    order = sorted(range(m), key=lambda i: (pvals[i], i))
    k = 0
    for rank in range(1, m + 1):
        if pvals[order[rank - 1]] <= rank * q / m:
            k = rank
    return set(order[:k])


def bh_adjusted_scan(pvals):
    """BH adjusted p-values as the smallest level at which each index is rejected.

    Only levels of the form m p_j / k can change the rejection set, so scanning
    those (ascending) with the brute-force rule finds each index's threshold.
    """
    m = len(pvals)
    candidates = sorted({min(1.0, m * p / k) for p in pvals for k in range(1, m + 1)} | {1.0})
    out = [None] * m
    for level in candidates:
        # Nudge up so that float rounding in p <= k*level/m cannot miss the boundary.
        rej = bh_reject_bruteforce(pvals, level * (1 + 1e-12))
        for i in rej:
            if out[i] is None:
                out[i] = level
        if all(v is not None for v in out):
            break
    return [1.0 if v is None else v for v in out]


def simes_bruteforce(pvals):
    m = len(pvals)
    best = math.inf
    ordered = sorted(pvals)
    for i in range(1, m + 1):
        best = min(best, m * ordered[i - 1] / i)
    return best


def treebh_oracle(nodes, q, frac=1.0, parent_adj=0.0, tested=True, out=None):
    """Recursive TreeBH on nested dicts ``{"id", "p" (optional), "children"}``.

    Returns ``{id: (adjusted_p, rejected, tested, family_level)}``.
    """
    if out is None:
        out = {}

    def p_of(node):
        if node.get("p") is not None:
            return node["p"]
        return simes_bruteforce([p_of(c) for c in node["children"]])

    raw = [p_of(n) for n in nodes]
    level = q * frac
    rejected = bh_reject_bruteforce(raw, level) if tested else set()
    within = bh_adjusted_scan(raw)
    r, m = len(rejected), len(nodes)
    for i, node in enumerate(nodes):
        adj = min(1.0, max(within[i] / frac, parent_adj))
        rej = i in rejected
        out[node["id"]] = (adj, rej, tested, level)
        if node.get("children"):
            child_frac = frac * r / m if rej else frac
            treebh_oracle(node["children"], q, child_frac, adj, rej, out)
    return out


def normal_cdf_quad(z, dps=40):
    """Phi(z) by adaptive Gauss-Legendre quadrature of the normal density."""
    with mpmath.workdps(dps):
        z = mpmath.mpf(z)
        dens = lambda t: mpmath.exp(-t * t / 2) / mpmath.sqrt(2 * mpmath.pi)
        if z >= 0:
            return float(mpmath.mpf(1) / 2 + mpmath.quad(dens, [0, z]))
        return float(mpmath.quad(dens, [-mpmath.inf, z]))


def t_sf_quad(t, df, dps=30):
    """P(T > t) for Student's t by quadrature of its density."""
    with mpmath.workdps(dps):
        nu = mpmath.mpf(df)
        c = mpmath.gamma((nu + 1) / 2) / (mpmath.sqrt(nu * mpmath.pi) * mpmath.gamma(nu / 2))
        dens = lambda x: c * (1 + x * x / nu) ** (-(nu + 1) / 2)
        return float(mpmath.quad(dens, [t, mpmath.inf]))


def chi2_2x2_by_hand(a, b, c, d):
    n = a + b + c + d
    rows, cols = (a + b, c + d), (a + c, b + d)
    obs = ((a, b), (c, d))
    return sum((obs[i][j] - rows[i] * cols[j] / n) ** 2 / (rows[i] * cols[j] / n)
               for i in range(2) for j in range(2))
