"""Shared independent oracles for the test suite.

Everything here recomputes reference values through routes that do not share
code with the library internals under test: dense eigensolve sweeps over the
reduced phase domain, brute-force congruence search, rational arithmetic,
and moment expansions.
"""

import numpy as np
from hypothesis import settings

settings.register_profile("repeatable", derandomize=True, deadline=None)
settings.load_profile("repeatable")

TWO_PI = 2.0 * np.pi


def oracle_harper(p, q, beta, t1, t2):
    """Independent assembly of the Harper matrix at fixed phases."""
    j = np.arange(q)
    h = np.zeros((q, q), dtype=complex)
    h[j, j] = 2.0 * np.cos(t1 + TWO_PI * ((j * p) % q) / q)
    if q == 1:
        h[0, 0] += 2.0 * beta * np.cos(t2)
        return h
    hop = beta * np.exp(1j * t2)
    h[j, (j - 1) % q] += hop
    h[(j - 1) % q, j] += np.conj(hop)
    return h


def oracle_band_sweep(p, q, beta, n=32):
    """Dense eigensolve over an n x n grid of the reduced phase domain.

    The grid contains the extremal phases, so per-branch minima and maxima
    are exact band edges up to eigensolver roundoff.
    """
    t = TWO_PI * np.arange(n) / (n * q)
    vals = np.empty((n * n, q))
    k = 0
    for a in t:
        hs = np.zeros((n, q, q), dtype=complex)
        for i, b in enumerate(t):
            hs[i] = oracle_harper(p, q, beta, a, b)
        vals[k:k + n] = np.linalg.eigvalsh(hs)
        k += n
    lo = vals.min(axis=0)
    hi = vals.max(axis=0)
    return [(lo[i], hi[i]) for i in range(q)]


def oracle_ids_counting(p, q, beta, energy, n=64):
    """IDS by eigenvalue counting averaged over a dense reduced-domain grid."""
    t = TWO_PI * np.arange(n) / (n * q)
    total = 0
    for a in t:
        hs = np.zeros((n, q, q), dtype=complex)
        for i, b in enumerate(t):
            hs[i] = oracle_harper(p, q, beta, a, b)
        total += int(np.sum(np.linalg.eigvalsh(hs) < energy))
    return total / (n * n * q)


def oracle_moment(p, q, beta, power, n=48):
    """tau(h^power) from dense eigensolves."""
    t = TWO_PI * np.arange(n) / (n * q)
    total = 0.0
    for a in t:
        hs = np.zeros((n, q, q), dtype=complex)
        for i, b in enumerate(t):
            hs[i] = oracle_harper(p, q, beta, a, b)
        total += float(np.sum(np.linalg.eigvalsh(hs) ** power)) / q
    return total / (n * n)


def oracle_gap_label(j, p, q):
    """Brute-force search for the label integers over |n| <= q/2."""
    best = None
    for n in range(-(q // 2), q // 2 + 1):
        if (n * p - j) % q == 0:
            m = (j - n * p) // q
            if best is None or abs(n) < abs(best[1]) or (abs(n) == abs(best[1]) and n > best[1]):
                best = (m, n)
    return best


def interval_union_distance(a, b, samples=20001):
    """Hausdorff distance between interval unions by dense sampling plus edges."""
    pts = set()
    for lo, hi in list(a) + list(b):
        pts.add(lo)
        pts.add(hi)
    lo = min(pts)
    hi = max(pts)
    grid = np.linspace(lo, hi, samples)

    def dist_to(x, ivs):
        return min(0.0 if l <= x <= h else min(abs(x - l), abs(x - h)) for l, h in ivs)

    worst = 0.0
    for x in list(pts) + list(grid):
        if any(l <= x <= h for l, h in a):
            worst = max(worst, dist_to(x, b))
        if any(l <= x <= h for l, h in b):
            worst = max(worst, dist_to(x, a))
    return worst
