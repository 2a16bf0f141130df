"""Farey sequences, totient sums, the equidistribution sum, component counts."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class FareySequence:
    """Reduced fractions of denominator <= order, listed in (0, 1]."""

    order: int
    fractions: tuple

    def __len__(self):
        return len(self.fractions)

    def neighbor_determinants(self):
        """b*c - a*d for consecutive a/b, c/d; equals 1 throughout."""
        out = []
        for f1, f2 in zip(self.fractions, self.fractions[1:]):
            out.append(f1.denominator * f2.numerator - f1.numerator * f2.denominator)
        return out


def farey(order: int) -> FareySequence:
    """Mediant walk through the Farey sequence of the given order."""
    if order < 1:
        raise ValueError("order must be >= 1")
    seq = []
    a, b, c, d = 0, 1, 1, order
    while c <= order:
        k = (order + b) // d
        a, b, c, d = c, d, k * c - a, k * d - b
        seq.append(Fraction(a, b))
    return FareySequence(order, tuple(seq))


def totients(n: int):
    """phi(1), ..., phi(n) by sieve."""
    phi = list(range(n + 1))
    for i in range(2, n + 1):
        if phi[i] == i:  # prime
            for k in range(i, n + 1, i):
                phi[k] -= phi[k] // i
    return phi[1:]


def phi_cumulative(n: int) -> int:
    """Sum of Euler's totient up to n; the length of the Farey sequence."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return sum(totients(n))


@dataclass(frozen=True)
class FranelRow:
    n: int
    total: Fraction

    @property
    def total_float(self) -> float:
        return float(self.total)

    @property
    def n_times_total(self) -> float:
        return self.n * float(self.total)


def franel_sum(n: int) -> FranelRow:
    """Sum of squared deviations of Farey fractions from uniform spacing.

    Exact rational arithmetic throughout; the trend of n * sum is the
    equidistribution diagnostic.
    """
    seq = farey(n).fractions
    count = len(seq)
    total = Fraction(0)
    for j, r in enumerate(seq, start=1):
        diff = r - Fraction(j, count)
        total += diff * diff
    return FranelRow(n, total)


def franel_table(n_max: int):
    return [franel_sum(n) for n in range(1, n_max + 1)]


@dataclass(frozen=True)
class ComponentCount:
    hall: int
    order: int
    beta: float
    predicted: int
    observed: int
    members: tuple


def component_count(dataset, hall: int) -> ComponentCount:
    """Observed connected gap components with a given positive Hall number.

    Two gaps at Farey-neighbor frequencies join when their energy intervals
    overlap, a linear-interpolation model of adjacency in the full fractal;
    the prediction for the untruncated picture is the cumulative totient
    Phi(2 hall).  Observed counts can only be at most the prediction and
    grow with the truncation order.
    """
    if hall < 1:
        raise ValueError("component counting applies to positive Hall numbers")
    predicted = phi_cumulative(2 * hall)
    rows = [row for row in dataset.rows if row.freq.q >= 2]
    rows.sort(key=lambda r: Fraction(r.freq.p, r.freq.q))
    nodes = {}
    for ridx, row in enumerate(rows):
        for g in row.gaps:
            if g.hall == hall and g.is_open:
                nodes[(ridx, g.j)] = None
    parent = {k: k for k in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[rx] = ry

    for ridx in range(len(rows) - 1):
        r1, r2 = rows[ridx], rows[ridx + 1]
        for g1 in r1.gaps:
            if g1.hall != hall or not g1.is_open:
                continue
            for g2 in r2.gaps:
                if g2.hall != hall or not g2.is_open:
                    continue
                if g1.lo <= g2.hi and g2.lo <= g1.hi:
                    union((ridx, g1.j), (ridx + 1, g2.j))
    comps = {}
    for key in nodes:
        comps.setdefault(find(key), []).append(key)
    members = tuple(tuple(sorted(v)) for v in
                    sorted(comps.values(), key=lambda v: sorted(v)[0]))
    return ComponentCount(hall, dataset.order, dataset.beta, predicted,
                          len(comps), members)
