"""Double-indexed coefficient sheets of the resolvent and their relatives.

The numbers c(p, qe) = tau((h - z)^{-1} w(p, qe)) solve, at s = z, the
coupled pair of difference equations

    cos(pi a qe) (x[p+1,qe] + x[p-1,qe]) + b cos(pi a p) (x[p,qe+1] + x[p,qe-1]) = s x[p,qe]
    sin(pi a qe) (x[p+1,qe] - x[p-1,qe]) - b sin(pi a p) (x[p,qe+1] - x[p,qe-1]) = 0

at every index except the origin, where the resolvent identity leaves an
inhomogeneity of exactly 1.  The one-sided solutions supported in the
right/left sectors are generated by an explicit column march; their
symmetrized mean is the comparison sheet whose subtraction homogenizes c.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rationals import RationalFrequency, pi_fraction_trig
from .rotation import PhaseGrid
from .spectrum import band_edges, chambers
from .lyapunov import gradient

TWO_PI = 2.0 * np.pi

SIGN_CONVENTION = "resolvent (h-z)^-1; trace normalized; w(p;qe) = exp(-i pi a p qe) u^p v^qe"

SHEET_KINDS = ("c", "d", "phi", "R+", "R-")


@dataclass(frozen=True)
class CoefficientSheet:
    """Real window {(p, qe): |p|, |qe| <= window} of one coefficient family."""

    kind: str
    freq: RationalFrequency
    beta: float
    z: float
    window: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in SHEET_KINDS:
            raise ValueError(f"unknown sheet kind {self.kind!r}")
        n = 2 * self.window + 1
        if self.values.shape != (n, n):
            raise ValueError("values array does not match the window")

    def value(self, p: int, qe: int) -> float:
        P = self.window
        if abs(p) > P or abs(qe) > P:
            raise IndexError(f"({p}, {qe}) outside window {P}")
        return float(self.values[p + P, qe + P])

    def line(self, slope: int, offset: int):
        """Entries ((p, qe), value) along the lattice line qe = slope*p + offset."""
        if slope not in (1, -1):
            raise ValueError("slope must be +1 or -1")
        P = self.window
        out = []
        for p in range(-P, P + 1):
            qe = slope * p + offset
            if abs(qe) <= P:
                out.append(((p, qe), self.value(p, qe)))
        return out

    def to_csv(self) -> str:
        head = (f"# kind={self.kind},p_num={self.freq.p},q_den={self.freq.q},"
                f"beta={self.beta:.17g},z={self.z:.17g},P={self.window},"
                f"sign_convention={SIGN_CONVENTION!r}")
        lines = [head, "p,qe,value"]
        P = self.window
        for p in range(-P, P + 1):
            for qe in range(-P, P + 1):
                lines.append(f"{p},{qe},{self.values[p + P, qe + P]:.17g}")
        return "\n".join(lines) + "\n"


def coefficient_sheet(freq: RationalFrequency, beta: float, z: float, window: int = 12,
                      grid: PhaseGrid | None = None, imag_tol: float = 1e-10) -> CoefficientSheet:
    """The resolvent coefficient sheet at real z outside the spectrum.

    Works on the phase grid: one dense inverse per node, the q x q family of
    matrix traces against clock/shift powers, then a 2-d Fourier average to
    separate the window indices.  The default grid keeps the highest window
    harmonic far below the Nyquist bound, which is enforced.
    """
    if beta <= 0:
        raise ValueError("coupling must be positive")
    q = freq.q
    ch = chambers(freq, beta, verify=False)
    bands = band_edges(ch)
    if bands.distance(z) <= 0.0:
        raise ValueError(f"z={z} lies in the spectrum at {freq}, beta={beta}")
    if grid is None:
        grid = PhaseGrid.for_window(window, q)
    if min(grid.n1, grid.n2) < 2 * window + 2:
        raise ValueError(f"grid {grid.n1}x{grid.n2} is below the Nyquist bound "
                         f"for window {window}")
    n1, n2 = grid.n1, grid.n2
    t1, t2 = grid.nodes()
    j = np.arange(q)
    omega_pow = np.exp(2j * np.pi * ((np.outer(j, np.arange(q)) * freq.p) % q) / q)  # [j, m]

    # traces T[m, s, a, b] = (1/q) tr(R Omega^m Sigma^s) on the grid
    traces = np.zeros((q, q, n1, n2), dtype=complex)
    h = np.zeros((n2, q, q), dtype=complex)
    base_diag = 2.0 * np.cos(t1[:, None] + TWO_PI * ((j * freq.p) % q) / q)  # [a, j]
    hop_row = beta * np.exp(1j * t2)  # [b]
    for a in range(n1):
        h[:] = 0.0
        h[:, j, j] = base_diag[a]
        if q == 1:
            h[:, 0, 0] += 2.0 * beta * np.cos(t2)
        else:
            h[:, j, (j - 1) % q] += hop_row[:, None]
            h[:, (j - 1) % q, j] += np.conj(hop_row)[:, None]
        h[:, j, j] -= z
        R = np.linalg.inv(h)  # [b, q, q]
        for s in range(q):
            diag_s = R[:, (j - s) % q, j]  # [b, k]
            traces[:, s, a, :] = (diag_s @ omega_pow).T / q  # [m, b]
    phases1 = np.exp(1j * np.outer(np.arange(-window, window + 1), t1)) / n1
    phases2 = np.exp(1j * np.outer(np.arange(-window, window + 1), t2)) / n2
    vals = np.zeros((2 * window + 1, 2 * window + 1), dtype=complex)
    for ip, p in enumerate(range(-window, window + 1)):
        for iq, qe in enumerate(range(-window, window + 1)):
            t = traces[p % q, qe % q]
            c, s = pi_fraction_trig(-p * qe * freq.p, q)
            vals[ip, iq] = complex(c, s) * (phases1[ip] @ t @ phases2[iq])
    worst_imag = float(np.max(np.abs(vals.imag)))
    if worst_imag > imag_tol:
        raise ArithmeticError(f"sheet entries should be real; worst imaginary part {worst_imag:.3e}")
    return CoefficientSheet("c", freq, float(beta), float(z), window, vals.real.copy())


@dataclass(frozen=True)
class SystemResidual:
    """Worst-case residual of the two difference equations over the window."""

    max_residual: float
    origin_inhomogeneity: float | None
    n_points: int


def system_residual(sheet: CoefficientSheet, beta: float, s: float,
                    include_origin: bool | None = None) -> SystemResidual:
    """Evaluate both equations at all interior window indices.

    For the inhomogeneous families (kinds c, d, R+, R-) the origin row is
    excluded from the residual and its inhomogeneity, which should equal 1,
    is reported separately; the homogenized sheet is checked everywhere.
    """
    if include_origin is None:
        include_origin = sheet.kind == "phi"
    P = sheet.window
    x = sheet.values
    q = sheet.freq.q
    pf = sheet.freq.p
    worst = 0.0
    origin = None
    count = 0
    for p in range(-P + 1, P):
        cp, sp = pi_fraction_trig(pf * p, q)
        for qe in range(-P + 1, P):
            cq, sq = pi_fraction_trig(pf * qe, q)
            e1 = (cq * (x[p + 1 + P, qe + P] + x[p - 1 + P, qe + P])
                  + beta * cp * (x[p + P, qe + 1 + P] + x[p + P, qe - 1 + P])
                  - s * x[p + P, qe + P])
            e2 = (sq * (x[p + 1 + P, qe + P] - x[p - 1 + P, qe + P])
                  - beta * sp * (x[p + P, qe + 1 + P] - x[p + P, qe - 1 + P]))
            if p == 0 and qe == 0:
                origin = e1
                if not include_origin:
                    e1 = 0.0
            worst = max(worst, abs(e1), abs(e2))
            count += 1
    return SystemResidual(worst, origin, count)


def recursion_sheets(freq: RationalFrequency, beta: float, z: float, window: int = 12):
    """The two one-sided solutions (right sector, left sector).

    March column by column in p.  At each target entry the two equations
    form an orthonormal-coefficient pair in the single unknown x[p+1, qe],
    so the least-squares update

        x[p+1,qe] = cos(t_qe) RA + sin(t_qe) RB - cos(2 t_qe) x[p-1,qe]

    is exact wherever the equations are consistent and glides through the
    axis degeneracies (where one of the sines or cosines vanishes) without
    division.  The seed column is forced by the equations at p = 0: only
    the origin-row exemption leaves x[1, 0] free, and the scale x[1,0] = 1
    makes the symmetrized mean satisfy the normalization d(1,0) = 1/2.
    The left solution is the mirror image, as the system is invariant under
    negating both indices.
    """
    if not 0 < beta < 1:
        raise ValueError(f"one-sided solutions need 0 < beta < 1, got {beta}")
    ch = chambers(freq, beta, verify=False)
    if band_edges(ch).distance(z) <= 0.0:
        raise ValueError(f"z={z} lies in the spectrum")
    P = window
    q, pf = freq.q, freq.p
    cols = np.zeros((P + 2, 2 * P + 3), dtype=np.longdouble)
    off = P + 1
    cols[1, off] = 1.0
    zl = np.longdouble(z)
    bl = np.longdouble(beta)
    for p in range(1, P + 1):
        cp, sp = pi_fraction_trig(pf * p, q)
        cpl, spl = np.longdouble(cp), np.longdouble(sp)
        for qe in range(-p, p + 1):
            cq, sq = pi_fraction_trig(pf * qe, q)
            cql, sql = np.longdouble(cq), np.longdouble(sq)
            ra = zl * cols[p, qe + off] - bl * cpl * (cols[p, qe + 1 + off] + cols[p, qe - 1 + off])
            rb = bl * spl * (cols[p, qe + 1 + off] - cols[p, qe - 1 + off])
            nxt = cql * ra + sql * rb - (cql * cql - sql * sql) * cols[p - 1, qe + off]
            if not np.isfinite(float(nxt)):
                raise ArithmeticError(f"recursion breakdown at column {p + 1}, row {qe}")
            cols[p + 1, qe + off] = nxt
    n = 2 * P + 1
    right = np.zeros((n, n))
    for p in range(1, P + 1):
        for qe in range(-P, P + 1):
            right[p + P, qe + P] = float(cols[p, qe + off])
    left = right[::-1, ::-1].copy()
    plus = CoefficientSheet("R+", freq, float(beta), float(z), P, right)
    minus = CoefficientSheet("R-", freq, float(beta), float(z), P, left)
    return plus, minus


def symmetrized_sheet(plus: CoefficientSheet, minus: CoefficientSheet) -> CoefficientSheet:
    """Arithmetic mean of the one-sided pair: supported on |qe| < |p|.

    With the unit seed this has value exactly 1/2 at (1, 0), is even under
    separate index negation, and decays at rate beta along the sector edges.
    """
    _check_match(plus, minus)
    if plus.kind != "R+" or minus.kind != "R-":
        raise ValueError("expected the (right, left) pair")
    vals = 0.5 * (plus.values + minus.values)
    return CoefficientSheet("d", plus.freq, plus.beta, plus.z, plus.window, vals)


def build_phi(c_sheet: CoefficientSheet, d_sheet: CoefficientSheet) -> CoefficientSheet:
    """Homogenized sheet c - d: solves the full system including the origin row."""
    _check_match(c_sheet, d_sheet)
    if c_sheet.kind != "c" or d_sheet.kind != "d":
        raise ValueError("expected a (c, d) pair")
    return CoefficientSheet("phi", c_sheet.freq, c_sheet.beta, c_sheet.z,
                            c_sheet.window, c_sheet.values - d_sheet.values)


def _check_match(a: CoefficientSheet, b: CoefficientSheet):
    if (a.freq, a.beta, a.z, a.window) != (b.freq, b.beta, b.z, b.window):
        raise ValueError("sheets disagree on (freq, beta, z, window)")


@dataclass(frozen=True)
class DecayEstimate:
    """Fitted exponential rate along one lattice line."""

    slope: int
    offset: int
    rho: float
    fit_residual: float
    n_points: int
    all_zero: bool = False


def decay_rate(sheet: CoefficientSheet, slope: int, offset: int,
               min_points: int = 4) -> DecayEstimate:
    """Least-squares fit of log|entry| against |p| along a lattice line.

    Exact zeros (support boundaries) are excluded; an all-zero line returns
    the rho = 0 sentinel.
    """
    entries = sheet.line(slope, offset)
    if not entries:
        raise ValueError(f"line (slope={slope}, offset={offset}) misses the window")
    pts = [(abs(p), abs(v)) for (p, _), v in entries if v != 0.0]
    if not pts:
        return DecayEstimate(slope, offset, 0.0, 0.0, 0, all_zero=True)
    if len(pts) < min_points:
        raise ValueError(f"only {len(pts)} nonzero points on line "
                         f"(slope={slope}, offset={offset}); need {min_points}")
    xs = np.array([p for p, _ in pts], dtype=float)
    ys = np.log(np.array([v for _, v in pts]))
    design = np.vstack([xs, np.ones_like(xs)]).T
    sol, *_ = np.linalg.lstsq(design, ys, rcond=None)
    resid = float(np.sqrt(np.mean((design @ sol - ys) ** 2)))
    return DecayEstimate(slope, offset, float(np.exp(sol[0])), resid, len(pts))


@dataclass(frozen=True)
class VanishingReport:
    c00: float
    c01: float
    threshold: float

    @property
    def both_vanish(self) -> bool:
        return abs(self.c00) <= self.threshold and abs(self.c01) <= self.threshold


def vanishing_probe(sheet: CoefficientSheet, threshold: float = 1e-8) -> VanishingReport:
    """Report the two origin-adjacent entries whose joint vanishing is forbidden."""
    return VanishingReport(sheet.value(0, 0), sheet.value(0, 1), threshold)


def vanishing_scan(freq: RationalFrequency, beta: float, gap, n_z: int = 41,
                   threshold: float = 1e-8):
    """min over a gap of max(|c00|, |c01|), via the reduced trace formulas.

    c00 = -dL/dz and c01 = g1, both computed without sheets, so the scan
    stays accurate arbitrarily close to the band edges.
    """
    ch = chambers(freq, beta, verify=False)
    lo, hi = float(gap.lo), float(gap.hi)
    pad = (hi - lo) * 1e-6
    zs = np.linspace(lo + pad, hi - pad, n_z)
    worst = np.inf
    argmin = None
    for z in zs:
        g = gradient(freq, beta, float(z), ch=ch, edge_distance=0.0)
        score = max(abs(g.g0), abs(g.g1))  # |c00| = |g0|
        if score < worst:
            worst, argmin = score, float(z)
    return {"freq": str(freq), "beta": beta, "j": gap.j, "min_of_max": worst,
            "at_z": argmin, "passes": worst > threshold}


def core_closure_check(freq: RationalFrequency, beta: float, z: float, window: int = 5):
    """Desk-scale uniqueness behind the forbidden-vanishing principle.

    Assemble the full system on a window with zero outer boundary plus the
    constraints x(0,0) = x(0,1) = x(0,-1) = 0, and measure the smallest
    singular value of the stacked operator.  A strictly positive value
    certifies that the only windowed solution with those vanishings is the
    zero sheet, so the constrained least-squares solution has every core
    entry at numerical zero; both numbers are returned.
    """
    P = window
    n = 2 * P + 1
    q, pf = freq.q, freq.p
    idx = {(p, qe): k for k, (p, qe) in enumerate(
        (p, qe) for p in range(-P, P + 1) for qe in range(-P, P + 1))}
    rows = []
    for p in range(-P + 1, P):
        cp, sp = pi_fraction_trig(pf * p, q)
        for qe in range(-P + 1, P):
            cq, sq = pi_fraction_trig(pf * qe, q)
            r1 = np.zeros(n * n)
            r1[idx[(p + 1, qe)]] += cq
            r1[idx[(p - 1, qe)]] += cq
            r1[idx[(p, qe + 1)]] += beta * cp
            r1[idx[(p, qe - 1)]] += beta * cp
            r1[idx[(p, qe)]] -= z
            rows.append(r1)
            r2 = np.zeros(n * n)
            r2[idx[(p + 1, qe)]] += sq
            r2[idx[(p - 1, qe)]] -= sq
            r2[idx[(p, qe + 1)]] -= beta * sp
            r2[idx[(p, qe - 1)]] += beta * sp
            rows.append(r2)
    # boundary ring and the vanishing hypotheses as hard rows
    for (p, qe), k in idx.items():
        if max(abs(p), abs(qe)) == P or (p, qe) in ((0, 0), (0, 1), (0, -1)):
            r = np.zeros(n * n)
            r[k] = 1.0
            rows.append(r)
    a = np.vstack(rows)
    smin = float(np.linalg.svd(a, compute_uv=False)[-1])
    sol, *_ = np.linalg.lstsq(a, np.zeros(len(rows)), rcond=None)
    core = sol.reshape(n, n)[P - 1:P + 2, P - 1:P + 2]
    return {"sigma_min": smin, "core_max": float(np.max(np.abs(core)))}
