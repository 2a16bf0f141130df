"""Batch computation and rendering of the Hofstadter butterfly.

One work unit is one reduced fraction; results are merged in (q, p) order
regardless of completion order, so the dataset is byte-identical across
worker counts and across checkpoint interruptions.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .rationals import RationalFrequency
from .numbertheory import farey
from .spectrum import (GAP_CSV_HEADER, GapRecord, band_edges, chambers, gaps,
                       label_to_index, track_gap)

FORMAT_VERSION = "1"


@dataclass(frozen=True)
class FractionRow:
    freq: RationalFrequency
    bands: tuple
    gaps: tuple
    error: str | None = None


@dataclass(frozen=True)
class ButterflyDataset:
    beta: float
    order: int
    rows: tuple
    min_width: float
    provenance: dict = field(default_factory=dict, compare=False)

    def gap_rows(self):
        for row in self.rows:
            yield from row.gaps


def butterfly_fractions(order: int):
    """0/1 plus the Farey fractions of the order, sorted by (q, p)."""
    fracs = [Fraction(0, 1)] + list(farey(order).fractions)
    fracs.sort(key=lambda f: (f.denominator, f.numerator))
    return [RationalFrequency(f.numerator, f.denominator) for f in fracs]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _row_payload(args):
    """Worker body: everything serializable, exceptions recorded not raised."""
    p, q, beta, min_width = args
    freq = RationalFrequency(p, q)
    try:
        bands = band_edges(chambers(freq, beta, verify=False))
        recs = gaps(freq, beta, min_width=min_width, band_set=bands)
        gap_tuples = [(g.j, g.lo, g.hi, g.label[0], g.label[1], g.is_open) for g in recs]
        return (p, q, tuple(map(tuple, bands.bands)), tuple(gap_tuples), None)
    except Exception as exc:  # per-fraction failures must not abort the batch
        return (p, q, (), (), f"{type(exc).__name__}: {exc}")


def _payload_to_row(payload, beta):
    p, q, bands, gap_tuples, error = payload
    freq = RationalFrequency(p, q)
    recs = []
    for j, lo, hi, m, n, is_open in gap_tuples:
        recs.append(GapRecord(freq, beta, j, lo, hi, Fraction(j, q), (m, n), n, is_open))
    return FractionRow(freq, tuple(tuple(b) for b in bands), tuple(recs), error)


def _config_digest(order, beta, min_width):
    text = json.dumps({"version": FORMAT_VERSION, "Q": order,
                       "beta": _fmt(beta), "min_width": _fmt(min_width)}, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def compute_butterfly(order: int, beta: float, workers: int = 1,
                      min_width: float = 1e-9, checkpoint_path: str | None = None,
                      checkpoint_every: int = 32,
                      max_completions: int | None = None) -> ButterflyDataset:
    """Band and gap rows for every reduced fraction up to the order.

    With a checkpoint path, completed rows are flushed atomically every
    `checkpoint_every` completions and reused on restart provided the
    configuration digest matches.  `max_completions` stops the batch early
    after that many fresh rows (an interruption hook for resume tests and
    budgeted runs).
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if beta <= 0:
        raise ValueError("coupling must be positive")
    freqs = butterfly_fractions(order)
    digest = _config_digest(order, beta, min_width)
    done: dict = {}
    if checkpoint_path and os.path.exists(checkpoint_path):
        with open(checkpoint_path) as fh:
            state = json.load(fh)
        if state.get("config") == digest:
            for payload in state.get("payloads", []):
                p, q, bands, gap_tuples, error = payload
                key = (p, q)
                done[key] = (p, q,
                             tuple(tuple(b) for b in bands),
                             tuple(tuple(g) for g in gap_tuples),
                             error)
    todo = [f for f in freqs if (f.p, f.q) not in done]
    if max_completions is not None:
        todo = todo[:max_completions]
    jobs = [(f.p, f.q, beta, min_width) for f in todo]
    fresh = 0

    def note(payload):
        nonlocal fresh
        done[(payload[0], payload[1])] = payload
        fresh += 1
        if checkpoint_path and (fresh % checkpoint_every == 0):
            _flush_checkpoint(checkpoint_path, digest, done)

    if workers <= 1:
        for job in jobs:
            note(_row_payload(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for payload in pool.map(_row_payload, jobs):
                note(payload)
    if checkpoint_path:
        _flush_checkpoint(checkpoint_path, digest, done)
    rows = tuple(_payload_to_row(done[(f.p, f.q)], float(beta))
                 for f in freqs if (f.p, f.q) in done)
    complete = len(rows) == len(freqs)
    return ButterflyDataset(float(beta), order, rows, min_width,
                            provenance={"config": digest, "complete": complete})


def _flush_checkpoint(path, digest, done):
    ordered = [done[k] for k in sorted(done)]
    _atomic_write(path, json.dumps({"config": digest, "payloads": ordered}))


def serialize_dataset(dataset: ButterflyDataset) -> str:
    head = (f"# version={FORMAT_VERSION},Q={dataset.order},beta={_fmt(dataset.beta)},"
            f"min_width={_fmt(dataset.min_width)},config={dataset.provenance.get('config', '')},"
            f"convention=farey-(0-1]-plus-zero,label_tiebreak=+q/2")
    lines = [head, GAP_CSV_HEADER]
    for row in dataset.rows:
        if row.error:
            lines.append(f"# error,{row.freq.p},{row.freq.q},{row.error}")
            continue
        for g in row.gaps:
            lines.append(g.csv_row())
    return "\n".join(lines) + "\n"


def parse_dataset(text: str) -> ButterflyDataset:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].lstrip("# ")
    meta = dict(kv.split("=", 1) for kv in head.split(","))
    order = int(meta["Q"])
    beta = float(meta["beta"])
    min_width = float(meta["min_width"])
    per_freq: dict = {}
    for ln in lines[2:]:
        if ln.startswith("#"):
            continue
        p, q, b, lo, hi, num, den, m, n, width = ln.split(",")
        freq = RationalFrequency(int(p), int(q))
        rec = GapRecord(freq, float(b), 0, float(lo), float(hi),
                        Fraction(int(num), int(den)), (int(m), int(n)), int(n),
                        float(width) > min_width)
        j = rec.ids_value.numerator * freq.q // rec.ids_value.denominator
        rec = GapRecord(freq, float(b), j, rec.lo, rec.hi, rec.ids_value,
                        rec.label, rec.hall, rec.is_open)
        per_freq.setdefault(freq, []).append(rec)
    rows = []
    for freq in butterfly_fractions(order):
        recs = tuple(per_freq.get(freq, ()))
        rows.append(FractionRow(freq, (), recs))
    return ButterflyDataset(beta, order, tuple(rows), min_width,
                            provenance={"config": meta.get("config", "")})


def hall_color(n: int, n_max: int = 6) -> str:
    """Signed diverging palette: blue for negative, red for positive Hall numbers."""
    t = max(-1.0, min(1.0, n / n_max))
    if t >= 0:
        r, g, b = 255, int(round(255 * (1 - t))), int(round(255 * (1 - t)))
    else:
        r, g, b = int(round(255 * (1 + t))), int(round(255 * (1 + t))), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def render(dataset: ButterflyDataset, path: str, size=(900, 600),
           fmt: str = "svg", color_by_hall: bool = True, gap_fill: bool = True):
    """Draw the dataset: one horizontal segment per band at height p/q.

    Gap rectangles are filled with the Hall palette when requested.  SVG is
    the primary target; PPM is the raster fallback.  Output is a pure
    function of the dataset and style.
    """
    if not dataset.rows:
        raise ValueError("empty dataset")
    if fmt == "svg":
        text = _render_svg(dataset, size, color_by_hall, gap_fill)
        with open(path, "w") as fh:
            fh.write(text)
    elif fmt == "ppm":
        with open(path, "wb") as fh:
            fh.write(_render_ppm(dataset, size, color_by_hall, gap_fill))
    else:
        raise ValueError(f"unsupported format {fmt!r}; use 'svg' or 'ppm'")
    return path


def _extent(dataset):
    lo = min((b[0] for row in dataset.rows for b in row.bands), default=-4.0)
    hi = max((b[1] for row in dataset.rows for b in row.bands), default=4.0)
    pad = 0.02 * (hi - lo)
    return lo - pad, hi + pad


def _render_svg(dataset, size, color_by_hall, gap_fill):
    width, height = size
    elo, ehi = _extent(dataset)

    def xpix(e):
        return (e - elo) / (ehi - elo) * width

    def ypix(alpha):
        return height - alpha * height

    stroke = max(1.0, height / (2.5 * dataset.order ** 2))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
           f'<!-- config={dataset.provenance.get("config", "")} Q={dataset.order} '
           f'beta={_fmt(dataset.beta)} -->']
    if gap_fill:
        for row in dataset.rows:
            y = ypix(row.freq.alpha)
            for g in row.gaps:
                if not g.is_open:
                    continue
                color = hall_color(g.hall) if color_by_hall else "#dddddd"
                out.append(f'<rect x="{xpix(g.lo):.2f}" y="{y - stroke:.2f}" '
                           f'width="{xpix(g.hi) - xpix(g.lo):.2f}" height="{2 * stroke:.2f}" '
                           f'fill="{color}"/>')
    for row in dataset.rows:
        y = ypix(row.freq.alpha)
        for lo, hi in row.bands:
            out.append(f'<line x1="{xpix(lo):.2f}" y1="{y:.2f}" x2="{xpix(hi):.2f}" '
                       f'y2="{y:.2f}" stroke="#000000" stroke-width="{stroke:.2f}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _render_ppm(dataset, size, color_by_hall, gap_fill):
    width, height = size
    elo, ehi = _extent(dataset)
    pixels = bytearray(b"\xff" * (3 * width * height))

    def paint(x0, x1, y, rgb):
        if y < 0 or y >= height:
            return
        a = max(0, min(width - 1, int(x0)))
        b = max(0, min(width - 1, int(x1)))
        base = 3 * y * width
        for x in range(a, b + 1):
            pixels[base + 3 * x:base + 3 * x + 3] = rgb

    def xpix(e):
        return (e - elo) / (ehi - elo) * (width - 1)

    rows = sorted(dataset.rows, key=lambda r: r.freq.alpha)
    for row in rows:
        y = int(round((1.0 - row.freq.alpha) * (height - 1)))
        if gap_fill:
            for g in row.gaps:
                if not g.is_open:
                    continue
                color = hall_color(g.hall) if color_by_hall else "#dddddd"
                rgb = bytes(int(color[i:i + 2], 16) for i in (1, 3, 5))
                paint(xpix(g.lo), xpix(g.hi), y, rgb)
        for lo, hi in row.bands:
            paint(xpix(lo), xpix(hi), y, b"\x00\x00\x00")
    return b"P6\n%d %d\n255\n" % (width, height) + bytes(pixels)


@dataclass(frozen=True)
class PersistenceReport:
    beta_grid: tuple
    tracks: tuple
    closure_flags: tuple  # (freq, label, beta) triples where an open label closed

    @property
    def all_open(self) -> bool:
        return not self.closure_flags


def persistence_sweep(freqs, beta_grid, max_hall: int = 3,
                      min_width: float = 1e-9) -> PersistenceReport:
    """Track every label with 0 < |n| <= max_hall across the coupling grid.

    The even-q central label (the permanently touching gap) is excluded from
    closure flagging; everything else must stay open at every coupling.
    """
    freqs = list(freqs)
    grid = tuple(float(b) for b in beta_grid)
    tracks = []
    flags = []
    for freq in freqs:
        labels = []
        for n in range(-max_hall, max_hall + 1):
            if n == 0:
                continue
            j = (n * freq.p) % freq.q
            if not 1 <= j <= freq.q - 1:
                continue
            m = (j - n * freq.p) // freq.q
            if abs(n) > freq.q / 2:
                continue
            labels.append((m, n))
        for label in sorted(set(labels)):
            j = label_to_index(label, freq)
            central = freq.q % 2 == 0 and j == freq.q // 2
            track = track_gap(label, freq, grid, min_width=min_width)
            tracks.append(track)
            if central:
                continue
            for b, ok in zip(grid, track.open_flags):
                if not ok:
                    flags.append((str(freq), label, b))
    return PersistenceReport(grid, tuple(tracks), tuple(flags))
