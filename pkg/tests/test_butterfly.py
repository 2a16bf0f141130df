import numpy as np
import pytest

from harperlab import (RationalFrequency, butterfly_fractions, compute_butterfly,
                       hall_color, parse_dataset, persistence_sweep,
                       phi_cumulative, render, serialize_dataset, track_gap)
from conftest import oracle_band_sweep

F = RationalFrequency


def test_fraction_enumeration_order_and_count():
    fracs = butterfly_fractions(3)
    assert [(f.p, f.q) for f in fracs] == [(0, 1), (1, 1), (1, 2), (1, 3), (2, 3)]
    for order in (1, 5, 10):
        assert len(butterfly_fractions(order)) == phi_cumulative(order) + 1


def test_dataset_order_three_gap_counts():
    ds = compute_butterfly(3, 1.0)
    by_freq = {(r.freq.p, r.freq.q): r for r in ds.rows}
    opens = {k: sum(g.is_open for g in r.gaps) for k, r in by_freq.items()}
    assert opens[(0, 1)] == 0 and opens[(1, 1)] == 0
    assert opens[(1, 2)] == 0  # central touching
    assert opens[(1, 3)] == 2 and opens[(2, 3)] == 2
    # band intervals agree with the dense sweep oracle
    for (p, q), row in by_freq.items():
        for (lo, hi), (olo, ohi) in zip(row.bands, oracle_band_sweep(p, q, 1.0)):
            assert abs(lo - olo) <= 1e-8 and abs(hi - ohi) <= 1e-8


def test_dataset_order_one_trivial():
    ds = compute_butterfly(1, 0.5)
    assert len(ds.rows) == 2  # 0/1 and 1/1
    assert all(not r.gaps for r in ds.rows)


def test_worker_counts_byte_identical():
    a = serialize_dataset(compute_butterfly(6, 1.0, workers=1))
    b = serialize_dataset(compute_butterfly(6, 1.0, workers=2))
    assert a == b


def test_checkpoint_resume_byte_identical(tmp_path):
    ck = tmp_path / "state.json"
    full = serialize_dataset(compute_butterfly(6, 0.7))
    partial = compute_butterfly(6, 0.7, checkpoint_path=str(ck), max_completions=4)
    assert not partial.provenance["complete"]
    resumed = compute_butterfly(6, 0.7, checkpoint_path=str(ck))
    assert resumed.provenance["complete"]
    assert serialize_dataset(resumed) == full


def test_checkpoint_config_mismatch_is_ignored(tmp_path):
    ck = tmp_path / "state.json"
    compute_butterfly(4, 0.7, checkpoint_path=str(ck))
    ds = compute_butterfly(4, 0.9, checkpoint_path=str(ck))  # different coupling
    assert ds.provenance["complete"]
    fresh = serialize_dataset(compute_butterfly(4, 0.9))
    assert serialize_dataset(ds) == fresh


def test_serialize_parse_roundtrip():
    ds = compute_butterfly(5, 1.0)
    text = serialize_dataset(ds)
    back = parse_dataset(text)
    assert back.order == 5 and back.beta == 1.0
    orig = [(g.freq.p, g.freq.q, g.label, round(g.lo, 12)) for g in ds.gap_rows()]
    rtrip = [(g.freq.p, g.freq.q, g.label, round(g.lo, 12)) for g in back.gap_rows()]
    assert orig == rtrip


def test_render_svg_segment_count(tmp_path):
    ds = compute_butterfly(5, 1.0)
    out = tmp_path / "fly.svg"
    render(ds, str(out), size=(640, 480))
    text = out.read_text()
    n_bands = sum(len(r.bands) for r in ds.rows)
    assert text.count("<line") == n_bands
    # deterministic output
    out2 = tmp_path / "fly2.svg"
    render(ds, str(out2), size=(640, 480))
    assert out.read_text() == out2.read_text()


def test_render_band_rows_are_mirror_symmetric():
    ds = compute_butterfly(5, 1.0)
    for row in ds.rows:
        mirrored = sorted((-hi, -lo) for lo, hi in row.bands)
        for (a, b), (c, d) in zip(sorted(row.bands), mirrored):
            assert abs(a - c) <= 1e-10 and abs(b - d) <= 1e-10
        # opposite-sign hall labels mirror each other on open gaps (the
        # closed central record carries the +q/2 tie-break and is exempt)
        halls = sorted(g.hall for g in row.gaps if g.is_open)
        assert halls == sorted(-g.hall for g in row.gaps if g.is_open)


def test_render_ppm(tmp_path):
    ds = compute_butterfly(4, 0.8)
    out = tmp_path / "fly.ppm"
    render(ds, str(out), size=(160, 120), fmt="ppm")
    data = out.read_bytes()
    assert data.startswith(b"P6\n160 120\n255\n")
    assert len(data) == len(b"P6\n160 120\n255\n") + 3 * 160 * 120


def test_render_rejects_unknown_format(tmp_path):
    ds = compute_butterfly(3, 1.0)
    with pytest.raises(ValueError):
        render(ds, str(tmp_path / "x.png"), fmt="png")


def test_hall_color_palette():
    assert hall_color(0) == "#ffffff"
    assert hall_color(6) == "#ff0000"
    assert hall_color(-6) == "#0000ff"
    r_pos = int(hall_color(2)[1:3], 16)
    assert r_pos == 255


def test_persistence_sweep_golden_start():
    report = persistence_sweep([F(3, 5)], np.linspace(0.1, 1.0, 5), max_hall=2)
    assert report.all_open
    labels = sorted(t.label for t in report.tracks)
    assert labels == [(-1, 2), (0, 1), (1, -1), (2, -2)]


def test_persistence_sweep_excludes_central_touching():
    report = persistence_sweep([F(1, 2)], [0.4, 0.8], max_hall=1)
    # the only admissible label is the central one, always closed, never flagged
    assert report.all_open
    assert all(not any(t.open_flags) for t in report.tracks)


def test_single_point_sweep_matches_track():
    report = persistence_sweep([F(2, 5)], [0.6], max_hall=1)
    for t in report.tracks:
        direct = track_gap(t.label, F(2, 5), [0.6])
        assert direct.widths == t.widths


def test_row_failures_are_recorded_not_raised():
    from harperlab.butterfly import _row_payload
    payload = _row_payload((1, 3, -0.5, 1e-9))  # invalid coupling
    p, q, bands, gap_tuples, error = payload
    assert (p, q) == (1, 3)
    assert bands == () and gap_tuples == ()
    assert error and "ValueError" in error


def test_error_rows_serialize_as_comments():
    from harperlab.butterfly import FractionRow, ButterflyDataset
    ds = compute_butterfly(3, 1.0)
    rows = list(ds.rows)
    rows[2] = FractionRow(rows[2].freq, (), (), error="ValueError: synthetic")
    broken = ButterflyDataset(ds.beta, ds.order, tuple(rows), ds.min_width,
                              provenance=ds.provenance)
    text = serialize_dataset(broken)
    assert any(ln.startswith("# error,") for ln in text.splitlines())
    parse_dataset(text)  # error comments are skipped on re-read
