import math

import numpy as np
import pytest

from pressrec.errors import DegenerateNormalizationError, EmptyFieldError, UnsupportedGridError
from pressrec.fields import CartesianGrid2, PointSet2, ScalarSamples, grid_scalar
from pressrec.metrics import (ReconstructionReport, align_gauge, error_map, noise_sweep, radial_spectrum,
                              relative_mae, sweep_trend, transfer_function)
from pressrec.pipeline import build_taylor_green_case, resolve_sweep_config, run_method, run_sweep


# --- gauge and error norms --------------------------------------------------

def test_align_examples():
    t = np.array([1.0, -2.0, 0.5, 3.0])
    aligned, off = align_gauge(t + 7.0, t)
    assert off == -7.0 and np.array_equal(aligned, t)
    aligned, off = align_gauge(t, t)
    assert off == 0.0


def test_align_with_noise_is_unbiased():
    rng = np.random.default_rng(0)
    n, sigma = 10_000, 0.2
    t = rng.uniform(-1, 1, n)
    _, off = align_gauge(t + rng.normal(0, sigma, n), t)
    assert abs(off) < 3 * sigma / math.sqrt(n)


def test_align_respects_masks_and_rejects_disjoint():
    pts = PointSet2(np.zeros((3, 2)), valid=[True, True, False])
    r = ScalarSamples(pts, [1.0, 2.0, 100.0])
    aligned, off = align_gauge(r, np.array([0.0, 1.0, 0.0]))
    assert off == -1.0 and isinstance(aligned, ScalarSamples)
    with pytest.raises(EmptyFieldError):
        align_gauge(np.array([np.nan, 1.0]), np.array([1.0, np.nan]))


def test_relative_mae_examples():
    t = np.array([-1.0, 1.0, 1.0, -1.0])
    assert relative_mae(t, t) == 0.0
    assert relative_mae(t + 0.1, t) == pytest.approx(0.1, rel=1e-14)
    with pytest.raises(DegenerateNormalizationError):
        relative_mae(t, np.zeros(4))


def test_relative_mae_is_gauge_invariant_after_alignment():
    rng = np.random.default_rng(1)
    t = rng.normal(size=200)
    r = t + rng.normal(scale=0.05, size=200)
    e0 = relative_mae(align_gauge(r, t)[0], t)
    e1 = relative_mae(align_gauge(r + 123.0, t)[0], t)
    assert e1 == pytest.approx(e0, rel=1e-10)


def test_error_map():
    t = np.array([2.0, -1.0, 0.0])
    r = np.array([2.5, -1.0, np.nan])
    e = error_map(r, t)
    assert e[0] == 0.25 and e[1] == 0.0 and np.isnan(e[2])


# --- spectra ----------------------------------------------------------------

def periodic(n=32):
    return CartesianGrid2(n, n, 1.0 / n, periodic=True)


def mode(g, kx, ky, amp=1.0, phase=0.0):
    P = g.points()
    return amp * np.sin(2 * np.pi * (kx * P.x + ky * P.y) + phase)


def test_single_mode_lands_in_its_bin():
    g = periodic()
    k, power = radial_spectrum(grid_scalar(g, mode(g, 3, 0)))
    assert np.argmax(power) == 3
    assert power[3] == pytest.approx(0.5, rel=1e-13)
    assert np.sum(np.delete(power, 3)) < 1e-28
    assert np.all(np.diff(k) > 0)


def test_constant_lands_in_bin_zero():
    g = periodic()
    _, power = radial_spectrum(grid_scalar(g, np.full(g.size, 2.0)))
    assert power[0] == pytest.approx(4.0) and np.sum(power[1:]) < 1e-28


def test_parseval_two_modes():
    g = periodic()
    a, b = mode(g, 2, 1, 1.3), mode(g, 0, 5, 0.7, 0.4)
    _, pa = radial_spectrum(grid_scalar(g, a))
    _, pb = radial_spectrum(grid_scalar(g, b))
    _, pab = radial_spectrum(grid_scalar(g, a + b))
    total = np.mean((a + b) ** 2)
    assert abs(pab.sum() - total) <= 1e-12 * total
    assert abs(pab.sum() - (pa.sum() + pb.sum())) <= 1e-12 * total


def test_spectrum_needs_periodic_grid():
    with pytest.raises(UnsupportedGridError):
        radial_spectrum(grid_scalar(CartesianGrid2(8, 8, 0.1), np.zeros(64)))


def _multi_mode(g, kmax=10, seed=0):
    rng = np.random.default_rng(seed)
    f = np.zeros(g.size)
    for kx in range(0, kmax + 1):
        for ky in range(-kmax, kmax + 1):
            if 0 < math.hypot(kx, ky) <= kmax:
                f += mode(g, kx, ky, rng.normal(), rng.uniform(0, 2 * np.pi))
    return f


def test_transfer_identity_is_exactly_one():
    g = periodic()
    truth = grid_scalar(g, _multi_mode(g))
    for recon in (truth, grid_scalar(g, np.array(truth.values))):
        tf = transfer_function(recon, truth)
        defined = ~np.isnan(tf.ratio)
        assert defined.any()
        assert np.all(tf.ratio[defined] == 1.0)


def test_transfer_of_doubled_field():
    g = periodic()
    f = _multi_mode(g)
    tf = transfer_function(grid_scalar(g, 2 * f), grid_scalar(g, f))
    defined = ~np.isnan(tf.ratio)
    assert np.allclose(tf.ratio[defined][1:], 4.0, rtol=1e-12)
    assert np.allclose(tf.amplitude_ratio[defined][1:], 2.0, rtol=1e-12)


def test_transfer_of_low_pass():
    g = periodic()
    f = _multi_mode(g)
    F = np.fft.fft2(f.reshape(g.shape))
    kx = np.fft.fftfreq(g.nx) * g.nx
    K = np.rint(np.hypot(kx[None, :], kx[:, None]))
    kc = 5
    low = np.real(np.fft.ifft2(np.where(K <= kc, F, 0)))
    tf = transfer_function(grid_scalar(g, low), grid_scalar(g, f))
    assert np.allclose(tf.ratio[1:kc + 1], 1.0, rtol=1e-10)
    above = tf.ratio[kc + 1:]
    assert np.all(above[~np.isnan(above)] < 1e-20)


# --- sweep harness ----------------------------------------------------------

def _fake_report(mae):
    return ReconstructionReport("x", ScalarSamples(PointSet2(np.zeros((1, 2))), [0.0]), relative_mae=mae)


def test_sweep_records_failures_per_row():
    def run_case(method, level, seed):
        if level == 0.5 and seed == 1:
            raise RuntimeError("boom")
        return _fake_report(level + 0.01 * seed)

    rows, summary = noise_sweep(run_case, ["a"], levels=(0.0, 0.5, 1.0), seeds=(0, 1))
    bad = [r for r in rows if r["error"]]
    assert len(bad) == 1 and "boom" in bad[0]["error"] and math.isnan(bad[0]["relative_mae"])
    mid = [s for s in summary if s["level"] == 0.5][0]
    assert mid["n"] == 1 and mid["mean"] == 0.5
    assert sweep_trend(summary, "a") == pytest.approx(1.0)


def test_sweep_level_zero_equals_noise_free_run():
    cfg = resolve_sweep_config({"case": {"kind": "taylor-green"}, "mesh": {"n": 24},
                                "methods": [{"name": "osmodi"}], "levels": [0.0, 0.1], "seeds": [0, 1]})
    rows, summary, trend = run_sweep(cfg)
    clean, _ = run_method(build_taylor_green_case(cfg), cfg["methods"][0])
    zero = [r["relative_mae"] for r in rows if r["level"] == 0.0]
    assert zero == [clean.relative_mae] * 2
    noisy = [s["mean"] for s in summary if s["level"] == 0.1][0]
    assert noisy > clean.relative_mae
    # reproducible given seeds
    assert [r["relative_mae"] for r in run_sweep(cfg)[0]] == [r["relative_mae"] for r in rows]
