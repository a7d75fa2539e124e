"""Gauge alignment, error norms, radial spectra and the noise-sweep harness."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateNormalizationError, EmptyFieldError, UnsupportedGridError
from .fields import ScalarSamples


@dataclass
class ReconstructionReport:
    method: str
    pressure: ScalarSamples
    gauge_offset: float = 0.0
    relative_mae: Optional[float] = None
    wall_time: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def summary(self):
        return {
            "method": self.method,
            "gauge_offset": self.gauge_offset,
            "relative_mae": self.relative_mae,
            "wall_time": self.wall_time,
            "diagnostics": self.diagnostics,
        }


def _vals(s):
    return s.values if isinstance(s, ScalarSamples) else np.asarray(s, float)


def _common_valid(recon, truth):
    r, t = _vals(recon), _vals(truth)
    ok = np.isfinite(r) & np.isfinite(t)
    for s in (recon, truth):
        if isinstance(s, ScalarSamples):
            ok &= s.points.valid
    return r, t, ok


def align_gauge(recon, truth):
    """Shift ``recon`` by ``mean(truth - recon)`` over jointly valid points."""
    r, t, ok = _common_valid(recon, truth)
    if not ok.any():
        raise EmptyFieldError("no overlapping valid samples for gauge alignment")
    offset = float(np.mean(t[ok] - r[ok]))
    aligned = r + offset
    if isinstance(recon, ScalarSamples):
        aligned = ScalarSamples(recon.points, aligned, recon.grid)
    return aligned, offset


def zero_mean(values, valid=None):
    v = np.asarray(values, float)
    ok = np.isfinite(v) if valid is None else (valid & np.isfinite(v))
    if not ok.any():
        return v.copy(), 0.0
    offset = -float(np.mean(v[ok]))
    return v + offset, offset


def relative_mae(recon, truth):
    """Mean absolute error over valid points divided by max |truth|."""
    r, t, ok = _common_valid(recon, truth)
    if not ok.any():
        raise EmptyFieldError("no overlapping valid samples")
    scale = float(np.max(np.abs(t[ok])))
    if scale == 0:
        raise DegenerateNormalizationError("ground truth is identically zero")
    return float(np.mean(np.abs(r[ok] - t[ok])) / scale)


def error_map(recon, truth):
    """Pointwise |recon - truth| / max |truth| (NaN where either is invalid)."""
    r, t, ok = _common_valid(recon, truth)
    out = np.full(len(r), np.nan)
    scale = float(np.max(np.abs(t[ok])))
    out[ok] = np.abs(r[ok] - t[ok]) / scale
    return out


# --- spectra ----------------------------------------------------------------

@dataclass
class SpectrumTable:
    k: np.ndarray
    truth_power: np.ndarray
    recon_power: Optional[np.ndarray] = None
    ratio: Optional[np.ndarray] = None
    amplitude_ratio: Optional[np.ndarray] = None

    def rows(self):
        for i in range(len(self.k)):
            yield {
                "k": float(self.k[i]),
                "truth_power": float(self.truth_power[i]),
                "recon_power": None if self.recon_power is None else float(self.recon_power[i]),
                "ratio": None if self.ratio is None else float(self.ratio[i]),
                "amplitude_ratio": None if self.amplitude_ratio is None else float(self.amplitude_ratio[i]),
            }


def _radial_bins(grid):
    # integer wavenumber index, i.e. cycles per domain length
    kx = np.fft.fftfreq(grid.nx) * grid.nx
    ky = np.fft.fftfreq(grid.ny) * grid.ny
    K = np.hypot(kx[None, :], ky[:, None])
    return np.rint(K).astype(int)


def radial_spectrum(field: ScalarSamples):
    """Power per integer radial wavenumber bin.

    Normalised so the bins sum to the mean square of the field (Parseval).
    Returns ``(k, power)``.
    """
    grid = field.grid
    if grid is None or not grid.periodic:
        raise UnsupportedGridError("radial_spectrum needs a periodic grid")
    F = np.fft.fft2(field.as_grid())
    power2d = np.abs(F) ** 2 / grid.size ** 2
    bins = _radial_bins(grid)
    power = np.bincount(bins.ravel(), weights=power2d.ravel())
    return np.arange(len(power)), power


def transfer_function(recon: ScalarSamples, truth: ScalarSamples, floor=1e-14) -> SpectrumTable:
    """Per-bin ratio of reconstruction power to truth power.

    Bins whose truth power is below ``floor`` times the total are NaN.
    """
    k, pt = radial_spectrum(truth)
    _, pr = radial_spectrum(recon)
    n = max(len(pt), len(pr))
    pt = np.pad(pt, (0, n - len(pt)))
    pr = np.pad(pr, (0, n - len(pr)))
    defined = pt >= floor * pt.sum()
    ratio = np.full(n, np.nan)
    if recon is truth:
        ratio[defined] = 1.0
    else:
        ratio[defined] = pr[defined] / pt[defined]
    return SpectrumTable(np.arange(n), pt, pr, ratio, np.sqrt(ratio))


# --- noise sweep ------------------------------------------------------------

def spearman(x, y):
    from scipy.stats import spearmanr

    rho = spearmanr(x, y).statistic
    return float(rho)


def noise_sweep(run_case, methods, levels=(0.0, 0.02, 0.04, 0.06, 0.08, 0.10), seeds=(0, 1, 2),
                executor=None):
    """Relative MAE of each method over noise levels and seeds.

    ``run_case(method, level, seed)`` returns a ReconstructionReport with the
    relative MAE filled in. Failures are recorded in the row, not raised.
    Returns ``(rows, summary)``; summary rows carry mean/min/max over seeds.
    """
    jobs = [(m, lv, s) for m in methods for lv in levels for s in seeds]

    def one(job):
        m, lv, s = job
        t0 = time.perf_counter()
        try:
            rep = run_case(m, lv, s)
            return {"method": m, "level": lv, "seed": s, "relative_mae": rep.relative_mae,
                    "wall_time": time.perf_counter() - t0, "error": None}
        except Exception as exc:  # recorded per row
            return {"method": m, "level": lv, "seed": s, "relative_mae": math.nan,
                    "wall_time": time.perf_counter() - t0, "error": f"{type(exc).__name__}: {exc}"}

    rows = list(executor.map(one, jobs)) if executor is not None else [one(j) for j in jobs]
    summary = []
    for m in methods:
        for lv in levels:
            vals = np.array([r["relative_mae"] for r in rows if r["method"] == m and r["level"] == lv])
            good = vals[np.isfinite(vals)]
            summary.append({
                "method": m, "level": lv, "n": int(len(good)),
                "mean": float(good.mean()) if len(good) else math.nan,
                "min": float(good.min()) if len(good) else math.nan,
                "max": float(good.max()) if len(good) else math.nan,
            })
    return rows, summary


def sweep_trend(summary, method):
    pts = [(r["level"], r["mean"]) for r in summary if r["method"] == method]
    lv, mae = zip(*pts)
    return spearman(lv, mae)
