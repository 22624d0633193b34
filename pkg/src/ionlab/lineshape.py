"""Synthetic fluorescence scans and Lorentzian line fitting.

The model is a four-parameter Lorentzian

    y(x) = offset + amplitude * (G/2)^2 / ((x - center)^2 + (G/2)^2)

with G the full width at half maximum.  Negative amplitudes describe
fluorescence dips.  Fitting auto-seeds from the data (extremum position,
half-maximum span, edge-median offset), weights all points uniformly, and
reports residual-scaled parameter uncertainties plus an honest convergence
flag.  Wavemeter-style systematic uncertainty is carried as metadata on the
result and never folded into the statistical errors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

__all__ = [
    "ScanData",
    "LorentzianFit",
    "lorentzian",
    "synth_scan",
    "estimate_p0",
    "fit_lorentzian",
    "fit_to_dict",
    "write_scan_csv",
    "read_scan_csv",
]


@dataclass(frozen=True)
class ScanData:
    """A frequency scan: strictly increasing grid (MHz), counts, metadata."""
    frequency_mhz: np.ndarray
    counts: np.ndarray
    label: str = ""
    dwell_s: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "frequency_mhz", np.asarray(self.frequency_mhz, float))
        object.__setattr__(self, "counts", np.asarray(self.counts, float))
        if self.frequency_mhz.ndim != 1 or self.frequency_mhz.size == 0:
            raise ValueError("scan grid must be a non-empty 1-d array")
        if self.counts.shape != self.frequency_mhz.shape:
            raise ValueError("counts and grid shapes differ")
        if self.frequency_mhz.size > 1 and not np.all(np.diff(self.frequency_mhz) > 0):
            raise ValueError("scan frequencies must be strictly increasing")


@dataclass(frozen=True)
class LorentzianFit:
    center_mhz: float
    fwhm_mhz: float
    amplitude: float
    offset: float
    center_err: float
    fwhm_err: float
    amplitude_err: float
    offset_err: float
    converged: bool
    optimality: float
    residual_norm: float
    reduced_chi2: float
    message: str
    systematic_mhz: float | None = None


def lorentzian(x, center, fwhm, amplitude, offset):
    hw = 0.5 * fwhm
    return offset + amplitude * hw ** 2 / ((x - center) ** 2 + hw ** 2)


def synth_scan(center, fwhm, amplitude, offset, grid, noise_sigma=0.0, seed=0,
               label="", dwell_s=None):
    """Noisy Lorentzian scan on a sorted grid, deterministic per seed.

    Gaussian noise of standard deviation ``noise_sigma`` is added per point
    and the result is floored at zero, as photon counts cannot be negative.
    """
    x = np.asarray(grid, float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("scan grid must be a non-empty 1-d array")
    if fwhm <= 0:
        raise ValueError(f"fwhm must be positive, got {fwhm}")
    y = lorentzian(x, center, fwhm, amplitude, offset)
    if noise_sigma > 0:
        y = y + np.random.default_rng(seed).normal(0.0, noise_sigma, x.size)
    return ScanData(x, np.maximum(y, 0.0), label=label, dwell_s=dwell_s)


def estimate_p0(scan):
    """Starting parameters from the data: edge-median offset, extremum
    center/amplitude, half-maximum span width."""
    x, y = scan.frequency_mhz, scan.counts
    edge = max(1, x.size // 10)
    offset0 = float(np.median(np.concatenate([y[:edge], y[-edge:]])))
    dev = y - offset0
    ipk = int(np.argmax(np.abs(dev)))
    amp0 = float(dev[ipk])
    center0 = float(x[ipk])
    half = np.abs(dev) >= abs(amp0) / 2
    xs = x[half]
    span = float(x[-1] - x[0])
    fwhm0 = float(xs[-1] - xs[0]) if xs.size >= 2 else span / 4
    if fwhm0 <= 0:
        fwhm0 = max(span / 10, np.min(np.diff(x)) if x.size > 1 else 1.0)
    return center0, fwhm0, amp0, offset0


def fit_lorentzian(scan, p0=None, systematic_mhz=None):
    """Uniformly weighted least-squares Lorentzian fit of a scan.

    Parameters are seeded by :func:`estimate_p0` unless ``p0`` is given as
    (center, fwhm, amplitude, offset).  Uncertainties are residual-scaled
    (the noise level is estimated from the fit residuals).  A fit that stops
    without reaching the optimizer's gradient/step tolerances is returned
    with ``converged=False`` rather than raised.  ``systematic_mhz`` is
    attached to the result as-is; it never enters the statistical errors.
    """
    x, y = scan.frequency_mhz, scan.counts
    if x.size < 5:
        raise ValueError(f"need at least 5 scan points to fit 4 parameters, got {x.size}")
    if np.ptp(y) == 0.0:
        raise ValueError("flat scan: counts carry no line information")
    if p0 is None:
        p0 = estimate_p0(scan)
    span = float(np.max(x) - np.min(x))
    lo = [np.min(x) - span, 1e-9, -np.inf, -np.inf]
    hi = [np.max(x) + span, 100 * max(span, 1.0), np.inf, np.inf]
    p0 = np.clip(p0, lo, hi)

    def resid(p):
        return lorentzian(x, *p) - y

    res = least_squares(resid, p0, bounds=(lo, hi), method="trf", x_scale="jac",
                        xtol=1e-12, ftol=1e-12, gtol=1e-10, max_nfev=2000)
    dof = max(x.size - 4, 1)
    s2 = 2.0 * res.cost / dof
    # covariance from the Jacobian at the solution; singular -> no uncertainties
    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj) * s2
        errs = np.sqrt(np.clip(np.diag(cov), 0.0, np.inf))
    except np.linalg.LinAlgError:
        errs = np.full(4, np.nan)
    grad_scale = max(1.0, float(res.cost))
    converged = bool(res.status > 0 and res.optimality <= 1e-3 * grad_scale)
    c, w, a, o = res.x
    return LorentzianFit(
        center_mhz=float(c), fwhm_mhz=float(w), amplitude=float(a), offset=float(o),
        center_err=float(errs[0]), fwhm_err=float(errs[1]),
        amplitude_err=float(errs[2]), offset_err=float(errs[3]),
        converged=converged, optimality=float(res.optimality),
        residual_norm=float(np.sqrt(2.0 * res.cost)),
        reduced_chi2=float(s2), message=str(res.message),
        systematic_mhz=systematic_mhz,
    )


def fit_to_dict(fit):
    return {
        "center_mhz": fit.center_mhz, "center_err": fit.center_err,
        "fwhm_mhz": fit.fwhm_mhz, "fwhm_err": fit.fwhm_err,
        "amplitude": fit.amplitude, "amplitude_err": fit.amplitude_err,
        "offset": fit.offset, "offset_err": fit.offset_err,
        "converged": fit.converged, "optimality": fit.optimality,
        "residual_norm": fit.residual_norm, "reduced_chi2": fit.reduced_chi2,
        "message": fit.message, "systematic_mhz": fit.systematic_mhz,
        "weighting": "uniform",
    }


def write_scan_csv(path, scan):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_mhz", "counts"])
        for f, c in zip(scan.frequency_mhz, scan.counts):
            writer.writerow([format(f, ".12g"), format(c, ".12g")])


def read_scan_csv(path, label=""):
    freqs, counts = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["frequency_mhz", "counts"]:
            raise ValueError(f"bad scan header {header!r}; expected frequency_mhz,counts")
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValueError(f"line {lineno}: scan row needs 2 fields, got {row!r}")
            try:
                freqs.append(float(row[0]))
                counts.append(float(row[1]))
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric scan row {row!r}") from None
    if not freqs:
        raise ValueError("scan file contains no data rows")
    return ScanData(np.array(freqs), np.array(counts), label=label)
