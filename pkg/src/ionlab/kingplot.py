"""Two-branch isotope-shift analysis: normalized-shift linearity and
field/mass-shift decomposition.

A shift of branch i between isotopes A and A' decomposes as

    dnu_i = k_i (1/A - 1/A') + F_i * d<r^2>

so shifts of the two branches, normalized per isotope pair, fall on a straight
line whose slope is the ratio of field-shift coefficients.  Two normalization
conventions are supported:

    mass-difference : dnu / (A - A_ref)
    inverse-mass    : dnu / (1/A - 1/A_ref)

Main API
--------
normalized_shift(a, branch, convention)
king_points(...) / fit_king_line(points)
invert_field_shift(dnu, pair, model)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from . import spectra

__all__ = [
    "CONVENTIONS",
    "KingPoint",
    "KingFit",
    "FieldShiftModel",
    "DEFAULT_FIELD_SHIFT",
    "normalized_shift",
    "king_points",
    "fit_king_line",
    "inverse_mass_difference",
    "mass_term",
    "invert_field_shift",
    "field_shift_forward",
    "fit_report",
    "inversion_report",
    "write_points_csv",
]

CONVENTIONS = ("mass-difference", "inverse-mass")


@dataclass(frozen=True)
class KingPoint:
    """One isotope's pair of normalized shifts (x: b branch, y: r branch)."""
    a: int
    x: float
    y: float
    weight: float = 1.0
    sigma_x: float = 0.0
    sigma_y: float = 0.0


@dataclass(frozen=True)
class KingFit:
    slope: float
    intercept: float
    slope_err: float
    intercept_err: float
    covariance: tuple
    residuals: tuple
    weights: tuple          # weights of the final least-squares pass
    convention: str
    n_points: int


@dataclass(frozen=True)
class FieldShiftModel:
    """Constants for inverting a shift into a mean-square radius difference.

    The default field-shift coefficient magnitude (988 MHz/fm^2) and
    mass-shift coefficient (360 GHz u, applied as k_ms * (1/A - 1/A')) are
    the tabulated analysis constants of the 650 nm branch.  The sign of
    ``f_field_mhz_fm2`` and the product reading of the mass term are pinned
    by requiring the inversion to reproduce the known negative 133-138
    radius difference; see ``mass_reading``.

    mass_reading:
        "product"  -> mass term = k_ms_mhz_u * (1/A - 1/A')
        "per-pair" -> mass term = mass_term_mhz, a configured constant
    """
    f_field_mhz_fm2: float = -988.0
    k_ms_mhz_u: float = 360.0e3
    mass_reading: str = "product"
    mass_term_mhz: float | None = None
    reference: int = spectra.REFERENCE_ISOTOPE


DEFAULT_FIELD_SHIFT = FieldShiftModel()


def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")


def _norm_factor(a, convention, reference):
    if a == reference:
        raise ValueError(f"A={a} is the reference isotope; its normalized shift is undefined")
    if convention == "mass-difference":
        return float(a - reference)
    return 1.0 / a - 1.0 / reference


def normalized_shift(a, branch, convention="mass-difference", record=None):
    """Isotope shift of one branch divided by the convention's mass factor."""
    _check_convention(convention)
    rec = record if record is not None else spectra.isotope(a)
    return rec.dnu(branch) / _norm_factor(a, convention, spectra.REFERENCE_ISOTOPE)


def king_points(records=None, convention="mass-difference", include=None):
    """Build fit points (x = b shift, y = r shift, both normalized).

    Weights are inverse-variance from the records' statistical uncertainties.
    If no record carries uncertainties the points are weighted uniformly;
    a mix of zero and nonzero uncertainties is rejected.
    """
    _check_convention(convention)
    if records is None:
        records = [spectra.isotope(a) for a in spectra.isotopes()]
    by_a = {r.a: r for r in records}
    if include is None:
        include = [a for a in sorted(by_a) if a != spectra.REFERENCE_ISOTOPE]
    points = []
    for a in include:
        rec = by_a[a]
        nf = _norm_factor(a, convention, spectra.REFERENCE_ISOTOPE)
        points.append(KingPoint(
            a=a,
            x=rec.dnu_b / nf, y=rec.dnu_r / nf,
            sigma_x=abs(rec.dnu_b_err / nf), sigma_y=abs(rec.dnu_r_err / nf),
        ))
    sig_y = [p.sigma_y for p in points]
    if all(s > 0 for s in sig_y):
        points = [replace(p, weight=1.0 / p.sigma_y ** 2) for p in points]
    elif any(s > 0 for s in sig_y):
        raise ValueError("mixed zero and nonzero uncertainties; cannot weight consistently")
    return points


def _wls(x, y, w):
    sw = np.sum(w)
    xm = np.sum(w * x) / sw
    ym = np.sum(w * y) / sw
    sxx = np.sum(w * (x - xm) ** 2)
    if sxx <= 0:
        raise ValueError("degenerate fit: no spread in x")
    slope = np.sum(w * (x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    cov = np.array([[1.0 / sxx, -xm / sxx],
                    [-xm / sxx, 1.0 / sw + xm ** 2 / sxx]])
    return slope, intercept, cov


def fit_king_line(points, convention="mass-difference"):
    """Weighted straight-line fit y = slope * x + intercept.

    Point weights are taken as given (inverse variances of y).  When points
    carry x uncertainties, the fit is repeated once with effective variances
    sigma_y^2 + slope^2 sigma_x^2 so that x scatter is not ignored.  The
    procedure is deterministic: identical inputs give identical fits.
    """
    if len(points) < 3:
        raise ValueError(f"need at least 3 points for a meaningful line fit, got {len(points)}")
    x = np.array([p.x for p in points])
    y = np.array([p.y for p in points])
    w = np.array([p.weight for p in points])
    if np.any(w <= 0):
        raise ValueError("non-positive weight in fit points")
    slope, intercept, cov = _wls(x, y, w)
    sx = np.array([p.sigma_x for p in points])
    sy = np.array([p.sigma_y for p in points])
    if np.any(sx > 0) and np.all(sy > 0):
        w = 1.0 / (sy ** 2 + slope ** 2 * sx ** 2)
        slope, intercept, cov = _wls(x, y, w)
    residuals = y - (intercept + slope * x)
    return KingFit(
        slope=float(slope), intercept=float(intercept),
        slope_err=float(np.sqrt(cov[0, 0])), intercept_err=float(np.sqrt(cov[1, 1])),
        covariance=tuple(map(tuple, cov)), residuals=tuple(residuals),
        weights=tuple(w), convention=convention, n_points=len(points),
    )


def inverse_mass_difference(pair):
    """1/A - 1/A' for an isotope pair (a, a_ref)."""
    a, aref = pair
    if a == aref:
        raise ValueError(f"degenerate isotope pair {pair}")
    return 1.0 / a - 1.0 / aref


def mass_term(pair, model=DEFAULT_FIELD_SHIFT):
    """Mass-shift contribution (MHz) to the pair's isotope shift."""
    if model.mass_reading == "product":
        return model.k_ms_mhz_u * inverse_mass_difference(pair)
    if model.mass_reading == "per-pair":
        if model.mass_term_mhz is None:
            raise ValueError("per-pair mass reading requires mass_term_mhz")
        inverse_mass_difference(pair)  # still reject degenerate pairs
        return model.mass_term_mhz
    raise ValueError(f"unknown mass_reading {model.mass_reading!r}")


def invert_field_shift(dnu, pair, model=DEFAULT_FIELD_SHIFT):
    """Mean-square charge-radius difference d<r^2>_(a,a') in fm^2.

    Solves dnu = mass_term + F * d<r^2> for the radius term.
    """
    if model.f_field_mhz_fm2 == 0.0:
        raise ValueError("field-shift coefficient must be nonzero")
    return (dnu - mass_term(pair, model)) / model.f_field_mhz_fm2


def field_shift_forward(lam, pair, model=DEFAULT_FIELD_SHIFT):
    """Shift (MHz) predicted from a radius difference; inverse of invert_field_shift."""
    return mass_term(pair, model) + model.f_field_mhz_fm2 * lam


def fit_report(fit, points=None):
    """JSON-ready summary of a fit (optionally with its points)."""
    out = {
        "convention": fit.convention,
        "slope": fit.slope,
        "slope_err": fit.slope_err,
        "intercept": fit.intercept,
        "intercept_err": fit.intercept_err,
        "covariance": [list(row) for row in fit.covariance],
        "residuals": list(fit.residuals),
        "n_points": fit.n_points,
    }
    if points is not None:
        out["points"] = [
            {"A": p.a, "x": p.x, "y": p.y, "weight": p.weight,
             "sigma_x": p.sigma_x, "sigma_y": p.sigma_y}
            for p in points
        ]
    return out


def inversion_report(dnu, pair, model=DEFAULT_FIELD_SHIFT):
    """JSON-ready record of one radius-difference inversion, echoing the model."""
    return {
        "pair": list(pair),
        "dnu_mhz": dnu,
        "d_r2_fm2": invert_field_shift(dnu, pair, model),
        "model": {
            "f_field_mhz_fm2": model.f_field_mhz_fm2,
            "k_ms_mhz_u": model.k_ms_mhz_u,
            "mass_reading": model.mass_reading,
            "mass_term_mhz": mass_term(pair, model),
            "reference": model.reference,
        },
    }


def write_points_csv(path, points, fit=None):
    """Plot-ready CSV: one row per isotope, with the fitted line evaluated."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["A", "x", "y", "sigma_x", "sigma_y", "fit_y"])
        for p in points:
            fy = "" if fit is None else format(fit.intercept + fit.slope * p.x, ".12g")
            writer.writerow([p.a, format(p.x, ".12g"), format(p.y, ".12g"),
                             format(p.sigma_x, ".12g"), format(p.sigma_y, ".12g"), fy])
