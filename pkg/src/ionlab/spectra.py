"""Hyperfine structure and isotope shifts of the Ba+ laser-cooling transitions.

Level energies and transition offsets are built from a registry of isotope
shifts and hyperfine constants for the two cooling branches:

    b : 493 nm, 6S1/2 <-> 6P1/2
    r : 650 nm, 5D3/2 <-> 6P1/2

All frequencies are in MHz relative to the 138 isotope line centers.

Main API
--------
isotope(a)                    registry record for mass number a
hyperfine_levels(a, term)     hyperfine levels of one fine-structure term
transition_line(a, branch, f_lower, f_upper)
transition_table(a, branch)   all dipole-allowed lines
write_registry_csv / read_registry_csv
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

__all__ = [
    "BRANCHES",
    "TERMS",
    "REFERENCE_ISOTOPE",
    "IsotopeRecord",
    "HyperfineLevel",
    "TransitionLine",
    "isotope",
    "isotopes",
    "branch_wavelength",
    "hyperfine_energy",
    "hyperfine_levels",
    "level_energy",
    "transition_line",
    "transition_table",
    "write_registry_csv",
    "read_registry_csv",
]

BRANCHES = ("b", "r")
REFERENCE_ISOTOPE = 138

# electronic angular momentum of each fine-structure term
TERMS = {"S1/2": 0.5, "P1/2": 0.5, "D3/2": 1.5}

LOWER_TERM = {"b": "S1/2", "r": "D3/2"}
UPPER_TERM = "P1/2"

# vacuum wavelengths of the two branches, used for photon momenta
_WAVELENGTH_M = {"b": 493.4077e-9, "r": 649.8690e-9}

# Registry rows, kept as decimal strings and parsed once at import so the
# stored values stay exactly as published.  Columns:
# A, I, dnu_b, dnu_b_err, dnu_r, dnu_r_err, A_S12, A_P12, A_D32, B_D32, sys_unc
_ROWS = (
    ("130", "0",   "355.3", "4.4", "394",   "1",   "",               "",      "",         "",        "20"),
    ("132", "0",   "278.9", "0.4", "292",   "1",   "",               "",      "",         "",        "20"),
    ("133", "0.5", "373",   "4",   "198",   "4",   "-9925.45355459", "-1840", "-468.5",   "",        "20"),
    ("134", "0",   "222.6", "0.3", "174.5", "0.8", "",               "",      "",         "",        "0"),
    ("135", "1.5", "348.6", "2.1", "82.7",  "0.6", "3591.67011718",  "664.6", "169.5892", "28.9536", "0"),
    ("136", "0",   "179.4", "1.8", "68.0",  "0.5", "",               "",      "",         "",        "0"),
    ("137", "1.5", "271.1", "1.7", "-13.0", "0.4", "4018.87083385",  "743.7", "189.7288", "44.5417", "0"),
    ("138", "0",   "0",     "0",   "0",     "0",   "",               "",      "",         "",        "0"),
)


@dataclass(frozen=True)
class IsotopeRecord:
    """Isotope shifts (MHz, relative to A=138) and hyperfine constants of one isotope.

    ``dnu_*_err`` are statistical uncertainties; ``sys_unc`` is the common
    systematic band on rows containing wavemeter-referenced measurements.
    Hyperfine constants absent for spin-0 isotopes are ``None``.
    """

    a: int
    spin: float
    dnu_b: float
    dnu_b_err: float
    dnu_r: float
    dnu_r_err: float
    a_s12: float | None
    a_p12: float | None
    a_d32: float | None
    b_d32: float | None
    sys_unc: float

    def dnu(self, branch):
        _check_branch(branch)
        return self.dnu_b if branch == "b" else self.dnu_r

    def dnu_err(self, branch):
        _check_branch(branch)
        return self.dnu_b_err if branch == "b" else self.dnu_r_err

    def hyperfine_constants(self, term):
        """(A, B) constants in MHz for a term; B is zero unless tabulated."""
        if term not in TERMS:
            raise ValueError(f"unknown term {term!r}; expected one of {sorted(TERMS)}")
        a = {"S1/2": self.a_s12, "P1/2": self.a_p12, "D3/2": self.a_d32}[term]
        b = self.b_d32 if term == "D3/2" else None
        if self.spin == 0:
            return 0.0, 0.0
        if a is None:
            raise ValueError(f"no hyperfine constant tabulated for A={self.a} term {term}")
        return a, (b if b is not None else 0.0)


@dataclass(frozen=True)
class HyperfineLevel:
    term: str
    f: float
    energy_mhz: float


@dataclass(frozen=True)
class TransitionLine:
    isotope: int
    branch: str
    f_lower: float
    f_upper: float
    offset_mhz: float
    allowed: bool


def _parse_row(row):
    a, i, db, dbe, dr, dre, as12, ap12, ad32, bd32, sysu = row
    opt = lambda s: float(s) if s else None
    return IsotopeRecord(
        a=int(a), spin=float(i),
        dnu_b=float(db), dnu_b_err=float(dbe),
        dnu_r=float(dr), dnu_r_err=float(dre),
        a_s12=opt(as12), a_p12=opt(ap12), a_d32=opt(ad32), b_d32=opt(bd32),
        sys_unc=float(sysu),
    )


_REGISTRY = {r.a: r for r in map(_parse_row, _ROWS)}


def isotope(a):
    """Registry record for mass number ``a``; raises ValueError if unknown."""
    try:
        return _REGISTRY[int(a)]
    except KeyError:
        raise ValueError(f"unknown isotope A={a}; registry covers {isotopes()}") from None


def isotopes():
    return tuple(sorted(_REGISTRY))


def branch_wavelength(branch):
    """Vacuum wavelength in meters of a cooling branch."""
    _check_branch(branch)
    return _WAVELENGTH_M[branch]


def _check_branch(branch):
    if branch not in BRANCHES:
        raise ValueError(f"unknown branch {branch!r}; expected 'b' (493 nm) or 'r' (650 nm)")


def _check_half_integer(name, value):
    if abs(2 * value - round(2 * value)) > 1e-9 or value < 0:
        raise ValueError(f"{name}={value} is not a non-negative half-integer")


def hyperfine_energy(i, j, f, a_hf, b_hf=0.0):
    """Hyperfine energy shift of level |I J F> in the same units as the constants.

    Parameters
    ----------
    i, j, f : float
        Nuclear spin, electronic angular momentum, and total angular momentum.
        Must satisfy |i - j| <= f <= i + j in integer steps.
    a_hf, b_hf : float
        Magnetic-dipole and electric-quadrupole coupling constants.  The
        quadrupole term is only defined for i >= 1 and j >= 1 and is ignored
        (must be zero) otherwise.

    Returns
    -------
    float
        E = (A/2) K + B [ (3/2) K (K+1) - 2 I(I+1) J(J+1) ]
                        / [ 2I(2I-1) 2J(2J-1) ]
        with K = F(F+1) - I(I+1) - J(J+1).
    """
    for name, v in (("i", i), ("j", j), ("f", f)):
        _check_half_integer(name, v)
    if not (abs(i - j) - 1e-9 <= f <= i + j + 1e-9) or abs((f - abs(i - j)) % 1.0) > 1e-9:
        raise ValueError(f"f={f} outside |{i}-{j}| .. {i}+{j} in integer steps")
    k = f * (f + 1) - i * (i + 1) - j * (j + 1)
    energy = 0.5 * a_hf * k
    if b_hf != 0.0:
        if i < 1 or j < 1:
            raise ValueError(f"quadrupole constant given but undefined for i={i}, j={j}")
        num = 1.5 * k * (k + 1) - 2 * i * (i + 1) * j * (j + 1)
        den = 2 * i * (2 * i - 1) * 2 * j * (2 * j - 1)
        energy += b_hf * num / den
    return energy


def hyperfine_levels(a, term):
    """All hyperfine levels of one term, sorted by increasing energy.

    For spin-0 isotopes this is the single level F = J at zero offset.
    """
    rec = isotope(a)
    if term not in TERMS:
        raise ValueError(f"unknown term {term!r}; expected one of {sorted(TERMS)}")
    j = TERMS[term]
    i = rec.spin
    if i == 0:
        return [HyperfineLevel(term, j, 0.0)]
    a_hf, b_hf = rec.hyperfine_constants(term)
    fs = [abs(i - j) + n for n in range(int(round(i + j - abs(i - j))) + 1)]
    levels = [HyperfineLevel(term, f, hyperfine_energy(i, j, f, a_hf, b_hf)) for f in fs]
    return sorted(levels, key=lambda lv: lv.energy_mhz)


def level_energy(a, term, f):
    """Energy (MHz) of one hyperfine level relative to its term centroid."""
    rec = isotope(a)
    if term not in TERMS:
        raise ValueError(f"unknown term {term!r}; expected one of {sorted(TERMS)}")
    if rec.spin == 0:
        if abs(f - TERMS[term]) > 1e-9:
            raise ValueError(f"A={a} has I=0; the only level of {term} is F={TERMS[term]}")
        return 0.0
    a_hf, b_hf = rec.hyperfine_constants(term)
    return hyperfine_energy(rec.spin, TERMS[term], f, a_hf, b_hf)


def transition_line(a, branch, f_lower=None, f_upper=None):
    """One hyperfine component of a cooling branch.

    The offset (MHz, relative to the A=138 line center of the same branch) is
    the isotope shift plus upper-level minus lower-level hyperfine energy.
    For spin-0 isotopes the F arguments must be omitted: there is a single
    component, labelled F = J.

    The ``allowed`` flag applies the electric-dipole selection rule
    |dF| <= 1 with F=0 -> F=0 forbidden.
    """
    rec = isotope(a)
    _check_branch(branch)
    lower, upper = LOWER_TERM[branch], UPPER_TERM
    if rec.spin == 0:
        if f_lower is not None or f_upper is not None:
            raise ValueError(f"A={a} has I=0: hyperfine F labels are not applicable")
        fl, fu = TERMS[lower], TERMS[upper]
        return TransitionLine(rec.a, branch, fl, fu, rec.dnu(branch), True)
    if f_lower is None or f_upper is None:
        raise ValueError(f"A={a} has I={rec.spin}: f_lower and f_upper are required")
    offset = rec.dnu(branch) + level_energy(a, upper, f_upper) - level_energy(a, lower, f_lower)
    allowed = abs(f_upper - f_lower) <= 1 + 1e-9 and not (f_lower == 0 and f_upper == 0)
    return TransitionLine(rec.a, branch, float(f_lower), float(f_upper), offset, allowed)


def transition_table(a=None, branch=None, allowed_only=True):
    """Transition lines for one or all isotopes, sorted by (A, branch, offset)."""
    iso_list = [a] if a is not None else list(isotopes())
    branches = [branch] if branch is not None else list(BRANCHES)
    lines = []
    for iso_a in iso_list:
        rec = isotope(iso_a)
        for br in branches:
            if rec.spin == 0:
                lines.append(transition_line(iso_a, br))
                continue
            lowers = hyperfine_levels(iso_a, LOWER_TERM[br])
            uppers = hyperfine_levels(iso_a, UPPER_TERM)
            for lo in lowers:
                for up in uppers:
                    line = transition_line(iso_a, br, lo.f, up.f)
                    if line.allowed or not allowed_only:
                        lines.append(line)
    return sorted(lines, key=lambda l: (l.isotope, l.branch, l.offset_mhz))


# ---------------------------------------------------------------------------
# CSV registry exchange

_CSV_HEADER = ["A", "I", "dnu_b", "dnu_r", "A_S12", "A_P12", "A_D32", "B_D32"]


def _fmt(value):
    return "" if value is None else format(value, ".12g")


def write_registry_csv(path, records=None):
    """Write registry records (default: the built-in table) as CSV."""
    if records is None:
        records = [isotope(a) for a in isotopes()]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for r in records:
            writer.writerow([r.a, _fmt(r.spin), _fmt(r.dnu_b), _fmt(r.dnu_r),
                             _fmt(r.a_s12), _fmt(r.a_p12), _fmt(r.a_d32), _fmt(r.b_d32)])


def read_registry_csv(path):
    """Read records in the format of :func:`write_registry_csv`.

    Uncertainty columns are not part of the exchange format; records read
    back carry zero uncertainties.
    """
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != _CSV_HEADER:
            raise ValueError(f"bad registry header {header!r}; expected {_CSV_HEADER}")
        for row in reader:
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) != len(_CSV_HEADER):
                raise ValueError(f"registry row has {len(row)} fields, expected {len(_CSV_HEADER)}: {row!r}")
            opt = lambda s: float(s) if s.strip() else None
            records.append(IsotopeRecord(
                a=int(row[0]), spin=float(row[1]),
                dnu_b=float(row[2]), dnu_b_err=0.0,
                dnu_r=float(row[3]), dnu_r_err=0.0,
                a_s12=opt(row[4]), a_p12=opt(row[5]), a_d32=opt(row[6]), b_d32=opt(row[7]),
                sys_unc=0.0,
            ))
    return records
