import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ionlab import spectra


# ---------------------------------------------------------------------------
# Independent oracle: diagonalize A*(I.J) + quadrupole in the |m_I, m_J>
# product basis and group eigenvalues by multiplet.

def _angmom(j):
    d = int(round(2 * j + 1))
    m = j - np.arange(d)
    jp = np.zeros((d, d))
    for k in range(d - 1):
        mm = m[k + 1]
        jp[k, k + 1] = np.sqrt(j * (j + 1) - mm * (mm + 1))
    jx = 0.5 * (jp + jp.T)
    jy = -0.5j * (jp - jp.T)
    return jx, jy, np.diag(m)


def oracle_spectrum(i, j, a_hf, b_hf=0.0):
    """Sorted (energy, degeneracy) pairs from brute-force diagonalization."""
    ix, iy, iz = _angmom(i)
    jx, jy, jz = _angmom(j)
    idot = np.kron(ix, jx) + np.kron(iy, jy) + np.kron(iz, jz)
    h = a_hf * idot
    if b_hf != 0.0:
        dim = idot.shape[0]
        quad = 3 * idot @ idot + 1.5 * idot - i * (i + 1) * j * (j + 1) * np.eye(dim)
        h = h + b_hf * quad / (2 * i * (2 * i - 1) * j * (2 * j - 1))
    evals = np.sort(np.linalg.eigvalsh(h))
    groups = []
    for e in evals:
        if groups and abs(e - groups[-1][0]) < 1e-6 * max(1.0, abs(e)):
            prev, n = groups[-1]
            groups[-1] = ((prev * n + e) / (n + 1), n + 1)
        else:
            groups.append((e, 1))
    return groups


@pytest.mark.parametrize("a,term", [
    (133, "S1/2"), (133, "P1/2"), (133, "D3/2"),
    (135, "S1/2"), (135, "P1/2"), (135, "D3/2"),
    (137, "S1/2"), (137, "P1/2"), (137, "D3/2"),
])
def test_levels_match_diagonalization_oracle(a, term):
    rec = spectra.isotope(a)
    a_hf, b_hf = rec.hyperfine_constants(term)
    groups = oracle_spectrum(rec.spin, spectra.TERMS[term], a_hf, b_hf)
    levels = spectra.hyperfine_levels(a, term)
    assert len(levels) == len(groups)
    for lv, (e, deg) in zip(levels, groups):
        assert lv.energy_mhz == pytest.approx(e, abs=1e-9, rel=1e-12)
        assert deg == int(round(2 * lv.f + 1))


# ---------------------------------------------------------------------------
# Frozen closed-form values (computed once with the oracle above)

def test_137_d32_levels_frozen():
    want = {0.0: -655.805875, 1.0: -510.618775, 2.0: -175.702875, 3.0: 438.025225}
    got = {lv.f: lv.energy_mhz for lv in spectra.hyperfine_levels(137, "D3/2")}
    assert got == pytest.approx(want, abs=1e-9)


def test_135_d32_levels_frozen():
    want = {0.0: -599.7675, 1.0: -459.1319, 2.0: -148.9071, 3.0: 388.8141}
    got = {lv.f: lv.energy_mhz for lv in spectra.hyperfine_levels(135, "D3/2")}
    assert got == pytest.approx(want, abs=1e-9)


def test_133_splittings():
    s = spectra.hyperfine_levels(133, "S1/2")
    p = spectra.hyperfine_levels(133, "P1/2")
    d = spectra.hyperfine_levels(133, "D3/2")
    d1 = s[1].energy_mhz - s[0].energy_mhz
    d2 = p[1].energy_mhz - p[0].energy_mhz
    d3 = d[1].energy_mhz - d[0].energy_mhz
    assert d1 == pytest.approx(9925.45355459, abs=1e-9)
    assert d2 == pytest.approx(1840.0, abs=1e-9)
    assert d3 == pytest.approx(937.0, abs=1e-9)
    # the s-manifold depump sideband sits at twice half the combined splitting
    assert (d1 + d2) / 2 == pytest.approx(5882.726777295, abs=1e-6)
    assert d2 - d3 == pytest.approx(903.0, abs=1e-9)


def test_133_level_ordering():
    s = spectra.hyperfine_levels(133, "S1/2")
    assert (s[0].f, s[1].f) == (1.0, 0.0)          # A < 0: F=1 below F=0
    d = spectra.hyperfine_levels(133, "D3/2")
    assert (d[0].f, d[1].f) == (2.0, 1.0)


def test_composed_133_lines_frozen():
    assert spectra.transition_line(133, "b", 1, 0).offset_mhz == pytest.approx(4234.363388647, abs=1e-6)
    assert spectra.transition_line(133, "b", 0, 1).offset_mhz == pytest.approx(-7531.090165942, abs=1e-6)
    assert spectra.transition_line(133, "r", 1, 0).offset_mhz == pytest.approx(992.375, abs=1e-9)
    assert spectra.transition_line(133, "r", 2, 1).offset_mhz == pytest.approx(89.375, abs=1e-9)


# ---------------------------------------------------------------------------
# Registry integrity

EXPECTED_ROWS = {
    130: ("0", "355.3", "394", "", "", "", ""),
    132: ("0", "278.9", "292", "", "", "", ""),
    133: ("0.5", "373", "198", "-9925.45355459", "-1840", "-468.5", ""),
    134: ("0", "222.6", "174.5", "", "", "", ""),
    135: ("1.5", "348.6", "82.7", "3591.67011718", "664.6", "169.5892", "28.9536"),
    136: ("0", "179.4", "68", "", "", "", ""),
    137: ("1.5", "271.1", "-13", "4018.87083385", "743.7", "189.7288", "44.5417"),
    138: ("0", "0", "0", "", "", "", ""),
}


def test_registry_values_are_exact_decimal_strings():
    fmt = lambda v: "" if v is None else format(v, ".12g")
    for a, row in EXPECTED_ROWS.items():
        r = spectra.isotope(a)
        got = (fmt(r.spin), fmt(r.dnu_b), fmt(r.dnu_r),
               fmt(r.a_s12), fmt(r.a_p12), fmt(r.a_d32), fmt(r.b_d32))
        assert got == row, f"A={a}"


def test_registry_coverage_and_reference():
    assert spectra.isotopes() == (130, 132, 133, 134, 135, 136, 137, 138)
    ref = spectra.isotope(138)
    assert ref.dnu_b == 0.0 and ref.dnu_r == 0.0


def test_uncertainties():
    assert spectra.isotope(130).dnu_b_err == 4.4
    assert spectra.isotope(133).dnu_r_err == 4.0
    assert spectra.isotope(137).dnu_r_err == 0.4
    assert spectra.isotope(133).sys_unc == 20.0
    assert spectra.isotope(134).sys_unc == 0.0


# ---------------------------------------------------------------------------
# Selection rules and spin-0 behaviour

def test_selection_rules():
    assert not spectra.transition_line(133, "b", 0, 0).allowed
    assert spectra.transition_line(133, "b", 1, 0).allowed
    assert not spectra.transition_line(137, "r", 0, 2).allowed
    table = spectra.transition_table(137, "r")
    assert all(l.allowed for l in table)
    assert all(abs(l.f_upper - l.f_lower) <= 1 for l in table)
    assert not any(l.f_lower == 0 and l.f_upper == 0 for l in table)


def test_spin_zero_single_line():
    line = spectra.transition_line(136, "b")
    assert line.offset_mhz == 179.4
    assert line.allowed
    assert (line.f_lower, line.f_upper) == (0.5, 0.5)
    assert spectra.transition_line(136, "r").f_lower == 1.5
    assert len(spectra.transition_table(136)) == 2


def test_spin_zero_rejects_f_labels():
    with pytest.raises(ValueError):
        spectra.transition_line(138, "b", 1, 0)
    with pytest.raises(ValueError):
        spectra.level_energy(134, "S1/2", 1.0)


def test_errors():
    with pytest.raises(ValueError):
        spectra.isotope(131)
    with pytest.raises(ValueError):
        spectra.transition_line(133, "g", 1, 0)
    with pytest.raises(ValueError):
        spectra.hyperfine_levels(133, "D5/2")
    with pytest.raises(ValueError):
        spectra.hyperfine_energy(0.5, 0.5, 2.0, 100.0)   # F out of range
    with pytest.raises(ValueError):
        spectra.hyperfine_energy(0.3, 0.5, 0.8, 100.0)   # not half-integer
    with pytest.raises(ValueError):
        spectra.transition_line(133, "b", 1)             # missing F


# ---------------------------------------------------------------------------
# Property: the degeneracy-weighted mean of any hyperfine multiplet vanishes

@settings(max_examples=100, deadline=None)
@given(
    i2=st.integers(min_value=0, max_value=6),
    j2=st.integers(min_value=1, max_value=6),
    a_hf=st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
    b_hf=st.floats(min_value=-100, max_value=100, allow_nan=False),
)
def test_weighted_centroid_zero(i2, j2, a_hf, b_hf):
    i, j = i2 / 2.0, j2 / 2.0
    if i < 1 or j < 1:
        b_hf = 0.0
    nf = int(round(i + j - abs(i - j))) + 1
    fs = [abs(i - j) + n for n in range(nf)]
    total = sum((2 * f + 1) * spectra.hyperfine_energy(i, j, f, a_hf, b_hf) for f in fs)
    scale = max(1.0, abs(a_hf), abs(b_hf))
    assert abs(total) < 1e-7 * scale


# ---------------------------------------------------------------------------
# CSV exchange

def test_registry_csv_roundtrip(tmp_path):
    path = tmp_path / "registry.csv"
    spectra.write_registry_csv(path)
    back = spectra.read_registry_csv(path)
    assert [r.a for r in back] == list(spectra.isotopes())
    for r in back:
        orig = spectra.isotope(r.a)
        assert (r.spin, r.dnu_b, r.dnu_r) == (orig.spin, orig.dnu_b, orig.dnu_r)
        assert (r.a_s12, r.a_p12, r.a_d32, r.b_d32) == (
            orig.a_s12, orig.a_p12, orig.a_d32, orig.b_d32)


def test_registry_csv_values_verbatim(tmp_path):
    path = tmp_path / "registry.csv"
    spectra.write_registry_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["A", "I", "dnu_b", "dnu_r", "A_S12", "A_P12", "A_D32", "B_D32"]
    by_a = {int(r[0]): r for r in rows[1:]}
    assert by_a[133][2:] == ["373", "198", "-9925.45355459", "-1840", "-468.5", ""]
    assert by_a[135][7] == "28.9536"
    assert by_a[138][2:4] == ["0", "0"]


def test_registry_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("A,I,dnu_b\n130,0,355.3\n")
    with pytest.raises(ValueError):
        spectra.read_registry_csv(path)


def test_registry_csv_bad_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("A,I,dnu_b,dnu_r,A_S12,A_P12,A_D32,B_D32\n130,0,355.3\n")
    with pytest.raises(ValueError):
        spectra.read_registry_csv(path)
