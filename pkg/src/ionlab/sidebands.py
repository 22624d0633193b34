"""EOM sideband combs and isotope-selective cooling/heating plans.

A phase modulator driven at one or more RF tones turns a single laser carrier
into a comb: tones at carrier + sum(n_i * f_i) for integer orders |n_i| up to
a per-drive maximum.  Tones are classified against the hyperfine transition
lines of trapped isotopes purely by detuning sign within a capture range:

    cooling : -capture <= detuning < 0     (red of the line)
    heating :        0 < detuning <= capture
    idle    : exactly on resonance

``plan_report`` evaluates a purification plan: the target species must see
only red tones on its designated cooling lines while every contaminant is
driven blue somewhere in the scan.  Classification carries no amplitude
model; repump tones, which park near resonance by design and scatter few
photons, are therefore declared per entry and exempt from the heating veto.

All frequencies are MHz relative to the 138 isotope line center of the
entry's branch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import spectra

__all__ = [
    "COOLING", "HEATING", "IDLE",
    "DriveSpec", "Tone", "ToneComb", "ToneEffect",
    "ScanSpec", "PlanEntry", "SidebandPlan", "PlanReport", "PlanError",
    "generate_comb", "classify_detuning", "classify_tones",
    "plan_report", "ensure_valid", "purification_plan",
    "plan_to_dict", "plan_from_dict", "load_plan", "save_plan",
    "report_to_dict", "render_report",
]

COOLING = "cooling"
HEATING = "heating"
IDLE = "idle"

MAX_DRIVES = 3
MAX_ORDER = 5
MAX_TONES = 10_000
OFFSET_TOL_MHZ = 1e-9


@dataclass(frozen=True)
class DriveSpec:
    """One RF drive applied to the modulator."""
    frequency_mhz: float
    max_order: int = 1


@dataclass(frozen=True)
class Tone:
    offset_mhz: float
    orders: tuple


@dataclass(frozen=True)
class ToneComb:
    branch: str
    carrier_offset_mhz: float
    drives: tuple
    tones: tuple


@dataclass(frozen=True)
class ToneEffect:
    """Classification of one tone against one transition line."""
    isotope: int
    branch: str
    f_lower: float
    f_upper: float
    line_offset_mhz: float
    tone_offset_mhz: float
    detuning_mhz: float
    effect: str
    orders: tuple
    scan_mhz: float | None = None


def _check_drives(drives):
    if not 0 <= len(drives) <= MAX_DRIVES:
        raise ValueError(f"at most {MAX_DRIVES} drives supported, got {len(drives)}")
    for d in drives:
        if not 1 <= d.max_order <= MAX_ORDER:
            raise ValueError(f"drive order must be 1..{MAX_ORDER}, got {d.max_order}")
        if d.frequency_mhz <= 0:
            raise ValueError(f"drive frequency must be positive, got {d.frequency_mhz}")


def generate_comb(carrier_offset_mhz, drives, branch="b"):
    """Sideband comb of a carrier modulated by up to three drives.

    Every combination of orders n_i in [-max_order, +max_order] per drive
    contributes a tone at carrier + sum(n_i f_i).  Tones closer together
    than 1e-9 MHz are merged, keeping the lowest-order signature.
    """
    spectra._check_branch(branch)
    drives = tuple(drives)
    _check_drives(drives)
    count = 1
    for d in drives:
        count *= 2 * d.max_order + 1
    if count > MAX_TONES:
        raise ValueError(f"comb would have {count} tones; limit is {MAX_TONES}")

    combos = [((), 0.0)]
    for d in drives:
        combos = [(orders + (n,), off + n * d.frequency_mhz)
                  for orders, off in combos
                  for n in range(-d.max_order, d.max_order + 1)]
    # lowest-order signature first so it survives deduplication
    combos.sort(key=lambda c: (c[1], sum(abs(n) for n in c[0]), c[0]))
    tones = []
    for orders, off in combos:
        offset = carrier_offset_mhz + off
        if tones and abs(offset - tones[-1].offset_mhz) < OFFSET_TOL_MHZ:
            continue
        tones.append(Tone(offset_mhz=offset, orders=orders))
    return ToneComb(branch=branch, carrier_offset_mhz=carrier_offset_mhz,
                    drives=drives, tones=tuple(tones))


def classify_detuning(detuning_mhz, capture_range_mhz):
    """Sign classification of tone-minus-line detuning within the capture range."""
    if capture_range_mhz <= 0:
        raise ValueError(f"capture range must be positive, got {capture_range_mhz}")
    if -capture_range_mhz <= detuning_mhz < 0:
        return COOLING
    if 0 < detuning_mhz <= capture_range_mhz:
        return HEATING
    return IDLE


def classify_tones(comb, isotopes, capture_range_mhz=500.0, scan_mhz=None):
    """Classify every comb tone against every dipole-allowed line of the
    given isotopes on the comb's branch.

    Only pairs within the capture range are reported, sorted by isotope and
    then by |detuning| (strongest interaction first).
    """
    effects = []
    for a in isotopes:
        for line in spectra.transition_table(a, comb.branch):
            for tone in comb.tones:
                det = tone.offset_mhz - line.offset_mhz
                if abs(det) > capture_range_mhz:
                    continue
                effects.append(ToneEffect(
                    isotope=a, branch=comb.branch,
                    f_lower=line.f_lower, f_upper=line.f_upper,
                    line_offset_mhz=line.offset_mhz,
                    tone_offset_mhz=tone.offset_mhz,
                    detuning_mhz=det,
                    effect=classify_detuning(det, capture_range_mhz),
                    orders=tone.orders, scan_mhz=scan_mhz,
                ))
    return sorted(effects, key=lambda e: (e.isotope, abs(e.detuning_mhz)))


# ---------------------------------------------------------------------------
# Purification plans

@dataclass(frozen=True)
class ScanSpec:
    """A swept drive contributing first-order (or configured-order) sidebands."""
    lo_mhz: float
    hi_mhz: float
    step_mhz: float = 1.0
    max_order: int = 1


@dataclass(frozen=True)
class PlanEntry:
    """One laser branch of a plan.

    cool_lines are (F_lower, F_upper) transitions of the target that must see
    red tones only; repump_lines must merely be addressed within the capture
    range (their sign is unconstrained, since repump light parks near
    resonance and its scatter rate is population-starved).
    """
    branch: str
    carrier_offset_mhz: float
    drives: tuple = ()
    scan: ScanSpec | None = None
    cool_lines: tuple = ()
    repump_lines: tuple = ()


@dataclass(frozen=True)
class SidebandPlan:
    target: int
    contaminants: tuple
    entries: tuple
    capture_range_mhz: float = 500.0


@dataclass(frozen=True)
class PlanReport:
    valid: bool
    target: int
    cooled_lines: dict          # (branch, F_lower, F_upper) -> list of cooling ToneEffects
    offending: tuple            # heating ToneEffects on protected lines
    unaddressed: tuple          # declared lines with no in-capture tone
    target_extra: tuple         # informational classifications on other target lines
    contaminant_hits: dict      # A -> strongest heating ToneEffect
    uncovered: tuple            # contaminants never heated
    capture_range_mhz: float
    carrier_shift_mhz: float


class PlanError(ValueError):
    """A plan violates its own cooling contract."""


def _scan_frequencies(scan):
    if scan.hi_mhz < scan.lo_mhz:
        raise ValueError(f"scan window inverted: {scan.lo_mhz}..{scan.hi_mhz}")
    if scan.step_mhz <= 0:
        raise ValueError(f"scan step must be positive, got {scan.step_mhz}")
    n = int(np.floor((scan.hi_mhz - scan.lo_mhz) / scan.step_mhz + 0.5)) + 1
    return [scan.lo_mhz + k * scan.step_mhz for k in range(n)]


def _entry_effects(entry, species, capture, carrier_shift):
    """All in-capture classifications of one entry, static comb plus scan steps."""
    carrier = entry.carrier_offset_mhz + carrier_shift
    out = list(classify_tones(generate_comb(carrier, entry.drives, entry.branch),
                              species, capture))
    if entry.scan is not None:
        for f in _scan_frequencies(entry.scan):
            drives = entry.drives + (DriveSpec(f, entry.scan.max_order),)
            comb = generate_comb(carrier, drives, entry.branch)
            out.extend(classify_tones(comb, species, capture, scan_mhz=f))
    return out


def plan_report(plan, carrier_shift_mhz=0.0):
    """Evaluate a purification plan.

    The verdict is valid when (a) every declared cooling line of the target
    receives at least one red tone and never a blue one, at every scan step,
    (b) every declared repump line is addressed within the capture range, and
    (c) every contaminant is driven blue at least once during the scan.
    ``carrier_shift_mhz`` offsets all entry carriers, for stability checks.
    """
    capture = plan.capture_range_mhz
    species = [plan.target, *plan.contaminants]
    cooled = {}
    offending, unaddressed, extra = [], [], []
    contaminant_hits = {}
    dedup = set()  # static tones recur at every scan step; report each once

    for entry in plan.entries:
        effects = _entry_effects(entry, species, capture, carrier_shift_mhz)
        cool = {tuple(map(float, c)) for c in entry.cool_lines}
        repump = {tuple(map(float, c)) for c in entry.repump_lines}
        seen = {c: [] for c in cool | repump}
        for e in effects:
            if e.isotope != plan.target:
                if e.effect == HEATING:
                    best = contaminant_hits.get(e.isotope)
                    if best is None or abs(e.detuning_mhz) < abs(best.detuning_mhz):
                        contaminant_hits[e.isotope] = e
                continue
            key = (e.f_lower, e.f_upper)
            if key in cool or key in repump:
                seen[key].append(e)
            tone_id = (entry.branch, key, round(e.tone_offset_mhz, 6))
            if tone_id in dedup:
                continue
            dedup.add(tone_id)
            if key in cool:
                if e.effect == HEATING:
                    offending.append(e)
                elif e.effect == COOLING:
                    cooled.setdefault((entry.branch, *key), []).append(e)
            elif key not in repump:
                extra.append(e)
        for key in sorted(cool | repump):
            if not seen[key]:
                unaddressed.append((entry.branch, *key))
        for key in sorted(cool):
            already = {u for u in unaddressed}
            if (entry.branch, *key) not in cooled and (entry.branch, *key) not in already:
                # addressed but never actually red
                unaddressed.append((entry.branch, *key))

    uncovered = tuple(a for a in plan.contaminants if a not in contaminant_hits)
    valid = not offending and not unaddressed and not uncovered
    return PlanReport(
        valid=valid, target=plan.target,
        cooled_lines=cooled, offending=tuple(offending),
        unaddressed=tuple(unaddressed), target_extra=tuple(extra),
        contaminant_hits=contaminant_hits, uncovered=uncovered,
        capture_range_mhz=capture, carrier_shift_mhz=carrier_shift_mhz,
    )


def ensure_valid(report):
    """Raise PlanError with the offending details if the report is invalid."""
    if report.valid:
        return report
    parts = []
    if report.offending:
        tones = ", ".join(
            f"tone {e.tone_offset_mhz:+.3f} MHz ({e.detuning_mhz:+.3f} blue of "
            f"{e.branch} F={e.f_lower}->F'={e.f_upper})" for e in report.offending)
        parts.append(f"target {report.target} heated by: {tones}")
    if report.unaddressed:
        lines = ", ".join(f"{br} F={fl}->F'={fu}" for br, fl, fu in report.unaddressed)
        parts.append(f"unaddressed target lines: {lines}")
    if report.uncovered:
        parts.append(f"contaminants never heated: {list(report.uncovered)}")
    raise PlanError("; ".join(parts))


def purification_plan(target=133, contaminants=(130, 132, 134, 136, 138),
                      capture_range_mhz=500.0):
    """The single-EOM loading plan: cool the target while sweeping every even
    contaminant blue on the 493 nm branch.

    The 493 nm carrier parks red of the target's cycling line; a second-order
    sideband of the fixed drive repumps the lower hyperfine qubit state, and a
    swept first-order sideband covers all even-isotope lines.  The 650 nm
    entry repumps the metastable D manifold with a red carrier and one
    first-order sideband.
    """
    if target != 133:
        raise ValueError("the built-in plan is defined for the synthetic A=133 target")
    b = PlanEntry(
        branch="b",
        carrier_offset_mhz=4218.0,
        drives=(DriveSpec(5872.0, 2),),
        scan=ScanSpec(3800.0, 4300.0, 1.0, 1),
        cool_lines=((1.0, 0.0),),
        repump_lines=((0.0, 1.0),),
    )
    r = PlanEntry(
        branch="r",
        carrier_offset_mhz=spectra.transition_line(133, "r", 1, 0).offset_mhz - 30.0,
        drives=(DriveSpec(904.0, 1),),
        cool_lines=((1.0, 0.0),),
        repump_lines=((2.0, 1.0),),
    )
    return SidebandPlan(target=target, contaminants=tuple(contaminants),
                        entries=(b, r), capture_range_mhz=capture_range_mhz)


# ---------------------------------------------------------------------------
# Serialization

def plan_to_dict(plan):
    def entry_dict(e):
        d = {
            "branch": e.branch,
            "carrier_offset_mhz": e.carrier_offset_mhz,
            "drives": [{"frequency_mhz": dr.frequency_mhz, "max_order": dr.max_order}
                       for dr in e.drives],
            "cool_lines": [list(c) for c in e.cool_lines],
            "repump_lines": [list(c) for c in e.repump_lines],
        }
        if e.scan is not None:
            d["scan"] = {"lo_mhz": e.scan.lo_mhz, "hi_mhz": e.scan.hi_mhz,
                         "step_mhz": e.scan.step_mhz, "max_order": e.scan.max_order}
        return d
    return {
        "target": plan.target,
        "contaminants": list(plan.contaminants),
        "capture_range_mhz": plan.capture_range_mhz,
        "entries": [entry_dict(e) for e in plan.entries],
    }


_PLAN_KEYS = {"target", "contaminants", "capture_range_mhz", "entries"}
_ENTRY_KEYS = {"branch", "carrier_offset_mhz", "drives", "scan", "cool_lines", "repump_lines"}


def plan_from_dict(data):
    unknown = set(data) - _PLAN_KEYS
    if unknown:
        raise ValueError(f"unknown plan keys: {sorted(unknown)}")
    entries = []
    for ed in data["entries"]:
        bad = set(ed) - _ENTRY_KEYS
        if bad:
            raise ValueError(f"unknown plan entry keys: {sorted(bad)}")
        scan = None
        if ed.get("scan") is not None:
            s = ed["scan"]
            scan = ScanSpec(lo_mhz=s["lo_mhz"], hi_mhz=s["hi_mhz"],
                            step_mhz=s.get("step_mhz", 1.0),
                            max_order=s.get("max_order", 1))
        entries.append(PlanEntry(
            branch=ed["branch"],
            carrier_offset_mhz=ed["carrier_offset_mhz"],
            drives=tuple(DriveSpec(d["frequency_mhz"], d.get("max_order", 1))
                         for d in ed.get("drives", [])),
            scan=scan,
            cool_lines=tuple(tuple(c) for c in ed.get("cool_lines", [])),
            repump_lines=tuple(tuple(c) for c in ed.get("repump_lines", [])),
        ))
    return SidebandPlan(
        target=int(data["target"]),
        contaminants=tuple(int(a) for a in data.get("contaminants", ())),
        entries=tuple(entries),
        capture_range_mhz=float(data.get("capture_range_mhz", 500.0)),
    )


def load_plan(path):
    with open(path) as fh:
        return plan_from_dict(json.load(fh))


def save_plan(path, plan):
    with open(path, "w") as fh:
        json.dump(plan_to_dict(plan), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _effect_dict(e):
    return {
        "isotope": e.isotope, "branch": e.branch,
        "f_lower": e.f_lower, "f_upper": e.f_upper,
        "line_offset_mhz": e.line_offset_mhz,
        "tone_offset_mhz": e.tone_offset_mhz,
        "detuning_mhz": e.detuning_mhz,
        "effect": e.effect, "orders": list(e.orders),
        "scan_mhz": e.scan_mhz,
    }


def report_to_dict(report):
    return {
        "valid": report.valid,
        "target": report.target,
        "cooled_lines": {f"{br} F={fl}->F'={fu}": [_effect_dict(e) for e in v]
                         for (br, fl, fu), v in sorted(report.cooled_lines.items())},
        "offending": [_effect_dict(e) for e in report.offending],
        "unaddressed": [list(u) for u in report.unaddressed],
        "target_extra": [_effect_dict(e) for e in report.target_extra],
        "contaminant_hits": {str(a): _effect_dict(e)
                             for a, e in sorted(report.contaminant_hits.items())},
        "uncovered": list(report.uncovered),
        "capture_range_mhz": report.capture_range_mhz,
        "carrier_shift_mhz": report.carrier_shift_mhz,
    }


def render_report(report):
    """Human-readable verdict table."""
    lines = [f"plan verdict: {'VALID' if report.valid else 'INVALID'} "
             f"(capture {report.capture_range_mhz:g} MHz, "
             f"carrier shift {report.carrier_shift_mhz:+g} MHz)"]
    for (br, fl, fu), effects in sorted(report.cooled_lines.items()):
        det = min(effects, key=lambda e: abs(e.detuning_mhz)).detuning_mhz
        lines.append(f"  target {report.target} {br} F={fl:g}->F'={fu:g}: "
                     f"cooling, nearest tone {det:+.3f} MHz")
    for e in report.offending:
        lines.append(f"  target {report.target} {e.branch} F={e.f_lower:g}->F'={e.f_upper:g}: "
                     f"HEATED by tone at {e.tone_offset_mhz:+.3f} MHz ({e.detuning_mhz:+.3f})")
    for u in report.unaddressed:
        lines.append(f"  target {report.target} {u[0]} F={u[1]:g}->F'={u[2]:g}: UNADDRESSED")
    for a, e in sorted(report.contaminant_hits.items()):
        where = f"scan {e.scan_mhz:g} MHz" if e.scan_mhz is not None else "static comb"
        lines.append(f"  contaminant {a}: heated {e.detuning_mhz:+.3f} MHz blue "
                     f"({e.branch} branch, orders {list(e.orders)}, {where})")
    for a in report.uncovered:
        lines.append(f"  contaminant {a}: NEVER HEATED")
    return "\n".join(lines)
