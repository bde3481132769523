"""Acceptance suite: formula reproduction and property checks with pinned
tolerances and runtime budgets.

Each criterion is a standalone runner returning (passed, detail); run_all
wraps them with timing and budget enforcement.  Details are deterministic
strings (fixed seeds throughout) so repeated runs produce identical
reports; timings are reported separately.

Two measurement-noise details, both recorded in the tolerances below:
criterion comparisons of the form |x - y| <= 3*stderr carry a 1e-13
absolute floor because constant-profile estimators have (correctly) zero
sampling variance, leaving only summation rounding; and the determinism
criterion compares the CSV outputs of the CSV-emitting commands, since the
verify report itself contains wall-clock timings.
"""

from __future__ import annotations

import filecmp
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assembly import helicity_sweep, sweep_ranges
from .blocks import Jet, Profile, lutz_valid, sew_lutz
from .core import RngStream, constant, piecewise_linear, polynomial, sinusoid
from .errors import UnsewableError
from .flux_mc import (
    FiberSurface,
    convergence_report,
    dirac_crossings,
    dirac_orbit_measure,
    flux_estimate,
    shear_invariance_test,
    volume_measure,
)
from .invariants import (
    PROBABILITY,
    SINE_HELICITY_NOTE,
    CohomologyClass,
    helicity_block_c,
    section_obstruction,
    sine_helicity_reference,
    tangent_orbit_detect,
    torus_knot_trunk,
    trunkenness_block_c,
    winding_block_c,
    wrappingness_block_c,
)

__all__ = ["CriterionResult", "run_all", "CRITERIA"]

DEFAULT_SEED = 20250809
TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi
NOISE_FLOOR = 1e-13

BETA_X1 = CohomologyClass(1.0, 0.0)


@dataclass(frozen=True)
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: float


def _coprime_pairs(limit: int, include_axes: bool = False):
    pairs = []
    lo = 0 if include_axes else 1
    for ap in range(lo, limit + 1):
        for aq in range(lo, limit + 1):
            if (ap, aq) == (0, 0) or math.gcd(ap, aq) != 1:
                continue
            for sp in (1, -1) if ap else (1,):
                for sq in (1, -1) if aq else (1,):
                    pairs.append((sp * ap, sq * aq))
    return pairs


# --------------------------------------------------------------------------
# 1. Closed-form formula reproduction
# --------------------------------------------------------------------------

def criterion_1(seed: int):
    errors = []
    tks = trunkenness_block_c(Profile(f=constant(2.0), g=constant(3.0)))
    if abs(tks - 8.0 * math.pi) > 1e-9:
        errors.append(f"trunkenness(2,3)={tks!r}")
    wrap_sin = wrappingness_block_c(Profile(f=sinusoid(1.0, 2), g=constant(1.0)))
    if abs(wrap_sin - 8.0) > 1e-6:
        errors.append(f"wrappingness(sin 2 pi t)={wrap_sin!r}")
    for a in (0.5, 1.0, 3.0):
        w = wrappingness_block_c(Profile(f=constant(a), g=constant(1.0)))
        if abs(w - FOUR_PI * a) > 1e-9:
            errors.append(f"wrappingness(const {a})={w!r}")
    bad_knots = [(p, q) for p, q in _coprime_pairs(9)
                 if torus_knot_trunk(p, q) != 2 * min(abs(p), abs(q))]
    if bad_knots:
        errors.append(f"torus knot trunk mismatches: {bad_knots[:4]}")
    detail = (f"trunkenness(2,3)={tks:.12g}, wrappingness(sin)={wrap_sin:.9g}, "
              f"{len(_coprime_pairs(9))} coprime slopes checked")
    return not errors, detail if not errors else "; ".join(errors)


# --------------------------------------------------------------------------
# 2. Helicity against an independent trapezoid oracle
# --------------------------------------------------------------------------

def _trapezoid_helicity(profile: Profile, panels: int = 1_000_000) -> float:
    ts = np.linspace(0.0, 1.0, panels + 1)
    fv = np.asarray(profile.f.eval(ts), dtype=float)
    gv = np.asarray(profile.g.eval(ts), dtype=float)
    h = 1.0 / panels
    F = np.concatenate(([0.0], np.cumsum(0.5 * (fv[1:] + fv[:-1]) * h)))
    G = np.concatenate(([0.0], np.cumsum(0.5 * (gv[1:] + gv[:-1]) * h)))
    return float(np.trapezoid(G * fv - F * gv, dx=h))


def criterion_2(seed: int):
    rng = RngStream(seed, 2).generator()
    errors = []
    worst = 0.0
    for i in range(50):
        while True:
            try:
                profile = Profile(f=polynomial(rng.uniform(-2.0, 2.0, 4)),
                                  g=polynomial(rng.uniform(-2.0, 2.0, 4)))
                break
            except Exception:
                continue
        diff = abs(helicity_block_c(profile) - _trapezoid_helicity(profile))
        worst = max(worst, diff)
        if diff > 1e-8:
            errors.append(f"profile {i}: oracle gap {diff:.3g}")
    for a, b in ((2.0, 3.0), (1.0, 4.0), (-3.0, 5.0)):
        h = helicity_block_c(Profile(f=constant(a), g=constant(b)))
        if h != 0.0:
            errors.append(f"constants ({a},{b}) gave {h!r}, not exactly 0")
    h16 = helicity_block_c(Profile(f=constant(1.0), g=polynomial([0.0, 1.0])))
    if abs(h16 + 1.0 / 6.0) > 1e-9:
        errors.append(f"profile (1,t) gave {h16!r}")
    q_probe = 1.5
    probe = Profile(f=constant(1.0), g=sinusoid(q_probe, 1, 0.0, 4.0))
    corr = CohomologyClass(1.0, 1.0)
    oracle_val = helicity_block_c(probe, corr)
    shortcut = sine_helicity_reference(1.0, 4.0, q_probe, corr)
    detail = (f"worst oracle gap {worst:.3g}; sine family a=1 b=4 Q={q_probe}: "
              f"quadrature={oracle_val:.9g} vs shortcut={shortcut:.9g} "
              f"({SINE_HELICITY_NOTE})")
    return not errors, detail if not errors else "; ".join(errors)


# --------------------------------------------------------------------------
# 3. Monte Carlo flux against the analytic value
# --------------------------------------------------------------------------

def criterion_3(seed: int):
    profile = Profile(f=constant(1.0), g=constant(0.0))
    measure = volume_measure(PROBABILITY)
    surface = FiberSurface(0.0)
    target = 1.0 / TWO_PI
    est = flux_estimate(profile, measure, surface, 1e-3, 1_000_000, seed)
    errors = []
    if abs(est.value - target) > 3.0 * est.stderr + NOISE_FLOOR:
        errors.append(f"estimate {est.value!r} vs {target!r} "
                      f"(stderr {est.stderr:.3g})")
    if est.stderr > 0.01 * abs(est.value):
        errors.append(f"stderr {est.stderr:.3g} above 1% of value")
    rows = convergence_report(profile, measure, surface,
                              [1e-2, 1e-3, 1e-4], [1_000_000], seed)
    for r in rows:
        if abs(r.value - target) > 3.0 * r.stderr + NOISE_FLOOR:
            errors.append(f"eps={r.epsilon:g}: value {r.value!r} unstable")
    spread = max(r.value for r in rows) - min(r.value for r in rows)
    detail = (f"value={est.value:.12g} target={target:.12g} "
              f"stderr={est.stderr:.3g}, convergence spread={spread:.3g}")
    return not errors, detail if not errors else "; ".join(errors)


# --------------------------------------------------------------------------
# 4. Exact crossing counts for orbit measures
# --------------------------------------------------------------------------

def criterion_4(seed: int):
    thetas = [TWO_PI * (j + 0.37) / 16.0 for j in range(16)]
    checked = 0
    for p, q in _coprime_pairs(7, include_axes=True):
        measure = dirac_orbit_measure(p, q, t0=0.25)
        for theta in thetas:
            if len(dirac_crossings(measure, theta)) != abs(p):
                return False, f"slope ({p},{q}) theta={theta:.4f} miscounted"
            checked += 1
    return True, f"{checked} (slope, fiber) crossing counts all exact"


# --------------------------------------------------------------------------
# 5. Helicity independence sweep
# --------------------------------------------------------------------------

def criterion_5(seed: int):
    q_values = [-2.0 + 0.5 * i for i in range(9)]
    rows = helicity_sweep(1.0, 4.0, q_values, CohomologyClass(0.0, 1.0))
    ranges = sweep_ranges(rows)
    errors = []
    if ranges["any_flagged"]:
        errors.append("a row violated |a| < |b| - |Q|")
    for key in ("winding_range", "wrappingness_range", "trunkenness_range"):
        if ranges[key] > 1e-9:
            errors.append(f"{key}={ranges[key]:.3g}")
    if ranges["helicity_range"] < 0.1:
        errors.append(f"helicity range {ranges['helicity_range']:.3g} < 0.1")
    ordered = sorted(rows, key=lambda r: r.Q)
    diffs = [y.helicity - x.helicity for x, y in zip(ordered, ordered[1:])]
    if not (all(d > 1e-9 for d in diffs) or all(d < -1e-9 for d in diffs)):
        errors.append("helicity not strictly monotone in Q")
    lo, hi = ordered[0], ordered[-1]
    triple_gap = max(abs(lo.winding - hi.winding),
                     abs(lo.wrappingness - hi.wrappingness),
                     abs(lo.trunkenness - hi.trunkenness))
    hel_gap = abs(lo.helicity - hi.helicity)
    if triple_gap > 1e-9 or hel_gap < 0.1:
        errors.append(f"witness pair: triple gap {triple_gap:.3g}, "
                      f"helicity gap {hel_gap:.3g}")
    detail = (f"helicity range {ranges['helicity_range']:.6g} with invariant "
              f"ranges <= {max(ranges['winding_range'], ranges['wrappingness_range'], ranges['trunkenness_range']):.3g}; "
              f"witness flows Q={lo.Q:g},{hi.Q:g} share their triple, "
              f"helicities differ by {hel_gap:.6g}")
    return not errors, detail if not errors else "; ".join(errors)


# --------------------------------------------------------------------------
# 6. Inequality and obstruction suite on random profiles
# --------------------------------------------------------------------------

def criterion_6(seed: int):
    rng = RngStream(seed, 6).generator()
    knots = np.linspace(0.0, 1.0, 8)
    for i in range(1000):
        fvals = rng.uniform(0.05, 2.0, 8) * rng.choice((-1.0, 1.0), 8)
        gvals = rng.uniform(0.5, 2.0, 8)
        profile = Profile(f=piecewise_linear(knots, fvals),
                          g=piecewise_linear(knots, gvals))
        wind = winding_block_c(profile, BETA_X1, PROBABILITY)
        wrap = wrappingness_block_c(profile)
        if abs(wind) > wrap / FOUR_PI + 1e-12:
            return False, f"profile {i}: |winding| {abs(wind)!r} exceeds " \
                          f"normalized wrappingness {wrap / FOUR_PI!r}"
        obstructed = not section_obstruction(profile).section_possible
        sign_change = bool(np.any(fvals > 0.0) and np.any(fvals < 0.0))
        tangent = bool(tangent_orbit_detect(profile))
        if not obstructed == sign_change == tangent:
            return False, (f"profile {i}: gap>0 is {obstructed}, sign change "
                           f"is {sign_change}, tangency is {tangent}")
    return True, ("1000 profiles: |winding| <= wrappingness and "
                  "gap>0 <=> sign change <=> tangent orbit, 100% agreement")


# --------------------------------------------------------------------------
# 7. Sewing property suite
# --------------------------------------------------------------------------

def _random_jet(rng, sign: int) -> Jet:
    radius = rng.uniform(0.3, 2.0)
    theta = rng.uniform(0.0, TWO_PI)
    w = sign * rng.uniform(0.2, 3.0)
    radius_rate = rng.uniform(-1.0, 1.0)
    turn = -w / radius ** 2
    c, s = math.cos(theta), math.sin(theta)
    return Jet(radius * c, radius * s,
               radius_rate * c - radius * turn * s,
               radius_rate * s + radius * turn * c)


def _jet_mismatch(pair, t: float, jet: Jet) -> float:
    return max(abs(float(pair.p.eval(t)) - jet.p),
               abs(float(pair.q.eval(t)) - jet.q),
               abs(float(pair.p.deriv(t)) - jet.dp),
               abs(float(pair.q.deriv(t)) - jet.dq))


def criterion_7(seed: int):
    rng = RngStream(seed, 7).generator()
    worst_mismatch = 0.0
    min_wronskian = math.inf
    for i in range(500):
        sign = 1 if rng.random() < 0.5 else -1
        left = _random_jet(rng, sign)
        right = _random_jet(rng, sign)
        result = sew_lutz(left, right, extra_turns=int(rng.integers(0, 3)))
        report = lutz_valid(result.pair)
        if not report.is_valid:
            return False, f"case {i}: output failed the Wronskian check"
        if report.sign != sign:
            return False, f"case {i}: Wronskian sign flipped"
        mismatch = max(_jet_mismatch(result.pair, 0.0, left),
                       _jet_mismatch(result.pair, 1.0, right))
        worst_mismatch = max(worst_mismatch, mismatch)
        min_wronskian = min(min_wronskian, report.min_abs_wronskian)
        if mismatch > 1e-8:
            return False, f"case {i}: jet mismatch {mismatch:.3g}"
    rejected = 0
    for i in range(100):
        left = _random_jet(rng, 1)
        right = _random_jet(rng, -1)
        try:
            sew_lutz(left, right)
        except UnsewableError:
            rejected += 1
    if rejected != 100:
        return False, f"only {rejected}/100 sign-mismatched pairs rejected"
    return True, (f"500 sews valid (min |W| {min_wronskian:.3g}, worst jet "
                  f"mismatch {worst_mismatch:.3g}); 100/100 mismatches rejected")


# --------------------------------------------------------------------------
# 8. Continuity under uniformly small perturbations
# --------------------------------------------------------------------------

def criterion_8(seed: int):
    base = Profile(f=constant(1.0), g=constant(4.0))
    w0 = winding_block_c(base, BETA_X1, PROBABILITY)
    wr0 = wrappingness_block_c(base)
    tk0 = trunkenness_block_c(base)
    h0 = helicity_block_c(base)
    worst_ratio = 0.0
    for n in range(1, 65):
        perturbed = Profile(f=sinusoid(1.0 / n, 2 * n, 0.0, 1.0),
                            g=constant(4.0))
        bound = 16.0 * math.pi / n
        # quadrature at 1e-8 is eight orders below the 16 pi / n bound
        deltas = (
            abs(winding_block_c(perturbed, BETA_X1, PROBABILITY,
                                tol=1e-8) - w0),
            abs(wrappingness_block_c(perturbed, tol=1e-8) - wr0),
            abs(trunkenness_block_c(perturbed, tol=1e-8) - tk0),
            abs(helicity_block_c(perturbed, tol=1e-8) - h0),
        )
        worst_ratio = max(worst_ratio, max(deltas) / bound)
        if max(deltas) > bound:
            return False, (f"n={n}: invariant drift {max(deltas):.3g} "
                           f"exceeds 16 pi / n = {bound:.3g}")
    return True, (f"n=1..64: all four invariants converge; worst "
                  f"drift/bound ratio {worst_ratio:.3g}")


# --------------------------------------------------------------------------
# 9. Shear invariance
# --------------------------------------------------------------------------

def criterion_9(seed: int):
    profiles = {
        "(1,0)": Profile(f=constant(1.0), g=constant(0.0)),
        "(sin,1)": Profile(f=sinusoid(1.0, 2), g=constant(1.0)),
        "(2,3)": Profile(f=constant(2.0), g=constant(3.0)),
    }
    worst = 0.0
    for name, profile in profiles.items():
        for k in (1, 2):
            rep = shear_invariance_test(profile, k, 1e-3, 1_000_000, seed)
            worst = max(worst, rep.max_abs_discrepancy)
            if not rep.within_3sigma:
                return False, (f"profile {name} k={k}: discrepancy "
                               f"{rep.max_abs_discrepancy:.3g} beyond 3 sigma")
    for p, q in ((2, 3), (3, 5)):
        for k in (1, 2):
            rep = shear_invariance_test(
                profiles["(2,3)"], k, 1e-3, 1_000_000, seed,
                measure=dirac_orbit_measure(p, q))
            if rep.max_abs_discrepancy != 0.0:
                return False, (f"orbit ({p},{q}) k={k}: crossing count "
                               "changed under shear")
    return True, (f"volume fluxes match within 3 sigma (worst discrepancy "
                  f"{worst:.3g}); orbit crossings exactly preserved")


# --------------------------------------------------------------------------
# 10. Bytewise determinism of the CLI outputs
# --------------------------------------------------------------------------

_DETERMINISM_CONFIG = """\
[profiles.const_2_3.f]
family = "constant"
params = [2.0]
[profiles.const_2_3.g]
family = "constant"
params = [3.0]

[profiles.wavy.f]
family = "sinusoid"
params = [1.0, 2, 0.0, 0.25]
[profiles.wavy.g]
family = "constant"
params = [1.0]

[measure]
kind = "volume"
normalization = "probability"

[mc]
epsilon = 1e-3
n = 50000
theta_grid = 8
epsilon_list = [1e-2, 1e-3]

[sweep]
a = 1.0
b = 4.0
q_values = [-2.0, -1.0, 0.0, 1.0, 2.0]
correction = [0.0, 1.0]
"""


def criterion_10(seed: int):
    from .cli import main as cli_main

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        config = tmp / "experiment.toml"
        config.write_text(_DETERMINISM_CONFIG)
        outputs = []
        for run, threads in (("run1", 1), ("run2", 4)):
            out = tmp / run
            for command in ("invariants", "flux", "sweep"):
                code = cli_main([command, "--config", str(config),
                                 "--out", str(out), "--seed", str(seed),
                                 "--threads", str(threads)])
                if code != 0:
                    return False, f"{command} exited {code} in {run}"
            outputs.append(sorted(p for p in out.iterdir()))
        names1 = [p.name for p in outputs[0]]
        names2 = [p.name for p in outputs[1]]
        if names1 != names2:
            return False, f"output file sets differ: {names1} vs {names2}"
        for p1, p2 in zip(*outputs):
            if not filecmp.cmp(p1, p2, shallow=False):
                return False, f"{p1.name} differs between runs"
        csv_count = sum(1 for p in outputs[0] if p.suffix == ".csv")
    return True, (f"{csv_count} CSV files bytewise identical across repeated "
                  "runs at thread counts 1 and 4")


CRITERIA = (
    (1, "closed-form formula reproduction", 1.0, criterion_1),
    (2, "helicity vs independent trapezoid oracle", 5.0, criterion_2),
    (3, "Monte Carlo flux vs analytic value", 60.0, criterion_3),
    (4, "exact orbit crossing counts", 1.0, criterion_4),
    (5, "helicity independence sweep", 5.0, criterion_5),
    (6, "inequality and obstruction suite", 10.0, criterion_6),
    (7, "sewing property suite", 10.0, criterion_7),
    (8, "continuity under small perturbations", 5.0, criterion_8),
    (9, "shear invariance", 120.0, criterion_9),
    (10, "bytewise output determinism", 120.0, criterion_10),
)


def run_one(index: int, seed: int | None = None) -> CriterionResult:
    for idx, name, budget, fn in CRITERIA:
        if idx == index:
            break
    else:
        raise ValueError(f"no criterion {index}")
    actual_seed = DEFAULT_SEED if seed is None else seed
    start = time.perf_counter()
    passed, detail = fn(actual_seed)
    elapsed = time.perf_counter() - start
    if passed and elapsed >= budget:
        passed = False
        detail = f"over runtime budget ({elapsed:.2f}s >= {budget:g}s); {detail}"
    return CriterionResult(index=idx, name=name, passed=passed, detail=detail,
                           seconds=elapsed, budget=budget)


def run_all(seed: int | None = None) -> list:
    return [run_one(idx, seed) for idx, _, _, _ in CRITERIA]
