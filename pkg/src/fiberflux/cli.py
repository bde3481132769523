"""Config-driven command line front end.

Commands: ``invariants`` (closed-form reports per profile), ``flux``
(Monte Carlo fiber sweeps and convergence tables), ``sweep`` (the helicity
independence experiment), ``sew`` (boundary-jet joining demo with
plot-data output), and ``verify`` (the acceptance suite).

Experiments are described in a TOML file; ``--out``, ``--seed`` and
``--threads`` override it.  Outputs are CSV files named
``<command>_<profile>.csv`` plus ``report.txt`` in the output directory,
with LF line endings and floats at 17 significant digits so repeated runs
diff bytewise.  Exit codes: 0 success, 1 computation failure, 2 config
failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import acceptance
from .assembly import helicity_sweep, sweep_ranges
from .blocks import profile_from_spec, sew_lutz, lutz_valid, wronskian_fn
from .errors import ConfigError, FiberfluxError
from .flux_mc import (
    FiberSurface,
    convergence_report,
    dirac_crossings,
    dirac_orbit_measure,
    fiber_sweep,
    volume_measure,
)
from .invariants import (
    PROBABILITY,
    SINE_HELICITY_NOTE,
    CohomologyClass,
    fiber_flux,
    invariant_report,
    sine_helicity_reference,
)

__all__ = ["main", "entry"]

INVARIANT_COLUMNS = ("profile_id", "normalization", "winding", "wrappingness",
                     "trunkenness", "helicity", "gap", "tangency_count")
SWEEP_COLUMNS = ("theta", "value", "stderr", "n", "epsilon", "seed")
CONVERGENCE_COLUMNS = ("epsilon", "n", "value", "stderr")
SWEEP_ROW_COLUMNS = ("Q", "helicity", "winding", "wrappingness",
                     "trunkenness", "constraint_ok")


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", newline="\n")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class McSettings:
    epsilon: float = 1e-3
    n: int = 100_000
    seed: int = 12345
    theta_grid: int = 16
    epsilon_list: tuple = (1e-2, 1e-3, 1e-4)
    threads: int = 1


@dataclass
class SweepSettings:
    a: float = 1.0
    b: float = 4.0
    q_values: tuple = (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0)
    correction: CohomologyClass = field(
        default_factory=lambda: CohomologyClass(0.0, 1.0))


@dataclass
class SewSettings:
    left: tuple = (1.0, 0.0, 0.0, 1.0)
    right: tuple = (1.0, 0.0, 0.0, 1.0)
    extra_turns: int = 0
    samples: int = 257


@dataclass
class Experiment:
    profiles: dict
    measure: object
    mc: McSettings
    sweep: SweepSettings
    sew: SewSettings
    out_dir: Path


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")


def build_experiment(raw: dict, args) -> Experiment:
    profiles = {}
    for name, rec in raw.get("profiles", {}).items():
        try:
            profiles[name] = profile_from_spec(rec)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"profiles.{name}: {exc}")

    m = raw.get("measure", {})
    kind = m.get("kind", "volume")
    if kind == "volume":
        norm = m.get("normalization", PROBABILITY)
        try:
            measure = volume_measure(norm)
        except ValueError as exc:
            raise ConfigError(f"measure.normalization: {exc}")
    elif kind == "dirac_orbit":
        try:
            measure = dirac_orbit_measure(
                int(m.get("p", 1)), int(m.get("q", 0)),
                float(m.get("t0", 0.5)),
                float(m.get("x10", 0.0)), float(m.get("x20", 0.0)))
        except ValueError as exc:
            raise ConfigError(f"measure: {exc}")
    else:
        raise ConfigError(f"measure.kind: unknown kind {kind!r}")

    mc_raw = raw.get("mc", {})
    mc = McSettings(
        epsilon=float(mc_raw.get("epsilon", 1e-3)),
        n=int(mc_raw.get("n", 100_000)),
        seed=int(mc_raw.get("seed", 12345)),
        theta_grid=int(mc_raw.get("theta_grid", 16)),
        epsilon_list=tuple(float(e) for e in
                           mc_raw.get("epsilon_list", (1e-2, 1e-3, 1e-4))),
    )
    if args.seed is not None:
        mc.seed = int(args.seed)
    if args.threads is not None:
        mc.threads = max(1, int(args.threads))
    _require(0.0 < mc.epsilon <= 1e-2, "mc.epsilon must lie in (0, 1e-2]")
    _require(mc.n >= 1000, "mc.n must be at least 1000")
    _require(mc.theta_grid >= 8, "mc.theta_grid must be at least 8")
    _require(len(mc.epsilon_list) > 0
             and all(e1 < e0 for e0, e1 in zip(mc.epsilon_list,
                                               mc.epsilon_list[1:]))
             and all(0.0 < e <= 1e-2 for e in mc.epsilon_list),
             "mc.epsilon_list must be descending values in (0, 1e-2]")

    sw_raw = raw.get("sweep", {})
    corr = sw_raw.get("correction", [0.0, 1.0])
    _require(isinstance(corr, (list, tuple)) and len(corr) == 2,
             "sweep.correction must be a pair [n1, n2]")
    sweep = SweepSettings(
        a=float(sw_raw.get("a", 1.0)),
        b=float(sw_raw.get("b", 4.0)),
        q_values=tuple(float(q) for q in
                       sw_raw.get("q_values",
                                  (-2.0, -1.5, -1.0, -0.5, 0.0,
                                   0.5, 1.0, 1.5, 2.0))),
        correction=CohomologyClass(float(corr[0]), float(corr[1])),
    )
    _require(sweep.a != 0.0 and sweep.b != 0.0,
             "sweep.a and sweep.b must be nonzero")
    _require(len(sweep.q_values) >= 1, "sweep.q_values must be nonempty")

    se_raw = raw.get("sew", {})
    sew = SewSettings(
        left=tuple(float(v) for v in se_raw.get("left", (1.0, 0.0, 0.0, 1.0))),
        right=tuple(float(v) for v in se_raw.get("right", (1.0, 0.0, 0.0, 1.0))),
        extra_turns=int(se_raw.get("extra_turns", 0)),
        samples=int(se_raw.get("samples", 257)),
    )
    _require(len(sew.left) == 4 and len(sew.right) == 4,
             "sew.left and sew.right must be 4-tuples (p, q, p', q')")
    _require(sew.extra_turns >= 0, "sew.extra_turns must be >= 0")
    _require(sew.samples >= 2, "sew.samples must be >= 2")

    out = args.out or raw.get("output", {}).get("dir", "out")
    return Experiment(profiles=profiles, measure=measure, mc=mc, sweep=sweep,
                      sew=sew, out_dir=Path(out))


def _experiment(args, *, need_config: bool) -> Experiment:
    if args.config is None:
        if need_config:
            raise ConfigError("this command needs --config PATH")
        raw = {}
    else:
        raw = load_config(args.config)
    return build_experiment(raw, args)


def _write_report(exp: Experiment, lines) -> None:
    (exp.out_dir / "report.txt").write_text("\n".join(lines) + "\n",
                                            newline="\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_invariants(args) -> int:
    exp = _experiment(args, need_config=True)
    exp.out_dir.mkdir(parents=True, exist_ok=True)
    report_lines = []
    norm = (exp.measure.normalization
            if exp.measure.kind == "volume" else PROBABILITY)
    names = sorted(exp.profiles)
    all_rows = []
    for name in names:
        rep = invariant_report(exp.profiles[name], normalization=norm)
        row = (name, rep.normalization, rep.winding, rep.wrappingness,
               rep.trunkenness, rep.helicity, rep.gap, rep.tangency_count)
        all_rows.append(row)
        write_csv(exp.out_dir / f"invariants_{name}.csv",
                  INVARIANT_COLUMNS, [row])
        report_lines.append(
            f"profile {name}: winding={fmt(rep.winding)} "
            f"wrappingness={fmt(rep.wrappingness)} "
            f"trunkenness={fmt(rep.trunkenness)} "
            f"helicity={fmt(rep.helicity)} gap={fmt(rep.gap)} "
            f"tangencies={rep.tangency_count}")
    write_csv(exp.out_dir / "invariants_all.csv", INVARIANT_COLUMNS, all_rows)
    if not names:
        report_lines.append("no profiles configured")
    _write_report(exp, report_lines)
    for line in report_lines:
        print(line)
    return 0


def cmd_flux(args) -> int:
    exp = _experiment(args, need_config=True)
    exp.out_dir.mkdir(parents=True, exist_ok=True)
    report_lines = []
    mc = exp.mc
    for name in sorted(exp.profiles):
        profile = exp.profiles[name]
        sweep = fiber_sweep(profile, exp.measure, mc.theta_grid, mc.epsilon,
                            mc.n, mc.seed, max_workers=mc.threads)
        rows = [(pt.theta, pt.estimate.value, pt.estimate.stderr,
                 pt.estimate.n_samples, pt.estimate.epsilon,
                 pt.estimate.seed) for pt in sweep.points]
        write_csv(exp.out_dir / f"flux_{name}.csv", SWEEP_COLUMNS, rows)
        if exp.measure.kind == "volume":
            analytic = fiber_flux(profile)
            if exp.measure.normalization == PROBABILITY:
                analytic /= 4.0 * math.pi ** 2
            report_lines.append(
                f"profile {name}: empirical flux in "
                f"[{fmt(sweep.empirical_min)}, {fmt(sweep.empirical_max)}], "
                f"analytic single-annulus flux {fmt(analytic)}")
            conv = convergence_report(profile, exp.measure, FiberSurface(0.0),
                                      mc.epsilon_list,
                                      [mc.n], mc.seed)
            write_csv(exp.out_dir / f"flux_{name}_convergence.csv",
                      CONVERGENCE_COLUMNS,
                      [(r.epsilon, r.n, r.value, r.stderr) for r in conv])
        else:
            count = int(sweep.points[0].estimate.value)
            report_lines.append(
                f"profile {name}: crossings = {count} (exact)")
    if not exp.profiles:
        report_lines.append("no profiles configured")
    _write_report(exp, report_lines)
    for line in report_lines:
        print(line)
    return 0


def cmd_sweep(args) -> int:
    exp = _experiment(args, need_config=True)
    exp.out_dir.mkdir(parents=True, exist_ok=True)
    sw = exp.sweep
    rows = helicity_sweep(sw.a, sw.b, sw.q_values, sw.correction)
    write_csv(exp.out_dir / "sweep_rows.csv", SWEEP_ROW_COLUMNS,
              [(r.Q, r.helicity, r.winding, r.wrappingness, r.trunkenness,
                r.constraint_ok) for r in rows])
    ranges = sweep_ranges(rows)
    report_lines = [
        f"sweep a={fmt(sw.a)} b={fmt(sw.b)} over {len(rows)} Q values",
        f"winding range      = {fmt(ranges['winding_range'])}",
        f"wrappingness range = {fmt(ranges['wrappingness_range'])}",
        f"trunkenness range  = {fmt(ranges['trunkenness_range'])}",
        f"helicity range     = {fmt(ranges['helicity_range'])}",
    ]
    for r in rows:
        ref = sine_helicity_reference(sw.a, sw.b, r.Q, sw.correction)
        report_lines.append(
            f"Q={fmt(r.Q)}: helicity={fmt(r.helicity)} "
            f"shortcut-formula={fmt(ref)} flagged={not r.constraint_ok}")
    report_lines.append(f"note: {SINE_HELICITY_NOTE}")

    if ranges["all_flagged"]:
        report_lines.append(
            "verdict: all rows violate |a| < |b| - |Q|; sweep not valid")
        _write_report(exp, report_lines)
        for line in report_lines:
            print(line)
        return 1
    if len(rows) < 2:
        report_lines.append(
            "verdict: insufficient variation (single Q value)")
        _write_report(exp, report_lines)
        for line in report_lines:
            print(line)
        return 0
    q_span = max(r.Q for r in rows) - min(r.Q for r in rows)
    flat = max(ranges["winding_range"], ranges["wrappingness_range"],
               ranges["trunkenness_range"]) <= 1e-9
    varying = ranges["helicity_range"] >= 1e-3 * q_span
    if flat and varying:
        report_lines.append(
            "verdict: independence demonstrated (winding/wrappingness/"
            "trunkenness constant, helicity varying)")
    else:
        report_lines.append("verdict: independence not demonstrated")
    _write_report(exp, report_lines)
    for line in report_lines:
        print(line)
    return 0


def cmd_sew(args) -> int:
    exp = _experiment(args, need_config=False)
    exp.out_dir.mkdir(parents=True, exist_ok=True)
    se = exp.sew
    result = sew_lutz(se.left, se.right, se.extra_turns)
    pair = result.pair
    w = wronskian_fn(pair)
    rows = []
    for i in range(se.samples):
        t = i / (se.samples - 1)
        rows.append((t, pair.p.eval(t), pair.q.eval(t), pair.p.deriv(t),
                     pair.q.deriv(t), w(t)))
    write_csv(exp.out_dir / "sew_demo.csv",
              ("t", "p", "q", "dp", "dq", "wronskian"), rows)
    report = lutz_valid(pair)
    report_lines = [
        f"left jet  = {se.left}",
        f"right jet = {se.right}",
        f"turns added = {result.turns_added}, "
        f"total angle swept = {fmt(result.theta_total)}",
        f"valid = {report.is_valid}, min |W| = {fmt(report.min_abs_wronskian)}, "
        f"sign = {report.sign:+d}",
    ]
    _write_report(exp, report_lines)
    for line in report_lines:
        print(line)
    return 0


def cmd_verify(args) -> int:
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    results = acceptance.run_all(seed=args.seed)
    file_lines = []
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} criterion {res.index} ({res.seconds:.2f}s): "
              f"{res.name} - {res.detail}")
        # the written report omits timings so repeated runs diff clean
        file_lines.append(f"{status} criterion {res.index}: {res.name} - "
                          f"{res.detail}")
    failed = [r for r in results if not r.passed]
    summary = f"{len(results) - len(failed)}/{len(results)} criteria passed"
    file_lines.append(summary)
    print(summary)
    if out_dir:
        (out_dir / "verify_report.txt").write_text(
            "\n".join(file_lines) + "\n", newline="\n")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment TOML file")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the configured random seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (no effect on outputs)")
    parser = argparse.ArgumentParser(
        prog="fiberflux",
        description="invariants and flux estimates for torus-block flows")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("invariants", parents=[common],
                   help="closed-form invariant reports per profile")
    sub.add_parser("flux", parents=[common],
                   help="Monte Carlo fiber sweeps and convergence tables")
    sub.add_parser("sweep", parents=[common],
                   help="helicity independence sweep")
    sub.add_parser("sew", parents=[common],
                   help="boundary-jet sewing demo with plot data")
    sub.add_parser("verify", parents=[common],
                   help="run the acceptance suite")
    return parser


_COMMANDS = {
    "invariants": cmd_invariants,
    "flux": cmd_flux,
    "sweep": cmd_sweep,
    "sew": cmd_sew,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FiberfluxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
