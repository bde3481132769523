"""Graphs of building blocks glued along torus boundaries.

An assembly keeps a dictionary of named blocks, a list of gluings (pairs of
boundary references with a GL2(Z) matrix), and per-thickened-torus-block
correction classes for the helicity pairing.  Validation checks the gluing
discipline: determinants +-1, each boundary used at most once, first-order
boundary data matching after the coordinate change, and equal Wronskian
signs across every interface (the sewability obstruction).

The standard decomposition splits a thickened torus as pants x S^1 union a
solid torus, then splits that solid torus again the same way, producing
two pants blocks and two solid tori with the inner core bounding a disk
(so its block is marked unknotted).  All three internal gluings use the
identity matrix and identical boundary jets by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .blocks import (
    BlockA,
    BlockB,
    BlockC,
    BoundaryRecord,
    Jet,
    Profile,
    _check_gl2z,
    block_c_field,
    profile_from_spec,
    profile_to_spec,
)
from .core import affine, constant, scalarfn_from_spec, scalarfn_to_spec, sinusoid
from .errors import IncompleteAssemblyError, NotTorusAutomorphismError
from .invariants import (
    ZERO_CLASS,
    CohomologyClass,
    helicity_block_c,
    trunkenness_block_c,
    winding_block_c,
    wrappingness_block_c,
)

__all__ = [
    "BoundaryRef",
    "Gluing",
    "Assembly",
    "Violation",
    "SweepRow",
    "standard_decomposition",
    "validate_assembly",
    "total_helicity",
    "helicity_sweep",
    "sweep_ranges",
    "assembly_to_dict",
    "assembly_from_dict",
]


@dataclass(frozen=True)
class BoundaryRef:
    block_id: str
    index: int


@dataclass(frozen=True)
class Gluing:
    a: BoundaryRef
    b: BoundaryRef
    matrix: tuple


@dataclass(frozen=True)
class Assembly:
    blocks: dict
    gluings: tuple
    corrections: dict = field(default_factory=dict)

    @property
    def euler_characteristic(self) -> int:
        # every block is a circle bundle over a surface with boundary, and
        # gluing along tori (chi = 0) adds nothing
        return sum(blk.euler_characteristic for blk in self.blocks.values())

    def boundary_count(self, block_id: str) -> int:
        blk = self.blocks[block_id]
        if isinstance(blk, BlockA):
            return 1
        if isinstance(blk, BlockB):
            return 3
        if isinstance(blk, BlockC):
            return 2
        raise TypeError(f"unknown block type {type(blk).__name__}")

    def external_boundaries(self) -> list:
        used = {(g.a.block_id, g.a.index) for g in self.gluings}
        used |= {(g.b.block_id, g.b.index) for g in self.gluings}
        out = []
        for bid in self.blocks:
            for idx in range(self.boundary_count(bid)):
                if (bid, idx) not in used:
                    out.append(BoundaryRef(bid, idx))
        return out


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


def _boundary_jet(assembly: Assembly, ref: BoundaryRef) -> Jet | None:
    blk = assembly.blocks[ref.block_id]
    if isinstance(blk, BlockA):
        return blk.boundary_jet()
    if isinstance(blk, BlockB):
        return blk.boundary_data[ref.index].jet()
    if isinstance(blk, BlockC):
        if blk.profile is None:
            return None
        pair = block_c_field(blk.profile).pair
        t = float(ref.index)
        return Jet(float(pair.p.eval(t)), float(pair.q.eval(t)),
                   float(pair.p.deriv(t)), float(pair.q.deriv(t)))
    raise TypeError(f"unknown block type {type(blk).__name__}")


def _transform_jet(jet: Jet, matrix) -> Jet:
    # 1-form coefficients transform by the inverse transpose
    m = np.asarray(matrix, dtype=float)
    a, b = m[0]
    c, d = m[1]
    det = a * d - b * c
    p = (d * jet.p - c * jet.q) / det
    q = (-b * jet.p + a * jet.q) / det
    dp = (d * jet.dp - c * jet.dq) / det
    dq = (-b * jet.dp + a * jet.dq) / det
    return Jet(p, q, dp, dq)


def validate_assembly(assembly: Assembly) -> list:
    """Structural checks; returns a list of violations (empty = ok)."""
    violations = []
    seen = {}
    for i, gl in enumerate(assembly.gluings):
        for ref in (gl.a, gl.b):
            if ref.block_id not in assembly.blocks:
                violations.append(Violation(
                    "missing-block", f"gluing {i} references {ref.block_id!r}"))
                continue
            if not 0 <= ref.index < assembly.boundary_count(ref.block_id):
                violations.append(Violation(
                    "bad-boundary-index",
                    f"gluing {i}: {ref.block_id!r} has no boundary {ref.index}"))
                continue
            key = (ref.block_id, ref.index)
            if key in seen:
                violations.append(Violation(
                    "reused-boundary",
                    f"boundary {key} appears in gluings {seen[key]} and {i}"))
            else:
                seen[key] = i
        try:
            _check_gl2z(gl.matrix)
        except NotTorusAutomorphismError as exc:
            violations.append(Violation("determinant", f"gluing {i}: {exc}"))
            continue
        if any(v.kind in ("missing-block", "bad-boundary-index")
               and f"gluing {i}" in v.detail for v in violations):
            continue
        jet_a = _boundary_jet(assembly, gl.a)
        jet_b = _boundary_jet(assembly, gl.b)
        if jet_a is None or jet_b is None:
            violations.append(Violation(
                "missing-boundary-data",
                f"gluing {i}: a referenced block has no boundary form data"))
            continue
        moved = _transform_jet(jet_a, gl.matrix)
        mismatch = max(abs(moved.p - jet_b.p), abs(moved.q - jet_b.q),
                       abs(moved.dp - jet_b.dp), abs(moved.dq - jet_b.dq))
        if mismatch > 1e-8:
            violations.append(Violation(
                "boundary-mismatch",
                f"gluing {i}: transformed data differs by {mismatch:g}"))
        wa, wb = moved.wronskian, jet_b.wronskian
        if abs(wa) <= 1e-12 or abs(wb) <= 1e-12:
            violations.append(Violation(
                "degenerate-boundary",
                f"gluing {i}: boundary Wronskian vanishes"))
        elif (wa > 0) != (wb > 0):
            violations.append(Violation(
                "sewability",
                f"gluing {i}: Wronskian signs differ ({wa:g} vs {wb:g})"))
    return violations


def standard_decomposition() -> Assembly:
    """Four-block decomposition of a thickened torus: two pants blocks and
    two solid tori, the inner one with disk-bounding core (unknotted).

    Boundary data is identical on every interface (solid tori of radius 1/2
    with unit angular coefficient; pants collars matching their jet), so
    the three identity gluings validate by construction.  The two leftover
    pants boundaries are the original torus boundary components.
    """
    record = BoundaryRecord(h=affine(0.25, 1.0), phi=constant(1.0))
    pants = BlockB(boundary_data=(record, record, record))
    solid = BlockA(phi=constant(1.0), R=0.5)
    ident = ((1, 0), (0, 1))
    blocks = {
        "B1": pants,
        "B2": pants,
        "A1": solid,
        "A2": replace(solid, unknotted_core=True),
    }
    gluings = (
        Gluing(BoundaryRef("B1", 2), BoundaryRef("B2", 0), ident),
        Gluing(BoundaryRef("B2", 1), BoundaryRef("A2", 0), ident),
        Gluing(BoundaryRef("B2", 2), BoundaryRef("A1", 0), ident),
    )
    return Assembly(blocks=blocks, gluings=gluings, corrections={})


def total_helicity(assembly: Assembly) -> float:
    """Sum of thickened-torus helicity contributions with their correction
    classes.  Solid-torus and pants blocks contribute only through the
    corrections supplied for neighboring thickened tori."""
    total = 0.0
    for bid, blk in assembly.blocks.items():
        if not isinstance(blk, BlockC):
            continue
        if blk.profile is None:
            raise IncompleteAssemblyError(
                f"block {bid!r} has no profile; cannot integrate helicity")
        correction = assembly.corrections.get(bid, ZERO_CLASS)
        total += helicity_block_c(blk.profile, correction)
    return total


@dataclass(frozen=True)
class SweepRow:
    Q: float
    helicity: float
    winding: float
    wrappingness: float
    trunkenness: float
    constraint_ok: bool


def helicity_sweep(a: float, b: float, q_values,
                   correction: CohomologyClass = CohomologyClass(0.0, 1.0)) -> list:
    """Invariants of the family f = a, g = Q sin(pi t) + b across Q.

    Rows violating |a| < |b| - |Q| (where min(|f|, |g|) = |a| pointwise is
    no longer guaranteed) are flagged via constraint_ok = False.  With a
    nonzero n2 coefficient the helicity varies linearly in Q through the
    endpoint pairing G(1) = 2 Q / pi + b while winding, wrappingness, and
    trunkenness stay constant: the demonstration that helicity does not
    determine them.
    """
    if a == 0 or b == 0:
        raise ValueError("sweep requires nonzero constants a and b")
    beta = CohomologyClass(1.0, 0.0)
    rows = []
    for q_raw in q_values:
        Q = float(q_raw)
        profile = Profile(f=constant(a), g=sinusoid(Q, 1, 0.0, b))
        rows.append(SweepRow(
            Q=Q,
            helicity=helicity_block_c(profile, correction),
            winding=winding_block_c(profile, beta),
            wrappingness=wrappingness_block_c(profile),
            trunkenness=trunkenness_block_c(profile),
            constraint_ok=abs(a) < abs(b) - abs(Q),
        ))
    return rows


def sweep_ranges(rows) -> dict:
    """Max-minus-min per column plus monotonicity and flag summaries."""
    if not rows:
        raise ValueError("empty sweep")

    def rng(values):
        return max(values) - min(values)

    hel = [r.helicity for r in rows]
    ordered = sorted(rows, key=lambda r: r.Q)
    hel_by_q = [r.helicity for r in ordered]
    increasing = all(x < y for x, y in zip(hel_by_q, hel_by_q[1:]))
    decreasing = all(x > y for x, y in zip(hel_by_q, hel_by_q[1:]))
    return {
        "winding_range": rng([r.winding for r in rows]),
        "wrappingness_range": rng([r.wrappingness for r in rows]),
        "trunkenness_range": rng([r.trunkenness for r in rows]),
        "helicity_range": rng(hel),
        "helicity_monotone": increasing or decreasing,
        "all_flagged": all(not r.constraint_ok for r in rows),
        "any_flagged": any(not r.constraint_ok for r in rows),
    }


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _block_to_dict(blk) -> dict:
    if isinstance(blk, BlockA):
        return {"kind": "A", "phi": scalarfn_to_spec(blk.phi), "R": blk.R,
                "unknotted_core": blk.unknotted_core}
    if isinstance(blk, BlockB):
        return {"kind": "B", "boundaries": [
            {"h": scalarfn_to_spec(rec.h), "phi": scalarfn_to_spec(rec.phi),
             "collar": rec.collar} for rec in blk.boundary_data]}
    if isinstance(blk, BlockC):
        return {"kind": "C",
                "profile": (None if blk.profile is None
                            else profile_to_spec(blk.profile)),
                "unknotted": blk.unknotted}
    raise TypeError(f"unknown block type {type(blk).__name__}")


def _block_from_dict(rec: dict):
    kind = rec.get("kind")
    if kind == "A":
        return BlockA(phi=scalarfn_from_spec(rec["phi"]), R=float(rec["R"]),
                      unknotted_core=bool(rec.get("unknotted_core", False)))
    if kind == "B":
        recs = tuple(BoundaryRecord(h=scalarfn_from_spec(r["h"]),
                                    phi=scalarfn_from_spec(r["phi"]),
                                    collar=float(r.get("collar", 0.25)))
                     for r in rec["boundaries"])
        return BlockB(boundary_data=recs)
    if kind == "C":
        prof = rec.get("profile")
        return BlockC(profile=None if prof is None else profile_from_spec(prof),
                      unknotted=bool(rec.get("unknotted", False)))
    raise ValueError(f"unknown block kind {kind!r}")


def assembly_to_dict(assembly: Assembly) -> dict:
    return {
        "blocks": {bid: _block_to_dict(blk)
                   for bid, blk in assembly.blocks.items()},
        "gluings": [{"a": [g.a.block_id, g.a.index],
                     "b": [g.b.block_id, g.b.index],
                     "matrix": [list(row) for row in g.matrix]}
                    for g in assembly.gluings],
        "corrections": {bid: [c.n1, c.n2]
                        for bid, c in assembly.corrections.items()},
    }


def assembly_from_dict(data: dict) -> Assembly:
    blocks = {bid: _block_from_dict(rec)
              for bid, rec in data.get("blocks", {}).items()}
    gluings = tuple(
        Gluing(a=BoundaryRef(str(g["a"][0]), int(g["a"][1])),
               b=BoundaryRef(str(g["b"][0]), int(g["b"][1])),
               matrix=tuple(tuple(int(x) for x in row)
                            for row in g["matrix"]))
        for g in data.get("gluings", []))
    corrections = {bid: CohomologyClass(float(v[0]), float(v[1]))
                   for bid, v in data.get("corrections", {}).items()}
    return Assembly(blocks=blocks, gluings=gluings, corrections=corrections)
