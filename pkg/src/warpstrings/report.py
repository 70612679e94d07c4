"""Deterministic JSON / CSV rendering of results.

Floats are written with 17 significant digits and keys keep insertion order,
so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .census import CensusReport, GeodesicString
from .family import FamilyReport, SampleRecord
from .geometry import MembershipVerdict, WarpedMetric, curvature_samples
from .loops import SolveOutcome

SCHEMA_VERSION = 1

FAMILY_CSV_COLUMNS = ("s", "F_num", "F_den", "x0", "length", "dist_prev",
                      "diverging", "events")


def fmt_float(v: float) -> str:
    return format(float(v), ".17g")


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, Fraction):
        return _encode(fraction_dict(obj), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def fraction_dict(F: Optional[Fraction]) -> Optional[Dict[str, int]]:
    if F is None:
        return None
    return {"num": F.numerator, "den": F.denominator}


def verdict_dict(v: MembershipVerdict) -> Dict[str, Any]:
    return {
        "nonpositive_everywhere": v.nonpositive_everywhere,
        "ends_negative": v.ends_negative,
        "member": v.member,
        "witness": v.witness,
        "witness_curvature": v.witness_curvature,
        "end_bound_T": v.end_bound_T,
    }


def curvature_series(g: WarpedMetric, grid_n: int) -> Dict[str, List[float]]:
    xs = np.concatenate([g.window_grid(grid_n), np.sort(g.probe_points())])
    K = curvature_samples(g, xs)
    out = {"x": xs.tolist(), "K_base": K[0].tolist()}
    if K.shape[0] > 1:
        out["K_fiber"] = K[1].tolist()
    return out


def curvature_csv(series: Dict[str, List[float]]) -> str:
    cols = list(series)
    rows = zip(*(series[c] for c in cols))
    return _csv(cols, ([fmt_float(v) for v in row] for row in rows))


def outcome_dict(label: str, out: SolveOutcome) -> Dict[str, Any]:
    lengths = [t[0] for t in out.trace]
    return {
        "start": label,
        "status": out.status,
        "iterations": out.iterations,
        "newton_steps": out.newton_steps,
        "final_length": out.length,
        "final_mean_x": float(np.mean(out.loop.xs)),
        "grad_norm": out.grad_norm,
        "length_monotone": bool(all(b <= a for a, b in zip(lengths, lengths[1:]))),
        "note": out.note,
    }


def string_dict(s: GeodesicString) -> Dict[str, Any]:
    return {
        "x0": s.x0,
        "length": s.length,
        "morse_index": s.morse_index,
        "nullity": s.nullity,
        "multiplicity": s.multiplicity,
        "transverse_index": s.transverse_index,
        "nondegenerate": s.nondegenerate,
        "contribution": fraction_dict(s.contribution()) if s.nondegenerate else None,
        "origin": s.origin,
    }


def census_dict(c: CensusReport) -> Dict[str, Any]:
    return {
        "F": fraction_dict(c.F),
        "regular": c.regular,
        "winding": c.winding,
        "n_points": c.n_points,
        "strings": [string_dict(s) for s in c.strings],
        "escapes": len(c.escapes),
        "diagnostics": {
            "outcomes": [outcome_dict(k, o) for k, o in c.outcomes],
            "dedup": list(c.dedup),
        },
    }


def census_csv(c: CensusReport) -> str:
    cols = ("index", "x0", "length", "morse_index", "nullity", "multiplicity",
            "transverse_index", "contribution_num", "contribution_den")
    rows = []
    for i, s in enumerate(c.strings):
        contrib = s.contribution() if s.nondegenerate else None
        rows.append([str(i), fmt_float(s.x0), fmt_float(s.length), str(s.morse_index),
                     str(s.nullity), str(s.multiplicity),
                     "" if s.transverse_index is None else str(s.transverse_index),
                     "" if contrib is None else str(contrib.numerator),
                     "" if contrib is None else str(contrib.denominator)])
    return _csv(cols, rows)


def record_dict(r: SampleRecord) -> Dict[str, Any]:
    return {
        "s": r.s,
        "error": r.error,
        "membership": verdict_dict(r.verdict) if r.verdict is not None else None,
        "F": fraction_dict(r.F),
        "regular": r.census.regular if r.census is not None else None,
        "strings": [string_dict(s) for s in r.strings],
        "escapes": len(r.census.escapes) if r.census is not None else 0,
        "continuation": [outcome_dict(k, o) for k, o in r.continued],
        "dist_prev": r.dist_prev,
        "diverging_prev": r.diverging_prev,
    }


def family_summary(rep: FamilyReport) -> Dict[str, Any]:
    Fs = [r.F for r in rep.records]
    defined = [F for F in Fs if F is not None]
    clean = not rep.events and len(set(defined)) <= 1
    return {
        "event_count": len(rep.events),
        "event_kinds": sorted({e.kind for e in rep.events}),
        "F_values": sorted({str(F) for F in defined}),
        "unexplained_jumps": [list(j) for j in rep.unexplained_jumps()],
        "clean_constant_F": clean,
    }


def family_dict(rep: FamilyReport) -> Dict[str, Any]:
    return {
        "direction": rep.direction,
        "k": rep.k,
        "eps_len": rep.eps_len,
        "summary": family_summary(rep),
        "events": [{"s_lo": e.s_lo, "s_hi": e.s_hi, "kind": e.kind, "detail": e.detail}
                   for e in rep.events],
        "samples": [record_dict(r) for r in rep.records],
    }


def family_csv(rep: FamilyReport) -> str:
    rows = []
    for r in rep.records:
        F = r.F
        kinds = sorted({e.kind for e in rep.events if e.s_lo <= r.s <= e.s_hi})
        rows.append([
            fmt_float(r.s),
            "" if F is None else str(F.numerator),
            "" if F is None else str(F.denominator),
            ";".join(fmt_float(s.x0) for s in r.strings),
            ";".join(fmt_float(s.length) for s in r.strings),
            "" if r.dist_prev is None else fmt_float(r.dist_prev),
            "" if r.diverging_prev is None else str(r.diverging_prev).lower(),
            ";".join(kinds),
        ])
    return _csv(FAMILY_CSV_COLUMNS, rows)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def envelope(command: str, config: Dict[str, Any], result: Dict[str, Any]) -> Dict[str, Any]:
    return {"schema_version": SCHEMA_VERSION, "command": command,
            "config": config, "result": result}
