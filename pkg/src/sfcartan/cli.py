"""Command-line front end: classify, synth, agtest, sweep.

Exit codes: 0 success, 2 bad arguments, 3 inconsistent control sequence or
plan, 4 extremal in the low-energy optimal region (second-order test not
applicable).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .bangbang import (
    Arc,
    ArcKind,
    ControlSequence,
    InconsistentSequence,
    InvalidStart,
    MissingBranchChoice,
    NoBangDynamics,
    sequence_from_covector,
    synthesize,
)
from .lie_cartan import GroupPoint
from .optimality import (
    ExcludedExtremal,
    QFormProblem,
    ag_test,
    eight_switch_problem,
    switching_bound_report,
)
from .singular_mixed import (
    Bang,
    InadmissibleJunction,
    Singular,
    StratumWithoutMixedSupport,
    make_mixed_sequence,
)
from .vertical import Branch, CovectorState, classify_stratum

SCHEMA = "sfcartan/1"
OUT_ENV = "SFCARTAN_OUT_DIR"
CSV_COLUMNS = ("t", "x", "y", "z", "v", "w", "theta", "h3", "s1", "s2")

CSV_HELP = """\
CSV columns (comma separated, '.' decimals, one header row):
  t          time
  x,y,z,v,w  point of the group
  theta      angle of the normalised covector in [0, 2pi) (empty if unknown)
  h3         covector component h3 (empty if unknown)
  s1,s2      control (u1, u2) on the arc starting at this sample
A summary line 'schema=... endpoint=...' goes to stderr.
"""

JSON_HELP = """\
JSON fields: schema (format tag), command, and the command payload:
  classify  case, level (C1..C8), h4, h5, E (reduced), symmetry {swap,e1,e2}, boundary
  agtest    verdict (NotOptimal|Undetermined), pivot, witness (0-based indices of the
            violating principal minor), witness_value, dim_W, pivots, known_optimal,
            reason; with --matrices also full_q, w_basis, restricted_q
  sweep     samples [{h4, h5, E, case, level, min_not_optimal_arcs,
            max_candidate_switchings}], summary {kind, bound, max_candidate_switchings, holds}
"""


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


_INCONSISTENT = (InconsistentSequence, MissingBranchChoice, InadmissibleJunction,
                 StratumWithoutMixedSupport, NoBangDynamics, InvalidStart)


# --- argument helpers --------------------------------------------------------

def _add_covector(p: argparse.ArgumentParser, need_h3: bool = True):
    g = p.add_argument_group("covector (h1..h5, or theta with h3 on H = 1)")
    for name in ("h1", "h2", "h3", "h4", "h5"):
        g.add_argument(f"--{name}", type=float)
    g.add_argument("--theta", type=float, help="angle in radians (normalised to [0, 2pi))")


def _covector(args) -> CovectorState | None:
    h4, h5 = args.h4, args.h5
    if args.theta is not None:
        if None in (args.h3, h4, h5):
            raise CliError("--theta needs --h3, --h4, --h5", 2)
        return CovectorState.from_theta(args.theta % (2 * math.pi), args.h3, h4, h5)
    vals = [args.h1, args.h2, args.h3, h4, h5]
    if all(v is None for v in vals[:3]):
        return None
    if any(v is None for v in vals):
        raise CliError("give all of --h1 .. --h5, or --theta --h3 --h4 --h5", 2)
    return CovectorState(*vals)


def _branches(text: str | None) -> list[Branch]:
    if not text:
        return []
    try:
        return [Branch.parse(b) for b in text.split(",") if b.strip()]
    except ValueError as exc:
        raise CliError(f"bad branch list {text!r}: use up/down", 2) from exc


def _parse_seq(text: str) -> ControlSequence:
    """'++:1,-+:2' (bang letters) or 'S0.5,-1:3' style singular entries."""
    arcs = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            body, dur = tok.rsplit(":", 1)
            if body.startswith("S"):
                u1, u2 = (float(c) for c in body[1:].split("/"))
                kind = ArcKind.H1_SINGULAR if abs(u2) == 1.0 else ArcKind.H2_SINGULAR
                arcs.append(Arc((u1, u2), float(dur), kind))
            else:
                if len(body) != 2 or set(body) - {"+", "-"}:
                    raise ValueError(body)
                arcs.append(Arc(tuple(1.0 if c == "+" else -1.0 for c in body), float(dur)))
        except ValueError as exc:
            raise CliError(f"bad arc {tok!r}: use ++:1.5 or S0.5/-1:2", 2) from exc
    try:
        return ControlSequence(tuple(arcs))
    except ValueError as exc:
        raise CliError(str(exc), 3) from exc


def _parse_plan(text: str):
    """'S1,Bu,S5,B3d': S<d> singular arc, B[n][u|d...] bang piece."""
    plan = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            if tok[0] == "S":
                plan.append(Singular(float(tok[1:])))
            elif tok[0] == "B":
                rest = tok[1:]
                digits = "".join(c for c in rest if c.isdigit())
                br = tuple(Branch.UP if c == "u" else Branch.DOWN for c in rest if c in "ud")
                if set(rest) - set("0123456789ud"):
                    raise ValueError(tok)
                plan.append(Bang(int(digits) if digits else None, br))
            else:
                raise ValueError(tok)
        except (ValueError, IndexError) as exc:
            raise CliError(f"bad plan item {tok!r}: use S<d>, B, B<n>, with u/d branch letters", 2) from exc
    return plan


def _out_path(args, default_name: str) -> Path | None:
    if args.out:
        return Path(args.out)
    d = os.environ.get(OUT_ENV)
    if d:
        return Path(d) / default_name
    return None


def _emit_json(args, payload: dict, default_name: str):
    text = json.dumps({"schema": SCHEMA, **payload}, indent=2, sort_keys=True) + "\n"
    path = _out_path(args, default_name)
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def _fmt(x: float) -> str:
    return "" if x is None or not np.isfinite(x) else repr(float(x))


# --- commands ----------------------------------------------------------------

def cmd_classify(args) -> int:
    h = _covector(args)
    if h is not None and args.E is None:
        hn = h.normalized()
        h4, h5, E = hn.h4, hn.h5, hn.E
    else:
        if None in (args.h4, args.h5, args.E):
            raise CliError("classify needs --h4 --h5 --E or a full covector", 2)
        h4, h5, E = args.h4, args.h5, args.E
    try:
        st = classify_stratum(h4, h5, E, args.tol)
    except ValueError as exc:
        raise CliError(str(exc), 2) from exc
    _emit_json(args, {"command": "classify", **st.as_dict()}, "classify.json")
    return 0


def _build_sequence(args, h: CovectorState | None) -> ControlSequence:
    if args.seq is not None:
        seq = _parse_seq(args.seq)
        return ControlSequence(seq.arcs, h, None)
    if args.plan is not None:
        if None in (args.h4, args.h5):
            raise CliError("--plan needs --h4 and --h5", 2)
        if not args.h4 >= args.h5 >= 0:
            raise CliError("--plan expects reduced Casimirs h4 >= h5 >= 0", 2)
        st = classify_stratum(args.h4, args.h5, h.normalized().E if h is not None else args.h4)
        return make_mixed_sequence(st, _parse_plan(args.plan), start=h)
    if h is None:
        raise CliError("need a covector, --seq or --plan", 2)
    return sequence_from_covector(h, args.arcs, args.first_dur, args.last_dur, _branches(args.branch))


def cmd_synth(args) -> int:
    h = _covector(args)
    try:
        seq = _build_sequence(args, h)
        known = seq.covector is not None
        lam0 = seq.covector if known else CovectorState(0.0, 0.0, 0.0, 0.0, 0.0)
        ext = synthesize(GroupPoint(), lam0, seq, args.samples, check=known)
    except _INCONSISTENT as exc:
        raise CliError(f"inconsistent sequence: {exc}", 3) from exc
    except ValueError as exc:
        raise CliError(str(exc), 2) from exc
    path = _out_path(args, "trajectory.csv")
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        if len(seq):
            theta = ext.theta if known else [None] * len(ext.times)
            for i, t in enumerate(ext.times):
                h3 = ext.covectors[i, 2] if known else None
                w.writerow([_fmt(t), *(_fmt(c) for c in ext.points[i]), _fmt(theta[i]),
                            _fmt(h3), _fmt(ext.controls[i, 0]), _fmt(ext.controls[i, 1])])
    finally:
        if path:
            fh.close()
    end = ext.endpoint.array
    print(f"schema={SCHEMA} arcs={len(seq)} T={seq.total_time!r} endpoint="
          + ",".join(repr(float(c)) for c in end), file=sys.stderr)
    return 0


def cmd_agtest(args) -> int:
    h = _covector(args)
    try:
        if args.eight_switch is not None:
            prob = eight_switch_problem(*args.eight_switch)
        else:
            seq = _build_sequence(args, h)
            if seq.covector is None:
                raise CliError("agtest needs a covector", 2)
            prob = QFormProblem.from_sequence(seq, pivot=args.pivot)
        if args.pivot is not None:
            prob = QFormProblem(prob.times, prob.controls, prob.covector, args.pivot)
        rep = ag_test(prob, args.tol)
    except ExcludedExtremal as exc:
        raise CliError(f"low-energy optimal region: {exc}", 4) from exc
    except _INCONSISTENT as exc:
        raise CliError(f"inconsistent sequence: {exc}", 3) from exc
    except ValueError as exc:
        raise CliError(str(exc), 2) from exc
    _emit_json(args, {"command": "agtest", **rep.to_dict(args.matrices)}, "agtest.json")
    return 0


def _draw(kind: str, rng: np.random.Generator) -> tuple[float, float, float]:
    """Reduced Casimirs h4 >= h5 >= 0 and an energy with bang or mixed dynamics."""
    h4 = float(rng.uniform(0.2, 2.0))
    if kind == "bang":
        h5 = float(rng.uniform(0.0, 1.0)) * h4
        return h4, h5, -h5 + float(rng.uniform(0.05, 3.0)) * h4
    case = int(rng.integers(1, 4))
    h5 = {1: float(rng.uniform(0.05, 0.95)) * h4, 2: 0.0, 3: h4}[case]
    return h4, h5, h4


def _sweep_one(job):
    kind, h4, h5, E, max_arcs = job
    st = classify_stratum(h4, h5, E)
    rep = switching_bound_report(st, max_arcs, kind)
    return {"h4": h4, "h5": h5, "E": E, "case": st.case, "level": st.name,
            "min_not_optimal_arcs": rep.min_not_optimal_arcs,
            "max_candidate_switchings": rep.max_candidate_switchings}


def cmd_sweep(args) -> int:
    rng = np.random.default_rng(args.seed)
    jobs = [(args.kind, *_draw(args.kind, rng), args.max_arcs) for _ in range(args.samples)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    bound = 11 if args.kind == "bang" else 13
    counts = [r["max_candidate_switchings"] for r in rows]
    worst = None if any(c is None for c in counts) else max(counts, default=None)
    summary = {"kind": args.kind, "bound": bound, "samples": len(rows),
               "max_candidate_switchings": worst,
               "holds": all(c is not None and c <= bound for c in counts)}
    _emit_json(args, {"command": "sweep", "seed": args.seed, "samples": rows,
                      "summary": summary}, "sweep.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sfcartan",
        description="Extremals and switching bounds of the l-infinity sub-Finsler problem "
                    "on the Cartan group.",
        epilog=f"Output goes to --out, else to ${OUT_ENV}/<default name>, else stdout.\n\n"
               + CSV_HELP + "\n" + JSON_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="stratum of Casimirs or of a covector",
                       epilog=JSON_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_covector(c)
    c.add_argument("--E", type=float, help="energy (with --h4 --h5)")
    c.add_argument("--tol", type=float, default=1e-9)
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    def seq_opts(q):
        _add_covector(q)
        q.add_argument("--arcs", type=int, default=4, help="number of maximal bang arcs")
        q.add_argument("--first-dur", type=float, help="duration of the first arc")
        q.add_argument("--last-dur", type=float, help="duration of the last arc")
        q.add_argument("--branch", help="corner choices, e.g. up,down,up")
        q.add_argument("--seq", help="explicit arcs, e.g. '++:1,-+:0.5' or 'S0.5/-1:2'")
        q.add_argument("--plan", help="mixed plan on reduced h4 >= h5, e.g. 'S1,Bu,S5,Bu'")
        q.add_argument("--out")

    s = sub.add_parser("synth", help="sample a trajectory to CSV",
                       epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    seq_opts(s)
    s.add_argument("--samples", type=int, default=16, help="samples per arc")
    s.set_defaults(func=cmd_synth)

    a = sub.add_parser("agtest", help="second-order test of a piecewise-constant control",
                       epilog=JSON_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    seq_opts(a)
    a.add_argument("--eight-switch", type=float, nargs=3, metavar=("H4", "H5", "E"),
                   help="the nine-arc configuration on case 1 C4")
    a.add_argument("--pivot", type=int)
    a.add_argument("--tol", type=float, default=1e-10)
    a.add_argument("--matrices", action="store_true", help="dump Q, W basis and Q|W")
    a.set_defaults(func=cmd_agtest)

    w = sub.add_parser("sweep", help="switching bounds over random strata",
                       epilog=JSON_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    w.add_argument("--kind", choices=("bang", "mixed"), default="bang")
    w.add_argument("--samples", type=int, default=100)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--max-arcs", type=int, default=14)
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
