"""Command-line front end.

Subcommands: decompose, integrate, poincare, verify, order. Axes are
numbered from 1 on the command line and in every emitted file. Exit codes:
0 success, 1 aborted run, 2 invalid or non-divergence-free input, 3 bad
flags.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import DegenerateField, DomainError, NotDiagonal, NotDivergenceFree, ProblemFormatError, SingularStep
from .integrate import SectionSpec, poincare, run
from .oracle import Rk45, RkOptions, jacobian_det, rk45
from .polyfield import VectorField, divergence_residuals, field_from_dict, field_to_dict, load_field
from .problems import BUILTINS, get_problem
from .splitting import Edfvf, build_scheme, edfvf_flow, integrals_basis

log = logging.getLogger("vpsplit")

EXIT_OK, EXIT_ABORTED, EXIT_INPUT, EXIT_FLAGS = 0, 1, 2, 3

# h0 for the convergence study when --h is not given
ORDER_H0 = {"quad_stokes": 0.05, "cubic_stokes": 0.1, "laurent": 0.1}

# sample points whose step comes within this fraction of a blow-up are
# redrawn; finite differences cannot resolve the map there
MAX_STEP_RATIO = 0.5


class FlagError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FLAGS, f"{self.prog}: error: {message}\n")


def _theta(text: str) -> float:
    t = text.strip().lower()
    try:
        if t.endswith("pi"):
            head = t[:-2].rstrip("*")
            return (float(head) if head else 1.0) * math.pi
        return float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid angle {text!r}") from None


def _point(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid point {text!r}") from None


def _direction(text: str):
    if text in ("both", "+1", "1", "-1"):
        return "both" if text == "both" else int(text)
    raise argparse.ArgumentTypeError("direction must be +1, -1 or both")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _exp_json(mi):
    return [e.numerator if e.denominator == 1 else f"{e.numerator}/{e.denominator}" for e in mi]


# problem resolution


def resolve_field(args) -> tuple[VectorField, str | None]:
    """The field named by ``--problem`` and its built-in name, if any."""
    if args.problem in BUILTINS:
        prob = get_problem(args.problem)
        return (
            prob.field(epsilon=args.epsilon, alpha=args.alpha, w_norm=args.wnorm, theta=args.theta),
            args.problem,
        )
    path = Path(args.problem)
    if not path.exists():
        raise FlagError(f"--problem {args.problem!r} is neither a built-in ({', '.join(BUILTINS)}) nor a file")
    return load_field(path), None


def _defaults(args, name, n):
    prob = get_problem(name) if name else None
    h = args.h if args.h is not None else (prob.h if prob else 0.01)
    T = args.T if args.T is not None else (prob.T if prob else 1.0)
    x0s = args.x0 or ([list(prob.x0)] if prob else None)
    if x0s is None:
        raise FlagError("--x0 is required for problem files")
    for x0 in x0s:
        if len(x0) != n:
            raise FlagError(f"--x0 has {len(x0)} entries, the problem has dimension {n}")
    if not h > 0:
        raise FlagError("--h must be positive")
    if T < 0:
        raise FlagError("--T must be non-negative")
    return h, T, x0s


def _make_method(name: str, f: VectorField, rel_tol: float = 1e-3, abs_tol: float = 1e-6):
    if name == "rk45":
        return Rk45(f, RkOptions(rel_tol=rel_tol, abs_tol=abs_tol))
    return build_scheme(f, 1 if name == "split1" else 2)


def _method_spec(args, f: VectorField) -> tuple:
    # compiled evaluators do not pickle, so workers rebuild from plain data
    return field_to_dict(f), args.method, args.rel_tol, args.abs_tol


def _rebuild(spec: tuple):
    data, name, rel_tol, abs_tol = spec
    return _make_method(name, field_from_dict(data), rel_tol, abs_tol)


def _emit_json(obj, path=None):
    text = json.dumps(obj, indent=2)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _numbered(path: str | None, k: int, total: int) -> str | None:
    if path is None or total == 1:
        return path
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{k}{p.suffix}"))


# decompose


def decomposition_report(f: VectorField) -> dict:
    scheme = build_scheme(f, 1)
    edf = [fl for fl in scheme.flows if isinstance(fl, Edfvf)]
    shears = [fl for fl in scheme.flows if not isinstance(fl, Edfvf)]
    return {
        "dim": f.dim,
        "edfvfs": [
            {"j": _exp_json(e.j), "a": e.a.tolist(), "c": e.c, "r": None if e.exponential else e.r.tolist()}
            for e in edf
        ],
        "shears": [
            {"axis": s.axis + 1, "terms": [{"exp": _exp_json(mi), "coef": c} for mi, c in s.g.items()]}
            for s in shears
        ],
        "divergence_residuals": [
            {"j": _exp_json(j), "residual": r, "scale": sc} for j, (r, sc) in divergence_residuals(f).items()
        ],
    }


def cmd_decompose(args) -> int:
    f, _ = resolve_field(args)
    try:
        report = decomposition_report(f)
    except NotDivergenceFree as exc:
        print(f"not divergence free: monomial {exc.j} has coefficient {exc.residual!r}", file=sys.stderr)
        _emit_json({"error": "not_divergence_free", "j": _exp_json(exc.j), "residual": exc.residual})
        return EXIT_INPUT
    _emit_json(report, args.output)
    return EXIT_OK


# integrate


def _write_csv(path, header, rows):
    fh = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if path:
            fh.close()


def _integrate_job(job):
    spec, x0, h, T, substep = job
    t0 = time.perf_counter()
    tr = run(_rebuild(spec), x0, h, T, substep=substep)
    return tr, time.perf_counter() - t0


def _fan_out(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def cmd_integrate(args) -> int:
    f, name = resolve_field(args)
    h, T, x0s = _defaults(args, name, f.dim)
    spec = _method_spec(args, f)
    results = _fan_out(_integrate_job, [(spec, x0, h, T, args.substep) for x0 in x0s], args.workers)
    summaries = []
    header = ["t"] + [f"x{i + 1}" for i in range(f.dim)]
    for k, (tr, wall) in enumerate(results):
        out = _numbered(args.output, k, len(results))
        if out:
            _write_csv(out, header, (np.concatenate(([t], x)) for t, x in zip(tr.times, tr.states)))
        summaries.append(
            {
                "x0": list(map(float, x0s[k])),
                "final_state": tr.final.tolist(),
                "t_final": tr.t_final,
                "status": tr.status,
                "reason": tr.reason,
                "t_abort": tr.t_abort,
                "wall_time": wall,
                "steps": tr.steps,
                "recorded": len(tr),
                "max_norm": tr.max_norm(),
                "output": out,
            }
        )
    _emit_json(summaries[0] if len(summaries) == 1 else summaries, args.summary)
    return EXIT_OK if all(s["status"] == "completed" for s in summaries) else EXIT_ABORTED


# poincare


def _section_job(job):
    method, x0, h, T, sec, substep = job
    return poincare(_rebuild(method), x0, h, T, sec, substep=substep)


def cmd_poincare(args) -> int:
    f, name = resolve_field(args)
    h, T, x0s = _defaults(args, name, f.dim)
    if args.method == "rk45":
        raise FlagError("poincare needs a splitting method (split1 or split2)")
    if not 1 <= args.axis <= f.dim:
        raise FlagError(f"--axis must lie in 1..{f.dim}")
    spec = SectionSpec(args.axis - 1, args.level, args.direction)
    method = _method_spec(args, f)
    sections = _fan_out(_section_job, [(method, x0, h, T, spec, args.substep) for x0 in x0s], args.workers)
    header = [f"x{i + 1}" for i in range(f.dim) if i != spec.axis]
    summaries = []
    for k, sec in enumerate(sections):
        out = _numbered(args.output, k, len(sections))
        _write_csv(out, header, sec.points)
        summaries.append({"points": len(sec), "status": sec.status, "reason": sec.reason, "t_abort": sec.t_abort, "output": out})
    if args.output:
        _emit_json(summaries[0] if len(summaries) == 1 else summaries, args.summary)
    return EXIT_OK if all(s["status"] == "completed" for s in summaries) else EXIT_ABORTED


# verify


def _sampler(name):
    # problem files are sampled in the unit ball
    return get_problem(name or "quad_stokes").sampler


def verify_report(f: VectorField, name, method: str, h: float, samples: int, delta: float, seed: int,
                  rel_tol: float = 1e-3, abs_tol: float = 1e-6) -> dict:
    """Volume, exactness and first-integral checks at seeded sample points."""
    rng = np.random.default_rng(seed)
    sampler = _sampler(name)
    resolved = build_scheme(f, 1)
    if method == "rk45":
        opts = RkOptions(rel_tol=rel_tol, abs_tol=abs_tol)
        step_map = lambda x, hh: rk45(f, x, hh, opts, record=False).final  # noqa: E731
    else:
        scheme = build_scheme(f, 1 if method == "split1" else 2)
        step_map = scheme.step
    dets, tries = [], 0
    while len(dets) < samples:
        tries += 1
        if tries > 1000 * max(samples, 1):
            raise RuntimeError("could not find admissible sample points")
        x = sampler(rng, f.dim)
        try:
            if resolved.step_ratio(x, h) > MAX_STEP_RATIO:
                continue
            dets.append(jacobian_det(step_map, x, h, delta))
        except (SingularStep, DomainError):
            continue
    dev = [abs(d - 1.0) for d in dets]

    exactness, drifts = [], []
    tight = RkOptions.tight(1e-12)
    for e in build_scheme(f, 1).flows:
        if not isinstance(e, Edfvf) or not np.any(e.a):
            continue
        errs, drift = [], []
        basis = integrals_basis(e)
        for _ in range(max(samples, 1)):
            x = sampler(rng, f.dim)
            try:
                t_star = e.blowup_time(x)
                hh = min(h, 0.5 * t_star)
                y = edfvf_flow(e, x, hh)
                ref = rk45(e.as_field(), x, hh, tight, record=False).final
            except (DomainError, SingularStep):
                continue
            errs.append(float(np.max(np.abs(y - ref))))
            # integrals x**b need the positive orthant
            xp = np.abs(x)
            if e.blowup_time(xp) <= hh:
                continue
            yp = edfvf_flow(e, xp, hh)
            for b in basis:
                i0 = float(np.prod(xp**b))
                drift.append(abs(float(np.prod(yp**b)) - i0) / abs(i0))
        exactness.append({"j": _exp_json(e.j), "max_error": max(errs, default=None), "samples": len(errs)})
        drifts.append({"j": _exp_json(e.j), "max_rel_drift": max(drift, default=None)})
    return {
        "method": method,
        "h": h,
        "samples": samples,
        "delta": delta,
        "max_abs_det_minus_1": max(dev, default=0.0),
        "dets": dets,
        "flow_exactness": exactness,
        "integral_drift": drifts,
    }


def cmd_verify(args) -> int:
    f, name = resolve_field(args)
    h = args.h if args.h is not None else 0.01
    report = verify_report(f, name, args.method, h, args.samples, args.delta, args.seed, args.rel_tol, args.abs_tol)
    _emit_json(report, args.output)
    return EXIT_OK


# order


def order_report(f: VectorField, x0, method: str, h0: float, T: float, ref_tol: float = 1e-12) -> dict:
    """Errors at ``T`` for ``h0 / 2**k``, k = 0..3, and the fitted log-log slope."""
    scheme = build_scheme(f, 1 if method == "split1" else 2)
    ref = rk45(f, x0, T, RkOptions.tight(ref_tol), record=False).final
    hs = [h0 / 2**k for k in range(4)]
    errs = []
    for h in hs:
        tr = run(scheme, x0, h, T, record_every=10**9)
        if not tr.completed:
            raise RuntimeError(f"run with h={h} aborted: {tr.reason}")
        errs.append(float(np.linalg.norm(tr.final - ref)))
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return {"method": method, "T": T, "h": hs, "errors": errs, "slope": slope, "reference": ref.tolist()}


def cmd_order(args) -> int:
    f, name = resolve_field(args)
    if args.method == "rk45":
        raise FlagError("order needs a splitting method (split1 or split2)")
    h0 = args.h if args.h is not None else ORDER_H0.get(name, 0.1)
    T = args.T if args.T is not None else 1.0
    x0 = args.x0[0] if args.x0 else (list(get_problem(name).x0) if name else None)
    if x0 is None:
        raise FlagError("--x0 is required for problem files")
    _emit_json(order_report(f, x0, args.method, h0, T), args.output)
    return EXIT_OK


# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", default="quad_stokes",
                        help=f"built-in name ({', '.join(BUILTINS)}) or path to a JSON problem file")
    common.add_argument("--method", choices=["split1", "split2", "rk45"], default="split2")
    common.add_argument("--h", type=float, default=None, help="step size")
    common.add_argument("--T", type=float, default=None, help="integration horizon")
    common.add_argument("--x0", type=_point, action="append", help="comma-separated initial point; repeat for a sweep")
    common.add_argument("--output", default=None)
    common.add_argument("--summary", default=None, help="write the JSON summary here instead of stdout")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--substep", action="store_true", help="halve steps that hit a blow-up instead of aborting")
    common.add_argument("--rel-tol", type=float, default=1e-3)
    common.add_argument("--abs-tol", type=float, default=1e-6)
    common.add_argument("--epsilon", type=float, default=None)
    common.add_argument("--alpha", type=float, default=None)
    common.add_argument("--wnorm", type=float, default=None)
    common.add_argument("--theta", type=_theta, default=None, help="radians, or e.g. 0.275pi")

    p = _Parser(prog="vpsplit", description="Explicit volume-preserving splitting for polynomial divergence-free fields.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("decompose", parents=[common], help="print the elementary fields and shears")
    sub.add_parser("integrate", parents=[common], help="write a trajectory CSV")
    ps = sub.add_parser("poincare", parents=[common], help="write section points as CSV")
    ps.add_argument("--axis", type=int, default=2)
    ps.add_argument("--level", type=float, default=0.0)
    ps.add_argument("--direction", type=_direction, default="both")
    pv = sub.add_parser("verify", parents=[common], help="finite-difference volume check")
    pv.add_argument("--samples", type=int, default=20)
    pv.add_argument("--delta", type=float, default=1e-5)
    sub.add_parser("order", parents=[common], help="convergence-order study")
    return p


COMMANDS = {
    "decompose": cmd_decompose,
    "integrate": cmd_integrate,
    "poincare": cmd_poincare,
    "verify": cmd_verify,
    "order": cmd_order,
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("VPS_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except FlagError as exc:
        print(f"vpsplit: error: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except (ProblemFormatError, NotDiagonal, DegenerateField) as exc:
        print(f"vpsplit: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NotDivergenceFree as exc:
        print(f"vpsplit: not divergence free: monomial {exc.j} has coefficient {exc.residual!r}", file=sys.stderr)
        return EXIT_INPUT
    except KeyError as exc:
        print(f"vpsplit: error: {exc}", file=sys.stderr)
        return EXIT_FLAGS


if __name__ == "__main__":
    sys.exit(main())
