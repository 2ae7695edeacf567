"""Command-line driver.

Subcommands: ``converge``, ``series``, ``postlie``, ``autonomize``.  Exit
status is 0 when every check passes, 1 when a check fails and 2 for
configuration errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy

from . import io as mio
from .autonomize import AUGMENTED_METHODS, augmented_trajectory
from .magnus import get_method, integrate, reference_solve
from .matpoly import MatPoly
from .postlie import (
    TField,
    adjoint_axiom_check,
    geometric_magnus_check,
    jacobi_bracket,
    left_ladder,
    postlie_axiom_check,
    torsion_bracket,
    cartan_connection,
)
from .prelie import (
    MAX_GRADE,
    TreeSeries,
    bernoulli,
    eval_vector_field_prelie,
    expand_magmatic,
    flow_taylor,
    graft,
    prelie_inverse,
    prelie_magnus,
    substitute,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

CONVERGE_FIELDS = ["method", "nsteps", "h", "error", "slope", "local_slope"]
AUTONOMIZE_FIELDS = ["method", "nsteps", "discrepancy", "t_final", "t_error", "aff_exact", "x_exact", "status"]

OMEGA4_PRINTED = ((Fraction(1, 6), "((x↷x)↷x)↷x"), (Fraction(1, 12), "x↷((x↷x)↷x)"))


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    problem: str | None = None
    methods: list = field(default_factory=list)
    t0: float = 0.0
    t_end: float = 1.0
    steps: list = field(default_factory=list)
    order: int = 4
    check: str | None = None
    seed: int = 0
    out: str | None = None
    format: str = "csv"

    def validate(self):
        if self.steps:
            if any(s < 1 for s in self.steps):
                raise ConfigError("steps must be positive")
            if any(b <= a for a, b in zip(self.steps, self.steps[1:])):
                raise ConfigError("steps must be strictly increasing")
        for m in self.methods:
            try:
                get_method(m)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if self.command in ("converge", "autonomize"):
            if not self.steps:
                raise ConfigError("--steps must be nonempty")
            if not self.methods:
                raise ConfigError("--methods must be nonempty")
            if not self.t_end > self.t0:
                raise ConfigError("--t-end must exceed --t0")
            if self.problem is None:
                raise ConfigError("--problem is required")


def _csv_list(text, conv=str):
    items = [s.strip() for s in text.split(",") if s.strip()]
    try:
        return [conv(s) for s in items]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad list {text!r}") from None


def _load(cfg):
    try:
        return mio.load_problem(cfg.problem)
    except (OSError, ValueError, TypeError, KeyError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot read problem {cfg.problem!r}: {exc}") from None


def _rel(X, Y):
    return float(np.linalg.norm(X - Y) / np.linalg.norm(Y))


def _ls_slope(hs, errs):
    if len(hs) < 2 or any(not e > 0 for e in errs):
        return math.nan
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


# commands -----------------------------------------------------------------

def cmd_converge(cfg, tol=1e-12):
    A, Y0 = _load(cfg)
    ref = reference_solve(A, cfg.t0, cfg.t_end, tol=tol) @ Y0
    records = []
    for method in cfg.methods:
        rows = []
        for n in cfg.steps:
            Y = integrate(method, A, cfg.t0, cfg.t_end, n, Y0).final
            rows.append({"method": method, "nsteps": n, "h": (cfg.t_end - cfg.t0) / n, "error": _rel(Y, ref)})
        slope = _ls_slope([r["h"] for r in rows], [r["error"] for r in rows])
        for i, r in enumerate(rows):
            r["slope"] = slope
            r["local_slope"] = _ls_slope([rows[i - 1]["h"], r["h"]], [rows[i - 1]["error"], r["error"]]) if i else None
        records.extend(rows)
    return records, [], True


def _omega_report(N):
    omega = prelie_magnus(N)
    x = TreeSeries.generator()
    rhs = x
    term = x
    for n in range(1, N):
        term = graft(omega, term, max_grade=N)
        rhs = rhs + term * (bernoulli(n) / math.factorial(n))
    ok = rhs.truncate(N) == omega
    lines = [str(omega), f"{'PASS' if ok else 'FAIL'} fixed point through grade {N}"]
    return [{"check": "omega", "order": N, "series": str(omega), "pass": ok}], lines, ok


def _inverse_report(N):
    omega, W = prelie_magnus(N), prelie_inverse(N)
    x = TreeSeries.generator()
    ow = substitute(omega, W, order=N)
    wo = substitute(W, omega, order=N)
    ok1, ok2 = ow == x, wo == x
    lines = [
        str(W),
        f"{'PASS' if ok1 else 'FAIL'} Omega(W(x)) = x through grade {N}: {ow}",
        f"{'PASS' if ok2 else 'FAIL'} W(Omega(x)) = x through grade {N}: {wo}",
    ]
    recs = [
        {"check": "inverse", "order": N, "series": str(ow), "pass": ok1},
        {"check": "inverse-reversed", "order": N, "series": str(wo), "pass": ok2},
    ]
    return recs, lines, ok1 and ok2


def _omega4_report():
    printed = TreeSeries()
    for c, e in OMEGA4_PRINTED:
        printed = printed + expand_magmatic(e) * c
    grade4 = prelie_magnus(4).grade(4)
    ok = grade4 == printed
    lines = [f"grade 4 of Omega: {grade4}", f"printed two-term form: {printed}"]
    if not ok and grade4 == -printed:
        lines.append("note: the two differ exactly by an overall sign")
    lines.append(f"{'PASS' if ok else 'FAIL'} grade-4 identity")
    return [{"check": "omega4-paper", "order": 4, "series": str(grade4), "pass": ok}], lines, ok


def euler_backward(N, f_expr="y**2"):
    """Modified field of forward Euler and the two exact checks built on it.

    Returns ``(modified, ok_euler, ok_taylor)``: the time-1 flow of
    ``Omega(h f)`` must equal ``y + h f(y)`` through ``h**N``, and the Taylor
    polynomial of the exact flow must equal ``y + W(t f)(y)``.
    """
    y, h, t = sympy.symbols("y h t")
    f = sympy.sympify(f_expr)
    modified = eval_vector_field_prelie(prelie_magnus(N), [h * f], [y])[0]
    # every term of the modified field carries at least one power of h
    flow_h = flow_taylor([modified], [y], t, N, small=(h, N))[0].subs(t, 1)
    ok_euler = sympy.expand(flow_h - (y + h * f)) == 0
    W = eval_vector_field_prelie(prelie_inverse(N), [t * f], [y])[0]
    exact = flow_taylor([f], [y], t, N)[0]
    ok_taylor = sympy.expand(exact - (y + W)) == 0
    return sympy.expand(modified), ok_euler, ok_taylor


def _euler_report(N):
    modified, ok1, ok2 = euler_backward(N)
    lines = [
        f"modified field for y' = y**2: {modified}",
        f"{'PASS' if ok1 else 'FAIL'} exact flow of modified field = Euler step through h^{N}",
        f"{'PASS' if ok2 else 'FAIL'} exact flow Taylor polynomial = y + W(t f)(y) through t^{N}",
    ]
    recs = [
        {"check": "euler-backward", "order": N, "series": str(modified), "pass": ok1},
        {"check": "taylor-flow", "order": N, "series": "", "pass": ok2},
    ]
    return recs, lines, ok1 and ok2


SERIES_CHECKS = {
    "omega": _omega_report,
    "inverse": _inverse_report,
    "omega4-paper": lambda N: _omega4_report(),
    "euler-backward": _euler_report,
}


def cmd_series(cfg):
    if cfg.check not in SERIES_CHECKS:
        raise ConfigError(f"unknown check {cfg.check!r}; known: {', '.join(SERIES_CHECKS)}")
    if not 1 <= cfg.order <= MAX_GRADE:
        raise ConfigError(f"--order must lie in [1, {MAX_GRADE}]")
    return SERIES_CHECKS[cfg.check](cfg.order)


def _random_tfield(rng, degree, dim, lo, hi, h=None):
    coeffs = [rng.integers(lo, hi + 1, (dim, dim)).tolist() for _ in range(degree + 1)]
    hv = int(rng.integers(lo, hi + 1)) if h is None else h
    return TField(MatPoly(coeffs), hv)


def _sweep(rng, count, degree, dim, entry, checker, name):
    recs = []
    ok_all = True
    for i in range(count):
        H, K, J = (_random_tfield(rng, degree, dim, -entry, entry) for _ in range(3))
        r1, r2 = checker(H, K, J)
        ok = r1.is_zero() and r2.is_zero()
        ok_all &= ok
        recs.append({"check": name, "index": i, "r1_zero": r1.is_zero(), "r2_zero": r2.is_zero(), "pass": ok})
    return recs, ok_all


def _lie_sweep(rng, count, degree, dim, entry):
    ok_all = True
    for _ in range(count):
        H, K, J = (_random_tfield(rng, degree, dim, -entry, entry) for _ in range(3))
        jac = (jacobi_bracket(H, jacobi_bracket(K, J)) + jacobi_bracket(K, jacobi_bracket(J, H))
               + jacobi_bracket(J, jacobi_bracket(H, K)))
        anti = jacobi_bracket(H, K) + jacobi_bracket(K, H)
        rebuilt = cartan_connection(H, K) - cartan_connection(K, H) + torsion_bracket(H, K)
        ok_all &= jac.is_zero() and anti.is_zero() and (rebuilt - jacobi_bracket(H, K)).is_zero()
    return ok_all


def cmd_postlie(cfg, degree=2, dim=2, count=500, entry=2):
    rng = np.random.default_rng(cfg.seed)
    if cfg.check == "axioms":
        recs, ok = _sweep(rng, count, degree, dim, entry, postlie_axiom_check, "axioms")
        ok_lie = _lie_sweep(rng, min(count, 100), degree, dim, entry)
        lines = [
            f"{'PASS' if ok else 'FAIL'} post-Lie axioms on {count} random triples (degree <= {degree}, dim {dim})",
            f"{'PASS' if ok_lie else 'FAIL'} Jacobi bracket: antisymmetry, Jacobi identity, torsion relation",
        ]
        return recs, lines, ok and ok_lie
    if cfg.check == "adjoint":
        recs, ok = _sweep(rng, count, degree, dim, entry, adjoint_axiom_check, "adjoint")
        return recs, [f"{'PASS' if ok else 'FAIL'} adjoint post-Lie axioms on {count} random triples"], ok
    if cfg.check == "beauty":
        A = _random_tfield(rng, degree, dim, -entry, entry, h=1)
        recs = []
        for n in range(1, cfg.order + 1):
            ok = left_ladder(A, n) == TField(A.P.derivative(n), 0)
            recs.append({"check": "beauty", "index": n, "pass": ok})
        ok = all(r["pass"] for r in recs)
        return recs, [f"{'PASS' if ok else 'FAIL'} ladder of length n equals n-th derivative for n <= {cfg.order}"], ok
    if cfg.check == "geometric-magnus":
        A = _random_tfield(rng, degree, dim, -entry, entry, h=1)
        report = geometric_magnus_check(A, max(cfg.order, 1))
        recs = []
        ok = True
        for row in report["orders"]:
            tol = 0 if row["kind"] == "exact" else 1e-11
            good = row["residual"] <= tol and (row["order"] == 1 or row["h_part"] == 0)
            ok &= good
            recs.append({"check": "geometric-magnus", "index": row["order"], "kind": row["kind"],
                         "residual": float(row["residual"]), "pass": good})
        lines = [f"order {r['index']} ({r['kind']}): residual {r['residual']:.3e}" for r in recs]
        lines.append(f"{'PASS' if ok else 'FAIL'} theta block matches classical Magnus")
        return recs, lines, ok
    raise ConfigError(f"unknown check {cfg.check!r}; known: axioms, adjoint, beauty, geometric-magnus")


def cmd_autonomize(cfg, tol=1e-12):
    A, Y0 = _load(cfg)
    for m in cfg.methods:
        if m not in AUGMENTED_METHODS:
            raise ConfigError(f"method {m!r} has no augmented form; known: {', '.join(AUGMENTED_METHODS)}")
    records = []
    ok_all = True
    for method in cfg.methods:
        for n in cfg.steps:
            states, exps = augmented_trajectory(method, A, cfg.t0, cfg.t_end, n, Y0)
            direct = integrate(method, A, cfg.t0, cfg.t_end, n, Y0).final
            h = (Fraction(cfg.t_end) - Fraction(cfg.t0)) / n
            disc = _rel(states[-1].Y, direct)
            t_final = float(states[-1].t)
            t_err = abs(t_final - cfg.t_end)
            aff_exact = all(e.aff[0, 0] == 0 and e.aff[0, 1] == h and not e.aff[1].any() for e in exps)
            x_exact = all(s.x == 1 for s in states)
            ok = disc <= tol and t_err == 0 and aff_exact and x_exact
            ok_all &= ok
            records.append({"method": method, "nsteps": n, "discrepancy": disc, "t_final": t_final,
                            "t_error": t_err, "aff_exact": aff_exact, "x_exact": x_exact,
                            "status": "PASS" if ok else "FAIL"})
    return records, [], ok_all


# argument parsing ---------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="magnuslie", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="write records to this file instead of stdout")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--seed", type=int, default=0)

    def problem_args(sp, default_methods):
        sp.add_argument("--problem", required=True, help="JSON problem file")
        sp.add_argument("--methods", type=_csv_list, default=default_methods)
        sp.add_argument("--t0", type=float, default=0.0)
        sp.add_argument("--t-end", type=float, default=1.0)
        sp.add_argument("--steps", type=lambda s: _csv_list(s, int), default=[10, 20, 40, 80, 160])

    sp = sub.add_parser("converge", help="convergence study against a reference solution")
    problem_args(sp, ["magnus2", "magnus4"])
    sp.add_argument("--tol", type=float, default=1e-12, help="reference solver tolerance")
    common(sp)

    sp = sub.add_parser("series", help="exact pre-Lie series checks")
    sp.add_argument("--check", required=True, choices=sorted(SERIES_CHECKS))
    sp.add_argument("--order", type=int, default=5)
    common(sp)

    sp = sub.add_parser("postlie", help="post-Lie checks on quasi-right-invariant fields")
    sp.add_argument("--check", required=True, choices=("axioms", "adjoint", "beauty", "geometric-magnus"))
    sp.add_argument("--degree", type=int, default=2)
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--order", type=int, default=4)
    sp.add_argument("--count", type=int, default=500, help="random triples for sweeps")
    sp.add_argument("--entry", type=int, default=2, help="integer entries drawn from [-entry, entry]")
    common(sp)

    sp = sub.add_parser("autonomize", help="augmented autonomous solve against the direct solve")
    problem_args(sp, ["magnus2", "magnus4", "rkmk-heun", "rkmk-gl2"])
    common(sp)
    return p


def _config(args):
    return RunConfig(
        command=args.command,
        problem=getattr(args, "problem", None),
        methods=getattr(args, "methods", []) or [],
        t0=getattr(args, "t0", 0.0),
        t_end=getattr(args, "t_end", 1.0),
        steps=getattr(args, "steps", []) or [],
        order=getattr(args, "order", 4),
        check=getattr(args, "check", None),
        seed=args.seed,
        out=args.out,
        format=args.format,
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = _config(args)
    try:
        cfg.validate()
        if cfg.command == "converge":
            records, lines, ok = cmd_converge(cfg, tol=args.tol)
            fields = CONVERGE_FIELDS
        elif cfg.command == "series":
            records, lines, ok = cmd_series(cfg)
            fields = None
        elif cfg.command == "postlie":
            if args.degree < 0 or args.dim < 1 or args.count < 1:
                raise ConfigError("--degree, --dim and --count must be sensible")
            records, lines, ok = cmd_postlie(cfg, degree=args.degree, dim=args.dim, count=args.count,
                                             entry=args.entry)
            fields = None
        else:
            records, lines, ok = cmd_autonomize(cfg)
            fields = AUTONOMIZE_FIELDS
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if fields is None and records:
        keys = []
        for r in records:
            keys.extend(k for k in r if k not in keys)
        fields = keys
    text = mio.format_records(records, cfg.format, fields) if records else ""
    for line in lines:
        print(line)
    if cfg.out:
        mio.write_records(cfg.out, text)
    elif not lines:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
