"""Command-line front end."""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from . import closedform
from .domains import (ALIASES, FAMILIES, canonical_exponents, canonicalize_exponent, make_domain,
                      reduce_zero_exponents)
from .extraction import (ExtractionError, Signature, build_signature, extract_both,
                         verify_equioscillation, verify_extremal_signature)
from .hierarchy import LevelError, assemble_moment_relaxation, level_threshold, run_hierarchy
from .poly import SparsePolynomial
from .sdp import SolverError, SolverOptions, write_sdpa

log = logging.getLogger("multicheb")

EXIT_OK, EXIT_SOLVER, EXIT_INPUT, EXIT_VERIFY, EXIT_IO = 0, 2, 3, 4, 5
SCHEMA_VERSION = 1


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    k: tuple | None = None
    domain: str | None = None
    t_min: int | None = None
    t_max: int | None = None
    fmt: str = "json"
    out: str | None = None
    seed: int = 0
    jobs: int = 1
    force_level: bool = False
    export_sdpa: str | None = None


# helpers

def _schema() -> dict:
    with resources.files("multicheb").joinpath("report.schema.json").open() as fh:
        return json.load(fh)


def _clean(obj):
    # JSON has no NaN; numpy scalars and tuples become plain values
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def to_json_text(report: dict) -> str:
    report = _clean({"schema": SCHEMA_VERSION, **report})
    jsonschema.validate(report, _schema())
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def parse_k(text: str) -> tuple:
    try:
        k = tuple(int(v) for v in text.replace(" ", "").split(",") if v != "")
    except ValueError:
        raise InputError(f"cannot read exponent {text!r}") from None
    if not k:
        raise InputError("empty exponent")
    if any(e < 0 for e in k):
        raise InputError("exponents must be non-negative")
    if sum(k) == 0:
        raise InputError("the zero exponent has nothing to approximate")
    return k


def parse_domain(name: str) -> str:
    fam = ALIASES.get(name, name)
    if fam not in FAMILIES:
        raise InputError(f"unknown domain {name!r}; choose from {', '.join(FAMILIES)}")
    return fam


# compute

def _placement(k: tuple):
    """Original coordinate of each coordinate of the reduced sorted problem."""
    order = sorted(range(len(k)), key=lambda i: -k[i])
    return [i for i in order if k[i] > 0]


def compute_report(k: tuple, domain: str, t_min=None, t_max=None, seed: int = 0,
                   force_level: bool = False) -> dict:
    """Hierarchy run plus certificate for ``m_k`` on a built-in domain."""
    d = len(k)
    dom = make_domain(domain, d)
    notes = []
    kc = canonicalize_exponent(k)
    if kc != tuple(k):
        notes.append(f"exponent sorted to {list(kc)} (coordinate permutation)")
    witness, rdom = reduce_zero_exponents(kc, dom)
    kr = witness.reduced_exponent
    if not witness.is_identity:
        notes.append(f"zero exponents dropped: solved {list(kr)} on {domain} in {rdom.dim} "
                     f"variables")
    n = sum(kr)
    f = SparsePolynomial.monomial(kr)
    rep = run_hierarchy(f, n, rdom, t_min, t_max, opts=SolverOptions(), force_level=force_level,
                        seed=seed)
    pos = _placement(k)
    out = {"k": list(k), "domain": domain, "levels": [lv.to_json() for lv in rep.levels],
           "E_est": rep.value, "certified": rep.certified,
           "certified_level": rep.certified_level,
           "reduction": {"solved_exponent": list(kr), "solved_dim": rdom.dim, "placement": pos},
           "notes": notes}
    if rep.approximant is not None:
        out["best_approximant"] = rep.approximant.lift(d, pos).to_string()
    if rep.certified:
        lv = next(lv for lv in rep.levels if lv.t == rep.certified_level)
        try:
            plus, minus = extract_both(rep.certificate, rdom, lv.ranks, seed=seed)
            sig = build_signature(plus, minus)
            chk = verify_extremal_signature(sig, n - 1)
            pts = np.zeros((len(sig), d))
            pts[:, pos] = sig.points
            out["signature"] = {"points": pts, "signs": sig.signs, "weights": sig.weights,
                                "extremal": bool(chk.extremal)}
        except ExtractionError as exc:
            notes.append(f"extraction failed: {exc}")
    kn = closedform.known_error(k, domain)
    out["closed_form"] = kn.to_json() if kn is not None else None
    return out


def _compute_text(rep: dict) -> str:
    lines = [f"k = {tuple(rep['k'])}  domain = {rep['domain']}"]
    lines += [f"note: {s}" for s in rep["notes"]]
    for lv in rep["levels"]:
        lines.append(f"  t={lv['t']}: moment {lv['ub_moment']:.10g} ({lv['moment_status']}), "
                     f"sos {lv['ub']:.10g} ({lv['sos_status']}), certified={lv['certified']}")
    lines.append(f"E_est = {rep['E_est']:.10g}  certified = {rep['certified']}")
    if "signature" in rep:
        sig = rep["signature"]
        lines.append(f"signature: {len(sig['signs'])} points, extremal={sig['extremal']}")
    if rep.get("closed_form"):
        cf = rep["closed_form"]
        lines.append(f"closed form: {cf['expression']} = {cf['value']:.10g}")
    return "\n".join(lines) + "\n"


def cmd_compute(cfg: RunConfig) -> int:
    rep = compute_report(cfg.k, cfg.domain, cfg.t_min, cfg.t_max, cfg.seed, cfg.force_level)
    if not any(lv["moment_status"] in ("optimal", "near_optimal") for lv in rep["levels"]):
        log.error("no level solved successfully")
        _emit(to_json_text({"kind": "compute", **rep}), cfg.out)
        return EXIT_SOLVER
    if cfg.export_sdpa:
        kr = rep["reduction"]["solved_exponent"]
        t = rep["certified_level"] or rep["levels"][-1]["t"]
        _export(tuple(kr), make_domain(cfg.domain, len(kr)), t, cfg.export_sdpa, cfg.force_level)
    text = _compute_text(rep) if cfg.fmt == "text" else to_json_text({"kind": "compute", **rep})
    _emit(text, cfg.out)
    return EXIT_OK


# table

def _table_entry(args):
    k, domain, t_min, t_max, seed = args
    return compute_report(k, domain, t_min, t_max, seed)


def table_entries(domain: str, d: int = 3, n_max: int = 6, t_min=None, t_max=None,
                  seed: int = 0, jobs: int = 1) -> list:
    ks = [k for n in range(d, n_max + 1) for k in canonical_exponents(n, d)]
    work = [(k, domain, t_min, t_max, seed) for k in ks]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_table_entry, work))
    return [_table_entry(w) for w in work]


def _truncate_digits(x: float, digits: int = 4) -> str:
    """First ``digits`` significant digits of ``x`` without rounding.

    ``x`` is first rounded to 7 significant digits, about what the solver
    delivers, so 0.99999998 shows as 1.000 rather than 9.999.
    """
    if not math.isfinite(x) or x <= 0:
        return "nan"
    x = float(f"{x:.7g}")
    e = math.floor(math.log10(x))
    m = math.floor(x / 10.0 ** (e - digits + 1) + 1e-9)
    s = str(m)
    point = e + 1
    if point <= 0:
        return "0." + "0" * (-point) + s
    if point >= len(s):
        return s + "0" * (point - len(s))
    return s[:point] + "." + s[point:]


def column_scales(entries: list) -> dict:
    """Power of ten per degree column: that of the largest entry."""
    by_n = {}
    for e in entries:
        if e["E_est"] is not None and math.isfinite(e["E_est"]) and e["E_est"] > 0:
            n = sum(e["k"])
            by_n[n] = max(by_n.get(n, 0.0), e["E_est"])
    return {n: math.floor(math.log10(float(f"{v:.7g}"))) for n, v in by_n.items()}


def render_table(entries: list, domain: str) -> str:
    scales = column_scales(entries)
    cols = sorted({sum(e["k"]) for e in entries})
    rows_per = {n: [e for e in entries if sum(e["k"]) == n] for n in cols}
    cells_by_col = {}
    for n in cols:
        cells = []
        for e in rows_per[n]:
            v = e["E_est"]
            txt = "nan" if v is None else _truncate_digits(v / 10.0 ** scales.get(n, 0))
            star = "*" if not e["certified"] else " "
            cells.append(f"E({','.join(map(str, e['k']))}) ~ {txt}{star}")
        cells_by_col[n] = cells
    heads = [f"n={n} (x1e{scales.get(n, 0)})" for n in cols]
    width = max([len(h) for h in heads] + [len(c) for cs in cells_by_col.values() for c in cs])
    nrows = max(len(c) for c in cells_by_col.values())
    out = [f"{domain}, d={len(entries[0]['k'])}; * = not certified"]
    out.append(" | ".join(h.ljust(width) for h in heads).rstrip())
    out.append("-+-".join("-" * width for _ in heads))
    for r in range(nrows):
        out.append(" | ".join((cells_by_col[n][r] if r < len(cells_by_col[n]) else "").ljust(width)
                              for n in cols).rstrip())
    return "\n".join(out) + "\n"


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def table_csv(entries: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "n", "domain", "E_est", "certified", "certified_level", "levels",
                "closed_form"])
    for e in entries:
        cf = e.get("closed_form")
        w.writerow([" ".join(map(str, e["k"])), sum(e["k"]), e["domain"], _num(e["E_est"]),
                    int(e["certified"]),
                    "" if e["certified_level"] is None else e["certified_level"],
                    " ".join(str(lv["t"]) for lv in e["levels"]),
                    "" if not cf else _num(cf["value"])])
    return buf.getvalue()


def cmd_table(cfg: RunConfig, d: int = 3, n_max: int = 6) -> int:
    entries = table_entries(cfg.domain, d, n_max, cfg.t_min, cfg.t_max, cfg.seed, cfg.jobs)
    if cfg.fmt == "csv":
        text = table_csv(entries)
    elif cfg.fmt == "json":
        text = to_json_text({"kind": "table", "domain": cfg.domain, "d": d, "entries": entries})
    else:
        text = render_table(entries, cfg.domain)
    _emit(text, cfg.out)
    return EXIT_OK


# verify

def _check(name, ok, **info):
    return {"check": name, "passed": bool(ok), **info}


def _hypercube_signature(k) -> Signature:
    # tensor grid of Chebyshev extrema, sign (-1)^(sum j)
    axes = [[(j, math.cos(math.pi * j / e)) for j in range(e + 1)] for e in k]
    pts, signs, wts = [], [], []
    for combo in itertools.product(*axes):
        pts.append([x for _, x in combo])
        signs.append((-1) ** sum(j for j, _ in combo))
        wts.append(math.prod(0.5 if j in (0, e) else 1.0 for (j, _), e in zip(combo, k)))
    w = np.array(wts)
    return Signature(np.array(pts), np.array(signs), w / w.sum())


def verify_report(name: str, density: int = 60) -> dict:
    checks, constants = [], {}
    if name == "ball-221":
        a, tau = closedform.ball_221_constant()
        constants = {"a": a, "tau_B": tau}
        checks.append(_check("constant a", abs(a - 3.63000825e-2) <= 1e-8, value=a))
        lhs = (1 + tau) ** 2 * (1 - tau) * tau / 4
        checks.append(_check("maximiser identity", abs(lhs - a * (1 + 4 * tau + 4 * tau ** 2))
                             <= 1e-10))
        P = closedform.ball_221_polynomial()
        dom = make_domain("ball", 3)
        sig = closedform.ball_221_signature()
        pts = None
        E, degree = a, 4
    elif name == "simplex-211":
        s = closedform.simplex_211_constants()
        constants = {"tau": s.tau, "sigma": s.sigma, "c": s.c, "E": s.E}
        checks.append(_check("tau", abs(s.tau - 0.21998) <= 1e-5, value=s.tau))
        checks.append(_check("E = tau^2/18", abs(s.E - s.tau ** 2 / 18) <= 1e-12, value=s.E))
        P = closedform.simplex_211_polynomial()
        dom = make_domain("simplex", 3)
        sig = closedform.simplex_211_signature()
        pts = closedform.simplex_211_face_coordinates(sig.points)
        E, degree = s.E, 3
    else:
        fam, _, ktxt = name.partition(":")
        k = parse_k(ktxt)
        if any(e < 1 for e in k):
            raise InputError("verification formulas need every exponent >= 1")
        if fam == "hypercube":
            dom = make_domain("hypercube", len(k))
            approx = closedform.hypercube_best_approximant(k)
            sig = _hypercube_signature(k)
        elif fam in ("ball2d", "simplex2d"):
            if len(k) != 2:
                raise InputError(f"{fam} needs two exponents")
            dom = make_domain("ball" if fam == "ball2d" else "simplex", 2)
            kk = canonicalize_exponent(k)
            approx = (closedform.ball2d_best_approximant(kk) if fam == "ball2d"
                      else closedform.simplex2d_best_approximant(kk))
            approx = approx.lift(2, _placement(k))
            sig = None
        else:
            raise InputError(f"unknown verification target {name!r}")
        P = SparsePolynomial.monomial(k) - approx
        E = closedform.known_error(k, dom.family).value
        constants = {"E": E}
        pts, degree = None, sum(k) - 1
        checks.append(_check("leading part is m_k", P.homogeneous_part(sum(k)).allclose(
            SparsePolynomial.monomial(k), 1e-10)))
    norm = closedform.oracle_uniform_norm(P, dom, density)
    constants["oracle_norm"] = norm
    checks.append(_check("oracle norm", abs(norm - E) <= 1e-5 * max(1.0, E), value=norm,
                         expected=E))
    if sig is not None:
        chk = verify_extremal_signature(sig, degree, pts)
        checks.append(_check("extremal signature", chk.extremal, points=len(sig),
                             null_dim=chk.null_dim))
        checks.append(_check("equioscillation",
                             verify_equioscillation(sig, P, dom, norm=E, tol=1e-8)))
    else:
        checks.append(_check("extremal signature", True, skipped="no explicit signature"))
    passed = all(c["passed"] for c in checks)
    return {"name": name, "passed": passed, "checks": checks, "constants": constants,
            "signature_points": None if sig is None else len(sig)}


def cmd_verify(name: str, fmt: str, out) -> int:
    rep = verify_report(name)
    if fmt == "text":
        lines = [f"verify {name}"]
        lines += [f"  {k} = {v:.12g}" for k, v in rep["constants"].items()]
        lines += [f"  {'PASS' if c['passed'] else 'FAIL'}  {c['check']}" for c in rep["checks"]]
        text = "\n".join(lines) + "\n"
    else:
        text = to_json_text({"kind": "verify", **rep})
    _emit(text, out)
    return EXIT_OK if rep["passed"] else EXIT_VERIFY


# closed form and export

def cmd_closed_form(cfg: RunConfig) -> int:
    kn = closedform.known_error(cfg.k, cfg.domain)
    rep = {"k": list(cfg.k), "domain": cfg.domain, "known": kn.to_json() if kn else None}
    if cfg.fmt == "text":
        text = ("no closed form known\n" if kn is None
                else f"{kn.expression} = {kn.value!r}  ({kn.provenance})\n")
    else:
        text = to_json_text({"kind": "closed_form", **rep})
    _emit(text, cfg.out)
    return EXIT_OK


def _export(k, dom, t, path, force_level=False) -> dict:
    f = SparsePolynomial.monomial(k)
    prob = assemble_moment_relaxation(f, sum(k), dom, t, force_level)
    write_sdpa(prob, path)
    sizes = [blk.size for blk in prob.blocks]
    log.info("wrote %s: %d constraints, %d blocks", path, prob.m, len(sizes))
    return {"path": str(path), "t": t, "constraints": prob.m, "blocks": sizes}


def cmd_export_sdpa(cfg: RunConfig, t: int | None) -> int:
    dom = make_domain(cfg.domain, len(cfg.k))
    f = SparsePolynomial.monomial(cfg.k)
    if t is None:
        t = level_threshold(f, dom)
    if cfg.out is None:
        raise InputError("export-sdpa needs --out")
    stats = _export(cfg.k, dom, t, cfg.out, cfg.force_level)
    sys.stdout.write(f"blocks {len(stats['blocks'])} sizes {stats['blocks']} "
                     f"constraints {stats['constraints']}\n")
    return EXIT_OK


# entry point

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="multicheb", description="Best uniform approximation of monomials.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, k=True, levels=True):
        if k:
            sp.add_argument("--k", required=True, help="exponent, e.g. 2,2,1")
            sp.add_argument("--domain", required=True, help="ball, cross, simplex or hypercube")
        if levels:
            sp.add_argument("--t-min", type=int)
            sp.add_argument("--t-max", type=int)
            sp.add_argument("--force-level", action="store_true",
                            help="allow levels below the convergence threshold")
        sp.add_argument("--format", choices=("json", "text", "csv"), default="json")
        sp.add_argument("--out")
        sp.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("compute", help="run the hierarchy for one monomial")
    common(c)
    c.add_argument("--export-sdpa", metavar="PATH")
    t = sub.add_parser("table", help="all monomials of degree d..n-max")
    t.add_argument("--domain", required=True)
    t.add_argument("--d", type=int, default=3)
    t.add_argument("--n-max", type=int, default=6)
    t.add_argument("--jobs", type=int, default=1)
    common(t, k=False)
    v = sub.add_parser("verify", help="check an explicit Chebyshev polynomial")
    v.add_argument("name", help="ball-221, simplex-211, hypercube:K, ball2d:K or simplex2d:K")
    v.add_argument("--format", choices=("json", "text"), default="text")
    v.add_argument("--out")
    cf = sub.add_parser("closed-form", help="known exact error, if any")
    common(cf, levels=False)
    e = sub.add_parser("export-sdpa", help="write the moment relaxation in SDPA format")
    common(e, levels=False)
    e.add_argument("--t", type=int)
    e.add_argument("--force-level", action="store_true")
    return p


def _setup_logging():
    level = os.environ.get("CHEBY_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(args.command, fmt=args.format, out=args.out,
                        seed=getattr(args, "seed", 0))
        if getattr(args, "domain", None) is not None:
            cfg.domain = parse_domain(args.domain)
        if getattr(args, "k", None) is not None:
            cfg.k = parse_k(args.k)
        cfg.t_min, cfg.t_max = getattr(args, "t_min", None), getattr(args, "t_max", None)
        cfg.force_level = getattr(args, "force_level", False)
        cfg.jobs = max(1, getattr(args, "jobs", 1))
        if args.command == "compute":
            cfg.export_sdpa = args.export_sdpa
            if cfg.fmt == "csv":
                raise InputError("compute writes json or text")
            return cmd_compute(cfg)
        if args.command == "table":
            if args.d < 1 or args.n_max < args.d:
                raise InputError("need 1 <= d <= n-max")
            return cmd_table(cfg, args.d, args.n_max)
        if args.command == "verify":
            return cmd_verify(args.name, args.format, args.out)
        if args.command == "closed-form":
            return cmd_closed_form(cfg)
        return cmd_export_sdpa(cfg, args.t)
    except (InputError, LevelError, ValueError) as exc:
        print(f"multicheb: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, np.linalg.LinAlgError) as exc:
        print(f"multicheb: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"multicheb: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
