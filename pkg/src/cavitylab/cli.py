"""Command-line front end: ``cavitylab {exact,bp,bethe,phase,verify}``.

Errors go to stderr as ``ERR_PARSE|ERR_PARAM|ERR_NUMERIC: message``.  Exit
status is 0 on success, 1 on a computational error, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import acceptance
from .bethe import embed, optimize_local_polytope, phi_popdyn, phi_regular
from .bp import bp_fixed_point_regular, bp_run_graph
from .errors import CavityError, InvalidParameter, ParseError
from .exact import exact_log_z
from .factor_spec import load_spec, spec_from_config
from .graphs import OffspringLaw, gen_random_regular, gen_tree, graph_from_edge_list
from .phase import hardcore_lambda_c, hardcore_phi, ising_beta_minus, ising_phase, potts_free_energy_bounds

USAGE_CODES = ("ERR_PARSE", "ERR_PARAM")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, str)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def _dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def parse_grid(text: str):
    """``start:stop:step`` with ``stop`` included (up to rounding)."""
    try:
        a, b, s = (float(x) for x in text.split(":"))
    except ValueError:
        raise ParseError(f"grid {text!r} is not start:stop:step") from None
    if s <= 0 or b < a:
        raise InvalidParameter(f"grid {text!r} needs step > 0 and stop >= start")
    n = int(math.floor((b - a) / s + 1e-9)) + 1
    return [round(a + i * s, 12) for i in range(n)]


def parse_law(text: str) -> OffspringLaw:
    """``deterministic:k``, ``poisson:mean`` or ``explicit:p0,p1,...``."""
    kind, _, arg = text.partition(":")
    try:
        if kind == "deterministic":
            return OffspringLaw.deterministic(int(arg))
        if kind == "poisson":
            return OffspringLaw.poisson(float(arg))
        if kind == "explicit":
            return OffspringLaw.explicit([float(x) for x in arg.split(",")])
    except ValueError:
        raise ParseError(f"bad offspring law {text!r}") from None
    raise ParseError(f"unknown offspring law {text!r}")


# --- argument groups --------------------------------------------------------------


def _add_model(p):
    g = p.add_argument_group("model")
    g.add_argument("--spec-file", help="JSON spec file")
    g.add_argument("--model", choices=["potts", "ising", "hardcore", "raw"])
    g.add_argument("--q", type=int)
    g.add_argument("--beta", type=float, default=0.0)
    g.add_argument("--B", type=float, default=0.0)
    g.add_argument("--lambda", dest="lam", type=float)


def _add_graph(p):
    g = p.add_argument_group("graph source (exactly one)")
    g.add_argument("--edge-list", help="file of 'u v' lines")
    g.add_argument("--random-regular", nargs=3, type=int, metavar=("N", "D", "SEED"))
    g.add_argument("--tree", nargs=3, metavar=("KIND", "DEPTH", "SEED"), help="KIND is regular:d or a law such as poisson:2")


def _add_common(p):
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--threads", type=int, help="worker count (CAVITYLAB_THREADS overrides)")


def _spec(args):
    if args.spec_file:
        return load_spec(args.spec_file)
    if not args.model:
        raise UsageError("give --model or --spec-file")
    cfg = {"model": args.model, "beta": args.beta, "B": args.B}
    if args.q is not None:
        cfg["q"] = args.q
    if args.lam is not None:
        cfg["lambda"] = args.lam
    return spec_from_config(cfg)


def _graph(args):
    sources = [x for x in (args.edge_list, args.random_regular, args.tree) if x]
    if len(sources) != 1:
        raise UsageError("give exactly one of --edge-list, --random-regular, --tree")
    if args.edge_list:
        try:
            with open(args.edge_list) as fh:
                return graph_from_edge_list(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read {args.edge_list}: {exc.strerror}") from None
    if args.random_regular:
        n, d, seed = args.random_regular
        return gen_random_regular(n, d, seed)
    kind, depth, seed = args.tree
    try:
        depth, seed = int(depth), int(seed)
    except ValueError:
        raise ParseError("tree depth and seed must be integers") from None
    if kind.startswith("regular:"):
        return gen_tree(("regular", int(kind.split(":")[1])), depth, seed).graph
    return gen_tree(("galton_watson", parse_law(kind)), depth, seed).graph


def _init(text: str):
    if text == "uniform":
        return "uniform"
    kind, _, arg = text.partition(":")
    if kind in ("fixed", "random") and arg:
        try:
            return (kind, int(arg))
        except ValueError:
            pass
    raise ParseError(f"bad --init {text!r}; use uniform, fixed:S or random:SEED")


def threads_from(args) -> int:
    env = os.environ.get("CAVITYLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParseError(f"CAVITYLAB_THREADS={env!r} is not an integer") from None
    return args.threads or os.cpu_count() or 1


# --- subcommands ------------------------------------------------------------------


def cmd_exact(args):
    res = exact_log_z(_graph(args), _spec(args), marginals=args.marginals)
    return _dump_json(res.to_dict(marginals=args.marginals))


def cmd_bp(args):
    if args.tol <= 0:
        raise InvalidParameter("--tol must be positive")
    res = bp_run_graph(
        _graph(args), _spec(args), init=_init(args.init), schedule=args.schedule,
        damping=args.damping, tol=args.tol, max_iter=args.max_iter,
    )
    return _dump_json(res.to_dict(messages=not args.no_messages))


def cmd_bethe(args):
    spec = _spec(args)
    if args.form == "regular":
        fp = bp_fixed_point_regular(args.d, spec, args.branch, tol=args.tol, max_iter=args.max_iter)
        out = phi_regular(args.d, spec, fp.h).to_dict()
        out.update(message=fp.h, converged=fp.converged, iterations=fp.iterations, branch=args.branch)
        return _dump_json(out)
    if args.form == "polytope":
        best, value = optimize_local_polytope(args.d, spec, n_starts=args.starts, seed=args.seed)
        return _dump_json({"phi_total": value, "pair_belief": best.joint, "marginal": best.marginal})
    root = parse_law(args.root_law) if args.root_law else OffspringLaw.deterministic(args.d)
    off = parse_law(args.offspring_law) if args.offspring_law else OffspringLaw.deterministic(args.d - 1)
    est = phi_popdyn(root, off, spec, pool=args.pool, sweeps=args.sweeps, seed=args.seed)
    return _dump_json(est.to_dict())


def cmd_phase(args):
    if args.family == "potts":
        rows = []
        for beta in parse_grid(args.beta_grid):
            r = potts_free_energy_bounds(args.q, args.d, beta, args.B)
            rows.append((beta, r.r_free, r.r_ordered, r.phi_f, r.phi_1, r.lower, r.upper, r.region))
        header = ["beta", "r_free", "r_ordered", "phi_f", "phi_1", "lower", "upper", "region"]
        if args.format == "json":
            return _dump_json([dict(zip(header, row)) for row in rows])
        return _dump_csv(header, rows)
    if args.family == "hardcore":
        lam_c = hardcore_lambda_c(args.d)
        grid = parse_grid(args.lambda_grid) if args.lambda_grid else list(np.linspace(lam_c / 20, lam_c, 20))
        if any(x <= 0 for x in grid):
            raise InvalidParameter("fugacities must be positive")
        table = [{"lambda": lam, "phi": hardcore_phi(args.d, lam)} for lam in grid if lam <= lam_c]
        if args.format == "csv":
            return _dump_csv(["lambda", "phi"], [(t["lambda"], t["phi"]) for t in table])
        return _dump_json({"lambda_c": lam_c, "d": args.d, "table": table})
    # ising
    grid = parse_grid(args.beta_grid)
    table = []
    for beta in grid:
        r = ising_phase(args.d, beta, args.B)
        table.append({"beta": beta, "B": args.B, "r_free": r.r_free, "r_plus": r.r_plus, "unique": r.unique,
                      "phi": r.phi, "phi_free": r.phi_free, "phi_plus": r.phi_plus})
    if args.format == "csv":
        keys = list(table[0]) if table else ["beta"]
        return _dump_csv(keys, [[t[k] for k in keys] for t in table])
    return _dump_json({"beta_minus": ising_beta_minus(args.d), "d": args.d, "table": table})


def cmd_verify(args):
    only = set(args.only) if args.only else None
    rows = acceptance.run_all(only=only, stream=sys.stdout)
    failed = [r for r in rows if not r[2]]
    text = f"{len(rows) - len(failed)}/{len(rows)} criteria passed\n"
    if failed:
        sys.stdout.write(text)
        raise CavityError("acceptance failures: " + ", ".join(str(r[0]) for r in failed))
    return text


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cavitylab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("exact", help="partition function by enumeration")
    _add_model(e)
    _add_graph(e)
    _add_common(e)
    e.add_argument("--marginals", action="store_true")
    e.set_defaults(func=cmd_exact)

    b = sub.add_parser("bp", help="belief propagation on a finite graph")
    _add_model(b)
    _add_graph(b)
    _add_common(b)
    b.add_argument("--init", default="uniform")
    b.add_argument("--schedule", choices=["synchronous", "sequential"], default="synchronous")
    b.add_argument("--damping", type=float, default=0.0)
    b.add_argument("--tol", type=float, default=1e-12)
    b.add_argument("--max-iter", type=int, default=10_000)
    b.add_argument("--no-messages", action="store_true")
    b.set_defaults(func=cmd_bp)

    t = sub.add_parser("bethe", help="Bethe free energy on the d-regular tree or a Galton-Watson limit")
    _add_model(t)
    _add_common(t)
    t.add_argument("--form", choices=["regular", "polytope", "popdyn"], default="regular")
    t.add_argument("--d", type=int, default=3)
    t.add_argument("--branch", default="free")
    t.add_argument("--tol", type=float, default=1e-13)
    t.add_argument("--max-iter", type=int, default=100_000)
    t.add_argument("--starts", type=int, default=8)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--pool", type=int, default=10_000)
    t.add_argument("--sweeps", type=int, default=100)
    t.add_argument("--root-law")
    t.add_argument("--offspring-law")
    t.set_defaults(func=cmd_bethe)

    ph = sub.add_parser("phase", help="phase diagrams on the d-regular tree")
    ph.add_argument("family", choices=["potts", "hardcore", "ising"])
    ph.add_argument("--q", type=int, default=3)
    ph.add_argument("--d", type=int, default=3)
    ph.add_argument("--B", type=float, default=0.0)
    ph.add_argument("--beta-grid", default="0:2:0.1")
    ph.add_argument("--lambda-grid")
    ph.add_argument("--format", choices=["csv", "json"])
    _add_common(ph)
    ph.set_defaults(func=cmd_phase)

    v = sub.add_parser("verify", help="run the acceptance checks")
    v.add_argument("--only", type=int, nargs="*", help="criterion numbers")
    _add_common(v)
    v.set_defaults(func=cmd_verify)
    return p


def _default_format(args):
    if getattr(args, "format", "unset") is None:
        args.format = "csv" if args.family == "potts" else "json"


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        _default_format(args)
        args.threads = threads_from(args)
        text = args.func(args)
    except UsageError as exc:
        print(f"ERR_PARAM: {exc}", file=stderr)
        return 2
    except CavityError as exc:
        print(f"{exc.code}: {exc}", file=stderr)
        return 2 if exc.code in USAGE_CODES else 1
    except FloatingPointError as exc:
        print(f"ERR_NUMERIC: {exc}", file=stderr)
        return 1
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
