"""Command-line front end.

Exit codes: 0 success, 2 invalid input (JSON error on stderr), 3 failed
certificate.  Outputs are written atomically and only after the whole
computation succeeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

from . import __version__
from .arithmetic_bounds import SlnElement, entropy_sln, eta_exponent, eta_log, nonescape_sln, root_sum
from .chain_model import (
    Projection,
    averaging_operator,
    chain_to_dict,
    check_property_m,
    load_chain,
)
from .equidistribution import RigidityQuery, bigset_mass_bound, nonescape_from_lambda, rigidity_bound
from .exceptions import CertificateError, ConvergenceError, SpecError
from .graph_walks import complete_graph, cycle_graph, nonbacktracking_chain, parse_graph_text, petersen_graph
from .ld_bounds import LDQuery, ld_tail_bound, ld_tail_optimize
from .montecarlo import SimConfig, bound_vs_empirical, dp_feasible, empirical_tail, exact_tail_dp, rows_to_csv
from .spectral import l20_norm

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CERTIFICATE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SpecError(f"{self.prog}: {message}")


def _bool(text):
    t = str(text).strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def _dumps(doc):
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    target = os.path.abspath(out)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".tmp-", suffix=os.path.basename(target))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_chain(path):
    try:
        return load_chain(path)
    except OSError as exc:
        raise SpecError(f"cannot read chain file: {exc}") from None


def _projection_for(chain, proj, use_identity):
    if use_identity or proj is None:
        return Projection.identity(chain.labels)
    return proj


def _phi_for(phi, override):
    if override is not None:
        return override
    if phi is None:
        raise SpecError("no phi given: add 'phi' to the chain file or pass --phi")
    return phi


# -- subcommands --------------------------------------------------------------------


def cmd_spectrum(args):
    chain, proj, phi = _read_chain(args.chain)
    proj = _projection_for(chain, proj, args.identity)
    op = averaging_operator(chain, proj)
    doc = l20_norm(op, method=args.method).to_dict()
    doc["n_points"] = op.n_points
    doc["n_states"] = chain.n_states
    if phi is not None and phi.values.size == op.n_points:
        doc["m_phi"] = phi.mean(op.mX)
    return _dumps(doc)


def cmd_check_m(args):
    chain, proj, _ = _read_chain(args.chain)
    proj = _projection_for(chain, proj, args.identity)
    cert = check_property_m(chain, proj, args.nmax, exact=args.rational)
    return _dumps(cert.to_dict())


def cmd_bound(args):
    q = LDQuery(args.eta, args.mphi, args.lam, args.n, args.tail, args.k)
    rep = ld_tail_bound(q) if args.k is not None else ld_tail_optimize(q, k_max=args.kmax)
    return _dumps({"query": q.to_dict(), "report": rep.to_dict()})


def cmd_simulate(args):
    chain, proj, phi = _read_chain(args.chain)
    proj = _projection_for(chain, proj, args.identity)
    phi = _phi_for(phi, args.phi)
    start = "stationary" if args.start == "stationary" else int(args.start)
    cfg = SimConfig(args.n, args.eta, args.samples, args.seed, start)
    est = empirical_tail(chain, proj, phi, cfg, tail=args.tail)
    doc = {
        "n": cfg.n,
        "eta": cfg.eta,
        "seed": cfg.seed,
        "start": cfg.start,
        "tail": args.tail,
        "p_hat": est.p_hat,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "hits": est.hits,
        "samples": est.samples,
        "exact_dp": None,
    }
    if dp_feasible(chain, proj, phi, cfg.n):
        doc["exact_dp"] = exact_tail_dp(chain, proj, phi, cfg.eta, cfg.n, args.tail, start)
    return _dumps(doc)


def cmd_compare(args):
    chain, proj, phi = _read_chain(args.chain)
    proj = _projection_for(chain, proj, args.identity)
    phi = _phi_for(phi, args.phi)
    rows = bound_vs_empirical(
        chain, proj, phi, args.eta, args.n_list, args.samples, args.seed, k_max=args.kmax, tail=args.tail, check_depth=args.nmax
    )
    return rows_to_csv(rows)


_NAMED_GRAPHS = {
    "petersen": petersen_graph,
    "k3": lambda: complete_graph(3),
    "k4": lambda: complete_graph(4),
}


def cmd_nb_graph(args):
    if (args.graph is None) == (args.named is None):
        raise SpecError("give exactly one of --graph and --named")
    if args.graph is not None:
        try:
            with open(args.graph, encoding="utf-8") as fh:
                g = parse_graph_text(fh.read(), args.degree)
        except OSError as exc:
            raise SpecError(f"cannot read graph file: {exc}") from None
    elif args.named.startswith("cycle"):
        try:
            g = cycle_graph(int(args.named[5:]))
        except ValueError:
            raise SpecError(f"unknown graph name {args.named!r}") from None
    elif args.named in _NAMED_GRAPHS:
        g = _NAMED_GRAPHS[args.named]()
    else:
        raise SpecError(f"unknown graph name {args.named!r}")
    nb = nonbacktracking_chain(g)
    proj = nb.projection(args.projection)
    return _dumps(chain_to_dict(nb.chain, proj))


def cmd_rigidity(args):
    q = RigidityQuery(args.lam, args.gap, args.kmax, args.epsilon, args.hm)
    return _dumps(rigidity_bound(q).to_dict())


def cmd_nonescape(args):
    doc = {"mass_lower_bound": nonescape_from_lambda(args.hm, args.h, args.lam)}
    if args.mF is not None:
        if args.k is None:
            raise SpecError("--mF needs --k")
        doc["bigset_complement_bound"] = bigset_mass_bound(args.lam, args.k, args.mF, args.hm - args.h)
    return _dumps(doc)


def cmd_sln(args):
    a = SlnElement.parse(args.sln, args.p)
    rep = nonescape_sln(a, rank_one=args.rank_one, epsilon=args.epsilon, entropy_defect=args.entropy_defect)
    doc = {
        "exponents": list(a.exponents),
        "p": a.p,
        "regular": a.regular,
        "eta_exponent": eta_exponent(a),
        "neg_log_eta": eta_log(a),
        "root_sum": root_sum(a),
        "entropy": entropy_sln(a),
        "nonescape": rep.to_dict(),
    }
    return _dumps(doc)


# -- parser -----------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="spectral-ld", description="Spectral-gap large-deviation certificates for finite Markov shifts.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def chain_cmd(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--chain", required=True, help="chain JSON file")
        s.add_argument("--identity", action="store_true", help="ignore the file's projection")
        s.add_argument("--out", help="output file (default stdout)")
        return s

    s = chain_cmd("spectrum", "L^2_0 norm and spectral radius of the averaging operator")
    s.add_argument("--method", choices=("auto", "dense", "power_iteration"), default="auto")
    s.set_defaults(func=cmd_spectrum)

    s = chain_cmd("check-m", "certify the semigroup identity up to --nmax")
    s.add_argument("--nmax", type=int, default=10)
    s.add_argument("--rational", action="store_true", help="exact rational arithmetic")
    s.set_defaults(func=cmd_check_m)

    s = sub.add_parser("bound", help="large-deviation tail bound")
    s.add_argument("--eta", type=float, required=True)
    s.add_argument("--mphi", type=float, required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, help="fixed level k (otherwise optimized)")
    s.add_argument("--kmax", type=int, default=64)
    s.add_argument("--tail", choices=("upper", "lower"), default="upper")
    s.add_argument("--out")
    s.set_defaults(func=cmd_bound)

    s = chain_cmd("simulate", "Monte Carlo tail estimate")
    s.add_argument("--eta", type=float, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--samples", type=int, default=10**5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--start", default="stationary")
    s.add_argument("--tail", choices=("upper", "lower"), default="upper")
    s.add_argument("--phi", type=_float_list)
    s.set_defaults(func=cmd_simulate)

    s = chain_cmd("compare", "bound versus simulation and exact DP, as CSV")
    s.add_argument("--eta", type=float, required=True)
    s.add_argument("--n-list", type=_int_list, required=True)
    s.add_argument("--samples", type=int, default=10**5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--kmax", type=int, default=64)
    s.add_argument("--nmax", type=int, default=10, help="property (M) check depth")
    s.add_argument("--tail", choices=("upper", "lower"), default="upper")
    s.add_argument("--phi", type=_float_list)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("nb-graph", help="write the non-backtracking edge chain of a regular graph")
    s.add_argument("--graph", help="edge list text or JSON file")
    s.add_argument("--named", help="petersen, k3, k4 or cycleN")
    s.add_argument("--degree", type=int)
    s.add_argument("--projection", choices=("terminal", "source", "identity"), default="terminal")
    s.add_argument("--out")
    s.set_defaults(func=cmd_nb_graph)

    s = sub.add_parser("rigidity", help="entropy-gap rigidity bound")
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--gap", type=float, required=True, help="h_m - h_mu")
    s.add_argument("--kmax", type=int, default=60)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--hm", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_rigidity)

    s = sub.add_parser("nonescape", help="non-escape of mass from lambda")
    s.add_argument("--hm", type=float, required=True)
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--mF", type=float, help="Haar mass of a closed set F")
    s.add_argument("--k", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_nonescape)

    s = sub.add_parser("sln", help="eta, entropy and non-escape for diagonal SL_n(Q_p) elements")
    s.add_argument("--sln", required=True, help='exponents, e.g. "3,1,-1,-3"')
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--entropy-defect", type=float, default=0.0, help="h_m(a) - h in nats")
    s.add_argument("--rank-one", type=_bool, default=False)
    s.add_argument("--epsilon", type=float, default=0.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sln)
    return p


def _fail(exc, code):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("depth", "gap", "classes", "residual", "iterations"):
        if hasattr(exc, attr):
            err[attr] = getattr(exc, attr)
    sys.stderr.write(json.dumps(_jsonable(err), sort_keys=True) + "\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        text = args.func(args)
        _emit(text, getattr(args, "out", None))
    except SpecError as exc:
        return _fail(exc, EXIT_INPUT)
    except (CertificateError, ConvergenceError) as exc:
        return _fail(exc, EXIT_CERTIFICATE)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
