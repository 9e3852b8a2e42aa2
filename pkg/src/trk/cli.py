"""``trk`` command line.

Every run writes one JSON document to stdout (or ``--out``).  Exit codes:
0 success / property holds, 1 property violated, 2 usage or input error,
3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import acceptance
from .algebra import basis_from_json, full_space_basis, tensor_from_json
from .errors import InternalInvariantError
from .extract import ExtractionCertificate, extract_subspace, verify_certificate
from .rank import bias, default_workers, matrix_rank, prank_oracle
from .szemeredi import SimParams, independence_experiment, randomized_szemeredi_demo, tail_bound_check


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load(path):
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _cmd_bias(args):
    return 0, bias(tensor_from_json(_load(args.input)), args.axis, args.workers).to_json()


def _cmd_arank(args):
    b = bias(tensor_from_json(_load(args.input)), workers=args.workers)
    return 0, {"arank": b.to_json()["arank"], "bias": b.to_json()}


def _cmd_prank(args):
    r = prank_oracle(tensor_from_json(_load(args.input)), args.r_max)
    return 0, {"prank": r, "r_max": args.r_max, "exceeds_r_max": r is None}


def _cmd_mrank(args):
    return 0, {"rank": matrix_rank(tensor_from_json(_load(args.input)))}


def _cmd_extract(args):
    if args.full_space:
        if None in (args.p, args.d, args.n):
            raise UsageError("--full-space needs -p, -d and -n")
        V = full_space_basis(args.p, args.n, args.d)
    elif args.input:
        V = basis_from_json(_load(args.input))
    else:
        raise UsageError("extract needs -i BASIS or --full-space")
    cert = extract_subspace(V, args.t, args.r, workers=args.workers)
    return 0, cert.to_json()


def _cmd_verify(args):
    cert = ExtractionCertificate.from_json(_load(args.input))
    ok, report = verify_certificate(cert, workers=args.workers)
    return (0 if ok else 1), report


def _cmd_tail(args):
    obj = _load(args.input)
    if "parameters" in obj:
        cert = ExtractionCertificate.from_json(obj)
        W, thr = cert.W_basis, cert.threshold
    else:
        W, thr = basis_from_json(obj), None
    report = tail_bound_check(W, mode=args.mode, threshold=thr, seed=args.seed, workers=args.workers)
    return (0 if report["passed"] else 1), report


def _sim_params(args):
    return SimParams(args.p, args.k, args.n, s=args.s, trials=args.trials,
                     seed=args.seed, C_knob=args.c_knob)


def _cmd_sz_independence(args):
    report = independence_experiment(_sim_params(args), workers=args.workers)
    return 0, report.to_dict()


def _cmd_sz_demo(args):
    report = randomized_szemeredi_demo(_sim_params(args), workers=args.workers,
                                       dump_blockers=args.dump_blockers)
    ok = report.aggregate["all_blockers_ap_free"] and report.aggregate["chevalley_warning_all_passed"]
    return (0 if ok else 1), report.to_dict()


def _cmd_selftest(args):
    results = acceptance.run_all(args.only or None)
    for res in results:
        print(res.line(), file=sys.stderr)
    ok = all(r.passed for r in results)
    return (0 if ok else 1), {"passed": ok, "criteria": [r.to_json() for r in results]}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=default_workers(),
                        help="parallel workers (default: $TRK_THREADS or 1)")
    common.add_argument("--out", help="write the JSON report here instead of stdout")

    parser = _Parser(prog="trk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def tensor_cmd(name, fn, help):
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.add_argument("-i", "--input", required=True, help="tensor JSON file ('-' for stdin)")
        sp.set_defaults(fn=fn)
        return sp

    sp = tensor_cmd("bias", _cmd_bias, "exact bias of a tensor")
    sp.add_argument("--axis", type=int, default=0, help="0-based axis left free")
    tensor_cmd("arank", _cmd_arank, "analytic rank of a tensor")
    sp = tensor_cmd("prank", _cmd_prank, "partition rank (micro shapes only)")
    sp.add_argument("--r-max", type=int, default=8)
    tensor_cmd("mrank", _cmd_mrank, "matrix rank over F_p")

    sp = sub.add_parser("extract", parents=[common], help="extract a high-rank subspace")
    sp.add_argument("-i", "--input", help="subspace basis JSON")
    sp.add_argument("--full-space", action="store_true", help="use all of F_p^{n x ... x n}")
    sp.add_argument("-p", type=int)
    sp.add_argument("-d", type=int)
    sp.add_argument("-n", type=int)
    sp.add_argument("-t", type=int, required=True)
    sp.add_argument("-r", type=int, required=True)
    sp.set_defaults(fn=_cmd_extract)

    sp = sub.add_parser("verify", parents=[common], help="re-verify an extraction certificate")
    sp.add_argument("-i", "--input", required=True)
    sp.set_defaults(fn=_cmd_verify)

    for name, fn in (("sz-independence", _cmd_sz_independence), ("sz-demo", _cmd_sz_demo)):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("-p", type=int, required=True)
        sp.add_argument("-k", type=int, required=True)
        sp.add_argument("-n", type=int, required=True)
        sp.add_argument("-s", type=int, help="sample size (default: from --c-knob)")
        sp.add_argument("--trials", type=int, default=100)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--c-knob", type=float, default=0.0)
        if name == "sz-demo":
            sp.add_argument("--dump-blockers", action="store_true")
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("tail-check", parents=[common], help="tail-bound proof links on W")
    sp.add_argument("-i", "--input", required=True, help="certificate or basis JSON")
    sp.add_argument("--mode", choices=("auto", "exact", "sampled"), default="auto")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=_cmd_tail)

    sp = sub.add_parser("selftest", parents=[common], help="run the acceptance criteria")
    sp.add_argument("--only", nargs="*", choices=sorted(acceptance.CHECKS))
    sp.set_defaults(fn=_cmd_selftest)
    return parser


def _emit(doc, out):
    text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    out = None
    try:
        args = build_parser().parse_args(argv)
        out = args.out
        code, doc = args.fn(args)
    except UsageError as e:
        _emit({"error": {"type": "usage", "message": str(e)}}, out)
        return 2
    except InternalInvariantError as e:
        _emit({"error": {"type": "internal", "step": e.step, "message": str(e)}}, out)
        return 3
    except (ValueError, KeyError, TypeError, OSError) as e:
        _emit({"error": {"type": type(e).__name__, "message": str(e)}}, out)
        return 2
    _emit(doc, out)
    return code


if __name__ == "__main__":
    sys.exit(main())
