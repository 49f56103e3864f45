"""Command-line front end.

Generators write ``#`` header lines (including a command that re-runs the
invocation) followed by one tab-separated ``u v`` pair per line.  Wall
time goes to stderr so identical runs produce identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shlex
import sys
import time
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from .arith import format_rational, parse_rational
from .binomial import ChainStats, build_spec, sample_truncated_binomial
from .generators import (
    BipartiteSampler,
    EdgeList,
    GnpSampler,
    InnerProductSampler,
    Initiator,
    KroneckerSampler,
    WeightedSampler,
)
from .randomness import BitSource, entropy_seed, format_seed, parse_seed

SEED_ENV = "EPSGRAPH_SEED"
PROG = "epsgraph"


class UsageError(Exception):
    pass


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _probability(text: str) -> Fraction:
    p = _rational(text)
    if not 0 <= p <= 1:
        raise argparse.ArgumentTypeError(f"probability {text} outside [0, 1]")
    return p


def _open_probability(text: str) -> Fraction:
    p = _rational(text)
    if not 0 < p < 1:
        raise argparse.ArgumentTypeError(f"{text} must lie strictly between 0 and 1")
    return p


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    try:
        return parse_seed(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _common(p: argparse.ArgumentParser, eps: bool = True) -> None:
    if eps:
        p.add_argument("--eps", type=_open_probability, required=True,
                       help="total variation budget, e.g. 1/100 or 1e-2")
    p.add_argument("--seed", type=_seed, default=None,
                   help=f"64 hex digits or a decimal integer (default: ${SEED_ENV}, else fresh entropy)")
    p.add_argument("-o", "--output", default="-", help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Random graphs within a stated total variation of the model.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gnp", help="Erdos-Renyi G(n, p)")
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--p", type=_probability, required=True)
    _common(g)

    b = sub.add_parser("bipartite", help="bipartite G(n1, n2, p)")
    b.add_argument("--n1", type=_positive_int, required=True)
    b.add_argument("--n2", type=_positive_int, required=True)
    b.add_argument("--p", type=_probability, required=True)
    _common(b)

    w = sub.add_parser("weighted", help="expected-degree G(n, w), one weight per line")
    w.add_argument("--weights", required=True, help="file with one positive rational per line")
    w.add_argument("--workers", type=_positive_int, default=1)
    _common(w)

    d = sub.add_parser("dot", help="inner-product G(n, W), one row of d rationals per line")
    d.add_argument("--matrix", required=True)
    d.add_argument("--workers", type=_positive_int, default=1)
    _common(d)

    k = sub.add_parser("kronecker", help="stochastic Kronecker G(n, P) with n = d**k")
    k.add_argument("--initiator", required=True, help="file with d lines of d rationals")
    k.add_argument("--k", type=_positive_int, required=True)
    k.add_argument("--undirected", action="store_true", help="keep only pairs u < v")
    k.add_argument("--no-self-loops", action="store_true")
    k.add_argument("--workers", type=_positive_int, default=1)
    _common(k)

    t = sub.add_parser("binomial", help="draws from the truncated binomial, one value and coupling time per line")
    t.add_argument("--trials", type=_positive_int, required=True)
    t.add_argument("--p", type=_open_probability, required=True)
    t.add_argument("--samples", type=_positive_int, default=1)
    _common(t)

    v = sub.add_parser("verify", help="exact and statistical checks")
    vs = v.add_subparsers(dest="check", required=True)
    for name, text in (("balance", "detailed balance of the chain, exactly"),
                       ("tail", "binomial mass outside the interval, exactly")):
        c = vs.add_parser(name, help=text)
        c.add_argument("--trials", type=_positive_int, required=True)
        c.add_argument("--p", type=_open_probability, required=True)
        c.add_argument("--eps", type=_open_probability, required=True)
        c.add_argument("--summary", help="also write the results as JSON")
    c = vs.add_parser("tv", help="empirical total variation of the sampler")
    c.add_argument("--trials", type=_positive_int, required=True)
    c.add_argument("--p", type=_open_probability, required=True)
    c.add_argument("--samples", type=_positive_int, default=10 ** 4)
    c.add_argument("--summary")
    _common(c)
    c = vs.add_parser("skip-bias", help="bias of geometric skipping with a b-bit uniform")
    c.add_argument("--p", type=_open_probability, required=True)
    c.add_argument("--bits", type=_positive_int, required=True)
    c.add_argument("--samples", type=int, default=0)
    c.add_argument("--summary")
    _common(c, eps=False)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["gen"]:
        argv = argv[1:]
    return build_parser().parse_args(argv)


# input files

def _read_rows(path: str) -> List[List[Fraction]]:
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")
    rows = []
    for number, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([parse_rational(x) for x in line.split()])
        except ValueError as exc:
            raise UsageError(f"{path}:{number}: {exc}")
    return rows


def read_weights(path: str) -> List[Fraction]:
    rows = _read_rows(path)
    if any(len(r) != 1 for r in rows):
        raise UsageError(f"{path}: expected one weight per line")
    return [r[0] for r in rows]


def read_matrix(path: str) -> List[List[Fraction]]:
    rows = _read_rows(path)
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise UsageError(f"{path}: rows must all have the same number of entries")
    return rows


def read_initiator(path: str) -> List[List[Fraction]]:
    rows = read_matrix(path)
    if len(rows) != len(rows[0]):
        raise UsageError(f"{path}: initiator must be square")
    return rows


def _file_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# output

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return format_rational(value)
    return str(value)


def _rerun(args: argparse.Namespace, seed: int) -> str:
    words = [PROG, args.command]
    if args.command == "verify":
        words.append(args.check)
    # workers never change the output, so files match across worker counts
    skip = {"command", "check", "seed", "output", "summary", "workers"}
    for key, value in vars(args).items():
        if key in skip or value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        words.append(flag if value is True else f"{flag} {shlex.quote(_fmt(value))}")
    words.append(f"--seed {format_seed(seed)}")
    return " ".join(words)


def format_edges(graph: EdgeList, header: Dict[str, object]) -> str:
    lines = [f"# {key}: {_fmt(value)}" for key, value in header.items()]
    lines.extend(f"{u}\t{v}" for u, v in graph.edges)
    return "\n".join(lines) + "\n"


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w") as fh:
        fh.write(text)


def _resolve_seed(args: argparse.Namespace) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return parse_seed(env)
        except ValueError as exc:
            raise UsageError(f"${SEED_ENV}: {exc}")
    return entropy_seed()


def _generate(args: argparse.Namespace, src: BitSource) -> EdgeList:
    cmd = args.command
    try:
        if cmd == "gnp":
            return GnpSampler(args.n, args.p, args.eps).sample(src)
        if cmd == "bipartite":
            return BipartiteSampler(args.n1, args.n2, args.p, args.eps).sample(src)
        if cmd == "weighted":
            return WeightedSampler(read_weights(args.weights), args.eps).sample(src, args.workers)
        if cmd == "dot":
            return InnerProductSampler(read_matrix(args.matrix), args.eps).sample(src, args.workers)
        init = Initiator.of(read_initiator(args.initiator), args.k)
        sampler = KroneckerSampler(init, args.eps, args.undirected, not args.no_self_loops)
        return sampler.sample(src, args.workers)
    except ValueError as exc:
        raise UsageError(str(exc))


def _graph_header(args, seed: int, graph: EdgeList) -> Dict[str, object]:
    header: Dict[str, object] = {"command": _rerun(args, seed), "seed": format_seed(seed)}
    for key in ("weights", "matrix", "initiator"):
        path = getattr(args, key, None)
        if path:
            header[f"{key}_sha256"] = _file_digest(path)
    header.update(graph.meta)
    header["edges"] = len(graph.edges)
    return header


def _binomial(args, seed: int, src: BitSource) -> str:
    spec = build_spec(args.trials, args.p, args.eps)
    stats = ChainStats()
    draws = [sample_truncated_binomial(spec, src, stats) for _ in range(args.samples)]
    header = {
        "command": _rerun(args, seed), "seed": format_seed(seed),
        "N": spec.N, "p": spec.p, "eps": spec.eps, "mu_bar": spec.mu_bar,
        "delta": spec.delta, "lo": spec.lo, "hi": spec.hi, "samples": args.samples,
        "coupling_steps": stats.coupling_time, "chain_updates": stats.updates,
        "monotonicity_violations": stats.violations,
    }
    lines = [f"# {key}: {_fmt(value)}" for key, value in header.items()]
    lines.extend(f"{d.value}\t{d.coupling_time}" for d in draws)
    return "\n".join(lines) + "\n"


def _verify(args, seed: Optional[int]) -> Dict[str, object]:
    from . import verify as V

    if args.check in ("balance", "tail", "tv"):
        spec = build_spec(args.trials, args.p, getattr(args, "eps"))
        out: Dict[str, object] = {"N": spec.N, "p": spec.p, "eps": spec.eps, "lo": spec.lo, "hi": spec.hi}
        if spec.N > V.PMF_CAP:
            raise UsageError(f"--trials above the exact pmf cap {V.PMF_CAP}")
    if args.check == "balance":
        out["detailed_balance"] = V.check_detailed_balance(spec)
        out["ok"] = out["detailed_balance"]
    elif args.check == "tail":
        tail = V.spec_tail_mass(spec)
        out["tail_mass"] = tail
        out["tail_mass_float"] = f"{float(tail):.6e}"
        out["ok"] = tail < spec.eps
    elif args.check == "tv":
        src = BitSource(seed)
        stats = ChainStats()
        hist = V.Histogram.of(sample_truncated_binomial(spec, src, stats).value for _ in range(args.samples))
        tv_trunc = V.tv_distance(hist, V.truncated_pmf(spec))
        tv_full = V.tv_distance(hist, V.binomial_pmf_exact(spec.N, spec.p))
        out.update(seed=format_seed(seed), samples=args.samples,
                   tv_truncated=f"{float(tv_trunc):.6f}", tv_full=f"{float(tv_full):.6f}",
                   mean_coupling_steps=f"{stats.coupling_time / args.samples:.3f}",
                   coupling_bound=spec.coupling_bound, monotonicity_violations=stats.violations)
        out["ok"] = stats.violations == 0
    else:
        kmax, missing = V.max_skip_bound(args.p, args.bits)
        out = {"p": args.p, "bits": args.bits, "kmax": kmax, "missing_mass": missing,
               "missing_mass_float": f"{float(missing):.6e}",
               "skip_law_tv": f"{float(V.skip_law_tv(args.p, args.bits)):.6e}"}
        ok = True
        if args.samples > 0:
            src = BitSource(seed)
            draws = [V.skip_baseline_draw(args.p, args.bits, src) for _ in range(args.samples)]
            out.update(seed=format_seed(seed), samples=args.samples, max_observed=max(draws),
                       above_kmax=sum(s > kmax for s in draws))
            ok = out["above_kmax"] == 0
        out["ok"] = ok
    return out


def run(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    needs_seed = args.command != "verify" or args.check == "tv" or (
        args.check == "skip-bias" and args.samples > 0)
    seed = _resolve_seed(args) if needs_seed else None
    if args.command == "verify":
        results = _verify(args, seed)
        text = "".join(f"{key}={_fmt(value)}\n" for key, value in results.items())
        if getattr(args, "summary", None):
            with open(args.summary, "w") as fh:
                json.dump({k: (v if isinstance(v, (bool, int)) else _fmt(v)) for k, v in results.items()},
                          fh, indent=2, sort_keys=True)
                fh.write("\n")
        _write(getattr(args, "output", "-"), text)
        code = 0 if results["ok"] else 1
    else:
        src = BitSource(seed)
        if args.command == "binomial":
            try:
                text = _binomial(args, seed, src)
            except ValueError as exc:
                raise UsageError(str(exc))
        else:
            graph = _generate(args, src)
            text = format_edges(graph, _graph_header(args, seed, graph))
        _write(args.output, text)
        code = 0
    print(f"{PROG}: wall time {time.perf_counter() - started:.3f} s", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    try:
        return run(args)
    except UsageError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
