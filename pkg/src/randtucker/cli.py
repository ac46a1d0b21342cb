"""Command-line interface: ``randtucker {synth,compress,reconstruct,error,bench,simulate}``."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis, gridsim
from .algorithms import ALGORITHMS, decompose, reconstruct, relative_error, sthosvd
from .dimtree import simulate_sketch_flops
from .io import read_bundle, read_tensor, write_bundle, write_tensor
from .sketch import DISTRIBUTIONS
from .synth import GENERATORS

RANDOMIZED = tuple(a for a in ALGORITHMS if a not in ("hosvd", "sthosvd"))


def int_list(text: str) -> list:
    """Parse ``"4x4x4"`` or ``"4,4,4"`` into integers."""
    parts = text.replace("x", ",").split(",")
    try:
        out = [int(p) for p in parts if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected integers separated by 'x' or ',', got {text!r}") from exc
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _ranks(rank: list, d: int) -> list:
    if len(rank) == 1:
        return rank * d
    if len(rank) != d:
        raise ValueError(f"--rank has {len(rank)} entries for a {d}-way tensor")
    return rank


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _make_tensor(args) -> np.ndarray:
    if getattr(args, "input", None):
        return read_tensor(args.input)
    dims = args.dims
    if args.generator == "geometric":
        return GENERATORS["geometric"](dims, args.decay, args.data_seed)
    if args.generator == "lowrank-noise":
        return GENERATORS["lowrank-noise"](dims, _ranks(args.true_rank, len(dims)), args.noise, args.data_seed)
    return GENERATORS["exact-lowrank"](dims, _ranks(args.true_rank, len(dims)), args.data_seed)


def _add_source(p: argparse.ArgumentParser, default_dims: str) -> None:
    p.add_argument("--input", help="read the tensor from this payload (with .meta sidecar)")
    p.add_argument("--generator", choices=sorted(GENERATORS), default="geometric")
    p.add_argument("--dims", type=int_list, default=int_list(default_dims))
    p.add_argument("--decay", type=float, default=0.4)
    p.add_argument("--true-rank", type=int_list, default=[5])
    p.add_argument("--noise", type=float, default=1e-4)
    p.add_argument("--data-seed", type=int, default=0)


# --- subcommands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    X = _make_tensor(args)
    write_tensor(X, args.out, args.dtype)
    print(f"wrote {args.generator} tensor dims={list(X.shape)} to {args.out}")
    return 0


def cmd_compress(args) -> int:
    X = read_tensor(args.input)
    r = _ranks(args.rank, X.ndim)
    kwargs = {}
    if args.alg == "rhkron-re":
        kwargs["use_dimtree"] = args.dimtree == "on"
    if args.alg in ("hosvd", "sthosvd"):
        T = decompose(X, args.alg, r)
    else:
        T = decompose(X, args.alg, r, args.oversample, distribution=args.dist, seed=args.seed, **kwargs)
    err = relative_error(X, T)
    if args.out:
        write_bundle(T, args.out, {"relative_error": err})
    fb = T.provenance.get("fallbacks") or []
    note = f" fallbacks={len(fb)}" if fb else ""
    print(f"alg={args.alg} ranks={list(T.ranks)} rel_error={err:.6e}{note}")
    return 0


def cmd_reconstruct(args) -> int:
    T = read_bundle(args.bundle)
    write_tensor(reconstruct(T), args.out, args.dtype)
    print(f"wrote reconstruction dims={list(T.dims)} to {args.out}")
    return 0


def cmd_error(args) -> int:
    X = read_tensor(args.input)
    T = read_bundle(args.bundle)
    if tuple(X.shape) != tuple(T.dims):
        raise ValueError(f"tensor dims {X.shape} do not match bundle dims {T.dims}")
    print(f"rel_error={relative_error(X, T):.6e}")
    return 0


def bench_accuracy(args) -> str:
    X = _make_tensor(args)
    r = _ranks(args.rank, X.ndim)
    det = relative_error(X, sthosvd(X, r))
    rows = []
    for alg in args.algs:
        errs = np.array([relative_error(X, decompose(X, alg, r, args.oversample, distribution=args.dist,
                                                      seed=args.seed + t))
                         for t in range(args.trials)])
        med = float(np.median(errs))
        rows.append({"algorithm": alg, "distribution": args.dist, "trials": args.trials,
                     "deterministic": f"{det:.6e}", "median": f"{med:.6e}",
                     "min": f"{errs.min():.6e}", "max": f"{errs.max():.6e}",
                     "median_ratio": f"{med / det:.6f}", "max_ratio": f"{errs.max() / det:.6f}"})
    return analysis.write_csv(rows)


def bench_mttm(args) -> str:
    n, q, s, d = args.n, args.q, args.s, args.d
    rng = np.random.default_rng(args.seed)
    X = np.asfortranarray(rng.standard_normal((n,) * d))
    mats = {k: rng.standard_normal((s, n)) for k in range(d)}
    rows = []
    for variant in ("is", "aao"):
        grid = gridsim.Grid((q,) * d)
        D = gridsim.distribute(X, grid)
        with grid.in_phase(variant):
            if variant == "is":
                gridsim.is_mttm(D, mats, skip=0, even=False)
            else:
                gridsim.aao_mttm(D, mats, skip=0)
        first = next(c for c in grid.stats.collectives if c.kind == "reduce_scatter")
        predicted = gridsim.is_first_payload(n, s, d, q) if variant == "is" else gridsim.aao_payload(n, s, d, q)
        rows.append({"variant": variant, "n": n, "q": q, "s": s, "d": d,
                     "first_payload": first.payload, "predicted_payload": predicted,
                     "max_flops": grid.stats.max_over_ranks("flops"),
                     "max_words_sent": grid.stats.max_over_ranks("words_sent"),
                     "messages": grid.stats.max_over_ranks("messages")})
    return analysis.write_csv(rows)


def bench_dimtree(args) -> str:
    rows = []
    for d in args.orders:
        dims, rows_k = (args.n,) * d, (args.r,) * d
        tree = simulate_sketch_flops(dims, rows_k, True)
        naive = simulate_sketch_flops(dims, rows_k, False)
        rows.append({"d": d, "n": args.n, "r": args.r, "with_tree": tree, "without_tree": naive,
                     "ratio": f"{naive / tree:.6f}", "half_d": d / 2})
    return analysis.write_csv(rows)


def cmd_bench(args) -> int:
    text = {"accuracy": bench_accuracy, "mttm": bench_mttm, "dimtree": bench_dimtree}[args.kind](args)
    _emit(text, args.out)
    return 0


def cmd_simulate(args) -> int:
    X = _make_tensor(args)
    grid = gridsim.Grid(args.grid)
    D = gridsim.distribute(X, grid)
    r = _ranks(args.rank, X.ndim)
    t0 = time.perf_counter()
    if args.alg == "alg11":
        T = gridsim.parallel_rsthosvd_kron(D, r, args.oversample, distribution=args.dist, seed=args.seed,
                                           mttm=args.mttm)
    else:
        T = gridsim.parallel_rhkron_re(D, r, args.oversample, distribution=args.dist, seed=args.seed)
    elapsed = time.perf_counter() - t0
    stats = grid.stats
    balanced = stats.total("words_sent") == stats.total("words_recv")
    _emit(stats.to_csv(), args.out)
    print(f"alg={args.alg} grid={'x'.join(map(str, grid.shape))} ranks={list(T.ranks)} "
          f"rel_error={relative_error(X, T):.6e} words_balanced={balanced} sim_seconds={elapsed:.3f}",
          file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="randtucker", description="Randomized Tucker decompositions.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic tensor")
    _add_source(p, "100x100x100")
    p.add_argument("--out", required=True)
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compress", help="compute a Tucker decomposition")
    p.add_argument("input")
    p.add_argument("--alg", choices=ALGORITHMS, default="rhkron-re")
    p.add_argument("--rank", type=int_list, required=True)
    p.add_argument("--oversample", type=int, default=5)
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dimtree", choices=("on", "off"), default="on")
    p.add_argument("--out", help="bundle directory")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("reconstruct", help="expand a bundle into a full tensor")
    p.add_argument("bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("error", help="relative error of a bundle against a tensor")
    p.add_argument("input")
    p.add_argument("bundle")
    p.set_defaults(func=cmd_error)

    p = sub.add_parser("bench", help="CSV benchmarks")
    p.add_argument("kind", choices=("accuracy", "mttm", "dimtree"))
    _add_source(p, "100x100x100")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--rank", type=int_list, default=[10])
    p.add_argument("--oversample", type=int, default=5)
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="gaussian")
    p.add_argument("--algs", nargs="+", choices=RANDOMIZED, default=list(RANDOMIZED))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--q", type=int, default=4)
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--orders", type=int_list, default=[3, 4, 5])
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="run a parallel algorithm on a simulated grid")
    _add_source(p, "40x40x40")
    p.add_argument("--grid", type=int_list, required=True)
    p.add_argument("--alg", choices=tuple(gridsim.PARALLEL_ALGORITHMS), default="alg11")
    p.add_argument("--mttm", choices=gridsim.MTTM_VARIANTS, default="aao")
    p.add_argument("--rank", type=int_list, default=[5])
    p.add_argument("--oversample", type=int, default=3)
    p.add_argument("--dist", choices=DISTRIBUTIONS, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", choices=("csv",), default="csv")
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
