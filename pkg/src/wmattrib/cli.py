"""Command line interface.

Subcommands cover the whole workflow: building and extending codebooks,
detection/attribution of decoded bitstrings, printing the closed-form
rate bounds, Monte Carlo simulation against those bounds, axis sweeps,
a selection-strategy benchmark, and a self-check ("verify") that
recomputes key oracles from scratch.

Exit codes: 0 success, 1 negative result (not detected, or a bound
violated in simulation, or a verify failure), 2 usage or data errors.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import os
import statistics
import sys
import tempfile
import time
from fractions import Fraction
from typing import IO, Iterator, Optional, Sequence

import numpy as np

from . import _kernels
from .bitstring import Codebook, Watermark, load_codebook, max_pairwise_ba, save_codebook
from .bounds import (
    BoundInputs,
    binom_tail_ge,
    fdr_upper_bound_general,
    fdr_upper_bound_independent,
    tar_lower_bound,
    tdr_lower_bound,
)
from .config import ExperimentConfig, load_config
from .detection import DetectionThreshold, attribute
from .errors import ConfigError
from .experiment import (
    ExperimentReport,
    SWEEP_AXES,
    compare_bounds,
    run_experiment,
    sweep,
)
from .rng import substream
from .selection import (
    STRATEGY_KINDS,
    SelectionStrategy,
    brute_force_farthest,
    register_user,
)

__all__ = ["main"]


def _fmt(value: object) -> str:
    """Render one CSV cell; floats use repr so outputs are byte-stable."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return str(value)


def _write_csv(fh: IO[str], header: Sequence[str], rows: Iterator[Sequence[object]]) -> None:
    fh.write(",".join(header) + "\n")
    for row in rows:
        fh.write(",".join(_fmt(cell) for cell in row) + "\n")


@contextlib.contextmanager
def _locked(path: str):
    """Single-writer guard: an O_EXCL lock file next to the codebook."""
    lock = path + ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"lock file {lock} exists; another writer is active "
            "(or crashed; remove the file if you are sure)"
        ) from None
    try:
        yield
    finally:
        os.close(fd)
        os.unlink(lock)


def _atomic_save(book: Codebook, path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            save_codebook(book, fh)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _load_book(path: str) -> Codebook:
    with open(path, "rb") as fh:
        return load_codebook(fh)


def _strategy_from_args(args: argparse.Namespace) -> SelectionStrategy:
    return SelectionStrategy(args.strategy, depth=args.depth, rng_seed=args.seed)


def _refuse_overwrite(paths: Sequence[str], force: bool) -> None:
    if force:
        return
    clashes = [p for p in paths if os.path.exists(p)]
    if clashes:
        raise ConfigError(f"refusing to overwrite {clashes}; pass --force")


# ---------------------------------------------------------------- register


def _cmd_register(args: argparse.Namespace) -> int:
    with _locked(args.book):
        if os.path.exists(args.book):
            book = _load_book(args.book)
        elif args.n is not None:
            book = Codebook(args.n)
        else:
            raise ConfigError(f"{args.book} does not exist; pass --n to create it")
        wm, achieved = register_user(book, args.user, _strategy_from_args(args))
        _atomic_save(book, args.book)
    print(f"{args.user}\t{wm.to_hex()}\t{achieved}")
    return 0


# ------------------------------------------------------------ gen-codebook


def _cmd_gen_codebook(args: argparse.Namespace) -> int:
    _refuse_overwrite([args.out], args.force)
    strategy = _strategy_from_args(args)
    book = Codebook(args.n)
    t0 = time.perf_counter()
    report_every = max(1, args.count // 20)
    for i in range(args.count):
        register_user(book, f"u{i + 1:06d}", strategy)
        if sys.stderr.isatty() and (i + 1) % report_every == 0:
            print(f"\r{i + 1}/{args.count}", end="", file=sys.stderr, flush=True)
    if sys.stderr.isatty():
        print(file=sys.stderr)
    elapsed = time.perf_counter() - t0
    _atomic_save(book, args.out)
    peak = _fmt(max_pairwise_ba(book)) if len(book) >= 2 else ""
    print(
        f"wrote {args.out} users={len(book)} n={book.n} "
        f"max_pairwise_ba={peak} seconds={elapsed:.2f}"
    )
    return 0


# ------------------------------------------------------- detect / attribute


def _read_hex_lines(path: str) -> list[str]:
    if path == "-":
        text = sys.stdin.read()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = [line.strip() for line in text.split("\n")]
    return [line for line in lines if line]


def _cmd_detect(args: argparse.Namespace) -> int:
    book = _load_book(args.book)
    thr = DetectionThreshold(args.tau, book.n)
    if args.hex is not None:
        result = attribute(Watermark.from_hex(args.hex, book.n), book, thr)
        user = result.attributed_user if result.attributed_user else "-"
        print(f"detected={int(result.detected)} user={user} ba={_fmt(result.best_ba)}")
        return 0 if result.detected else 1
    rows = []
    any_detected = False
    for i, line in enumerate(_read_hex_lines(args.batch)):
        result = attribute(Watermark.from_hex(line, book.n), book, thr)
        any_detected = any_detected or result.detected
        rows.append(
            (i, int(result.detected), result.attributed_user or "", result.best_ba)
        )
    _write_csv(sys.stdout, ("index", "detected", "user", "best_ba"), iter(rows))
    return 0 if any_detected else 1


def _cmd_attribute(args: argparse.Namespace) -> int:
    book = _load_book(args.book)
    thr = DetectionThreshold(args.tau, book.n)
    rows = []
    for i, line in enumerate(_read_hex_lines(args.batch)):
        r = attribute(Watermark.from_hex(line, book.n), book, thr)
        rows.append(
            (
                i,
                int(r.detected),
                r.attributed_user or "",
                int(r.tied),
                r.best_ba,
                r.runner_up_ba,
            )
        )
    out = sys.stdout if args.out == "-" else open(args.out, "w", encoding="utf-8")
    try:
        _write_csv(
            out,
            ("index", "detected", "user", "tied", "best_ba", "runner_up_ba"),
            iter(rows),
        )
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


# ------------------------------------------------------------------ bounds


def _cmd_bounds(args: argparse.Namespace) -> int:
    inp = BoundInputs(
        n=args.n,
        tau=args.tau,
        beta_i=args.beta,
        gamma=args.gamma,
        s=args.s,
        alpha_min_i=args.alpha_min,
        alpha_max_i=args.alpha_max,
    )
    if float(inp.tau) < inp.beta_i:
        tdr = tdr_lower_bound(inp)
        print(f"tdr_lower={_fmt(tdr.value)} clamped={int(tdr.clamped)}")
    else:
        print("tdr_lower=undefined reason=tau_not_below_beta")
    if inp.s >= 2 and inp.alpha_max_i is None:
        print("tar_lower=undefined reason=needs_alpha_max")
        print("fdr_upper_general=undefined reason=needs_alpha_max")
    else:
        tar = tar_lower_bound(inp)
        print(f"tar_lower={_fmt(tar.value)} clamped={int(tar.clamped)}")
        gen = fdr_upper_bound_general(inp)
        print(f"fdr_upper_general={_fmt(gen.value)} clamped={int(gen.clamped)}")
    ind = fdr_upper_bound_independent(inp)
    print(f"fdr_upper_independent={_fmt(ind.value)} clamped={int(ind.clamped)}")
    if inp.alpha_max_i is not None and inp.s >= 2:
        k_attr = math.floor((1 + inp.alpha_max_i) / 2 * inp.n) + 1
        print(f"detection_implies_attribution={int(inp.k_detect >= k_attr)}")
    return 0


# ---------------------------------------------------------------- simulate


def _per_user_rows(report: ExperimentReport) -> Iterator[Sequence[object]]:
    for u in report.users:
        yield (
            u.user_id,
            u.beta_hat,
            u.tdr,
            u.tar,
            u.tdr_bound,
            u.tar_bound,
            u.alpha_min,
            u.alpha_max,
        )


PER_USER_HEADER = (
    "user_id",
    "beta_hat",
    "tdr",
    "tar",
    "tdr_bound",
    "tar_bound",
    "alpha_min",
    "alpha_max",
)

CHECKS_HEADER = ("user_id", "metric", "empirical", "bound", "margin", "slack", "violated")


def _write_report(report: ExperimentReport, out_dir: str, force: bool) -> int:
    per_user = os.path.join(out_dir, "per_user.csv")
    summary = os.path.join(out_dir, "summary.csv")
    checks_path = os.path.join(out_dir, "bound_checks.csv")
    _refuse_overwrite([per_user, summary, checks_path], force)
    os.makedirs(out_dir, exist_ok=True)
    checks = compare_bounds(report)
    with open(per_user, "w", encoding="utf-8") as fh:
        _write_csv(fh, PER_USER_HEADER, _per_user_rows(report))
    with open(summary, "w", encoding="utf-8") as fh:
        _write_csv(fh, ("metric", "value"), iter(report.summary_rows()))
    with open(checks_path, "w", encoding="utf-8") as fh:
        _write_csv(
            fh,
            CHECKS_HEADER,
            (
                (r.user_id, r.metric, r.empirical, r.bound, r.margin, r.slack, r.violated)
                for r in checks.rows
            ),
        )
    for row in checks.violations:
        print(
            f"bound violated: {row.metric} user={row.user_id or '-'} "
            f"empirical={_fmt(row.empirical)} bound={_fmt(row.bound)} "
            f"slack={_fmt(row.slack)}",
            file=sys.stderr,
        )
    return 1 if checks.violations else 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, seed=args.seed)
    book = _load_book(args.codebook) if args.codebook else None
    report = run_experiment(cfg, book)
    status = _write_report(report, args.out, args.force)
    print(
        f"users={len(report.users)} avg_tdr={_fmt(report.avg_tdr)} "
        f"avg_tar={_fmt(report.avg_tar)} fdr={_fmt(report.fdr)} "
        f"fdr_bound={_fmt(report.fdr_bound)} violations={len(compare_bounds(report).violations)}"
    )
    return status


# ------------------------------------------------------------------- sweep


SWEEP_HEADER = (
    "axis",
    "value",
    "avg_tdr",
    "avg_tar",
    "worst1_tdr",
    "worst1_tar",
    "fdr",
    "fdr_bound",
    "violations",
)


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    values = [v for v in args.values.split(",") if v]
    points = sweep(cfg, args.axis, values)
    _refuse_overwrite([args.out], args.force)
    rows = []
    worst = 0
    for p in points:
        violations = len(compare_bounds(p.report).violations)
        worst = max(worst, violations)
        rows.append(
            (
                p.axis,
                p.value,
                p.report.avg_tdr,
                p.report.avg_tar,
                p.report.worst1_tdr,
                p.report.worst1_tar,
                p.report.fdr,
                p.report.fdr_bound,
                violations,
            )
        )
    if args.out == "-":
        _write_csv(sys.stdout, SWEEP_HEADER, iter(rows))
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            _write_csv(fh, SWEEP_HEADER, iter(rows))
    return 1 if worst else 0


# ------------------------------------------------------------------- bench


def _cmd_bench(args: argparse.Namespace) -> int:
    if args.backend is not None:
        _kernels.set_backend(args.backend)
    print(f"backend={_kernels.active_backend()}")
    for kind in args.strategies.split(","):
        strategy = SelectionStrategy(kind, depth=args.depth, rng_seed=args.seed)
        book = Codebook(args.n)
        times = []
        for i in range(args.count):
            t0 = time.perf_counter()
            register_user(book, f"u{i + 1:06d}", strategy)
            times.append((time.perf_counter() - t0) * 1e3)
        peak = max_pairwise_ba(book) if len(book) >= 2 else None
        print(
            f"strategy={kind} users={args.count} n={args.n} "
            f"mean_ms={statistics.fmean(times):.3f} "
            f"median_ms={statistics.median(times):.3f} "
            f"max_pairwise_ba={_fmt(peak)}"
        )
    return 0


# ------------------------------------------------------------------ verify


def _exact_tail_ge(n: int, p: Fraction, k: int) -> Fraction:
    q = 1 - p
    return sum(
        (math.comb(n, j) * p**j * q ** (n - j) for j in range(max(k, 0), n + 1)),
        start=Fraction(0),
    )


def _verify_checks(rng_seed: int) -> Iterator[tuple[str, bool, str]]:
    rng = substream(rng_seed, 99)

    # Packed round trip through hex must be lossless.
    ok = True
    detail = ""
    for _ in range(50):
        n = int(rng.integers(1, 130))
        wm = Watermark(rng.integers(0, 2, n, dtype=np.uint8))
        back = Watermark.from_hex(wm.to_hex(), n)
        if back != wm:
            ok, detail = False, f"hex round trip broke at n={n}"
            break
    yield "hex-round-trip", ok, detail

    # The exact search must agree with brute force on small instances.
    ok, detail = True, ""
    for trial in range(30):
        n = int(rng.integers(4, 11))
        s = int(rng.integers(1, 7))
        book = Codebook(n)
        seen = set()
        for j in range(s):
            while True:
                wm = Watermark(rng.integers(0, 2, n, dtype=np.uint8))
                if wm not in seen:
                    seen.add(wm)
                    break
            book.add(f"u{j}", wm)
        _, m_opt = brute_force_farthest(book)
        strategy = SelectionStrategy("bsta", depth=n, rng_seed=int(rng.integers(1 << 31)))
        from .selection import select_watermark

        _, achieved = select_watermark(book, strategy)
        if achieved != m_opt:
            ok = False
            detail = f"trial {trial}: search got {achieved}, brute force {m_opt}"
            break
    yield "exact-search-vs-brute-force", ok, detail

    # Floating tail sums against exact rational arithmetic.
    ok, detail = True, ""
    for n in (1, 7, 33, 64):
        for p in (Fraction(1, 100), Fraction(1, 2), Fraction(97, 100)):
            for k in range(0, n + 1, max(1, n // 7)):
                got = binom_tail_ge(n, float(p), k)
                want = float(_exact_tail_ge(n, p, k))
                if abs(got - want) > 1e-12:
                    ok = False
                    detail = f"tail_ge(n={n}, p={p}, k={k}): {got} vs {want}"
                    break
    yield "binomial-tails-vs-rational", ok, detail

    # The large-scale reference point for all four bounds.
    inp = BoundInputs(
        n=64,
        tau="0.9",
        beta_i=0.99,
        gamma=0.05,
        s=100_000_000,
        alpha_min_i="0.2",
        alpha_max_i="0.8",
    )
    tdr = tdr_lower_bound(inp).value
    fdr = fdr_upper_bound_independent(inp).value
    tar = tar_lower_bound(inp).value
    ok = (
        abs(tdr - 0.9999962280431586) < 1e-12
        and abs(fdr - 0.05998120987918049) < 1e-12
        and tar == tdr
    )
    yield "reference-bounds", ok, "" if ok else f"tdr={tdr} fdr={fdr} tar={tar}"

    # Both kernel backends must agree bit for bit when available.
    backends = _kernels.available_backends()
    if len(backends) >= 2:
        ok, detail = True, ""
        book_words = np.asarray(
            [Watermark(rng.integers(0, 2, 64, dtype=np.uint8)).words[0] for _ in range(64)],
            dtype=np.uint64,
        ).reshape(64, 1)
        cands = book_words[rng.permutation(64)][:16]
        results = {}
        previous = _kernels.active_backend()
        try:
            for name in backends:
                _kernels.set_backend(name)
                results[name] = _kernels.attribute_batch(book_words, cands, 64)
        finally:
            _kernels.set_backend(previous)
        first, second = (results[name] for name in backends[:2])
        if not all(np.array_equal(a, b) for a, b in zip(first, second)):
            ok, detail = False, "attribute_batch differs between backends"
        yield "backend-parity", ok, detail
    else:
        yield "backend-parity", True, "single backend present, nothing to compare"


def _cmd_verify(args: argparse.Namespace) -> int:
    failures = 0
    for name, ok, detail in _verify_checks(args.seed):
        line = f"{'PASS' if ok else 'FAIL'} {name}"
        if detail:
            line += f": {detail}"
        print(line)
        failures += 0 if ok else 1
    print(f"{'OK' if failures == 0 else 'FAILED'} ({failures} failures)")
    return 1 if failures else 0


# -------------------------------------------------------------------- main


def _add_strategy_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=STRATEGY_KINDS, default="absta")
    p.add_argument("--depth", type=int, default=8, help="work budget per decision")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wmattrib",
        description="Design, detect, and attribute per-user watermark bitstrings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="select a watermark for one new user")
    p.add_argument("book", help="codebook file (created when --n is given)")
    p.add_argument("--user", required=True)
    p.add_argument("--n", type=int, default=None, help="bit length for a new codebook")
    _add_strategy_args(p)
    p.set_defaults(func=_cmd_register)

    p = sub.add_parser("gen-codebook", help="build a codebook for many users")
    p.add_argument("out")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--force", action="store_true")
    _add_strategy_args(p)
    p.set_defaults(func=_cmd_gen_codebook)

    p = sub.add_parser("detect", help="check decoded hex strings against a codebook")
    p.add_argument("book")
    p.add_argument("--tau", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--hex", help="one decoded bitstring as hex")
    group.add_argument("--batch", help="file of hex lines, - for stdin")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("attribute", help="batch attribution to CSV")
    p.add_argument("book")
    p.add_argument("--tau", required=True)
    p.add_argument("--batch", required=True, help="file of hex lines, - for stdin")
    p.add_argument("--out", default="-", help="output CSV path, - for stdout")
    p.set_defaults(func=_cmd_attribute)

    p = sub.add_parser("bounds", help="print the closed-form rate bounds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tau", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--alpha-min", default=None)
    p.add_argument("--alpha-max", default=None)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("simulate", help="run a configured experiment, write CSVs")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--codebook", default=None, help="reuse an existing codebook file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="repeat an experiment along one axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", required=True, help="comma separated")
    p.add_argument("--out", default="-", help="output CSV path, - for stdout")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("bench", help="time watermark selection per strategy")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategies", default="random,absta,nrg")
    p.add_argument(
        "--backend",
        choices=("compiled", "python"),
        default=None,
        help="force a kernel backend",
    )
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("verify", help="recompute oracle cross-checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
