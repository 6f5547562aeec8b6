"""End-to-end Monte Carlo runs: build a codebook, push decoded samples
through the channel, score detection and attribution, and compare the
empirical rates with their closed-form bounds.

Everything is driven by named substreams of one master seed, keyed by
purpose and user index, so a report is reproducible bit for bit and a
sweep over one axis leaves every other random draw untouched (the
codebook built for 1000 users literally extends the one built for 10).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import _kernels
from ._exact import exact_fraction
from .bitstring import Codebook, max_pairwise_ba, pairwise_match_stats
from .bounds import (
    BoundInputs,
    fdr_upper_bound_general,
    fdr_upper_bound_independent,
    tar_lower_bound,
    tdr_lower_bound,
)
from .channel import (
    IDENTITY_PROFILE,
    degrade_beta,
    resolve_profile,
    simulate_unwatermarked_batch,
    simulate_watermarked_batch,
    unwatermarked_bit_probs,
)
from .config import ExperimentConfig
from .detection import DetectionThreshold, Outcome
from .errors import ConfigError
from .rng import substream
from .selection import register_user

__all__ = [
    "UserResult",
    "ExperimentReport",
    "BoundCheckRow",
    "BoundComparison",
    "SweepPoint",
    "SWEEP_AXES",
    "Z_99",
    "build_codebook",
    "run_experiment",
    "compare_bounds",
    "wilson_interval",
    "sweep",
]

# Substream purposes under the master seed. Selection runs under the
# strategy's own seed; everything here is channel randomness.
_KEY_WATERMARKED = 1
_KEY_UNWATERMARKED = 2
_KEY_BETA_DRAW = 3  # consumed inside BetaSpec.resolve
_KEY_BIT_PROBS = 4

SWEEP_AXES = ("s", "n", "tau", "strategy", "postprocess")

# Two-sided 99% normal quantile, used for Monte Carlo slack.
Z_99 = 2.5758293035489004


@dataclass(frozen=True)
class UserResult:
    """Per-user empirical rates and the bounds they are checked against.

    ``beta_true`` is the post-processing-adjusted accuracy the samples
    were actually drawn with; ``beta_hat`` is re-estimated from those
    samples. ``tdr_bound`` is None when beta_true <= tau, where the
    detection guarantee gives no information.
    """

    user_id: str
    beta_true: float
    beta_hat: float
    tdr: float
    tar: float
    alpha_min: Optional[Fraction]
    alpha_max: Optional[Fraction]
    tdr_bound: Optional[float]
    tar_bound: float


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    users: tuple[UserResult, ...]
    branch_counts: Mapping[Outcome, int]
    fdr: Optional[float]
    gamma_hat: Optional[float]
    fdr_bound: float
    fdr_bound_general: float
    avg_tdr: float
    avg_tar: float
    worst1_tdr: float
    worst1_tar: float
    worst1_size: int
    coincide_all: bool
    max_pairwise_ba: Optional[Fraction]

    def summary_rows(self) -> list[tuple[str, object]]:
        """Flat metric/value pairs, the shape the summary CSV is written in."""
        rows: list[tuple[str, object]] = [
            ("users", len(self.users)),
            ("samples_per_user", self.config.samples_per_user),
            ("fdr_samples", self.config.fdr_samples),
            ("avg_tdr", self.avg_tdr),
            ("avg_tar", self.avg_tar),
            ("worst1_tdr", self.worst1_tdr),
            ("worst1_tar", self.worst1_tar),
            ("worst1_size", self.worst1_size),
            ("fdr", self.fdr),
            ("gamma_hat", self.gamma_hat),
            ("fdr_bound", self.fdr_bound),
            ("fdr_bound_general", self.fdr_bound_general),
            ("coincide_all", self.coincide_all),
            ("max_pairwise_ba", self.max_pairwise_ba),
        ]
        rows.extend(
            (f"branch_{outcome.name.lower()}", self.branch_counts.get(outcome, 0))
            for outcome in Outcome
        )
        return rows


def build_codebook(
    cfg: ExperimentConfig,
    progress: Optional[Callable[[int, int], None]] = None,
) -> Codebook:
    """Register cfg.s users under the configured selection strategy.

    User ids are u000001.. in registration order. ``progress`` is called
    as (done, total) after each registration.
    """
    book = Codebook(cfg.n)
    for i in range(cfg.s):
        register_user(book, f"u{i + 1:06d}", cfg.strategy)
        if progress is not None:
            progress(i + 1, cfg.s)
    return book


def _per_user_bounds(
    cfg: ExperimentConfig,
    beta_true: float,
    alpha_min_i: Optional[Fraction],
    alpha_max_i: Optional[Fraction],
    s: int,
) -> tuple[Optional[float], float, bool]:
    inp = BoundInputs(
        n=cfg.n,
        tau=cfg.tau,
        beta_i=beta_true,
        gamma=cfg.channel.gamma,
        s=s,
        alpha_min_i=alpha_min_i,
        alpha_max_i=alpha_max_i,
    )
    if float(cfg.tau) < beta_true:
        tdr_bound = tdr_lower_bound(inp).value
    else:
        tdr_bound = None
    tar = tar_lower_bound(inp)
    if s >= 2 and alpha_max_i is not None:
        coincide = inp.k_detect >= int(tar.terms["k_attr"])
    else:
        coincide = True
    return tdr_bound, tar.value, coincide


def run_experiment(
    cfg: ExperimentConfig, codebook: Optional[Codebook] = None
) -> ExperimentReport:
    """Simulate the full pipeline and score it; deterministic in cfg.seed.

    A prebuilt ``codebook`` (same n) may be supplied, e.g. one loaded
    from disk; its size then overrides cfg.s.
    """
    if codebook is None:
        codebook = build_codebook(cfg)
    elif codebook.n != cfg.n:
        raise ConfigError(f"codebook has n={codebook.n}, config has n={cfg.n}")
    elif len(codebook) == 0:
        raise ConfigError("codebook has no users")
    s = len(codebook)
    cfg = dataclasses.replace(cfg, s=s)
    thr = DetectionThreshold(cfg.tau, cfg.n)
    profile = (
        resolve_profile(cfg.postprocess, cfg.profiles)
        if cfg.postprocess is not None
        else IDENTITY_PROFILE
    )

    if s >= 2:
        min_counts, max_counts = pairwise_match_stats(codebook)
        alpha_mins = [Fraction(int(c), cfg.n) for c in min_counts]
        alpha_maxs = [Fraction(int(c), cfg.n) for c in max_counts]
        pairwise_peak = max_pairwise_ba(codebook)
    else:
        alpha_mins = [None]
        alpha_maxs = [None]
        pairwise_peak = None

    counts = {outcome: 0 for outcome in Outcome}
    users: list[UserResult] = []
    coincide_all = True
    samples = cfg.samples_per_user
    for i in range(s):
        beta_true = degrade_beta(cfg.channel.beta.resolve(cfg.seed, i), profile)
        wm = codebook.watermark(i)
        rng = substream(cfg.seed, _KEY_WATERMARKED, i)
        decoded = simulate_watermarked_batch(wm, beta_true, samples, rng)
        idx, best, runner = _kernels.attribute_batch(codebook.words, decoded, cfg.n)
        detected = best >= thr.k_min
        correct = detected & (idx == i) & (runner < best)
        own = _kernels.match_counts(decoded, codebook.words[i], cfg.n)

        n_det = int(detected.sum())
        n_cor = int(correct.sum())
        counts[Outcome.MISSED_DETECTION] += samples - n_det
        counts[Outcome.CORRECT_ATTRIBUTION] += n_cor
        counts[Outcome.WRONG_ATTRIBUTION] += n_det - n_cor

        tdr_bound, tar_bound, coincide = _per_user_bounds(
            cfg, beta_true, alpha_mins[i], alpha_maxs[i], s
        )
        coincide_all = coincide_all and coincide
        users.append(
            UserResult(
                user_id=codebook.user_id(i),
                beta_true=beta_true,
                beta_hat=float(Fraction(int(own.sum()), cfg.n * samples)),
                tdr=n_det / samples,
                tar=n_cor / samples,
                alpha_min=alpha_mins[i],
                alpha_max=alpha_maxs[i],
                tdr_bound=tdr_bound,
                tar_bound=tar_bound,
            )
        )

    if cfg.fdr_samples > 0:
        bit_probs = unwatermarked_bit_probs(
            cfg.n,
            cfg.channel.gamma,
            cfg.channel.gamma_mode,
            substream(cfg.seed, _KEY_BIT_PROBS),
        )
        plain, total_ones = simulate_unwatermarked_batch(
            cfg.n,
            cfg.channel.gamma,
            cfg.channel.gamma_mode,
            cfg.fdr_samples,
            substream(cfg.seed, _KEY_UNWATERMARKED),
            bit_probs,
        )
        _, best, _ = _kernels.attribute_batch(codebook.words, plain, cfg.n)
        false_hits = int((best >= thr.k_min).sum())
        counts[Outcome.FALSE_DETECTION] += false_hits
        counts[Outcome.CORRECT_REJECTION] += cfg.fdr_samples - false_hits
        fdr = false_hits / cfg.fdr_samples
        gamma_hat = abs(float(Fraction(total_ones, cfg.fdr_samples * cfg.n)) - 0.5)
    else:
        fdr = None
        gamma_hat = None

    fdr_inp = BoundInputs(
        n=cfg.n,
        tau=cfg.tau,
        beta_i=1.0,  # unused by the false-detection formulas
        gamma=cfg.channel.gamma,
        s=s,
        alpha_max_i=alpha_maxs[0],
    )
    tdrs = sorted(u.tdr for u in users)
    tars = sorted(u.tar for u in users)
    w1 = max(1, s // 100)
    return ExperimentReport(
        config=cfg,
        users=tuple(users),
        branch_counts=counts,
        fdr=fdr,
        gamma_hat=gamma_hat,
        fdr_bound=fdr_upper_bound_independent(fdr_inp).value,
        fdr_bound_general=fdr_upper_bound_general(fdr_inp).value,
        avg_tdr=float(np.mean(tdrs)),
        avg_tar=float(np.mean(tars)),
        worst1_tdr=float(np.mean(tdrs[:w1])),
        worst1_tar=float(np.mean(tars[:w1])),
        worst1_size=w1,
        coincide_all=coincide_all,
        max_pairwise_ba=pairwise_peak,
    )


def wilson_interval(successes: int, trials: int, z: float = Z_99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must be in [0, trials]")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class BoundCheckRow:
    """One empirical rate against one bound, with Monte Carlo slack.

    ``margin`` is oriented so that nonnegative means consistent:
    empirical minus bound for lower bounds, bound minus empirical for
    upper bounds. A violation requires the margin to fall below minus
    the slack (the full width of a 99% Wilson interval).
    """

    user_id: str
    metric: str
    empirical: float
    bound: float
    margin: float
    slack: float
    violated: bool


@dataclass(frozen=True)
class BoundComparison:
    rows: tuple[BoundCheckRow, ...]

    @property
    def violations(self) -> tuple[BoundCheckRow, ...]:
        return tuple(row for row in self.rows if row.violated)

    @property
    def ok(self) -> bool:
        return not self.violations


def _check_row(
    user_id: str,
    metric: str,
    empirical: float,
    bound: float,
    successes: int,
    trials: int,
    lower: bool,
) -> BoundCheckRow:
    lo, hi = wilson_interval(successes, trials)
    slack = hi - lo
    margin = (empirical - bound) if lower else (bound - empirical)
    return BoundCheckRow(user_id, metric, empirical, bound, margin, slack, margin < -slack)


def compare_bounds(report: ExperimentReport) -> BoundComparison:
    """Check every per-user rate and the false-detection rate against
    its bound, allowing one Wilson-interval width of Monte Carlo slack."""
    rows: list[BoundCheckRow] = []
    samples = report.config.samples_per_user
    for user in report.users:
        if user.tdr_bound is not None:
            rows.append(
                _check_row(
                    user.user_id,
                    "tdr",
                    user.tdr,
                    user.tdr_bound,
                    round(user.tdr * samples),
                    samples,
                    lower=True,
                )
            )
        rows.append(
            _check_row(
                user.user_id,
                "tar",
                user.tar,
                user.tar_bound,
                round(user.tar * samples),
                samples,
                lower=True,
            )
        )
    if report.fdr is not None:
        hits = round(report.fdr * report.config.fdr_samples)
        rows.append(
            _check_row(
                "",
                "fdr",
                report.fdr,
                report.fdr_bound,
                hits,
                report.config.fdr_samples,
                lower=False,
            )
        )
        rows.append(
            _check_row(
                "",
                "fdr_general",
                report.fdr,
                report.fdr_bound_general,
                hits,
                report.config.fdr_samples,
                lower=False,
            )
        )
    return BoundComparison(tuple(rows))


@dataclass(frozen=True)
class SweepPoint:
    axis: str
    value: str
    report: ExperimentReport


def _apply_axis(cfg: ExperimentConfig, axis: str, value: object) -> ExperimentConfig:
    if axis == "s":
        return dataclasses.replace(cfg, s=int(value))
    if axis == "n":
        return dataclasses.replace(cfg, n=int(value))
    if axis == "tau":
        return dataclasses.replace(cfg, tau=exact_fraction(value))
    if axis == "strategy":
        return dataclasses.replace(
            cfg, strategy=dataclasses.replace(cfg.strategy, kind=str(value))
        )
    if axis == "postprocess":
        return dataclasses.replace(cfg, postprocess=str(value))
    raise ConfigError(f"unknown sweep axis {axis!r}; choices: {SWEEP_AXES}")


def sweep(
    cfg: ExperimentConfig, axis: str, values: Sequence[object]
) -> list[SweepPoint]:
    """Run the experiment once per value of one axis, all other streams
    held fixed. Codebooks are rebuilt only when the axis affects them."""
    if not values:
        raise ConfigError("sweep needs at least one value")
    points: list[SweepPoint] = []
    book: Optional[Codebook] = None
    reuse_codebook = axis in ("tau", "postprocess")
    for value in values:
        point_cfg = _apply_axis(cfg, axis, value)
        if reuse_codebook:
            if book is None:
                book = build_codebook(point_cfg)
            report = run_experiment(point_cfg, book)
        else:
            report = run_experiment(point_cfg)
        points.append(SweepPoint(axis, str(value), report))
    return points
