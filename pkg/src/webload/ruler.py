"""Random marks on a ruler: counts per bin look Poisson, gaps between marks look exponential."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import InterArrivalStats, InvalidParameterError, summarize_gaps


@dataclass(frozen=True)
class RulerResult:
    marks: np.ndarray  # sorted positions, mm
    counts_per_bin: np.ndarray
    gaps: np.ndarray  # mm, between adjacent sorted marks
    count_mean: float
    count_variance: float
    gap_stats: InterArrivalStats
    theoretical_poisson: np.ndarray  # P(k) for k = 0..max count, at the observed mean
    theoretical_exponential: np.ndarray  # density at each gap bin centre, at rate n/ruler
    gap_bin_edges: np.ndarray
    bin_mm: float

    @property
    def count_frequencies(self) -> np.ndarray:
        """How many bins hold k marks, k = 0..max."""
        return np.bincount(self.counts_per_bin, minlength=self.theoretical_poisson.size)

    @property
    def dispersion(self) -> float:
        return self.count_variance / self.count_mean


def ruler_experiment(n_marks: int, ruler_mm: float = 1000.0, bin_mm: float = 10.0, seed: int | None = None,
                     resolution_mm: float | None = 1.0) -> RulerResult:
    """Drop ``n_marks`` uniform marks on [0, ruler_mm).

    Positions are truncated to multiples of ``resolution_mm`` before binning
    and differencing, so coincident marks give zero gaps. ``None`` keeps the
    continuous positions.
    """
    if n_marks < 2:
        raise InvalidParameterError("need at least two marks")
    nbins = ruler_mm / bin_mm
    if not bin_mm > 0 or abs(nbins - round(nbins)) > 1e-9:
        raise InvalidParameterError("ruler length must be a whole number of bins")
    nbins = int(round(nbins))
    rng = np.random.default_rng(seed)
    marks = rng.uniform(0.0, ruler_mm, n_marks)
    if resolution_mm is not None:
        marks = np.floor(marks / resolution_mm) * resolution_mm
    marks.sort()
    bins = np.minimum((marks // bin_mm).astype(np.int64), nbins - 1)
    counts = np.bincount(bins, minlength=nbins)
    gaps = np.diff(marks)

    kmax = int(counts.max())
    poisson = stats.poisson.pmf(np.arange(kmax + 1), float(counts.mean()))
    rate = n_marks / ruler_mm
    width = resolution_mm if resolution_mm is not None else ruler_mm / n_marks
    edges = np.arange(0.0, float(gaps.max()) + width, width)
    if edges.size < 2:
        edges = np.array([0.0, width])
    centres = 0.5 * (edges[:-1] + edges[1:])
    expo = stats.expon.pdf(centres, scale=1.0 / rate)
    return RulerResult(
        marks=marks,
        counts_per_bin=counts,
        gaps=gaps,
        count_mean=float(counts.mean()),
        count_variance=float(counts.var(ddof=1)),
        gap_stats=summarize_gaps(gaps),
        theoretical_poisson=poisson,
        theoretical_exponential=expo,
        gap_bin_edges=edges,
        bin_mm=bin_mm,
    )


def histogram_csv(result: RulerResult) -> str:
    """Two tables: marks-per-bin frequencies vs Poisson, then gap histogram vs exponential."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    nbins = result.counts_per_bin.size
    w.writerow(["marks_per_bin", "observed_bins", "poisson_expected_bins"])
    for k, (obs, p) in enumerate(zip(result.count_frequencies, result.theoretical_poisson)):
        w.writerow([k, int(obs), f"{p * nbins:.4f}"])
    w.writerow([])
    w.writerow(["gap_from_mm", "gap_to_mm", "observed_gaps", "exponential_expected_gaps"])
    hist, edges = np.histogram(result.gaps, bins=result.gap_bin_edges)
    n_gaps = result.gaps.size
    for lo, hi, obs, dens in zip(edges[:-1], edges[1:], hist, result.theoretical_exponential):
        w.writerow([f"{lo:g}", f"{hi:g}", int(obs), f"{dens * (hi - lo) * n_gaps:.4f}"])
    w.writerow([])
    w.writerow(["statistic", "value"])
    w.writerow(["count_mean", f"{result.count_mean:.4f}"])
    w.writerow(["count_variance", f"{result.count_variance:.4f}"])
    w.writerow(["gap_mean_mm", f"{result.gap_stats.mean:.4f}"])
    w.writerow(["gap_sd_mm", f"{result.gap_stats.std_dev:.4f}"])
    w.writerow(["gap_cov", f"{result.gap_stats.cov:.4f}"])
    return buf.getvalue()


def bar_chart(result: RulerResult, width: int = 40) -> str:
    """Terminal rendering of the marks-per-bin histogram against its Poisson expectation."""
    nbins = result.counts_per_bin.size
    freq = result.count_frequencies
    expected = result.theoretical_poisson * nbins
    top = max(float(freq.max()), float(expected.max()), 1.0)
    lines = []
    for k, (obs, exp) in enumerate(zip(freq, expected)):
        bar = "#" * int(round(obs / top * width))
        lines.append(f"{k:3d} | {bar:<{width}} {int(obs):4d}  (poisson {exp:6.2f})")
    return "\n".join(lines)
