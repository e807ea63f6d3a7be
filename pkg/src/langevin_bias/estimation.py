"""Ergodic time-average histogram of a chain's post-burn-in states."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class DensityTable:
    bin_left: np.ndarray
    bin_right: np.ndarray
    density: np.ndarray
    in_range_mass: float

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_left + self.bin_right)


@dataclass
class HistogramDensity:
    """Occupancy counts over half-open bins ``[edge_k, edge_{k+1})``.

    States outside ``[lo, hi)`` land in the under/overflow counters, so
    ``counts.sum() + underflow + overflow == n`` always holds.
    """

    lo: float = -4.0
    hi: float = 4.0
    width: float = 0.1
    counts: np.ndarray = field(default=None, repr=False)
    underflow: int = 0
    overflow: int = 0
    n: int = 0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("bin width must be positive")
        if not self.hi > self.lo:
            raise ValueError("need hi > lo")
        nbins = round((self.hi - self.lo) / self.width)
        if nbins < 1 or abs(nbins * self.width - (self.hi - self.lo)) > 1e-9 * max(1.0, self.hi - self.lo):
            raise ValueError("range must be an integer number of bin widths")
        if self.counts is None:
            self.counts = np.zeros(nbins, dtype=np.int64)
        elif len(self.counts) != nbins:
            raise ValueError("counts length does not match the binning")
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)

    @property
    def nbins(self) -> int:
        return len(self.counts)

    @property
    def edges(self) -> np.ndarray:
        e = self.lo + self.width * np.arange(self.nbins + 1)
        # snap to 12 decimals so that decimal edges such as 0.3 are the
        # nearest doubles rather than 0.30000000000000004
        e = np.round(e, 12)
        e[0], e[-1] = self.lo, self.hi
        return e

    def same_binning(self, other: "HistogramDensity") -> bool:
        return (self.lo, self.hi, self.width, self.nbins) == (other.lo, other.hi, other.width, other.nbins)

    def accumulate(self, theta) -> "HistogramDensity":
        x = float(np.asarray(theta, dtype=float).reshape(-1)[0])
        if not np.isfinite(x):
            raise ValueError("cannot accumulate a non-finite state")
        k = int(np.searchsorted(self.edges, x, side="right")) - 1
        if k < 0:
            self.underflow += 1
        elif k >= self.nbins:
            self.overflow += 1
        else:
            self.counts[k] += 1
        self.n += 1
        return self

    def accumulate_many(self, thetas) -> "HistogramDensity":
        x = np.asarray(thetas, dtype=float).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise ValueError("cannot accumulate non-finite states")
        k = np.searchsorted(self.edges, x, side="right") - 1
        under = k < 0
        over = k >= self.nbins
        self.underflow += int(np.count_nonzero(under))
        self.overflow += int(np.count_nonzero(over))
        inside = k[~(under | over)]
        self.counts += np.bincount(inside, minlength=self.nbins).astype(np.int64)
        self.n += x.size
        return self

    # sink protocol
    def push(self, step, theta):
        self.accumulate(theta)

    def push_block(self, first_step, thetas):
        self.accumulate_many(np.asarray(thetas)[:, 0])

    def masses(self) -> np.ndarray:
        """Fraction of time spent in each bin."""
        if self.n == 0:
            raise ValueError("empty histogram")
        return self.counts / self.n

    def out_of_range(self) -> int:
        return self.underflow + self.overflow


def accumulate(hist: HistogramDensity, theta) -> HistogramDensity:
    return hist.accumulate(theta)


def merge(h1: HistogramDensity, h2: HistogramDensity) -> HistogramDensity:
    if not h1.same_binning(h2):
        raise ValueError("cannot merge histograms with different binning")
    return HistogramDensity(
        h1.lo, h1.hi, h1.width,
        counts=h1.counts + h2.counts,
        underflow=h1.underflow + h2.underflow,
        overflow=h1.overflow + h2.overflow,
        n=h1.n + h2.n,
    )


def merge_all(hists) -> HistogramDensity:
    hists = list(hists)
    if not hists:
        raise ValueError("nothing to merge")
    out = hists[0]
    for h in hists[1:]:
        out = merge(out, h)
    return out


def to_density(hist: HistogramDensity) -> DensityTable:
    """Per-bin density ``counts/(n·w)`` and the in-range mass."""
    if hist.n == 0:
        raise ValueError("empty histogram")
    e = hist.edges
    dens = hist.counts / (hist.n * hist.width)
    return DensityTable(e[:-1].copy(), e[1:].copy(), dens, (hist.n - hist.out_of_range()) / hist.n)
