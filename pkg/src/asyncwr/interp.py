"""Time grids, mutable piecewise-linear waveforms, and grid bracketing.

Grid points are identified by exact rationals ``n / N`` (in units of the
final time), so points of two different grids are compared without
floating-point round-off.
"""
from __future__ import annotations

import threading
from fractions import Fraction
from typing import Iterable, List, Sequence, Tuple

import numpy as np

__all__ = [
    "TimeGrid",
    "Waveform",
    "enclosing_interval",
    "union_grid",
    "lerp",
]


class TimeGrid:
    """Uniform grid ``t_n = n * Tf / N``, ``n = 0..N``.

    Parameters
    ----------
    Tf : float
        Final time, positive.
    N : int
        Number of steps, at least 1.
    """

    def __init__(self, Tf: float, N: int):
        if not Tf > 0:
            raise ValueError("Tf must be positive")
        if int(N) != N or N < 1:
            raise ValueError("N must be a positive integer")
        self.Tf = float(Tf)
        self.N = int(N)

    @property
    def dt(self) -> float:
        return self.Tf / self.N

    def t(self, n: int) -> float:
        if not 0 <= n <= self.N:
            raise IndexError(f"grid index {n} outside 0..{self.N}")
        return n * self.Tf / self.N

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.Tf / self.N

    def point(self, n: int) -> Fraction:
        """Exact position of point ``n`` as a fraction of ``Tf``."""
        return Fraction(n, self.N)

    @property
    def points(self) -> List[Fraction]:
        return [Fraction(n, self.N) for n in range(self.N + 1)]

    def index_of(self, p: Fraction):
        """Index of the exact point ``p``, or ``None`` if ``p`` is not on the grid."""
        s = p * self.N
        return int(s) if s.denominator == 1 else None

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and self.Tf == other.Tf and self.N == other.N

    def __hash__(self):
        return hash((self.Tf, self.N))

    def __repr__(self):
        return f"TimeGrid(Tf={self.Tf!r}, N={self.N})"


def lerp(a, b, w: float):
    """Linear blend ``a + w (b - a)``; the single formula used for all interpolation."""
    return a + w * (b - a)


class Waveform:
    """Vector values on a :class:`TimeGrid`, evaluated by linear interpolation.

    Individual points may be replaced while other threads evaluate; each
    point is swapped as a whole under a lock, so a reader sees either the
    old or the new vector at that point.
    """

    def __init__(self, grid: TimeGrid, values):
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != grid.N + 1:
            raise ValueError(f"expected {grid.N + 1} time points, got {values.shape[0]}")
        self.grid = grid
        self.values = values
        self._lock = threading.Lock()

    @classmethod
    def constant(cls, grid: TimeGrid, value) -> "Waveform":
        """The constant extrapolation of ``value`` over the whole grid."""
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(value, (grid.N + 1, 1)))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "Waveform":
        return Waveform(self.grid, self.values.copy())

    def at(self, n: int) -> np.ndarray:
        if not 0 <= n <= self.grid.N:
            raise IndexError(f"grid index {n} outside 0..{self.grid.N}")
        with self._lock:
            return self.values[n].copy()

    def eval_point(self, p: Fraction) -> np.ndarray:
        """Evaluate at the exact time ``p * Tf``."""
        if not 0 <= p <= 1:
            raise ValueError(f"evaluation point {p} outside [0, 1]")
        s = p * self.grid.N
        i = s.numerator // s.denominator
        with self._lock:
            if s.denominator == 1:
                return self.values[i].copy()
            return lerp(self.values[i], self.values[i + 1], float(s - i))

    def eval(self, t: float) -> np.ndarray:
        """Evaluate at time ``t``; stored values are returned unchanged at grid points."""
        Tf, N = self.grid.Tf, self.grid.N
        if not 0.0 <= t <= Tf:
            raise ValueError(f"t = {t} outside [0, {Tf}]")
        i = min(int(np.floor(t * N / Tf)), N)
        if i < N and self.grid.t(i + 1) <= t:
            i += 1
        ti = self.grid.t(i)
        with self._lock:
            if t == ti or i == N:
                return self.values[i].copy()
            w = (t - ti) / (self.grid.t(i + 1) - ti)
            return lerp(self.values[i], self.values[i + 1], w)

    def __call__(self, t: float) -> np.ndarray:
        return self.eval(t)

    def update_point(self, n: int, value) -> None:
        if not 0 <= n <= self.grid.N:
            raise IndexError(f"grid index {n} outside 0..{self.grid.N}")
        value = np.asarray(value, dtype=float).reshape(self.dim)
        with self._lock:
            self.values[n] = value


def enclosing_interval(other_grid: TimeGrid, t_n: Fraction, t_np1: Fraction) -> Tuple[Fraction, Fraction, int]:
    """Smallest interval of ``other_grid`` points containing ``[t_n, t_np1]``.

    Times are exact fractions of ``Tf``.  Returns ``(t_minus, t_plus,
    index_plus)`` where ``index_plus`` is the ``other_grid`` index of
    ``t_plus``.
    """
    t_n, t_np1 = Fraction(t_n), Fraction(t_np1)
    if not (0 <= t_n < t_np1 <= 1):
        raise ValueError("need 0 <= t_n < t_np1 <= 1")
    N = other_grid.N
    lo = t_n * N
    hi = t_np1 * N
    i_minus = lo.numerator // lo.denominator
    i_plus = -((-hi.numerator) // hi.denominator)
    return Fraction(i_minus, N), Fraction(i_plus, N), i_plus


def union_grid(*grids: TimeGrid) -> List[Fraction]:
    """Sorted union of the points of several grids, as fractions of ``Tf``."""
    pts = set()
    for g in grids:
        pts.update(g.points)
    return sorted(pts)
