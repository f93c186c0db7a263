"""Oriented view stacks over the angular grid of one color channel.

A view stack collects the sub-aperture views lying on one line through
the S x T angular grid, ordered along the line, as an (X, Y, V) tensor.
Four stack families cover the grid: rows (0 degrees), columns (90),
down-right diagonals (45) and down-left anti-diagonals (135). Diagonal
chains are maximal, so every grid cell belongs to exactly one chain of
each diagonal family and each family has S + T - 1 chains.
"""

from dataclasses import dataclass

import numpy as np

ORIENTATIONS = (0, 45, 90, 135)


@dataclass(frozen=True)
class ViewStack:
    """One oriented stack: ``data[:, :, i]`` is the i-th view on the line.

    ``origin`` is the 0-based angular coordinate of the first view; for
    45-degree stacks consecutive views step by (+1, +1), for 135-degree
    stacks by (+1, -1).
    """

    data: np.ndarray
    orientation: int
    origin: tuple[int, int]
    channel: str | None = None

    @property
    def length(self) -> int:
        return self.data.shape[2]


def _chain(grid, start, step, count, orientation, channel):
    s0, t0 = start
    ds, dt = step
    views = [grid[s0 + i * ds, t0 + i * dt] for i in range(count)]
    return ViewStack(
        data=np.stack(views, axis=-1),
        orientation=orientation,
        origin=(s0, t0),
        channel=channel,
    )


def build_stacks(channel_views, orientation, channel=None):
    """Build the stack family of one orientation from an (S, T, X, Y) grid.

    Emission order is fixed: rows by s ascending, columns by t ascending;
    45-degree chains by start cell up the first column then along the
    first row; 135-degree chains by the cell where they meet the first
    column or the last row (top to bottom, then left to right).
    """
    grid = np.asarray(channel_views, dtype=float)
    if grid.ndim != 4:
        raise ValueError(f"expected an (S, T, X, Y) grid, got shape {grid.shape}")
    ns, nt = grid.shape[:2]
    stacks = []
    if orientation == 0:
        for s in range(ns):
            stacks.append(_chain(grid, (s, 0), (0, 1), nt, 0, channel))
    elif orientation == 90:
        for t in range(nt):
            stacks.append(_chain(grid, (0, t), (1, 0), ns, 90, channel))
    elif orientation == 45:
        starts = [(s, 0) for s in range(ns - 1, -1, -1)] + [(0, t) for t in range(1, nt)]
        for s0, t0 in starts:
            count = min(ns - s0, nt - t0)
            stacks.append(_chain(grid, (s0, t0), (1, 1), count, 45, channel))
    elif orientation == 135:
        # keyed by the cell where the chain terminates (first column /
        # last row); the chain itself runs down-left from its start
        ends = [(s, 0) for s in range(ns)] + [(ns - 1, t) for t in range(1, nt)]
        for se, te in ends:
            count = min(se, nt - 1 - te) + 1
            start = (se - count + 1, te + count - 1)
            stacks.append(_chain(grid, start, (1, -1), count, 135, channel))
    else:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation}")
    return stacks


def filter_usable(stacks, min_len=3):
    """Drop stacks shorter than ``min_len`` views, preserving order.

    The default keeps stacks long enough for a quadratic fit along the
    angular coordinate and for view-transition statistics.
    """
    if min_len < 1:
        raise ValueError("min_len must be >= 1")
    return [st for st in stacks if st.length >= min_len]
