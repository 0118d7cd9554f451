"""Radial grids, quadrature and difference operators for radial functions on R^3.

Every integral is taken against the volume measure ``4 pi r^2 dr``.  The
origin is never a node: the interval ``[0, r_1]`` is covered by a cap weight
on the first node that is exact for densities behaving like ``r**-2`` (the
square of a Green's function), which is the only singular profile the
package ever integrates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy import sparse

FOUR_PI = 4.0 * np.pi


class GridError(ValueError):
    """Raised on invalid grid construction or mismatched grids."""


class Spacing(str, Enum):
    UNIFORM = "uniform"
    LOGARITHMIC = "logarithmic"


DEFAULT_R_MIN = 1e-6
DEFAULT_R_MAX = 40.0
DEFAULT_N = 4096
DEFAULT_SPACING = Spacing.LOGARITHMIC


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes and volume weights of a radial quadrature rule.

    Attributes
    ----------
    nodes : ndarray
        Strictly increasing positive radii.
    weights : ndarray
        Positive weights so that ``weights @ f(nodes)`` approximates
        ``int_0^inf f(r) 4 pi r^2 dr``.
    edges : ndarray
        ``n + 1`` cell boundaries; cell ``j`` is ``[edges[j], edges[j+1]]``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    edges: np.ndarray
    spacing: Spacing
    r_min: float
    r_max: float
    _stiffness: tuple = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.nodes.size

    def spec(self) -> dict:
        """Plain-data description; ``build_grid(**grid.spec())`` rebuilds it."""
        return {
            "r_min": self.r_min,
            "r_max": self.r_max,
            "n": self.n,
            "spacing": self.spacing.value,
        }

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.spec() == other.spec()
        )

    def sample(self, fn: Callable[[np.ndarray], np.ndarray]) -> "RadialFunction":
        return RadialFunction(self, np.asarray(fn(self.nodes), dtype=float))

    def zeros(self) -> "RadialFunction":
        return RadialFunction(self, np.zeros(self.n))

    @property
    def cell_volumes(self) -> np.ndarray:
        return FOUR_PI / 3.0 * np.diff(self.edges**3)


def build_grid(
    r_min: float = DEFAULT_R_MIN,
    r_max: float = DEFAULT_R_MAX,
    n: int = DEFAULT_N,
    spacing: Spacing | str = DEFAULT_SPACING,
) -> RadialGrid:
    """Build a radial grid with trapezoid weights in ``r`` or ``log r``."""
    try:
        spacing = Spacing(spacing)
    except ValueError as exc:
        raise GridError(f"unknown spacing {spacing!r}") from exc
    if not (np.isfinite(r_min) and np.isfinite(r_max)) or not 0.0 < r_min < r_max:
        raise GridError(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
    if int(n) != n or n < 16:
        raise GridError(f"need an integer n >= 16, got {n}")
    n = int(n)
    r_min, r_max = float(r_min), float(r_max)

    if spacing is Spacing.LOGARITHMIC:
        u = np.linspace(np.log(r_min), np.log(r_max), n)
        du = u[1] - u[0]
        nodes = np.exp(u)
        nodes[0], nodes[-1] = r_min, r_max
        weights = FOUR_PI * nodes**3 * du
        weights[0] *= 0.5
        weights[-1] *= 0.5
        mids = np.exp(0.5 * (u[1:] + u[:-1]))
    else:
        nodes = np.linspace(r_min, r_max, n)
        dr = nodes[1] - nodes[0]
        weights = FOUR_PI * nodes**2 * dr
        weights[0] *= 0.5
        weights[-1] *= 0.5
        mids = 0.5 * (nodes[1:] + nodes[:-1])
    # cap over [0, r_1], exact for f ~ r^-2
    weights[0] += FOUR_PI * r_min**3
    edges = np.concatenate(([r_min], mids, [r_max]))

    return RadialGrid(
        nodes=nodes,
        weights=weights,
        edges=edges,
        spacing=spacing,
        r_min=r_min,
        r_max=r_max,
        _stiffness=_build_stiffness(nodes, spacing),
    )


def _build_stiffness(nodes: np.ndarray, spacing: Spacing) -> tuple:
    # Difference quotients over one and two cells in the uniform coordinate x
    # (x = log r or x = r), midpoint-weighted, then combined as (4 S_1 - S_2) / 3
    # to cancel the leading O(dx^2) error.
    n = nodes.size
    if spacing is Spacing.LOGARITHMIC:
        x = np.log(nodes)
        density = lambda xm: FOUR_PI * np.exp(xm)  # 4 pi r^2 dr/dx / (dr/dx)^2
    else:
        x = nodes
        density = lambda xm: FOUR_PI * xm**2
    dx = (x[-1] - x[0]) / (n - 1)
    main = np.zeros(n)
    offs = {}
    for step, coef in ((1, 4.0 / 3.0), (2, -1.0 / 3.0)):
        xm = 0.5 * (x[step:] + x[:-step])
        # each interleaved family of step-s differences covers the domain once
        a = coef * density(xm) / (step * step * dx)
        main[:-step] += a
        main[step:] += a
        offs[step] = -a
    L = sparse.diags(
        [offs[2], offs[1], main, offs[1], offs[2]], [-2, -1, 0, 1, 2], format="csr"
    )
    return L, (-offs[1], -offs[2])


def default_grid() -> RadialGrid:
    return build_grid()


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """A real radial profile sampled on the nodes of ``grid``."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise GridError(
                f"values of shape {values.shape} do not match {self.grid.n} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("radial function values must be finite")
        object.__setattr__(self, "values", values)

    def _check(self, other: "RadialFunction") -> None:
        if not self.grid.same_as(other.grid):
            raise GridError("radial functions live on different grids")

    def __add__(self, other):
        if isinstance(other, RadialFunction):
            self._check(other)
            return RadialFunction(self.grid, self.values + other.values)
        return RadialFunction(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, RadialFunction):
            self._check(other)
            return RadialFunction(self.grid, self.values - other.values)
        return RadialFunction(self.grid, self.values - other)

    def __mul__(self, c):
        if isinstance(c, RadialFunction):
            self._check(c)
            return RadialFunction(self.grid, self.values * c.values)
        return RadialFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return RadialFunction(self.grid, -self.values)

    def at_origin(self) -> float:
        """Quadratic extrapolation to ``r = 0`` from the first three nodes."""
        r = self.grid.nodes[:3]
        f = self.values[:3]
        # Lagrange basis evaluated at 0
        l0 = r[1] * r[2] / ((r[0] - r[1]) * (r[0] - r[2]))
        l1 = r[0] * r[2] / ((r[1] - r[0]) * (r[1] - r[2]))
        l2 = r[0] * r[1] / ((r[2] - r[0]) * (r[2] - r[1]))
        return float(l0 * f[0] + l1 * f[1] + l2 * f[2])

    def interpolate(self, r) -> np.ndarray:
        """Linear interpolation, zero beyond ``r_max`` and constant below ``r_min``."""
        r = np.asarray(r, dtype=float)
        return np.interp(r, self.grid.nodes, self.values, right=0.0)


def indicator(grid: RadialGrid, radius: float) -> RadialFunction:
    """Ball indicator sampled as the covered volume fraction of each cell."""
    lo, hi = grid.edges[:-1], grid.edges[1:]
    inside = np.clip(np.minimum(hi, radius) ** 3 - lo**3, 0.0, None)
    frac = inside / (hi**3 - lo**3)
    # the first node also represents the cap [0, r_1]
    if radius >= grid.r_min:
        frac[0] = (min(hi[0], radius) ** 3) / hi[0] ** 3
    return RadialFunction(grid, frac)


def integrate(f: RadialFunction) -> float:
    """``sum(weights * values)`` in a fixed order."""
    return float(np.dot(f.grid.weights, f.values))


def differentiation_matrix(grid: RadialGrid) -> sparse.csr_matrix:
    """Second-order central differences, one-sided second order at the ends."""
    x = grid.nodes
    n = grid.n
    h = np.diff(x)
    rows, cols, vals = [], [], []

    def put(i, js, cs):
        rows.extend([i] * len(js))
        cols.extend(js)
        vals.extend(cs)

    # interior: three-point nonuniform stencil
    hm, hp = h[:-1], h[1:]
    i = np.arange(1, n - 1)
    cm = -hp / (hm * (hm + hp))
    c0 = (hp - hm) / (hm * hp)
    cp = hm / (hp * (hm + hp))
    rows = list(np.repeat(i, 3))
    cols = list(np.stack([i - 1, i, i + 1], axis=1).ravel())
    vals = list(np.stack([cm, c0, cp], axis=1).ravel())
    # ends: derivative of the quadratic through three nodes
    h1, h2 = h[0], h[1]
    put(0, [0, 1, 2], [-(2 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2))])
    g1, g2 = h[-1], h[-2]
    put(n - 1, [n - 3, n - 2, n - 1], [g1 / (g2 * (g1 + g2)), -(g1 + g2) / (g1 * g2), (2 * g1 + g2) / (g1 * (g1 + g2))])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def radial_derivative(f: RadialFunction) -> RadialFunction:
    """Sampled ``df/dr`` at the nodes."""
    if f.grid.n < 3:
        raise GridError("need at least three nodes")
    return RadialFunction(f.grid, differentiation_matrix(f.grid) @ f.values)


def stiffness_matrix(grid: RadialGrid) -> sparse.csr_matrix:
    """Symmetric banded ``L`` with ``f @ L @ f = norm(f, 'D12sq')``."""
    return grid._stiffness[0]


def _d12_form(f: np.ndarray, g: np.ndarray, grid: RadialGrid) -> float:
    # sum over differences, never f @ L @ f, to avoid cancellation in L @ f
    a1, a2 = grid._stiffness[1]
    s1 = np.dot(a1, np.diff(f) * np.diff(g))
    s2 = np.dot(a2, (f[2:] - f[:-2]) * (g[2:] - g[:-2]))
    return float(s1 + s2)


def norm(f: RadialFunction, kind: str = "L2sq", r: float | None = None) -> float:
    """Norms of a radial profile.

    ``kind`` is ``"L2sq"`` (squared L2 norm), ``"D12sq"`` (squared Dirichlet
    norm) or ``"Lr"`` (the L^r norm, exponent given by ``r``).
    """
    if kind == "L2sq":
        return integrate(RadialFunction(f.grid, f.values * f.values))
    if kind == "D12sq":
        return _d12_form(f.values, f.values, f.grid)
    if kind == "Lr":
        if r is None or r < 1:
            raise ValueError("Lr norm needs an exponent r >= 1")
        s = integrate(RadialFunction(f.grid, np.abs(f.values) ** r))
        return s ** (1.0 / r)
    raise ValueError(f"unknown norm kind {kind!r}")


def inner(f: RadialFunction, g: RadialFunction, kind: str = "L2") -> float:
    f._check(g)
    if kind == "L2":
        return float(np.dot(f.grid.weights, f.values * g.values))
    if kind == "D12":
        return _d12_form(f.values, g.values, f.grid)
    raise ValueError(f"unknown inner product kind {kind!r}")
