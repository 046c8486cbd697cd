"""Discretized sections on structured grids and their constraint residuals.

A field configuration is a grid of jet data ``(u, y)`` over the base
chart.  Two residuals measure how far it is from the constraint set of
the variational problem:

* the admissibility residual (the ``u``-velocity matches the anchor),
* the flatness-type morphism residual ``M_ab^alpha`` (antisymmetric in
  the base pair), whose vanishing makes the section compatible with both
  exterior differentials.

All derivatives are second-order central differences, with periodic wrap
or one-sided second-order stencils at the boundary.  Residuals are
evaluated per node and never solved for; closed-form or integrated
fields come from the scenario builders.  Sections are immutable and
node evaluation is independent, so residual calls may run concurrently
over disjoint node ranges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fibred import FibredAlgebroidPair, JetPoint

_FORMAT_NAME = "algfield-section"
_FORMAT_VERSION = 1


class StencilError(ValueError):
    """Grid too small (or node out of range) for the difference stencil."""


@dataclass(frozen=True)
class GridSpec:
    """Structured grid on the base chart.

    ``extents[a]`` nodes along axis ``a`` with spacing ``spacing[a]``,
    node coordinates ``origin + index * spacing``.  ``boundary`` is
    ``"periodic"`` (wrap; the grid covers one full period, the node at
    ``extents`` being identified with the origin) or ``"one_sided"``
    (second-order one-sided stencils at the edges).
    """

    extents: tuple
    spacing: tuple
    boundary: str = "periodic"
    origin: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(int(n) for n in self.extents))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        if self.origin is None:
            object.__setattr__(self, "origin", (0.0,) * len(self.extents))
        else:
            object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if len(self.spacing) != len(self.extents) or len(self.origin) != len(self.extents):
            raise ValueError("extents, spacing and origin must have equal length")
        if any(n < 3 for n in self.extents):
            raise StencilError("need at least 3 nodes per axis for central differences")
        if any(h <= 0 for h in self.spacing):
            raise ValueError("grid spacing must be positive")
        if self.boundary not in ("periodic", "one_sided"):
            raise ValueError(f"unknown boundary rule {self.boundary!r}")

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def coords(self, idx) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(idx, dtype=float) * np.asarray(self.spacing)

    def nodes(self):
        return np.ndindex(*self.extents)

    @staticmethod
    def periodic_box(extents, lengths=None) -> "GridSpec":
        """Periodic grid covering ``[0, length)`` per axis (default ``2*pi``)."""
        extents = tuple(int(n) for n in extents)
        if lengths is None:
            lengths = (2.0 * np.pi,) * len(extents)
        spacing = tuple(l / n for l, n in zip(lengths, extents))
        return GridSpec(extents=extents, spacing=spacing, boundary="periodic")


def node_derivative(values: np.ndarray, grid: GridSpec, axis: int, idx) -> np.ndarray:
    """Second-order difference of a nodal array along one grid axis at one node."""
    n = grid.extents[axis]
    h = grid.spacing[axis]
    i = idx[axis]

    def at(j):
        jj = list(idx)
        jj[axis] = j
        return values[tuple(jj)]

    if grid.boundary == "periodic":
        return (at((i + 1) % n) - at((i - 1) % n)) / (2.0 * h)
    if 0 < i < n - 1:
        return (at(i + 1) - at(i - 1)) / (2.0 * h)
    if i == 0:
        return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    return (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)


def grid_derivative(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """Vectorized second-order derivative of a nodal array along one axis."""
    h = grid.spacing[axis]
    if grid.boundary == "periodic":
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)
    out = np.empty_like(values)
    n = grid.extents[axis]

    def sl(i):
        index = [slice(None)] * values.ndim
        index[axis] = i
        return tuple(index)

    out[sl(slice(1, n - 1))] = (values[sl(slice(2, n))] - values[sl(slice(0, n - 2))]) / (2.0 * h)
    out[sl(0)] = (-3.0 * values[sl(0)] + 4.0 * values[sl(1)] - values[sl(2)]) / (2.0 * h)
    out[sl(n - 1)] = (3.0 * values[sl(n - 1)] - 4.0 * values[sl(n - 2)] + values[sl(n - 3)]) / (2.0 * h)
    return out


def nodal_function_derivative(fn: Callable, grid: GridSpec, axis: int, idx) -> np.ndarray:
    """Stencil derivative of a per-node function (evaluated only where needed)."""
    n = grid.extents[axis]
    h = grid.spacing[axis]
    i = idx[axis]

    def at(j):
        jj = list(idx)
        jj[axis] = j
        return np.asarray(fn(tuple(jj)), dtype=float)

    if grid.boundary == "periodic":
        return (at((i + 1) % n) - at((i - 1) % n)) / (2.0 * h)
    if 0 < i < n - 1:
        return (at(i + 1) - at(i - 1)) / (2.0 * h)
    if i == 0:
        return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    return (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)


@dataclass(frozen=True)
class DiscretizedSection:
    """Grid of first-order field data: ``u[idx, A]`` and ``y[idx, alpha, a]``."""

    grid: GridSpec
    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        ext = self.grid.extents
        if self.u.shape[:len(ext)] != ext or self.u.ndim != len(ext) + 1:
            raise ValueError("u array does not match the grid layout")
        if self.y.shape[:len(ext)] != ext or self.y.ndim != len(ext) + 2:
            raise ValueError("y array does not match the grid layout")
        if self.y.shape[-1] != self.grid.dim:
            raise ValueError("trailing axis of y must match the base dimension")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.y))):
            raise ValueError("non-finite field entries")

    @property
    def fibre_dim(self) -> int:
        return self.u.shape[-1]

    @property
    def kernel_rank(self) -> int:
        return self.y.shape[-2]

    def jet_point(self, idx) -> JetPoint:
        return JetPoint(x=self.grid.coords(idx), u=self.u[tuple(idx)], y=self.y[tuple(idx)])

    @staticmethod
    def from_functions(grid: GridSpec, fibre_dim: int, kernel_rank: int,
                       u_fn: Optional[Callable] = None,
                       y_fn: Optional[Callable] = None) -> "DiscretizedSection":
        """Sample closed-form ``u(x)`` and ``y(x)`` on the grid."""
        u = np.zeros(grid.extents + (fibre_dim,))
        y = np.zeros(grid.extents + (kernel_rank, grid.dim))
        for idx in grid.nodes():
            x = grid.coords(idx)
            if u_fn is not None:
                u[idx] = u_fn(x)
            if y_fn is not None:
                y[idx] = y_fn(x)
        return DiscretizedSection(grid=grid, u=u, y=y)


@dataclass
class ResidualField:
    """Per-node admissibility and morphism residuals with norm summaries.

    ``l2`` norms are cell-volume weighted (discrete integral norms); the
    morphism block is exactly antisymmetric in its base pair.
    """

    admissibility: np.ndarray
    morphism: np.ndarray
    admissibility_max: float = field(init=False)
    morphism_max: float = field(init=False)
    admissibility_l2: float = field(init=False)
    morphism_l2: float = field(init=False)

    cell_volume: float = 1.0

    def __post_init__(self):
        self.admissibility_max = _maxabs(self.admissibility)
        self.morphism_max = _maxabs(self.morphism)
        self.admissibility_l2 = float(np.sqrt(np.sum(self.admissibility ** 2) * self.cell_volume))
        self.morphism_l2 = float(np.sqrt(np.sum(self.morphism ** 2) * self.cell_volume))

    @property
    def max_norm(self) -> float:
        return max(self.admissibility_max, self.morphism_max)


def _maxabs(arr: np.ndarray) -> float:
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def admissibility_residual(pair: FibredAlgebroidPair, section: DiscretizedSection,
                           idx) -> np.ndarray:
    """``rho_a^i d_i u^A - rho_a^A - rho_alpha^A y^alpha_a`` at one node.

    Shape ``(fibre_dim, base_dim)``; identically empty when the pair has
    no fibre coordinates.
    """
    p = section.jet_point(idx)
    mu = section.fibre_dim
    if mu == 0:
        return np.zeros((0, pair.base_dim))
    du = np.stack([node_derivative(section.u, section.grid, a, idx)
                   for a in range(section.grid.dim)], axis=-1)  # [A, i]
    rho_f = pair.rho_f_at(p.x)
    out = np.einsum("ai,Ai->Aa", rho_f, du)
    out -= pair.rho_base_u_at(p.x, p.u).T
    out -= np.einsum("kA,ka->Aa", pair.rho_kernel_u_at(p.x, p.u), p.y)
    return out


def morphism_residual(pair: FibredAlgebroidPair, section: DiscretizedSection,
                      idx) -> np.ndarray:
    """Flatness residual ``M[alpha, a, b]`` at one node, antisymmetric in (a, b).

    ``M_ab^al = rho_b^i d_i y_a^al - rho_a^i d_i y_b^al
                + C_{b g}^al y_a^g - C_{a g}^al y_b^g
                + C_{be g}^al y_b^be y_a^g + C_ab^c y_c^al - C_ab^al``

    The constant term enters with a minus sign: that is the sign under
    which pullback commutes with the differential on the coframe, under
    which holonomic fields of a curved connection frame are morphisms,
    and under which the flat-reference case forces
    ``d_a y_b - d_b y_a = Omega_ab`` (see the scenario tests).
    """
    p = section.jet_point(idx)
    y = p.y
    dy = np.stack([node_derivative(section.y, section.grid, i, idx)
                   for i in range(section.grid.dim)], axis=-1)  # [alpha, a, i]
    rho_f = pair.rho_f_at(p.x)
    cm = pair.c_mixed_at(p.x, p.u)
    ck = pair.c_kernel_at(p.x, p.u)
    cbk = pair.c_base_kernel_at(p.x, p.u)
    cf = pair.c_f_at(p.x)

    out = np.einsum("bi,kai->kab", rho_f, dy)
    out -= np.einsum("ai,kbi->kab", rho_f, dy)
    out += np.einsum("bgk,ga->kab", cm, y)
    out -= np.einsum("agk,gb->kab", cm, y)
    out += np.einsum("mgk,mb,ga->kab", ck, y, y)
    out += np.einsum("abc,kc->kab", cf, y)
    out -= np.einsum("abk->kab", cbk)
    # enforce exact antisymmetry in the base pair (summation order in the
    # quadratic term can otherwise leave last-bit asymmetry)
    return 0.5 * (out - np.swapaxes(out, 1, 2))


def residual_report(pair: FibredAlgebroidPair, section: DiscretizedSection,
                    tol: float):
    """Aggregate both residuals over all nodes.

    Returns ``(ResidualField, is_morphism)`` with ``is_morphism`` true
    when both max norms are within ``tol``.
    """
    ext = section.grid.extents
    mu, mk, r = section.fibre_dim, section.kernel_rank, section.grid.dim
    adm = np.zeros(ext + (mu, r))
    mor = np.zeros(ext + (mk, r, r))
    for idx in section.grid.nodes():
        adm[idx] = admissibility_residual(pair, section, idx)
        mor[idx] = morphism_residual(pair, section, idx)
    fieldres = ResidualField(admissibility=adm, morphism=mor,
                             cell_volume=section.grid.cell_volume)
    return fieldres, bool(fieldres.max_norm <= tol)


# ---------------------------------------------------------------------------
# serialization: one-line JSON header followed by raw little-endian float64
# payload (u then y, C order); layout documented in the README and frozen
# per format version
# ---------------------------------------------------------------------------

def save_section(section: DiscretizedSection, path) -> None:
    header = {
        "format": _FORMAT_NAME,
        "version": _FORMAT_VERSION,
        "extents": list(section.grid.extents),
        "spacing": list(section.grid.spacing),
        "origin": list(section.grid.origin),
        "boundary": section.grid.boundary,
        "fibre_dim": section.fibre_dim,
        "kernel_rank": section.kernel_rank,
        "dtype": "<f8",
        "order": "C",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(section.u, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(section.y, dtype="<f8").tobytes())


def load_section(path) -> DiscretizedSection:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != _FORMAT_NAME or header.get("version") != _FORMAT_VERSION:
        raise ValueError("not a recognized section file")
    ext = tuple(header["extents"])
    mu = header["fibre_dim"]
    mk = header["kernel_rank"]
    r = len(ext)
    grid = GridSpec(extents=ext, spacing=tuple(header["spacing"]),
                    boundary=header["boundary"], origin=tuple(header["origin"]))
    n_nodes = int(np.prod(ext))
    u_count = n_nodes * mu
    y_count = n_nodes * mk * r
    data = np.frombuffer(payload, dtype="<f8", count=u_count + y_count)
    u = data[:u_count].reshape(ext + (mu,))
    y = data[u_count:].reshape(ext + (mk, r))
    return DiscretizedSection(grid=grid, u=u, y=y)
