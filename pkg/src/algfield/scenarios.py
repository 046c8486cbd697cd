"""Builders and integrators for the worked example scenarios.

Four families of fibred pairs cover the classical applications:

* the standard first-order field theory of a fibred chart in a frame
  adapted to a (possibly curved, u-dependent) connection,
* one-dimensional-base mechanics (free particle, rigid body, heavy top),
* Chern-Simons theory on a 3d lattice with values in a quadratic Lie
  algebra,
* the reduced bundle of a symmetry group action with a reference
  connection (covariant Euler-Poincare form when the reference is flat).

Sign conventions used by the builders (all are forced by the structure
equations, which every builder output must satisfy exactly; see tests):

* connection frames ``e_i = d_i + G_i^A d_A`` have
  ``[e_i, e_B] = -(dG_i^A/du^B) e_A`` and base-base bracket equal to the
  frame commutator (minus the curvature of the connection),
* the rotation-algebra action on an advected 3-vector pairs
  ``rho_al^A = -eps[al, A, B] u^B`` with kernel constants ``-eps``; under
  ``(y, u) -> (-omega, gamma)`` this is the textbook heavy top.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .differentiation import DEFAULT_FD_STEP, partial_derivative_two_slot
from .fibred import FibredAlgebroidPair
from .fields import DiscretizedSection, GridSpec, node_derivative
from .variational import Lagrangian, el_residual

EPSILON3 = np.zeros((3, 3, 3))
for _i, _j, _k, _s in [(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0),
                       (1, 0, 2, -1.0), (2, 1, 0, -1.0), (0, 2, 1, -1.0)]:
    EPSILON3[_i, _j, _k] = _s


class DegenerateLagrangianError(RuntimeError):
    """Momentum-velocity map not invertible along the trajectory."""


class IntegrationBlowupError(RuntimeError):
    """Non-finite values during mechanics integration."""


class ProjectionError(ValueError):
    """Sampled connection component does not lie in the algebra span."""


# ---------------------------------------------------------------------------
# standard first-order field theory
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StandardCaseData:
    """Connection coefficients ``G(x, u)[i, A]`` with derived quantities.

    ``vertical_derivative(x, u)[i, A, B] = dG_i^A / du^B`` and
    ``base_derivative(x, u)[i, A, j] = dG_i^A / dx^j`` fall back to
    central differences.  ``curvature`` returns ``R[i, j, A]``,
    antisymmetric in ``(i, j)``, defined as minus the frame commutator of
    the adapted horizontal fields.
    """

    gamma: Callable
    vertical_derivative: Optional[Callable] = None
    base_derivative: Optional[Callable] = None
    fd_step: float = DEFAULT_FD_STEP

    def gamma_at(self, x, u) -> np.ndarray:
        return np.asarray(self.gamma(x, u), dtype=float)

    def vertical_derivative_at(self, x, u) -> np.ndarray:
        if self.vertical_derivative is not None:
            return np.asarray(self.vertical_derivative(x, u), dtype=float)
        u = np.asarray(u, dtype=float)
        cols = [partial_derivative_two_slot(self.gamma, np.asarray(x, float), u, 1, b,
                                            self.fd_step)
                for b in range(u.size)]
        return np.stack(cols, axis=-1)

    def base_derivative_at(self, x, u) -> np.ndarray:
        if self.base_derivative is not None:
            return np.asarray(self.base_derivative(x, u), dtype=float)
        x = np.asarray(x, dtype=float)
        cols = [partial_derivative_two_slot(self.gamma, x, np.asarray(u, float), 0, j,
                                            self.fd_step)
                for j in range(x.size)]
        return np.stack(cols, axis=-1)

    def frame_bracket(self, x, u) -> np.ndarray:
        """``[e_i, e_j]`` components ``C[i, j, A]`` of the adapted frame."""
        g = self.gamma_at(x, u)
        dgx = self.base_derivative_at(x, u)      # [i, A, j]
        dgu = self.vertical_derivative_at(x, u)  # [i, A, B]
        out = np.einsum("jAi->ijA", dgx) - np.einsum("iAj->ijA", dgx)
        out += np.einsum("iB,jAB->ijA", g, dgu)
        out -= np.einsum("jB,iAB->ijA", g, dgu)
        return out

    def curvature_at(self, x, u) -> np.ndarray:
        """``R[i, j, A] = -[e_i, e_j]^A``, antisymmetric in the base pair."""
        return -self.frame_bracket(x, u)


def builder_standard(data: StandardCaseData, base_dim: int,
                     fibre_dim: int) -> FibredAlgebroidPair:
    """Fibred pair of the standard field theory in a connection-adapted frame.

    Kernel indices coincide with the fibre indices; the anchor carries
    the connection (``rho_i^A = G_i^A``, kernel acting by translations)
    and the bracket blocks are the frame commutators, so the structure
    equations hold by construction for any smooth connection.
    """
    return FibredAlgebroidPair(
        base_dim=base_dim, fibre_dim=fibre_dim, kernel_rank=fibre_dim,
        rho_base_u=data.gamma_at,
        rho_kernel_u=lambda x, u: np.eye(fibre_dim),
        c_base_kernel=data.frame_bracket,
        c_mixed=lambda x, u: -np.einsum("iAB->iBA", data.vertical_derivative_at(x, u)),
    )


# ---------------------------------------------------------------------------
# one-dimensional base: mechanics
# ---------------------------------------------------------------------------

def builder_time_dependent(kernel_constants, rho_base_u: Optional[Callable] = None,
                           rho_kernel_u: Optional[Callable] = None,
                           c_mixed_time: Optional[Callable] = None,
                           fibre_dim: int = 0) -> FibredAlgebroidPair:
    """Pair over a one-dimensional base (time) from algebra data.

    ``kernel_constants[al, be, ga]`` is the kernel bracket,
    ``c_mixed_time(x, u)[al, ga]`` the bracket of the time direction with
    the kernel frame.
    """
    constants = np.asarray(kernel_constants, dtype=float)
    mk = constants.shape[0]
    c_mixed = None
    if c_mixed_time is not None:
        c_mixed = lambda x, u: np.asarray(c_mixed_time(x, u), dtype=float)[None, :, :]
    return FibredAlgebroidPair(
        base_dim=1, fibre_dim=fibre_dim, kernel_rank=mk,
        rho_base_u=rho_base_u,
        rho_kernel_u=rho_kernel_u,
        c_mixed=c_mixed,
        c_kernel=lambda x, u: constants,
    )


def rigid_body_pair() -> FibredAlgebroidPair:
    """Rotation algebra over time, no advected coordinates."""
    return builder_time_dependent(EPSILON3)


def heavy_top_pair() -> FibredAlgebroidPair:
    """Rotation algebra acting on an advected 3-vector.

    ``rho_al^A = -eps[al, A, B] u^B`` with kernel constants ``-eps``;
    the advected vector satisfies ``du/dt = y x u`` so its length is a
    conserved quantity of any dynamics on this pair.
    """
    return builder_time_dependent(
        -EPSILON3,
        rho_kernel_u=lambda x, u: -np.einsum("kAB,B->kA", EPSILON3, u),
        fibre_dim=3,
    )


def free_particle_pair(dim: int) -> FibredAlgebroidPair:
    """Abelian kernel translating ``dim`` fibre coordinates."""
    return builder_time_dependent(
        np.zeros((dim, dim, dim)),
        rho_kernel_u=lambda x, u: np.eye(dim),
        fibre_dim=dim,
    )


@dataclass(frozen=True)
class MechanicsState:
    t: float
    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if not (np.isfinite(self.t) and np.all(np.isfinite(self.u))
                and np.all(np.isfinite(self.y))):
            raise ValueError("non-finite mechanics state")


@dataclass
class MechanicsTrajectory:
    """Sampled solution of the one-dimensional field equations."""

    times: np.ndarray
    u: np.ndarray    # (n_steps + 1, fibre_dim)
    y: np.ndarray    # (n_steps + 1, kernel_rank)

    def state(self, i: int) -> MechanicsState:
        return MechanicsState(t=float(self.times[i]), u=self.u[i], y=self.y[i])

    def to_section(self) -> DiscretizedSection:
        dt = float(self.times[1] - self.times[0])
        grid = GridSpec(extents=(self.times.size,), spacing=(dt,),
                        boundary="one_sided", origin=(float(self.times[0]),))
        return DiscretizedSection(grid=grid, u=self.u, y=self.y[:, :, None])

    def energy_series(self, lagrangian: Lagrangian) -> np.ndarray:
        out = np.zeros(self.times.size)
        for i, t in enumerate(self.times):
            x, ycol = np.array([t]), self.y[i][:, None]
            mom = lagrangian.partial_y_arrays(x, self.u[i], ycol)[:, 0]
            out[i] = float(mom @ self.y[i]) - float(lagrangian.value(x, self.u[i], ycol))
        return out

    def momentum_series(self, lagrangian: Lagrangian) -> np.ndarray:
        out = np.zeros_like(self.y)
        for i, t in enumerate(self.times):
            out[i] = lagrangian.partial_y_arrays(np.array([t]), self.u[i],
                                                 self.y[i][:, None])[:, 0]
        return out

    def el_residual_series(self, pair: FibredAlgebroidPair,
                           lagrangian: Lagrangian) -> np.ndarray:
        """Grid Euler-Lagrange residual along the trajectory.

        Dominated by the second-order time stencil (the integrator error
        is of higher order), so it shrinks like the square of the step.
        """
        section = self.to_section()
        out = np.zeros((self.times.size, self.y.shape[1]))
        for i in range(self.times.size):
            out[i] = el_residual(pair, lagrangian, section, (i,))
        return out


def _mechanics_hessians(lagrangian: Lagrangian, x, u, y, h: float = 1e-5):
    mk = y.shape[0]
    mu = u.size
    if lagrangian.hess_yy is not None:
        hyy = np.asarray(lagrangian.hess_yy(x, u, y), dtype=float)
    else:
        hyy = np.zeros((mk, mk))
        for b in range(mk):
            yp, ym = y.copy(), y.copy()
            yp[b, 0] += h
            ym[b, 0] -= h
            hyy[:, b] = (lagrangian.partial_y_arrays(x, u, yp)
                         - lagrangian.partial_y_arrays(x, u, ym))[:, 0] / (2 * h)
    if mu == 0:
        return hyy, np.zeros((mk, 0))
    if lagrangian.hess_yu is not None:
        hyu = np.asarray(lagrangian.hess_yu(x, u, y), dtype=float)
    else:
        hyu = np.zeros((mk, mu))
        for b in range(mu):
            up, um = u.copy(), u.copy()
            up[b] += h
            um[b] -= h
            hyu[:, b] = (lagrangian.partial_y_arrays(x, up, y)
                         - lagrangian.partial_y_arrays(x, um, y))[:, 0] / (2 * h)
    return hyy, hyu


def _mechanics_rhs(pair: FibredAlgebroidPair, lagrangian: Lagrangian,
                   t: float, u: np.ndarray, y: np.ndarray,
                   cond_limit: float, check_cond: bool = True) -> tuple:
    x = np.array([t])
    ycol = y[:, None]
    mk = y.shape[0]
    rho_k = pair.rho_kernel_u_at(x, u)
    udot = pair.rho_base_u_at(x, u)[0] + rho_k.T @ y if u.size else np.zeros(0)

    mom = lagrangian.partial_y_arrays(x, u, ycol)[:, 0]
    # Z[al, ga] at the one base slot: C_{0 al}^ga + C_{be al}^ga y^be
    ck = pair.c_kernel_at(x, u)
    zslice = pair.c_mixed_at(x, u)[0] + (y @ ck.reshape(mk, -1)).reshape(mk, mk)
    rhs = zslice @ mom
    if u.size:
        rhs += rho_k @ lagrangian.partial_u_arrays(x, u, ycol)

    hyy, hyu = _mechanics_hessians(lagrangian, x, u, ycol)
    try:
        hinv = np.linalg.inv(hyy)
    except np.linalg.LinAlgError as exc:
        raise DegenerateLagrangianError(
            "velocity Hessian of the Lagrangian is singular") from exc
    if check_cond:
        cond = float(np.abs(hyy).sum(axis=0).max() * np.abs(hinv).sum(axis=0).max())
        if not np.isfinite(cond) or cond > cond_limit:
            raise DegenerateLagrangianError(
                "velocity Hessian of the Lagrangian is singular or ill-conditioned")

    # explicit time dependence of the momentum map
    ht = 1e-6
    mom_t = (lagrangian.partial_y_arrays(x + ht, u, ycol)
             - lagrangian.partial_y_arrays(x - ht, u, ycol))[:, 0] / (2 * ht)

    ydot = hinv @ (rhs - (hyu @ udot if u.size else 0.0) - mom_t)
    return udot, ydot


def integrate_mechanics(pair: FibredAlgebroidPair, lagrangian: Lagrangian,
                        initial: MechanicsState, t_end: float, dt: float,
                        cond_limit: float = 1e12) -> MechanicsTrajectory:
    """Fixed-step RK4 integration of the one-dimensional field equations.

    The momentum equation is solved for the velocity rate through the
    (dense, condition-guarded) velocity Hessian at every stage.  Requires
    a regular Lagrangian; raises on blow-up.
    """
    if pair.base_dim != 1:
        raise ValueError("mechanics integration needs a one-dimensional base")
    if dt <= 0:
        raise ValueError("dt must be positive")
    n_steps = int(round((t_end - initial.t) / dt))
    if n_steps < 1:
        raise ValueError("empty integration interval")

    mu, mk = pair.fibre_dim, pair.kernel_rank
    times = initial.t + dt * np.arange(n_steps + 1)
    us = np.zeros((n_steps + 1, mu))
    ys = np.zeros((n_steps + 1, mk))
    us[0], ys[0] = initial.u, initial.y

    u, y = initial.u.astype(float).copy(), initial.y.astype(float).copy()
    for i in range(n_steps):
        t = times[i]
        # condition guard on the first stage of each step
        k1u, k1y = _mechanics_rhs(pair, lagrangian, t, u, y, cond_limit)
        k2u, k2y = _mechanics_rhs(pair, lagrangian, t + dt / 2,
                                  u + dt / 2 * k1u, y + dt / 2 * k1y, cond_limit,
                                  check_cond=False)
        k3u, k3y = _mechanics_rhs(pair, lagrangian, t + dt / 2,
                                  u + dt / 2 * k2u, y + dt / 2 * k2y, cond_limit,
                                  check_cond=False)
        k4u, k4y = _mechanics_rhs(pair, lagrangian, t + dt,
                                  u + dt * k3u, y + dt * k3y, cond_limit,
                                  check_cond=False)
        u = u + dt / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        y = y + dt / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise IntegrationBlowupError(f"non-finite state at t = {t + dt}")
        us[i + 1], ys[i + 1] = u, y
    return MechanicsTrajectory(times=times, u=us, y=ys)


# ---------------------------------------------------------------------------
# mechanics Lagrangians
# ---------------------------------------------------------------------------

def quadratic_kinetic_lagrangian(weights) -> Lagrangian:
    """``L = 1/2 sum_a w_al (y^al_a)^2`` with analytic derivatives."""
    w = np.asarray(weights, dtype=float)
    return Lagrangian(
        value=lambda x, u, y: 0.5 * float(np.sum(w[:, None] * y ** 2)),
        grad_u=lambda x, u, y: np.zeros(np.asarray(u).shape),
        grad_y=lambda x, u, y: w[:, None] * y,
        hess_yy=lambda x, u, y: np.diag(w),
        hess_yu=lambda x, u, y: np.zeros((w.size, np.asarray(u).size)),
    )


def rigid_body_lagrangian(inertia) -> Lagrangian:
    return quadratic_kinetic_lagrangian(inertia)


def heavy_top_lagrangian(inertia, mgl: float, chi) -> Lagrangian:
    """Kinetic form minus the potential ``mgl * <u, chi>``."""
    inertia = np.asarray(inertia, dtype=float)
    chi = np.asarray(chi, dtype=float)
    return Lagrangian(
        value=lambda x, u, y: (0.5 * float(np.sum(inertia[:, None] * y ** 2))
                               - mgl * float(u @ chi)),
        grad_u=lambda x, u, y: -mgl * chi,
        grad_y=lambda x, u, y: inertia[:, None] * y,
        hess_yy=lambda x, u, y: np.diag(inertia),
        hess_yu=lambda x, u, y: np.zeros((3, 3)),
    )


def scalar_field_lagrangian(mass: float = 0.0) -> Lagrangian:
    """``L = 1/2 |y|^2 - 1/2 m^2 |u|^2`` for translation-kernel pairs."""
    return Lagrangian(
        value=lambda x, u, y: 0.5 * float(np.sum(y ** 2)) - 0.5 * mass ** 2 * float(np.sum(np.asarray(u) ** 2)),
        grad_u=lambda x, u, y: -mass ** 2 * np.asarray(u, dtype=float),
        grad_y=lambda x, u, y: np.asarray(y, dtype=float).copy(),
    )


# ---------------------------------------------------------------------------
# Chern-Simons on a 3d lattice
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChernSimonsData:
    """Quadratic Lie algebra data for the Chern-Simons Lagrangian.

    ``constants[al, be, ga]`` is the algebra bracket; ``metric`` must be
    symmetric and invariant enough that the lowered coefficients
    ``metric @ constants`` are totally antisymmetric (checked to 1e-12).
    ``positive_definite`` records the signature for downstream reporting.
    """

    constants: np.ndarray
    metric: np.ndarray
    lowered: np.ndarray = field(init=False)
    positive_definite: bool = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.constants, dtype=float)
        k = np.asarray(self.metric, dtype=float)
        object.__setattr__(self, "constants", c)
        object.__setattr__(self, "metric", k)
        if k.shape != (c.shape[0], c.shape[0]) or c.ndim != 3:
            raise ValueError("inconsistent algebra data shapes")
        if np.max(np.abs(k - k.T)) > 1e-12:
            raise ValueError("metric must be symmetric")
        eigs = np.linalg.eigvalsh(k)
        if np.min(np.abs(eigs)) < 1e-12:
            raise ValueError("metric must be nondegenerate")
        lowered = np.einsum("am,bgm->abg", k, c)
        for perm, sign in [((1, 0, 2), -1.0), ((0, 2, 1), -1.0), ((2, 1, 0), -1.0)]:
            if np.max(np.abs(lowered - sign * np.transpose(lowered, perm))) > 1e-12:
                raise ValueError(
                    "lowered structure coefficients are not totally antisymmetric "
                    "(metric is not invariant)")
        object.__setattr__(self, "lowered", lowered)
        object.__setattr__(self, "positive_definite", bool(np.min(eigs) > 0))

    @staticmethod
    def su2() -> "ChernSimonsData":
        return ChernSimonsData(constants=EPSILON3, metric=np.eye(3))


def chern_simons_lagrangian(data: ChernSimonsData) -> Lagrangian:
    """``L = C_lowered[al, be, ga] y^al_1 y^be_2 y^ga_3`` with analytic partials."""
    cl = data.lowered

    def value(x, u, y):
        return float(np.einsum("abg,a,b,g->", cl, y[:, 0], y[:, 1], y[:, 2]))

    def grad_y(x, u, y):
        out = np.zeros_like(y)
        out[:, 0] = np.einsum("abg,b,g->a", cl, y[:, 1], y[:, 2])
        out[:, 1] = np.einsum("abg,a,g->b", cl, y[:, 0], y[:, 2])
        out[:, 2] = np.einsum("abg,a,b->g", cl, y[:, 0], y[:, 1])
        return out

    return Lagrangian(value=value,
                      grad_u=lambda x, u, y: np.zeros(0),
                      grad_y=grad_y)


def builder_chern_simons(data: ChernSimonsData, grid: GridSpec):
    """Product pair (trivial kernel bundle over a 3d chart) plus its Lagrangian."""
    if grid.dim != 3:
        raise ValueError("Chern-Simons scenario needs a 3-dimensional grid")
    mk = data.constants.shape[0]
    pair = FibredAlgebroidPair(
        base_dim=3, fibre_dim=0, kernel_rank=mk,
        c_kernel=lambda x, u: data.constants,
    )
    return pair, chern_simons_lagrangian(data)


def _wedge_1_2(v: np.ndarray, b: np.ndarray) -> float:
    """Top coefficient of (1-form) wedge (2-form) on a 3d chart."""
    return float(v[0] * b[1, 2] + v[1] * b[2, 0] + v[2] * b[0, 1])


def chern_simons_lagrangian_difference(data: ChernSimonsData,
                                       section: DiscretizedSection, idx) -> float:
    """Defect of the conventional-vs-cubic Lagrangian identity at one node.

    The conventional density ``k(A ^ dA + (2/3) A ^ A ^ A-bracket-term)``
    differs from the cubic density by the metric pairing of ``A`` with
    the flatness form ``dA + 1/2 [A ^ A]``.  Evaluated with the same grid
    derivatives on both sides the identity is algebraically exact, so the
    returned defect is rounding noise bounded well below stencil order
    for any field.  (The cubic coefficient 2/3 is the one that makes the
    identity hold; the two densities then agree on flat sections.)
    """
    y = section.y[tuple(idx)]  # [alpha, a]
    grid = section.grid
    k = data.metric
    cl = data.lowered
    c = data.constants
    mk = y.shape[0]

    dy = np.stack([node_derivative(section.y, grid, a, idx) for a in range(3)],
                  axis=-1)  # [alpha, b, a] = d_a y^alpha_b
    da = np.einsum("kba->kab", dy) - dy  # [alpha, a, b] = d_a A_b - d_b A_a

    lprime = sum(k[al, be] * _wedge_1_2(y[al], da[be])
                 for al in range(mk) for be in range(mk))
    lprime += (2.0 / 3.0) * float(
        np.einsum("amn,ai,mj,nk,ijk->", cl, y, y, y, EPSILON3))

    lvalue = float(np.einsum("abg,a,b,g->", cl, y[:, 0], y[:, 1], y[:, 2]))

    f = da + np.einsum("bga,bi,gj->aij", c, y, y)  # flatness 2-form per direction
    fterm = sum(k[al, mu] * _wedge_1_2(y[mu], f[al])
                for al in range(mk) for mu in range(mk))

    return abs(lprime - lvalue - fterm)


# ---------------------------------------------------------------------------
# lattice sampling of flat (pure-gauge) connections
# ---------------------------------------------------------------------------

def su2_basis() -> np.ndarray:
    """Anti-hermitian basis with bracket constants ``eps``: ``T_al = -i sigma_al / 2``."""
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    sy = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
    sz = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
    return np.stack([-0.5j * sx, -0.5j * sy, -0.5j * sz])


def su2_exponential(v) -> np.ndarray:
    """Closed-form exponential of ``v^al T_al`` in the defining representation."""
    v = np.asarray(v, dtype=float)
    theta = float(np.linalg.norm(v))
    eye = np.eye(2, dtype=complex)
    if theta < 1e-14:
        x = np.einsum("a,aij->ij", v, su2_basis())
        return eye + x + 0.5 * x @ x
    unit = v / theta
    x = np.einsum("a,aij->ij", unit, su2_basis())
    return np.cos(theta / 2) * eye + 2 * np.sin(theta / 2) * x


def flat_connection_generator(gauge: Callable, grid: GridSpec,
                              algebra_basis: Sequence[np.ndarray],
                              fd_step: float = 1e-6,
                              projection_tol: float = 1e-8) -> DiscretizedSection:
    """Sample the pure-gauge connection of a group-valued function on a grid.

    ``A_a(x) = g(x)^{-1} d_a g(x)`` is computed with central differences
    of the caller-supplied matrix function (independent of the grid
    spacing) and projected onto the given algebra basis; components
    outside the span beyond ``projection_tol`` raise ``ProjectionError``.
    The result is a kernel-only section (no fibre coordinates) whose
    flatness residual is pure stencil error.
    """
    basis = np.stack([np.asarray(b, dtype=complex) for b in algebra_basis])
    mk = basis.shape[0]
    gram = np.array([[np.real(np.trace(bi.conj().T @ bj)) for bj in basis]
                     for bi in basis])

    y = np.zeros(grid.extents + (mk, grid.dim))
    for idx in grid.nodes():
        x = grid.coords(idx)
        g = np.asarray(gauge(x), dtype=complex)
        ginv = np.linalg.inv(g)
        for a in range(grid.dim):
            xp, xm = x.copy(), x.copy()
            xp[a] += fd_step
            xm[a] -= fd_step
            dg = (np.asarray(gauge(xp), dtype=complex)
                  - np.asarray(gauge(xm), dtype=complex)) / (2 * fd_step)
            amat = ginv @ dg
            rhs = np.array([np.real(np.trace(b.conj().T @ amat)) for b in basis])
            coeffs = np.linalg.solve(gram, rhs)
            recon = np.einsum("k,kij->ij", coeffs, basis)
            defect = np.linalg.norm(amat - recon)
            if defect > projection_tol * (1.0 + np.linalg.norm(amat)):
                raise ProjectionError(
                    f"connection sample at node {idx}, axis {a} lies outside "
                    f"the algebra span (defect {defect:.2e})")
            y[idx][:, a] = coeffs
    return DiscretizedSection(grid=grid, u=np.zeros(grid.extents + (0,)), y=y)


# ---------------------------------------------------------------------------
# reduced bundles of symmetry group actions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AtiyahData:
    """Algebra constants plus the curvature of the reference connection.

    ``curvature(x)[a, b, al]`` is antisymmetric in ``(a, b)``; ``None``
    means a flat reference.  With a flat reference the field equations
    are the covariant Euler-Poincare equations.  A non-flat reference
    yields valid structure functions only when the curvature is closed
    and central (e.g. abelian algebras); the structure-equation check is
    the arbiter.
    """

    constants: np.ndarray
    curvature: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "constants", np.asarray(self.constants, dtype=float))


def builder_atiyah(data: AtiyahData, base_dim: int) -> FibredAlgebroidPair:
    """Reduced pair with kernel constants and reference curvature block."""
    mk = data.constants.shape[0]
    c_base_kernel = None
    if data.curvature is not None:
        c_base_kernel = lambda x, u: -np.asarray(data.curvature(x), dtype=float)
    return FibredAlgebroidPair(
        base_dim=base_dim, fibre_dim=0, kernel_rank=mk,
        c_base_kernel=c_base_kernel,
        c_kernel=lambda x, u: data.constants,
    )
