"""Lie algebroids in a single chart, given by their structure functions.

A Lie algebroid over an ``n``-dimensional base chart is encoded by its
anchor components ``rho[alpha, i] = rho_alpha^i(x)`` and bracket
coefficients ``C[alpha, beta, gamma] = C_ab^g(x)`` in a fixed frame
``{e_alpha}``.  Valid structure functions satisfy two compatibility
identities (checked, never assumed, by :func:`structure_equation_residuals`):

* anchor:  ``rho_a^j d_j rho_b^i - rho_b^j d_j rho_a^i = rho_g^i C_ab^g``
* Jacobi:  ``sum_cyc(a,b,g) [rho_a^i d_i C_bg^n + C_am^n C_bg^m] = 0``

The module implements the calculus attached to this data: anchor
application, the bracket of sections, the exterior differential on
p-forms, Lie derivatives via the Cartan formula, and the one-parameter
flow of morphisms generated by a section.  Everything is pointwise and
pure; models may be shared freely across threads.

Constructing a model whose structure functions violate the compatibility
identities is allowed (negative tests rely on it); operations that are
only meaningful on a true Lie algebroid say so in their docstrings.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .differentiation import DEFAULT_FD_STEP, gradient


class FlowBlowupError(RuntimeError):
    """Raised when non-finite values appear during flow integration."""


def antisymmetrize(arr: np.ndarray, naxes: Optional[int] = None) -> np.ndarray:
    """Project the leading ``naxes`` axes of ``arr`` onto their antisymmetric part."""
    a = np.asarray(arr, dtype=float)
    p = a.ndim if naxes is None else naxes
    if p <= 1:
        return a
    trailing = tuple(range(p, a.ndim))
    out = np.zeros_like(a)
    for perm in itertools.permutations(range(p)):
        sign = _permutation_sign(perm)
        out += sign * np.transpose(a, perm + trailing)
    return out / math.factorial(p)


def _permutation_sign(perm) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j = i
        length = 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass(frozen=True)
class LieAlgebroid:
    """Structure-function model of a Lie algebroid in one chart.

    Parameters
    ----------
    base_dim : dimension ``n`` of the base chart.
    rank : fibre dimension ``k`` of the bundle.
    anchor : map ``x -> (k, n)`` array, ``anchor(x)[alpha, i] = rho_alpha^i``.
    bracket_coeffs : map ``x -> (k, k, k)`` array with entries ``C_ab^g``
        (indexed ``[alpha, beta, gamma]``); antisymmetrized in the first two
        axes on every access, so only the antisymmetric part matters.
    anchor_derivative : optional map ``x -> (k, n, n)`` array,
        ``[alpha, i, j] = d rho_alpha^i / d x^j``.  Central differences
        with step ``fd_step`` otherwise.
    bracket_derivative : optional map ``x -> (k, k, k, n)`` array,
        ``[alpha, beta, gamma, j] = d C_ab^g / d x^j``.
    """

    base_dim: int
    rank: int
    anchor: Callable[[np.ndarray], np.ndarray]
    bracket_coeffs: Callable[[np.ndarray], np.ndarray]
    anchor_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    bracket_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step: float = DEFAULT_FD_STEP

    def anchor_at(self, x) -> np.ndarray:
        rho = np.asarray(self.anchor(np.asarray(x, dtype=float)), dtype=float)
        if rho.shape != (self.rank, self.base_dim):
            raise ValueError(
                f"anchor shape {rho.shape} != (rank, base_dim) = "
                f"({self.rank}, {self.base_dim})"
            )
        return rho

    def bracket_at(self, x) -> np.ndarray:
        c = np.asarray(self.bracket_coeffs(np.asarray(x, dtype=float)), dtype=float)
        if c.shape != (self.rank,) * 3:
            raise ValueError(f"bracket coefficient shape {c.shape} != (k, k, k)")
        return 0.5 * (c - np.swapaxes(c, 0, 1))

    def anchor_jacobian(self, x) -> np.ndarray:
        """``[alpha, i, j] = d rho_alpha^i / d x^j``, analytic or central-difference."""
        if self.anchor_derivative is not None:
            return np.asarray(self.anchor_derivative(np.asarray(x, dtype=float)), dtype=float)
        return gradient(self.anchor_at, np.asarray(x, dtype=float), self.fd_step)

    def bracket_jacobian(self, x) -> np.ndarray:
        """``[alpha, beta, gamma, j] = d C_ab^g / d x^j``."""
        if self.bracket_derivative is not None:
            d = np.asarray(self.bracket_derivative(np.asarray(x, dtype=float)), dtype=float)
            return 0.5 * (d - np.swapaxes(d, 0, 1))
        return gradient(self.bracket_at, np.asarray(x, dtype=float), self.fd_step)

    @staticmethod
    def standard_tangent(n: int, fd_step: float = DEFAULT_FD_STEP) -> "LieAlgebroid":
        """The tangent algebroid of an n-dimensional chart in coordinate frame."""
        eye = np.eye(n)
        zero = np.zeros((n, n, n))
        return LieAlgebroid(
            base_dim=n,
            rank=n,
            anchor=lambda x: eye,
            bracket_coeffs=lambda x: zero,
            anchor_derivative=lambda x: np.zeros((n, n, n)),
            bracket_derivative=lambda x: np.zeros((n, n, n, n)),
            fd_step=fd_step,
        )

    @staticmethod
    def from_lie_algebra(
        constants: np.ndarray, base_dim: int = 1, fd_step: float = DEFAULT_FD_STEP
    ) -> "LieAlgebroid":
        """A Lie algebra as an algebroid with zero anchor over a dummy chart."""
        c = np.asarray(constants, dtype=float)
        k = c.shape[0]
        if c.shape != (k, k, k):
            raise ValueError("structure constants must be a (k, k, k) array")
        zero_rho = np.zeros((k, base_dim))
        return LieAlgebroid(
            base_dim=base_dim,
            rank=k,
            anchor=lambda x: zero_rho,
            bracket_coeffs=lambda x: c,
            anchor_derivative=lambda x: np.zeros((k, base_dim, base_dim)),
            bracket_derivative=lambda x: np.zeros((k, k, k, base_dim)),
            fd_step=fd_step,
        )


@dataclass(frozen=True)
class Section:
    """A section of the bundle, ``coeffs(x)[alpha] = sigma^alpha(x)``."""

    coeffs: Callable[[np.ndarray], np.ndarray]
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step: float = DEFAULT_FD_STEP

    def at(self, x) -> np.ndarray:
        return np.asarray(self.coeffs(np.asarray(x, dtype=float)), dtype=float)

    def jacobian(self, x) -> np.ndarray:
        """``[gamma, i] = d sigma^gamma / d x^i``."""
        if self.derivative is not None:
            return np.asarray(self.derivative(np.asarray(x, dtype=float)), dtype=float)
        return gradient(self.at, np.asarray(x, dtype=float), self.fd_step)

    @staticmethod
    def constant(values) -> "Section":
        v = np.asarray(values, dtype=float)
        return Section(
            coeffs=lambda x: v,
            derivative=lambda x: np.zeros((v.size, np.asarray(x).size)),
        )


@dataclass(frozen=True)
class PForm:
    """A p-form stored as its full antisymmetric coefficient array.

    ``coeffs(x)`` returns a scalar for ``degree == 0`` and an array with
    ``degree`` axes of length ``k`` otherwise; the stored value is the
    evaluation on frame tuples, e.g. ``omega(e_a, e_b) = coeffs(x)[a, b]``.
    The coefficient array is antisymmetrized on access.
    """

    degree: int
    coeffs: Callable[[np.ndarray], np.ndarray]
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step: float = DEFAULT_FD_STEP

    def at(self, x) -> np.ndarray:
        w = np.asarray(self.coeffs(np.asarray(x, dtype=float)), dtype=float)
        if self.degree == 0:
            return w
        return antisymmetrize(w)

    def coeff_jacobian(self, x) -> np.ndarray:
        """Coefficient derivatives, shape ``(k,)*degree + (n,)`` (diff index last)."""
        if self.derivative is not None:
            d = np.asarray(self.derivative(np.asarray(x, dtype=float)), dtype=float)
            if self.degree <= 1:
                return d
            return antisymmetrize(d, naxes=self.degree)
        return gradient(self.at, np.asarray(x, dtype=float), self.fd_step)

    @staticmethod
    def constant(degree: int, values) -> "PForm":
        v = np.asarray(values, dtype=float)
        return PForm(
            degree=degree,
            coeffs=lambda x: v,
            derivative=lambda x: np.zeros(v.shape + (np.asarray(x).size,)),
        )

    @staticmethod
    def function(f: Callable, derivative: Optional[Callable] = None,
                 fd_step: float = DEFAULT_FD_STEP) -> "PForm":
        """Wrap a scalar function as a 0-form."""
        return PForm(degree=0, coeffs=f, derivative=derivative, fd_step=fd_step)

    @staticmethod
    def basis_covector(rank: int, index: int) -> "PForm":
        v = np.zeros(rank)
        v[index] = 1.0
        return PForm.constant(1, v)


# ---------------------------------------------------------------------------
# pointwise operations
# ---------------------------------------------------------------------------

def anchor_apply(model: LieAlgebroid, x, a) -> np.ndarray:
    """Push a fibre element through the anchor: ``v^i = rho_alpha^i(x) a^alpha``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (model.rank,):
        raise ValueError(f"fibre element has shape {a.shape}, expected ({model.rank},)")
    return np.einsum("ai,a->i", model.anchor_at(x), a)


def bracket(model: LieAlgebroid, sigma: Section, eta: Section, x) -> np.ndarray:
    """Bracket of two sections at ``x``.

    The unique extension of the frame brackets ``[e_a, e_b] = C_ab^g e_g``
    compatible with the Leibniz rule ``[sigma, f eta] = f [sigma, eta]
    + (rho(sigma) f) eta``:

        ``[sigma, eta]^g = rho_a^i sigma^a d_i eta^g
                         - rho_b^i eta^b d_i sigma^g + C_ab^g sigma^a eta^b``
    """
    rho = model.anchor_at(x)
    c = model.bracket_at(x)
    s = sigma.at(x)
    e = eta.at(x)
    if s.shape != (model.rank,) or e.shape != (model.rank,):
        raise ValueError("section components do not match the model rank")
    out = np.einsum("ai,a,gi->g", rho, s, eta.jacobian(x))
    out -= np.einsum("ai,a,gi->g", rho, e, sigma.jacobian(x))
    out += np.einsum("abg,a,b->g", c, s, e)
    return out


def exterior_differential(model: LieAlgebroid, omega: PForm, x) -> np.ndarray:
    """Coefficient array of ``d omega`` at ``x`` (degree ``p + 1``).

    ``(d omega)_{a0..ap} = sum_i (-1)^i rho_{ai}^j d_j omega_{..no ai..}
    + sum_{i<j} (-1)^{i+j} C_{ai aj}^b omega_{b, ..no ai, aj..}``.
    For a 0-form this is ``(df)_a = rho_a^i d_i f``.

    ``d`` squares to zero exactly when the structure equations hold; on a
    broken model the defect of ``d(d omega)`` is a Jacobi diagnostic.
    """
    p = omega.degree
    k = model.rank
    if p >= k:
        raise ValueError(f"cannot raise degree {p} on a rank-{k} algebroid")
    rho = model.anchor_at(x)
    jac = omega.coeff_jacobian(x)

    if p == 0:
        return np.einsum("aj,j->a", rho, jac)

    c = model.bracket_at(x)
    w = omega.at(x)
    out = np.zeros((k,) * (p + 1))

    # rho-terms: insert the new index at each slot i with sign (-1)^i
    contracted = np.tensordot(rho, jac, axes=([1], [p]))  # (k,) + (k,)*p
    for i in range(p + 1):
        out += (-1) ** i * np.moveaxis(contracted, 0, i)

    # bracket terms: pair of slots (i, j) with sign (-1)^{i+j}
    paired = np.tensordot(c, w, axes=([2], [0]))  # (k, k) + (k,)*(p-1)
    for i in range(p + 1):
        for j in range(i + 1, p + 1):
            out += (-1) ** (i + j) * np.moveaxis(paired, [0, 1], [i, j])
    return antisymmetrize(out)


def contraction(sigma: Section, omega: PForm) -> PForm:
    """Interior product ``i_sigma omega`` as a new form of degree ``p - 1``."""
    if omega.degree == 0:
        raise ValueError("cannot contract a 0-form")

    def coeffs(x):
        return np.tensordot(sigma.at(x), omega.at(x), axes=([0], [0]))

    derivative = None
    if sigma.derivative is not None and omega.derivative is not None:
        def derivative(x):
            term1 = np.tensordot(sigma.jacobian(x), omega.at(x), axes=([0], [0]))
            # jacobian axis ends up first; move it last to match convention
            term1 = np.moveaxis(term1, 0, -1)
            term2 = np.tensordot(sigma.at(x), omega.coeff_jacobian(x), axes=([0], [0]))
            return term1 + term2

    return PForm(degree=omega.degree - 1, coeffs=coeffs, derivative=derivative,
                 fd_step=omega.fd_step)


def lie_derivative(model: LieAlgebroid, sigma: Section, omega: PForm, x) -> np.ndarray:
    """Lie derivative via the Cartan formula ``d_sigma = i_sigma d + d i_sigma``.

    Returns the coefficient array of ``d_sigma omega`` at ``x`` (degree p).
    On a valid algebroid ``d_sigma`` commutes with ``d``.
    """
    p = omega.degree
    k = model.rank

    if p < k:
        domega = exterior_differential(model, omega, x)
        term1 = np.tensordot(sigma.at(x), domega, axes=([0], [0]))
    else:
        term1 = np.zeros((k,) * p)

    if p == 0:
        return term1

    iso = contraction(sigma, omega)

    def iso_coeffs(z):
        return np.tensordot(sigma.at(z), omega.at(z), axes=([0], [0]))

    iso_form = PForm(degree=p - 1, coeffs=iso_coeffs, derivative=iso.derivative,
                     fd_step=omega.fd_step)
    term2 = exterior_differential(model, iso_form, x)
    return term1 + term2


def structure_equation_residuals(model: LieAlgebroid, x):
    """Defects of the two structure equations at ``x``.

    Returns ``(anchor_residual, jacobi_residual)`` with shapes
    ``(k, k, n)`` and ``(k, k, k, k)``:

        ``anchor_residual[a, b, i] = rho_a^j d_j rho_b^i - rho_b^j d_j rho_a^i
                                     - rho_g^i C_ab^g``
        ``jacobi_residual[a, b, g, n] = sum_cyc(a,b,g)
                                     [rho_a^i d_i C_bg^n + C_am^n C_bg^m]``

    Both vanish identically on a true Lie algebroid.
    """
    rho = model.anchor_at(x)
    drho = model.anchor_jacobian(x)
    c = model.bracket_at(x)
    dc = model.bracket_jacobian(x)

    anchor_res = np.einsum("aj,bij->abi", rho, drho)
    anchor_res -= np.einsum("bj,aij->abi", rho, drho)
    anchor_res -= np.einsum("gi,abg->abi", rho, c)

    term = np.einsum("ai,bgni->abgn", rho, dc) + np.einsum("amn,bgm->abgn", c, c)
    jacobi_res = term + term.transpose(1, 2, 0, 3) + term.transpose(2, 0, 1, 3)
    return anchor_res, jacobi_res


def structure_residual_max(model: LieAlgebroid, points) -> float:
    """Max-norm of both structure-equation residuals over sample points."""
    worst = 0.0
    for x in points:
        a, j = structure_equation_residuals(model, x)
        worst = max(worst, float(np.max(np.abs(a))), float(np.max(np.abs(j))))
    return worst


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------

def _flow_rhs(model: LieAlgebroid, sigma: Section, x: np.ndarray, m: np.ndarray):
    rho = model.anchor_at(x)
    s = sigma.at(x)
    xdot = np.einsum("ai,a->i", rho, s)
    d = np.einsum("gi,bi->bg", rho, sigma.jacobian(x))
    d += np.einsum("gab,a->bg", model.bracket_at(x), s)
    return xdot, d @ m


def flow_of_section(model: LieAlgebroid, sigma: Section, s: float, x0,
                    steps: int = 100):
    """Flow of the section at parameter ``s``: ``(phi_s(x0), Phi_s matrix)``.

    The base point follows the integral curve of the anchored vector field
    ``rho(sigma)``.  The fibre map ``Phi_s``, expressed in the frame, is the
    solution ``M(s)`` of the linear equation ``dM/ds = D(x(s)) M`` with
    ``D^b_g = rho_g^i d_i sigma^b + C_ga^b sigma^a`` (the coefficients of
    ``d_sigma e^b``) and ``M(0) = I``.  For the tangent algebroid this is
    the Jacobian of the base flow, i.e. ``Phi_s = T phi_s``.

    Integrated with classical RK4 in ``steps`` fixed substeps.  On a valid
    algebroid each ``Phi_s`` is a morphism (see
    :func:`flow_morphism_defect`).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (model.base_dim,):
        raise ValueError(f"base point has shape {x.shape}, expected ({model.base_dim},)")
    m = np.eye(model.rank)
    h = s / steps
    for _ in range(steps):
        k1x, k1m = _flow_rhs(model, sigma, x, m)
        k2x, k2m = _flow_rhs(model, sigma, x + 0.5 * h * k1x, m + 0.5 * h * k1m)
        k3x, k3m = _flow_rhs(model, sigma, x + 0.5 * h * k2x, m + 0.5 * h * k2m)
        k4x, k4m = _flow_rhs(model, sigma, x + h * k3x, m + h * k3m)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        m = m + (h / 6.0) * (k1m + 2 * k2m + 2 * k3m + k4m)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(m))):
            raise FlowBlowupError("flow integration produced non-finite values")
    return x, m


def flow_pullback_form(model: LieAlgebroid, sigma: Section, s: float, x0,
                       omega: PForm, steps: int = 100) -> np.ndarray:
    """Coefficients of the pullback of ``omega`` through the flow, at ``x0``.

    Each frame index of ``omega`` evaluated at ``phi_s(x0)`` is contracted
    with the fibre matrix of the flow.  The s-derivative at 0 recovers the
    Lie derivative.
    """
    xs, m = flow_of_section(model, sigma, s, x0, steps=steps)
    w = omega.at(xs)
    for _ in range(omega.degree):
        w = np.tensordot(w, m, axes=([0], [0]))
    return w


def flow_morphism_defect(model: LieAlgebroid, sigma: Section, s: float, x0,
                         steps: int = 100, fd_step: float = 1e-4):
    """Defect of the morphism property of the flow map at parameter ``s``.

    The flow is a bundle map over its base flow; pullback commuting with
    ``d`` on coordinate functions and on the coframe reads, in components
    (primed structure functions evaluated at the image point):

        admissibility: ``rho_a^j d_j phi^i - rho'_b^i M^b_a = 0``
        morphism:      ``rho_a^i d_i M^b_d - rho_d^i d_i M^b_a
                         + C'_ts^b M^t_a M^s_d - M^b_g C_ad^g = 0``

    Spatial derivatives of the flow are taken by central differences over
    the initial point with step ``fd_step``.  Returns a pair of arrays
    ``(admissibility_defect (k, n), morphism_defect (k, k, k))`` with the
    morphism defect indexed ``[a, d, b]``.
    """
    n, k = model.base_dim, model.rank
    x0 = np.asarray(x0, dtype=float)
    xs, m = flow_of_section(model, sigma, s, x0, steps=steps)

    dphi = np.zeros((n, n))  # [i, j] = d phi^i / d x^j
    dm = np.zeros((k, k, n))  # [b, g, j] = d M^b_g / d x^j
    for j in range(n):
        xp = x0.copy()
        xm_ = x0.copy()
        xp[j] += fd_step
        xm_[j] -= fd_step
        xsp, mp = flow_of_section(model, sigma, s, xp, steps=steps)
        xsm, mm = flow_of_section(model, sigma, s, xm_, steps=steps)
        dphi[:, j] = (xsp - xsm) / (2 * fd_step)
        dm[:, :, j] = (mp - mm) / (2 * fd_step)

    rho0 = model.anchor_at(x0)
    rhos = model.anchor_at(xs)
    c0 = model.bracket_at(x0)
    cs = model.bracket_at(xs)

    adm = np.einsum("aj,ij->ai", rho0, dphi) - np.einsum("bi,ba->ai", rhos, m)
    mor = np.einsum("ai,bdi->adb", rho0, dm)
    mor -= np.einsum("di,bai->adb", rho0, dm)
    mor += np.einsum("tsb,ta,sd->adb", cs, m, m)
    mor -= np.einsum("bg,adg->adb", m, c0)
    return adm, mor
