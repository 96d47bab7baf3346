"""Scalar integral and series identities for the dilogarithm family.

The Fourier-transform checks have conditionally convergent tails (the
integrand is purely oscillatory with a quadratic phase on one side), so
their contours dip the oscillatory tail into the pole-free zone just
below the real axis, where the same quadratic phase supplies exponential
damping.  Everything else runs on plain shifted lines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AtPole, OutOfStrip
from .modulus import Modulus
from .quadrature import ContourSpec, integrate_line, integrate_path
from . import specfun as sf


@dataclass(frozen=True)
class RhoDensity:
    """The spectral density entering the momentum-kernel calculus."""

    mod: Modulus

    def value_at(self, t: complex) -> complex:
        mod = self.mod
        b = mod.b
        lg = sf.log_Gb_batch(np.array([mod.Q + 1j * b * t]), mod)[0]
        s2 = 2 * np.sin(np.pi * b * b)
        return b * np.exp(-1j * np.pi * b * b * t * t - lg
                          + 2j * t * np.log(s2))


def rho(t: complex, mod: Modulus) -> complex:
    return RhoDensity(mod).value_at(t)


def rho_funceq_residual(t: complex, mod: Modulus) -> float:
    """Residual of the downward shift equation of the density."""
    d = RhoDensity(mod)
    for point in (t, t - 1j):
        z = mod.Q + 1j * mod.b * point
        if sf.gb_pole_lattice(mod).distance(z) < sf.POLE_TOL or \
           sf.gb_zero_lattice(mod).distance(z) < sf.POLE_TOL:
            raise AtPole(f"rho argument {point} too close to the lattice")
    lhs = mod.q_number(1j * t + 1) * d.value_at(t - 1j)
    rhs = 2j * mod.q ** (1j * t) * np.sin(np.pi * mod.b ** 2) * d.value_at(t)
    return abs(lhs - rhs) / abs(rhs)


# ---------------------------------------------------------------------------
# beta integral
# ---------------------------------------------------------------------------

def beta_integral(alpha: complex, beta: complex, mod: Modulus,
                  rel_tol: float = 1e-10) -> tuple:
    """Quadrature value and closed form of the b-beta integral.

    Returns (numeric, closed_form).  Convergence needs 0 < Re alpha,
    Re beta and Re(alpha+beta) < Re Q.
    """
    Q = mod.Q
    if min(alpha.real, beta.real) <= 0 or (alpha + beta).real >= Q.real:
        raise OutOfStrip("need Re a, Re b > 0 and Re(a+b) < Re Q")

    def f(tau):
        lg = sf.log_Gb_batch(alpha + 1j * tau, mod) \
            - sf.log_Gb_batch(Q + 1j * tau, mod)
        return np.exp(-2 * np.pi * tau * beta + lg)

    eta = 0.25 * min(alpha.real, mod.b.real, (1 / mod.b).real)
    q = integrate_line(f, ContourSpec(offset=eta, window=30.0,
                                      rel_tol=rel_tol))
    closed = np.exp(sf.log_Gb_batch(np.array([alpha, beta]), mod).sum()
                    - sf.log_Gb_batch(np.array([alpha + beta]), mod)[0])
    return q.value, closed


# ---------------------------------------------------------------------------
# Fourier transforms of g_b and 1/g_b
# ---------------------------------------------------------------------------

def _fresnel_vertices(mod: Modulus, oscillatory_side: str,
                      eta: float = 0.05, depth: float = None,
                      elbow: float = 1.5) -> list:
    """Polyline over the real line whose `oscillatory_side` tail dips to
    Im t = -depth (inside the pole-free zone of the integrands here)."""
    b = mod.b
    if depth is None:
        depth = 0.45 * min(1.0, (1 / (b * b)).real if (1 / (b * b)).real > 0
                           else 1.0)
    rate_osc = 2 * np.pi * (b * b).real * depth      # decay on the dipped leg
    rate_exp = np.pi * (b * mod.Q).real              # decay on the plain leg
    T_osc = 40.0 / max(rate_osc, 0.1)
    T_exp = 40.0 / max(rate_exp, 0.1) + 4.0
    if oscillatory_side == "right":
        return [-T_exp + 1j * eta, elbow + 1j * eta,
                2 * elbow - 1j * depth, T_osc - 1j * depth]
    return [-T_osc - 1j * depth, -2 * elbow - 1j * depth,
            -elbow + 1j * eta, T_exp + 1j * eta]


def fourier_gb(r: float, mod: Modulus, sign: str,
               rel_tol: float = 1e-10) -> tuple:
    """Fourier-transform check for g_b (sign '+') or 1/g_b (sign '-').

    Returns (numeric, closed_form).
    """
    b, Q = mod.b, mod.Q

    if sign == "+":
        def f(t):
            lg = sf.log_Gb_batch(Q + 1j * b * t, mod)
            return np.exp(2j * np.pi * b * t * r
                          - 1j * np.pi * b * b * t * t - lg)
        verts = _fresnel_vertices(mod, "right")
        closed = sf.gb(np.exp(2 * np.pi * b * r), mod).value
    elif sign == "-":
        def f(t):
            lg = sf.log_Gb_batch(Q + 1j * b * t, mod)
            return np.exp(2j * np.pi * b * t * r - np.pi * b * Q * t - lg)
        verts = _fresnel_vertices(mod, "left")
        closed = 1.0 / sf.gb(np.exp(2 * np.pi * b * r), mod).value
    else:
        raise ValueError("sign must be '+' or '-'")
    q = integrate_path(f, verts, rel_tol=rel_tol)
    return b * q.value, closed


# ---------------------------------------------------------------------------
# b-binomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BBinom:
    t: complex
    tau: complex
    mod: Modulus

    @property
    def value(self) -> complex:
        return bbinom(self.t, self.tau, self.mod)


def _bbc_log(t, tau, mod: Modulus):
    b, Q = mod.b, mod.Q
    t = np.asarray(t, dtype=complex)
    tau = np.asarray(tau, dtype=complex)
    lg = (sf.log_Gb_batch(Q + 1j * b * t, mod)
          - sf.log_Gb_batch(Q + 1j * b * (t - tau), mod)
          - sf.log_Gb_batch(Q + 1j * b * tau, mod))
    return 2j * np.pi * b * b * tau * (t - tau) + lg


def bbinom(t: complex, tau: complex, mod: Modulus) -> complex:
    for arg in (t, t - tau, tau):
        z = mod.Q + 1j * mod.b * complex(arg)
        if sf.gb_pole_lattice(mod).distance(z) < sf.POLE_TOL or \
           sf.gb_zero_lattice(mod).distance(z) < sf.POLE_TOL:
            raise AtPole(f"binomial argument {arg} on the lattice")
    return complex(np.exp(_bbc_log(t, tau, mod)))


def pascal_residual(t: complex, tau: complex, mod: Modulus) -> float:
    """Max deviation of the two forms of the q-Pascal identity."""
    q = mod.q
    a = bbinom(t - 1j, tau, mod)
    c = bbinom(t, tau, mod)
    d = bbinom(t, tau + 1j, mod)
    r1 = abs(a - (q ** (-2j * tau) * c + d)) / abs(a)
    r2 = abs(a - (c + q ** (2j * (tau - t + 1j)) * d)) / abs(a)
    return max(r1, r2)


def binomial_expansion_check(t: float, mod: Modulus, u, v,
                             psis=None, rel_tol: float = 1e-8) -> float:
    """Residual of the contour-integral binomial expansion of (u+v)^{it}.

    Scalar mode: u > 0 and v = 0 — the integral localizes at the tau-pole
    and must reproduce u^{it}.  Operator mode: u, v a lattice Weyl pair
    (position/momentum diagonal multipliers); the expansion is applied
    matrix-free to the test vectors `psis` and compared against the
    eigendecomposition of u + v.
    """
    b = mod.b
    eta = 0.25 * min(b.real, (1 / b).real)
    spec = ContourSpec(offset=eta, window=30.0, rel_tol=rel_tol)
    scalar = np.isscalar(u)
    if scalar:
        if v != 0:
            raise ValueError("scalar surrogate only supports v = 0")
        if t == 0:
            # the coefficient has a vanishing prefactor at t = 0, and the
            # operator power at t = 0 is the identity by definition
            return 0.0
        # As v -> 0+ the contour (which runs above the tau = 0 pole of the
        # coefficient) closes downward and the integral localizes on the
        # residue at tau = 0, leaving u^{it} times a constant that must be 1.
        from .quadrature import contour_residue

        def f(tau):
            return np.exp(_bbc_log(np.full_like(tau, t, dtype=complex),
                                   tau, mod))

        res = contour_residue(f, 0.0, 0.01)
        factor = -2j * np.pi * b * res
        return abs(factor - 1.0)

    # operator mode
    from . import opsim
    grid = u.grid
    if psis is None:
        psis = opsim.gaussian_battery(grid)
    uv = 0.5 * (u.matrix + v.matrix) + 0.5 * (u.matrix + v.matrix).conj().T
    evals, vecs = np.linalg.eigh(uv)
    if t == 0:
        # the operator power at t = 0 is the identity by definition
        target = [psi for psi in psis]
    else:
        target = [vecs @ (evals ** (1j * t) * (vecs.conj().T @ psi))
                  for psi in psis]
    du = u.diag
    dv_k = v.diag
    F = opsim.dft_matrix(grid)

    worst = 0.0
    if t == 0:
        rhs = psis
    else:
        nodes, weights = _panelized_line(spec)

        def apply_term(tau, psi):
            phi = F.conj().T @ (dv_k ** (1j * tau) * (F @ psi))
            return du ** (1j * (t - tau)) * phi

        coeff = b * weights * np.exp(_bbc_log(np.full(len(nodes), t),
                                              nodes, mod))
        rhs = []
        for psi in psis:
            acc = np.zeros_like(psi, dtype=complex)
            for c, tau in zip(coeff, nodes):
                acc += c * apply_term(tau, psi)
            rhs.append(acc)
    for lhs_psi, rhs_psi, psi in zip(target, rhs, psis):
        worst = max(worst, np.linalg.norm(lhs_psi - rhs_psi)
                    / np.linalg.norm(psi))
    return worst


def _panelized_line(spec: ContourSpec, points_per_unit: float = 12.0):
    """Fixed Gauss-composite nodes/weights on the spec's line (for
    operator-valued integrands where adaptivity would be wasteful)."""
    n_panels = max(8, int(spec.window * 2 * points_per_unit / 10))
    edges = np.linspace(-spec.window, spec.window, n_panels + 1)
    gx, gw = np.polynomial.legendre.leggauss(10)
    nodes, weights = [], []
    for a, b_ in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b_), 0.5 * (b_ - a)
        nodes.append(mid + half * gx + 1j * spec.offset)
        weights.append(half * gw)
    return np.concatenate(nodes), np.concatenate(weights)
