"""Adaptive quadrature on shifted horizontal contours, polylines and circles.

Integrands are expected to be vectorized: they take an ndarray of complex
points and return an ndarray of values.  All integrals here are contour
integrals of the form  integral f(z) dz  along the described path.
"""

from __future__ import annotations

from dataclasses import dataclass
import heapq

import numpy as np

from .errors import BudgetExceeded, NoDecay, NonConvergent

_G15_X, _G15_W = np.polynomial.legendre.leggauss(15)
_G7_X, _G7_W = np.polynomial.legendre.leggauss(7)


@dataclass(frozen=True)
class ContourSpec:
    """A horizontal line Im t = offset, truncated to |Re t| <= window."""

    offset: float
    window: float
    rel_tol: float = 1e-12
    max_refinements: int = 40

    def __post_init__(self) -> None:
        if self.window <= 0:
            raise ValueError("window must be positive")
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must be in (0,1)")


@dataclass(frozen=True)
class QuadResult:
    value: complex
    err_est: float
    evaluations: int


def _panel_eval(f, a: complex, b: complex):
    """Gauss 15/7 pair on the straight segment [a, b]; returns (I15, err, nev)."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    z15 = mid + half * _G15_X
    v15 = np.asarray(f(z15))
    i15 = half * np.dot(_G15_W, v15)
    z7 = mid + half * _G7_X
    v7 = np.asarray(f(z7))
    i7 = half * np.dot(_G7_W, v7)
    return i15, abs(i15 - i7), 22


def _adaptive_segment(f, a: complex, b: complex, rel_tol: float,
                      max_panels: int = 4000):
    """Adaptive bisection on one straight segment [a, b]."""
    # seed with a handful of panels so narrow features are not missed
    n0 = 8
    pts = a + (b - a) * np.linspace(0.0, 1.0, n0 + 1)
    heap = []
    total = 0.0 + 0.0j
    nev = 0
    entries = {}
    serial = 0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, err, ne = _panel_eval(f, lo, hi)
        total += val
        nev += ne
        entries[serial] = (lo, hi, val, err)
        heapq.heappush(heap, (-err, serial))
        serial += 1
    while len(entries) < max_panels:
        scale = max(abs(total), 1e-300)
        toterr = sum(e[3] for e in entries.values())
        if toterr <= rel_tol * scale:
            break
        _, key = heapq.heappop(heap)
        if key not in entries:
            continue
        lo, hi, val, _ = entries.pop(key)
        mid = 0.5 * (lo + hi)
        for seg in ((lo, mid), (mid, hi)):
            v, e, ne = _panel_eval(f, *seg)
            total += v
            nev += ne
            entries[serial] = (*seg, v, e)
            heapq.heappush(heap, (-e, serial))
            serial += 1
        total -= val
    toterr = sum(e[3] for e in entries.values())
    return total, toterr, nev


def integrate_path(f, vertices, rel_tol: float = 1e-12,
                   budget: int = 2_000_000) -> QuadResult:
    """Integrate f along the polyline through `vertices`."""
    vertices = [complex(v) for v in vertices]
    if len(vertices) < 2:
        raise ValueError("need at least two vertices")
    total = 0.0 + 0.0j
    err = 0.0
    nev = 0
    for a, b in zip(vertices[:-1], vertices[1:]):
        v, e, ne = _adaptive_segment(f, a, b, rel_tol)
        total += v
        err += e
        nev += ne
        if nev > budget:
            raise BudgetExceeded(f"{nev} evaluations on polyline")
    return QuadResult(total, err, nev)


def integrate_line(f, c: ContourSpec, auto_extend: bool = True) -> QuadResult:
    """Integrate f over the line Im t = offset, |Re t| <= window.

    The window may be extended automatically (doubling, up to
    max_refinements times) until the geometric tail estimate passes; tail
    samples that fail to decrease raise NoDecay.
    """
    T = c.window
    eta = c.offset
    extensions = 0
    while True:
        a = -T + 1j * eta
        b = T + 1j * eta
        probes_r = np.array([0.8 * T, 0.9 * T, T]) + 1j * eta
        probes_l = -np.array([0.8 * T, 0.9 * T, T]) + 1j * eta
        mr = np.abs(np.asarray(f(probes_r)))
        ml = np.abs(np.asarray(f(probes_l)))
        tail = _tail_bound(mr, T) + _tail_bound(ml, T)
        if np.isfinite(tail):
            val, qerr, nev = _adaptive_segment(f, a, b, c.rel_tol)
            scale = max(abs(val), 1e-300)
            if tail <= 10 * c.rel_tol * scale or not auto_extend:
                return QuadResult(val, qerr + tail, nev)
        elif not auto_extend:
            raise NoDecay("tail samples do not decrease at |Re t| = window")
        extensions += 1
        if extensions > c.max_refinements:
            raise NoDecay("tail estimate failed to pass after window doubling")
        T *= 2.0


def _tail_bound(mags: np.ndarray, T: float) -> float:
    """Geometric tail estimate from samples at 0.8T, 0.9T, T; inf if rising."""
    m1, m2, m3 = float(mags[0]), float(mags[1]), float(mags[2])
    if m3 < 1e-300:
        return 0.0
    if m3 >= m2 or m2 >= m1:
        return np.inf
    rate = np.log(m2 / m3) / (0.1 * T)  # positive decay rate per unit length
    return m3 / rate


def contour_residue(f, center: complex, radius: float,
                    n_start: int = 64, tol: float = 1e-12,
                    n_max: int = 8192) -> complex:
    """(1/2pi i) closed-circle integral of f around `center`.

    Trapezoid rule on the circle -- spectrally accurate for the periodic
    integrand; node count doubles until two runs agree.
    """
    prev = None
    n = n_start
    while n <= n_max:
        theta = 2 * np.pi * np.arange(n) / n
        z = center + radius * np.exp(1j * theta)
        vals = np.asarray(f(z))
        # (1/2pi i) * sum f(z_k) * i r e^{i theta_k} * (2pi/n)
        est = complex(np.mean(vals * (z - center)))
        if prev is not None:
            if abs(est - prev) <= tol * max(1.0, abs(est)):
                return est
        prev = est
        n *= 2
    raise NonConvergent("circle quadrature did not stabilize "
                        f"(last delta at n={n // 2})")
