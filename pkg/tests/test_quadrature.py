import numpy as np
import pytest

from mdlab.errors import NoDecay
from mdlab.modulus import Modulus
from mdlab import specfun as sf
from mdlab.quadrature import (ContourSpec, contour_residue, integrate_line,
                              integrate_path)


def test_gaussian_on_real_line():
    q = integrate_line(lambda t: np.exp(-t * t),
                       ContourSpec(offset=0.0, window=9.0, rel_tol=1e-13))
    assert abs(q.value - np.sqrt(np.pi)) < 1e-12


def test_gaussian_polyline_matches_line():
    # an analytic integrand gives the same answer on a dog-leg path
    val = integrate_path(lambda t: np.exp(-t * t),
                         [-9.0, -2.0 - 0.5j, 3.0 + 0.3j, 9.0],
                         rel_tol=1e-13).value
    assert abs(val - np.sqrt(np.pi)) < 1e-11


def test_contour_shift_independence():
    def f(t):
        return np.exp(-t * t) / (t - 2j)

    a = integrate_line(f, ContourSpec(offset=0.5, window=9.0))
    b_ = integrate_line(f, ContourSpec(offset=1.0, window=9.0))
    assert abs(a.value - b_.value) <= 10 * (a.err_est + b_.err_est) + 1e-12


def test_pole_side_changes_value_by_residue():
    # 1/t with a Gaussian damper: crossing the pole flips by 2*pi*i*residue
    def f(t):
        return np.exp(-t * t) / t

    above = integrate_line(f, ContourSpec(offset=0.3, window=9.0)).value
    below = integrate_line(f, ContourSpec(offset=-0.3, window=9.0)).value
    assert abs((below - above) - 2j * np.pi) < 1e-10


def test_no_decay_raises():
    with pytest.raises(NoDecay):
        integrate_line(lambda t: np.ones_like(t),
                       ContourSpec(offset=0.0, window=4.0, max_refinements=3))


def test_circle_simple_pole():
    assert abs(contour_residue(lambda z: 1 / z, 0.0, 0.1) - 1.0) < 1e-13


def test_circle_inv_Gb_residue():
    mod = Modulus(0.7)

    def f(z):
        return 1 / np.array([sf.Gb(mod.Q + w, mod).value for w in z])

    got = contour_residue(f, 0.0, 0.05)
    assert abs(got - (-1 / (2 * np.pi))) < 1e-10


def test_circle_inv_wb_residue():
    mod = Modulus(0.7)

    def f(z):
        return 1 / np.array([sf.wb(w, mod).value for w in z])

    got = contour_residue(f, 0.5j * mod.Q, 0.05)
    want = sf.residue_inv_wb(0, mod)
    assert abs(got - want) < 1e-10


def test_rel_tol_monotone_on_GG1_reference():
    mod = Modulus(0.7)
    b = mod.b

    def f(t):
        lg = sf.log_Gb_batch(mod.Q + 1j * b * t, mod)
        return np.exp(-1j * np.pi * b * b * t * t - lg)

    from mdlab.identities import _fresnel_vertices
    from mdlab.quadrature import integrate_path

    # straight lines cannot handle the quadratic-phase tail; the path dips it
    verts = _fresnel_vertices(mod, "right")
    ref = sf.gb(1.0, mod).value / b
    errs = []
    for tol in (1e-4, 1e-7, 1e-10):
        q = integrate_path(f, verts, rel_tol=tol)
        errs.append(abs(q.value - ref))
    assert errs[2] <= errs[0] + 1e-12
    assert errs[2] < 1e-9
