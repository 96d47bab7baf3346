import numpy as np
import pytest

from mdlab.errors import AtPole, OutOfStrip
from mdlab.modulus import Modulus
from mdlab import identities as idn

RNG = np.random.default_rng(11)
MOD = Modulus(0.7)


def test_beta_integral_matches_closed_form():
    num, cl = idn.beta_integral(MOD.Q / 3, MOD.Q / 3, MOD)
    assert abs(num - cl) / abs(cl) < 1e-7


def test_beta_symmetry_and_duality():
    a, b = 0.5, 0.9
    _, cl1 = idn.beta_integral(a, b, MOD)
    _, cl2 = idn.beta_integral(b, a, MOD)
    assert abs(cl1 - cl2) / abs(cl1) < 1e-13
    dual = Modulus(1 / 0.7)
    n1, c1 = idn.beta_integral(a, b, MOD)
    n2, c2 = idn.beta_integral(a, b, dual)
    assert abs(n1 - n2) / abs(n1) < 1e-9
    assert abs(c1 - c2) / abs(c1) < 1e-12


def test_beta_grid():
    Q = MOD.Q.real
    worst = 0.0
    for a in np.linspace(0.25, 0.8, 5):
        for b in np.linspace(0.3, 0.9, 5):
            num, cl = idn.beta_integral(a, b, MOD)
            worst = max(worst, abs(num - cl) / abs(cl))
    assert worst < 1e-6


def test_beta_out_of_strip():
    with pytest.raises(OutOfStrip):
        idn.beta_integral(-0.2, 0.5, MOD)
    with pytest.raises(OutOfStrip):
        idn.beta_integral(1.5, 1.5, MOD)


def test_fourier_plus_at_zero():
    num, cl = idn.fourier_gb(0.0, MOD, "+")
    assert abs(num - cl) / abs(cl) < 1e-8


def test_fourier_unitarity_pair():
    p, _ = idn.fourier_gb(0.3, MOD, "+")
    m, _ = idn.fourier_gb(0.3, MOD, "-")
    assert abs(p * m - 1) < 1e-7
    assert abs(abs(p) - 1) < 1e-8


def test_fourier_product_scan():
    worst = 0.0
    for r in np.linspace(-0.6, 0.6, 20):
        p, cp = idn.fourier_gb(r, MOD, "+")
        m, cm = idn.fourier_gb(r, MOD, "-")
        worst = max(worst, abs(p * m - 1))
    assert worst < 1e-7


def test_rho_funceq_points():
    assert idn.rho_funceq_residual(0.4, MOD) < 1e-10
    assert idn.rho_funceq_residual(-1.1, Modulus(0.6)) < 1e-10


def test_rho_funceq_scan():
    ts = RNG.uniform(-2.5, 2.5, 50)
    worst = max(idn.rho_funceq_residual(t, MOD) for t in ts)
    assert worst < 1e-9


def test_bbinom_symmetry():
    t, tau = 0.9 + 0.1j, 0.2 - 0.3j
    assert abs(idn.bbinom(t, tau, MOD) - idn.bbinom(t, t - tau, MOD)) < 1e-11


def test_bbinom_pole_structure_at_tau_zero():
    # near tau = 0 the coefficient behaves like a simple pole whose
    # residue matches the closed-form residue of the reciprocal function
    from mdlab.quadrature import contour_residue
    from mdlab import specfun as sf
    t = 0.9

    def f(tau):
        return np.exp(idn._bbc_log(np.full_like(tau, t), tau, MOD))

    res = contour_residue(f, 0.0, 0.01)
    want = sf.residue_inv_Gb(0, 0, MOD) / (1j * MOD.b)
    assert abs(res - want) / abs(want) < 1e-9


def test_pascal_point():
    assert idn.pascal_residual(0.9, 0.2, MOD) < 1e-10


def test_pascal_random_sample():
    worst = 0.0
    for _ in range(50):
        t = RNG.uniform(-1.5, 1.5) + 1j * RNG.uniform(-0.3, 0.3)
        tau = RNG.uniform(-1.2, 1.2) + 1j * RNG.uniform(-0.3, 0.3)
        try:
            worst = max(worst, idn.pascal_residual(t, tau, MOD))
        except AtPole:
            continue
    assert worst < 1e-9


def test_bbinom_at_pole_raises():
    with pytest.raises(AtPole):
        idn.bbinom(0.5, -1j, MOD)  # G_b zero at Q + b in the denominator


def test_binomial_scalar_localization():
    assert idn.binomial_expansion_check(0.5, MOD, 2.0, 0) < 1e-10
    assert idn.binomial_expansion_check(0.0, MOD, 2.0, 0) == 0.0


def test_rho_at_pole_raises():
    with pytest.raises(AtPole):
        idn.rho_funceq_residual(0.0, MOD)
