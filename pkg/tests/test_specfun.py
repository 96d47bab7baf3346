import numpy as np
import pytest

from mdlab.errors import AtPole, Degenerate, WrongRegime
from mdlab.modulus import Modulus
from mdlab import specfun as sf
from mdlab.quadrature import contour_residue

RNG = np.random.default_rng(7)


def sample_strip(mod, n, margin=0.15, imax=3.0):
    Q = mod.Q.real
    re = RNG.uniform(margin, Q - margin, n)
    im = RNG.uniform(-imax, imax, n)
    return re + 1j * im


@pytest.mark.parametrize("bval", [0.6, 0.7, 0.85])
def test_shift_relation_b(bval):
    mod = Modulus(bval)
    z = sample_strip(mod, 60, margin=0.1 + bval)
    lhs = sf.log_Gb_batch(z + mod.b, mod)
    rhs = sf.log_Gb_batch(z, mod) + np.log1p(-np.exp(2j * np.pi * mod.b * z))
    scale = np.maximum(np.abs(lhs), 1.0)
    assert np.max(np.abs(np.exp(lhs) - np.exp(rhs))
                  / np.maximum(np.abs(np.exp(lhs)), np.abs(np.exp(rhs)))) < 1e-11


def test_shift_relation_inverse_b():
    mod = Modulus(0.7)
    z = sample_strip(mod, 60, margin=0.1)
    lhs = np.exp(sf.log_Gb_batch(z + 1 / mod.b, mod))
    rhs = np.exp(sf.log_Gb_batch(z, mod)
                 + np.log1p(-np.exp(2j * np.pi * z / mod.b)))
    assert np.max(np.abs(lhs - rhs)
                  / np.maximum(np.abs(lhs), np.abs(rhs))) < 1e-11


def test_reflection():
    mod = Modulus(0.7)
    z = sample_strip(mod, 60)
    tot = sf.log_Gb_batch(z, mod) + sf.log_Gb_batch(mod.Q - z, mod)
    want = np.exp(1j * np.pi * z * (z - mod.Q))
    assert np.max(np.abs(np.exp(tot) - want) / np.abs(want)) < 1e-11


def test_self_duality():
    b = 0.7
    z = sample_strip(Modulus(b), 30)
    a = sf.log_Gb_batch(z, Modulus(b))
    c = sf.log_Gb_batch(z, Modulus(1 / b))
    assert np.max(np.abs(np.exp(a) - np.exp(c)) / np.abs(np.exp(a))) < 1e-12


def test_conjugation():
    mod = Modulus(0.7)
    z = sample_strip(mod, 40)
    a = np.exp(sf.log_Gb_batch(z, mod))
    c = np.exp(sf.log_Gb_batch(np.conj(z), mod))
    want = np.exp(1j * np.pi * np.conj(z) * (mod.Q - np.conj(z))) * c
    assert np.max(np.abs(np.conj(a) - want) / np.abs(a)) < 1e-11


def test_special_value_center():
    mod = Modulus(0.7)
    # the square at the center of the reflection is a known closed form
    got = sf.Gb(mod.Q / 2, mod).value
    want_sq = np.exp(1j * np.pi * (mod.Q / 2) * (-mod.Q / 2))
    assert abs(got * got - want_sq) / abs(want_sq) < 1e-12


def test_asymptotics_deep_imaginary():
    mod = Modulus(0.7)
    z = 0.9 + 8j
    up = sf.log_Gb(z, mod)
    assert abs(np.exp(up.value) - mod.zeta_bar) < 1e-12
    dn = sf.log_Gb(np.conj(z), mod)
    want = np.exp(1j * np.pi * np.conj(z) * (np.conj(z) - mod.Q)
                  + np.log(mod.zeta))
    assert abs(np.exp(dn.value) - want) / abs(want) < 1e-10


def test_gb_unit_modulus_and_wb_unit_modulus():
    mod = Modulus(0.7)
    x = np.exp(RNG.uniform(-3, 3, 25))
    vals = np.array([sf.gb(v, mod).value for v in x])
    assert np.max(np.abs(np.abs(vals) - 1)) < 1e-12
    xr = RNG.uniform(-4, 4, 25)
    wv = np.exp(sf.log_wb_batch(xr.astype(complex), mod))
    assert np.max(np.abs(np.abs(wv) - 1)) < 1e-12


def test_wb_shift_relation():
    mod = Modulus(0.7)
    x = RNG.uniform(-2, 2, 30) + 1j * RNG.uniform(-0.2, 0.2, 30)
    lhs = np.exp(sf.log_wb_batch(x + 1j * mod.b, mod))
    rhs = 2 * np.exp(sf.log_wb_batch(x, mod)) \
        * np.sin(np.pi * mod.b * (mod.Q / 2 - 1j * x))
    assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) < 1e-11


def test_wb_reflection():
    mod = Modulus(0.7)
    x = RNG.uniform(-2, 2, 20) + 1j * RNG.uniform(-0.3, 0.3, 20)
    lhs = np.exp(sf.log_wb_batch(x, mod) + sf.log_wb_batch(-x, mod))
    assert np.max(np.abs(lhs - 1)) < 1e-11


def test_wb_dual_shift():
    mod = Modulus(0.7)
    x = RNG.uniform(-1.5, 1.5, 20).astype(complex)
    lhs = np.exp(sf.log_wb_batch(x + 1j / mod.b, mod))
    rhs = 2 * np.exp(sf.log_wb_batch(x, mod)) \
        * np.sin(np.pi / mod.b * (mod.Q / 2 - 1j * x))
    assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) < 1e-10


def test_small_x_limit():
    mod = Modulus(0.7)
    got = sf.limit_xGb(mod)
    assert abs(got.value - 1 / (2 * np.pi)) < 1e-9


@pytest.mark.parametrize("nm", [(0, 0), (1, 0), (0, 1), (1, 1)])
def test_residue_inv_Gb_vs_contour(nm):
    n, m = nm
    mod = Modulus(0.7)
    center = n * mod.b + m / mod.b

    def f(z):
        return np.array([1 / sf.Gb(mod.Q + w, mod).value for w in z])

    # zeros at Q+1/b and Q+2b sit 0.0286 apart at b=0.7: keep circles tight
    got = contour_residue(f, center, 0.012)
    want = sf.residue_inv_Gb(n, m, mod)
    assert abs(got - want) / abs(want) < 1e-9


@pytest.mark.parametrize("n", [0, 1])
def test_residue_inv_wb_vs_contour(n):
    mod = Modulus(0.7)
    center = 1j * (0.5 * mod.Q + n * mod.b)

    def f(z):
        return 1 / np.array([sf.wb(w, mod).value for w in z])

    got = contour_residue(f, center, 0.012)
    want = sf.residue_inv_wb(n, mod)
    assert abs(got - want) / abs(want) < 1e-9


def test_product_formula_complex_modulus():
    mod = Modulus(np.exp(1j * np.pi / 8))
    for z in (0.4 + 0.1j, 0.9, 1.3 - 0.2j):
        a = sf.gb_product(z, mod)
        c = sf.Gb(z, mod)
        tol = 10 * (a.err_est + c.err_est) + 1e-12
        assert abs(a.value - c.value) / abs(c.value) < max(tol, 1e-10)


def test_integral_rep_log_gb():
    mod = Modulus(0.7)
    for x in (0.5, 1.0, 2.3):
        got = sf.log_gb_integral(x, mod)
        want = np.log(sf.gb(x, mod).value)
        d = got.value - want
        d -= 2j * np.pi * np.round(d.imag / (2 * np.pi))
        assert abs(d) < 1e-10


def test_pole_raises():
    mod = Modulus(0.7)
    with pytest.raises(AtPole):
        sf.log_Gb(0.0, mod)
    with pytest.raises(AtPole):
        sf.log_Gb(-mod.b - 1 / mod.b, mod)


def test_degenerate_residue_rational():
    mod = Modulus(np.sqrt(0.5))  # b^2 rational: residue formula degenerates
    with pytest.raises(Degenerate):
        sf.residue_inv_Gb(2, 0, mod)


def test_product_formula_wrong_regime():
    mod = Modulus(0.7)  # Im b^2 = 0: the double product does not converge
    with pytest.raises(WrongRegime):
        sf.gb_product(0.5, mod)


def test_pole_lattice_distance():
    mod = Modulus(0.7)
    lat = sf.gb_pole_lattice(mod)
    assert lat.distance(-2 * mod.b - 3 / mod.b) < 1e-12
    assert lat.distance(mod.Q / 2) > 0.3
    zlat = sf.gb_zero_lattice(mod)
    assert zlat.distance(mod.Q + mod.b) < 1e-12
