import numpy as np
import pytest

from dyadica.ad import (
    ADMatrix,
    apply,
    bdef_entry,
    compose_certificate,
    empirical_norm,
    gram_matrix,
)
from dyadica.dyadic import DyadicCube, LatticeWindow
from dyadica.errors import PreconditionError
from dyadica.molecules import MoleculeParams, wavelet_family
from dyadica.params import BESOV, SpaceParams, ad_region, derived_indices
from dyadica.seq import CoeffField
from dyadica.wavelets import WaveletSystem, daubechies_filter


def test_bdef_values():
    q = DyadicCube(1, 0, (0,))
    assert bdef_entry(q, q, 2.0, 1.0, 1.0) == 1.0
    qf = DyadicCube(1, 1, (0,))
    r = DyadicCube(1, 0, (1,))
    # distance term 2, scale gap (1/2)^E
    assert bdef_entry(qf, r, 3.0, 1.5, 9.9) == pytest.approx(2.0 ** -3 * 2.0 ** -1.5)
    # swapping exchanges E and F roles
    assert bdef_entry(r, qf, 3.0, 9.9, 1.5) == pytest.approx(bdef_entry(qf, r, 3.0, 1.5, 9.9))


def test_bdef_monotone_in_distance():
    D, E, F = 2.0, 1.0, 1.0
    q = DyadicCube(1, 2, (0,))
    vals = [bdef_entry(q, DyadicCube(1, 2, (k,)), D, E, F) for k in range(0, 10)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_apply_identity_and_delta():
    win = LatticeWindow(1, 0, 2, (0,), (2,))
    rng = np.random.default_rng(0)
    t = CoeffField.random(win, 2, rng, density=0.5, complex_values=True)
    out = apply(ADMatrix.identity(), t)
    assert set(out.cubes()) == set(t.cubes())
    for q in t.cubes():
        assert np.allclose(out.get(q), t.get(q))

    B = ADMatrix.model(2.0, 1.0, 1.0)
    r0 = DyadicCube(1, 1, (1,))
    delta = CoeffField(win, 1, {r0: [2.0]})
    out2 = apply(B, delta)
    for q in win.all_cubes():
        assert out2.get(q)[0] == pytest.approx(2.0 * bdef_entry(q, r0, 2.0, 1.0, 1.0))


def test_apply_linearity():
    win = LatticeWindow(1, 0, 2, (0,), (1,))
    rng = np.random.default_rng(1)
    B = ADMatrix.model(2.0, 1.0, 1.0)
    t = CoeffField.random(win, 1, rng, density=0.6)
    u = CoeffField.random(win, 1, rng, density=0.6)
    lhs = apply(B, t.plus(u.scaled(2.0)))
    rhs = apply(B, t).plus(apply(B, u).scaled(2.0))
    for q in win.all_cubes():
        assert np.allclose(lhs.get(q), rhs.get(q), atol=1e-13)


def test_certificate_verify():
    win = LatticeWindow(1, 0, 3, (0,), (1,))
    B = ADMatrix.model(2.0, 1.0, 1.5)
    rep = B.verify_certificate(win, samples=500)
    assert rep["fitted_C"] == pytest.approx(1.0, abs=1e-12)


def test_compose_certificate_inside():
    sp = SpaceParams(BESOV, 0.0, 0.0, 2.0, 2.0)
    di = derived_indices(sp, 1, 0.0)
    region = ad_region(di, 1)
    c = region.point_inside(0.5)
    win = LatticeWindow(1, 0, 4, (0,), (1,))
    out = compose_certificate(c, c, region, window=win, samples=2000)
    assert out["inside"]
    assert out["certificate"] == c
    assert np.isfinite(out["fitted_C"]) and out["fitted_C"] > 0


def test_compose_certificate_boundary_rejected():
    sp = SpaceParams(BESOV, 0.0, 0.0, 2.0, 2.0)
    di = derived_indices(sp, 1, 0.0)
    region = ad_region(di, 1)
    good = region.point_inside(0.5)
    boundary = (region.d_min, region.e_min + 0.5, region.f_min + 0.5)
    with pytest.raises(PreconditionError):
        compose_certificate(good, boundary, region)


def test_empirical_norm_identity():
    sp = SpaceParams(BESOV, 0.0, 0.0, 2.0, 2.0)
    rep = empirical_norm(ADMatrix.identity(), sp, depths=(2, 3, 4))
    assert all(abs(e - 1.0) < 1e-9 for e in rep["estimates"])


def test_empirical_norm_inside_region_bounded():
    # generic-data estimates of a bounded operator plateau across depths
    sp = SpaceParams(BESOV, 0.0, 0.0, 1.0, 1.0)
    di = derived_indices(sp, 1, 0.0)
    region = ad_region(di, 1)
    D, E, F = region.point_inside(0.1)
    rep = empirical_norm(ADMatrix.model(D, E, F), sp, depths=(3, 4, 5))
    assert rep["randomized_growth"] <= 1.2, rep


def test_empirical_norm_violated_E_grows():
    # the vertical-stack adversarial component exposes the decay violation
    sp = SpaceParams(BESOV, 0.0, 0.0, 1.0, 1.0)
    di = derived_indices(sp, 1, 0.0)
    region = ad_region(di, 1)
    D = region.d_min + 0.1
    E = region.e_min - 0.5
    F = region.f_min + 0.1
    rep = empirical_norm(ADMatrix.model(D, E, F), sp, depths=(3, 5))
    assert rep["adversarial_growth"] >= 2.0, rep
    # and the same component stays much flatter inside the region
    rep_in = empirical_norm(ADMatrix.model(*region.point_inside(0.1)), sp, depths=(3, 5))
    assert rep_in["adversarial_growth"] < rep["adversarial_growth"]


# ---------------------------------------------------------------------------
# gram matrices

def _orthonormal_gram_setup(order=4, j_max=2):
    sys = WaveletSystem(1, daubechies_filter(order), resolution=12)
    win = LatticeWindow(1, 0, j_max, (0,), (2,))
    params = MoleculeParams(3.0, float(order - 1), 3.0, 1.0)
    fam = wavelet_family(sys, (1,), params)
    return sys, win, fam


def test_gram_orthonormal_family_is_identity():
    _, win, fam = _orthonormal_gram_setup()
    rep = gram_matrix(fam, fam, win, n=1, quad_points=4096)
    for (q, p), v in rep["entries"].items():
        target = 1.0 if q == p else 0.0
        assert abs(v - target) < 1e-6, (q, p, v)


def test_gram_bound_holds_with_single_constant():
    _, win, fam = _orthonormal_gram_setup(j_max=3)
    rep = gram_matrix(fam, fam, win, n=1, quad_points=2048)
    assert rep["n_pairs"] >= 900
    assert np.isfinite(rep["fitted_C"])
    # diagonal entries are 1 with bound 1, so C >= 1, and the decay bound
    # keeps the constant moderate
    assert 1.0 - 1e-6 <= rep["fitted_C"] < 50.0


def test_gram_constant_grows_when_D_overstated():
    sys, win, fam = _orthonormal_gram_setup(j_max=2)
    p_lo = MoleculeParams(3.0, 3.0, 3.0, 1.0)
    p_hi = MoleculeParams(6.0, 3.0, 6.0, 1.0)  # claims faster decay
    fam_lo = wavelet_family(sys, (1,), p_lo)
    fam_hi = wavelet_family(sys, (1,), p_hi)
    rep_lo = gram_matrix(fam_lo, fam_lo, win, n=1, quad_points=1024)
    rep_hi = gram_matrix(fam_hi, fam_hi, win, n=1, quad_points=1024)
    assert rep_hi["fitted_C"] >= rep_lo["fitted_C"]


def test_apply_block_diagonal_on_components():
    # the scalar matrix acts identically and independently on each component
    win = LatticeWindow(1, 0, 2, (0,), (1,))
    rng = np.random.default_rng(9)
    B = ADMatrix.model(2.0, 1.0, 1.0)
    t = CoeffField.random(win, 3, rng, density=0.6, complex_values=True)
    full = apply(B, t)
    for comp in range(3):
        t_comp = CoeffField(win, 1)
        for q, v in t.items():
            t_comp.set(q, [v[comp]])
        out_comp = apply(B, t_comp)
        for q in win.all_cubes():
            assert np.allclose(out_comp.get(q)[0], full.get(q)[comp], atol=1e-13)


def test_empirical_norm_adversarial_monotone():
    # the structural fields (shared delta at the coarsest cube, stacks) make
    # the adversarial estimates nondecreasing across nested depths
    sp = SpaceParams(BESOV, 0.0, 0.0, 2.0, 2.0)
    di = derived_indices(sp, 1, 0.0)
    region = ad_region(di, 1)
    rep = empirical_norm(ADMatrix.model(*region.point_inside(0.3)), sp,
                         depths=(2, 3, 4), seed=3)
    est = rep["adversarial_estimates"]
    assert all(b >= a - 1e-9 for a, b in zip(est, est[1:]))
