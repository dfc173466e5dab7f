import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nwl.errors import DomainError
from nwl.kernel import build_kernel
from nwl.solver import WaveProfile
from nwl.spectral import PeriodicGrid, SpectralField
from nwl.symbols import whitham
from nwl.symmetry import (center_crest, criterion_holds, crest_count, crest_structure,
                          full_symmetry_audit, monotone_half_period, moving_plane_lambda0,
                          normalize_trough, reflection_criterion, resolution_floor,
                          symmetry_defect, verify_boundary_point, verify_touching)


def two_crest(x):
    return np.cos(x) + 0.3 * np.cos(2 * x + 0.7) + 0.1 * np.sin(3 * x)


def on_grid(f, n=128):
    return SpectralField.from_function(PeriodicGrid(n), f)


def brute_force_criterion(f, n, refine=10, margin=0.0):
    """Witness axes among ``refine * 2n`` candidates, with analytic reflections."""
    g = PeriodicGrid(n)
    x = np.asarray(g.points)
    lams = -np.pi + np.arange(2 * n * refine) * g.h / (2 * refine)
    hits = []
    for lam in lams:
        off = (x - lam) % (2 * np.pi)
        sel = (off > 1e-12) & (off < np.pi - 1e-12)
        if sel.any() and np.all(f(x[sel]) - f(2 * lam - x[sel]) > margin):
            hits.append(lam)
    return np.array(hits)


def dense_defect(f, n, lo=-np.pi, hi=np.pi):
    """Minimal grid asymmetry over axes by nested dense scans of analytic values."""
    x = np.asarray(PeriodicGrid(n).points)
    for _ in range(4):
        lams = np.linspace(lo, hi, 4001)
        d = np.array([np.max(np.abs(f(x) - f(2 * a - x))) for a in lams])
        i = int(np.argmin(d))
        step = lams[1] - lams[0]
        lo, hi = lams[i] - 2 * step, lams[i] + 2 * step
    return float(d[i]), float(lams[i])


def test_criterion_cosine():
    f = on_grid(np.cos)
    lam = reflection_criterion(f)
    assert lam is not None
    assert criterion_holds(f, -np.pi / 2)
    assert criterion_holds(f, lam)
    assert not criterion_holds(f, np.pi / 2)
    assert reflection_criterion(on_grid(lambda x: 0 * x + 2.0)) is None


@pytest.mark.parametrize("f", [two_crest, lambda x: np.cos(x) + 0.5 * np.cos(2 * x + 0.7),
                               lambda x: np.cos(3 * x), lambda x: np.cos(x) + 0.1 * np.sin(2 * x)])
def test_criterion_matches_fine_oracle(f):
    n = 64
    field = on_grid(f, n)
    lam = reflection_criterion(field)
    hits = brute_force_criterion(f, n)
    assert (lam is None) == (hits.size == 0)
    if lam is not None:
        assert criterion_holds(field, lam)
        # the first coarse witness is within one coarse spacing of the first fine witness
        assert abs(lam - hits[0]) <= np.pi / n + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(-np.pi, np.pi))
def test_criterion_translation_covariant(tau):
    for f in (np.cos, two_crest):
        field = on_grid(f, 128)
        lam = reflection_criterion(field)
        assert lam is not None
        moved = field.shift(tau)
        target = (lam + tau + np.pi) % (2 * np.pi) - np.pi
        assert criterion_holds(moved, target)


def test_lambda0_cosine():
    f, tau = normalize_trough(on_grid(np.cos, 128))
    assert tau == 0.0 and np.argmin(f.values) == 0
    lam_star = reflection_criterion(f)
    # w_lam = -2 sin(lam) sin(x - lam): positive for every lam < 0, so the sup is 0
    assert abs(moving_plane_lambda0(f, lam_star)) <= 1e-6
    assert abs(moving_plane_lambda0(f, -1.0)) <= 1e-6


def test_lambda0_asymmetric_matches_scan():
    n = 128
    f0 = lambda x: np.cos(x) + 0.2 * np.cos(2 * x + 1.2)
    f, tau = normalize_trough(on_grid(f0, n))
    g = lambda x: f0(x - tau)
    assert np.allclose(f.values, g(np.asarray(f.grid.points)), atol=1e-13)
    lam_star = reflection_criterion(f)
    lam0 = moving_plane_lambda0(f, lam_star)
    assert lam0 < -0.1
    x = np.asarray(f.grid.points)

    def holds(lam):
        off = (x - lam) % (2 * np.pi)
        sel = (off > 1e-12) & (off < np.pi - 1e-12)
        return np.all(g(x[sel]) - g(2 * lam - x[sel]) > 0)

    coarse = np.linspace(lam_star, 0, 2001)
    ok = np.array([holds(a) for a in coarse])
    i = int(np.nonzero(ok)[0].max())
    fine = np.linspace(coarse[i], coarse[min(i + 1, 2000)], 2001)
    sup = max(a for a in fine if holds(a))
    assert abs(lam0 - sup) <= 2e-6


def test_lambda0_errors():
    with pytest.raises(DomainError):
        moving_plane_lambda0(on_grid(lambda x: np.cos(x - 1), 64), -1.0)
    f = on_grid(np.cos, 64)
    with pytest.raises(DomainError):
        moving_plane_lambda0(f, 0.5)
    with pytest.raises(DomainError):
        moving_plane_lambda0(on_grid(lambda x: np.cos(x) + 0.5 * np.cos(2 * x + 0.7), 64), -3.0)


def test_defect_examples():
    f = on_grid(lambda x: np.cos(x - 0.3), 64)
    d, axis = symmetry_defect(f)
    assert d <= 1e-12 and axis == pytest.approx(0.3, abs=1e-9)
    f0 = lambda x: np.cos(x) + 0.1 * np.sin(2 * x)
    d, axis = symmetry_defect(on_grid(f0, 64))
    dref, _ = dense_defect(f0, 64)
    assert d > 0.05
    assert d == pytest.approx(dref, abs=1e-6)
    assert symmetry_defect(on_grid(lambda x: np.cos(4 * x + 0.2), 64))[0] <= 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(-64, 64), st.floats(-np.pi, np.pi))
def test_defect_translation_invariant(j, tau):
    f = on_grid(two_crest, 64)
    # the grid defect is exactly invariant under grid translations
    assert symmetry_defect(f.shift(j * f.grid.h))[0] == pytest.approx(symmetry_defect(f)[0], abs=1e-12)
    even = on_grid(lambda x: np.cos(x) + 0.3 * np.cos(2 * x), 64)
    assert symmetry_defect(even.shift(tau))[0] <= 1e-12


def test_defect_branch(whitham_branch_256):
    for p in whitham_branch_256.profiles[::3]:
        assert symmetry_defect(p)[0] <= 1e-10


def test_crest_counts():
    assert crest_count(on_grid(np.cos)) == 1
    # analytic derivative -sin x - 0.6 sin(2x + 0.7) has two zeros: one crest
    assert crest_count(on_grid(lambda x: np.cos(x) + 0.3 * np.cos(2 * x + 0.7))) == 1
    assert crest_count(on_grid(lambda x: np.cos(x) + 0.5 * np.cos(2 * x + 0.7))) == 2
    assert crest_count(on_grid(lambda x: 0 * x + 1.0)) == 0
    cs = crest_structure(on_grid(lambda x: np.cos(2 * x)))
    assert cs.count == 2 and cs.tie


def crest_oracle(f):
    x = np.linspace(-np.pi, np.pi, 200001)[:-1]
    d = np.gradient(f(x), x)
    return int(np.sum((d > 0) & (np.roll(d, -1) <= 0)))


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 0.8), st.floats(0, 2 * np.pi))
def test_crest_count_oracle(a, phase):
    f = lambda x: np.cos(x) + a * np.cos(2 * x + phase)
    # skip degenerate inflection cases where the derivative barely touches zero
    x = np.linspace(-np.pi, np.pi, 4001)
    dd = -np.sin(x) - 2 * a * np.sin(2 * x + phase)
    extrema = np.abs(dd[np.abs(np.diff(np.sign(dd), append=dd[0])) > 0])
    crit = np.abs(np.gradient(dd, x))[np.argsort(np.abs(dd))[:4]]
    if np.min(crit) < 1e-2:
        return
    assert crest_count(on_grid(f, 256)) == crest_oracle(f)


def test_monotone_half_period():
    assert monotone_half_period(on_grid(np.cos))
    two = on_grid(lambda x: np.cos(x) + 0.5 * np.cos(2 * x + 0.7))
    assert not monotone_half_period(center_crest(two)[0])
    with pytest.raises(DomainError):
        monotone_half_period(on_grid(lambda x: np.cos(x - 1)))


def test_touching(mid_wave_512):
    p = mid_wave_512
    s = whitham()
    same = verify_touching(p, p, -0.3, 0.5, symbol=s)
    assert same.verdict == "identically-equal" and same.passed
    bar = WaveProfile.build(s, p.phi.reflect(-0.3), p.c)
    v = verify_touching(p, bar, -0.3, 0.7)
    assert v.verdict == "contradiction-confirmed"
    assert v.details["Lw_quadrature"] > 0
    assert v.details["Lw_quadrature"] == pytest.approx(v.details["Lw_multiplier"], abs=1e-8)
    assert v.details["gp_min_interior"] > 0
    with pytest.raises(DomainError):
        verify_touching(p, WaveProfile.build(s, p.phi.shift(0.1), p.c), -0.3, 0.7)


def test_touching_negative_kernel(mid_wave_512):
    from conftest import oscillatory_symbol
    p = mid_wave_512
    kt = build_kernel(oscillatory_symbol(), PeriodicGrid(4096), 10**5)
    bar = p.phi.reflect(-1.0)
    v = verify_touching(p.phi, bar, -1.0, -0.7, kernel=kt)
    assert v.details["gp_min_interior"] < 0 and v.verdict == "violated"


def test_boundary_shifted_pair(mid_wave_512, whitham_fine_kernel):
    kt, dkt = whitham_fine_kernel
    p = mid_wave_512
    s = whitham()
    a = WaveProfile.build(s, p.phi.shift(0.2), p.c)
    b = WaveProfile.build(s, p.phi.shift(-0.2), p.c)
    v = verify_boundary_point(a, b, 0.0, kt, dkt)
    assert v.verdict == "positive"
    assert v.details["relative_difference"] <= 0.01
    assert v.details["direct"] == pytest.approx(v.details["multiplier"], rel=1e-6)
    assert v.details["w_prime"] == pytest.approx(v.details["w_prime_from_identity"], rel=1e-6)
    assert verify_boundary_point(a, a, 0.0, kt, dkt).verdict == "identically-equal"


def test_boundary_single_mode(whitham_fine_kernel):
    kt, dkt = whitham_fine_kernel
    lam = 0.4
    g = PeriodicGrid(512)
    w = SpectralField.from_function(g, lambda x: np.sin(x - lam))
    zero = SpectralField(g, np.zeros(512))
    v = verify_boundary_point(w, zero, lam, kt, dkt)
    expected = 2 * np.pi * np.sqrt(np.tanh(1.0))
    assert v.passed
    assert v.details["direct"] == pytest.approx(expected, rel=1e-6)
    assert v.details["by_parts"] == pytest.approx(expected, rel=0.01)


def test_audit_branch(whitham_branch_1024):
    for p in whitham_branch_1024.profiles[::6]:
        rep = full_symmetry_audit(p)
        assert rep.verdict == "consistent", rep.to_dict()


def test_audit_gates_non_solutions():
    f = on_grid(two_crest, 128)
    p = WaveProfile.build(whitham(), f, 1.0)
    rep = full_symmetry_audit(p)
    assert rep.verdict == "not-a-solution"
    assert rep.defect > 0.01
    bare = full_symmetry_audit(on_grid(lambda x: np.cos(x) + 0.1 * np.sin(2 * x)))
    assert bare.lambda_star is not None and bare.verdict == "inconsistent"


def test_resolution_floor():
    assert resolution_floor(on_grid(np.cos)) <= 1e-14
    assert resolution_floor(on_grid(lambda x: np.cos(40 * x))) == pytest.approx(1.0)
