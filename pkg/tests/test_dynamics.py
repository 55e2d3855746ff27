import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skinlab import hyperbolic as hb
from skinlab.dynamics import (
    DirichletDomain,
    FoldError,
    TestFunction,
    axis_fundamental_arcs,
    bm_sample_domain,
    in_arcs,
    leaf_distance,
    phi_eta_eval,
    phi_integral_check,
    transport_measure,
)
from skinlab.hyperbolic import I, UnitTangent
from skinlab.measures import MeasureError, frame_busemann, skinning_measure

from conftest import A_SCH, B_SCH

ELL = A_SCH.translation_length()


@pytest.fixture(scope="module")
def domain(schottky_table):
    return DirichletDomain.from_table(schottky_table, 2 * ELL + 0.1)


@pytest.fixture(scope="module")
def arcs(axis_a):
    return axis_fundamental_arcs(axis_a, ELL, 1j)


@pytest.fixture(scope="module")
def tf(axis_a, schottky_patterson, arcs):
    return TestFunction.build(axis_a, schottky_patterson, arcs, 0.1, 2.0)


def _frames(n, seed, rmax):
    rng = np.random.default_rng(seed)
    F = hb.frame_from_base_dir(np.full(n, 1j), rng.uniform(0, hb.TWO_PI, n))
    F = hb.frame_flow(F, rng.uniform(0, rmax, n))
    return hb.mat_mul(F, hb.rotation(rng.uniform(0, hb.TWO_PI, n)))


# --- fold ---------------------------------------------------------------------

def test_domain_walls(domain):
    assert len(domain) >= 4
    assert bool(domain.contains(1j))
    assert domain.cap == pytest.approx(14.0)


def test_fold_interior_is_identity(domain):
    F = hb.frame_from_base_dir(np.full(5, 1j), np.linspace(0, 6, 5))
    out, gam, steps, margin = domain.fold_frames(F)
    assert np.array_equal(out, F)
    assert np.all(steps == 0)
    assert np.allclose(gam, [1, 0, 0, 1])


def test_fold_lands_in_domain(domain):
    F = _frames(500, 1, 10.0)
    out, gam, steps, margin = domain.fold_frames(F)
    assert np.all(domain.contains(hb.frame_base(out)))
    assert np.all(margin >= -1e-9)
    # the accumulated isometry carries the input to the output
    assert np.allclose(hb.mat_mul(gam, F), out, atol=1e-8) or np.allclose(hb.mat_mul(hb.mat_inv(gam), out), F, atol=1e-8)


def test_fold_is_orbit_invariant(domain):
    F = _frames(200, 2, 3.0)
    base, _, _, _ = domain.fold_frames(F)
    for g in (A_SCH, B_SCH, A_SCH.inverse(), B_SCH @ A_SCH):
        moved, _, _, _ = domain.fold_frames(hb.mat_mul(g.matrix, F))
        assert np.max(np.abs(moved - base)) < 1e-8


def test_fold_matches_brute_force(domain, schottky_table):
    # after flowing 10, the folded base is the orbit translate nearest the basepoint
    F = hb.frame_flow(_frames(20, 3, 0.5), 10.0)
    out, _, _, _ = domain.fold_frames(F)
    z = hb.frame_base(F)
    T = schottky_table
    best = np.array([np.min(hb.dist_z(hb.mobius_z(T.mats, zk), 1j)) for zk in z])
    assert np.max(np.abs(hb.dist_z(hb.frame_base(out), 1j) - best)) < 1e-8


def test_fold_cap_error(domain):
    F = hb.frame_flow(hb.frame_from_base_dir(np.array([1j]), np.array([0.3])), 15.0)
    with pytest.raises(FoldError) as e:
        domain.fold_frames(F)
    assert e.value.required_radius > 16.0


def test_fold_scalar_api(domain):
    v = UnitTangent(tuple(hb.frame_flow(hb.frame_from_base_dir(1j, 0.4), 6.0)))
    w, g = domain.fold(v)
    assert bool(domain.contains(w.base.z))
    assert hb.dist(w.base, I) <= hb.dist(v.base, I) + 1e-12


# --- geodesic intervals ---------------------------------------------------------

def test_geodesic_interval_matches_scan(domain, schottky_patterson):
    rng = np.random.default_rng(4)
    P = schottky_patterson
    xm = P.theta[rng.integers(0, len(P), 60)]
    xp = P.theta[rng.integers(0, len(P), 60)]
    keep = hb.angle_gap(xm, xp) > 1e-3
    xm, xp = xm[keep], xp[keep]
    lo, hi = domain.geodesic_interval(xm, xp)
    ts = np.linspace(-8, 8, 801)
    for k in range(len(xm)):
        F = hb.frame_from_hopf(np.full(ts.shape, xm[k]), np.full(ts.shape, xp[k]), ts, 1j)
        inside = domain.wall_margin(hb.frame_base(F)) > 1e-7
        pred = (ts > lo[k] + 1e-6) & (ts < hi[k] - 1e-6)
        clear = np.abs(domain.wall_margin(hb.frame_base(F))) > 1e-6
        assert np.array_equal(inside[clear], pred[clear])


def test_domain_sampler_properties(schottky_patterson, domain):
    m = bm_sample_domain(schottky_patterson, domain, 20000, 5)
    assert m.kind == "tangent"
    assert np.all(m.weights > 0)
    assert np.all(domain.contains(hb.frame_base(m.atoms), 1e-9))
    m2 = bm_sample_domain(schottky_patterson, domain, 20000, 5)
    assert np.array_equal(m.atoms, m2.atoms) and np.array_equal(m.weights, m2.weights)


# --- transport -----------------------------------------------------------------

def test_transport(axis_a, schottky_patterson, domain, arcs):
    sk = skinning_measure(axis_a, schottky_patterson)
    sig = sk.restrict(in_arcs(arcs, sk.plus))
    d = schottky_patterson.delta
    t0 = transport_measure(sig, 0.0, domain)
    folded, _, _, _ = domain.fold_frames(sig.atoms)
    assert np.array_equal(t0.atoms, folded)
    for t in (1.0, 3.5):
        tr = transport_measure(sig, t, domain, d, scale=True)
        assert len(tr) == len(sig)
        assert abs(tr.total / (sig.total * math.exp(d * t)) - 1) < 1e-12
        assert transport_measure(sig, t, domain).total == pytest.approx(sig.total, rel=1e-14)
    with pytest.raises(MeasureError):
        transport_measure(sig, 1.0, domain, scale=True)


# --- Omega arcs -----------------------------------------------------------------

def test_fundamental_arcs_cover_one_period(axis_a, schottky_patterson, arcs):
    # A moves the feet by one translation length: the images of the arcs are disjoint
    sk = skinning_measure(axis_a, schottky_patterson)
    inside = in_arcs(arcs, sk.plus)
    moved = in_arcs(arcs, hb.mobius_theta(A_SCH.matrix, sk.plus))
    assert inside.sum() > 0
    assert not np.any(inside & moved & (hb.angle_gap(sk.plus, hb.mobius_theta(A_SCH.matrix, sk.plus)) > 1e-9))
    half = axis_fundamental_arcs(axis_a, ELL, 1j, 0.5)
    assert np.all(in_arcs(arcs, sk.plus[in_arcs(half, sk.plus)]))


# --- test functions ----------------------------------------------------------------

def test_phi_at_atoms_is_h(tf):
    W = tf.sigma.atoms[:50]
    assert np.allclose(phi_eta_eval(tf, W), tf.h[:50], rtol=0, atol=0)
    assert np.all(tf.h > 0)


def test_phi_zero_off_box(tf, schottky_patterson, arcs):
    W = tf.sigma.atoms[:50]
    assert np.all(phi_eta_eval(tf, hb.frame_flow(W, 2 * tf.eta)) == 0)
    assert np.all(phi_eta_eval(tf, hb.frame_flow(W, 0.5 * tf.eta)) > 0)
    P = schottky_patterson
    out = P.theta[~in_arcs(arcs, P.theta)][:50]
    F = hb.frame_toward(np.full(len(out), 1j), out)
    assert np.all(phi_eta_eval(tf, F) == 0)


def test_leaf_distance_matches_scalar(tf):
    W = tf.sigma.atoms[:5]
    P = tf.P
    for k in range(5):
        w = UnitTangent(tuple(W[k]))
        vm = P.theta[100 + k]
        G = hb.frame_from_endpoints(vm, w.plus.theta)
        V = hb.frame_flow(G, -frame_busemann(W[k], G))
        v = UnitTangent(tuple(V))
        assert leaf_distance(W[k], vm, 1j) == pytest.approx(hb.hamenstadt_dist(w, w, v), rel=1e-8)


def test_build_errors(axis_a, schottky_patterson, arcs):
    with pytest.raises(MeasureError):
        TestFunction.build(axis_a, schottky_patterson, arcs, 0.1, 1.0, 2.0)
    with pytest.raises(MeasureError):
        TestFunction.build(axis_a, schottky_patterson, arcs, 0.0, 2.0)


def _leaf_probes(F, n, seed, spread):
    rng = np.random.default_rng(seed)
    k = rng.integers(0, len(F.sigma), n)
    W = F.sigma.atoms[k]
    vm = F.P.theta[rng.integers(0, len(F.P), n)]
    G = hb.frame_from_endpoints(vm, hb.frame_plus(W))
    s = rng.uniform(-spread, spread, n)
    return hb.frame_flow(G, s - frame_busemann(W, G))


def test_phi_flow_scaling_law(axis_a, schottky_patterson, arcs):
    # phi_{eta, R e^t, Omega} o g^{-t} = e^{-delta t} phi_{eta, R, g^t Omega} on the
    # body pushed out by t
    t = 1.5
    P = schottky_patterson
    F1 = TestFunction.build(axis_a, P, arcs, 0.1, 2.0 * math.exp(t))
    F2 = TestFunction.build(axis_a.neighbourhood(t), P, arcs, 0.1, 2.0)
    V = _leaf_probes(F2, 100, 6, 0.15)
    lhs = phi_eta_eval(F1, hb.frame_flow(V, -t))
    rhs = math.exp(-P.delta * t) * phi_eta_eval(F2, V)
    assert np.count_nonzero(rhs) > 10
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=0)


def test_support_monotone(axis_a, schottky_patterson, arcs, tf):
    # the support of phi grows with eta and R (the values h shrink)
    big = TestFunction.build(axis_a, schottky_patterson, arcs, 0.2, 4.0)
    V = _leaf_probes(big, 400, 7, 0.25)
    small = phi_eta_eval(tf, V) > 0
    large = phi_eta_eval(big, V) > 0
    assert small.sum() > 0 and large.sum() > small.sum()
    assert np.all(large[small])


def test_empty_omega(axis_a, schottky_patterson):
    F = TestFunction.build(axis_a, schottky_patterson, [(0.75, 0.05)], 0.1, 2.0)
    assert F.total == 0
    assert phi_integral_check(F, 1000, 0) == (0.0, 0.0, 0.0)
    assert np.all(phi_eta_eval(F, hb.frame_toward(np.array([1j]), np.array([0.75]))) == 0)


def test_integral_identity(tf):
    lhs, rhs, se = phi_integral_check(tf, 200_000, 11)
    assert se > 0
    assert abs(lhs - rhs) <= 3 * se


def test_integral_additivity(axis_a, schottky_patterson, arcs, tf):
    halves = [[(a, 0.5 * w) for a, w in arcs], [(a + 0.5 * w, 0.5 * w) for a, w in arcs]]
    parts = [TestFunction.build(axis_a, schottky_patterson, h, 0.1, 2.0) for h in halves]
    assert parts[0].total + parts[1].total == pytest.approx(tf.total, rel=1e-12)
    res = [phi_integral_check(p, 100_000, 12 + k) for k, p in enumerate(parts)]
    whole = phi_integral_check(tf, 100_000, 14)
    se = math.sqrt(res[0][2] ** 2 + res[1][2] ** 2 + whole[2] ** 2)
    assert abs(res[0][0] + res[1][0] - whole[0]) <= 3 * se


@settings(max_examples=20, deadline=None)
@given(s=st.floats(-0.09, 0.09), k=st.integers(0, 40))
def test_phi_constant_along_flow_inside_box(tf, s, k):
    w = tf.sigma.atoms[k % len(tf.sigma)]
    assert phi_eta_eval(tf, hb.frame_flow(w, s))[0] == tf.h[k % len(tf.sigma)]
