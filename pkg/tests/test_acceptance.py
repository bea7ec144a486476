"""End-to-end checks of the solver's quantitative guarantees.

Each test pins either a frozen reference number with an explicit tolerance or
a structural property of the method (spectral laws, conservation, equivalence
of discretizations), and the slow ones also enforce their wall-clock budget.
"""

import time

import numpy as np
import pytest

from bfecc_maxwell.analysis import (
    accuracy_order,
    bfecc_symbol_for,
    measured_phase_speed,
    phase_speed,
    stability_scan,
    symbol,
)
from bfecc_maxwell.bfecc import BfeccStep, bfecc_step
from bfecc_maxwell.diagnostics import h_divergence
from bfecc_maxwell.grid import build_uniform
from bfecc_maxwell.harness import (
    ExperimentConfig,
    refine_experiment,
    run_experiment,
)
from bfecc_maxwell.pml import PmlRunner, build_pml
from bfecc_maxwell.schemes import (
    FieldState1,
    FieldState2,
    SchemeSpec,
    StencilGeometry,
    step_2d,
)

# Frozen one-dimensional error table: sum of the two component RMS errors at
# T = 0.6 for the corrected centered scheme, rows N = 64..2048.  The N = 256
# entry of the lam = 0.38 column is 6.93e-4: its neighbors (2.80e-3, 1.73e-4)
# sit almost exactly a factor of four apart on each side, and no second-order
# error sequence can stay within 5% of all three rows unless the middle one
# is near the geometric mean recorded here.
TABLE_1D = {
    0.38: (1.11e-2, 2.80e-3, 6.93e-4, 1.73e-4, 4.33e-5, 1.08e-5),
    0.98: (2.50e-2, 6.41e-3, 1.62e-3, 4.00e-4, 1.00e-4, 2.51e-5),
    1.7: (5.58e-2, 1.41e-2, 3.58e-3, 9.05e-4, 2.26e-4, 5.67e-5),
}

# Frozen window-field RMS errors for the smoothed least-squares scheme on the
# uniform grid, sizes 20/40/80 at T = 2.5.
TABLE_2D_UNIFORM = (5.843e-2, 8.160e-3, 1.269e-3)


def uniform_state2(n, seed):
    rng = np.random.default_rng(seed)
    ones = np.ones((n, n))
    return FieldState2(rng.standard_normal((n, n)), rng.standard_normal((n, n)),
                       rng.standard_normal((n, n)), ones, ones)


def greedy_multiset_distance(a, b):
    """Largest pairing distance between two complex multisets of equal size."""
    a = list(a)
    worst = 0.0
    for z in b:
        j = int(np.argmin([abs(z - w) for w in a]))
        worst = max(worst, abs(z - a.pop(j)))
    return worst


def test_periodic_wave_error_table_1d():
    start = time.perf_counter()
    for lam, column in TABLE_1D.items():
        errors = []
        for n, ref in zip((64, 128, 256, 512, 1024, 2048), column):
            cfg = ExperimentConfig(experiment="periodic1d", scheme="cd",
                                   bfecc=True, n=n, dt_ratio=lam, t_final=0.6)
            out = run_experiment(cfg)
            errors.append(out["l2_sum"])
            assert out["l2_sum"] == pytest.approx(ref, rel=0.05), (lam, n)
        for i in range(len(errors) - 1):
            order = np.log2(errors[i] / errors[i + 1])
            assert order == pytest.approx(2.0, abs=0.05), (lam, i)
    assert time.perf_counter() - start < 30.0


def test_stability_boundaries():
    start = time.perf_counter()
    # corrected centered scheme in 1D: marginal at 1.73, lost by 1.8
    assert stability_scan("cd", 1, 1.73, 256).max_radius <= 1.0 + 1e-12
    assert stability_scan("cd", 1, 1.8, 256).max_radius > 1.05

    # the same loss of stability in the time domain
    n = 64
    dx = 1.0 / n
    step = BfeccStep(SchemeSpec("cd", 1.8 * dx))
    rng = np.random.default_rng(0)
    st = FieldState1(rng.standard_normal(n), rng.standard_normal(n))
    sup0 = max(np.max(np.abs(st.E)), np.max(np.abs(st.H)))
    grew = False
    for _ in range(2000):
        st = bfecc_step(step, st, dx)
        sup = max(np.max(np.abs(st.E)), np.max(np.abs(st.H)))
        if sup >= 10.0 * sup0:
            grew = True
            break
    assert grew

    # the averaging scheme holds on to ratios up to 2
    assert stability_scan("lf", 1, 1.95, 256).max_radius <= 1.0 + 1e-12
    assert stability_scan("lf", 1, 2.05, 256).max_radius > 1.0

    # 2D: every sampled ratio pair inside the circle of radius sqrt(3) is stable
    checked = 0
    for lx in np.linspace(0.3, 1.7, 5):
        for ly in np.linspace(0.3, 1.7, 5):
            if lx * lx + ly * ly <= 3.0:
                sc = stability_scan("cd", 2, (lx, ly), 64)
                assert sc.max_radius <= 1.0 + 1e-12, (lx, ly)
                checked += 1
    assert checked >= 10
    assert time.perf_counter() - start < 10.0


@pytest.mark.parametrize("kind,theta", [("cd", 0.0), ("lf", 0.0), ("theta", 0.5)])
def test_eigenvalue_amplification_law(kind, theta):
    n = 16
    h = 1.0 / n
    for dims, lam in ((1, 0.9), (2, (0.7, 0.7))):
        modes = range(n) if dims == 1 else ((k, l) for k in range(n) for l in range(n))
        for k in modes:
            hh = h if dims == 1 else (h, h)
            ql = np.linalg.eigvals(symbol(kind, dims, k, hh, lam, theta=theta))
            law = (1.0 + 0.5 * (1.0 - np.abs(ql) ** 2)) * ql
            qb = np.linalg.eigvals(
                bfecc_symbol_for(kind, dims, k, hh, lam, theta=theta))
            assert greedy_multiset_distance(law, qb) < 1e-10, (dims, k)


@pytest.mark.parametrize("kind,theta", [("cd", 0.0), ("lf", 0.0), ("theta", 0.5)])
def test_step_equals_symbol_on_every_mode(kind, theta):
    n = 16
    # 1D: the update of every Fourier coefficient is the 2x2 symbol
    dx = 1.0 / n
    lam = 0.9
    step = BfeccStep(SchemeSpec(kind, lam * dx, theta=theta))
    for seed in (0, 1):
        rng = np.random.default_rng(seed)
        st = FieldState1(rng.standard_normal(n), rng.standard_normal(n))
        out = bfecc_step(step, st, dx)
        fin = (np.fft.fft(st.E), np.fft.fft(st.H))
        fout = (np.fft.fft(out.E), np.fft.fft(out.H))
        scale = max(np.max(np.abs(f)) for f in fin)
        for k in range(n):
            Q = bfecc_symbol_for(kind, 1, k, dx, lam, theta=theta)
            want = Q @ np.array([fin[0][k], fin[1][k]])
            got = np.array([fout[0][k], fout[1][k]])
            assert np.max(np.abs(want - got)) <= 1e-12 * scale, k

    # 2D: same bridge with the 3x3 symbol
    g = build_uniform(n, n, ((0.0, 1.0), (0.0, 1.0)), "periodic")
    lam2 = (0.7, 0.7)
    step2 = BfeccStep(SchemeSpec(kind, lam2[0] * g.dx, theta=theta))
    for seed in (0, 1, 2):
        st = uniform_state2(n, seed)
        out = bfecc_step(step2, st, g)
        fin = [np.fft.fft2(a) for a in (st.Hx, st.Hy, st.Ez)]
        fout = [np.fft.fft2(a) for a in (out.Hx, out.Hy, out.Ez)]
        scale = max(np.max(np.abs(f)) for f in fin)
        for k in range(n):
            for l in range(n):
                Q = bfecc_symbol_for(kind, 2, (k, l), (g.dx, g.dy), lam2,
                                     theta=theta)
                want = Q @ np.array([f[k, l] for f in fin])
                got = np.array([f[k, l] for f in fout])
                assert np.max(np.abs(want - got)) <= 1e-12 * scale, (k, l)


def test_symbol_order_lift():
    start = time.perf_counter()
    assert accuracy_order("cd", 1, 0.5, bfecc=True) >= 2.9
    assert accuracy_order("lf", 1, 0.5, bfecc=True) >= 2.9
    assert accuracy_order("cd", 1, 0.5, bfecc=False) == pytest.approx(2.0, abs=0.1)
    assert time.perf_counter() - start < 1.0


def test_periodic_wave_error_table_2d():
    start = time.perf_counter()
    orders = {}
    for variant in "abcd":
        cfg = ExperimentConfig(experiment="periodic2d", scheme="ls_theta",
                               bfecc=True, n=20, dt_ratio=0.25, t_final=2.5,
                               grid_variant=variant, levels=3)
        sweep = refine_experiment(cfg)
        ez_errors = [r["l2_ez"] for r in sweep["runs"][:3]]
        orders[variant] = [np.log2(ez_errors[i] / ez_errors[i + 1])
                           for i in range(2)]
        if variant == "a":
            for err, ref in zip(ez_errors, TABLE_2D_UNIFORM):
                assert err == pytest.approx(ref, rel=0.10)
    assert min(orders["a"]) >= 2.4
    assert min(orders["b"]) >= 2.0
    assert min(orders["c"]) >= 2.0
    assert min(orders["d"]) >= 2.5
    assert time.perf_counter() - start < 120.0


def test_divergence_is_conserved_by_centered_updates():
    n = 16
    g = build_uniform(n, n, ((0.0, 1.0), (0.0, 1.0)), "periodic")
    for seed in (0, 1):
        for use_bfecc, lam in ((False, 0.1), (True, 0.5)):
            st = uniform_state2(n, seed)
            div0 = h_divergence(st.Hx, st.Hy, g.dx, g.dy)
            spec = SchemeSpec("cd", lam * g.dx)
            step = BfeccStep(spec)
            for _ in range(100):
                st = bfecc_step(step, st, g) if use_bfecc else step_2d(spec, st, g)
            div1 = h_divergence(st.Hx, st.Hy, g.dx, g.dy)
            assert np.max(np.abs(div1 - div0)) <= 1e-13, (seed, use_bfecc)


def test_averaging_update_maps_divergence_to_neighbor_mean():
    n = 24
    g = build_uniform(n, n, ((0.0, 1.0), (0.0, 1.0)), "periodic")
    st = uniform_state2(n, 7)
    div0 = h_divergence(st.Hx, st.Hy, g.dx, g.dy)
    out = step_2d(SchemeSpec("lf", 0.5 * g.dx), st, g)
    div1 = h_divergence(out.Hx, out.Hy, g.dx, g.dy)
    mean4 = 0.25 * (np.roll(div0, 1, 0) + np.roll(div0, -1, 0)
                    + np.roll(div0, 1, 1) + np.roll(div0, -1, 1))
    assert np.max(np.abs(div1 - mean4)) <= 1e-13


def test_scattering_self_convergence():
    start = time.perf_counter()
    for shifted in (False, True):
        cfg = ExperimentConfig(experiment="scatter_cylinder", scheme="ls_theta",
                               bfecc=True, n=20, dt_ratio=1.0, t_final=2.5,
                               levels=3, reference_n=160,
                               shift_to_boundary=shifted)
        sweep = refine_experiment(cfg)
        errors = sweep["errors"]
        orders = sweep["orders"]
        assert all(errors[i + 1] < errors[i] for i in range(len(errors) - 1)), shifted
        assert np.mean(orders) >= 1.5, shifted
        assert orders[-1] >= 1.8, shifted

    # long-run stability of the conforming variant at four times the duration
    cfg = ExperimentConfig(experiment="scatter_cylinder", scheme="ls_theta",
                           bfecc=True, n=80, dt_ratio=1.0, t_final=12.0,
                           shift_to_boundary=True)
    out = run_experiment(cfg)
    assert out["sup_ez_physical"] <= 10.0 * cfg.tfsf_amplitude
    assert time.perf_counter() - start < 300.0


def test_absorbing_collar_swallows_a_pulse():
    n = 80
    g = build_uniform(n, n, ((0.0, 1.0), (0.0, 1.0)), "bounded")
    dt = 0.5 * g.dx
    runner = PmlRunner(g, SchemeSpec("ls_theta", dt), build_pml(g, dt, thickness=10))
    z = np.zeros((n, n))
    ez = z.copy()
    ez[n // 2, n // 2] = 1.0
    st = FieldState2(z.copy(), z.copy(), ez, np.ones((n, n)), np.ones((n, n)))
    interior = slice(10, n - 10)

    def interior_energy(s):
        return float(np.sum(s.Hx[interior, interior] ** 2
                            + s.Hy[interior, interior] ** 2
                            + s.Ez[interior, interior] ** 2))

    peak = interior_energy(st)
    t = 0.0
    for _ in range(400):
        st = runner.step(st, t)
        t += dt
        peak = max(peak, interior_energy(st))
    assert interior_energy(st) < 1e-3 * peak


def test_inactive_collar_reduces_to_interior_scheme():
    n = 80
    g = build_uniform(n, n, ((0.0, 1.0), (0.0, 1.0)), "bounded")
    dt = 0.5 * g.dx
    spec = SchemeSpec("ls_theta", dt)
    geom = StencilGeometry(g)
    w = geom.cached_weights()
    runner = PmlRunner(g, spec, build_pml(g, dt, thickness=10, sigma_max=0.0),
                       geometry=geom, weights=w)
    step = BfeccStep(spec)
    a = uniform_state2(n, 3)
    b = FieldState2(a.Hx.copy(), a.Hy.copy(), a.Ez.copy(), a.eps, a.mu)
    for k in range(5):
        a = runner.step(a, k * dt)
        b = bfecc_step(step, b, g, geometry=geom, weights=w)
    scale = max(np.max(np.abs(b.Hx)), np.max(np.abs(b.Hy)), np.max(np.abs(b.Ez)))
    diff = max(np.max(np.abs(a.Hx - b.Hx)), np.max(np.abs(a.Hy - b.Hy)),
               np.max(np.abs(a.Ez - b.Ez)))
    assert diff <= 1e-15 * scale


@pytest.mark.parametrize("ls_kind,ref_kind,theta", [("ls_cd", "cd", 0.0),
                                                    ("ls_theta", "theta", 0.8)])
def test_least_squares_reduction_on_uniform_grids(ls_kind, ref_kind, theta):
    n = 24
    g = build_uniform(n, n, ((0.0, 1.0), (0.0, 1.0)), "periodic")
    dt = 0.4 * g.dx
    a = uniform_state2(n, 11)
    b = FieldState2(a.Hx.copy(), a.Hy.copy(), a.Ez.copy(), a.eps, a.mu)
    ls_step = BfeccStep(SchemeSpec(ls_kind, dt))
    ref_step = BfeccStep(SchemeSpec(ref_kind, dt, theta=theta))
    geom = StencilGeometry(g)
    w = geom.cached_weights()
    for _ in range(5):
        a = bfecc_step(ls_step, a, g, geometry=geom, weights=w)
        b = bfecc_step(ref_step, b, g)
        scale = max(np.max(np.abs(b.Hx)), np.max(np.abs(b.Hy)),
                    np.max(np.abs(b.Ez)))
        diff = max(np.max(np.abs(a.Hx - b.Hx)), np.max(np.abs(a.Hy - b.Hy)),
                   np.max(np.abs(a.Ez - b.Ez)))
        assert diff <= 1e-13 * scale


def test_dispersion_formula_matches_propagation():
    predicted = phase_speed(0.5, 0.5)
    measured = measured_phase_speed(0.5, 0.5, steps=100)
    assert abs(predicted - measured) <= 1e-6
    assert abs(phase_speed(0.5, 1e-6) - 1.0) <= 1e-9
    assert abs(phase_speed(0.5, 1e-5) - 1.0) <= 1e-9
