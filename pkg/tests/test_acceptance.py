"""Acceptance suite: one ``criterion`` line per item in the terminal summary.

Run with ``pytest tests/test_acceptance.py``; the summary section
"acceptance criteria" prints PASS or FAIL per criterion. A criterion passes
only when every test carrying its key passes.
"""

import numpy as np
import pytest

from equidyn.checks import (bracket_check, circulation_check, constraint_residuals,
                            flow_equivariance_check, gradient_check, permutation_check,
                            run_checks)
from equidyn.checks import _propose
from equidyn.errors import DomainViolation
from equidyn.integrate import IntegratorConfig, integrate, quotient_observable
from equidyn.invariants import frame, frame_arrays, frame_distance
from equidyn.lie import (Configuration, Scenario, act, quaternion_rank_check,
                         random_group_element, random_su2, reduce_angle)
from equidyn.numdiff import directional_derivative
from equidyn.quantum import quantum_invariants, takagi
from equidyn.scenario import EXAMPLE_SETS, load_scenario

criterion = pytest.mark.criterion

SUITE_SETS = ("A", "B", "C", "D", "E", "unicycle", "quantum", "extras")
SUITE = [name for s in SUITE_SETS for name in EXAMPLE_SETS[s]]


def _run(name, **changes):
    spec = load_scenario(name)
    cfg = spec.integrator.replace(**changes) if changes else spec.integrator
    traj = integrate(spec.family, spec.initial, cfg)
    assert traj.completed, traj.reason
    return spec, traj


def _series(name, var, **changes):
    _, traj = _run(name, **changes)
    q = quotient_observable(traj)
    assert not q.truncated
    return q.times, q[var]


# ---- 1: equivariance suite ----------------------------------------------

@criterion("1", "bracket <= 1e-4 and flow <= 1e-6 on every bundled family; broken fixtures fail")
@pytest.mark.slow
@pytest.mark.parametrize("name", SUITE)
def test_equivariance_suite(name):
    f = load_scenario(name).family
    br = bracket_check(f, 50)
    flow = flow_equivariance_check(f, 20, 50)
    print(f"{name}: bracket {br.max_residual:.2e}, flow {flow.max_residual:.2e} {flow.detail}")
    assert br.max_residual <= 1e-4
    assert flow.max_residual <= 1e-6


@criterion("1", "bracket <= 1e-4 and flow <= 1e-6 on every bundled family; broken fixtures fail")
@pytest.mark.parametrize("name", EXAMPLE_SETS["broken"])
def test_negative_controls_fail(name):
    spec = load_scenario(name)
    report = run_checks(spec.family, [c.name for c in spec.checks], samples=50, groups=20)
    print(report.to_text())
    assert not report.passed


@criterion("1", "bracket <= 1e-4 and flow <= 1e-6 on every bundled family; broken fixtures fail")
def test_suite_is_seed_reproducible():
    f = load_scenario("A11").family
    a = run_checks(f, ["bracket", "flow_equivariance"], seed=3, samples=20, groups=5)
    b = run_checks(f, ["bracket", "flow_equivariance"], seed=3, samples=20, groups=5, workers=2)
    assert a.to_json() == b.to_json()


# ---- 2, 3: planar limits ------------------------------------------------

@criterion("2", "A3: |rho2(20) - 1| <= 1e-3")
def test_a3_converges_to_unit_distance():
    _, rho = _series("A3", "rho2")
    print(f"A3 rho2(20) = {rho[-1]:.12f}")
    assert abs(rho[-1] - 1) <= 1e-3


@criterion("3", "A11: limiting rho2 = 0.75 +- 1e-2")
def test_a11_converges_to_average_distance():
    _, rho = _series("A11", "rho2")
    print(f"A11 rho2(40) = {rho[-1]:.12f}")
    assert abs(rho[-1] - 0.75) <= 1e-2


# ---- 4: relativistic line ------------------------------------------------

def _proper_time_rates(name):
    """rdot by central differences of r along the field, at every accepted state."""
    spec, traj = _run(name)
    f = spec.family
    assert f.params["phi1"].source == "r" and f.params["phi2"].source == "1"

    def proper_time(coords):
        return frame_arrays(f.scenario, f._blocks(coords), f.c).values["r"][..., None]

    states = traj.states
    rdot = directional_derivative(proper_time, states, f.field_coords(states))[..., 0]
    r = proper_time(states)[..., 0]
    return rdot, r, r, np.ones_like(r)  # phi1 = r, phi2 = 1


@criterion("4", "B1-B3: rdot = r (phi1 - phi2) within 1e-5, |r(15) - 1| <= 1e-3")
@pytest.mark.parametrize("name", ["B1", "B2", "B3"])
def test_rel_line_rate_as_stated(name):
    rdot, r, phi1, phi2 = _proper_time_rates(name)
    gap = np.abs(rdot - r * (phi1 - phi2)).max()
    print(f"{name}: max |rdot - r(phi1 - phi2)| = {gap:.3e}")
    assert gap <= 1e-5


@criterion("4", "B1-B3: rdot = r (phi1 - phi2) within 1e-5, |r(15) - 1| <= 1e-3")
@pytest.mark.parametrize("name", ["B1", "B2", "B3"])
def test_rel_line_rate_with_derived_sign(name):
    # with Z = X2 - X1, d(r^2)/dt = 2 (phi2 - phi1) r^2 for these fields
    rdot, r, phi1, phi2 = _proper_time_rates(name)
    gap = np.abs(rdot - r * (phi2 - phi1)).max()
    print(f"{name}: max |rdot - r(phi2 - phi1)| = {gap:.3e}")
    assert gap <= 1e-5


@criterion("4", "B1-B3: rdot = r (phi1 - phi2) within 1e-5, |r(15) - 1| <= 1e-3")
@pytest.mark.parametrize("name", ["B1", "B2", "B3"])
def test_rel_line_converges_to_one(name):
    _, r = _series(name, "r")
    print(f"{name}: r(15) = {r[-1]:.10f}")
    assert abs(r[-1] - 1) <= 1e-3


# ---- 5: circle -----------------------------------------------------------

def _angle_gap(a, b):
    return abs(float(reduce_angle(a - b)))


@criterion("5", "C2: both angles -> pi within 1e-2; C3: |th2 - th1| -> pi within 1e-2")
def test_c2_meets_at_pi():
    _, traj = _run("C2")
    th1, th2 = traj.final
    print(f"C2 final angles: {th1:.6f}, {th2:.6f}")
    assert _angle_gap(th1, np.pi) <= 1e-2 and _angle_gap(th2, np.pi) <= 1e-2


@criterion("5", "C2: both angles -> pi within 1e-2; C3: |th2 - th1| -> pi within 1e-2")
def test_c3_spreads_to_antipodes():
    _, d = _series("C3", "d21")
    print(f"C3 final |th2 - th1| = {abs(d[-1]):.6f}")
    assert abs(abs(d[-1]) - np.pi) <= 1e-2


# ---- 6: sphere -----------------------------------------------------------

@criterion("6", "D3 rho constant to 1e-6; D4 rho(10) = 0.5 +- 1e-3; E2 rho -> 2 +- 1e-2")
def test_d3_circular_orbit():
    _, rho = _series("D3", "rho1")
    print(f"D3 rho drift {np.ptp(rho):.2e}")
    assert np.ptp(rho) <= 1e-6


@criterion("6", "D3 rho constant to 1e-6; D4 rho(10) = 0.5 +- 1e-3; E2 rho -> 2 +- 1e-2")
def test_d4_radius_settles():
    _, rho = _series("D4", "rho1")
    print(f"D4 rho(10) = {rho[-1]:.10f}")
    assert abs(rho[-1] - 0.5) <= 1e-3


@criterion("6", "D3 rho constant to 1e-6; D4 rho(10) = 0.5 +- 1e-3; E2 rho -> 2 +- 1e-2")
def test_e2_target_radius():
    _, traj = _run("E2")
    q = quotient_observable(traj)
    final = (q["rho1"][-1], q["rho2"][-1])
    print(f"E2 final radii {final}")
    assert max(abs(v - 2) for v in final) <= 1e-2


# ---- 7: gradient certification ------------------------------------------

@criterion("7", "gradient flows symmetric to 1e-4; mu field circulation 2 pi +- 1e-4 yet equivariant")
def test_gradient_flow_is_symmetric():
    entry = gradient_check(load_scenario("gradient").family, 50, tol=1e-4)
    print(f"gradient symmetry residual {entry.max_residual:.2e}")
    assert entry.max_residual <= 1e-4


@criterion("7", "gradient flows symmetric to 1e-4; mu field circulation 2 pi +- 1e-4 yet equivariant")
def test_mu_field_is_closed_not_exact():
    f = load_scenario("mu_field").family
    value = circulation_check(f)
    print(f"mu field circulation {value:.10f}")
    assert abs(value - 2 * np.pi) <= 1e-4
    assert bracket_check(f, 50).max_residual <= 1e-4
    assert flow_equivariance_check(f, 20, 50).max_residual <= 1e-6


# ---- 8: unicycle ---------------------------------------------------------

@criterion("8", "unicycle: constraint <= 1e-12 at every step, rho2 eventually decreasing, rho2(40) < 0.1")
def test_unicycle_reaches_partner():
    spec, traj = _run("unicycle", record_every=1)
    worst = float(constraint_residuals(spec.family, traj.states).max())
    rho = quotient_observable(traj)["rho2"]
    rising = np.nonzero(np.diff(rho) >= 0)[0]
    settle = traj.times[rising[-1] + 1] if rising.size else 0.0
    print(f"unicycle: constraint {worst:.2e}, rho2 {rho[0]:.4f} -> {rho[-1]:.4f}, "
          f"decreasing from t = {settle:g}")
    assert worst <= 1e-12
    assert settle < traj.times[-1] / 2
    assert rho[-1] < 0.1


# ---- 9: quantum ----------------------------------------------------------

@criterion("9", "Takagi reconstruction and singular values <= 1e-10; invariants <= 1e-8; norm drift <= 1e-8")
def test_takagi_on_random_symmetric_matrices(rng):
    M = rng.normal(size=(200, 2, 2)) + 1j * rng.normal(size=(200, 2, 2))
    worst_rec = worst_sv = 0.0
    for S in (M + np.swapaxes(M, -1, -2)) / 2:
        t = takagi(S)
        # singular values from the eigenvalues of S S^H, independent of the factorization route
        oracle = np.sqrt(np.clip(np.sort(np.linalg.eigvalsh(S @ S.conj().T))[::-1], 0, None))
        worst_rec = max(worst_rec, np.abs(t.reconstruct() - S).max())
        worst_sv = max(worst_sv, np.abs([t.delta1 - oracle[0], t.delta2 - oracle[1]]).max())
    print(f"takagi: reconstruction {worst_rec:.2e}, singular values {worst_sv:.2e}")
    assert worst_rec <= 1e-10 and worst_sv <= 1e-10


@criterion("9", "Takagi reconstruction and singular values <= 1e-10; invariants <= 1e-8; norm drift <= 1e-8")
def test_quantum_invariants_under_su2(rng):
    X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    base = np.array(quantum_invariants(X))
    worst = 0.0
    for _ in range(100):
        g = random_su2(rng)
        moved = np.array(quantum_invariants(g @ X @ g.T))
        diff = np.abs(moved - base)
        diff[0] = min(diff[0] % np.pi, np.pi - diff[0] % np.pi)  # omega lives modulo pi
        worst = max(worst, diff.max())
    print(f"quantum invariants under SU(2): {worst:.2e}")
    assert worst <= 1e-8


@criterion("9", "Takagi reconstruction and singular values <= 1e-10; invariants <= 1e-8; norm drift <= 1e-8")
def test_quantum_norm_drift():
    _, traj = _run("quantum")
    norms = np.linalg.norm(traj.states, axis=-1)
    drift = np.abs(norms - norms[0]).max()
    print(f"quantum Frobenius norm drift over [0, {traj.times[-1]:g}]: {drift:.2e}")
    assert traj.times[-1] == pytest.approx(10.0)
    assert drift <= 1e-8


# ---- 10: structural properties ------------------------------------------

@criterion("10", "frames invariant to 1e-8; PEPD permutation <= 1e-10; quaternion rank; RK4 order in [12, 20]")
@pytest.mark.parametrize("scenario", list(Scenario))
def test_frames_invariant_under_actions(scenario, rng):
    n = 1 if scenario is Scenario.SU2_QUANTUM else 3
    worst, used = 0.0, 0
    while used < 100:
        x = Configuration(scenario, n, _propose(scenario, n, 1, rng, 1.0)[0])
        try:
            moved = act(random_group_element(scenario, rng), x)
        except DomainViolation:
            continue  # local action (relativistic unicycle) left the chart
        a, b = frame(x), frame(moved)
        worst = max(worst, frame_distance(a, b) / (1 + np.abs(a.values).max()))
        used += 1
    print(f"{scenario.value}: frame residual {worst:.2e}")
    assert worst <= 1e-8


@criterion("10", "frames invariant to 1e-8; PEPD permutation <= 1e-10; quaternion rank; RK4 order in [12, 20]")
def test_pepd_permutation_exact():
    entry = permutation_check(load_scenario("pepd3").family, 50)
    print(f"PEPD permutation residual {entry.max_residual:.2e}")
    assert entry.max_residual <= 1e-10


@criterion("10", "frames invariant to 1e-8; PEPD permutation <= 1e-10; quaternion rank; RK4 order in [12, 20]")
def test_quaternion_rank(rng):
    v = rng.normal(size=(100, 4))
    assert all(quaternion_rank_check(x) for x in v)


@criterion("10", "frames invariant to 1e-8; PEPD permutation <= 1e-10; quaternion rank; RK4 order in [12, 20]")
def test_rk4_order_factor():
    f = load_scenario("A3").family
    x0 = Configuration("SE2_PLANE", 2, [0.0, 0.0, 0.5, 0.2])
    ref = integrate(f, x0, IntegratorConfig(scheme="rk45_adaptive", t_end=5.0, rtol=1e-12,
                                            atol=1e-14, dt_max=0.01)).final
    errs = [np.abs(integrate(f, x0, IntegratorConfig(t_end=5.0, dt=dt)).final - ref).max()
            for dt in (0.2, 0.1, 0.05)]
    factors = [a / b for a, b in zip(errs, errs[1:])]
    print(f"RK4 errors {errs}, factors {factors}")
    assert all(12 <= q <= 20 for q in factors)
