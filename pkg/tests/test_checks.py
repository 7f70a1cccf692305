import json

import numpy as np
import pytest

from equidyn import families as fam
from equidyn.checks import (Verdict, bracket_check, check_rng, circulation_check, circulation_entry,
                            constraint_check, constraint_residuals, flow_equivariance_check,
                            gradient_check, norm_conservation_check, permutation_check, run_checks,
                            sample_configurations, unit_loop)
from equidyn.errors import ConfigError
from equidyn.scenario import broken_translation_field, lateral_slip_field

A2 = {"lambda1": "1", "lambda2": "0.5", "mu1": "0", "mu2": "0"}
A3 = {"lambda1": "-1 + rho2", "lambda2": "1 - rho2", "mu1": "0", "mu2": "0"}
ZERO = {"lambda1": "0", "lambda2": "0", "mu1": "0", "mu2": "0"}


def test_zero_field_has_zero_residuals():
    f = fam.se2_family(2, ZERO)
    assert bracket_check(f, 20).max_residual == 0.0
    assert flow_equivariance_check(f, 3, 5).max_residual == 0.0


def test_equivariant_family_passes():
    f = fam.se2_family(2, A3)
    assert bracket_check(f, 30).verdict is Verdict.PASS
    assert flow_equivariance_check(f, 5, 10).verdict is Verdict.PASS


def test_broken_translation_fails_both_routes():
    f = broken_translation_field(fam.se2_family(2, {**A2, "lambda2": "-1"}))
    br = bracket_check(f, 30)
    flow = flow_equivariance_check(f, 5, 10)
    assert br.verdict is Verdict.FAIL and br.max_residual > 1e-2
    assert flow.verdict is Verdict.FAIL and flow.max_residual > 1e-2


def test_generic_se2_is_not_permutation_equivariant():
    assert permutation_check(fam.se2_family(2, A2), 10).verdict is Verdict.FAIL


def test_pepd_is_permutation_equivariant():
    f = fam.se2_pepd_family(3, "rho1 + rho2 - 2", "0.2")
    assert permutation_check(f, 30).verdict is Verdict.PASS


def test_permutation_needs_two_agents():
    with pytest.raises(ConfigError):
        permutation_check(fam.circle_family(1, {"phi1": "1"}))


def test_slip_violates_constraint_by_one():
    f = lateral_slip_field(2)
    # lateral velocity (0, 1) at heading 0 is fully sideways
    assert constraint_residuals(f, [0, 0, 0, 1, 1, 0])[0] == pytest.approx(1.0, abs=1e-15)
    assert constraint_check(f, 10).verdict is Verdict.FAIL


def test_unicycle_family_satisfies_constraint():
    f = fam.unicycle_family(2, {"u1": "rho2", "v1": "sin(al2)", "u2": "1", "v2": "th21"}, strict=False)
    assert constraint_check(f, 30).max_residual <= 1e-12


def test_rel_unicycle_satisfies_constraint():
    f = fam.rel_unicycle_family(2, {"u1": "0.5*sin(da2)", "v1": "1", "u2": "0.2", "v2": "a2"})
    assert constraint_check(f, 30).verdict is Verdict.PASS


def test_gradient_family_has_no_circulation():
    f = fam.gradient_flow_se2("1 - rho2")
    assert abs(circulation_check(f)) <= 1e-4
    assert gradient_check(f, 10).verdict is Verdict.PASS


def test_mu_field_winds_once():
    f = fam.counterexample_mu_field()
    assert circulation_check(f) == pytest.approx(2 * np.pi, abs=1e-4)
    assert circulation_entry(f, 2 * np.pi).verdict is Verdict.PASS
    # locally the Jacobian is symmetric, so the check that only looks locally passes
    assert gradient_check(f, 10).verdict is Verdict.PASS


def test_circulation_loop_through_singularity_is_inconclusive():
    f = fam.counterexample_mu_field()
    entry = circulation_entry(f, loop=unit_loop(radius=0.0))
    assert entry.verdict is Verdict.INCONCLUSIVE


def test_quantum_norm_is_conserved():
    f = fam.quantum_family("1 + delta2", "cos(2*omega) + re_a")
    entry = norm_conservation_check(f, samples=4, t_end=2.0)
    assert entry.verdict is Verdict.PASS and entry.max_residual <= 1e-8


def test_sphere_speed_is_radial():
    f = fam.sphere_so2_family(1, {"phi1": "2 - 4*rho1", "psi1": "50"})
    assert norm_conservation_check(f, samples=10).verdict is Verdict.PASS


def test_norm_check_refuses_non_isometric():
    with pytest.raises(ConfigError):
        norm_conservation_check(fam.rel_line_family(2, 1.0, {"phi1": "1", "phi2": "1", "psi1": "0",
                                                             "psi2": "0"}))


def test_samples_respect_margin():
    f = fam.se2_family(3, {**{f"lambda{i}": "1" for i in (1, 2, 3)}, **{f"mu{i}": "0" for i in (1, 2, 3)}})
    xs = sample_configurations(f, 200, np.random.default_rng(3))
    assert np.all(f.conditioning(xs) >= 0.2)


def test_streams_depend_on_seed_and_name():
    a = check_rng(0, "bracket").random(3)
    assert np.array_equal(a, check_rng(0, "bracket").random(3))
    assert not np.array_equal(a, check_rng(1, "bracket").random(3))
    assert not np.array_equal(a, check_rng(0, "flow_equivariance").random(3))


def test_reports_are_deterministic_and_order_free():
    f = fam.se2_family(2, A3)
    names = ["bracket", "flow_equivariance"]
    serial = run_checks(f, names, seed=7, samples=10, groups=3)
    parallel = run_checks(f, names, seed=7, samples=10, groups=3, workers=2)
    assert serial.to_json() == parallel.to_json()
    assert json.loads(serial.to_json())["verdict"] == "pass"


def test_default_suite_per_family():
    assert [e.name for e in run_checks(lateral_slip_field(1), samples=5, groups=2).entries] == \
        ["bracket", "flow_equivariance", "constraint"]


def test_unknown_check_rejected():
    with pytest.raises(ConfigError):
        run_checks(fam.se2_family(2, A3), ["telepathy"])


def test_report_text_lists_every_check():
    text = run_checks(fam.se2_family(2, A3), ["bracket"], samples=5).to_text()
    assert "bracket" in text and "overall: pass" in text


@pytest.mark.parametrize("build, expected", [
    (lambda: fam.se2_family(2, A3), Verdict.PASS),
    (lambda: fam.circle_family(2, {"phi1": "sin(a)", "phi2": "-sin(a)"}), Verdict.PASS),
    (lambda: broken_translation_field(fam.se2_family(2, A2)), Verdict.FAIL),
    (lambda: fam.circle_family(2, {"phi1": "cos(th1)", "phi2": "0"}, strict=False), Verdict.FAIL),
])
def test_bracket_and_flow_agree(build, expected):
    f = build()
    br = bracket_check(f, 20)
    flow = flow_equivariance_check(f, 4, 10)
    assert br.verdict is flow.verdict is expected
    if expected is Verdict.PASS:
        # both far below their tolerance, by at least a factor of 10
        assert br.max_residual <= br.tolerance / 10
        assert flow.max_residual <= flow.tolerance / 10
