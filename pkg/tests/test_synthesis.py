import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lurecons import AgentDynamics, SectorBounds
from lurecons.errors import Infeasible, InvalidSector, NoneFeasible, SingularX, VariantMismatch
from lurecons.graph import graph_matrices, random_connected_graph, spectral_data
from lurecons.lmi import (SynthesisProblem, analyze_fixed_gain, assemble, gain_feasible,
                          max_epsilon, solve, verify_synthesis)
from lurecons.lmi.synthesis import is_feasible, lyapunov_form

REFERENCE_CONSTRAINED = [[-2.3825, -20.68]]
REFERENCE_UNCERTAIN = [[-1.1309, -2.2191]]


def robot_problem(sigma1=0.75, eps=0.4):
    return SynthesisProblem(AgentDynamics([[0.0]], [[1.0]]), 3.0, 3.0,
                            SectorBounds.uniform(sigma1, 1.0, 1), eps)


def osc_problem(oscillator, s1, s2, eps=0.1, l2=3.0, lN=3.0):
    return SynthesisProblem(oscillator, l2, lN, SectorBounds.uniform(s1, s2, 2), eps)


def test_variant_resolution(oscillator):
    assert osc_problem(oscillator, 0.7, 1.3).variant == "thm3"
    b = SectorBounds((0.3, 0.6), (1.0, 1.0))
    assert SynthesisProblem(oscillator, 3, 3, b, 0.1).variant == "thm2"
    with pytest.raises(VariantMismatch):
        SynthesisProblem(oscillator, 3, 3, b, 0.1, "thm3")
    with pytest.raises(VariantMismatch):
        SynthesisProblem(oscillator, 3, 3, SectorBounds.uniform(0.7, 1.3, 2), 0.1, "thm2")
    with pytest.raises(ValueError):
        SynthesisProblem(oscillator, 3, 1, b, 0.1)


def test_equal_sector_rejected_before_solve():
    with pytest.raises(InvalidSector):
        SectorBounds.uniform(1.0, 1.0, 1)


def test_assemble_dimensions(oscillator):
    sys = assemble(osc_problem(oscillator, 0.3, 1.0))
    shapes = {l.name: l.expr.shape for l in sys.lmis}
    assert shapes["decay[lambda=3]"] == (4, 4)
    assert shapes["coupling"] == (4, 4)
    sp = sys.space
    assert sp.blocks["Y"][1].shape[1:] == (1, 2)
    assert sp.blocks["Z"][1].shape[1:] == (2, 2)
    scalar = assemble(robot_problem())
    assert {l.expr.shape for l in scalar.lmis if l.name.startswith("decay")} == {(2, 2)}
    two = assemble(osc_problem(oscillator, 0.3, 1.0, l2=1.0, lN=3.0))
    assert sum(l.name.startswith("decay") for l in two.lmis) == 2


def test_thm2_keeps_x_diagonal(oscillator):
    b = SectorBounds((0.3, 0.5), (1.0, 1.2))
    # single-input oscillator admits no diagonal X; that is reported, not raised
    assert solve(SynthesisProblem(oscillator, 3, 3, b, 0.05)).status == "infeasible"
    fully_actuated = AgentDynamics(oscillator.A, np.eye(2))
    r = solve(SynthesisProblem(fully_actuated, 3, 3, b, 0.05))
    assert r.feasible
    assert r.X[0, 1] == 0.0 and r.X[1, 0] == 0.0
    assert verify_synthesis(r).passed


def test_robot_scalar_solve():
    r = solve(robot_problem())
    assert r.feasible and r.K[0, 0] < 0
    # analytic boundary of the LMI: K <= -eps / (2 lambda sigma1)
    assert r.K[0, 0] <= -0.4 / (2 * 3 * 0.75) + 1e-9
    assert verify_synthesis(r).max_residual <= 1e-7
    assert r.certificate.feasible
    assert gain_feasible(robot_problem(), [[-0.1]])
    assert not gain_feasible(robot_problem(), [[-0.05]])


def test_robot_global_sector_infeasible():
    r = solve(robot_problem(sigma1=0.0))
    assert r.status == "infeasible"
    with pytest.raises(Infeasible):
        r.require()


def test_oscillator_uncertain_feasible(oscillator):
    r = solve(osc_problem(oscillator, 0.7, 1.3))
    assert r.feasible
    rep = verify_synthesis(r)
    assert rep.passed and rep.max_residual <= 1e-7
    assert np.all(np.diag(r.W) > 0)
    np.testing.assert_array_equal(r.K, np.linalg.solve(r.X.T, r.Y.T).T)


def test_solve_deterministic(oscillator):
    p = osc_problem(oscillator, 0.7, 1.3)
    np.testing.assert_array_equal(solve(p, certify=False).K, solve(p, certify=False).K)


def test_verify_tampered(oscillator):
    r = solve(osc_problem(oscillator, 0.3, 1.0), certify=False)
    r.Y = 10 * r.Y
    assert verify_synthesis(r).max_residual > 0
    assert not verify_synthesis(r).passed


def test_verify_singular_x(oscillator):
    r = solve(osc_problem(oscillator, 0.7, 1.3), certify=False)
    r.X = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]])
    with pytest.raises(SingularX):
        verify_synthesis(r)


def test_verify_all_graph_eigenvalues(oscillator):
    rng = np.random.default_rng(5)
    for _ in range(4):
        sd = spectral_data(graph_matrices(random_connected_graph(rng, int(rng.integers(3, 7)))))
        p = SynthesisProblem.from_spectrum(oscillator, sd, SectorBounds.uniform(0.5, 1.5, 2), 0.05)
        r = solve(p, certify=False)
        assert r.feasible
        assert verify_synthesis(r, lambdas=sd.nonzero_eigenvalues).passed


def test_analyze_reference_gains(oscillator):
    a = analyze_fixed_gain(REFERENCE_CONSTRAINED, osc_problem(oscillator, 0.3, 1.0))
    assert a.feasible and a.max_residual <= 1e-7
    assert np.all(np.linalg.eigvalsh(a.P) > 0) and np.all(np.diag(a.Psi) > 0)
    b = analyze_fixed_gain(REFERENCE_UNCERTAIN, osc_problem(oscillator, 0.7, 1.3))
    assert b.feasible and b.max_residual <= 1e-7
    for lam in (3.0,):
        assert np.linalg.eigvalsh(lyapunov_form(osc_problem(oscillator, 0.7, 1.3), lam, b.K, b.P, b.Psi))[-1] <= 1e-7


def test_analyze_zero_gain_infeasible(oscillator):
    assert not analyze_fixed_gain([[0.0, 0.0]], osc_problem(oscillator, 0.7, 1.3)).feasible


def stable_scalar_problem(eps=0.1):
    return SynthesisProblem(AgentDynamics([[-0.5]], [[1.0]]), 1.0, 10.0,
                            SectorBounds.uniform(0.1, 1.0, 1), eps)


def test_max_epsilon_contract():
    p = stable_scalar_problem()
    e = max_epsilon(p, (1e-3, 10.0))
    assert is_feasible(p.with_epsilon(e))
    assert not is_feasible(p.with_epsilon(e + 1e-3))


def test_max_epsilon_range_top_and_empty():
    # a positive lower sector bound lets a large gain buy any decay rate
    assert max_epsilon(robot_problem(), (1e-3, 5.0)) == 5.0
    with pytest.raises(NoneFeasible):
        max_epsilon(robot_problem(sigma1=0.0), (1e-3, 1.0))


@settings(max_examples=8)
@given(st.floats(0.05, 0.99))
def test_epsilon_monotone(frac):
    p = stable_scalar_problem()
    assert is_feasible(p.with_epsilon(0.999 * frac))
