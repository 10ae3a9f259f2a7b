import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from lurecons.errors import DimensionMismatch
from lurecons.graph import complete_graph, graph_matrices
from lurecons.robots import (RobotTeam, body_inputs, kinematic_matrix, real_inputs, recover_input,
                             simulate_robots)
from lurecons.sector import ChannelBank

angles = st.floats(-10, 10)
vals = st.floats(-50, 50)


@given(angles, vals, vals, st.floats(0.1, 5))
def test_body_inputs_invert_kinematics(theta, u1, u2, r):
    v, w = body_inputs(np.array([theta]), np.array([[u1, u2]]), r)
    back = kinematic_matrix(theta, r) @ np.array([v[0], w[0]])
    np.testing.assert_allclose(back, [u1, u2], atol=1e-9 * (1 + abs(u1) + abs(u2)))


@given(angles, vals, vals, st.floats(0.1, 5))
def test_real_input_recovery(theta, u1, u2, r):
    v, w = body_inputs(np.array(theta), np.array([u1, u2]), r)
    assume(abs(float(v)) > 1e-3)
    v2, phi = real_inputs(v, w)
    u = recover_input(theta, v2, phi, r)
    np.testing.assert_allclose(u, [u1, u2], atol=1e-9 * max(1.0, abs(u1), abs(u2), abs(float(w)) / abs(float(v))))


def test_phi_convention():
    _, phi = real_inputs(np.array([0.0, 1e-13, 0.0, -1.0]), np.array([0.0, -1e-13, 2.0, 0.0]))
    assert phi[0] == 0.0 and phi[1] == 0.0
    assert phi[2] == pytest.approx(math.pi / 2)
    assert phi[3] == pytest.approx(math.pi)


def _team(gain=-0.1):
    mats = graph_matrices(complete_graph(3))
    bank = ChannelBank.saturation(3, [3.0, 3.0], [4.0, 4.0])
    return RobotTeam(mats, 2.0, gain * np.eye(2), bank)


def test_robot_consensus_and_bounds():
    tr = simulate_robots(_team(), [0, 1, 3.2, 0, 1.6, 3.1], [0.0, 2.0, -1.0], 40.0, 1e-2)
    assert tr.relative_consensus_error() <= 1e-3
    assert np.abs(tr.y).max() <= 3.0
    assert np.abs(tr.y).max() == 3.0  # the clamp is active at the start
    # heading points follow the single-integrator law exactly
    dpos = np.diff(tr.pos, axis=0) / 1e-2
    np.testing.assert_allclose(dpos[0], tr.u[0], rtol=0.05, atol=1e-3)
    assert len(tr.columns()) == len(next(tr.rows()))


def test_robot_theta_integrated():
    tr = simulate_robots(_team(), [0, 1, 3.2, 0, 1.6, 3.1], [0.0, 2.0, -1.0], 2.0, 1e-2)
    dtheta = np.diff(tr.theta, axis=0) / 1e-2
    np.testing.assert_allclose(dtheta[-1], tr.omega[-2:].mean(axis=0), rtol=0.05, atol=1e-4)


def test_robot_validation():
    with pytest.raises(DimensionMismatch):
        simulate_robots(_team(), [0, 1, 2], [0, 0, 0], 1.0)
    mats = graph_matrices(complete_graph(3))
    with pytest.raises(ValueError):
        RobotTeam(mats, 0.0, np.eye(2), ChannelBank.identity(3, 2))
    with pytest.raises(DimensionMismatch):
        RobotTeam(mats, 1.0, np.eye(2), ChannelBank.identity(3, 1))
