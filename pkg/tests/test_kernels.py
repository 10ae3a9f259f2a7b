import os
import subprocess
import sys

import numpy as np
import pytest

from lurecons import kernels
from lurecons.sector import ChannelBank


def test_backend_flag_consistent():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.BACKEND in kernels.available_backends()


def test_env_forces_python():
    env = dict(os.environ, LURECONS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import lurecons; print(lurecons.KERNEL_BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("backend", sorted(kernels.available_backends()))
def test_kernel_contract(backend):
    # scalar decay s' = -s written as F = 0, G = -1, H = 1 with identity channel
    F, G, H = np.zeros((1, 1)), -np.ones((1, 1)), np.ones((1, 1))
    traj, done = kernels.integrate_lure(F, G, H, ChannelBank.identity(1, 1), [1.0], 0.01, 100, backend=backend)
    assert done == 100 and traj.shape == (101, 1)
    assert abs(traj[-1, 0] - np.exp(-1.0)) < 1e-9
    traj, done = kernels.integrate_lure(F, -G, H, ChannelBank.identity(1, 1), [1.0], 0.5, 200,
                                        blowup=1e6, backend=backend)
    assert done < 200
    assert np.all(np.isnan(traj[done + 1:])) and np.all(np.isfinite(traj[:done + 1]))


@pytest.mark.skipif(len(kernels.available_backends()) < 2, reason="extension not built")
def test_backends_bitwise_close():
    rng = np.random.default_rng(0)
    n = 6
    F = rng.normal(size=(n, n)) * 0.1
    G = rng.normal(size=(n, n)) * 0.1
    H = rng.normal(size=(n, n))
    bank = ChannelBank.saturation(3, [0.5, 1.0])
    x0 = rng.normal(size=n)
    a, da = kernels.integrate_lure(F, G, H, bank, x0, 1e-2, 500, backend="cython")
    b, db = kernels.integrate_lure(F, G, H, bank, x0, 1e-2, 500, backend="python")
    assert da == db == 500
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
