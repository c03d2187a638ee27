"""Backend selection and numba-vs-numpy kernel agreement."""

import os
import subprocess
import sys

import numpy as np
import pytest

from gridinertia import _sim_kernels as sim_kernels
from gridinertia.backend import backend_name, using_numba
from gridinertia.grid import save_case
from gridinertia.nn import _nn_kernels as nn_kernels

from conftest import make_tiny_system


def rng_for(k):
    return np.random.default_rng(6000 + k)


needs_numba = pytest.mark.skipif(
    not using_numba(), reason="active backend is already the numpy fallback")


def run_subprocess(code, env_backend, *args):
    env = dict(os.environ)
    env["GRIDINERTIA_BACKEND"] = env_backend
    return subprocess.run([sys.executable, "-c", code, *args],
                          capture_output=True, text=True, env=env)


# -- selection ------------------------------------------------------------------

def test_backend_name_is_consistent():
    name = backend_name()
    assert name in ("numba", "numpy")
    assert using_numba() == (name == "numba")


def test_numpy_variants_are_always_importable():
    assert callable(sim_kernels.run_swing_numpy)
    assert callable(sim_kernels.solve_network_numpy)
    assert callable(nn_kernels.conv1d_forward_numpy)
    assert callable(nn_kernels.conv1d_backward_numpy)
    assert callable(nn_kernels.lstm_forward_numpy)
    assert callable(nn_kernels.lstm_backward_numpy)


def test_env_numpy_forces_fallback():
    code = (
        "from gridinertia.backend import backend_name\n"
        "from gridinertia import _sim_kernels as sk\n"
        "from gridinertia.nn import _nn_kernels as nk\n"
        "assert backend_name() == 'numpy'\n"
        "assert sk.run_swing is sk.run_swing_numpy\n"
        "assert nk.lstm_forward is nk.lstm_forward_numpy\n"
        "print('ok')\n"
    )
    proc = run_subprocess(code, "numpy")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "ok"


@needs_numba
def test_env_numba_selects_numba():
    code = (
        "from gridinertia.backend import backend_name\n"
        "assert backend_name() == 'numba'\n"
        "print('ok')\n"
    )
    proc = run_subprocess(code, "numba")
    assert proc.returncode == 0, proc.stderr


def test_env_rejects_unknown_backend():
    proc = run_subprocess("import gridinertia.backend\n", "fancy")
    assert proc.returncode != 0
    assert "GRIDINERTIA_BACKEND" in proc.stderr


# -- kernel agreement -----------------------------------------------------------

@needs_numba
def test_conv1d_agreement():
    rng = rng_for(0)
    x = rng.standard_normal((3, 4, 25))
    w = rng.standard_normal((6, 4, 5))
    b = rng.standard_normal(6)
    y_fast = nn_kernels.conv1d_forward(x, w, b)
    y_ref = nn_kernels.conv1d_forward_numpy(x, w, b)
    assert np.allclose(y_fast, y_ref, rtol=1e-13, atol=1e-14)

    dy = rng.standard_normal(y_ref.shape)
    fast = nn_kernels.conv1d_backward(x, w, dy)
    ref = nn_kernels.conv1d_backward_numpy(x, w, dy)
    for a, r in zip(fast, ref):
        assert np.allclose(a, r, rtol=1e-13, atol=1e-14)


@needs_numba
def test_lstm_agreement():
    rng = rng_for(1)
    units = 7
    x = rng.standard_normal((4, 12, 5))
    wx = 0.3 * rng.standard_normal((5, 4 * units))
    wh = 0.3 * rng.standard_normal((units, 4 * units))
    b = 0.1 * rng.standard_normal(4 * units)

    fast = nn_kernels.lstm_forward(x, wx, wh, b)
    ref = nn_kernels.lstm_forward_numpy(x, wx, wh, b)
    for a, r in zip(fast, ref):
        assert np.allclose(a, r, rtol=1e-13, atol=1e-14)

    dh = rng.standard_normal((4, units))
    h, gates, cell_seq, hidden_seq = ref
    fast_g = nn_kernels.lstm_backward(x, wx, wh, gates, cell_seq, hidden_seq, dh)
    ref_g = nn_kernels.lstm_backward_numpy(x, wx, wh, gates, cell_seq,
                                           hidden_seq, dh)
    for a, r in zip(fast_g, ref_g):
        assert np.allclose(a, r, rtol=1e-13, atol=1e-14)


@needs_numba
def test_full_simulation_agreement(tmp_path):
    # Run the same probing simulation on both backends (fallback in a
    # subprocess) and compare the recorded channels.
    from gridinertia.simulate import ProbingSignal, SimConfig, simulate

    case = tmp_path / "tiny.case"
    save_case(make_tiny_system(), case)
    system = make_tiny_system()
    probe = ProbingSignal(bus=2, kind="prbs", amplitude=0.004, period=0.05)
    trace = simulate(system, probe, SimConfig(duration=2.0))

    out = tmp_path / "ref.npz"
    code = (
        "import sys\n"
        "import numpy as np\n"
        "from gridinertia.backend import backend_name\n"
        "from gridinertia.grid import load_case\n"
        "from gridinertia.simulate import ProbingSignal, SimConfig, simulate\n"
        "assert backend_name() == 'numpy'\n"
        "system = load_case(sys.argv[1])\n"
        "probe = ProbingSignal(bus=2, kind='prbs', amplitude=0.004, period=0.05)\n"
        "trace = simulate(system, probe, SimConfig(duration=2.0))\n"
        "np.savez(sys.argv[2], delta_omega=trace.delta_omega,\n"
        "         rocof=trace.rocof, v_mag=trace.v_mag,\n"
        "         machine_omega=trace.machine_omega)\n"
    )
    proc = run_subprocess(code, "numpy", str(case), str(out))
    assert proc.returncode == 0, proc.stderr
    ref = np.load(out)
    assert np.allclose(trace.delta_omega, ref["delta_omega"],
                       rtol=1e-10, atol=1e-13)
    assert np.allclose(trace.rocof, ref["rocof"], rtol=1e-10, atol=1e-11)
    assert np.allclose(trace.v_mag, ref["v_mag"], rtol=1e-10, atol=1e-13)
    assert np.allclose(trace.machine_omega, ref["machine_omega"],
                       rtol=1e-10, atol=1e-13)
