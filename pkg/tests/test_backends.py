import numpy as np
import pytest

from shelab._backend import ACTIVE, available_backends


@pytest.fixture(scope="module")
def backends():
    return available_backends()


def _scan_inputs(dtype, rng):
    steps, nmodes = 97, 33
    decay = np.exp(-rng.uniform(0, 3, nmodes))
    gain = rng.uniform(0.2, 1.5, nmodes)
    if dtype == complex:
        z = rng.standard_normal((steps, nmodes)) \
            + 1j * rng.standard_normal((steps, nmodes))
    else:
        z = rng.standard_normal((steps, nmodes))
    return decay, gain, z


def test_active_backend_reported():
    assert ACTIVE in ("python", "compiled")


@pytest.mark.parametrize("dtype", [float, complex])
def test_backends_bit_identical(backends, dtype, rng):
    decay, gain, z = _scan_inputs(dtype, rng)
    results = {}
    for name, mod in backends.items():
        out = np.zeros((z.shape[0] + 1, z.shape[1]), dtype=z.dtype)
        out[0] = (1.0 + (0.5j if dtype == complex else 0.0))
        mod.ou_scan(decay, gain, z, out)
        results[name] = out
    ref = results.pop("python")
    for name, out in results.items():
        assert np.array_equal(ref, out), f"{name} disagrees with python fallback"


def test_scan_matches_direct_recurrence(backends, rng):
    decay, gain, z = _scan_inputs(complex, rng)
    out = np.zeros((z.shape[0] + 1, z.shape[1]), dtype=z.dtype)
    next(iter(backends.values())).ou_scan(decay, gain, z, out)
    state = np.zeros(z.shape[1], dtype=z.dtype)
    for m in range(z.shape[0]):
        state = decay * state + gain * z[m]
        assert np.allclose(out[m + 1], state, rtol=0, atol=1e-15)


def test_shape_validation(backends):
    decay = np.ones(4)
    gain = np.ones(4)
    z = np.zeros((3, 4))
    for mod in backends.values():
        with pytest.raises(ValueError):
            mod.ou_scan(decay, gain, z, np.zeros((3, 4)))
        with pytest.raises(ValueError):
            mod.ou_scan(decay[:2], gain, z, np.zeros((4, 4)))
