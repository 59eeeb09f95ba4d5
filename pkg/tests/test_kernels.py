"""Element-kernel backends: selection, agreement, determinism."""

import numpy as np
import pytest

from sparseiga._kernels import kernel_backend
from sparseiga._kernels import _fallback

try:
    from sparseiga._kernels import _compiled
except ImportError:  # pragma: no cover - depends on build environment
    _compiled = None

needs_compiled = pytest.mark.skipif(
    _compiled is None, reason="compiled kernel not built"
)


def random_inputs(rng, d=2, chunk=3, q=4, kmax=3, max_nel=5):
    n_loc = 3**d
    values = rng.standard_normal((d, max_nel, q, kmax))
    derivs = rng.standard_normal((d, max_nel, q, kmax))
    elem_index = rng.integers(0, max_nel, size=(chunk, d)).astype(np.int64)
    qp_index = np.stack(
        [v.ravel() for v in np.meshgrid(*([np.arange(q)] * d), indexing="ij")],
        axis=1,
    ).astype(np.int32)
    fn_index = np.stack(
        [v.ravel() for v in np.meshgrid(*([np.arange(3)] * d), indexing="ij")],
        axis=1,
    ).astype(np.int32)
    n_qp = q**d
    metric = rng.standard_normal((chunk, n_qp, d, d))
    metric = metric + metric.transpose(0, 1, 3, 2)  # symmetric like J^-1 J^-T
    load = rng.standard_normal((chunk, n_qp))
    out_a = np.zeros((chunk, n_loc, n_loc))
    out_b = np.zeros((chunk, n_loc))
    return values, derivs, elem_index, qp_index, fn_index, metric, load, out_a, out_b


def test_backend_reported():
    assert kernel_backend() in ("compiled", "fallback")


@needs_compiled
def test_backends_agree():
    rng = np.random.default_rng(59)
    for d in (1, 2, 3):
        args = random_inputs(rng, d=d)
        ref_a, ref_b = np.zeros_like(args[7]), np.zeros_like(args[8])
        _fallback.local_poisson_systems(*args[:7], ref_a, ref_b)
        got_a, got_b = np.zeros_like(ref_a), np.zeros_like(ref_b)
        _compiled.local_poisson_systems(*args[:7], got_a, got_b)
        np.testing.assert_allclose(got_a, ref_a, atol=1e-13)
        np.testing.assert_allclose(got_b, ref_b, atol=1e-13)


def test_fallback_accumulates_into_outputs():
    rng = np.random.default_rng(61)
    args = random_inputs(rng)
    out_a, out_b = args[7], args[8]
    _fallback.local_poisson_systems(*args[:7], out_a, out_b)
    first_a, first_b = out_a.copy(), out_b.copy()
    _fallback.local_poisson_systems(*args[:7], out_a, out_b)
    np.testing.assert_allclose(out_a, 2 * first_a, atol=1e-13)
    np.testing.assert_allclose(out_b, 2 * first_b, atol=1e-13)


def test_fallback_deterministic():
    rng = np.random.default_rng(67)
    args = random_inputs(rng)
    a1, b1 = np.zeros_like(args[7]), np.zeros_like(args[8])
    a2, b2 = np.zeros_like(args[7]), np.zeros_like(args[8])
    _fallback.local_poisson_systems(*args[:7], a1, b1)
    _fallback.local_poisson_systems(*args[:7], a2, b2)
    assert np.array_equal(a1, a2)
    assert np.array_equal(b1, b2)


@needs_compiled
def test_compiled_rejects_excessive_dimension():
    rng = np.random.default_rng(73)
    chunk, q, kmax, max_nel, d = 1, 1, 1, 1, 9
    values = rng.standard_normal((d, max_nel, q, kmax))
    derivs = rng.standard_normal((d, max_nel, q, kmax))
    elem_index = np.zeros((chunk, d), dtype=np.int64)
    qp_index = np.zeros((1, d), dtype=np.int32)
    fn_index = np.zeros((1, d), dtype=np.int32)
    metric = np.zeros((chunk, 1, d, d))
    load = np.zeros((chunk, 1))
    out_a = np.zeros((chunk, 1, 1))
    out_b = np.zeros((chunk, 1))
    with pytest.raises(ValueError):
        _compiled.local_poisson_systems(
            values, derivs, elem_index, qp_index, fn_index, metric, load, out_a, out_b
        )


def test_local_matrices_symmetric():
    rng = np.random.default_rng(71)
    args = random_inputs(rng)
    out_a, out_b = args[7], args[8]
    _fallback.local_poisson_systems(*args[:7], out_a, out_b)
    np.testing.assert_allclose(out_a, out_a.transpose(0, 2, 1), atol=1e-13)
