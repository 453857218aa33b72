import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gestformer import _pykernels, kernels

try:
    from gestformer import _ckernels
except ImportError:   # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def test_backend_switching():
    previous = kernels.use_backend("python")
    try:
        assert kernels.backend_name() == "python"
        with pytest.raises(ValueError):
            kernels.use_backend("fortran")
    finally:
        kernels.use_backend(previous)
    assert kernels.backend_name() == previous


def test_default_prefers_extension():
    expected = "cython" if _ckernels is not None else "python"
    assert kernels.backend_name() == expected


shapes = st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 12), st.integers(1, 12))


@needs_ext
@settings(max_examples=40, deadline=None)
@given(shapes, st.sampled_from([1, 3, 5]), st.integers(0, 2**31))
def test_dwconv_parity(shape, k, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=shape)
    w = rng.normal(size=(shape[1], k, k))
    g = rng.normal(size=shape)
    np.testing.assert_allclose(_ckernels.dwconv2d_forward(x, w), _pykernels.dwconv2d_forward(x, w),
                               rtol=0, atol=1e-12)
    for a, b in zip(_ckernels.dwconv2d_backward(x, w, g), _pykernels.dwconv2d_backward(x, w, g)):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@needs_ext
@settings(max_examples=40, deadline=None)
@given(st.tuples(st.integers(1, 3), st.integers(1, 12), st.integers(1, 12)), st.sampled_from([3, 5, 7]),
       st.integers(0, 2**31))
def test_pool_parity(shape, k, seed):
    x = np.random.default_rng(seed).normal(size=shape)
    np.testing.assert_allclose(_ckernels.avgpool2d_forward(x, k), _pykernels.avgpool2d_forward(x, k),
                               rtol=0, atol=1e-12)
    np.testing.assert_allclose(_ckernels.avgpool2d_backward(x, k), _pykernels.avgpool2d_backward(x, k),
                               rtol=0, atol=1e-12)


@needs_ext
@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_haar_parity(n, h2, w2, seed):
    x = np.random.default_rng(seed).normal(size=(n, 2 * h2, 2 * w2))
    bands_c, bands_p = _ckernels.haar_forward(x), _pykernels.haar_forward(x)
    assert np.array_equal(bands_c, bands_p)
    assert np.array_equal(_ckernels.haar_inverse(bands_c), _pykernels.haar_inverse(bands_p))


@needs_ext
def test_model_output_same_on_both_backends():
    from gestformer.model import ModelConfig, init_weights

    model = init_weights(ModelConfig(m=9, d_in=3, k=6, stages=2, n=3), 0)
    x = np.random.default_rng(1).normal(size=(2, 9, 3))
    previous = kernels.use_backend("python")
    try:
        slow = model(x).data
    finally:
        kernels.use_backend(previous)
    np.testing.assert_allclose(model(x).data, slow, rtol=0, atol=1e-12)
