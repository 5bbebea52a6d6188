import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppcokrig import _backend, _kernels_py

pytestmark = pytest.mark.skipif(not _backend.COMPILED, reason="compiled backend not active")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 20), n=st.integers(1, 20),
       d=st.integers(1, 4), nu=st.sampled_from([0.5, 1.5, 2.5]))
def test_corr_matrix_parity(seed, m, n, d, nu):
    from ppcokrig import _ckernels
    rng = np.random.default_rng(seed)
    A, B = rng.random((m, d)), rng.random((n, d))
    phis = rng.uniform(0.05, 3, d)
    np.testing.assert_allclose(_ckernels.corr_matrix(A, B, phis, nu),
                               _kernels_py.corr_matrix(A, B, phis, nu), rtol=1e-13, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 30), N=st.integers(1, 12),
       with_w=st.booleans())
def test_profile_columns_parity(seed, n, N, with_w):
    from ppcokrig import _ckernels
    rng = np.random.default_rng(seed)
    Yp = rng.standard_normal((n, N))
    Wp = rng.standard_normal((n, N)) if with_w else None
    a = _ckernels.profile_columns(Yp, Wp)
    b = _kernels_py.profile_columns(Yp, Wp)
    for x, y in zip(a, b):
        if x is None:
            assert y is None
        else:
            np.testing.assert_allclose(x, y, rtol=1e-12)


def test_backend_selected():
    assert _backend.BACKEND == "cython"


def test_read_only_inputs():
    from ppcokrig import _ckernels
    A = np.random.default_rng(0).random((4, 2))
    A.setflags(write=False)
    phis = np.array([0.5, 0.5])
    phis.setflags(write=False)
    assert _ckernels.corr_matrix(A, A, phis, 2.5).shape == (4, 4)
