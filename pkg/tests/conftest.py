"""Test bootstrap: pin BLAS to one thread before numpy loads.

Multi-threaded BLAS kernels can reorder float reductions between runs, which
would break the bit-exact determinism tests. Setting the env vars here works
because pytest imports conftest before any test module imports numpy.
"""

import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from relsql.nn import set_default_dtype  # noqa: E402


@pytest.fixture(autouse=True)
def float64_mode():
    """Tests run in float64 unless they opt out; always restore afterwards."""
    set_default_dtype(np.float64)
    yield
    set_default_dtype(np.float64)
