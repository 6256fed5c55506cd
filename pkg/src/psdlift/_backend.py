"""Kernel backend selection.

The environment variable ``PSDLIFT_BACKEND`` picks the implementation of
the hot kernels at import time:

- ``auto`` (default): numba if importable, else pure numpy;
- ``numba``: require numba, raise if unavailable;
- ``numpy``: force the pure-numpy kernels.

Results are reproducible run-to-run for a fixed backend; the two
backends agree to float64 roundoff but not necessarily bit-for-bit
(they may link different LAPACK builds).
"""

from __future__ import annotations

import os

_ENV_VAR = "PSDLIFT_BACKEND"
_choice = os.environ.get(_ENV_VAR, "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"{_ENV_VAR} must be one of auto/numba/numpy, got {_choice!r}"
    )

if _choice in ("auto", "numba"):
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise RuntimeError(
                f"{_ENV_VAR}=numba requested but numba is not importable"
            )
        from . import _kernels_numpy as _impl

        BACKEND = "numpy"
else:
    from . import _kernels_numpy as _impl

    BACKEND = "numpy"

orthogonal_from_gaussian = _impl.orthogonal_from_gaussian
inner_batch = _impl.inner_batch
apply_frame = _impl.apply_frame
pairwise_inner = _impl.pairwise_inner
monomial_columns = _impl.monomial_columns
ap_loop = _impl.ap_loop


def warmup() -> str:
    """Touch every kernel once on tiny inputs (triggers jit compilation).

    Returns the active backend name.
    """
    import numpy as np

    g = np.zeros((2, 3, 3))
    g[:, 0, 0] = 1.0
    g[:, 1, 1] = 1.0
    g[:, 2, 2] = 1.0
    ps = orthogonal_from_gaussian(g)
    x = np.eye(3)
    inner_batch(ps, x)
    apply_frame(ps, np.array([0.5, 0.5]))
    pairwise_inner(ps, ps)
    monomial_columns(np.ones((2, 3)), np.array([[1, 0, 2]], dtype=np.int64))
    iu, ju = np.triu_indices(2)
    rows = np.array([[1.0, 0.0, 1.0]])
    b = np.array([1.0])
    basis = rows.T / np.sqrt(2.0)
    v0 = np.array([0.5, 0.0, 0.5])
    ap_loop(rows, b, basis, v0, iu.astype(np.int64), ju.astype(np.int64), 2, 1e-12, 5)
    return BACKEND
