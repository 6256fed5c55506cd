"""Numpy and numba kernels must agree bit-for-bit on the same inputs."""

import os
import subprocess
import sys

import numpy as np
import pytest

from psdlift import _backend
from psdlift import _kernels_numpy as knp

try:
    from psdlift import _kernels_numba as knb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    HAVE_NUMBA = False

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba unavailable")


def _ap_inputs(seed=0, d=4, m=6):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(d)
    pack = np.where(iu == ju, 1.0, np.sqrt(2.0))
    x = rng.standard_normal(d)
    x /= np.linalg.norm(x)
    stack = np.empty((m, d, d))
    for j in range(m):
        g = rng.standard_normal((d, d))
        q, _ = np.linalg.qr(g)
        stack[j] = np.outer(q[:, 0], q[:, 0])
    rows = np.vstack([stack[j][iu, ju] * pack for j in range(m)]
                     + [np.eye(d)[iu, ju] * pack])
    b = np.concatenate([np.einsum("nij,i,j->n", stack, x, x), [1.0]])
    v0, *_ = np.linalg.lstsq(rows, b, rcond=None)
    _, sv, vt = np.linalg.svd(rows, full_matrices=False)
    basis = vt[sv > 1e-10].T.copy()  # (D, r), orthonormal columns
    return rows, b, basis, v0, iu, ju, d


@needs_numba
def test_orthogonal_from_gaussian_matches():
    g = np.random.default_rng(1).standard_normal((5, 6, 6))
    a = knp.orthogonal_from_gaussian(g.copy())
    b = knb.orthogonal_from_gaussian(g.copy())
    assert np.allclose(a, b, atol=1e-13)
    for q in b:
        assert np.allclose(q @ q.T, np.eye(6), atol=1e-12)


@needs_numba
def test_inner_batch_matches():
    rng = np.random.default_rng(2)
    stack = rng.standard_normal((7, 4, 4))
    stack = stack + stack.transpose(0, 2, 1)
    x = rng.standard_normal((4, 4))
    x = x + x.T
    assert np.allclose(knp.inner_batch(stack, x), knb.inner_batch(stack, x), atol=1e-13)


@needs_numba
def test_apply_frame_matches():
    rng = np.random.default_rng(3)
    stack = rng.standard_normal((7, 4, 4))
    coefs = rng.standard_normal(7)
    assert np.allclose(knp.apply_frame(stack, coefs), knb.apply_frame(stack, coefs),
                       atol=1e-13)


@needs_numba
def test_pairwise_inner_matches():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((5, 3, 3))
    b = rng.standard_normal((6, 3, 3))
    assert np.allclose(knp.pairwise_inner(a, b), knb.pairwise_inner(a, b), atol=1e-13)


@needs_numba
def test_monomial_columns_matches():
    rng = np.random.default_rng(5)
    pts = rng.standard_normal((10, 4))
    betas = np.array([[0, 0, 0, 0], [2, 0, 0, 0], [1, 1, 0, 0], [2, 2, 1, 1]],
                     dtype=np.int64)
    assert np.allclose(knp.monomial_columns(pts, betas), knb.monomial_columns(pts, betas),
                       atol=1e-13)


def test_monomial_columns_values():
    pts = np.array([[2.0, 3.0], [1.0, -1.0]])
    betas = np.array([[1, 0], [1, 2], [0, 0]], dtype=np.int64)
    out = knp.monomial_columns(pts, betas)
    assert np.allclose(out, [[2.0, 1.0], [18.0, 1.0], [1.0, 1.0]])


@needs_numba
def test_ap_loop_matches():
    rows, b, basis, v0, iu, ju, d = _ap_inputs()
    out_np = knp.ap_loop(rows, b, basis, v0.copy(), iu, ju, d, 1e-9, 2000)
    out_nb = knb.ap_loop(rows, b, basis, v0.copy(), iu, ju, d, 1e-9, 2000)
    assert out_np[1] == out_nb[1]  # same iteration count
    assert np.allclose(out_np[0], out_nb[0], atol=1e-10)
    assert out_np[2] == pytest.approx(out_nb[2], abs=1e-12)
    assert out_np[3] == pytest.approx(out_nb[3], abs=1e-12)


def test_backend_reports_name():
    assert _backend.BACKEND in ("numpy", "numba")


def _run_with_backend(value):
    code = "import psdlift; print(psdlift.BACKEND)"
    return subprocess.run([sys.executable, "-c", code],
                          env={**os.environ, "PSDLIFT_BACKEND": value},
                          capture_output=True, text=True)


def test_env_flag_selects_numpy():
    proc = _run_with_backend("numpy")
    assert proc.returncode == 0
    assert proc.stdout.strip() == "numpy"


@needs_numba
def test_env_flag_selects_numba():
    proc = _run_with_backend("numba")
    assert proc.returncode == 0
    assert proc.stdout.strip() == "numba"


def test_env_flag_rejects_unknown_value():
    proc = _run_with_backend("cython")
    assert proc.returncode != 0
    assert "PSDLIFT_BACKEND" in proc.stderr


def test_numpy_backend_runs_a_full_recovery():
    code = (
        "import numpy as np, psdlift as pl\n"
        "rng = pl.rng_for(31, 0)\n"
        "x = rng.standard_normal(5); x /= np.linalg.norm(x)\n"
        "m = pl.measure(x, pl.haar_batch(pl.Spectrum.projector(5, 1), 30, rng))\n"
        "res = pl.solve_feasibility(m, tol=1e-8)\n"
        "err = np.linalg.norm(res.X_hat.entries - np.outer(x, x))\n"
        "assert err < 1e-5, err\n"
        "print('ok')\n"
    )
    proc = subprocess.run([sys.executable, "-c", code],
                          env={**os.environ, "PSDLIFT_BACKEND": "numpy"},
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "ok"
