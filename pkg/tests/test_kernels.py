import os
import subprocess
import sys

import numpy as np
import pytest

from virodiff import kernels
from virodiff.mesh import assemble_laplacian, build_grid


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in kernels.available_backends()


def test_env_var_forces_python():
    env = dict(os.environ, VIRODIFF_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from virodiff import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


def test_pcg_backends_agree(rng):
    g = build_grid(2, [1.0, 1.0], [25, 25], "neumann")
    m = assemble_laplacian(g, 0.5).shifted(1.0, -0.01).matrix
    b = rng.standard_normal(g.n_nodes)
    results = {name: mod.pcg(m.indptr, m.indices, m.data, b, np.zeros_like(b), 1e-12, 5000)
               for name, mod in kernels.available_backends().items()}
    ref = np.linalg.solve(m.toarray(), b)
    for name, (x, it, rel) in results.items():
        assert rel <= 1e-12, name
        np.testing.assert_allclose(x, ref, atol=1e-9, err_msg=name)


def test_pcg_zero_rhs():
    g = build_grid(1, [1.0], [10], "dirichlet")
    m = assemble_laplacian(g).shifted(1.0, -1.0).matrix
    for mod in kernels.available_backends().values():
        x, it, rel = mod.pcg(m.indptr, m.indices, m.data, np.zeros(10), np.zeros(10), 1e-10, 100)
        assert not x.any() and rel == 0.0


@pytest.mark.skipif(len(kernels.available_backends()) < 2 or os.environ.get("VIRODIFF_PURE_PYTHON"),
                    reason="compiled core not built or disabled")
def test_compiled_backend_is_active_when_built():
    assert kernels.BACKEND == "cython"
