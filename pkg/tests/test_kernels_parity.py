"""Compiled and pure Python kernels must agree bit for bit."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from terraseg import _pycore
from terraseg.kernels import BLOCK, backends
from terraseg.outliers import block_maxima

compiled = backends().get("compiled")
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled core not built")
seeds = st.integers(0, 2**32 - 1)


def both(fn_name, *args, outs):
    """Run a kernel on both backends with fresh copies of the output arrays."""
    results = []
    for mod in (compiled, _pycore):
        o = [x.copy() for x in outs]
        ret = getattr(mod, fn_name)(*args, *o)
        results.append((ret, o))
    return results


@needs_compiled
class TestParity:
    @settings(max_examples=25, deadline=None)
    @given(seeds, st.integers(1, 40), st.integers(0, 4))
    def test_box_sum(self, seed, n, r):
        a = np.random.default_rng(seed).normal(size=(n, n))
        assert compiled.box_sum(a, r).tobytes() == _pycore.box_sum(a, r).tobytes()

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.integers(1, 3000))
    def test_welford(self, seed, m):
        rng = np.random.default_rng(seed)
        n = 64
        cell = rng.integers(-1, n, m).astype(np.int64)
        z = rng.normal(rng.uniform(-100, 100), rng.uniform(1e-3, 10), m)
        outs = [np.zeros(n, np.int64), np.zeros(n), np.zeros(n), np.full(n, np.inf), np.full(n, -np.inf)]
        lo, hi = sorted(rng.integers(0, n + 1, 2))
        (_, a), (_, b) = both("welford_cells", z, cell, int(lo), int(hi), outs=outs)
        assert all(x.tobytes() == y.tobytes() for x, y in zip(a, b))

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_window_sums(self, seed):
        rng = np.random.default_rng(seed)
        n = 30
        a = rng.normal(size=(n, n))
        w = rng.integers(0, 5, (n, n)).astype(float)
        cells = np.sort(rng.choice(n * n, 200, replace=False)).astype(np.int64)
        radius = rng.integers(0, 3, 200).astype(np.int64)
        outs = [np.zeros(200), np.zeros(200)]
        (_, x), (_, y) = both("window_sums", a, w, cells, radius, outs=outs)
        assert x[0].tobytes() == y[0].tobytes() and x[1].tobytes() == y[1].tobytes()

    @settings(max_examples=20, deadline=None)
    @given(seeds)
    def test_occlusion_step_terrain(self, seed):
        # tall steps let the compiled walk skip whole blocks; masks must not change
        rng = np.random.default_rng(seed)
        n = 5 * BLOCK
        g = rng.normal(0, 0.02, (n, n))
        g[rng.random((n, n)) < 0.02] += rng.uniform(0.5, 3.0)
        g[:, n // 2:] += 1.0
        trusted = (rng.random((n, n)) < 0.8).astype(np.uint8)
        m = 500
        su, sv = rng.uniform(2, n - 2, 2)
        sz = float(g[int(sv), int(su)]) + 1.73  # mounted above the local terrain
        args = (float(su), float(sv), sz,
                rng.uniform(-2, n + 2, m), rng.uniform(-2, n + 2, m), rng.uniform(-2, 2, m),
                g, trusted, block_maxima(g, trusted), 0.1)
        a, b = np.zeros(m, np.uint8), np.zeros(m, np.uint8)
        compiled.occlusion_mask(*args, a, 0, m)
        _pycore.occlusion_mask(*args, b, 0, m)
        assert a.tobytes() == b.tobytes()
        assert a.any() and not a.all()

    @settings(max_examples=15, deadline=None)
    @given(seeds, st.integers(1, 25))
    def test_spiral_interpolate(self, seed, n):
        from terraseg.grid import spiral_order

        rng = np.random.default_rng(seed)
        g = rng.normal(size=(n, n))
        c = rng.uniform(size=(n, n)) * (rng.random((n, n)) < 0.5)
        skip = (rng.random((n, n)) < 0.3).astype(np.int8)
        order = spiral_order(n, (int(rng.integers(n)), int(rng.integers(n))))
        ga, ca, gb, cb = g.copy(), c.copy(), g.copy(), c.copy()
        compiled.spiral_interpolate(ga, ca, skip, order, 5.0)
        _pycore.spiral_interpolate(gb, cb, skip, order, 5.0)
        assert ga.tobytes() == gb.tobytes() and ca.tobytes() == cb.tobytes()


@needs_compiled
def test_pipeline_labels_identical_across_backends():
    code = (
        "import hashlib, numpy as np\n"
        "from terraseg import Pipeline, BACKEND\n"
        "from terraseg.synth import drive, flat_scene, generate_scan\n"
        "spec = flat_scene(outlier_rate=0.01)\n"
        "pipe, h = Pipeline(), hashlib.sha256()\n"
        "for k, pose in enumerate(drive(spec, 4, speed=2.0)):\n"
        "    r = pipe.process(generate_scan(spec, pose, k).cloud.transformed(pose))\n"
        "    h.update(r.labels.tobytes())\n"
        "h.update(pipe.grid.elevation.tobytes()); h.update(pipe.grid.confidence.tobytes())\n"
        "print(BACKEND, h.hexdigest())\n"
    )
    digests = {}
    for name in ("compiled", "python"):
        env = dict(os.environ, TERRASEG_BACKEND=name)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, digest = out.stdout.split()
        assert backend == name
        digests[name] = digest
    assert digests["compiled"] == digests["python"]


def test_bad_backend_name():
    env = dict(os.environ, TERRASEG_BACKEND="fortran")
    out = subprocess.run([sys.executable, "-c", "import terraseg"], env=env, capture_output=True, text=True)
    assert out.returncode != 0 and "TERRASEG_BACKEND" in out.stderr
