"""Jitted kernels against their plain-Python bodies and a big-int oracle."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gen import random_grid, random_plan, rng_for
from protplace import kernels
from protplace._jit import USE_NUMBA, python_impl
from protplace.observability import plan_masks

P = kernels.MERSENNE61


def rank_oracle(rows):
    """Gaussian elimination on Python ints."""
    mat = [[int(v) % P for v in row] for row in rows]
    rank = 0
    cols = len(mat[0]) if mat else 0
    for c in range(cols):
        pivot = next((r for r in range(rank, len(mat)) if mat[r][c]), None)
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        inv = pow(mat[rank][c], P - 2, P)
        for r in range(len(mat)):
            if r != rank and mat[r][c]:
                f = mat[r][c] * inv % P
                mat[r] = [(a - f * b) % P for a, b in zip(mat[r], mat[rank])]
        rank += 1
    return rank


@settings(max_examples=200, deadline=None)
@given(st.integers(0, P - 1), st.integers(0, P - 1))
def test_mulmod_matches_bigint(a, b):
    assert int(kernels.mulmod(np.uint64(a), np.uint64(b))) == a * b % P
    assert int(python_impl(kernels.mulmod)(np.uint64(a), np.uint64(b))) == a * b % P
    out = kernels.mulmod_vec(np.array([a], dtype=np.uint64), np.array([b], dtype=np.uint64))
    assert int(out[0]) == a * b % P


def test_powmod_inverse():
    for a in (1, 2, 12345, P - 1):
        inv = kernels.powmod(np.uint64(a), np.uint64(P - 2))
        assert int(inv) * a % P == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rank_paths_agree(seed):
    rng = np.random.default_rng(seed)
    rows, cols = rng.integers(1, 9, size=2)
    base = rng.integers(0, P, size=(rows, cols), dtype=np.uint64)
    if rows > 2:
        # plant a dependent row
        base[-1] = base[0]
    expected = rank_oracle(base)
    assert kernels.rank_mod_p_numpy(base.copy()) == expected
    assert python_impl(kernels.rank_mod_p_loops)(base.copy()) == expected
    assert kernels.rank_mod_p_loops(base.copy()) == expected
    assert kernels.rank_mod_p(base.copy()) == expected


def test_rank_of_empty_matrix():
    assert kernels.rank_mod_p(np.zeros((0, 4), dtype=np.uint64)) == 0


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_observe_jit_matches_python(seed):
    rng = rng_for(seed)
    grid = random_grid(rng, 8, parallel=True)
    plan = random_plan(rng, grid)
    inj, line, pmu = plan_masks(grid, plan)
    ptr, nbr, edge = grid.csr
    eu, ev = grid.endpoints
    args = (grid.n, eu, ev, ptr, nbr, edge, inj, line, pmu, True)
    ok_a, g_a = kernels.observe(*args)
    ok_b, g_b = python_impl(kernels.observe)(*args)
    assert bool(ok_a) == bool(ok_b)
    assert np.array_equal(g_a, g_b)


def test_count_components():
    eu = np.array([0, 2], dtype=np.int64)
    ev = np.array([1, 3], dtype=np.int64)
    assert kernels.count_components(5, eu, ev) == 3
    assert python_impl(kernels.count_components)(5, eu, ev) == 3


@pytest.mark.skipif(not USE_NUMBA, reason="numba disabled")
def test_kernels_are_compiled():
    assert hasattr(kernels.observe, "py_func")


def test_fallback_backend_in_subprocess():
    import os
    import subprocess
    import sys

    script = (
        "from protplace._jit import USE_NUMBA\n"
        "from protplace.grid import load_bundled_instance\n"
        "from protplace.solver import solve_exact\n"
        "grid, config = load_bundled_instance('ieee9_unit')\n"
        "report = solve_exact(grid, config)\n"
        "print(USE_NUMBA, report.optimal_cost, report.certified)\n"
    )
    env = dict(os.environ, PROTPLACE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "2", "True"]
