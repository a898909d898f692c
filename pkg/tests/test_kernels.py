"""The compiled kernels and the pure-Python fallback must agree."""
import os
import subprocess
import sys

from hypothesis import given
from hypothesis import strategies as st

from traintrack import _kernels_py, kernels

word = st.lists(st.sampled_from([1, -1, 2, -2, 3, -3]), max_size=40)
images = st.lists(st.lists(st.sampled_from([1, -1, 2, -2, 3, -3]), min_size=1, max_size=4), min_size=3, max_size=3)


@given(word)
def test_free_reduce_agrees(w):
    assert kernels.free_reduce(w) == _kernels_py.free_reduce(w)


@given(word)
def test_cyclic_reduce_agrees(w):
    w = _kernels_py.free_reduce(w)
    assert kernels.cyclic_reduce(w) == _kernels_py.cyclic_reduce(w)


@given(word, images)
def test_substitute_agrees(w, ims):
    table = [()] + [_kernels_py.free_reduce(im) for im in ims]
    assert kernels.substitute(tuple(w), table) == _kernels_py.substitute(tuple(w), table)


@given(word, word)
def test_common_prefix_agrees(a, b):
    assert kernels.common_prefix(a, b) == _kernels_py.common_prefix(a, b)


def test_environment_forces_fallback():
    env = dict(os.environ, TRAINTRACK_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from traintrack import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"

