"""Pure-Python versions of the word kernels.

Letters are nonzero ints; ``-x`` is the inverse of ``x``.  Every function
takes and returns plain tuples so the compiled module can be swapped in.
"""


def free_reduce(letters):
    out = []
    for x in letters:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def substitute(word, images):
    """Replace each letter by its image and freely reduce.

    ``images[i]`` is the (reduced) image of the positive letter ``i``;
    index 0 is unused.
    """
    out = []
    for x in word:
        if x > 0:
            piece = images[x]
        else:
            piece = [-y for y in reversed(images[-x])]
        for y in piece:
            if out and out[-1] == -y:
                out.pop()
            else:
                out.append(y)
    return tuple(out)


def cyclic_reduce(word):
    """Return ``(core, conjugator)`` with ``word = conjugator core conjugator^-1``."""
    n = len(word)
    i = 0
    while i < n - 1 - i and word[i] == -word[n - 1 - i]:
        i += 1
    return tuple(word[i:n - i]), tuple(word[:i])


def common_prefix(a, b):
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i
