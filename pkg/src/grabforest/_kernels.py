"""Inner loops of the grabbing dynamics, compiled with numba when available.

Each kernel has a plain Python twin (``*_py``) with identical semantics; the
test suite checks them against each other.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None


def grab_loop_py(owner, order, draws, n):
    """Fire arms in ``order``; return the particle grabbed by each arm.

    ``draws[l]`` is uniform on ``0..n-l-2`` and indexes the current root
    array with the grabber's own root skipped.
    """
    uf = list(range(n))
    size = [1] * n
    top = list(range(n))
    roots = list(range(n))
    pos = list(range(n))
    grabbed = [0] * len(order)
    n_roots = n
    for step in range(len(order)):
        arm = order[step]
        i = owner[arm]
        r = i
        while uf[r] != r:
            r = uf[r]
        while uf[i] != r:
            nxt = uf[i]
            uf[i] = r
            i = nxt
        own = top[r]
        j = draws[step]
        if j >= pos[own]:
            j += 1
        if j >= n_roots:
            raise AssertionError("no eligible root")
        g = roots[j]
        n_roots -= 1
        moved = roots[n_roots]
        roots[j] = moved
        pos[moved] = j
        grabbed[arm] = g
        rg = g
        while uf[rg] != rg:
            rg = uf[rg]
        if size[r] < size[rg]:
            r, rg = rg, r
        uf[rg] = r
        size[r] += size[rg]
        top[r] = own
    return np.asarray(grabbed, dtype=np.int64)


def dfs_py(counts, offsets, grabbed, axis):
    """Depth-first listing of the terminal forest, roots in ``axis`` order.

    Returns ``(vertices, sizes)``: particles in depth-first order and the
    size of each tree.
    """
    n = len(counts)
    is_root = np.ones(n, dtype=bool)
    is_root[grabbed] = False
    vertices = np.empty(n, dtype=np.int64)
    sizes = []
    out = 0
    for root in axis:
        if not is_root[root]:
            continue
        start = out
        stack = [root]
        while stack:
            v = stack.pop()
            vertices[out] = v
            out += 1
            for a in range(offsets[v + 1] - 1, offsets[v] - 1, -1):
                stack.append(grabbed[a])
        sizes.append(out - start)
    return vertices, np.asarray(sizes, dtype=np.int64)


if njit is not None:

    @njit(cache=True)
    def _grab_loop_nb(owner, order, draws, n):
        uf = np.arange(n)
        size = np.ones(n, dtype=np.int64)
        top = np.arange(n)
        roots = np.arange(n)
        pos = np.arange(n)
        grabbed = np.zeros(len(order), dtype=np.int64)
        n_roots = n
        for step in range(len(order)):
            arm = order[step]
            i = owner[arm]
            r = i
            while uf[r] != r:
                r = uf[r]
            while uf[i] != r:
                nxt = uf[i]
                uf[i] = r
                i = nxt
            own = top[r]
            j = draws[step]
            if j >= pos[own]:
                j += 1
            if j >= n_roots:
                raise AssertionError("no eligible root")
            g = roots[j]
            n_roots -= 1
            moved = roots[n_roots]
            roots[j] = moved
            pos[moved] = j
            grabbed[arm] = g
            rg = g
            while uf[rg] != rg:
                rg = uf[rg]
            if size[r] < size[rg]:
                r, rg = rg, r
            uf[rg] = r
            size[r] += size[rg]
            top[r] = own
        return grabbed

    @njit(cache=True)
    def _dfs_nb(counts, offsets, grabbed, axis):
        n = len(counts)
        is_root = np.ones(n, dtype=np.bool_)
        for a in range(len(grabbed)):
            is_root[grabbed[a]] = False
        vertices = np.empty(n, dtype=np.int64)
        sizes = np.empty(n, dtype=np.int64)
        stack = np.empty(n, dtype=np.int64)
        out = 0
        n_trees = 0
        for root in axis:
            if not is_root[root]:
                continue
            start = out
            top = 0
            stack[0] = root
            top = 1
            while top:
                top -= 1
                v = stack[top]
                vertices[out] = v
                out += 1
                for a in range(offsets[v + 1] - 1, offsets[v] - 1, -1):
                    stack[top] = grabbed[a]
                    top += 1
            sizes[n_trees] = out - start
            n_trees += 1
        return vertices, sizes[:n_trees]

    def grab_loop(owner, order, draws, n):
        return _grab_loop_nb(
            np.ascontiguousarray(owner, dtype=np.int64),
            np.ascontiguousarray(order, dtype=np.int64),
            np.ascontiguousarray(draws, dtype=np.int64),
            n,
        )

    def dfs(counts, offsets, grabbed, axis):
        return _dfs_nb(
            np.ascontiguousarray(counts, dtype=np.int64),
            np.ascontiguousarray(offsets, dtype=np.int64),
            np.ascontiguousarray(grabbed, dtype=np.int64),
            np.ascontiguousarray(axis, dtype=np.int64),
        )

    COMPILED = True
else:  # pragma: no cover
    grab_loop = grab_loop_py
    dfs = dfs_py
    COMPILED = False
