"""Numba kernels for the toppling loop.

All domains are flattened to a neighbour table ``nbr[v, e]`` whose entries are
either a vertex index, ``SINK`` (particle leaves the system through side ``e``)
or ``GROW`` (the window of a growable domain has to be enlarged before ``v``
may topple).  The unstable set lives in ``queue``; ``state`` holds
``(head, count, steps)`` so that an interrupted relaxation can be resumed.
"""
import numpy as np
from numba import njit

SINK = -1
GROW = -2

# rule codes
UNIFORM1D = 0
SRW1D = 1
PTOPPLING = 2

# policy codes
FIFO = 0
RANDOM = 1
LEFTMOST = 2

# status codes
DONE = 0
BUDGET = 1
GROWTH = 2


@njit(cache=True)
def emission_mask(rule, p, literal, deg, rng):
    """Bit ``e`` of the result is set iff a particle is sent along edge ``e``."""
    if rule == UNIFORM1D:
        return 1 + rng.integers(0, 3)
    if rule == SRW1D:
        return 1 + rng.integers(0, 2)
    while True:
        mask = 0
        for e in range(deg):
            if rng.random() < p:
                mask |= 1 << e
        if mask != 0 or literal or p <= 0.0:
            return mask


@njit(cache=True)
def init_queue(h, thr, queue, inq, state):
    count = 0
    for v in range(h.shape[0]):
        if h[v] >= thr:
            queue[count] = v
            inq[v] = True
            count += 1
        else:
            inq[v] = False
    state[0] = 0
    state[1] = count
    state[2] = 0


@njit(cache=True)
def relax(h, nbr, thr, rule, p, literal, policy, rng, budget,
          odo, exits, queue, inq, state):
    """Topple until stable, the budget is spent, or the window must grow."""
    head = state[0]
    count = state[1]
    steps = state[2]
    cap = queue.shape[0]
    deg = nbr.shape[1]
    status = DONE
    while count > 0:
        if policy == FIFO:
            idx = head
        elif policy == RANDOM:
            idx = (head + rng.integers(0, count)) % cap
        else:
            idx = head
            best = queue[head]
            for t in range(1, count):
                j = (head + t) % cap
                if queue[j] < best:
                    best = queue[j]
                    idx = j
        v = queue[idx]
        grow = False
        for e in range(deg):
            if nbr[v, e] == GROW:
                grow = True
        if grow:
            status = GROWTH
            break
        if steps >= budget:
            status = BUDGET
            break

        mask = emission_mask(rule, p, literal, deg, rng)
        for e in range(deg):
            if mask & (1 << e):
                h[v] -= 1
                w = nbr[v, e]
                if w == SINK:
                    exits[e] += 1
                else:
                    h[w] += 1
                    if h[w] >= thr and not inq[w]:
                        queue[(head + count) % cap] = w
                        inq[w] = True
                        count += 1
        odo[v] += 1
        steps += 1

        if policy == FIFO:
            head = (head + 1) % cap
            count -= 1
            if h[v] >= thr:
                queue[(head + count) % cap] = v
                count += 1
            else:
                inq[v] = False
        elif h[v] < thr:
            last = (head + count - 1) % cap
            queue[idx] = queue[last]
            count -= 1
            inq[v] = False
    state[0] = head
    state[1] = count
    state[2] = steps
    return status


@njit(cache=True)
def relax_batch(h0, nbr, thr, rule, p, literal, policy, rng, budget,
                out_h, out_exits, out_steps):
    """Independent stabilizations of ``h0``; returns index of a failed run or -1."""
    nv = h0.shape[0]
    deg = nbr.shape[1]
    h = np.empty(nv, np.int64)
    odo = np.zeros(nv, np.int64)
    exits = np.zeros(deg, np.int64)
    queue = np.empty(nv, np.int64)
    inq = np.zeros(nv, np.bool_)
    state = np.zeros(3, np.int64)
    for r in range(out_h.shape[0]):
        h[:] = h0
        exits[:] = 0
        init_queue(h, thr, queue, inq, state)
        status = relax(h, nbr, thr, rule, p, literal, policy, rng, budget,
                       odo, exits, queue, inq, state)
        if status != DONE:
            return r
        out_h[r, :] = h
        out_exits[r, :] = exits
        out_steps[r] = state[2]
    return -1


@njit(cache=True)
def drive(h, nbr, thr, rule, p, literal, rng, budget, n_steps, exits):
    """Driven-dissipative chain: ``n_steps`` times add a particle and stabilize.

    Returns the total number of topplings, or -1 if one stabilization exceeded
    ``budget``.
    """
    nv = h.shape[0]
    odo = np.zeros(nv, np.int64)
    queue = np.empty(nv, np.int64)
    inq = np.zeros(nv, np.bool_)
    state = np.zeros(3, np.int64)
    total = 0
    for _ in range(n_steps):
        v = rng.integers(0, nv)
        h[v] += 1
        if h[v] < thr:
            continue
        queue[0] = v
        inq[v] = True
        state[0] = 0
        state[1] = 1
        state[2] = 0
        status = relax(h, nbr, thr, rule, p, literal, FIFO, rng, budget,
                       odo, exits, queue, inq, state)
        if status != DONE:
            return -1
        total += state[2]
    return total


@njit(cache=True)
def emission_batch(rule, p, literal, deg, rng, out):
    for i in range(out.shape[0]):
        out[i] = emission_mask(rule, p, literal, deg, rng)
