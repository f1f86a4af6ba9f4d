"""Compiled event loops used by the engine.

Both loops hold the backlog once per strategy in play as (key, tx) pairs
ordered ascending, where the transaction index (arrival order) is the
(arrival_time, id) tie-break, and both assemble blocks by a skip-and-continue
scan identical to ``Backlog.select_block``.

``run_blocks_merge`` keeps sorted arrays and merges each block's arrivals in
one pass; cheap while the backlog stays small.  ``run_blocks_heap`` keeps
binary heaps with lazy deletion; it wins once the backlog grows without
bound.  The two return identical results.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _merge(old_key, old_tx, n_old, new_key, new_tx, taken, out_key, out_tx):
    """Merge two (key, tx)-sorted runs, dropping taken txs; return the length."""
    i = 0
    j = 0
    w = 0
    n_new = new_key.shape[0]
    while i < n_old or j < n_new:
        if j >= n_new or (
            i < n_old
            and (old_key[i] < new_key[j] or (old_key[i] == new_key[j] and old_tx[i] < new_tx[j]))
        ):
            tx = old_tx[i]
            kv = old_key[i]
            i += 1
            if taken[tx]:
                continue
        else:
            tx = new_tx[j]
            kv = new_key[j]
            j += 1
        out_key[w] = kv
        out_tx[w] = tx
        w += 1
    return w


@njit(cache=True)
def run_blocks_merge(arrival, size, fee, keys, block_time, block_order, capacity, min_size):
    """Replay arrivals against block events.

    ``keys[s, i]`` is the sort key of transaction ``i`` under ordering ``s``
    (ascending, ties by index) and ``block_order[k]`` the ordering block
    ``k`` uses.  Returns the block index of every transaction (-1 while
    pending) and per-block used bytes, fees and transaction counts.
    """
    n = arrival.shape[0]
    n_orders = keys.shape[0]
    n_blocks = block_time.shape[0]
    tx_block = np.full(n, -1, dtype=np.int64)
    taken = np.zeros(n, dtype=np.bool_)
    used = np.zeros(n_blocks, dtype=np.int64)
    fees = np.zeros(n_blocks, dtype=np.int64)
    counts = np.zeros(n_blocks, dtype=np.int64)

    cap = 1024
    p_key = np.empty((n_orders, cap))
    p_tx = np.empty((n_orders, cap), dtype=np.int64)
    s_key = np.empty((n_orders, cap))
    s_tx = np.empty((n_orders, cap), dtype=np.int64)
    n_pend = 0

    a = 0
    for k in range(n_blocks):
        t = block_time[k]
        a1 = a
        while a1 < n and arrival[a1] <= t:
            a1 += 1
        need = n_pend + (a1 - a)
        if need > cap:
            while cap < need:
                cap *= 2
            g_key = np.empty((n_orders, cap))
            g_tx = np.empty((n_orders, cap), dtype=np.int64)
            g_key[:, :n_pend] = p_key[:, :n_pend]
            g_tx[:, :n_pend] = p_tx[:, :n_pend]
            p_key, p_tx = g_key, g_tx
            s_key = np.empty((n_orders, cap))
            s_tx = np.empty((n_orders, cap), dtype=np.int64)
        w = 0
        for s in range(n_orders):
            fresh = keys[s, a:a1]
            perm = np.argsort(fresh, kind="mergesort")
            w = _merge(p_key[s], p_tx[s], n_pend, fresh[perm], perm + a, taken, s_key[s], s_tx[s])
        p_key, s_key = s_key, p_key
        p_tx, s_tx = s_tx, p_tx
        n_pend = w
        a = a1

        row = p_tx[block_order[k]]
        room = capacity
        for q in range(n_pend):
            if room < min_size:
                break
            tx = row[q]
            if size[tx] <= room:
                taken[tx] = True
                tx_block[tx] = k
                room -= size[tx]
                fees[k] += fee[tx]
                counts[k] += 1
        used[k] = capacity - room
    return tx_block, used, fees, counts


@njit(inline="always", cache=True)
def _less(k1, t1, k2, t2):
    return k1 < k2 or (k1 == k2 and t1 < t2)

@njit(cache=True)
def _push(hk, ht, n, key, tx):
    i = n
    while i > 0:
        p = (i - 1) >> 1
        if _less(key, tx, hk[p], ht[p]):
            hk[i] = hk[p]
            ht[i] = ht[p]
            i = p
        else:
            break
    hk[i] = key
    ht[i] = tx
    return n + 1

@njit(cache=True)
def _pop(hk, ht, n):
    n -= 1
    key = hk[n]
    tx = ht[n]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        if c + 1 < n and _less(hk[c + 1], ht[c + 1], hk[c], ht[c]):
            c += 1
        if _less(hk[c], ht[c], key, tx):
            hk[i] = hk[c]
            ht[i] = ht[c]
            i = c
        else:
            break
    if n > 0:
        hk[i] = key
        ht[i] = tx
    return n

@njit(cache=True)
def run_blocks_heap(arrival, size, fee, keys, block_time, block_order, capacity, min_size):
    """Same contract as :func:`run_blocks_merge`.

    Entries taken via another strategy's heap stay behind and are discarded
    when they surface; transactions that did not fit are pushed back after
    the block is sealed.
    """
    n = arrival.shape[0]
    n_orders = keys.shape[0]
    n_blocks = block_time.shape[0]
    tx_block = np.full(n, -1, dtype=np.int64)
    taken = np.zeros(n, dtype=np.bool_)
    used = np.zeros(n_blocks, dtype=np.int64)
    fees = np.zeros(n_blocks, dtype=np.int64)
    counts = np.zeros(n_blocks, dtype=np.int64)
    hk = np.empty((n_orders, max(n, 1)))
    ht = np.empty((n_orders, max(n, 1)), dtype=np.int64)
    hn = np.zeros(n_orders, dtype=np.int64)
    skipped = np.empty(max(n, 1), dtype=np.int64)
    a = 0
    for k in range(n_blocks):
        t = block_time[k]
        while a < n and arrival[a] <= t:
            for s in range(n_orders):
                hn[s] = _push(hk[s], ht[s], hn[s], keys[s, a], a)
            a += 1
        s = block_order[k]
        room = capacity
        n_skip = 0
        while room >= min_size and hn[s] > 0:
            tx = ht[s, 0]
            hn[s] = _pop(hk[s], ht[s], hn[s])
            if taken[tx]:
                continue
            if size[tx] <= room:
                taken[tx] = True
                tx_block[tx] = k
                room -= size[tx]
                fees[k] += fee[tx]
                counts[k] += 1
            else:
                skipped[n_skip] = tx
                n_skip += 1
        for q in range(n_skip):
            tx = skipped[q]
            hn[s] = _push(hk[s], ht[s], hn[s], keys[s, tx], tx)
        used[k] = capacity - room
    return tx_block, used, fees, counts


@njit(cache=True)
def stabilize_ties(order, sorted_key):
    """Sort each run of equal ``sorted_key`` (= key[order]) by index, in place."""
    n = order.shape[0]
    i = 0
    while i < n:
        j = i + 1
        while j < n and sorted_key[j] == sorted_key[i]:
            j += 1
        if j - i > 32:
            order[i:j] = np.sort(order[i:j])
        elif j - i > 1:
            for a in range(i + 1, j):
                v = order[a]
                b = a - 1
                while b >= i and order[b] > v:
                    order[b + 1] = order[b]
                    b -= 1
                order[b + 1] = v
        i = j
    return order
