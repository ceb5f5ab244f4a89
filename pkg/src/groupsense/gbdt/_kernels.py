# Compiled inner loops for exact greedy tree growth. Everything here is
# sequential so results do not depend on scheduling.
import numpy as np
from numba import njit

_TIE = 1e-12  # gains closer than this count as equal (summation order noise)


@njit(cache=True)
def node_totals(node_of, gh, n_nodes):
    G = np.zeros(n_nodes)
    H = np.zeros(n_nodes)
    cnt = np.zeros(n_nodes, dtype=np.int64)
    for r in range(node_of.shape[0]):
        k = node_of[r]
        if k >= 0:
            G[k] += gh[r, 0]
            H[k] += gh[r, 1]
            cnt[k] += 1
    return G, H, cnt


@njit(cache=True)
def find_best_splits(order, values, starts, miss, miss_starts, feats, node_of, gh,
                     G_tot, H_tot, cnt_tot, lam, min_child_weight, min_gain):
    """Best split per open node over the candidate features.

    ``order``/``values`` hold each feature's present rows sorted by value and
    ``miss`` its missing rows. Candidates are midpoints between consecutive
    distinct present values. For each candidate both default directions for
    missing values are tried (left first). Strict improvement keeps the
    lowest feature index, then the lowest threshold, then default-left.
    """
    m = G_tot.shape[0]
    best_gain = np.full(m, min_gain)
    best_feat = np.full(m, -1, dtype=np.int64)
    best_thr = np.zeros(m)
    best_left = np.zeros(m, dtype=np.bool_)
    parent = np.empty(m)
    for k in range(m):
        parent[k] = G_tot[k] * G_tot[k] / (H_tot[k] + lam)
    Gm = np.zeros(m)
    Hm = np.zeros(m)
    cm = np.zeros(m, dtype=np.int64)
    GL = np.zeros(m)
    HL = np.zeros(m)
    last = np.zeros(m)
    has = np.zeros(m, dtype=np.bool_)
    for fi in range(feats.shape[0]):
        f = feats[fi]
        for k in range(m):
            Gm[k] = 0.0
            Hm[k] = 0.0
            cm[k] = 0
            GL[k] = 0.0
            HL[k] = 0.0
            has[k] = False
        for q in range(miss_starts[f], miss_starts[f + 1]):
            r = miss[q]
            k = node_of[r]
            if k >= 0:
                Gm[k] += gh[r, 0]
                Hm[k] += gh[r, 1]
                cm[k] += 1
        for q in range(starts[f], starts[f + 1]):
            r = order[q]
            k = node_of[r]
            if k < 0:
                continue
            v = values[q]
            if has[k] and v > last[k]:
                if cm[k] == 0:
                    gm = 0.0
                    hm = 0.0
                else:
                    gm = Gm[k]
                    hm = Hm[k]
                gl = GL[k]
                hl = HL[k]
                gr = G_tot[k] - gm - gl
                hr = H_tot[k] - hm - hl
                thr = 0.5 * (last[k] + v)
                if thr <= last[k]:
                    thr = v
                lg = gl + gm
                lh = hl + hm
                if lh >= min_child_weight and hr >= min_child_weight:
                    gain = 0.5 * (lg * lg / (lh + lam) + gr * gr / (hr + lam) - parent[k])
                    if gain > best_gain[k] + _TIE:
                        best_gain[k] = gain
                        best_feat[k] = f
                        best_thr[k] = thr
                        best_left[k] = True
                rg = gr + gm
                rh = hr + hm
                if hl >= min_child_weight and rh >= min_child_weight:
                    gain = 0.5 * (gl * gl / (hl + lam) + rg * rg / (rh + lam) - parent[k])
                    if gain > best_gain[k] + _TIE:
                        best_gain[k] = gain
                        best_feat[k] = f
                        best_thr[k] = thr
                        best_left[k] = False
            GL[k] += gh[r, 0]
            HL[k] += gh[r, 1]
            last[k] = v
            has[k] = True
    return best_feat, best_thr, best_left, best_gain


@njit(cache=True)
def apply_splits(X, node_of, split_feat, split_thr, split_left, child_of):
    """Move rows of split nodes to their child slot in the next level; others close."""
    for r in range(node_of.shape[0]):
        k = node_of[r]
        if k < 0:
            continue
        f = split_feat[k]
        if f < 0:
            node_of[r] = -1
            continue
        v = X[r, f]
        if np.isnan(v):
            left = split_left[k]
        else:
            left = v < split_thr[k]
        node_of[r] = child_of[k] if left else child_of[k] + 1


@njit(cache=True)
def add_tree_output(X, feature, threshold, default_left, left, right, value, out):
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            v = X[r, feature[node]]
            if np.isnan(v):
                go_left = default_left[node]
            else:
                go_left = v < threshold[node]
            node = left[node] if go_left else right[node]
        out[r] += value[node]


@njit(cache=True)
def add_tree_output_rows(X, rows, feature, threshold, default_left, left, right, value, out):
    for i in range(rows.shape[0]):
        r = rows[i]
        node = 0
        while feature[node] >= 0:
            v = X[r, feature[node]]
            if np.isnan(v):
                go_left = default_left[node]
            else:
                go_left = v < threshold[node]
            node = left[node] if go_left else right[node]
        out[i] += value[node]


@njit(cache=True)
def compact_presort(order, values, starts, miss, miss_starts, selected, in_sample):
    """Restrict a presort to the selected features and sampled rows (order kept)."""
    F = starts.shape[0] - 1
    n_out = 0
    m_out = 0
    for f in range(F):
        if selected[f]:
            n_out += starts[f + 1] - starts[f]
            m_out += miss_starts[f + 1] - miss_starts[f]
    o = np.empty(n_out, dtype=order.dtype)
    v = np.empty(n_out)
    mo = np.empty(m_out, dtype=miss.dtype)
    st = np.zeros(F + 1, dtype=np.int64)
    ms = np.zeros(F + 1, dtype=np.int64)
    p = 0
    pm = 0
    for f in range(F):
        if selected[f]:
            for q in range(starts[f], starts[f + 1]):
                r = order[q]
                if in_sample[r]:
                    o[p] = r
                    v[p] = values[q]
                    p += 1
            for q in range(miss_starts[f], miss_starts[f + 1]):
                r = miss[q]
                if in_sample[r]:
                    mo[pm] = r
                    pm += 1
        st[f + 1] = p
        ms[f + 1] = pm
    return o[:p], v[:p], st, mo[:pm], ms
