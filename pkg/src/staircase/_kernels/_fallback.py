"""Pure numpy versions of the compiled kernels (same signatures, same in-place semantics)."""
import numpy as np


def fwht(a):
    n = a.shape[0]
    h = 1
    while h < n:
        view = a.reshape(-1, 2, h)
        u = view[:, 0, :].copy()
        v = view[:, 1, :]
        view[:, 0, :] = u + v
        view[:, 1, :] = u - v
        h *= 2


def _grad(P, r0, c, w, reg):
    d = P.shape[1]
    z = P @ w[:d]
    res = c * (r0 + z * z + w[d])
    grad = np.empty(d + 1)
    grad[:d] = (res * 2.0 * z) @ P + reg * w[:d]
    grad[d] = res.sum()
    return grad


def neuron_sgd_weighted(P, r0, weights, w, reg, alpha, eps_stop):
    P = np.asarray(P)
    for k in range(weights.shape[0]):
        c = weights[k]
        rows = np.flatnonzero(c)
        grad = _grad(P[rows], r0[rows], c[rows], w, reg)
        norm = float(np.sqrt(grad @ grad))
        if norm <= eps_stop:
            return k, True
        if not np.isfinite(norm):
            return k, False
        w -= alpha * grad
    return weights.shape[0], False


def neuron_sgd_batched(P, r0, B, w, reg, alpha, eps_stop):
    K = P.shape[0] // B
    for k in range(K):
        sl = slice(k * B, (k + 1) * B)
        grad = _grad(P[sl], r0[sl], 1.0 / B, w, reg)
        norm = float(np.sqrt(grad @ grad))
        if norm <= eps_stop:
            return k, True
        if not np.isfinite(norm):
            return k, False
        w -= alpha * grad
    return K, False


def resnet_sgd(W_in, b_in, Wb, bb, w_out, b_out, X, y, pos, steps, B, lr, losses):
    m = X.shape[0]
    depth = Wb.shape[0]
    for t in range(steps):
        rows = (pos + np.arange(B)) % m
        x = X[rows]
        hs = [x @ W_in.T + b_in]
        us = []
        for l in range(depth):
            u = hs[-1] @ Wb[l].T + bb[l]
            us.append(u)
            hs.append(hs[-1] + np.maximum(u, 0.0))
        out = hs[-1] @ w_out + b_out[0]
        err = out - y[rows]
        loss = 0.5 * float(np.mean(err * err))
        losses[t] = loss
        if not np.isfinite(loss) or loss > 1e6:
            return pos, t
        err = err / B
        g_out = hs[-1].T @ err
        gb_out = err.sum()
        dh = np.outer(err, w_out)
        gWb = np.empty_like(Wb)
        gbb = np.empty_like(bb)
        for l in range(depth - 1, -1, -1):
            du = dh * (us[l] > 0.0)
            gWb[l] = du.T @ hs[l]
            gbb[l] = du.sum(axis=0)
            dh = dh + du @ Wb[l]
        gW_in = dh.T @ x
        gb_in = dh.sum(axis=0)
        W_in -= lr * gW_in
        b_in -= lr * gb_in
        Wb -= lr * gWb
        bb -= lr * gbb
        w_out -= lr * g_out
        b_out[0] -= lr * gb_out
        pos = (pos + B) % m
    return pos, steps
