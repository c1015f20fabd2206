"""Hot loops over (points x elements) for the Gaussian field.

Every kernel has a numba and a numpy implementation with the same
signature; the module-level names dispatch on ``_accel.USE_NUMBA``.
Elements are always summed in index order.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

_CHUNK = 8192


# -- numba -------------------------------------------------------------------


@njit
def _values_numba(points, consts, centers, radii):
    m = points.shape[0]
    n = consts.shape[0]
    out = np.zeros(m)
    for k in range(m):
        x0 = points[k, 0]
        x1 = points[k, 1]
        x2 = points[k, 2]
        acc = 0.0
        for i in range(n):
            d0 = (centers[i, 0] - x0) / radii[i, 0]
            d1 = (centers[i, 1] - x1) / radii[i, 1]
            d2 = (centers[i, 2] - x2) / radii[i, 2]
            acc += consts[i] * math.exp(-0.5 * (d0 * d0 + d1 * d1 + d2 * d2))
        out[k] = acc
    return out


@njit
def _position_grad_numba(points, consts, centers, radii):
    m = points.shape[0]
    n = consts.shape[0]
    vals = np.zeros(m)
    grad = np.zeros((m, 3))
    for k in range(m):
        acc = 0.0
        g0 = 0.0
        g1 = 0.0
        g2 = 0.0
        for i in range(n):
            e0 = points[k, 0] - centers[i, 0]
            e1 = points[k, 1] - centers[i, 1]
            e2 = points[k, 2] - centers[i, 2]
            s0 = radii[i, 0] * radii[i, 0]
            s1 = radii[i, 1] * radii[i, 1]
            s2 = radii[i, 2] * radii[i, 2]
            f = consts[i] * math.exp(-0.5 * (e0 * e0 / s0 + e1 * e1 / s1 + e2 * e2 / s2))
            acc += f
            g0 -= f * e0 / s0
            g1 -= f * e1 / s1
            g2 -= f * e2 / s2
        vals[k] = acc
        grad[k, 0] = g0
        grad[k, 1] = g1
        grad[k, 2] = g2
    return vals, grad


@njit
def _weighted_param_grad_numba(points, weights, consts, centers, radii):
    m = points.shape[0]
    n = consts.shape[0]
    out = np.zeros((n, 7))
    for k in range(m):
        w = weights[k]
        if w == 0.0:
            continue
        for i in range(n):
            e0 = points[k, 0] - centers[i, 0]
            e1 = points[k, 1] - centers[i, 1]
            e2 = points[k, 2] - centers[i, 2]
            s0 = radii[i, 0] * radii[i, 0]
            s1 = radii[i, 1] * radii[i, 1]
            s2 = radii[i, 2] * radii[i, 2]
            g = math.exp(-0.5 * (e0 * e0 / s0 + e1 * e1 / s1 + e2 * e2 / s2))
            wf = w * consts[i] * g
            out[i, 0] += w * g
            out[i, 1] += wf * e0 / s0
            out[i, 2] += wf * e1 / s1
            out[i, 3] += wf * e2 / s2
            out[i, 4] += wf * e0 * e0 / (s0 * radii[i, 0])
            out[i, 5] += wf * e1 * e1 / (s1 * radii[i, 1])
            out[i, 6] += wf * e2 * e2 / (s2 * radii[i, 2])
    return out


@njit
def _accumulate_numba(consts, centers, radii, origin, cell, shape, half_width):
    field = np.zeros((shape[0], shape[1], shape[2]))
    n = consts.shape[0]
    lo = np.zeros(3, dtype=np.int64)
    hi = np.zeros(3, dtype=np.int64)
    for i in range(n):
        empty = False
        for d in range(3):
            reach = radii[i, d] * half_width
            af = (centers[i, d] - reach - origin[d]) / cell
            bf = (centers[i, d] + reach - origin[d]) / cell
            af = min(max(af, -1.0), shape[d] + 1.0)
            bf = min(max(bf, -1.0), shape[d] + 1.0)
            a = max(int(math.ceil(af)), 0)
            b = min(int(math.floor(bf)), shape[d] - 1)
            if a > b:
                empty = True
            lo[d] = a
            hi[d] = b
        if empty:
            continue
        gx = np.empty(hi[0] - lo[0] + 1)
        gy = np.empty(hi[1] - lo[1] + 1)
        gz = np.empty(hi[2] - lo[2] + 1)
        for a in range(gx.shape[0]):
            t = (origin[0] + (lo[0] + a) * cell - centers[i, 0]) / radii[i, 0]
            gx[a] = math.exp(-0.5 * t * t)
        for b in range(gy.shape[0]):
            t = (origin[1] + (lo[1] + b) * cell - centers[i, 1]) / radii[i, 1]
            gy[b] = math.exp(-0.5 * t * t)
        for c in range(gz.shape[0]):
            t = (origin[2] + (lo[2] + c) * cell - centers[i, 2]) / radii[i, 2]
            gz[c] = math.exp(-0.5 * t * t)
        ci = consts[i]
        for a in range(gx.shape[0]):
            fa = ci * gx[a]
            for b in range(gy.shape[0]):
                fab = fa * gy[b]
                for c in range(gz.shape[0]):
                    field[lo[0] + a, lo[1] + b, lo[2] + c] += fab * gz[c]
    return field


@njit
def _sigmoid_scalar(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


@njit
def _classification_numba(points, labels, consts, centers, radii, alpha, beta, isolevel):
    """Sum over samples of beta*G^2 (label 0) or (1-G)^2 (label 1), and the
    summed gradient of that loss with respect to every element parameter."""
    m = points.shape[0]
    n = consts.shape[0]
    grad = np.zeros((n, 7))
    inv2 = np.empty((n, 3))
    for i in range(n):
        for d in range(3):
            inv2[i, d] = 1.0 / (radii[i, d] * radii[i, d])
    g = np.empty(n)
    total = 0.0
    for k in range(m):
        f = 0.0
        for i in range(n):
            e0 = points[k, 0] - centers[i, 0]
            e1 = points[k, 1] - centers[i, 1]
            e2 = points[k, 2] - centers[i, 2]
            g[i] = math.exp(-0.5 * (e0 * e0 * inv2[i, 0] + e1 * e1 * inv2[i, 1] + e2 * e2 * inv2[i, 2]))
            f += consts[i] * g[i]
        s = _sigmoid_scalar(alpha * (f - isolevel))
        if labels[k] == 0:
            total += beta * s * s
            dl = 2.0 * beta * s
        else:
            total += (1.0 - s) * (1.0 - s)
            dl = -2.0 * (1.0 - s)
        w = dl * alpha * s * (1.0 - s)
        if w == 0.0:
            continue
        for i in range(n):
            e0 = points[k, 0] - centers[i, 0]
            e1 = points[k, 1] - centers[i, 1]
            e2 = points[k, 2] - centers[i, 2]
            wf = w * consts[i] * g[i]
            grad[i, 0] += w * g[i]
            a0 = wf * e0 * inv2[i, 0]
            a1 = wf * e1 * inv2[i, 1]
            a2 = wf * e2 * inv2[i, 2]
            grad[i, 1] += a0
            grad[i, 2] += a1
            grad[i, 3] += a2
            grad[i, 4] += a0 * e0 / radii[i, 0]
            grad[i, 5] += a1 * e1 / radii[i, 1]
            grad[i, 6] += a2 * e2 / radii[i, 2]
    return total, grad


# -- numpy -------------------------------------------------------------------


def _values_numpy(points, consts, centers, radii):
    out = np.empty(points.shape[0])
    for s in range(0, points.shape[0], _CHUNK):
        x = points[s:s + _CHUNK]
        acc = np.zeros(x.shape[0])
        for i in range(consts.shape[0]):
            d = (centers[i] - x) / radii[i]
            acc += consts[i] * np.exp(-0.5 * np.einsum("ij,ij->i", d, d))
        out[s:s + _CHUNK] = acc
    return out


def _position_grad_numpy(points, consts, centers, radii):
    vals = np.zeros(points.shape[0])
    grad = np.zeros((points.shape[0], 3))
    for i in range(consts.shape[0]):
        e = points - centers[i]
        s = radii[i] * radii[i]
        f = consts[i] * np.exp(-0.5 * np.einsum("ij,ij->i", e * e, np.broadcast_to(1.0 / s, e.shape)))
        vals += f
        grad -= f[:, None] * e / s
    return vals, grad


def _weighted_param_grad_numpy(points, weights, consts, centers, radii):
    out = np.zeros((consts.shape[0], 7))
    for s in range(0, points.shape[0], _CHUNK):
        x = points[s:s + _CHUNK]
        w = weights[s:s + _CHUNK]
        e = x[:, None, :] - centers[None, :, :]           # (m, n, 3)
        s2 = radii * radii
        g = np.exp(-0.5 * np.sum(e * e / s2, axis=2))     # (m, n)
        wg = w[:, None] * g
        wf = wg * consts[None, :]
        out[:, 0] += wg.sum(axis=0)
        out[:, 1:4] += np.einsum("mn,mnd->nd", wf, e / s2)
        out[:, 4:7] += np.einsum("mn,mnd->nd", wf, e * e / (s2 * radii))
    return out


def _accumulate_numpy(consts, centers, radii, origin, cell, shape, half_width):
    field = np.zeros(tuple(int(s) for s in shape))
    for i in range(consts.shape[0]):
        reach = radii[i] * half_width
        upper = np.asarray(shape, dtype=float) + 1.0
        af = np.clip((centers[i] - reach - origin) / cell, -1.0, upper)
        bf = np.clip((centers[i] + reach - origin) / cell, -1.0, upper)
        lo = np.maximum(np.ceil(af), 0).astype(np.int64)
        hi = np.minimum(np.floor(bf), np.asarray(shape) - 1).astype(np.int64)
        if np.any(lo > hi):
            continue
        axes = []
        for d in range(3):
            t = (origin[d] + np.arange(lo[d], hi[d] + 1) * cell - centers[i, d]) / radii[i, d]
            axes.append(np.exp(-0.5 * t * t))
        block = consts[i] * axes[0][:, None, None] * axes[1][None, :, None] * axes[2][None, None, :]
        field[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1] += block
    return field


def _classification_numpy(points, labels, consts, centers, radii, alpha, beta, isolevel):
    grad = np.zeros((consts.shape[0], 7))
    total = 0.0
    s2 = radii * radii
    for s in range(0, points.shape[0], _CHUNK):
        x = points[s:s + _CHUNK]
        e = x[:, None, :] - centers[None, :, :]
        g = np.exp(-0.5 * np.sum(e * e / s2, axis=2))
        f = np.zeros(x.shape[0])
        for i in range(consts.shape[0]):
            f += consts[i] * g[:, i]
        z = alpha * (f - isolevel)
        sig = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
        inside = labels[s:s + _CHUNK] == 0
        total += float(np.sum(np.where(inside, beta * sig * sig, (1.0 - sig) ** 2)))
        dl = np.where(inside, 2.0 * beta * sig, -2.0 * (1.0 - sig))
        w = dl * alpha * sig * (1.0 - sig)
        wg = w[:, None] * g
        wf = wg * consts[None, :]
        grad[:, 0] += wg.sum(axis=0)
        grad[:, 1:4] += np.einsum("mn,mnd->nd", wf, e / s2)
        grad[:, 4:7] += np.einsum("mn,mnd->nd", wf, e * e / (s2 * radii))
    return total, grad


if USE_NUMBA:
    field_values = _values_numba
    position_grad = _position_grad_numba
    weighted_param_grad = _weighted_param_grad_numba
    accumulate = _accumulate_numba
    classification = _classification_numba
else:
    field_values = _values_numpy
    position_grad = _position_grad_numpy
    weighted_param_grad = _weighted_param_grad_numpy
    accumulate = _accumulate_numpy
    classification = _classification_numpy
