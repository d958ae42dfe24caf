"""Compiled inner loops. Sequential by design: results must not depend on scheduling."""
import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _lerp_setup(x, n):
    if x < 0.0:
        x = 0.0
    elif x > n - 1:
        x = n - 1.0
    i0 = int(np.floor(x))
    if i0 > n - 2:
        i0 = max(n - 2, 0)
    i1 = min(i0 + 1, n - 1)
    return i0, i1, x - i0


@numba.njit(cache=True, nogil=True)
def bilinear_gather(values, xs, ys, out):
    """``out[k, c]`` = clamp-to-edge bilinear sample of ``values[..., c]`` at ``(xs[k], ys[k])``."""
    h, w, nc = values.shape
    for k in range(xs.shape[0]):
        x0, x1, fx = _lerp_setup(xs[k], w)
        y0, y1, fy = _lerp_setup(ys[k], h)
        for c in range(nc):
            top = (1.0 - fx) * values[y0, x0, c] + fx * values[y0, x1, c]
            bottom = (1.0 - fx) * values[y1, x0, c] + fx * values[y1, x1, c]
            out[k, c] = (1.0 - fy) * top + fy * bottom


@numba.njit(cache=True, nogil=True)
def advect_step(velocity, disp):
    """In-place ``disp += velocity(grid + disp)``; returns False on a non-finite result."""
    h, w, _ = velocity.shape
    ok = True
    for i in range(h):
        for j in range(w):
            x0, x1, fx = _lerp_setup(j + disp[i, j, 0], w)
            y0, y1, fy = _lerp_setup(i + disp[i, j, 1], h)
            for c in range(2):
                top = (1.0 - fx) * velocity[y0, x0, c] + fx * velocity[y0, x1, c]
                bottom = (1.0 - fx) * velocity[y1, x0, c] + fx * velocity[y1, x1, c]
                disp[i, j, c] += (1.0 - fy) * top + fy * bottom
            if not (np.isfinite(disp[i, j, 0]) and np.isfinite(disp[i, j, 1])):
                ok = False
    return ok


@numba.njit(cache=True, nogil=True)
def splat(numerator, denominator, data, weight, disp):
    """Scatter ``weight * data`` through ``disp`` with a bilinear footprint.

    Sources whose destination falls outside ``[-0.5, w-0.5) x [-0.5, h-0.5)``
    are dropped, as are footprint corners outside the raster.
    """
    h, w, nc = data.shape
    for i in range(h):
        for j in range(w):
            x = j + np.float64(disp[i, j, 0])
            y = i + np.float64(disp[i, j, 1])
            if not (x >= -0.5 and x < w - 0.5 and y >= -0.5 and y < h - 0.5):
                continue
            x0 = int(np.floor(x))
            y0 = int(np.floor(y))
            fx = x - x0
            fy = y - y0
            wt = weight[i, j]
            for dy in range(2):
                yy = y0 + dy
                if yy < 0 or yy >= h:
                    continue
                by = fy if dy else 1.0 - fy
                for dx in range(2):
                    xx = x0 + dx
                    if xx < 0 or xx >= w:
                        continue
                    b = (fx if dx else 1.0 - fx) * by
                    if b <= 0.0:
                        continue
                    wb = wt * b
                    denominator[yy, xx] += wb
                    for c in range(nc):
                        numerator[yy, xx, c] += wb * data[i, j, c]


@numba.njit(cache=True, nogil=True)
def diffuse_fill(vals, known, holes, max_iters, tol):
    """Jacobi diffusion over the flat hole indices; updates ``vals``/``known`` in place.

    Returns the number of sweeps performed.
    """
    nc = vals.shape[1]
    nh = holes.shape[0]
    h, w = known.shape
    new = np.zeros((nh, nc))
    ready = np.zeros(nh, np.bool_)
    sweeps = 0
    # grow the known region until every hole has been reached
    while sweeps < max_iters:
        sweeps += 1
        for k in range(nh):
            p = holes[k]
            i = p // w
            j = p - i * w
            cnt = 0
            for c in range(nc):
                new[k, c] = 0.0
            if j > 0 and known[i, j - 1]:
                cnt += 1
                for c in range(nc):
                    new[k, c] += vals[p - 1, c]
            if j < w - 1 and known[i, j + 1]:
                cnt += 1
                for c in range(nc):
                    new[k, c] += vals[p + 1, c]
            if i > 0 and known[i - 1, j]:
                cnt += 1
                for c in range(nc):
                    new[k, c] += vals[p - w, c]
            if i < h - 1 and known[i + 1, j]:
                cnt += 1
                for c in range(nc):
                    new[k, c] += vals[p + w, c]
            ready[k] = cnt > 0
            if cnt > 0:
                for c in range(nc):
                    new[k, c] /= cnt
        change = 0.0
        pending = False
        for k in range(nh):
            p = holes[k]
            i = p // w
            j = p - i * w
            if not ready[k]:
                pending = True
                continue
            if not known[i, j]:
                pending = True
                known[i, j] = True
            for c in range(nc):
                d = abs(new[k, c] - vals[p, c])
                if d > change:
                    change = d
                vals[p, c] = new[k, c]
        if not pending:
            if change < tol:
                return sweeps
            break
    if sweeps >= max_iters:
        return sweeps
    # every pixel is known now: same update with a fixed neighbor table
    nbr = np.empty((nh, 4), np.int64)
    cnts = np.empty(nh, np.int64)
    for k in range(nh):
        p = holes[k]
        i = p // w
        j = p - i * w
        n = 0
        if j > 0:
            nbr[k, n] = p - 1
            n += 1
        if j < w - 1:
            nbr[k, n] = p + 1
            n += 1
        if i > 0:
            nbr[k, n] = p - w
            n += 1
        if i < h - 1:
            nbr[k, n] = p + w
            n += 1
        cnts[k] = n
    while sweeps < max_iters:
        sweeps += 1
        for k in range(nh):
            for c in range(nc):
                acc = 0.0
                for m in range(cnts[k]):
                    acc += vals[nbr[k, m], c]
                new[k, c] = acc / cnts[k]
        change = 0.0
        for k in range(nh):
            p = holes[k]
            for c in range(nc):
                d = abs(new[k, c] - vals[p, c])
                if d > change:
                    change = d
                vals[p, c] = new[k, c]
        if change < tol:
            break
    return sweeps
