"""Independent brute-force oracles shared by the unit and acceptance tests."""

import numpy as np

DENSE_STEP = 1e-4


def dense_cubes(a, b, step=DENSE_STEP, phase=0.37):
    """Cubes hit by samples every ``step`` meters along the open segment, in order."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    d = b - a
    L = float(np.linalg.norm(d))
    t = (np.arange(int(L / step) + 1) + phase) * (step / L)
    t = t[(t > 0) & (t < 1)]
    c = np.floor(a + t[:, None] * d).astype(np.int64)
    keep = np.ones(len(c), bool)
    keep[1:] = np.any(c[1:] != c[:-1], axis=1)
    return [tuple(r) for r in c[keep].tolist()]


def clip_lengths(a, b):
    """Exact slab clipping of the segment against every cube of its bounding box.

    Returns {cube: crossed length in meters} for cubes crossed with positive length.
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    lo = np.floor(np.minimum(a, b)).astype(int)
    hi = np.floor(np.maximum(a, b)).astype(int)
    g = np.stack(np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(lo, hi)], indexing="ij"), -1).reshape(-1, 3)
    d = b - a
    t0, t1 = np.zeros(len(g)), np.ones(len(g))
    for ax in range(3):
        if d[ax] == 0:
            inside = (g[:, ax] <= a[ax]) & (a[ax] < g[:, ax] + 1)
            t1 = np.where(inside, t1, -1.0)
        else:
            u = (g[:, ax] - a[ax]) / d[ax]
            v = (g[:, ax] + 1 - a[ax]) / d[ax]
            t0 = np.maximum(t0, np.minimum(u, v))
            t1 = np.minimum(t1, np.maximum(u, v))
    L = float(np.linalg.norm(d))
    hit = t1 > t0
    return {tuple(c): float((e - s) * L) for c, s, e in zip(g[hit].tolist(), t0[hit], t1[hit])}


def brute_knn_mean(points, k):
    P = np.asarray(points, float)
    D = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(-1))
    D.sort(axis=1)
    return D[:, 1:k + 1].mean(axis=1)


def points_in_cubes(points, cubes):
    """Count points whose floor cube is in ``cubes``, one point at a time."""
    cubes = set(cubes)
    n = 0
    for p in np.asarray(points, float).reshape(-1, 3):
        if (int(np.floor(p[0])), int(np.floor(p[1])), int(np.floor(p[2]))) in cubes:
            n += 1
    return n


def random_segment(rng, lattice=None):
    if lattice:
        while True:
            a = rng.integers(-20, 20, 3) / lattice
            b = a + rng.integers(-2 * lattice, 2 * lattice + 1, 3) / lattice
            if np.any(a != b):
                return a, b
    a = rng.uniform(-5, 5, 3)
    return a, a + rng.uniform(-2, 2, 3)


def planted_outlier_cloud(seed=0, n=400, n_out=5):
    """Gaussian cluster plus ``n_out`` isolated points far away; returns (points, outlier mask)."""
    rng = np.random.default_rng(seed)
    core = rng.normal(0.0, 1.0, (n, 3))
    far = rng.normal(0.0, 1.0, (n_out, 3))
    far = 200.0 * far / np.linalg.norm(far, axis=1, keepdims=True) + rng.uniform(-5, 5, (n_out, 3))
    pts = np.vstack([core, far])
    perm = rng.permutation(len(pts))
    mask = np.r_[np.zeros(n, bool), np.ones(n_out, bool)][perm]
    return pts[perm], mask


def central_diff(f, x, h=1e-3):
    """Central finite-difference gradient of scalar ``f`` at array ``x`` (modified in place, restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    den = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / den)


def layer_grad_errors(layer, x, rng):
    """Max relative error of backward() against central differences, over input and params.

    The scalar objective is sum(R * layer(x)) for a fixed random R.
    """
    y, _ = layer.forward(x)
    R = rng.normal(size=y.shape)

    def f():
        return float((R * layer.forward(x)[0]).sum())

    _, cache = layer.forward(x)
    dx, grads = layer.backward(cache, R)
    errs = {"input": rel_err(dx, central_diff(f, x))}
    from canyonpl.autoencoder.layers import flatten_grads
    named = dict(layer.param_items())
    for name, g in flatten_grads(layer, grads).items() if hasattr(layer, "layers") or hasattr(layer, "a") \
            else grads.items():
        errs[name] = rel_err(g, central_diff(f, named[name]))
    return errs


def _project_box_hyperplane(v, z, C):
    """Euclidean projection onto {0 <= a <= C, z'a = 0} by bisection on the multiplier."""
    lo, hi = -np.abs(v).max() - C - 1.0, np.abs(v).max() + C + 1.0
    for _ in range(64):
        lam = 0.5 * (lo + hi)
        s = z @ np.clip(v - lam * z, 0.0, C)
        if s > 0:
            lo = lam
        else:
            hi = lam
    return np.clip(v - 0.5 * (lo + hi) * z, 0.0, C)


def svr_dual_pg(K, y, C, eps, iters=20000):
    """Accelerated projected gradient on the 2n-variable SVR dual; returns beta = a+ - a-."""
    n = len(y)
    z = np.concatenate([np.ones(n), -np.ones(n)])
    Q = np.outer(z, z) * np.block([[K, K], [K, K]])
    p = np.concatenate([eps - y, eps + y])
    step = 1.0 / np.linalg.eigvalsh(Q)[-1]
    a = np.zeros(2 * n)
    v = a.copy()
    t = 1.0
    for _ in range(iters):
        a_new = _project_box_hyperplane(v - step * (Q @ v + p), z, C)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        v = a_new + (t - 1) / t_new * (a_new - a)
        done = np.abs(a_new - a).max() < 1e-12
        a, t = a_new, t_new
        if done:
            break
    return a[:n] - a[n:]
