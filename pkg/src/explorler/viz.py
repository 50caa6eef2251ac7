"""Parameter-space landscape pictures: a Gaussian cloud around checkpoints,
projected onto its top-2 PCA plane and rendered as a contour map.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn import FlatParams

VARIANCE_FLOOR = 1e-12


def _as_matrix(points):
    rows = [p.values if isinstance(p, FlatParams) else np.asarray(p, dtype=np.float64) for p in points]
    if not rows:
        return np.zeros((0, 0))
    return np.stack(rows).astype(np.float64)


def sample_gaussian_cloud(checkpoints, count, rng):
    """Draw ``count`` points from a diagonal Gaussian fitted to ``checkpoints``."""
    if len(checkpoints) < 2:
        raise ValueError("need at least two checkpoints to fit a Gaussian")
    if count < 0:
        raise ValueError("count must be >= 0")
    x = _as_matrix(checkpoints)
    mu = x.mean(axis=0)
    std = np.sqrt(np.maximum(x.var(axis=0), VARIANCE_FLOOR))
    samples = mu + std * rng.standard_normal((count, x.shape[1]))
    first = checkpoints[0]
    if isinstance(first, FlatParams):
        return [first.with_values(s) for s in samples]
    return list(samples)


@dataclass
class PcaBasis:
    mean: np.ndarray
    directions: np.ndarray  # (k, dim), orthonormal rows
    explained_variance: np.ndarray

    def project(self, points):
        return (_as_matrix(points) - self.mean) @ self.directions.T

    def reconstruct(self, coords):
        return self.mean + np.asarray(coords) @ self.directions


def pca_project(points, k=2, max_iter=500, tol=1e-10, seed=0):
    """Top-``k`` principal directions by power iteration with deflation.

    The covariance is never formed: ``C v = X^T (X v) / (n - 1)`` on the
    centered data, which keeps memory linear in the parameter dimension.
    Returns ``(basis, coords)``.
    """
    x = _as_matrix(points)
    n = len(x)
    if n < k + 1:
        raise ValueError(f"need at least {k + 1} points for a {k}-D projection")
    mean = x.mean(axis=0)
    xc = x - mean
    scale = float(np.abs(xc).max())
    if scale == 0.0:
        raise ValueError("degenerate covariance: all points are identical")

    def cov(v):
        return xc.T @ (xc @ v) / (n - 1)

    rng = np.random.default_rng(seed)
    dirs, variances = [], []
    for _ in range(k):
        v = rng.standard_normal(x.shape[1])
        v = _orthonormalize(v, dirs)
        for _ in range(max_iter):
            w = _orthonormalize(cov(v), dirs)
            if w is None:
                # remaining variance is zero; any orthogonal direction will do
                break
            if w @ v < 0:
                w = -w
            done = np.linalg.norm(w - v) < tol
            v = w
            if done:
                break
        dirs.append(v)
        variances.append(max(float(v @ cov(v)), 0.0))

    order = np.argsort(variances, kind="stable")[::-1]
    basis = PcaBasis(mean, np.stack([dirs[i] for i in order]), np.array([variances[i] for i in order]))
    return basis, xc @ basis.directions.T


def _orthonormalize(v, dirs):
    # two Gram-Schmidt passes keep orthogonality at machine precision
    for _ in range(2):
        for d in dirs:
            v = v - (v @ d) * d
    norm = float(np.linalg.norm(v))
    if norm < 1e-300:
        return None
    return v / norm


@dataclass
class ContourGrid:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # values[j, i] at (xs[i], ys[j])

    def rows(self):
        for j, y in enumerate(self.ys):
            for i, x in enumerate(self.xs):
                yield float(x), float(y), float(self.values[j, i])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("x", "y", "value"))
            for x, y, v in self.rows():
                w.writerow((repr(x), repr(y), repr(v)))


def _axis(lo, hi, resolution, margin):
    span = hi - lo
    pad = margin * span if span > 0 else 0.5
    return np.linspace(lo - pad, hi + pad, resolution)


def contour_grid(coords, values, resolution=50, neighbors=8, power=2.0, margin=0.05):
    """Inverse-distance-weighted interpolation of ``values`` on a regular grid."""
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    values = np.asarray(values, dtype=np.float64).ravel()
    if len(coords) == 0:
        raise ValueError("no samples to grid")
    if len(coords) != len(values):
        raise ValueError("coords and values are not aligned")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    xs = _axis(coords[:, 0].min(), coords[:, 0].max(), resolution, margin)
    ys = _axis(coords[:, 1].min(), coords[:, 1].max(), resolution, margin)
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    d2 = ((nodes[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2)
    k = min(neighbors, len(coords))
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    out = np.empty(len(nodes))
    for row, idx in enumerate(nearest):
        d = np.sqrt(d2[row, idx])
        hit = d == 0.0
        if hit.any():
            out[row] = values[idx[hit]].mean()
        else:
            w = d ** -power
            # offset by the nearest value so constant fields come out exact
            base = values[idx[0]]
            out[row] = base + float(w @ (values[idx] - base)) / float(w.sum())
    return ContourGrid(xs, ys, out.reshape(resolution, resolution))


# -- SVG rendering ---------------------------------------------------------------

def contour_levels(values, count=10):
    lo, hi = float(np.min(values)), float(np.max(values))
    return list(np.linspace(lo, hi, count + 2)[1:-1])


def marching_squares(grid, level):
    """Line segments ``((x0, y0), (x1, y1))`` of the ``level`` set of ``grid``."""
    xs, ys, v = grid.xs, grid.ys, grid.values
    segments = []

    def cross(p, q, vp, vq):
        t = 0.5 if vq == vp else (level - vp) / (vq - vp)
        return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))

    for j in range(len(ys) - 1):
        for i in range(len(xs) - 1):
            corners = [(xs[i], ys[j]), (xs[i + 1], ys[j]), (xs[i + 1], ys[j + 1]), (xs[i], ys[j + 1])]
            vals = [v[j, i], v[j, i + 1], v[j + 1, i + 1], v[j + 1, i]]
            points = []
            for a in range(4):
                b = (a + 1) % 4
                if (vals[a] >= level) != (vals[b] >= level):
                    points.append(cross(corners[a], corners[b], vals[a], vals[b]))
            if len(points) == 2:
                segments.append((points[0], points[1]))
            elif len(points) == 4:
                # saddle: pair edges by the cell-center value
                center = sum(vals) / 4.0
                if (center >= level) == (vals[0] >= level):
                    # corners 0 and 2 are joined; 1 and 3 get cut off
                    segments += [(points[0], points[1]), (points[2], points[3])]
                else:
                    segments += [(points[3], points[0]), (points[1], points[2])]
    return segments


def _color(t):
    # blue (low) to red (high)
    return f"rgb({int(255 * t)},{int(80 + 60 * (1 - abs(2 * t - 1)))},{int(255 * (1 - t))})"


def contour_svg(grid, anchors=None, cloud=None, levels=10, size=480):
    """SVG of the level sets, with optional anchor (black) and cloud (grey) points."""
    x0, x1 = grid.xs[0], grid.xs[-1]
    y0, y1 = grid.ys[0], grid.ys[-1]
    pad = 30

    def px(x, y):
        sx = pad + (x - x0) / (x1 - x0) * (size - 2 * pad)
        sy = size - pad - (y - y0) / (y1 - y0) * (size - 2 * pad)
        return sx, sy

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    lv = contour_levels(grid.values, levels)
    span = (lv[-1] - lv[0]) or 1.0
    for level in lv:
        color = _color((level - lv[0]) / span)
        for (a, b) in marching_squares(grid, level):
            (ax, ay), (bx, by) = px(*a), px(*b)
            out.append(f'<line x1="{ax:.2f}" y1="{ay:.2f}" x2="{bx:.2f}" y2="{by:.2f}" '
                       f'stroke="{color}" stroke-width="1.2"/>')
    for pts, fill, r in ((cloud, "#999999", 2), (anchors, "black", 3.5)):
        if pts is None:
            continue
        for x, y in np.asarray(pts).reshape(-1, 2):
            cx, cy = px(x, y)
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r}" fill="{fill}"/>')
    out.append("</svg>")
    return "\n".join(out)


def landscape(checkpoints, evaluate, rng, count=100, resolution=40):
    """Cloud sampling, scoring, joint PCA and gridding in one call.

    ``evaluate`` maps a FlatParams to a mean return. Returns a dict with the
    basis, anchor and cloud coordinates, cloud returns and the grid.
    """
    cloud = sample_gaussian_cloud(checkpoints, count, rng)
    returns = np.array([evaluate(c) for c in cloud])
    basis, coords = pca_project(list(checkpoints) + list(cloud))
    n = len(checkpoints)
    anchor_xy, cloud_xy = coords[:n], coords[n:]
    grid = contour_grid(cloud_xy, returns, resolution)
    return {"basis": basis, "anchors": anchor_xy, "cloud": cloud_xy, "returns": returns, "grid": grid}


def write_landscape(result, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "anchors.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("index", "pc1", "pc2"))
        for i, (x, y) in enumerate(result["anchors"]):
            w.writerow((i, repr(float(x)), repr(float(y))))
    with open(out / "cloud.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("index", "pc1", "pc2", "mean_return"))
        for i, ((x, y), r) in enumerate(zip(result["cloud"], result["returns"])):
            w.writerow((i, repr(float(x)), repr(float(y)), repr(float(r))))
    result["grid"].to_csv(out / "grid.csv")
    (out / "contour.svg").write_text(contour_svg(result["grid"], result["anchors"], result["cloud"]))
    return out

