"""Tiled evaluation of the environment shading sum and its adjoints.

Private engine behind :mod:`gradshade.render` and :mod:`gradshade.grad`.

The image model per foreground pixel p and color channel k is

    I_k(p) = sum_i f_k(p, i) * L_k(i) * max(0, n_p . omega_i) * w_i

over all texels i of an equirectangular light table, with the DSBRDF lobes of
:mod:`gradshade.brdf` evaluated at base = clamp(h . n, EPS_BASE, 1) and the
coefficient splines at theta_d. Work runs over the foreground-pixel stream in
(pixel-chunk x light-block) tiles. The traversal order (region, then chunk,
then block) and all reduction orders are fixed, so outputs are bit-identical
for any worker count: threads only trade whole chunks and per-chunk partial
sums are combined in chunk order afterwards.

Pixel powers use expm1(b * log(base)) + 1, which is exact to a few ulp except
for results tiny enough (< ~1e-12) to be negligible in the light sum, and is
uniformly fast where np.power is not.
"""

from __future__ import annotations

import queue
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import spline
from .brdf import EPS_BASE, OVERFLOW_LIMIT, ShadingOverflowError

PIXEL_CHUNK = 256
LIGHT_BLOCK = 1024

# |omega_i + omega_p| below this leaves the half vector undefined; the pair
# contributes nothing and nothing propagates through it.
DEGENERATE_HALF = 1e-8

GROUPS = ("normal", "light", "material")


class _ScratchPool:
    """Reusable per-worker buffer dictionaries, keyed by (name, shape)."""

    def __init__(self):
        self._q: queue.SimpleQueue = queue.SimpleQueue()

    @contextmanager
    def lease(self):
        try:
            store = self._q.get_nowait()
        except queue.Empty:
            store = {}
        try:
            yield store
        finally:
            self._q.put(store)


_POOL = _ScratchPool()


def _buf(store: dict, name: str, shape: tuple) -> np.ndarray:
    key = (name, shape)
    arr = store.get(key)
    if arr is None:
        arr = store[key] = np.empty(shape)
    return arr


@dataclass
class ShadingProblem:
    """Prepared per-scene arrays over the foreground stream (row-major)."""

    normals: np.ndarray  # (F, 3)
    pixel_xy: np.ndarray  # (F, 2) int32, (px, py) for error reports
    region_of: np.ndarray  # (F,) int32
    chunks: list  # [(region, stream-index array)] in traversal order
    materials: list  # DsbrdfMaterial per region
    dirs: np.ndarray  # (I, 3)
    weights: np.ndarray  # (I,)
    view: np.ndarray  # (3,) when ortho else (F, 3)
    ortho: bool
    half_cols: np.ndarray | None = None  # (I, 3), ortho only
    valid_cols: np.ndarray | None = None  # (I,) float mask, None when all valid
    basis_cols: np.ndarray | None = None  # (I, 6), ortho only

    @property
    def pixel_count(self) -> int:
        return self.normals.shape[0]

    @property
    def light_count(self) -> int:
        return self.dirs.shape[0]


@dataclass
class PairCache:
    """Per-(pixel, light) quantities that are fixed while only the material moves."""

    ell: np.ndarray  # (F, I) log of the clamped h . n base
    cmaxv: np.ndarray  # (F, I) max(0, n . omega) with invalid pairs zeroed
    basis: np.ndarray | None  # (F, I, 6) for pinhole cameras, else None

    @property
    def nbytes(self) -> int:
        n = self.ell.nbytes + self.cmaxv.nbytes
        return n + (self.basis.nbytes if self.basis is not None else 0)


@dataclass
class TransferCache:
    """f * cmax per (pixel, light, channel); the image is linear in the light given this."""

    contrib: np.ndarray  # (F, I, 3)

    @property
    def nbytes(self) -> int:
        return self.contrib.nbytes


def prepare(normals_img, mask, view, materials, dirs, weights, region_ids=None) -> ShadingProblem:
    """Flatten a scene to the foreground stream and precompute light geometry.

    ``view`` is a (3,) constant direction (orthographic) or an (H, W, 3)
    per-pixel grid. ``region_ids`` defaults to a single region 0.
    """
    ys, xs = np.nonzero(mask)
    normals_fg = np.ascontiguousarray(normals_img[ys, xs], dtype=np.float64)
    pixel_xy = np.stack([xs, ys], axis=1).astype(np.int32)
    count = normals_fg.shape[0]

    if region_ids is None:
        region_of = np.zeros(count, dtype=np.int32)
    else:
        region_of = np.ascontiguousarray(region_ids[ys, xs], dtype=np.int32)

    chunks = []
    for r in range(len(materials)):
        stream = np.nonzero(region_of == r)[0]
        for start in range(0, stream.size, PIXEL_CHUNK):
            chunks.append((r, stream[start : start + PIXEL_CHUNK]))

    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    view = np.asarray(view, dtype=np.float64)
    ortho = view.ndim == 1

    problem = ShadingProblem(
        normals=normals_fg,
        pixel_xy=pixel_xy,
        region_of=region_of,
        chunks=chunks,
        materials=list(materials),
        dirs=dirs,
        weights=weights,
        view=view if ortho else np.ascontiguousarray(view[ys, xs], dtype=np.float64),
        ortho=ortho,
    )
    if ortho:
        s = dirs + view[None, :]
        norms = np.linalg.norm(s, axis=1)
        bad = norms < DEGENERATE_HALF
        safe = np.where(bad, 1.0, norms)
        half = s / safe[:, None]
        problem.half_cols = half
        problem.valid_cols = None if not bad.any() else (~bad).astype(np.float64)
        theta = np.arccos(np.clip(np.einsum("id,id->i", dirs, half), 0.0, 1.0))
        problem.basis_cols = spline.basis_matrix(theta)
    return problem


def _curves(problem: ShadingProblem) -> list:
    """Per-region spline coefficient rows over the light axis, (3, 3, 2, I); ortho only."""
    return [m.control_points @ problem.basis_cols.T for m in problem.materials]


def _pair_geometry(store, nc, view_c, dirs_t, need_basis: bool):
    """Per-pair half-vector quantities for a pinhole tile.

    Returns (hdn, valid, half, basis); valid is None when every pair is fine.
    """
    c, b = nc.shape[0], dirs_t.shape[0]
    s = _buf(store, "pg_s", (c, b, 3))
    np.add(view_c[:, None, :], dirs_t[None, :, :], out=s)
    nn = _buf(store, "pg_nn", (c, b))
    np.einsum("cbd,cbd->cb", s, s, out=nn)
    np.sqrt(nn, out=nn)
    bad = nn < DEGENERATE_HALF
    valid = None
    if bad.any():
        valid = (~bad).astype(np.float64)
        nn[bad] = 1.0
    s /= nn[:, :, None]
    hdn = _buf(store, "pg_hdn", (c, b))
    np.einsum("cbd,cd->cb", s, nc, out=hdn)
    wih = _buf(store, "pg_wih", (c, b))
    np.einsum("cbd,bd->cb", s, dirs_t, out=wih)
    np.clip(wih, 0.0, 1.0, out=wih)
    theta = np.arccos(wih)
    basis = spline.basis_matrix(theta) if need_basis else None
    return hdn, valid, s, basis


def _raise_overflow(problem, ci, f, k):
    c_idx, l_idx = np.unravel_index(int(np.nanargmax(np.where(np.isfinite(f), np.abs(f), np.inf))), f.shape)
    px, py = problem.pixel_xy[ci[c_idx]]
    raise ShadingOverflowError(
        f"lobe sum for channel {k} overflowed at pixel ({int(px)}, {int(py)}), light texel {int(l_idx)}"
    )


def _lobe_sum(store, ell, curves_t, k, f, check, problem=None, ci=None):
    """f <- sum_s expm1(a_ks * (expm1(b_ks * ell) + 1)) for one tile and channel."""
    t = _buf(store, "lobe_t", ell.shape)
    for s in range(3):
        a_row, b_row = curves_t[k, s, 0], curves_t[k, s, 1]
        target = f if s == 0 else t
        np.multiply(ell, b_row, out=target)
        np.expm1(target, out=target)
        target += 1.0
        target *= a_row
        np.expm1(target, out=target)
        if s > 0:
            f += t
    if check:
        top = float(np.max(f))
        if not top <= OVERFLOW_LIMIT:  # catches NaN too
            _raise_overflow(problem, ci, f, k)


def _forward_chunk(problem, env_lw, region, ci, transfer=None, pair=None):
    """Shade one pixel chunk; returns its (C, 3) image block."""
    c = ci.shape[0]
    i_total = problem.light_count
    out = np.zeros((c, 3))

    if transfer is not None:
        for b0 in range(0, i_total, LIGHT_BLOCK):
            b1 = min(i_total, b0 + LIGHT_BLOCK)
            block = transfer.contrib[ci, b0:b1, :]
            for k in range(3):
                out[:, k] += np.einsum("cb,b->c", block[:, :, k], env_lw[b0:b1, k])
        return out

    with _POOL.lease() as store:
        nc = problem.normals[ci]
        if pair is None:
            ndl = _buf(store, "ndl", (c, i_total))
            np.matmul(nc, problem.dirs.T, out=ndl)
            if problem.ortho:
                hdn_all = _buf(store, "hdn_all", (c, i_total))
                np.matmul(nc, problem.half_cols.T, out=hdn_all)
            curves = problem.materials[region].control_points
            if problem.ortho:
                curves = curves @ problem.basis_cols.T  # (3, 3, 2, I)

        for b0 in range(0, i_total, LIGHT_BLOCK):
            b1 = min(i_total, b0 + LIGHT_BLOCK)
            b = b1 - b0
            if pair is not None:
                cmaxv = pair.cmaxv[ci, b0:b1]
                if not cmaxv.any():
                    continue
                ell = pair.ell[ci, b0:b1]
                if problem.ortho:
                    curves_t = problem.materials[region].control_points @ problem.basis_cols[b0:b1].T
                else:
                    curves_t = np.einsum(
                        "kstj,cbj->kstcb", problem.materials[region].control_points, pair.basis[ci, b0:b1]
                    )
            else:
                ndl_t = ndl[:, b0:b1]
                if ndl_t.max() <= 0.0:
                    continue
                cmaxv = _buf(store, "cmaxv", (c, b))
                np.maximum(ndl_t, 0.0, out=cmaxv)
                if problem.ortho:
                    hdn = hdn_all[:, b0:b1]
                    valid = None if problem.valid_cols is None else problem.valid_cols[b0:b1]
                    curves_t = curves[:, :, :, b0:b1]
                else:
                    hdn, valid, _, basis_t = _pair_geometry(store, nc, problem.view[ci], problem.dirs[b0:b1], True)
                    curves_t = np.einsum("kstj,cbj->kstcb", problem.materials[region].control_points, basis_t)
                if valid is not None:
                    cmaxv *= valid
                base = _buf(store, "base", (c, b))
                np.clip(hdn, EPS_BASE, 1.0, out=base)
                ell = _buf(store, "ell", (c, b))
                np.log(base, out=ell)

            f = _buf(store, "f", (c, b))
            for k in range(3):
                _lobe_sum(store, ell, curves_t, k, f, check=True, problem=problem, ci=ci)
                f *= cmaxv
                out[:, k] += np.einsum("cb,b->c", f, env_lw[b0:b1, k])
    return out


def forward(problem, env_flat, *, threads=1, pair=None, transfer=None) -> np.ndarray:
    """Foreground-stream image, shape (F, 3). ``env_flat`` is (I, 3) radiance."""
    env_lw = env_flat * problem.weights[:, None]
    out = np.zeros((problem.pixel_count, 3))
    tasks = problem.chunks

    def run(task):
        region, ci = task
        return ci, _forward_chunk(problem, env_lw, region, ci, transfer=transfer, pair=pair)

    for ci, block in _run_tasks(run, tasks, threads):
        out[ci] = block
    return out


def _run_tasks(fn, tasks, threads):
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, tasks))


def build_pair_cache(problem, *, threads=1, with_basis=None) -> PairCache:
    """Materialize ell / cmaxv (and pinhole basis) for every pair.

    Values are produced by the same tile arithmetic the uncached path uses, so
    shading through the cache is bit-identical to shading without it.
    """
    f_count, i_total = problem.pixel_count, problem.light_count
    if with_basis is None:
        with_basis = not problem.ortho
    ell_all = np.empty((f_count, i_total))
    cmax_all = np.empty((f_count, i_total))
    basis_all = np.empty((f_count, i_total, 6)) if (with_basis and not problem.ortho) else None

    def run(task):
        _, ci = task
        with _POOL.lease() as store:
            c = ci.shape[0]
            nc = problem.normals[ci]
            ndl = _buf(store, "ndl", (c, i_total))
            np.matmul(nc, problem.dirs.T, out=ndl)
            if problem.ortho:
                hdn_all = _buf(store, "hdn_all", (c, i_total))
                np.matmul(nc, problem.half_cols.T, out=hdn_all)
            for b0 in range(0, i_total, LIGHT_BLOCK):
                b1 = min(i_total, b0 + LIGHT_BLOCK)
                b = b1 - b0
                cmaxv = _buf(store, "cmaxv", (c, b))
                np.maximum(ndl[:, b0:b1], 0.0, out=cmaxv)
                if problem.ortho:
                    hdn = hdn_all[:, b0:b1]
                    valid = None if problem.valid_cols is None else problem.valid_cols[b0:b1]
                else:
                    hdn, valid, _, basis_t = _pair_geometry(
                        store, nc, problem.view[ci], problem.dirs[b0:b1], basis_all is not None
                    )
                    if basis_all is not None:
                        basis_all[ci, b0:b1] = basis_t
                if valid is not None:
                    cmaxv *= valid
                base = _buf(store, "base", (c, b))
                np.clip(hdn, EPS_BASE, 1.0, out=base)
                ell = _buf(store, "ell", (c, b))
                np.log(base, out=ell)
                ell_all[ci, b0:b1] = ell
                cmax_all[ci, b0:b1] = cmaxv
        return None

    list(_run_tasks(run, problem.chunks, threads))
    return PairCache(ell=ell_all, cmaxv=cmax_all, basis=basis_all)


def build_transfer(problem, *, threads=1, pair=None) -> TransferCache:
    """Materialize f * cmax for every pair and channel."""
    f_count, i_total = problem.pixel_count, problem.light_count
    contrib = np.empty((f_count, i_total, 3))

    def run(task):
        region, ci = task
        with _POOL.lease() as store:
            c = ci.shape[0]
            nc = problem.normals[ci]
            if pair is None:
                ndl = _buf(store, "ndl", (c, i_total))
                np.matmul(nc, problem.dirs.T, out=ndl)
                if problem.ortho:
                    hdn_all = _buf(store, "hdn_all", (c, i_total))
                    np.matmul(nc, problem.half_cols.T, out=hdn_all)
                    curves = problem.materials[region].control_points @ problem.basis_cols.T
            for b0 in range(0, i_total, LIGHT_BLOCK):
                b1 = min(i_total, b0 + LIGHT_BLOCK)
                b = b1 - b0
                if pair is not None:
                    cmaxv = pair.cmaxv[ci, b0:b1]
                    ell = pair.ell[ci, b0:b1]
                    if problem.ortho:
                        curves_t = problem.materials[region].control_points @ problem.basis_cols[b0:b1].T
                    else:
                        curves_t = np.einsum(
                            "kstj,cbj->kstcb", problem.materials[region].control_points, pair.basis[ci, b0:b1]
                        )
                else:
                    cmaxv = _buf(store, "cmaxv", (c, b))
                    np.maximum(ndl[:, b0:b1], 0.0, out=cmaxv)
                    if problem.ortho:
                        hdn = hdn_all[:, b0:b1]
                        valid = None if problem.valid_cols is None else problem.valid_cols[b0:b1]
                        curves_t = curves[:, :, :, b0:b1]
                    else:
                        hdn, valid, _, basis_t = _pair_geometry(store, nc, problem.view[ci], problem.dirs[b0:b1], True)
                        curves_t = np.einsum("kstj,cbj->kstcb", problem.materials[region].control_points, basis_t)
                    if valid is not None:
                        cmaxv *= valid
                    base = _buf(store, "base", (c, b))
                    np.clip(hdn, EPS_BASE, 1.0, out=base)
                    ell = _buf(store, "ell", (c, b))
                    np.log(base, out=ell)
                f = _buf(store, "f", (c, b))
                for k in range(3):
                    _lobe_sum(store, ell, curves_t, k, f, check=True, problem=problem, ci=ci)
                    f *= cmaxv
                    contrib[ci, b0:b1, k] = f
        return None

    list(_run_tasks(run, problem.chunks, threads))
    return TransferCache(contrib=contrib)


def _backward_chunk(problem, env_lw, lwd, upstream, groups, region, ci, pair, transfer):
    """Adjoints for one chunk.

    Returns (dn_block, denv_partial, dm_partial). dn_block is (C, 3); the
    partials cover the whole light table / material vector and are reduced in
    chunk order by the caller.
    """
    c = ci.shape[0]
    i_total = problem.light_count
    u_c = upstream[ci]
    want_n = "normal" in groups
    want_l = "light" in groups
    want_m = "material" in groups

    dn = np.zeros((c, 3)) if want_n else None
    denv = np.zeros((i_total, 3)) if want_l else None
    dm = np.zeros((3, 3, 2, 6)) if want_m else None

    if transfer is not None:
        # Light-only fast path: contributions are frozen.
        for b0 in range(0, i_total, LIGHT_BLOCK):
            b1 = min(i_total, b0 + LIGHT_BLOCK)
            block = transfer.contrib[ci, b0:b1, :]
            for k in range(3):
                denv[b0:b1, k] += np.einsum("cb,c->b", block[:, :, k], u_c[:, k]) * problem.weights[b0:b1]
        return None, denv, None

    with _POOL.lease() as store:
        nc = problem.normals[ci]
        if pair is None:
            ndl = _buf(store, "ndl", (c, i_total))
            np.matmul(nc, problem.dirs.T, out=ndl)
            if problem.ortho:
                hdn_all = _buf(store, "hdn_all", (c, i_total))
                np.matmul(nc, problem.half_cols.T, out=hdn_all)
        ctrl = problem.materials[region].control_points
        curves = ctrl @ problem.basis_cols.T if (problem.ortho and pair is None) else None

        for b0 in range(0, i_total, LIGHT_BLOCK):
            b1 = min(i_total, b0 + LIGHT_BLOCK)
            b = b1 - b0
            half_t = problem.half_cols[b0:b1] if problem.ortho else None
            if pair is not None:
                cmaxv = pair.cmaxv[ci, b0:b1]
                if not cmaxv.any():
                    continue
                ell = pair.ell[ci, b0:b1]
                base = gate = litv = None  # not needed for material-only passes
                if problem.ortho:
                    curves_t = ctrl @ problem.basis_cols[b0:b1].T
                    basis_t = None
                else:
                    basis_t = pair.basis[ci, b0:b1]
                    curves_t = np.einsum("kstj,cbj->kstcb", ctrl, basis_t)
            else:
                ndl_t = ndl[:, b0:b1]
                if ndl_t.max() <= 0.0:
                    # Every adjoint term carries a max(0, n . omega) or an
                    # indicator of it; a fully dark tile contributes nothing.
                    continue
                cmaxv = _buf(store, "cmaxv", (c, b))
                np.maximum(ndl_t, 0.0, out=cmaxv)
                if problem.ortho:
                    hdn = hdn_all[:, b0:b1]
                    valid = None if problem.valid_cols is None else problem.valid_cols[b0:b1]
                    curves_t = curves[:, :, :, b0:b1]
                    basis_t = None
                else:
                    hdn, valid, half_t, basis_t = _pair_geometry(store, nc, problem.view[ci], problem.dirs[b0:b1], True)
                    curves_t = np.einsum("kstj,cbj->kstcb", ctrl, basis_t)
                if valid is not None:
                    cmaxv *= valid
                base = _buf(store, "base", (c, b))
                np.clip(hdn, EPS_BASE, 1.0, out=base)
                ell = _buf(store, "ell", (c, b))
                np.log(base, out=ell)
                if want_n:
                    litv = _buf(store, "litv", (c, b))
                    np.multiply(ndl_t > 0.0, 1.0, out=litv)
                    if valid is not None:
                        litv *= valid
                    gate = _buf(store, "gate", (c, b))
                    np.multiply((hdn > EPS_BASE) & (hdn < 1.0), 1.0, out=gate)

            t = _buf(store, "bw_t", (c, b))
            x = _buf(store, "bw_x", (c, b))
            e = _buf(store, "bw_e", (c, b))
            m = _buf(store, "bw_m", (c, b))
            f = _buf(store, "bw_f", (c, b))
            dacc = _buf(store, "bw_d", (c, b)) if want_n else None

            for k in range(3):
                need_e = want_n or want_m
                for s in range(3):
                    a_row, b_row = curves_t[k, s, 0], curves_t[k, s, 1]
                    np.multiply(ell, b_row, out=t)
                    np.expm1(t, out=t)
                    t += 1.0  # t = base ** b
                    np.multiply(t, a_row, out=x)
                    np.expm1(x, out=x)  # x = expm1(a * t)
                    if s == 0:
                        f[:] = x
                    else:
                        f += x
                    if need_e:
                        np.add(x, 1.0, out=e)  # e = exp(a * t)
                    if want_n:
                        np.multiply(e, t, out=m)
                        m *= a_row
                        m *= b_row
                        m /= base
                        if s == 0:
                            dacc[:] = m
                        else:
                            dacc += m
                    if want_m:
                        np.multiply(e, t, out=m)
                        m *= cmaxv
                        m *= u_c[:, k : k + 1]
                        _accumulate_material(
                            dm, k, s, m, ell, a_row, env_lw[b0:b1, k],
                            problem.basis_cols[b0:b1] if problem.ortho else basis_t,
                        )
                if want_l:
                    np.multiply(f, cmaxv, out=m)
                    denv[b0:b1, k] += np.einsum("cb,c->b", m, u_c[:, k]) * problem.weights[b0:b1]
                if want_n:
                    np.multiply(f, litv, out=m)
                    g1 = np.einsum("cb,bd->cd", m, lwd[k][b0:b1])
                    g1 *= u_c[:, k : k + 1]
                    dn += g1
                    np.multiply(dacc, cmaxv, out=m)
                    m *= gate
                    m *= env_lw[b0:b1, k]
                    if problem.ortho:
                        g2 = np.einsum("cb,bd->cd", m, half_t)
                    else:
                        g2 = np.einsum("cb,cbd->cd", m, half_t)
                    g2 *= u_c[:, k : k + 1]
                    dn += g2
    return dn, denv, dm


def _accumulate_material(dm, k, s, m, ell, a_row, lw_k, basis_t):
    """Add one tile's contribution to d/d(control points) of channel k, lobe s.

    ``m`` arrives as exp(a t) * t * cmax * u_k per pair and is consumed in
    place; the second coefficient adds the a * ln(base) factor.
    """
    if basis_t.ndim == 2:  # orthographic: basis indexed by light only
        v = np.einsum("cb->b", m) * lw_k
        dm[k, s, 0] += np.einsum("b,bj->j", v, basis_t)
        m *= a_row
        m *= ell
        v = np.einsum("cb->b", m) * lw_k
        dm[k, s, 1] += np.einsum("b,bj->j", v, basis_t)
    else:
        mw = m * lw_k[None, :]
        dm[k, s, 0] += np.einsum("cb,cbj->j", mw, basis_t)
        m *= a_row
        m *= ell
        mw = m * lw_k[None, :]
        dm[k, s, 1] += np.einsum("cb,cbj->j", mw, basis_t)


def backward(problem, env_flat, upstream, groups, *, threads=1, pair=None, transfer=None):
    """Adjoints of the foreground image against a (F, 3) upstream weighting.

    Returns (d_normals (F,3) | None, d_env (I,3) | None, d_materials
    [(3,3,2,6)] | None) for the requested parameter groups.
    """
    groups = frozenset(groups)
    unknown = groups.difference(GROUPS)
    if unknown:
        raise ValueError(f"unknown gradient groups: {sorted(unknown)}")
    if transfer is not None and groups != {"light"}:
        raise ValueError("a transfer cache freezes normals and material; only light gradients remain")
    if pair is not None and "normal" in groups:
        raise ValueError("a pair cache freezes the normals; normal gradients need the uncached path")
    env_lw = env_flat * problem.weights[:, None]
    lwd = [env_lw[:, k : k + 1] * problem.dirs for k in range(3)] if "normal" in groups else None

    def run(task):
        region, ci = task
        return ci, region, _backward_chunk(problem, env_lw, lwd, upstream, groups, region, ci, pair, transfer)

    results = _run_tasks(run, problem.chunks, threads)

    dn_all = np.zeros((problem.pixel_count, 3)) if "normal" in groups else None
    denv_all = np.zeros((problem.light_count, 3)) if "light" in groups else None
    dm_all = [np.zeros((3, 3, 2, 6)) for _ in problem.materials] if "material" in groups else None
    for ci, region, (dn, denv, dm) in results:
        if dn is not None:
            dn_all[ci] = dn
        if denv is not None:
            denv_all += denv
        if dm is not None:
            dm_all[region] += dm
    return dn_all, denv_all, dm_all
