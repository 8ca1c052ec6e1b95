"""Inverse rendering: losses, projected L-BFGS, and the alternating solver.

The solver minimizes

    E(n, L, m) = sum_fg || render(n, L, m) - I* ||^2
               + a sum_fg || n - n' ||^2  +  b sum || L - L' ||^2

by cycling through the free parameter groups (normals, light, material), each
group getting a short L-BFGS run while the other two stay frozen. Feasibility
is kept by projection — unit normals, non-negative radiance, material
coordinates inside [-0.95, 0.95] — and the line search accepts on the
post-projection objective, which makes the reported objective trace literally
non-increasing. Normal gradients are projected to each normal's tangent plane
before entering the L-BFGS update.

Materials are optimized in their normalized [-0.95, 0.95] coordinates so all
three groups move on comparable scales.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import _shading
from .brdf import NORM_LIMIT, DsbrdfMaterial, denormalize_params, normalize_params
from .core import EnvironmentMap, NormalMap, RadianceImage, SegmentationMask, Camera
from .grad import SceneGradients
from .render import RenderScene, prepare_problem, render


@dataclass(frozen=True)
class LossWeights:
    """Weights of the combined training-style loss."""

    w_normal: float = 1e4
    w_material: float = 1e3
    w_image: float = 1.0

    def __post_init__(self):
        if min(self.w_normal, self.w_material, self.w_image) <= 0.0:
            raise ValueError("loss weights must be positive")


def loss_normal(pred: NormalMap, gt: NormalMap) -> float:
    """Sum over foreground pixels of ||n - n'||^2 (= 2 - 2 n.n' for unit inputs)."""
    if pred.normals.shape != gt.normals.shape or not np.array_equal(pred.mask, gt.mask):
        raise ValueError("normal maps must share shape and mask")
    diff = pred.normals[pred.mask] - gt.normals[gt.mask]
    return float(np.sum(diff * diff))


def loss_material(pred, gt) -> float:
    """Sum of squared differences over the 108 normalized parameters."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError("material parameter vectors must have equal length")
    d = pred - gt
    return float(np.sum(d * d))


def loss_combined(weights: LossWeights, l_normal: float, l_material: float, l_image: float) -> float:
    """w_n * l_normal + w_m * l_material + w_image * l_image."""
    return weights.w_normal * l_normal + weights.w_material * l_material + weights.w_image * l_image


@dataclass(frozen=True)
class OptimizerConfig:
    memory_pairs: int = 8
    inner_iters_per_group: int = 20
    max_cycles: int = 50
    rel_tol: float = 1e-6
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 25
    cycle_order: tuple = ("normal", "light", "material")
    grad_tol: float = 1e-12
    threads: int = 1
    cache_budget_bytes: int = 256 * 2**20

    def __post_init__(self):
        if min(self.memory_pairs, self.inner_iters_per_group, self.max_cycles, self.max_backtracks) < 1:
            raise ValueError("iteration counts must be positive")
        if self.rel_tol <= 0.0 or self.armijo_c <= 0.0 or self.grad_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack factor must lie in (0, 1)")
        bad = set(self.cycle_order).difference(_shading.GROUPS)
        if bad or not self.cycle_order:
            raise ValueError(f"cycle order may contain only {_shading.GROUPS}, got {self.cycle_order!r}")


@dataclass(frozen=True)
class InverseProblem:
    """Eq.-of-interest bundle: observed image, initial state, regularizers.

    The initial normals and environment double as the priors n' and L'.
    """

    target: RadianceImage
    normal_map: NormalMap
    env: EnvironmentMap
    materials: tuple
    camera: Camera
    segmentation: SegmentationMask | None = None
    a: float = 1.0
    b: float = 10.0
    free_groups: frozenset = frozenset({"normal", "light", "material"})

    def __post_init__(self):
        object.__setattr__(self, "materials", tuple(self.materials))
        object.__setattr__(self, "free_groups", frozenset(self.free_groups))
        if self.a < 0.0 or self.b < 0.0:
            raise ValueError("regularizer weights must be non-negative")
        bad = self.free_groups.difference(_shading.GROUPS)
        if bad or not self.free_groups:
            raise ValueError(f"free groups must be a non-empty subset of {_shading.GROUPS}")
        if (self.target.height, self.target.width) != (self.normal_map.height, self.normal_map.width):
            raise ValueError("target image size must match the normal map")
        # Borrow the scene validation for dimension / region checks.
        self.scene()

    def scene(self) -> RenderScene:
        return RenderScene(self.normal_map, self.camera, self.env, self.materials, self.segmentation)


@dataclass(frozen=True)
class SceneState:
    """A candidate (n*, m*, L*) point for the objective."""

    normal_map: NormalMap
    materials: tuple
    env: EnvironmentMap


def objective(problem: InverseProblem, state: SceneState, *, threads: int = 1):
    """Value and free-group gradients of the data + regularizer objective.

    Material gradients are reported in the normalized coordinates the solver
    moves in (chain rule through the affine range codec).
    """
    scene = RenderScene(state.normal_map, problem.camera, state.env, tuple(state.materials), problem.segmentation)
    mask = scene.normal_map.mask
    shading = prepare_problem(scene)
    env_flat = state.env.radiance.reshape(-1, 3)
    img = _shading.forward(shading, env_flat, threads=threads)
    target_fg = problem.target.pixels[mask]
    r = img - target_fg
    n_diff = state.normal_map.normals[mask] - problem.normal_map.normals[mask]
    env_diff = env_flat - problem.env.radiance.reshape(-1, 3)
    value = float(np.sum(r * r)) + problem.a * float(np.sum(n_diff * n_diff)) + problem.b * float(np.sum(env_diff * env_diff))

    upstream = 2.0 * r
    dn, denv, dmats = _shading.backward(shading, env_flat, upstream, problem.free_groups, threads=threads)
    d_normals = d_env = d_materials = None
    if dn is not None:
        dn += 2.0 * problem.a * n_diff
        d_normals = np.zeros_like(state.normal_map.normals)
        d_normals[mask] = dn
    if denv is not None:
        denv += 2.0 * problem.b * env_diff
        d_env = denv.reshape(state.env.radiance.shape)
    if dmats is not None:
        rows = []
        for m, dm in zip(state.materials, dmats):
            rows.append(dm.reshape(-1) * (m.hi - m.lo) / (2.0 * NORM_LIMIT))
        d_materials = np.stack(rows)
    return value, SceneGradients(d_normals, d_env, d_materials)


class LineSearchError(RuntimeError):
    """Armijo backtracking exhausted at the very first iterate."""


@dataclass
class LbfgsResult:
    x: np.ndarray
    value: float
    grad: np.ndarray
    iterations: int
    converged: bool
    stop_reason: str
    trace: list = field(default_factory=list)  # (value, grad_inf_norm) per accepted step


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(s @ q)
        q -= a * y
        alphas.append(a)
    if pairs:
        s, y, _ = pairs[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        beta = rho * float(y @ q)
        q += (a - beta) * s
    return q


def lbfgs_minimize(
    fun,
    x0,
    config: OptimizerConfig = OptimizerConfig(),
    *,
    max_iters: int | None = None,
    project=None,
    grad_transform=None,
    callback=None,
) -> LbfgsResult:
    """Two-loop-recursion L-BFGS with Armijo backtracking.

    ``fun(x) -> (value, gradient)``. Optional ``project`` maps trial points
    back to the feasible set before evaluation (the Armijo test then uses the
    actual displacement), and ``grad_transform(x, g)`` filters gradients (e.g.
    tangent-plane projection) before they enter stopping tests and curvature
    pairs. Raises LineSearchError only when no acceptable step exists at the
    first iterate; later failures return the best point found.
    """
    x = np.array(x0, dtype=np.float64)
    if project is not None:
        x = project(x)
    if max_iters is None:
        max_iters = config.inner_iters_per_group

    f, g = fun(x)
    if grad_transform is not None:
        g = grad_transform(x, g)
    ginf = float(np.abs(g).max(initial=0.0))
    pairs: list = []
    trace: list = []
    result = LbfgsResult(x=x, value=f, grad=g, iterations=0, converged=False, stop_reason="iteration_cap", trace=trace)

    for it in range(1, max_iters + 1):
        if ginf < config.grad_tol:
            result.converged = True
            result.stop_reason = "gradient"
            break

        d = -_two_loop(g, pairs)
        if float(g @ d) >= 0.0:
            pairs.clear()
            d = -g

        alpha = 1.0
        accepted = False
        for _ in range(config.max_backtracks + 1):
            x_t = x + alpha * d
            if project is not None:
                x_t = project(x_t)
            f_t, g_t = fun(x_t)
            step = x_t - x
            if f_t < f and f_t <= f + config.armijo_c * float(g @ step):
                accepted = True
                break
            alpha *= config.backtrack_factor
        if not accepted:
            if it == 1:
                raise LineSearchError("no acceptable step at the first iterate")
            result.stop_reason = "line_search"
            break

        if grad_transform is not None:
            g_t = grad_transform(x_t, g_t)
        s = x_t - x
        y = g_t - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            pairs.append((s, y, 1.0 / sy))
            if len(pairs) > config.memory_pairs:
                pairs.pop(0)

        f_prev, x, f, g = f, x_t, f_t, g_t
        ginf = float(np.abs(g).max(initial=0.0))
        result.x, result.value, result.grad, result.iterations = x, f, g, it
        trace.append((f, ginf))
        if callback is not None:
            callback(it, f, ginf, x)
        if f_prev - f <= config.rel_tol * max(1.0, abs(f_prev)):
            result.converged = True
            result.stop_reason = "rel_tol"
            break
    else:
        result.stop_reason = "iteration_cap"
    return result


@dataclass(frozen=True)
class TraceEntry:
    cycle: int
    group: str
    iteration: int
    objective: float
    grad_norm: float


@dataclass(frozen=True)
class SolveResult:
    normal_map: NormalMap
    materials: tuple
    env: EnvironmentMap
    initial_objective: float
    final_objective: float
    trace: tuple
    cycles: int


def _project_normals(x):
    n = x.reshape(-1, 3)
    norms = np.linalg.norm(n, axis=1, keepdims=True)
    safe = np.where(norms < 1e-12, 1.0, norms)
    out = n / safe
    out[norms[:, 0] < 1e-12] = (0.0, 0.0, 1.0)
    return out.ravel()


def _tangent_gradient(x, g):
    n = x.reshape(-1, 3)
    gr = g.reshape(-1, 3)
    out = gr - np.einsum("pc,pc->p", gr, n)[:, None] * n
    return out.ravel()


def solve(problem: InverseProblem, config: OptimizerConfig = OptimizerConfig()) -> SolveResult:
    """Alternating projected L-BFGS on the free groups of ``problem``.

    Per cycle each free group (in config.cycle_order) gets up to
    config.inner_iters_per_group L-BFGS iterations with fresh memory. Stops
    when a full cycle improves the objective by less than rel_tol (relative)
    or after max_cycles. The trace carries one entry per accepted step.
    """
    threads = max(1, config.threads)
    scene = problem.scene()
    mask = scene.normal_map.mask
    shading = prepare_problem(scene)

    n_fg = shading.normals.copy()
    n_prior = n_fg.copy()
    env = scene.env.radiance.reshape(-1, 3).copy()
    env_prior = env.copy()
    mats = list(scene.materials)
    target_fg = problem.target.pixels[mask]
    a, b = problem.a, problem.b

    def full_value(img, n_arr, env_arr):
        r = img - target_fg
        v = float(np.sum(r * r))
        dn = n_arr - n_prior
        v += a * float(np.sum(dn * dn))
        de = env_arr - env_prior
        v += b * float(np.sum(de * de))
        return v

    def eval_state():
        shading.normals = n_fg
        shading.materials = mats
        img = _shading.forward(shading, env, threads=threads)
        return full_value(img, n_fg, env)

    initial = current = eval_state()
    trace: list = []
    order = [grp for grp in config.cycle_order if grp in problem.free_groups]
    cycles_run = 0

    for cycle in range(config.max_cycles):
        cycles_run = cycle + 1
        cycle_start = current

        for group in order:
            shading.normals = n_fg
            shading.materials = mats

            if group == "normal":
                def fun(x):
                    n_arr = np.ascontiguousarray(x.reshape(-1, 3))
                    shading.normals = n_arr
                    img = _shading.forward(shading, env, threads=threads)
                    val = full_value(img, n_arr, env)
                    dn, _, _ = _shading.backward(shading, env, 2.0 * (img - target_fg), {"normal"}, threads=threads)
                    dn += 2.0 * a * (n_arr - n_prior)
                    return val, dn.ravel()

                x0, project, transform = n_fg.ravel(), _project_normals, _tangent_gradient
            elif group == "light":
                transfer = None
                if shading.pixel_count * shading.light_count * 24 <= config.cache_budget_bytes:
                    transfer = _shading.build_transfer(shading, threads=threads)

                def fun(x, transfer=transfer):
                    env_arr = np.ascontiguousarray(x.reshape(-1, 3))
                    img = _shading.forward(shading, env_arr, threads=threads, transfer=transfer)
                    val = full_value(img, n_fg, env_arr)
                    _, denv, _ = _shading.backward(
                        shading, env_arr, 2.0 * (img - target_fg), {"light"}, threads=threads, transfer=transfer
                    )
                    denv += 2.0 * b * (env_arr - env_prior)
                    return val, denv.ravel()

                x0, project, transform = env.ravel(), lambda x: np.maximum(x, 0.0), None
            else:
                pair = None
                pair_bytes = shading.pixel_count * shading.light_count * 8 * (2 if shading.ortho else 8)
                if pair_bytes <= config.cache_budget_bytes:
                    pair = _shading.build_pair_cache(shading, threads=threads)
                scales = [(m.hi - m.lo) / (2.0 * NORM_LIMIT) for m in mats]

                def fun(x, pair=pair, scales=scales):
                    xs = x.reshape(len(mats), -1)
                    mats_new = [denormalize_params(xs[i], mats[i].lo, mats[i].hi, mats[i].name) for i in range(len(mats))]
                    shading.materials = mats_new
                    img = _shading.forward(shading, env, threads=threads, pair=pair)
                    val = full_value(img, n_fg, env)
                    _, _, dms = _shading.backward(
                        shading, env, 2.0 * (img - target_fg), {"material"}, threads=threads, pair=pair
                    )
                    g = np.concatenate([dm.reshape(-1) * s for dm, s in zip(dms, scales)])
                    return val, g

                x0 = np.concatenate([normalize_params(m) for m in mats])
                project = lambda x: np.clip(x, -NORM_LIMIT, NORM_LIMIT)
                transform = None

            def record(it, val, gnorm, _x, cycle=cycle, group=group):
                trace.append(TraceEntry(cycle, group, it, val, gnorm))

            try:
                res = lbfgs_minimize(
                    fun,
                    x0,
                    config,
                    max_iters=config.inner_iters_per_group,
                    project=project,
                    grad_transform=transform,
                    callback=record,
                )
            except LineSearchError:
                continue  # no acceptable step; the group contributes nothing this cycle

            if res.iterations == 0:
                continue
            if group == "normal":
                n_fg = np.ascontiguousarray(res.x.reshape(-1, 3))
            elif group == "light":
                env = np.ascontiguousarray(res.x.reshape(-1, 3))
            else:
                xs = res.x.reshape(len(mats), -1)
                mats = [denormalize_params(xs[i], mats[i].lo, mats[i].hi, mats[i].name) for i in range(len(mats))]
            current = res.value

        if cycle_start - current <= config.rel_tol * max(1.0, abs(cycle_start)):
            break

    normals_img = np.zeros_like(scene.normal_map.normals)
    normals_img[mask] = n_fg
    result_env = EnvironmentMap(np.maximum(env, 0.0).reshape(scene.env.radiance.shape))
    return SolveResult(
        normal_map=NormalMap(normals_img, mask),
        materials=tuple(mats),
        env=result_env,
        initial_objective=initial,
        final_objective=current,
        trace=tuple(trace),
        cycles=cycles_run,
    )


def edit_material(scene: RenderScene, materials, *, threads: int = 1) -> RadianceImage:
    """Re-render ``scene`` with its materials swapped for ``materials``.

    Accepts a single material for unsegmented scenes or a per-region sequence
    matching the segmentation's region count.
    """
    if isinstance(materials, DsbrdfMaterial):
        materials = (materials,)
    materials = tuple(materials)
    if len(materials) != scene.region_count:
        raise ValueError(f"expected {scene.region_count} materials, got {len(materials)}")
    return render(dataclasses.replace(scene, materials=materials), threads=threads)
