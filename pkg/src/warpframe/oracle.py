"""Forward pipeline: explicit immersions -> discrete hypothesis data.

Given a map x -> (t(x), p(x)) into eps*I x_a M^N(c) written with analytic
primitives, this module induces everything the verifier consumes: an
orthonormal adapted frame, connection coefficients, the second fundamental
form, the (T, xi) split and the height function. Derivatives are exact:
the map is evaluated on nested forward-mode jets, so frame fields obtained
through Gram-Schmidt still differentiate to machine precision. A finite
difference engine with the same algebra is kept alongside both as a fallback
and as a cross-check of the jet machinery.

The canonical example library lives here too; each named family doubles as a
serializable fixture (datasets carry a generator tag so they can be re-made
on refined grids).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jets
from .ambient import SignatureSpec, WarpingFunction
from .bundle_data import ChartGrid, GeometricData
from .errors import DegenerateDataError
from .immersion import ImmersionField
from .jets import Jet, part, seed, sqrt, value
from .stencils import grad1


# ---------------------------------------------------------------------------
# Generic ambient-vector algebra (components are floats, arrays, or jets)


def _g0dot(fsigns, x, y):
    acc = fsigns[0] * (x[0] * y[0])
    for g, a, b in zip(fsigns[1:], x[1:], y[1:]):
        acc = acc + g * (a * b)
    return acc


def _wdot(spec, a, u, v):
    """Warped metric: u, v are (t_comp, fiber_list) pairs."""
    return spec.epsilon * (u[0] * v[0]) + (a * a) * _g0dot(
        spec.signs, u[1], v[1])


def _axpy(c, u, v):
    """v + c*u componentwise on (t, fibs) pairs."""
    return (v[0] + c * u[0], [b + c * a for a, b in zip(u[1], v[1])])


def _scale(c, u):
    return (c * u[0], [c * a for a in u[1]])


def _quadric_project(spec, p, u):
    """Remove the g0-component of the fiber part along the position p."""
    coef = spec.c * _g0dot(spec.signs, u[1], p)
    return (u[0], [a - coef * b for a, b in zip(u[1], p)])


# ---------------------------------------------------------------------------
# Stage 1: frames, T, xi (needs the map 1-jet)


def _stage1(spec, warping, t, p, V, tol=1e-8):
    """Adapted orthonormal frame and vertical split at every node.

    t, p: base point (p is a list of N+1 components); V: list of n
    coordinate tangents as (t_comp, fiber_list) pairs. All entries may be
    jets; branching happens on stripped values only.
    """
    n, m = spec.n, spec.m
    a = warping.value_generic(t)
    signs = spec.signs

    ehat = []
    coeffs = []  # rows of F: e_i = sum_k F[i][k] V_k
    for i in range(n):
        w = V[i]
        cf = [1.0 if k == i else 0.0 for k in range(n)]
        for j, (u, su) in enumerate(zip(ehat, signs[1:])):
            proj = su * _wdot(spec, a, w, u)
            w = _axpy(-proj, u, w)
            cf = [ck - proj * cj for ck, cj in zip(cf, coeffs[j])]
        Q = _wdot(spec, a, w, w)
        qv = np.asarray(value(Q))
        need = signs[1 + i]
        if not np.all(need * qv > tol):
            raise DegenerateDataError(
                f"tangent frame slot {i + 1}: norm sign does not match "
                f"declared sign {need} everywhere (min {float((need*qv).min()):.3e})")
        inv = 1.0 / sqrt(need * Q)
        ehat.append(_scale(inv, w))
        coeffs.append([c * inv for c in cf])

    # Normal completion: fiber coordinate directions in index order, then
    # the vertical direction; each candidate is first made quadric-tangent.
    # A candidate skipped for the wrong sign stays available to later slots.
    Np1 = spec.N + 1
    cands = []
    for g in range(Np1):
        cands.append((0.0, [1.0 if j == g else 0.0 for j in range(Np1)]))
    cands.append((1.0, [0.0] * Np1))
    used = [False] * len(cands)
    for u_slot in range(m):
        need = signs[1 + n + u_slot]
        accepted = None
        for pos, cand in enumerate(cands):
            if used[pos]:
                continue
            w = _quadric_project(spec, p, cand)
            for v, sv in zip(ehat, signs[1:]):
                proj = sv * _wdot(spec, a, w, v)
                w = _axpy(-proj, v, w)
            Q = _wdot(spec, a, w, w)
            qv = np.asarray(value(Q))
            if np.all(need * qv > tol):
                accepted = _scale(1.0 / sqrt(need * Q), w)
                used[pos] = True
                break
        if accepted is None:
            raise DegenerateDataError(
                f"could not complete the normal frame at slot {n + 1 + u_slot} "
                f"with sign {need}")
        ehat.append(accepted)

    dt_vec = (1.0, [0.0] * Np1)
    T_comp = [signs[1 + i] * spec.epsilon * ehat[i][0] for i in range(n)]
    xi_comp = [signs[1 + n + u] * spec.epsilon * ehat[n + u][0]
               for u in range(m)]
    return {"a": a, "t": t, "p": p, "V": V, "ehat": ehat, "F": coeffs,
            "T": T_comp, "xi": xi_comp, "dt": dt_vec}


# ---------------------------------------------------------------------------
# Stage 2: connection coefficients and the second fundamental form


def _stage2(spec, warping, s1, drop, deriv):
    """omega/alpha fields from stage-1 frames.

    drop(q) aligns a stage-1 quantity with the derivative level, deriv(q, k)
    is d/dx_k of a stage-1 quantity at that level. For the jet engine these
    are `.val` and `.parts[k]`; for the finite-difference engine they are
    the identity and a gradient stencil.
    """
    n, m = spec.n, spec.m
    signs = spec.signs

    def dropv(u):
        return (drop(u[0]), [drop(c) for c in u[1]])

    def derivv(u, k):
        return (deriv(u[0], k), [deriv(c, k) for c in u[1]])

    t = drop(s1["t"])
    a = warping.value_generic(t)
    a1 = warping.deriv1_generic(t)
    Vd = [dropv(v) for v in s1["V"]]
    Ed = [dropv(e) for e in s1["ehat"]]

    def tilde_nabla(k, j):
        """Ambient covariant derivative of the frame field e_j along x_k."""
        dE = derivv(s1["ehat"][j], k)
        Vk, Ej = Vd[k], Ed[j]
        rat = a1 / a
        fib = [dE[1][g] + rat * (Vk[0] * Ej[1][g] + Ej[0] * Vk[1][g])
               for g in range(spec.N + 1)]
        tc = dE[0] - spec.epsilon * (a * a1) * _g0dot(
            spec.signs, Vk[1], Ej[1])
        return (tc, fib)

    # nabla[k][j]: derivative of frame vector e_{j+1} along coordinate k.
    nabla = [[tilde_nabla(k, j) for j in range(n + m)] for k in range(n)]

    omega_t = [[[signs[1 + i] * _wdot(spec, a, Ed[i], nabla[k][j])
                 for k in range(n)] for j in range(n)] for i in range(n)]
    omega_b = [[[signs[1 + n + u] * _wdot(spec, a, Ed[n + u], nabla[k][n + v])
                 for k in range(n)] for v in range(m)] for u in range(m)]
    # alpha(d/dx_k, e_j) coefficients along e_u, then pulled onto frame pairs.
    alpha_k = [[[signs[1 + n + u] * _wdot(spec, a, Ed[n + u], nabla[k][j])
                 for u in range(m)] for j in range(n)] for k in range(n)]
    Fd = [[drop(c) for c in row] for row in s1["F"]]
    alpha = [[[None] * n for _ in range(n)] for _ in range(m)]
    for u in range(m):
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for k in range(n):
                    acc = acc + Fd[i][k] * alpha_k[k][j][u]
                alpha[u][i][j] = acc
    # Exact symmetrization / skew-enforcement (linear, jet-safe).
    for u in range(m):
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.5 * (alpha[u][i][j] + alpha[u][j][i])
                alpha[u][i][j] = s
                alpha[u][j][i] = s
    for i in range(n):
        for j in range(i, n):
            ee = signs[1 + i] * signs[1 + j]
            for k in range(n):
                s = 0.5 * (omega_t[i][j][k] - ee * omega_t[j][i][k])
                omega_t[i][j][k] = s
                omega_t[j][i][k] = -ee * s
    for u in range(m):
        for v in range(u, m):
            ee = signs[1 + n + u] * signs[1 + n + v]
            for k in range(n):
                s = 0.5 * (omega_b[u][v][k] - ee * omega_b[v][u][k])
                omega_b[u][v][k] = s
                omega_b[v][u][k] = -ee * s
    return {"omega_tangent": omega_t, "omega_bundle": omega_b, "alpha": alpha}


# ---------------------------------------------------------------------------
# Engines


def _to_array(extents, nested, shape):
    """Nested lists of node arrays -> one (*extents, *shape) array."""
    out = np.empty(tuple(extents) + tuple(shape))

    def fill(idx, src, depth):
        if depth == len(shape):
            out[(Ellipsis,) + idx] = np.broadcast_to(
                np.asarray(value(src), dtype=float), tuple(extents))
            return
        for i in range(shape[depth]):
            fill(idx + (i,), src[i], depth + 1)

    fill((), nested, 0)
    return out


def _apply_frame_seed(V, frame_seed):
    if frame_seed is None:
        return V
    M = np.asarray(frame_seed, dtype=float)
    n = len(V)
    if M.shape != (n, n) or abs(np.linalg.det(M)) < 1e-12:
        raise DegenerateDataError("frame seed must be an invertible n x n matrix")
    mixed = []
    for k in range(n):
        acc = _scale(M[k][0], V[0])
        for l in range(1, n):
            acc = _axpy(M[k][l], V[l], acc)
        mixed.append(acc)
    return mixed, M


def _jet_engine(spec, warping, grid, map_fn, frame_seed, want_dfields):
    depth = 3 if want_dfields else 2
    n = spec.n
    X = seed(list(grid.coordinates()), depth)
    t_j, p_j = map_fn(X)
    t_in = t_j.val if isinstance(t_j, Jet) else t_j
    p_in = [(c.val if isinstance(c, Jet) else c) for c in p_j]
    V = []
    for k in range(n):
        V.append((part(t_j, k), [part(c, k) for c in p_j]))
    Mseed = None
    if frame_seed is not None:
        V, Mseed = _apply_frame_seed(V, frame_seed)
    s1 = _stage1(spec, warping, t_in, p_in, V)

    def drop(q):
        return q.val if isinstance(q, Jet) else q

    def deriv(q, k):
        return q.parts[k] if isinstance(q, Jet) else 0.0

    s2 = _stage2(spec, warping, s1, drop, deriv)
    return s1, s2, Mseed, (drop, deriv)


def _fd_engine(spec, warping, grid, map_fn, frame_seed):
    n = spec.n
    coords = grid.coordinates()
    t_arr, p_arrs = map_fn(list(coords))
    t_arr = np.broadcast_to(np.asarray(t_arr, dtype=float), grid.extents).copy()
    p_arrs = [np.broadcast_to(np.asarray(c, dtype=float), grid.extents).copy()
              for c in p_arrs]
    V = []
    for k in range(n):
        V.append((grad1(t_arr, k, grid.spacing[k]),
                  [grad1(c, k, grid.spacing[k]) for c in p_arrs]))
    Mseed = None
    if frame_seed is not None:
        V, Mseed = _apply_frame_seed(V, frame_seed)
    s1 = _stage1(spec, warping, t_arr, p_arrs, V)

    def drop(q):
        return q

    def deriv(q, k):
        return grad1(np.broadcast_to(np.asarray(q, dtype=float),
                                     grid.extents), k, grid.spacing[k])

    s2 = _stage2(spec, warping, s1, drop, deriv)
    return s1, s2, Mseed, (drop, deriv)


# ---------------------------------------------------------------------------
# Explicit immersions and data induction


@dataclass
class ExplicitImmersion:
    """Analytic immersion of a chart into eps*I x_a M^N(c).

    map_fn takes the list of n chart coordinates (arrays or jets) and
    returns (t, [p_0 ... p_N]) built from analytic primitives, so the same
    callable serves values, tangents, and higher derivative extraction.
    """

    spec: SignatureSpec
    warping: WarpingFunction
    grid: ChartGrid
    map_fn: Callable
    name: str | None = None
    params: dict = field(default_factory=dict)

    def sample(self):
        t, p = self.map_fn(list(self.grid.coordinates()))
        ext = self.grid.extents
        t = np.broadcast_to(np.asarray(t, dtype=float), ext).copy()
        p = np.stack([np.broadcast_to(np.asarray(c, dtype=float), ext)
                      for c in p], axis=-1)
        return t, p

    def generator_tag(self):
        if self.name is None:
            return None
        return {"name": self.name, "params": dict(self.params)}


def induce_data(imm: ExplicitImmersion, frame_seed=None,
                derivatives: str = "jet", attach_derivatives: bool = True,
                validate: bool = True) -> GeometricData:
    """Induce the full hypothesis bundle from an explicit immersion.

    derivatives: 'jet' uses exact forward-mode jets throughout; 'fd' uses
    second-order finite differences of the sampled map and frame fields
    (no derivative fields are attached in that mode).
    """
    spec, warping, grid = imm.spec, imm.warping, imm.grid
    n, m = spec.n, spec.m
    ext = tuple(grid.extents)
    # The image must lie on the declared quadric at every node.
    _, p_samples = imm.sample()
    member = np.einsum("g,...g,...g->...", spec.fiber_signs,
                       p_samples, p_samples) - spec.c
    if np.abs(member).max() > 1e-8:
        bad = tuple(int(i) for i in
                    np.unravel_index(int(np.argmax(np.abs(member))), ext))
        raise DegenerateDataError(
            f"immersion leaves the quadric of the declared signature: "
            f"|g0(p,p) - c| = {float(np.abs(member).max()):.3e} at node {bad}")
    if derivatives == "jet":
        s1, s2, Mseed, _ = _jet_engine(spec, warping, grid, imm.map_fn,
                                       frame_seed, attach_derivatives)
    elif derivatives == "fd":
        s1, s2, Mseed, _ = _fd_engine(spec, warping, grid, imm.map_fn,
                                      frame_seed)
        attach_derivatives = False
    else:
        raise ValueError("derivatives must be 'jet' or 'fd'")

    # Nondegeneracy: induced metric inertia must match (p, n - p).
    gram = np.empty(ext + (n, n))
    a_val = np.asarray(value(s1["a"]), dtype=float)
    for k in range(n):
        for l in range(k, n):
            g = value(_wdot(spec, a_val,
                            (np.asarray(value(s1["V"][k][0])),
                             [np.asarray(value(c)) for c in s1["V"][k][1]]),
                            (np.asarray(value(s1["V"][l][0])),
                             [np.asarray(value(c)) for c in s1["V"][l][1]])))
            gram[..., k, l] = g
            gram[..., l, k] = g
    eig = np.linalg.eigvalsh(gram)
    negs = (eig < 0).sum(axis=-1)
    if np.any(negs != spec.p):
        bad = tuple(np.argwhere(negs != spec.p)[0])
        raise DegenerateDataError(
            f"induced metric has index {int(negs[bad])} at node {bad}, "
            f"declared p={spec.p}")

    F = _to_array(ext, s1["F"], (n, n))
    if Mseed is not None:
        F = np.einsum("...ik,kl->...il", F, Mseed)
    fields = dict(
        frame=F,
        omega_tangent=_to_array(ext, s2["omega_tangent"], (n, n, n)),
        omega_bundle=_to_array(ext, s2["omega_bundle"], (m, m, n)),
        alpha=_to_array(ext, s2["alpha"], (m, n, n)),
        T_comp=_to_array(ext, s1["T"], (n,)),
        xi_comp=_to_array(ext, s1["xi"], (m,)),
        pi=_to_array(ext, s1["t"], ()),
    )
    derivs = None
    if attach_derivatives:
        def dstack(nested, shape):
            return np.stack(
                [_to_array(ext, _map_nested(nested, lambda q: part(q, k)),
                           shape) for k in range(n)], axis=0)

        dF = dstack(s1["F"], (n, n))
        if Mseed is not None:
            dF = np.einsum("d...ik,kl->d...il", dF, Mseed)
        derivs = {
            "frame": dF,
            "T_comp": dstack(s1["T"], (n,)),
            "xi_comp": dstack(s1["xi"], (m,)),
            "omega_tangent": dstack(s2["omega_tangent"], (n, n, n)),
            "omega_bundle": dstack(s2["omega_bundle"], (m, m, n)),
            "alpha": dstack(s2["alpha"], (m, n, n)),
        }

    data = GeometricData(spec, warping, grid, derivs=derivs,
                         generator=imm.generator_tag(), **fields)
    if validate:
        data.validate()
    return data


def _map_nested(nested, fn):
    if isinstance(nested, list):
        return [_map_nested(x, fn) for x in nested]
    return fn(nested)


# ---------------------------------------------------------------------------
# Reference fields and base frames straight from the oracle


def reference_field(imm: ExplicitImmersion) -> ImmersionField:
    """ImmersionField of the generating immersion (positions and exact
    adapted frames), for round-trip comparisons."""
    B = exact_frame_field(imm)
    t, p = imm.sample()
    spec = imm.spec
    ext = imm.grid.extents
    a = imm.warping.eval(t)[0]
    frames = np.empty(ext + (spec.size, spec.size))
    fs = spec.fiber_signs
    for g in range(spec.size):
        frames[..., g, : spec.N + 1] = (
            fs * B[..., : spec.N + 1, g]) / (spec.c * a)[..., None]
        frames[..., g, spec.N + 1] = spec.epsilon * B[..., spec.N + 1, g]
    return ImmersionField(spec=spec, warping=imm.warping, grid=imm.grid,
                          spatial=p, t=t, frames=frames)


def exact_frame_field(imm: ExplicitImmersion) -> np.ndarray:
    """Frame matrices B(x) of the generating immersion at every node.

    Column 0 comes from the scaled position direction, columns 1..N+1 from
    the induced adapted frame; row N+1 automatically carries the vertical
    components T_beta.
    """
    spec, warping, grid = imm.spec, imm.warping, imm.grid
    s1, _, _, _ = _jet_engine(spec, warping, grid, imm.map_fn, None, False)
    ext = tuple(grid.extents)
    Np1 = spec.N + 1
    a = np.asarray(value(s1["a"]), dtype=float)
    a = np.broadcast_to(a, ext)
    p = [np.broadcast_to(np.asarray(value(c), dtype=float), ext)
         for c in s1["p"]]
    B = np.empty(ext + (spec.size, spec.size))
    fs = spec.fiber_signs
    # column 0: position direction p/(c a) expressed in the scaled basis
    for b in range(Np1):
        B[..., b, 0] = fs[b] * p[b]
    B[..., Np1, 0] = 0.0
    for g in range(Np1):
        e = s1["ehat"][g]
        et = np.broadcast_to(np.asarray(value(e[0]), dtype=float), ext)
        for b in range(Np1):
            efb = np.broadcast_to(np.asarray(value(e[1][b]), dtype=float), ext)
            B[..., b, 1 + g] = (a / spec.c) * fs[b] * efb
        B[..., Np1, 1 + g] = spec.epsilon * et
    return B


def exact_base_frame(imm: ExplicitImmersion) -> np.ndarray:
    """B0 at the grid base node, built from the induced frames."""
    return exact_frame_field(imm)[imm.grid.base_node]


# ---------------------------------------------------------------------------
# Canonical example library


def _grid_from_params(params, n, extent, spacing, centered=True):
    ext = tuple(params.get("grid_extents", (extent,) * n))
    sp = tuple(params.get("grid_spacing", (spacing,) * n))
    if centered:
        origin = tuple(params.get(
            "grid_origin", tuple(-h * (e - 1) / 2 for e, h in zip(ext, sp))))
    else:
        origin = tuple(params.get("grid_origin", (0.0,) * n))
    base = tuple(params.get("grid_base", tuple(e // 2 for e in ext)))
    return ChartGrid(ext, sp, origin, base)


def _default_warping(params, default_kind="cosh"):
    wp = params.get("warping")
    if isinstance(wp, WarpingFunction):
        return wp
    if isinstance(wp, dict):
        return WarpingFunction.from_dict(wp)
    if wp is None:
        wp = default_kind
    if wp == "cos":
        return WarpingFunction("cos", domain=(-1.45, 1.45))
    return WarpingFunction(wp)


def _graph_chart(fiber_signs, c):
    """Chart of the quadric {g0(p,p)=c}: coordinate slot 0 is solved for."""
    def chart(x):
        Q = 0.0
        for s, xi in zip(fiber_signs[1:], x):
            Q = Q + s * (xi * xi)
        w = sqrt(1.0 - c * Q)
        return [w] + list(x)
    return chart


def _slice_builder(name, fiber_tail_signs, epsilon, default_warp):
    def build(params):
        params = dict(params or {})
        c = int(params.get("c", 1))
        t0 = float(params.get("t0", 0.3))
        n = len(fiber_tail_signs)
        warping = _default_warping(params, default_warp)
        spec = SignatureSpec.from_counts(
            n, 1, epsilon, c, fiber_tail_signs, (epsilon,))
        grid = _grid_from_params(params, n, extent=17, spacing=0.04)
        chart = _graph_chart((c,) + fiber_tail_signs, c)

        def map_fn(x):
            return t0 + 0.0 * x[0], chart(x)

        return ExplicitImmersion(spec, warping, grid, map_fn, name=name,
                                 params={"c": c, "t0": t0, **_grid_tag(grid)})
    return build


def _grid_tag(grid):
    return {"grid_extents": list(grid.extents),
            "grid_spacing": list(grid.spacing),
            "grid_origin": list(grid.origin),
            "grid_base": list(grid.base_node)}


def _build_slice(params):
    params = dict(params or {})
    n = int(params.get("n", 2))
    eps = int(params.get("epsilon", 1))
    return _slice_builder("slice", (1,) * n, eps,
                          params.get("warping", "cosh") or "cosh")(params)


def _build_desitter_slice(params):
    params = dict(params or {})
    n = int(params.get("n", 2))
    params.setdefault("warping", "cosh")
    params.setdefault("t0", 0.25)
    params["c"] = 1
    return _slice_builder("desitter_slice", (1,) * n, -1, "cosh")(params)


def _build_lorentz_cylinder(params):
    params = dict(params or {})
    params["c"] = 1
    params.setdefault("t0", 0.3)
    # fiber index 1: chart signs (+, -) on a 2-dimensional slice
    return _slice_builder("lorentz_cylinder", (1, -1), 1, "cosh")(params)


def _build_vertical_geodesic(params):
    params = dict(params or {})
    N = int(params.get("N", 1))
    t0 = float(params.get("t0", 0.0))
    eps = int(params.get("epsilon", 1))
    if eps != 1:
        raise DegenerateDataError(
            "vertical geodesic: the normal directions are fiber-tangent and "
            "spacelike, so epsilon=-1 violates the adopted sign ordering")
    warping = _default_warping(params, "cosh")
    spec = SignatureSpec.from_counts(1, N, 1, 1, (1,), (1,) * N)
    grid = _grid_from_params(params, 1, extent=33, spacing=0.03)

    def map_fn(x):
        s = x[0]
        p = [1.0 + 0.0 * s] + [0.0 * s for _ in range(N)]
        return t0 + s, p

    return ExplicitImmersion(spec, warping, grid, map_fn,
                             name="vertical_geodesic",
                             params={"N": N, "t0": t0, **_grid_tag(grid)})


def _build_great_subsphere(params):
    params = dict(params or {})
    n = int(params.get("n", 2))
    N = int(params.get("N", 3))
    r = float(params.get("radius", 1.0))
    t0 = float(params.get("t0", 0.0))
    eps = int(params.get("epsilon", 1))
    if not (0.0 < r <= 1.0):
        raise ValueError("great_subsphere: radius must be in (0, 1]")
    if N < n + 1:
        raise ValueError("great_subsphere needs N >= n + 1")
    warping = _default_warping(params, "constant")
    if not warping.is_constant or warping.amplitude != 1.0:
        raise ValueError("great_subsphere is a constant-warping fixture (a = 1)")
    m = N + 1 - n
    spec = SignatureSpec.from_counts(n, m, eps, 1, (1,) * n,
                                     (1,) * (m - 1) + (eps,))
    grid = _grid_from_params(params, n, extent=13, spacing=0.05)
    sub_chart = _graph_chart((1,) * (n + 1), 1)
    h = np.sqrt(1.0 - r * r)

    def map_fn(x):
        u = sub_chart(x)
        p = [r * c for c in u] + [h + 0.0 * x[0]]
        p += [0.0 * x[0] for _ in range(N + 1 - len(p))]
        return t0 + 0.0 * x[0], p

    return ExplicitImmersion(spec, warping, grid, map_fn,
                             name="great_subsphere",
                             params={"n": n, "N": N, "radius": r, "t0": t0,
                                     **_grid_tag(grid)})


def _build_helix(params):
    params = dict(params or {})
    beta = float(params.get("beta", 0.6))
    om = params.get("omega")
    z0 = float(params.get("z0", 0.0))
    t0 = float(params.get("t0", 0.0))
    warping = _default_warping(params, "cosh")
    rho = np.sqrt(1.0 - z0 * z0)
    a0 = float(warping.eval(t0)[0])
    if om is None:
        rem = 1.0 - beta * beta
        if rem <= 0:
            raise ValueError("helix: beta too large for unit speed at the base")
        om = np.sqrt(rem) / (a0 * rho)
    om = float(om)
    speed2 = beta * beta + (a0 * rho * om) ** 2
    if abs(speed2 - 1.0) > 1e-10:
        raise ValueError(
            f"helix: parameters are not unit speed at the base node "
            f"(eps*beta^2 + a(t0)^2 rho^2 omega^2 = {speed2:.6f})")
    spec = SignatureSpec.from_counts(1, 2, 1, 1, (1,), (1, 1))
    grid = _grid_from_params(params, 1, extent=65, spacing=0.03125)
    from .jets import cos, sin

    def map_fn(x):
        s = x[0]
        ang = om * s
        return t0 + beta * s, [rho * cos(ang), rho * sin(ang), z0 + 0.0 * s]

    return ExplicitImmersion(spec, warping, grid, map_fn, name="helix",
                             params={"beta": beta, "omega": om, "z0": z0,
                                     "t0": t0, **_grid_tag(grid)})


_FAMILIES = {
    "slice": _build_slice,
    "vertical_geodesic": _build_vertical_geodesic,
    "great_subsphere": _build_great_subsphere,
    "helix": _build_helix,
    "desitter_slice": _build_desitter_slice,
    "lorentz_cylinder": _build_lorentz_cylinder,
}


def example_names():
    return sorted(_FAMILIES)


def make_example(name: str, params: dict | None = None) -> ExplicitImmersion:
    if name not in _FAMILIES:
        raise KeyError(f"unknown example {name!r}; known: {example_names()}")
    return _FAMILIES[name](params)


def canonical_example(name: str, params: dict | None = None):
    """(ExplicitImmersion, GeometricData) for a named analytic family."""
    params = dict(params or {})
    attach = params.pop("attach_derivatives", True)
    derivatives = params.pop("derivatives", "jet")
    imm = make_example(name, params)
    data = induce_data(imm, derivatives=derivatives,
                       attach_derivatives=attach)
    return imm, data
