"""Connection-form assembly and frame-field integration.

The (N+2) x (N+2) matrices of 1-forms:

* Omega: the full metric connection matrix, including the index-0 row and
  column built from the S tensor;
* X: the warp-term matrix (eps a'/a) (T_beta omega_alpha
  - eps_alpha eps_beta T_alpha omega_beta);
* Upsilon = Omega - X, the matrix integrated by the frame field.

integrate_frame propagates B along axis-ordered lattice paths with
per-step midpoint-sampled matrix exponentials (a second-order Lie-group
scheme), optional periodic re-projection onto the pseudo-orthogonal group,
and drift diagnostics. The row constraint B_{N+1, beta} = T_beta is never
enforced, only measured: it must emerge from the equations themselves.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.linalg import expm

from .bundle_data import GeometricData
from .errors import IntegrationBlowup, InvariantViolation, NonConvergence
from .jets import Jet, part, value
from .stencils import DerivativeSource, grad1


# ---------------------------------------------------------------------------
# Assembly


def _assemble_entries(spec, C, T, xi, alpha, omega_t, omega_b, a, a1):
    """Generic assembly of Omega, X, W from per-node quantities.

    All inputs are nested lists of "numbers" (arrays, or jets carrying their
    coordinate derivatives); entries are indexed [k][i] for C, [i] for T,
    [u] for xi, [u][i][j] for alpha, [i][j][k] / [u][v][k] for the
    connection blocks. Returns nested lists Omega[a][b][k], X[a][b][k],
    W[a][k].
    """
    n, m = spec.n, spec.m
    M = spec.size
    sgn = spec.signs
    eps, c = spec.epsilon, spec.c

    delta = []
    for k in range(n):
        acc = 0.0
        for i in range(n):
            acc = acc + sgn[1 + i] * C[k][i] * T[i]
        delta.append(acc)

    Ta = [0.0] * M
    for i in range(n):
        Ta[1 + i] = sgn[1 + i] * T[i]
    for u in range(m):
        Ta[1 + n + u] = sgn[1 + n + u] * xi[u]

    W = [[0.0] * n for _ in range(M)]
    for i in range(n):
        for k in range(n):
            W[1 + i][k] = C[k][i]

    inv_ac = 1.0 / (a * c)
    Om = [[[0.0] * n for _ in range(M)] for _ in range(M)]
    for k in range(n):
        for i in range(n):
            # omega_{i0}(d/dx_k) = -eps_i <e_i, S d/dx_k> = -(S d/dx_k)^i
            st = -inv_ac * (C[k][i] - eps * delta[k] * T[i])
            Om[1 + i][0][k] = -st
            Om[0][1 + i][k] = -sgn[0] * sgn[1 + i] * Om[1 + i][0][k]
        for u in range(m):
            sb = inv_ac * (eps * delta[k] * xi[u])
            Om[1 + n + u][0][k] = -sb
            Om[0][1 + n + u][k] = -sgn[0] * sgn[1 + n + u] * Om[1 + n + u][0][k]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                Om[1 + i][1 + j][k] = omega_t[i][j][k]
    for u in range(m):
        for v in range(m):
            for k in range(n):
                Om[1 + n + u][1 + n + v][k] = omega_b[u][v][k]
    for i in range(n):
        for u in range(m):
            for k in range(n):
                acc = 0.0
                for i2 in range(n):
                    acc = acc + C[k][i2] * alpha[u][i2][i]
                Om[1 + n + u][1 + i][k] = acc
                Om[1 + i][1 + n + u][k] = -sgn[1 + i] * sgn[1 + n + u] * acc

    fac = eps * a1 / a
    X = [[[0.0] * n for _ in range(M)] for _ in range(M)]
    for al in range(M):
        for be in range(M):
            ee = sgn[al] * sgn[be]
            for k in range(n):
                X[al][be][k] = fac * (Ta[be] * W[al][k] - ee * Ta[al] * W[be][k])
    return Om, X, W


def _numeric_inputs(data: GeometricData):
    n, m = data.spec.n, data.spec.m
    C = [[data.inv_frame[..., k, i] for i in range(n)] for k in range(n)]
    T = [data.T_comp[..., i] for i in range(n)]
    xi = [data.xi_comp[..., u] for u in range(m)]
    alpha = [[[data.alpha[..., u, i, j] for j in range(n)] for i in range(n)]
             for u in range(m)]
    ot = [[[data.omega_tangent[..., i, j, k] for k in range(n)]
           for j in range(n)] for i in range(n)]
    ob = [[[data.omega_bundle[..., u, v, k] for k in range(n)]
           for v in range(m)] for u in range(m)]
    a, a1, _ = data.warp_values()
    return C, T, xi, alpha, ot, ob, a, a1


def _nested_to_array(extents, nested, shape, extract=None):
    extract = extract or (lambda q: q)
    out = np.empty(tuple(extents) + tuple(shape))

    def fill(idx, src, depth):
        if depth == len(shape):
            out_val = np.asarray(value(extract(src)), dtype=float)
            out[(Ellipsis,) + idx] = np.broadcast_to(out_val, tuple(extents))
            return
        for i in range(shape[depth]):
            fill(idx + (i,), src[i], depth + 1)

    fill((), nested, 0)
    return out


def assemble_all(data: GeometricData) -> dict:
    """Omega, X, Upsilon (*ext, M, M, n) and W (*ext, M, n) at every node."""
    spec = data.spec
    ext = tuple(data.grid.extents)
    M = spec.size
    n = spec.n
    Om, X, W = _assemble_entries(spec, *_numeric_inputs(data))
    Om_a = _nested_to_array(ext, Om, (M, M, n))
    X_a = _nested_to_array(ext, X, (M, M, n))
    W_a = _nested_to_array(ext, W, (M, n))
    return {"Omega": Om_a, "X": X_a, "Upsilon": Om_a - X_a, "W": W_a}


def assembled_derivatives(data: GeometricData, force_fd: bool = False) -> dict:
    """Coordinate derivatives of the assembled matrices.

    Returns {"Omega": [dOmega/dx_k ...], "X": [...], "Upsilon": [...]},
    each entry shaped like the assembled array. With analytic dataset
    derivatives the assembly is re-run on jets (exact chain rule through
    the S tensor and the warp factors); otherwise finite differences of the
    numeric assembly are used.
    """
    spec = data.spec
    ext = tuple(data.grid.extents)
    M, n, m = spec.size, spec.n, spec.m
    ds = DerivativeSource(data, force_fd)
    if not ds.analytic:
        forms = assemble_all(data)
        out = {"Omega": [], "X": [], "Upsilon": []}
        for k in range(n):
            h = data.grid.spacing[k]
            for name in out:
                out[name].append(grad1(forms[name], k, h))
        return out

    # Jet inputs: value arrays with their stored analytic derivatives.
    dv = data.derivs

    def jet(valarr, darrs):
        return Jet(valarr, list(darrs))

    C = data.inv_frame
    dC = [-np.einsum("...ab,...bc,...cd->...ad", C, dv["frame"][k], C)
          for k in range(n)]
    Cj = [[jet(C[..., k, i], [dC[d][..., k, i] for d in range(n)])
           for i in range(n)] for k in range(n)]
    Tj = [jet(data.T_comp[..., i], [dv["T_comp"][d][..., i] for d in range(n)])
          for i in range(n)]
    xij = [jet(data.xi_comp[..., u], [dv["xi_comp"][d][..., u]
                                      for d in range(n)]) for u in range(m)]
    alj = [[[jet(data.alpha[..., u, i, j],
                 [dv["alpha"][d][..., u, i, j] for d in range(n)])
             for j in range(n)] for i in range(n)] for u in range(m)]
    otj = [[[jet(data.omega_tangent[..., i, j, k],
                 [dv["omega_tangent"][d][..., i, j, k] for d in range(n)])
             for k in range(n)] for j in range(n)] for i in range(n)]
    obj = [[[jet(data.omega_bundle[..., u, v, k],
                 [dv["omega_bundle"][d][..., u, v, k] for d in range(n)])
             for k in range(n)] for v in range(m)] for u in range(m)]
    # pi as a jet: d(pi)/dx_k = eps <T, d/dx_k> exactly.
    tk = data.coord_T()
    pij = jet(data.pi, [spec.epsilon * tk[..., k] for k in range(n)])
    aj = data.warping.value_generic(pij)
    a1j = data.warping.deriv1_generic(pij)

    Om, X, W = _assemble_entries(spec, Cj, Tj, xij, alj, otj, obj, aj, a1j)
    out = {"Omega": [], "X": [], "Upsilon": []}
    for k in range(n):
        dOm = _nested_to_array(ext, Om, (M, M, n), extract=lambda q: part(q, k))
        dX = _nested_to_array(ext, X, (M, M, n), extract=lambda q: part(q, k))
        out["Omega"].append(dOm)
        out["X"].append(dX)
        out["Upsilon"].append(dOm - dX)
    return out


@dataclass
class ConnectionForms:
    """Assembled form matrices at one node (coordinate components)."""

    node: tuple
    Omega: np.ndarray
    X: np.ndarray
    Upsilon: np.ndarray
    W_forms: np.ndarray


def assemble_forms(data: GeometricData, node) -> ConnectionForms:
    forms = assemble_all(data)
    node = tuple(node)
    return ConnectionForms(node=node, Omega=forms["Omega"][node],
                           X=forms["X"][node], Upsilon=forms["Upsilon"][node],
                           W_forms=forms["W"][node])


# ---------------------------------------------------------------------------
# Group projection


def pseudo_orthonormalize(Z, G, tol: float = 1e-12, max_iter: int = 50):
    """Project Z (or a stack of Z) onto {Z : Z^t G Z = G}.

    Newton-type iteration Z <- Z (3I - G Z^t G Z) / 2; members of the group
    are exactly its fixed points and convergence is quadratic from
    near-membership. Far inputs (initial defect >= 0.5) are refused.
    """
    Z = np.array(Z, dtype=float)
    single = (Z.ndim == 2)
    if single:
        Z = Z[None]
    g = np.diag(np.asarray(G, dtype=float)).copy()
    M = Z.shape[-1]
    eye = np.eye(M)

    def defect(W):
        ztgz = np.einsum("...ji,j,...jl->...il", W, g, W)
        return np.abs(ztgz - np.diag(g)).max(axis=(-1, -2)), ztgz

    d0, ztgz = defect(Z)
    if np.any(d0 >= 0.5):
        raise NonConvergence(
            f"pseudo_orthonormalize: initial defect {float(d0.max()):.3f} "
            ">= 0.5, too far from the group")
    d = d0
    for _ in range(max_iter):
        active = d > tol
        if not np.any(active):
            break
        GM = g[:, None] * ztgz[active]
        Z[active] = Z[active] @ (1.5 * eye - 0.5 * GM)
        d_new, ztgz_new = defect(Z)
        d, ztgz = d_new, ztgz_new
    if np.any(d > tol):
        raise NonConvergence(
            f"pseudo_orthonormalize: defect {float(d.max()):.3e} after "
            f"{max_iter} iterations")
    return Z[0] if single else Z


# ---------------------------------------------------------------------------
# Base frames


@dataclass
class FrameMatrix:
    """Frame matrix at one node, constrained to the group and to the
    vertical-component row."""

    B: np.ndarray
    node: tuple

    def group_defect(self, G):
        g = np.diag(np.asarray(G, dtype=float))
        ztgz = np.einsum("ji,j,jl->il", self.B, g, self.B)
        return float(np.abs(ztgz - np.diag(g)).max())

    def row_defect(self, data: GeometricData):
        Ta = data.delta_components(self.node)
        return float(np.abs(self.B[-1, :] - Ta).max())


def build_base_frame(data: GeometricData, node=None) -> FrameMatrix:
    """Complete the vertical-component row to a G-orthonormal matrix.

    The last row is pinned to (T_0, ..., T_{N+1}); the remaining rows come
    from sign-aware Gram-Schmidt over the canonical basis vectors taken in
    index order. Deterministic.
    """
    spec = data.spec
    node = tuple(node if node is not None else data.grid.base_node)
    M = spec.size
    sgn = np.asarray(spec.signs, dtype=float)
    Ta = data.delta_components(node).astype(float)
    q = float(np.dot(sgn * Ta, Ta))
    if abs(q - spec.epsilon) > 1e-8:
        raise InvariantViolation(
            f"vertical components at node {node} have G-norm {q:.6f}, "
            f"expected {spec.epsilon} (structure equation A fails)")
    last = Ta / np.sqrt(spec.epsilon * q)

    rows = np.zeros((M, M))
    rows[M - 1] = last
    filled = [M - 1]
    for slot in range(M - 1):
        need = sgn[slot]
        got = False
        for cand in range(M):
            w = np.zeros(M)
            w[cand] = 1.0
            for r in filled:
                w = w - sgn[r] * np.dot(sgn * rows[r], w) * rows[r]
            qq = float(np.dot(sgn * w, w))
            if need * qq > 1e-8:
                rows[slot] = w / np.sqrt(need * qq)
                filled.append(slot)
                got = True
                break
        if not got:
            raise InvariantViolation(
                f"cannot complete a base frame with sign {int(need)} "
                f"in slot {slot}")
    fm = FrameMatrix(B=rows, node=node)
    assert fm.group_defect(spec.G) < 1e-10
    return fm


# ---------------------------------------------------------------------------
# Integration


@dataclass
class FrameField:
    """Integrated frame field with drift diagnostics."""

    B: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _thread_count():
    try:
        return max(1, int(os.environ.get("WARPFRAME_THREADS", "1")))
    except ValueError:
        return 1


def integrate_frame(data: GeometricData, B0, renorm_interval: int = 16,
                    renorm: bool = True, b0_tol: float = 1e-8,
                    threads: int | None = None,
                    upsilon: np.ndarray | None = None) -> FrameField:
    """Propagate B across the grid from the base node.

    Per step along axis k, B_next = B exp(h * mean of Upsilon_k at the two
    nodes): a midpoint-sampled exponential scheme of order two that stays on
    the group to the order of the step. Sweep order: axis 0 along the spine
    through the base node, then each further axis fans out from the filled
    region; all runs along one axis advance in lock step (vectorized over
    the filled region), so results do not depend on the worker count.

    upsilon overrides the assembled form matrices (propagator testing and
    reuse of precomputed assemblies).
    """
    spec, grid = data.spec, data.grid
    n, M = spec.n, spec.size
    if isinstance(B0, FrameMatrix):
        node0, B0m = B0.node, B0.B
    else:
        node0, B0m = tuple(grid.base_node), np.asarray(B0, dtype=float)
    if node0 != tuple(grid.base_node):
        raise ValueError("B0 must live at the grid base node")
    fm = FrameMatrix(B=B0m, node=node0)
    gd = fm.group_defect(spec.G)
    rd = fm.row_defect(data)
    if gd > b0_tol or rd > b0_tol:
        raise InvariantViolation(
            f"B0 violates its invariants: group defect {gd:.3e}, "
            f"row defect {rd:.3e} (tolerance {b0_tol:.1e})")

    Ups = upsilon if upsilon is not None else assemble_all(data)["Upsilon"]
    B = np.full(tuple(grid.extents) + (M, M), np.nan)
    B[node0] = B0m
    threads = threads if threads is not None else _thread_count()

    for axis in range(n):
        suffix = tuple(grid.base_node[j] for j in range(axis + 1, n))
        h = grid.spacing[axis]
        bidx = grid.base_node[axis]

        def run(lead_slice):
            prefix = (lead_slice,) + tuple(slice(None) for _ in range(axis - 1)) \
                if axis >= 1 else ()
            for direction in (1, -1):
                stop = grid.extents[axis] if direction > 0 else -1
                steps = 0
                for j in range(bidx + direction, stop, direction):
                    prev = prefix + (j - direction,) + suffix
                    cur = prefix + (j,) + suffix
                    K = 0.5 * direction * h * (Ups[prev + (Ellipsis, axis)]
                                               + Ups[cur + (Ellipsis, axis)])
                    Bn = np.matmul(B[prev], expm(K))
                    if not np.all(np.isfinite(Bn)):
                        raise IntegrationBlowup(
                            f"non-finite frame while stepping axis {axis} "
                            f"to index {j}", node=(axis, j))
                    steps += 1
                    if renorm and steps % renorm_interval == 0:
                        Bn = pseudo_orthonormalize(Bn, spec.G)
                    B[cur] = Bn

        if axis >= 1 and threads > 1:
            lead = grid.extents[0]
            chunks = np.array_split(np.arange(lead), threads)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(
                    lambda ix: run(slice(int(ix[0]), int(ix[-1]) + 1)),
                    [c for c in chunks if len(c)]))
        else:
            run(slice(None))
    steps_total = grid.num_nodes - 1

    g = np.diag(spec.G)
    ztgz = np.einsum("...ji,j,...jl->...il", B, g, B)
    group_defect = np.abs(ztgz - np.diag(g)).max(axis=(-1, -2))
    row_defect = np.abs(B[..., M - 1, :] - data.delta_all()).max(axis=-1)
    detB = np.linalg.det(B)
    det_drift = float(np.abs(np.abs(detB) - abs(np.linalg.det(B0m))).max())
    theta = 0.0
    for k in range(n):
        dB = grad1(B, k, grid.spacing[k])
        theta = max(theta, float(np.abs(
            np.linalg.solve(B, dB) - Ups[..., k]).max()))
    wg = tuple(int(i) for i in np.unravel_index(int(np.argmax(group_defect)),
                                                group_defect.shape))
    diagnostics = {
        "max_group_defect": float(group_defect.max()),
        "worst_group_node": wg,
        "max_row_defect": float(row_defect.max()),
        "det_drift": det_drift,
        "theta_defect": theta,
        "steps": steps_total,
        "renorm": bool(renorm),
        "renorm_interval": int(renorm_interval),
    }
    return FrameField(B=B, diagnostics=diagnostics)


def _integrate_path(data, Ups, B0, order):
    """Single-path integration from the base node to the far corner,
    consuming axes in the given order."""
    grid = data.grid
    cur = list(grid.base_node)
    B = np.asarray(B0, dtype=float).copy()
    for axis in order:
        h = grid.spacing[axis]
        target = grid.extents[axis] - 1
        while cur[axis] != target:
            direction = 1 if target > cur[axis] else -1
            nxt = list(cur)
            nxt[axis] += direction
            K = 0.5 * direction * h * (Ups[tuple(cur)][..., axis]
                                       + Ups[tuple(nxt)][..., axis])
            B = B @ expm(K)
            if not np.all(np.isfinite(B)):
                raise IntegrationBlowup("non-finite frame on lattice path",
                                        node=tuple(nxt))
            cur = nxt
    return B


def path_independence_defect(data: GeometricData, B0, target=None,
                             upsilon: np.ndarray | None = None) -> float:
    """Max-entry difference between the frames transported along the two
    extremal monotone lattice paths (axis order 0..n-1 versus reversed)
    from the base node to the far corner."""
    if isinstance(B0, FrameMatrix):
        B0 = B0.B
    if target is not None and tuple(target) != tuple(
            e - 1 for e in data.grid.extents):
        raise NotImplementedError("only the far-corner target is supported")
    Ups = upsilon if upsilon is not None else assemble_all(data)["Upsilon"]
    n = data.spec.n
    Ba = _integrate_path(data, Ups, B0, list(range(n)))
    Bb = _integrate_path(data, Ups, B0, list(reversed(range(n))))
    return float(np.abs(Ba - Bb).max())
