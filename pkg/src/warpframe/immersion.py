"""Immersion extraction and verification of the reconstruction conclusions.

From a frame field B the immersion into eps*I x_a M^N(c) is read off as
f_gamma = eps_gamma * B_{gamma 0} (spatial), f_{N+1} = pi, and the adapted
frames are E~_gamma = sum_alpha eps_alpha B_{alpha gamma} Ebar_alpha in the
scaled ambient basis. verify_immersion then measures, entirely numerically,
every conclusion the reconstruction is supposed to deliver: isometry, the
vertical-direction split, the height projection, the second-fundamental-form
match, and the normal-connection match. congruence_align fits an ambient
isometry between two reconstructions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .ambient import SignatureSpec, WarpingFunction
from .bundle_data import ChartGrid, GeometricData
from .errors import AlignmentDegenerate, NonConvergence
from .stencils import grad1, grad2_pure, interior_mask
from .verifier import ResidualReport


@dataclass
class ImmersionField:
    """Reconstructed map plus adapted frames on the chart grid.

    spatial: (*extents, N+1) coordinates in the flat fiber factor;
    t: (*extents) height; frames: optional (*extents, N+2, N+2) with
    frames[..., gamma, :] the ambient components of E~_gamma (fiber
    coordinates first, vertical component last). The bundle map takes
    e_gamma to E~_gamma, so `frames` doubles as its matrix.
    """

    spec: SignatureSpec
    warping: WarpingFunction
    grid: ChartGrid
    spatial: np.ndarray
    t: np.ndarray
    frames: np.ndarray | None = None

    def quadric_defect(self):
        """max over nodes of |g0(f, f) - c|."""
        fs = self.spec.fiber_signs
        q = np.einsum("g,...g,...g->...", fs, self.spatial, self.spatial)
        return float(np.abs(q - self.spec.c).max())

    def frame_matrices(self):
        """Recover B from the stored frames (exact inversion of the scaled
        basis change)."""
        if self.frames is None:
            raise ValueError("immersion field carries no frames")
        spec = self.spec
        a = self.warping.eval(self.t)[0]
        Np1 = spec.N + 1
        B = np.empty_like(self.frames)
        fs = spec.fiber_signs
        B[..., :Np1, :] = (spec.c * a)[..., None, None] * (
            fs[:, None] * np.swapaxes(self.frames[..., :, :Np1], -1, -2))
        B[..., Np1, :] = spec.epsilon * self.frames[..., :, Np1]
        return B


def extract_immersion(B, data: GeometricData) -> ImmersionField:
    """Immersion and adapted frames from a frame field over the data grid."""
    B = np.asarray(getattr(B, "B", B), dtype=float)
    spec = data.spec
    ext = tuple(data.grid.extents)
    Np1 = spec.N + 1
    if B.shape != ext + (spec.size, spec.size):
        raise ValueError("frame field has wrong shape for this grid")
    fs = spec.fiber_signs
    spatial = fs * B[..., :Np1, 0]
    t = data.pi.copy()
    a = data.warp_values()[0]
    frames = np.empty(ext + (spec.size, spec.size))
    frames[..., :, :Np1] = (fs[None, :] * np.swapaxes(B[..., :Np1, :], -1, -2)
                            ) / (spec.c * a)[..., None, None]
    frames[..., :, Np1] = spec.epsilon * B[..., Np1, :]
    return ImmersionField(spec=spec, warping=data.warping, grid=data.grid,
                          spatial=spatial, t=t, frames=frames)


def _ambient_inner_arrays(spec, a, u, v):
    """Warped metric on component arrays (..., N+2): fiber then vertical."""
    fs = spec.fiber_signs
    fib = np.einsum("g,...g,...g->...", fs, u[..., :-1], v[..., :-1])
    return spec.epsilon * u[..., -1] * v[..., -1] + a * a * fib


def verify_immersion(imm: ImmersionField, data: GeometricData,
                     tol: float | None = None) -> ResidualReport:
    """Residuals of the five reconstruction conclusions.

    isometry and the vertical split are measured through the frame identity
    (separating integrator drift from discretization error); the second
    fundamental form and the normal connection are re-derived from finite
    differences of the immersion itself as an independent cross-check.
    """
    spec, grid = imm.spec, data.grid
    n, m, Np1 = spec.n, spec.m, spec.N + 1
    h = grid.max_spacing
    if tol is None:
        tol = 10.0 * h * h
    B = imm.frame_matrices()
    a, a1, _ = data.warp_values()
    report = ResidualReport()

    # (1) isometry: tangent block of B^t G B - G.
    g = np.asarray(spec.signs, dtype=float)
    btgb = np.einsum("...ai,a,...aj->...ij", B, g, B)
    tangent = btgb[..., 1:n + 1, 1:n + 1] - np.diag(spec.tangent_signs)
    report.add("isometry", np.abs(tangent).max(axis=(-1, -2)), tol)

    # (2) vertical split: dt - Phi(T) - Phi(xi) in ambient components.
    phiT = np.einsum("...i,...ic->...c", data.T_comp,
                     imm.frames[..., 1:n + 1, :])
    phiXi = np.einsum("...u,...uc->...c", data.xi_comp,
                      imm.frames[..., n + 1:, :])
    split = phiT + phiXi
    split[..., Np1] -= 1.0
    report.add("dt_split", np.abs(split).max(axis=-1), tol)

    # (3) height projection (f's vertical coordinate is pi by construction).
    report.add("projection", np.abs(imm.t - data.pi), tol)

    # (4) second fundamental form from second differences of f.
    margin2 = interior_mask(grid.extents, 2)
    if min(grid.extents) >= 5:
        comps = np.concatenate([imm.spatial, imm.t[..., None]], axis=-1)
        V = [grad1(comps, k, grid.spacing[k]) for k in range(n)]
        C = data.inv_frame
        eb = spec.bundle_signs
        worst = np.zeros(grid.extents)
        for k in range(n):
            for l in range(k, n):
                if k == l:
                    H = grad2_pure(comps, k, grid.spacing[k])
                else:
                    H = grad1(V[l], k, grid.spacing[k])
                D = np.empty_like(H)
                rat = (a1 / a)[..., None]
                D[..., :Np1] = H[..., :Np1] + rat * (
                    V[k][..., Np1:] * V[l][..., :Np1]
                    + V[l][..., Np1:] * V[k][..., :Np1])
                fib = np.einsum("g,...g,...g->...", spec.fiber_signs,
                                V[k][..., :Np1], V[l][..., :Np1])
                D[..., Np1] = H[..., Np1] - spec.epsilon * a * a1 * fib
                got = np.stack([
                    eb[u] * _ambient_inner_arrays(
                        spec, a, D, imm.frames[..., n + 1 + u, :])
                    for u in range(m)], axis=-1)
                want = np.einsum("...i,...j,...uij->...u",
                                 C[..., k, :], C[..., l, :], data.alpha)
                worst = np.maximum(worst, np.abs(got - want).max(axis=-1))
        report.add("alpha_match", np.where(margin2, worst, 0.0), tol)
    else:
        report.add("alpha_match", None, tol,
                   note="grid too small for second-derivative stencils; skipped")

    # (5) normal connection: Phi nabla^E  vs  projected ambient derivative.
    margin1 = interior_mask(grid.extents, 1)
    eb = spec.bundle_signs
    comps = np.concatenate([imm.spatial, imm.t[..., None]], axis=-1)
    V = [grad1(comps, k, grid.spacing[k]) for k in range(n)]
    rat = (a1 / a)[..., None]
    worst = np.zeros(grid.extents)
    for u in range(m):
        Eu = imm.frames[..., n + 1 + u, :]
        for k in range(n):
            dEu = grad1(Eu, k, grid.spacing[k])
            Vk = V[k]
            D = np.empty_like(dEu)
            D[..., :Np1] = dEu[..., :Np1] + rat * (
                Vk[..., Np1:] * Eu[..., :Np1] + Eu[..., Np1:] * Vk[..., :Np1])
            fib = np.einsum("g,...g,...g->...", spec.fiber_signs,
                            Vk[..., :Np1], Eu[..., :Np1])
            D[..., Np1] = dEu[..., Np1] - spec.epsilon * a * a1 * fib
            for v in range(m):
                got = eb[v] * _ambient_inner_arrays(
                    spec, a, D, imm.frames[..., n + 1 + v, :])
                want = data.omega_bundle[..., v, u, k]
                worst = np.maximum(worst, np.abs(got - want))
    report.add("normal_connection", np.where(margin1, worst, 0.0), tol)
    return report


# ---------------------------------------------------------------------------
# Congruence alignment


@dataclass
class Isometry:
    """Ambient isometry id_I x O (plus a vertical shift when the warping is
    constant)."""

    O: np.ndarray
    t_shift: float = 0.0
    rounds: int = 0
    used_frames: bool = False

    def apply(self, imm: ImmersionField) -> ImmersionField:
        spatial = np.einsum("ab,...b->...a", self.O, imm.spatial)
        frames = None
        if imm.frames is not None:
            frames = imm.frames.copy()
            frames[..., :, :-1] = np.einsum("ab,...gb->...ga", self.O,
                                            imm.frames[..., :, :-1])
        return ImmersionField(spec=imm.spec, warping=imm.warping,
                              grid=imm.grid, spatial=spatial,
                              t=imm.t + self.t_shift, frames=frames)


def _group_basis(G0):
    """Basis of the pseudo-orthogonal Lie algebra for the diagonal metric G0."""
    d = len(G0)
    basis = []
    for a in range(d):
        for b in range(a + 1, d):
            H = np.zeros((d, d))
            H[a, b] = 1.0
            H[b, a] = -G0[a] * G0[b]
            basis.append(H)
    return basis


def congruence_align(f: ImmersionField, g: ImmersionField,
                     max_rounds: int = 50, tol: float = 1e-14):
    """Fit tau = id_I x O minimizing the summed squared spatial mismatch.

    Solves the unconstrained least-squares problem for O, projects onto the
    pseudo-orthogonal group, then polishes with Gauss-Newton steps along the
    group. Rank-deficient point clouds fall back to matching the adapted
    frames (which determine the isometry uniquely); with no frames available
    such clouds raise AlignmentDegenerate.

    Returns (Isometry, defect) with defect the post-alignment sup over nodes
    and components (spatial and vertical).
    """
    from .frame_solver import pseudo_orthonormalize

    if f.grid.extents != g.grid.extents or f.spec != g.spec:
        raise ValueError("congruence_align needs fields over one grid and spec")
    spec = f.spec
    d = spec.N + 1
    G0 = spec.fiber_signs
    P = f.spatial.reshape(-1, d)
    Q = g.spatial.reshape(-1, d)
    used_frames = False

    gram = P.T @ P
    rank = np.linalg.matrix_rank(gram, tol=1e-9 * max(1.0, float(np.trace(gram))))
    if rank < d:
        if f.frames is None or g.frames is None:
            raise AlignmentDegenerate(
                f"point cloud spans only {rank} of {d} dimensions and no "
                "frames are available to resolve the ambiguity")
        used_frames = True
        P = np.concatenate([P, f.frames[..., :, :d].reshape(-1, d)])
        Q = np.concatenate([Q, g.frames[..., :, :d].reshape(-1, d)])

    # Unconstrained least squares, then projection onto the group.
    Ot, *_ = np.linalg.lstsq(P, Q, rcond=None)
    O = Ot.T
    try:
        O = pseudo_orthonormalize(O, np.diag(G0))
    except NonConvergence:
        O = np.eye(d)

    # Gauss-Newton polish along the group.
    basis = _group_basis(G0)
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        R = Q - P @ O.T
        J = np.stack([(P @ H.T @ O.T).ravel() for H in basis], axis=1)
        theta, *_ = np.linalg.lstsq(J, R.ravel(), rcond=None)
        if not np.all(np.isfinite(theta)):
            break
        H = sum(t * Hb for t, Hb in zip(theta, basis))
        O = O @ expm(H)
        if np.abs(theta).max() < tol:
            break
    t_shift = 0.0
    if f.warping.is_constant and g.warping.is_constant:
        t_shift = float(np.mean(g.t - f.t))
    tau = Isometry(O=O, t_shift=t_shift, rounds=rounds,
                   used_frames=used_frames)
    moved = tau.apply(f)
    defect = max(float(np.abs(moved.spatial - g.spatial).max()),
                 float(np.abs(moved.t - g.t).max()))
    return tau, defect
