"""Discrete hypothesis bundle on a chart grid.

A GeometricData object holds, per grid node, everything the structure
equations talk about: an orthonormal tangent frame (as coordinate
components), the tangent and bundle connection coefficients against
coordinate directions, the symmetric bilinear form alpha with values in the
bundle, the tangent/bundle split (T, xi) of the vertical direction, and the
height function pi. Derived objects (the delta covector, shape operators,
the S tensor, the Whitney-sum covariant derivative) are computed on demand.

Connection data is stored against coordinate directions d/dx_k on purpose:
exterior derivatives on the grid then reduce to plain componentwise finite
differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ambient import SignatureSpec, WarpingFunction, validate_signature
from .errors import DegenerateDataError, InvariantViolation, SchemaError
from .stencils import grad1

FIELD_NAMES = ("frame", "omega_tangent", "omega_bundle", "alpha",
               "T_comp", "xi_comp", "pi")


@dataclass(frozen=True)
class ChartGrid:
    """Rectangular chart: extents per axis, spacings, origin, base node."""

    extents: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]
    base_node: tuple[int, ...]

    def __post_init__(self):
        n = len(self.extents)
        if not (len(self.spacing) == len(self.origin) == len(self.base_node) == n):
            raise SchemaError("grid extents/spacing/origin/base_node lengths differ")
        if any(e < 3 for e in self.extents):
            raise SchemaError("grid extents must be >= 3 per axis")
        if any(h <= 0 for h in self.spacing):
            raise SchemaError("grid spacing must be positive")
        if any(not (0 <= b < e) for b, e in zip(self.base_node, self.extents)):
            raise SchemaError("base node outside the grid")

    @property
    def n(self):
        return len(self.extents)

    @property
    def num_nodes(self):
        return int(np.prod(self.extents))

    @property
    def max_spacing(self):
        return max(self.spacing)

    def axes(self):
        """Per-axis coordinate arrays."""
        return [self.origin[k] + self.spacing[k] * np.arange(self.extents[k])
                for k in range(self.n)]

    def coordinates(self):
        """Node coordinate arrays, one (*extents) array per axis."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def node_coords(self, node):
        return tuple(self.origin[k] + self.spacing[k] * node[k]
                     for k in range(self.n))

    def refine(self, factor: int) -> "ChartGrid":
        """Same chart span with spacing divided by `factor`."""
        if factor == 1:
            return self
        extents = tuple((e - 1) * factor + 1 for e in self.extents)
        spacing = tuple(h / factor for h in self.spacing)
        base = tuple(b * factor for b in self.base_node)
        return ChartGrid(extents, spacing, self.origin, base)

    def to_dict(self):
        return {"extents": list(self.extents),
                "spacing": list(self.spacing),
                "origin": list(self.origin),
                "base_node": list(self.base_node)}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(tuple(int(v) for v in d["extents"]),
                       tuple(float(v) for v in d["spacing"]),
                       tuple(float(v) for v in d["origin"]),
                       tuple(int(v) for v in d["base_node"]))
        except KeyError as exc:
            raise SchemaError(f"grid document missing {exc}") from exc


@dataclass
class FVector:
    """Section value of the Whitney sum TM + E at one node."""

    tangent: np.ndarray
    bundle: np.ndarray
    node: tuple[int, ...]

    def __post_init__(self):
        self.tangent = np.asarray(self.tangent, dtype=float)
        self.bundle = np.asarray(self.bundle, dtype=float)


_FIELD_SHAPES = {
    "frame": lambda n, m: (n, n),
    "omega_tangent": lambda n, m: (n, n, n),
    "omega_bundle": lambda n, m: (m, m, n),
    "alpha": lambda n, m: (m, n, n),
    "T_comp": lambda n, m: (n,),
    "xi_comp": lambda n, m: (m,),
    "pi": lambda n, m: (),
}


class GeometricData:
    """Immutable-after-load bundle of grid fields. See the module docstring
    for the index conventions of each field."""

    def __init__(self, spec: SignatureSpec, warping: WarpingFunction,
                 grid: ChartGrid, frame, omega_tangent, omega_bundle,
                 alpha, T_comp, xi_comp, pi, derivs=None, generator=None):
        self.spec = spec
        self.warping = warping
        self.grid = grid
        ext = tuple(grid.extents)
        n, m = spec.n, spec.m
        if grid.n != n:
            raise SchemaError(f"grid dimension {grid.n} != spec n={n}")

        def _shape(name, arr):
            arr = np.array(arr, dtype=float)  # private copy
            want = ext + _FIELD_SHAPES[name](n, m)
            if arr.shape != want:
                raise SchemaError(f"field {name}: shape {arr.shape}, want {want}")
            arr.setflags(write=False)
            return arr

        self.frame = _shape("frame", frame)
        self.omega_tangent = _shape("omega_tangent", omega_tangent)
        self.omega_bundle = _shape("omega_bundle", omega_bundle)
        self.alpha = _shape("alpha", alpha)
        self.T_comp = _shape("T_comp", T_comp)
        self.xi_comp = _shape("xi_comp", xi_comp)
        self.pi = _shape("pi", pi)
        self.derivs = {}
        if derivs:
            for name, arr in derivs.items():
                if name not in _FIELD_SHAPES or name == "pi":
                    raise SchemaError(f"unknown derivative field {name}")
                arr = np.asarray(arr, dtype=float)
                want = (n,) + ext + _FIELD_SHAPES[name](n, m)
                if arr.shape != want:
                    raise SchemaError(
                        f"derivative {name}: shape {arr.shape}, want {want}")
                self.derivs[name] = arr
        self.generator = generator
        self.flagged_nodes: list[tuple] = []
        self._cache = {}

    # -- cached derived arrays ---------------------------------------------

    @property
    def inv_frame(self):
        """C with d/dx_k = sum_i C[k, i] e_i (inverse of the frame rows)."""
        if "inv_frame" not in self._cache:
            self._cache["inv_frame"] = np.linalg.inv(self.frame)
        return self._cache["inv_frame"]

    def warp_values(self):
        """(a, a', a'') evaluated at pi, each shaped like the grid."""
        if "warp" not in self._cache:
            self._cache["warp"] = self.warping.eval(self.pi)
        return self._cache["warp"]

    def coord_metric(self):
        """<d/dx_k, d/dx_l> per node."""
        if "gkl" not in self._cache:
            C = self.inv_frame
            eps = self.spec.tangent_signs
            self._cache["gkl"] = np.einsum("...ki,...li,i->...kl", C, C, eps)
        return self._cache["gkl"]

    def delta_all(self):
        """T_alpha = delta(e_alpha) for alpha = 0..N+1 at every node."""
        if "delta" not in self._cache:
            spec = self.spec
            out = np.zeros(self.grid.extents + (spec.size,))
            out[..., 1:spec.n + 1] = self.spec.tangent_signs * self.T_comp
            out[..., spec.n + 1:] = self.spec.bundle_signs * self.xi_comp
            self._cache["delta"] = out
        return self._cache["delta"]

    def coord_T(self):
        """<T, d/dx_k> per node."""
        if "tk" not in self._cache:
            eps = self.spec.tangent_signs
            self._cache["tk"] = np.einsum(
                "...ki,i,...i->...k", self.inv_frame, eps, self.T_comp)
        return self._cache["tk"]

    # -- spec-level operations ----------------------------------------------

    def delta_components(self, node):
        return self.delta_all()[tuple(node)]

    def shape_operator(self, node, eta):
        """Matrix of A_eta in the frame: column j holds the components of
        A_eta(e_j)."""
        eta = np.asarray(eta, dtype=float)
        spec = self.spec
        al = self.alpha[tuple(node)]
        inner = np.einsum("u,u,uij->ij", spec.bundle_signs, eta, al)
        return spec.tangent_signs[:, None] * inner

    def s_tensor(self, node, X):
        """S applied to the tangent vector X (frame components)."""
        node = tuple(node)
        spec = self.spec
        X = np.asarray(X, dtype=float)
        a = float(self.warp_values()[0][node])
        T = self.T_comp[node]
        xi = self.xi_comp[node]
        dX = float(np.dot(spec.tangent_signs * X, T))
        fac = -1.0 / (a * spec.c)
        tangent = fac * (X - spec.epsilon * dX * T)
        bundle = fac * (-spec.epsilon * dX * xi)
        return FVector(tangent, bundle, node)

    def whitney_derivative(self, node, k, section):
        """Covariant derivative along d/dx_k of a section field of TM + E.

        section: array (*extents, n + m), tangent components first. Finite
        differences supply the raw component derivative; connection
        coefficients and the alpha / shape-operator cross terms do the rest.
        """
        node = tuple(node)
        spec = self.spec
        n, m = spec.n, spec.m
        section = np.asarray(section, dtype=float)
        if section.shape != self.grid.extents + (n + m,):
            raise SchemaError("section field has wrong shape")
        dsec = grad1(section, k, self.grid.spacing[k])[node]
        tan, bun = section[node][:n], section[node][n:]
        C = self.inv_frame[node]
        ot = self.omega_tangent[node]
        ob = self.omega_bundle[node]
        al = self.alpha[node]
        out_t = dsec[:n] + ot[:, :, k] @ tan
        # -A_eta(d/dx_k) for the bundle part eta of the section
        Aeta = np.einsum("u,u,uij->ij", spec.bundle_signs, bun, al)
        out_t = out_t - spec.tangent_signs * (C[k] @ Aeta)
        out_b = dsec[n:] + ob[:, :, k] @ bun
        out_b = out_b + np.einsum("i,j,uij->u", C[k], tan, al)
        return FVector(out_t, out_b, node)

    # -- validation -----------------------------------------------------------

    def validate(self, tol=1e-10, raise_on_error=True):
        """Check structural invariants; returns a list of findings.

        Hard violations (alpha symmetry, connection skewness, pi domain,
        T = eps * grad(pi)) raise when raise_on_error is set. Nodes where
        <T,T> + <xi,xi> drifts from eps are flagged, not treated as errors.
        """
        spec, grid = self.spec, self.grid
        problems = validate_signature(spec)
        sym = np.abs(self.alpha - np.swapaxes(self.alpha, -1, -2))
        if sym.max() > tol:
            worst = np.unravel_index(np.argmax(sym.max(axis=(-1, -2, -3))),
                                     grid.extents)
            problems.append(
                f"alpha symmetry violated, worst {sym.max():.3e} at node {worst}")
        et = spec.tangent_signs
        skew = self.omega_tangent + np.einsum(
            "i,j,...jik->...ijk", et, et, self.omega_tangent)
        if np.abs(skew).max() > tol:
            problems.append(
                f"tangent connection not metric-skew, worst {np.abs(skew).max():.3e}")
        eb = spec.bundle_signs
        skewb = self.omega_bundle + np.einsum(
            "u,v,...vuk->...uvk", eb, eb, self.omega_bundle)
        if np.abs(skewb).max() > tol:
            problems.append(
                f"bundle connection not metric-skew, worst {np.abs(skewb).max():.3e}")
        lo, hi = self.warping.domain
        if np.any(self.pi < lo) or np.any(self.pi > hi):
            problems.append("pi leaves the warping domain I")
        # T = eps * grad(pi): d(pi)(d/dx_k) must equal eps * <T, d/dx_k>.
        gtol = 10.0 * grid.max_spacing ** 2
        tk = self.coord_T()
        worst_grad = 0.0
        for k in range(grid.n):
            dpi = grad1(self.pi, k, grid.spacing[k])
            worst_grad = max(worst_grad,
                             float(np.abs(dpi - spec.epsilon * tk[..., k]).max()))
        if worst_grad > gtol:
            problems.append(
                f"T is not eps*grad(pi): defect {worst_grad:.3e} > {gtol:.3e}")
        if problems and raise_on_error:
            raise InvariantViolation("; ".join(problems))
        # Soft flags: vertical-norm drift.
        tt = np.einsum("i,...i,...i->...", et, self.T_comp, self.T_comp)
        xx = np.einsum("u,...u,...u->...", eb, self.xi_comp, self.xi_comp)
        drift = np.abs(tt + xx - spec.epsilon)
        bad = np.argwhere(drift > max(tol, gtol))
        self.flagged_nodes = [tuple(ix) for ix in bad]
        return problems

    # -- serialization ----------------------------------------------------------

    def to_document(self):
        doc = {
            "format_version": 1,
            "kind": "warpframe.dataset",
            "signature": self.spec.to_dict(),
            "warping": self.warping.to_dict(),
            "grid": self.grid.to_dict(),
            "fields": {name: getattr(self, name).ravel().tolist()
                       for name in FIELD_NAMES},
        }
        if self.derivs:
            doc["derivatives"] = {name: arr.ravel().tolist()
                                  for name, arr in self.derivs.items()}
        if self.generator:
            doc["generator"] = dict(self.generator)
        return doc


def load_data(document: dict, tol=1e-10, validate=True) -> GeometricData:
    """Parse and validate a dataset document (already JSON-decoded).

    validate=False skips the invariant pass (schema checks still run), for
    callers that want to report violations instead of failing on them."""
    if not isinstance(document, dict):
        raise SchemaError("dataset document must be a JSON object")
    if document.get("kind") != "warpframe.dataset":
        raise SchemaError("not a warpframe.dataset document")
    if document.get("format_version") != 1:
        raise SchemaError("unsupported format_version")
    try:
        spec = SignatureSpec.from_dict(document["signature"])
        warping = WarpingFunction.from_dict(document["warping"])
        grid = ChartGrid.from_dict(document["grid"])
        raw = document["fields"]
    except KeyError as exc:
        raise SchemaError(f"dataset document missing {exc}") from exc
    ext = tuple(grid.extents)
    n, m = spec.n, spec.m
    fields = {}
    for name in FIELD_NAMES:
        if name not in raw:
            raise SchemaError(f"fields missing {name!r}")
        shape = ext + _FIELD_SHAPES[name](n, m)
        arr = np.asarray(raw[name], dtype=float)
        if arr.size != int(np.prod(shape)):
            raise SchemaError(f"field {name}: {arr.size} values, want "
                              f"{int(np.prod(shape))}")
        fields[name] = arr.reshape(shape)
    derivs = None
    if "derivatives" in document:
        derivs = {}
        for name, vals in document["derivatives"].items():
            if name not in _FIELD_SHAPES or name == "pi":
                raise SchemaError(f"unknown derivative field {name}")
            shape = (n,) + ext + _FIELD_SHAPES[name](n, m)
            arr = np.asarray(vals, dtype=float)
            if arr.size != int(np.prod(shape)):
                raise SchemaError(f"derivative {name}: wrong size")
            derivs[name] = arr.reshape(shape)
    data = GeometricData(spec, warping, grid, derivs=derivs,
                         generator=document.get("generator"), **fields)
    if not np.all(np.isfinite(data.pi)):
        raise SchemaError("non-finite pi values")
    if validate:
        data.validate(tol=tol)
    return data


def gram_schmidt_signed(vectors, gram, signs, tol=1e-10):
    """Sign-aware Gram-Schmidt repair of near-orthonormal vector sets.

    vectors: (..., r, d) stacks of row vectors; gram: (..., d, d) the
    quadratic form they should be orthonormal against; signs: the target
    squared norms (+-1 per slot). Off by default everywhere: the library
    never repairs user frames on load, because in this data model the frame
    *defines* the metric of M and silently reworking it would mask
    inconsistent inputs. The utility serves callers who carry an external
    coordinate metric.
    """
    V = np.array(vectors, dtype=float)
    G = np.asarray(gram, dtype=float)
    signs = np.asarray(signs, dtype=float)
    r = V.shape[-2]
    out = np.empty_like(V)
    for i in range(r):
        w = V[..., i, :]
        for j in range(i):
            u = out[..., j, :]
            proj = signs[j] * np.einsum("...a,...ab,...b->...", w, G, u)
            w = w - proj[..., None] * u
        q = np.einsum("...a,...ab,...b->...", w, G, w)
        if np.any(signs[i] * q <= tol):
            raise DegenerateDataError(
                f"gram_schmidt_signed: slot {i} degenerates or has the "
                f"wrong sign (needed {int(signs[i])})")
        out[..., i, :] = w / np.sqrt(signs[i] * q)[..., None]
    return out


# Functional views of the derived-object operations.

def delta_components(data: GeometricData, node):
    """T_alpha = delta(e_alpha), alpha = 0..N+1, at one node."""
    return data.delta_components(node)


def shape_operator(data: GeometricData, node, eta):
    """Matrix of A_eta in the tangent frame at one node."""
    return data.shape_operator(node, eta)


def s_tensor(data: GeometricData, node, X):
    """S applied to a tangent vector (frame components) at one node."""
    return data.s_tensor(node, X)


def whitney_derivative(data: GeometricData, node, k, section):
    """Covariant derivative of a TM + E section field along d/dx_k."""
    return data.whitney_derivative(node, k, section)
