import numpy as np
import pytest

from warpframe import (SignatureSpec, aux_identity_residuals,
                       canonical_example, flatness_residual, induce_data,
                       make_example, structure_residuals)
from warpframe.errors import DegenerateDataError
from warpframe.oracle import exact_base_frame, exact_frame_field

ALL_FAMILIES = ["slice", "vertical_geodesic", "great_subsphere", "helix",
                "desitter_slice", "lorentz_cylinder"]


class TestSliceFamily:
    def test_vertical_split(self, slice17):
        imm, data = slice17
        assert np.abs(data.T_comp).max() == 0.0
        # xi is the unit vertical direction in the single bundle slot
        np.testing.assert_allclose(np.abs(data.xi_comp), 1.0, atol=1e-12)

    def test_umbilic_shape_operator(self, slice17):
        imm, data = slice17
        a, a1, _ = data.warp_values()
        for node in [(0, 0), (8, 8), (16, 3)]:
            A = data.shape_operator(node, data.xi_comp[node])
            np.testing.assert_allclose(A, -(a1 / a)[node] * np.eye(2),
                                       atol=1e-10)

    def test_totally_geodesic_at_cosh_minimum(self):
        _, data = canonical_example("slice", {"n": 2, "t0": 0.0})
        assert np.abs(data.alpha).max() <= 1e-12

    def test_warp_term_matrix_pattern(self, slice17):
        # X has only its last row and column, (a'/a) omega_alpha up to sign
        from warpframe.frame_solver import assemble_all
        imm, data = slice17
        forms = assemble_all(data)
        X = forms["X"]
        W = forms["W"]
        a, a1, _ = data.warp_values()
        Np1 = data.spec.N + 1
        assert np.abs(X[..., :Np1, :Np1, :]).max() <= 1e-14
        want = (a1 / a)[..., None, None] * W[..., :Np1, :]
        np.testing.assert_allclose(X[..., :Np1, Np1, :], want, atol=1e-13)


class TestVerticalGeodesic:
    def test_split_and_flatness(self):
        _, data = canonical_example("vertical_geodesic", {})
        # T is the full vertical direction, xi vanishes, alpha vanishes
        np.testing.assert_allclose(
            np.einsum("i,...i,...i->...", data.spec.tangent_signs,
                      data.T_comp, data.T_comp), 1.0, atol=1e-12)
        assert np.abs(data.xi_comp).max() <= 1e-12
        assert np.abs(data.alpha).max() <= 1e-12

    def test_negative_epsilon_rejected(self):
        with pytest.raises(DegenerateDataError):
            make_example("vertical_geodesic", {"epsilon": -1})


class TestHelix:
    def test_unit_speed_validation(self):
        with pytest.raises(ValueError, match="unit speed"):
            make_example("helix", {"beta": 0.6, "omega": 0.5})
        make_example("helix", {"beta": 0.6, "omega": 0.8})  # 0.36+0.64=1

    def test_degenerate_pitch_is_a_slice_circle(self):
        _, data = canonical_example("helix", {"beta": 0.0})
        assert np.abs(data.T_comp).max() <= 1e-12
        assert np.abs(data.pi - data.pi.flat[0]).max() == 0.0

    def test_vertical_split_norm(self, helix65):
        _, data = helix65
        spec = data.spec
        tt = np.einsum("i,...i,...i->...", spec.tangent_signs,
                       data.T_comp, data.T_comp)
        xx = np.einsum("u,...u,...u->...", spec.bundle_signs,
                       data.xi_comp, data.xi_comp)
        np.testing.assert_allclose(tt + xx, 1.0, atol=1e-10)


class TestGreatSubsphere:
    def test_great_circle_in_s3_flat_normal_bundle(self):
        _, data = canonical_example("great_subsphere",
                                    {"n": 1, "N": 3, "grid_extents": [21],
                                     "grid_spacing": [0.05]})
        assert np.abs(data.alpha).max() <= 1e-12
        assert np.abs(data.omega_bundle).max() <= 1e-12
        rep = structure_residuals(data)
        assert rep["F"].sup <= 1e-12

    def test_small_subsphere_is_umbilic(self):
        r = 0.8
        _, data = canonical_example("great_subsphere", {"radius": r})
        # |alpha(e_i, e_i)| = sqrt(1 - r^2)/r for a distance sphere
        node = tuple(e // 2 for e in data.grid.extents)
        al = data.alpha[node]
        norm = np.sqrt(sum(al[u, 0, 0] ** 2 for u in range(data.spec.m)))
        assert norm == pytest.approx(np.sqrt(1 - r * r) / r, abs=1e-10)

    def test_requires_unit_constant_warping(self):
        with pytest.raises(ValueError, match="constant-warping"):
            make_example("great_subsphere", {"warping": "cosh"})


class TestInduceData:
    @pytest.mark.parametrize("name", ALL_FAMILIES)
    def test_forward_data_satisfies_all_residuals(self, name):
        _, data = canonical_example(name, {})
        for rep in (structure_residuals(data), aux_identity_residuals(data),
                    flatness_residual(data)):
            assert rep.passed
            assert max(e.sup for e in rep.entries.values()) <= 1e-10

    def test_fd_engine_agrees_with_jets_at_second_order(self):
        from warpframe.stencils import interior_mask
        sups = []
        for ext in (17, 33):
            params = {"n": 2, "grid_extents": [ext, ext],
                      "grid_spacing": [0.64 / (ext - 1)] * 2}
            imm = make_example("slice", params)
            d_jet = induce_data(imm, derivatives="jet",
                                attach_derivatives=False)
            d_fd = induce_data(imm, derivatives="fd")
            inner = interior_mask((ext, ext), 2)
            worst = 0.0
            for f in ("frame", "omega_tangent", "omega_bundle", "alpha",
                      "T_comp", "xi_comp"):
                diff = np.abs(getattr(d_jet, f) - getattr(d_fd, f))
                diff = diff.reshape(ext, ext, -1).max(axis=-1)
                worst = max(worst, float(diff[inner].max()))
            sups.append(worst)
        assert sups[0] / sups[1] > 3.0  # roughly fourfold error drop

    def test_wrong_declared_signature_rejected(self):
        imm = make_example("lorentz_cylinder", {})
        bad_spec = SignatureSpec.from_counts(2, 1, 1, 1, (1, 1), (1,))
        bad = type(imm)(spec=bad_spec, warping=imm.warping, grid=imm.grid,
                        map_fn=imm.map_fn)
        with pytest.raises(DegenerateDataError):
            induce_data(bad)

    def test_frame_seed_mixes_tangents(self, slice17):
        imm, data = slice17
        seed = np.array([[0.0, 1.0], [1.0, 0.0]])
        mixed = induce_data(imm, frame_seed=seed, attach_derivatives=False)
        rep = structure_residuals(mixed, force_fd=True)
        assert rep.passed
        # the first frame vector now points along the second axis
        assert abs(mixed.frame[8, 8, 0, 1]) > abs(mixed.frame[8, 8, 0, 0])


class TestExactFrames:
    def test_base_frame_invariants(self, helix65):
        imm, data = helix65
        from warpframe.frame_solver import FrameMatrix
        B0 = exact_base_frame(imm)
        fm = FrameMatrix(B=B0, node=tuple(data.grid.base_node))
        assert fm.group_defect(data.spec.G) <= 1e-12
        assert fm.row_defect(data) <= 1e-12

    def test_frame_field_in_group_everywhere(self, slice17):
        imm, data = slice17
        B = exact_frame_field(imm)
        g = np.diag(data.spec.G)
        ztgz = np.einsum("...ji,j,...jl->...il", B, g, B)
        assert np.abs(ztgz - np.diag(g)).max() <= 1e-12
        # row N+1 carries the vertical components
        assert np.abs(B[..., -1, :] - data.delta_all()).max() <= 1e-12


def test_unknown_example_name():
    with pytest.raises(KeyError):
        make_example("moebius", {})


def tilted_graph_immersion(gamma=0.35, t0=0.25, extent=17):
    """Hypersurface with nonvanishing T on a 2-d chart: the height varies
    along the first chart direction over a quadric graph chart."""
    from warpframe import ChartGrid, ExplicitImmersion, WarpingFunction
    from warpframe.jets import sqrt
    spec = SignatureSpec.from_counts(2, 1, 1, 1, (1, 1), (1,))
    warping = WarpingFunction("cosh")
    h = 0.64 / (extent - 1)
    grid = ChartGrid((extent, extent), (h, h),
                     (-0.32, -0.32), (extent // 2, extent // 2))

    def map_fn(x):
        q = x[0] * x[0] + x[1] * x[1]
        w = sqrt(1.0 - q)
        return t0 + gamma * x[0], [w, x[0], x[1]]

    return ExplicitImmersion(spec, warping, grid, map_fn)


def tilted_surface_codim2(gamma=0.3, t0=0.2, extent=13):
    """Codimension-two surface with nonvanishing T: a great 2-subsphere
    chart inside S^3 with the height varying along the second direction."""
    from warpframe import ChartGrid, ExplicitImmersion, WarpingFunction
    from warpframe.jets import sqrt
    spec = SignatureSpec.from_counts(2, 2, 1, 1, (1, 1), (1, 1))
    warping = WarpingFunction("cosh")
    h = 0.5 / (extent - 1)
    grid = ChartGrid((extent, extent), (h, h),
                     (-0.25, -0.25), (extent // 2, extent // 2))

    def map_fn(x):
        q = x[0] * x[0] + x[1] * x[1]
        w = sqrt(1.0 - q)
        return t0 + gamma * x[1], [w, x[0], x[1], 0.0 * x[0]]

    return ExplicitImmersion(spec, warping, grid, map_fn)


class TestTiltedImmersions:
    """Charts where T != 0 on a multidimensional chart: these are the only
    configurations in which the vertical terms of the Gauss and Codazzi
    right-hand sides are nonzero, so they pin the corresponding signs."""

    def test_hypersurface_T_nonzero_and_residuals_vanish(self):
        data = induce_data(tilted_graph_immersion())
        assert np.abs(data.T_comp).max() > 0.1
        for rep in (structure_residuals(data), aux_identity_residuals(data),
                    flatness_residual(data)):
            assert max(e.sup for e in rep.entries.values()) <= 1e-9

    def test_codim2_T_nonzero_and_residuals_vanish(self):
        data = induce_data(tilted_surface_codim2())
        assert np.abs(data.T_comp).max() > 0.1
        assert data.spec.m == 2
        for rep in (structure_residuals(data), aux_identity_residuals(data),
                    flatness_residual(data)):
            assert max(e.sup for e in rep.entries.values()) <= 1e-9

    def test_gauss_vertical_terms_actually_contribute(self):
        # zeroing T in the same data must break (D): the vertical terms of
        # the right-hand side are load-bearing here.
        from warpframe import GeometricData
        data = induce_data(tilted_graph_immersion())
        rep0 = structure_residuals(data)
        stripped = GeometricData(
            data.spec, data.warping, data.grid, frame=data.frame,
            omega_tangent=data.omega_tangent, omega_bundle=data.omega_bundle,
            alpha=data.alpha, T_comp=0.0 * data.T_comp,
            xi_comp=data.xi_comp, pi=0.0 * data.pi + float(data.pi.flat[0]))
        rep1 = structure_residuals(stripped, force_fd=True)
        assert rep0["D"].sup <= 1e-9
        assert rep1["D"].sup > 1e-3


def test_normal_completion_with_out_of_order_signs():
    # Bundle signs (-1, +1): the timelike candidate sits after the spacelike
    # ones in index order, so the completion must skip without discarding.
    from warpframe import ChartGrid, ExplicitImmersion, WarpingFunction
    from warpframe.jets import cos, sin
    spec = SignatureSpec.from_counts(1, 2, 1, 1, (1,), (-1, 1))
    w = WarpingFunction("constant")
    grid = ChartGrid((21,), (0.05,), (-0.5,), (10,))

    def map_fn(x):
        th = x[0]
        return 0.3 + 0.0 * th, [cos(th), sin(th), 0.0 * th]

    data = induce_data(ExplicitImmersion(spec, w, grid, map_fn))
    rep = structure_residuals(data)
    assert rep.passed
    assert max(e.sup for e in rep.entries.values()) <= 1e-10


def test_tabulated_warping_end_to_end():
    # Same pipeline with a sampled scale factor: the slice's height is
    # constant, so all evaluations stay inside one interpolation segment and
    # the induced data must satisfy the equations to roundoff.
    from warpframe import WarpingFunction
    ts = np.linspace(-1.0, 1.0, 101)
    tab = WarpingFunction("tabulated", domain=(-0.9, 0.9),
                          table_t=tuple(ts), table_a=tuple(np.cosh(ts)))
    _, data = canonical_example("slice", {"n": 2, "warping": tab, "t0": 0.3})
    rep = structure_residuals(data)
    rep.merge(aux_identity_residuals(data))
    rep.merge(flatness_residual(data))
    assert rep.passed
    assert max(e.sup for e in rep.entries.values()) <= 1e-10


@pytest.mark.parametrize("warp", ["cos", "exp"])
def test_other_analytic_warpings_end_to_end(warp):
    _, data = canonical_example("slice", {"n": 2, "warping": warp, "t0": 0.2})
    rep = structure_residuals(data)
    rep.merge(flatness_residual(data))
    assert rep.passed
    assert max(e.sup for e in rep.entries.values()) <= 1e-10


@pytest.mark.parametrize("name", ALL_FAMILIES)
def test_forward_data_passes_at_grid_tolerance_without_derivatives(name):
    _, data = canonical_example(name, {"attach_derivatives": False})
    for rep in (structure_residuals(data), aux_identity_residuals(data),
                flatness_residual(data)):
        assert rep.passed  # default tolerance is 10 h^2 in FD mode
