import numpy as np
import pytest

from warpframe import (canonical_example, congruence_align, extract_immersion,
                       make_example, verify_immersion)
from warpframe.errors import AlignmentDegenerate
from warpframe.frame_solver import build_base_frame, integrate_frame
from warpframe.immersion import ImmersionField, Isometry
from warpframe.oracle import exact_base_frame, induce_data, reference_field


def reconstruct(name, params=None, use_exact_B0=True):
    imm = make_example(name, params or {})
    data = induce_data(imm)
    B0 = exact_base_frame(imm) if use_exact_B0 else build_base_frame(data)
    ff = integrate_frame(data, B0)
    return imm, data, extract_immersion(ff, data)


class TestExtraction:
    def test_base_point_formula(self, slice17):
        # B0 reduces to a signed identity on the slice, so f(x0) is the
        # first coordinate direction scaled by c, with height pi(x0).
        imm, data = slice17
        ff = integrate_frame(data, build_base_frame(data))
        rec = extract_immersion(ff, data)
        base = tuple(data.grid.base_node)
        want = np.zeros(3)
        want[0] = data.spec.c
        np.testing.assert_allclose(rec.spatial[base], want, atol=1e-12)
        assert rec.t[base] == data.pi[base]

    def test_quadric_membership_forced(self, slice17, helix65):
        for imm, data in (slice17, helix65):
            ff = integrate_frame(data, build_base_frame(data))
            rec = extract_immersion(ff, data)
            assert rec.quadric_defect() <= 1e-10

    def test_frames_are_ambient_orthonormal(self, helix65):
        imm, data = helix65
        ff = integrate_frame(data, exact_base_frame(imm))
        rec = extract_immersion(ff, data)
        a = data.warp_values()[0]
        spec = data.spec
        fs = spec.fiber_signs
        for node in [(0,), (32,), (64,)]:
            F = rec.frames[node]
            aa = float(a[node])
            for g1 in range(spec.size):
                for g2 in range(spec.size):
                    ip = (spec.epsilon * F[g1, -1] * F[g2, -1]
                          + aa * aa * np.dot(fs * F[g1, :-1], F[g2, :-1]))
                    want = spec.signs[g1] if g1 == g2 else 0.0
                    assert ip == pytest.approx(want, abs=1e-8)

    def test_frame_matrices_round_trip(self, slice17):
        imm, data = slice17
        ff = integrate_frame(data, build_base_frame(data))
        rec = extract_immersion(ff, data)
        np.testing.assert_allclose(rec.frame_matrices(), ff.B, atol=1e-12)


class TestVerifyImmersion:
    def test_slice_conclusions(self, slice17):
        imm, data = slice17
        ff = integrate_frame(data, build_base_frame(data))
        rec = extract_immersion(ff, data)
        rep = verify_immersion(rec, data)
        assert rep.passed
        assert rep["isometry"].sup <= 1e-8
        assert rep["dt_split"].sup <= 1e-8
        assert rep["projection"].sup == 0.0
        h = data.grid.max_spacing
        assert rep["alpha_match"].sup <= 10 * h * h
        assert rep["normal_connection"].sup <= 10 * h * h

    def test_helix_conclusions_converge(self):
        sups = []
        for ext, sp in ((65, 0.03125), (129, 0.015625)):
            imm, data, rec = reconstruct(
                "helix", {"grid_extents": [ext], "grid_spacing": [sp]})
            rep = verify_immersion(rec, data)
            assert rep.passed
            sups.append(max(rep["dt_split"].sup, rep["alpha_match"].sup,
                            rep["normal_connection"].sup))
        assert sups[0] / sups[1] > 3.0


class TestCongruence:
    def test_identity(self, slice17):
        imm, data = slice17
        ff = integrate_frame(data, build_base_frame(data))
        rec = extract_immersion(ff, data)
        tau, defect = congruence_align(rec, rec)
        assert defect <= 1e-12
        np.testing.assert_allclose(tau.O, np.eye(3), atol=1e-10)

    def test_apply_then_recover(self, slice17):
        imm, data = slice17
        ff = integrate_frame(data, build_base_frame(data))
        rec = extract_immersion(ff, data)
        th = 0.9
        O = np.array([[np.cos(th), -np.sin(th), 0.0],
                      [np.sin(th), np.cos(th), 0.0],
                      [0.0, 0.0, 1.0]])
        moved = Isometry(O=O).apply(rec)
        tau, defect = congruence_align(rec, moved)
        assert defect <= 1e-8
        np.testing.assert_allclose(tau.O, O, atol=1e-8)

    def test_round_trip_orders(self):
        for name, grids in (("slice", [({"n": 2}, None),
                                       ({"n": 2, "grid_extents": [33, 33],
                                         "grid_spacing": [0.02, 0.02]}, None)]),
                            ("helix", [({}, None),
                                       ({"grid_extents": [129],
                                         "grid_spacing": [0.015625]}, None)])):
            defects = []
            for params, _ in grids:
                imm, data, rec = reconstruct(name, params)
                ref = reference_field(imm)
                tau, defect = congruence_align(rec, ref)
                h = data.grid.max_spacing
                assert defect <= 10 * h * h
                defects.append(defect)
            order = np.log2(defects[0] / defects[1])
            assert order >= 1.8

    def test_base_frame_choice_immaterial(self, slice17):
        # Two admissible base frames differ by the row-constraint stabilizer
        # blockdiag(O, 1); the reconstructions must align to the same map.
        imm, data = slice17
        B0 = build_base_frame(data)
        th = 0.7
        O = np.array([[np.cos(th), -np.sin(th), 0.0],
                      [np.sin(th), np.cos(th), 0.0],
                      [0.0, 0.0, 1.0]])
        K = np.eye(4)
        K[:3, :3] = O
        r1 = extract_immersion(integrate_frame(data, B0), data)
        r2 = extract_immersion(integrate_frame(data, K @ B0.B), data)
        tau, defect = congruence_align(r1, r2)
        h = data.grid.max_spacing
        assert defect <= 10 * h * h
        np.testing.assert_allclose(tau.O, O, atol=1e-8)

    def test_non_congruent_curves(self):
        _, _, r1 = reconstruct("helix", {})
        _, _, r2 = reconstruct("helix", {"beta": 0.3})
        tau, defect = congruence_align(r1, r2)
        assert defect > 0.1

    def test_degenerate_cloud_needs_frames(self):
        # great-circle positions span only a plane; without frames the
        # alignment is ambiguous and must be refused.
        _, _, rec = reconstruct("helix", {})
        bare = ImmersionField(spec=rec.spec, warping=rec.warping,
                              grid=rec.grid, spatial=rec.spatial, t=rec.t,
                              frames=None)
        with pytest.raises(AlignmentDegenerate):
            congruence_align(bare, bare)
        tau, defect = congruence_align(rec, rec)  # frames resolve it
        assert defect <= 1e-12 and tau.used_frames

    def test_constant_warping_fits_vertical_shift(self):
        _, data = canonical_example("great_subsphere", {"radius": 0.8})
        ff = integrate_frame(data, build_base_frame(data))
        rec = extract_immersion(ff, data)
        shifted = ImmersionField(spec=rec.spec, warping=rec.warping,
                                 grid=rec.grid, spatial=rec.spatial,
                                 t=rec.t + 0.25, frames=rec.frames)
        tau, defect = congruence_align(rec, shifted)
        assert tau.t_shift == pytest.approx(0.25, abs=1e-12)
        assert defect <= 1e-10

    def test_grid_mismatch_rejected(self, slice17, helix65):
        _, d1 = slice17
        _, d2 = helix65
        r1 = extract_immersion(integrate_frame(d1, build_base_frame(d1)), d1)
        r2 = extract_immersion(integrate_frame(d2, build_base_frame(d2)), d2)
        with pytest.raises(ValueError):
            congruence_align(r1, r2)


class TestRoundTripSignatureCoverage:
    """Reconstruction across the signature variants: timelike interval,
    Lorentzian fiber, and a chart with nonvanishing vertical projection."""

    @pytest.mark.parametrize("name", ["desitter_slice", "lorentz_cylinder"])
    def test_slice_variants(self, name):
        imm = make_example(name, {})
        data = induce_data(imm)
        ff = integrate_frame(data, exact_base_frame(imm))
        rec = extract_immersion(ff, data)
        h = data.grid.max_spacing
        assert rec.quadric_defect() <= 1e-8
        rep = verify_immersion(rec, data)
        assert rep.passed
        _, defect = congruence_align(rec, reference_field(imm))
        assert defect <= 10 * h * h

    def test_tilted_hypersurface(self):
        from test_oracle import tilted_graph_immersion
        defects = []
        for extent in (17, 33):
            imm = tilted_graph_immersion(extent=extent)
            data = induce_data(imm)
            ff = integrate_frame(data, exact_base_frame(imm))
            rec = extract_immersion(ff, data)
            rep = verify_immersion(rec, data)
            assert rep.passed
            _, defect = congruence_align(rec, reference_field(imm))
            h = data.grid.max_spacing
            assert defect <= 10 * h * h
            defects.append(defect)
        assert np.log2(defects[0] / defects[1]) >= 1.8

    def test_tilted_codim2(self):
        from test_oracle import tilted_surface_codim2
        imm = tilted_surface_codim2()
        data = induce_data(imm)
        ff = integrate_frame(data, exact_base_frame(imm))
        rec = extract_immersion(ff, data)
        h = data.grid.max_spacing
        assert verify_immersion(rec, data).passed
        assert ff.diagnostics["max_row_defect"] <= 10 * h * h
        _, defect = congruence_align(rec, reference_field(imm))
        assert defect <= 10 * h * h


def test_congruence_recovers_reflection(slice17):
    imm, data = slice17
    ff = integrate_frame(data, build_base_frame(data))
    rec = extract_immersion(ff, data)
    O = np.diag([1.0, -1.0, 1.0])
    moved = Isometry(O=O).apply(rec)
    tau, defect = congruence_align(rec, moved)
    assert defect <= 1e-8
    np.testing.assert_allclose(tau.O, O, atol=1e-8)


def test_round_trip_tilted_helix():
    imm = make_example("helix", {"z0": 0.4, "beta": 0.5})
    data = induce_data(imm)
    rec = extract_immersion(integrate_frame(data, exact_base_frame(imm)), data)
    h = data.grid.max_spacing
    assert verify_immersion(rec, data).passed
    _, defect = congruence_align(rec, reference_field(imm))
    assert defect <= 10 * h * h


def test_large_grid_stress():
    import time
    t0 = time.perf_counter()
    imm = make_example("slice", {"n": 2, "grid_extents": [129, 129],
                                 "grid_spacing": [0.005, 0.005]})
    data = induce_data(imm)
    from warpframe import structure_residuals
    assert structure_residuals(data).passed
    ff = integrate_frame(data, exact_base_frame(imm))
    rec = extract_immersion(ff, data)
    assert verify_immersion(rec, data).passed
    assert ff.diagnostics["max_group_defect"] <= 1e-8
    assert time.perf_counter() - t0 < 60.0
