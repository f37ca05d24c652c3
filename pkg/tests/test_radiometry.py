import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventrgbd.geometry import PinholeModel, ScenePlane, backproject_ray, intersect_ray_plane, project
from eventrgbd.patterns import gen_black, gen_dot_grid, gen_solid
from eventrgbd.radiometry import IrradianceFrame, Renderer, SpectralPower, render_slot, shade_lambertian

CAM = PinholeModel(60.0, 60.0, 32.0, 24.0, 64, 48)
PROJ = PinholeModel(100.0, 100.0, 64.0, 64.0, 128, 128, translation=(0.1, 0.0, 0.0))


def white_plane(distance=1.6, tilt=0.0, width=2.0):
    return ScenePlane.facing_camera(distance, np.ones((8, 8, 3)), width, tilt)


def test_shade_examples():
    assert shade_lambertian(1, 1, [0, 0, 1], [0, 0, 1]) == 1
    assert shade_lambertian(1, 1, [0, 0, 1], [0, np.sqrt(0.75), -0.5]) == 0
    assert shade_lambertian(0.5, 2, [0, 0, 1], [0, np.sqrt(0.75), 0.5]) == pytest.approx(0.5)


def test_spectral_power_nonnegative():
    with pytest.raises(ValueError):
        SpectralPower(-0.1, 1, 1)


def test_black_pattern_is_ambient():
    f = render_slot(white_plane(), PROJ, CAM, gen_black((128, 128)), "G", SpectralPower(), ambient=0.01)
    np.testing.assert_array_equal(f.values, np.full(CAM.shape, 0.01))


def test_solid_white_plane_matches_closed_form():
    plane = white_plane()
    s_pow = SpectralPower(0.7, 1.3, 0.4)
    for ch, power in (("R", 0.7), ("G", 1.3), ("B", 0.4)):
        f = render_slot(plane, PROJ, CAM, gen_solid(None, (128, 128)), ch, s_pow, ambient=0.0)
        for y in range(0, CAM.height, 5):
            for x in range(0, CAM.width, 7):
                point, _ = intersect_ray_plane(backproject_ray([x, y], CAM), plane)
                u, v = project(point, PROJ)
                if not (0 <= round(u) < 128 and 0 <= round(v) < 128):
                    assert f.values[y, x] == 0
                    continue
                beam = (PROJ.center - point) / np.linalg.norm(PROJ.center - point)
                expected = power * max(0.0, float(-plane.normal @ -beam))
                assert f.values[y, x] == pytest.approx(expected, abs=1e-9)


def test_dot_pattern_forward_projection():
    plane = white_plane()
    # 3-px dots: a projector pixel is smaller than a camera pixel at this range
    pat = gen_dot_grid(4, 4, 3, (128, 128))
    f = render_slot(plane, PROJ, CAM, pat, "R", SpectralPower(), ambient=0.0)
    lit = f.values > 0
    # forward oracle: every lit camera pixel maps back to a lit projector pixel
    ys, xs = np.nonzero(lit)
    for y, x in zip(ys, xs):
        point, _ = intersect_ray_plane(backproject_ray([x, y], CAM), plane)
        u, v = project(point, PROJ)
        assert pat.bitmap[int(np.floor(v + 0.5)), int(np.floor(u + 0.5))]
    # and each dot center lands near a lit camera pixel
    seen = 0
    for cx, cy in pat.params["centers"]:
        d = PROJ.ray_directions(np.array([[cx, cy]]))[0]
        t = (plane.offset - plane.normal @ PROJ.center) / (plane.normal @ d)
        u, v = project(PROJ.center + t * d, CAM)
        if 1 <= u < CAM.width - 1 and 1 <= v < CAM.height - 1:
            seen += 1
            win = lit[max(0, int(v) - 1) : int(v) + 2, max(0, int(u) - 1) : int(u) + 2]
            assert win.any()
    assert seen > 0


def test_doubling_power_doubles_signal():
    r = Renderer(white_plane(tilt=15), PROJ, CAM)
    pat = gen_dot_grid(6, 6, 5, (128, 128))
    a = r.render(pat, "B", SpectralPower(1, 1, 0.6), ambient=0.02).values - 0.02
    b = r.render(pat, "B", SpectralPower(1, 1, 1.2), ambient=0.02).values - 0.02
    np.testing.assert_allclose(b, 2 * a, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2), st.floats(0, 2), st.floats(0, 1), st.floats(0, 1))
def test_monotone_in_power_and_albedo(p1, p2, a1, a2):
    lo_p, hi_p = sorted((p1, p2))
    lo_a, hi_a = sorted((a1, a2))
    pat = gen_solid(None, (128, 128))
    base = Renderer(ScenePlane.facing_camera(1.6, np.full((2, 2, 3), lo_a), 2.0), PROJ, CAM)
    high = Renderer(ScenePlane.facing_camera(1.6, np.full((2, 2, 3), hi_a), 2.0), PROJ, CAM)
    v_lo = base.render(pat, "R", SpectralPower(lo_p, 1, 1)).values
    assert np.all(base.render(pat, "R", SpectralPower(hi_p, 1, 1)).values >= v_lo)
    assert np.all(high.render(pat, "R", SpectralPower(lo_p, 1, 1)).values >= v_lo)


def test_back_facing_contributes_nothing():
    # plane tilted so steeply that the projector sits behind it
    plane = ScenePlane.facing_camera(1.0, np.ones((4, 4, 3)), 4.0, tilt_deg=-89.0)
    proj = PinholeModel(100.0, 100.0, 64.0, 64.0, 128, 128, translation=(-0.5, 0.0, 0.0))
    f = render_slot(plane, proj, CAM, gen_solid(None, (128, 128)), "R", SpectralPower(), ambient=0.05)
    np.testing.assert_allclose(f.values, 0.05)


def test_falloff_is_inverse_square():
    plane = white_plane(distance=2.0)
    plain = Renderer(plane, PROJ, CAM)
    a = plain.render(gen_solid(None, (128, 128)), "R", SpectralPower(), 0.0).values.ravel()
    b = Renderer(plane, PROJ, CAM, falloff=True).render(gen_solid(None, (128, 128)), "R", SpectralPower(), 0.0).values.ravel()
    on = a > 0
    dist2 = ((plain.points - PROJ.center) ** 2).sum(axis=1)
    np.testing.assert_allclose(b[on], a[on] / dist2[on], rtol=1e-12)


def test_irradiance_frame_invariants():
    with pytest.raises(ValueError):
        IrradianceFrame(np.full((2, 2), -1.0))
    with pytest.raises(ValueError):
        IrradianceFrame(np.zeros((2, 2)), start_us=0, end_us=10, lit_until_us=20)


def test_render_plan_frames_carry_slot_timing():
    from eventrgbd.patterns import build_sequence

    r = Renderer(white_plane(), PROJ, CAM)
    plan = build_sequence([gen_black((128, 128)), gen_solid(None, (128, 128))], 1000, 2)
    frames = r.render_plan(plan, SpectralPower(), 0.01, exposure=0.5)
    assert len(frames) == len(plan.slots) == 12
    for frame, slot in zip(frames, plan.slots):
        assert (frame.start_us, frame.end_us, frame.channel) == (slot.start_us, slot.end_us, slot.channel)
        assert frame.lit_until_us == slot.start_us + 500
    assert frames[3].values is frames[9].values  # cached raster shared across repetitions
    assert frames[:2][1].channel == "G"
