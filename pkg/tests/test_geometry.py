import numpy as np
import pytest

from conftest import interior
from stringlab.background import minkowski
from stringlab.geometry import (
    Embedding,
    GeometryError,
    build_geometry,
    covariant_gradient,
    gauss_scalar_curvature,
    normal_gradient,
    normal_laplacian,
    normal_laplacian_double_trace,
)
from stringlab.grid import (
    NORMAL,
    SPACETIME,
    Field,
    WorldsheetGrid,
    masked_max_abs,
)


@pytest.fixture(scope="module")
def cylinder_geo():
    grid = WorldsheetGrid(33, 32, 0.0, 1.0)
    tt, ss = grid.meshgrid()
    x = np.stack([tt, np.cos(ss), np.sin(ss), np.zeros_like(tt)], axis=-1)
    return build_geometry(Embedding(minkowski(4), Field(grid, x, (SPACETIME,))))


def test_cylinder_metric_and_frames(cylinder_geo):
    geo = cylinder_geo
    act = geo.mask.active
    flat = np.array([[-1.0, 0.0], [0.0, 1.0]])
    assert masked_max_abs(geo.gamma.values - flat, act) <= 1e-12
    # normal frame: outward radial plus the spare axis, smooth around the circle
    _, ss = geo.grid.meshgrid()
    radial = np.stack([np.zeros_like(ss), np.cos(ss), np.sin(ss), np.zeros_like(ss)], axis=-1)
    assert np.abs(geo.n.values[..., 0, :] - radial).max() <= 1e-12
    assert np.abs(geo.n.values[..., 1, 3] - 1.0).max() <= 1e-12


def test_cylinder_curvatures(cylinder_geo):
    geo = cylinder_geo
    act = geo.mask.active
    # circle curving away from the outward normal: K_ss = +1 in this convention
    assert masked_max_abs(geo.K.values[..., 1, 1, 0] - 1.0, act) <= 1e-10
    assert masked_max_abs(geo.K.values[..., 0, 0, :], act) <= 1e-10
    assert masked_max_abs(geo.K_mean.values[..., 0] - 1.0, act) <= 1e-10
    # intrinsically flat: R = 0, G = 0
    assert masked_max_abs(geo.scalar.values, act) <= 1e-10
    assert masked_max_abs(geo.einstein.values, act) <= 1e-10


def test_euclidean_embedding_rejected():
    grid = WorldsheetGrid(9, 8, 0.0, 1.0)
    tt, ss = grid.meshgrid()
    # both directions spacelike
    x = np.stack([np.zeros_like(tt), tt, np.cos(ss), np.sin(ss)], axis=-1)
    with pytest.raises(GeometryError):
        build_geometry(Embedding(minkowski(4), Field(grid, x, (SPACETIME,))))


def test_nonperiodic_chart_rejected():
    # a straight segment sampled on the sigma circle is not a closed string
    grid = WorldsheetGrid(9, 16, 0.0, 1.0)
    tt, ss = grid.meshgrid()
    x = np.stack([tt, ss, np.zeros_like(tt), np.zeros_like(tt)], axis=-1)
    with pytest.raises(GeometryError, match="periodic"):
        build_geometry(Embedding(minkowski(4), Field(grid, x, (SPACETIME,))))


def test_pulsating_analytic_geometry(pulsating_geo):
    geo = pulsating_geo
    act = geo.mask.active
    tt, _ = geo.grid.meshgrid()
    conf = np.cos(tt) ** 2
    assert masked_max_abs(geo.gamma.values[..., 0, 0] + conf, act) <= 1e-9
    assert masked_max_abs(geo.gamma.values[..., 1, 1] - conf, act) <= 1e-9
    assert masked_max_abs(geo.gamma.values[..., 0, 1], act) <= 1e-9
    assert masked_max_abs(geo.vol.values - conf, act) <= 1e-9
    # on shell: mean curvature at the discretization floor
    assert masked_max_abs(geo.K_mean.values, act) <= 1e-6
    # scalar curvature of the breathing metric: -2 / cos^4
    r_exact = -2.0 / np.cos(tt) ** 4
    rel = masked_max_abs(geo.scalar.values - r_exact, act) / np.abs(r_exact).max()
    assert rel <= 1e-5


def test_einstein_tensor_vanishes(pulsating_geo, rotating_geo):
    for geo in (pulsating_geo, rotating_geo):
        assert masked_max_abs(geo.einstein.values, geo.mask.active) <= 1e-6


def test_gauss_relation_pins_sign(pulsating_geo, rotating_geo):
    for geo in (pulsating_geo, rotating_geo):
        gap = masked_max_abs(
            gauss_scalar_curvature(geo).values - geo.scalar.values, geo.mask.active
        )
        assert gap <= 5e-6


def test_metric_inverse_identity(pulsating_geo):
    geo = pulsating_geo
    ident = np.einsum("...ab,...bc->...ac", geo.gamma_inv.values, geo.gamma.values)
    assert masked_max_abs(ident - np.eye(2), geo.mask.active) <= 1e-10


def test_frame_orthonormality(pulsating_geo, spinning_geo):
    for geo in (pulsating_geo, spinning_geo):
        act = geo.mask.active
        ndotn = np.einsum("...im,...jm->...ij", geo.n_low, geo.n.values)
        assert masked_max_abs(ndotn - np.eye(geo.codim), act) <= 1e-9
        ndote = np.einsum("...im,...am->...ia", geo.n_low, geo.e.values)
        assert masked_max_abs(ndote, act) <= 1e-9


def test_frame_continuity(pulsating_geo, rotating_geo, spinning_geo):
    # orientation continuation: no sign flips between adjacent active points
    for geo in (pulsating_geo, rotating_geo, spinning_geo):
        act = geo.mask.active
        n = geo.n.values
        for slot in range(geo.codim):
            dots = np.einsum("tsm,tsm->ts", n[:, :, slot], np.roll(n[:, :, slot], -1, axis=1))
            ok = act & np.roll(act, -1, axis=1)
            assert dots[ok].min() > 0.0


def test_rotating_fold_masking(rotating_geo):
    geo = rotating_geo
    half = geo.grid.n_sigma // 2
    detected_cols = set(np.argwhere(geo.detected)[:, 1].tolist())
    assert {0, half}.issubset(detected_cols)
    # declared mask covers everything the runtime scan found
    assert not (geo.detected & geo.embedding.mask.active & geo.mask.active).any()
    assert not geo.mask.active[:, 0].any()
    assert not geo.mask.active[:, half].any()


def test_rotating_analytic_geometry(rotating_geo):
    geo = rotating_geo
    act = geo.mask.active
    tt, ss = geo.grid.meshgrid()
    conf = np.sin(ss) ** 2
    assert masked_max_abs(geo.gamma.values[..., 1, 1] - conf, act) <= 1e-9
    # the off-diagonal extrinsic curvature of the rotating string is constant
    assert masked_max_abs(np.abs(geo.K.values[..., 0, 1, 0]) - 1.0, act) <= 1e-8
    assert masked_max_abs(geo.K_mean.values, act) <= 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        r_exact = 2.0 / np.sin(ss) ** 4
        rel = np.abs((geo.scalar.values - r_exact) / r_exact)[act].max()
    assert rel <= 1e-7


def test_codimension_one_normal_connection_vanishes(rotating_geo):
    assert np.abs(rotating_geo.normal_conn.values).max() == 0.0


def test_normal_gradient_constant_field(pulsating_geo):
    geo = pulsating_geo
    phi = Field(geo.grid, np.ones(geo.grid.shape + (geo.codim,)), (NORMAL,))
    grad = normal_gradient(geo, phi)
    # the pulsating frame does not twist, so a constant field has zero gradient
    assert masked_max_abs(grad.values, geo.mask.active) <= 1e-9


def test_flat_laplacian_hand_value(cylinder_geo):
    geo = cylinder_geo
    _, ss = geo.grid.meshgrid()
    phi = Field(geo.grid, np.stack([np.sin(ss), 0 * ss], axis=-1), (NORMAL,))
    lap = normal_laplacian(geo, phi)
    assert masked_max_abs(lap.values[..., 0] + np.sin(ss), interior(geo)) <= 1e-9
    zero = Field(geo.grid, np.zeros(geo.grid.shape + (2,)), (NORMAL,))
    assert np.abs(normal_laplacian(geo, zero).values).max() == 0.0


def test_conformal_laplacian_identity(pulsating_geo):
    geo = pulsating_geo
    tt, ss = geo.grid.meshgrid()
    f = tt**3 - tt
    g = np.cos(2 * ss)
    phi = Field(geo.grid, np.stack([f * g, 0 * g], axis=-1), (NORMAL,))
    lap = normal_laplacian(geo, phi)
    expected = (-6 * tt * g + f * (-4 * g)) / np.cos(tt) ** 2
    gap = masked_max_abs(lap.values[..., 0] - expected, interior(geo))
    assert gap / np.abs(expected).max() <= 1e-6


def test_laplacian_forms_agree(pulsating_geo, spinning_geo):
    rng = np.random.default_rng(1)
    for geo in (pulsating_geo, spinning_geo):
        tt, ss = geo.grid.meshgrid()
        vals = np.stack(
            [np.sin(2 * ss) * tt**2 + 0.3 * np.cos(ss), np.cos(3 * ss) + tt], axis=-1
        )
        phi = Field(geo.grid, vals, (NORMAL,))
        a = normal_laplacian(geo, phi)
        b = normal_laplacian_double_trace(geo, phi)
        assert masked_max_abs(a.values - b.values, interior(geo)) <= 1e-8


def test_frame_rotation_gauge_covariance(pulsating, grid129):
    """Rebuilding the geometry in a pointwise-rotated normal frame rotates
    normal components and leaves frame scalars untouched."""
    grid = grid129
    geo = pulsating.geometry(grid)
    tt, ss = grid.meshgrid()
    theta = 0.7 * np.sin(ss) + 0.4 * tt
    c, s = np.cos(theta), np.sin(theta)
    n = geo.n.values
    n_rot = np.stack(
        [c[..., None] * n[:, :, 0] + s[..., None] * n[:, :, 1],
         -s[..., None] * n[:, :, 0] + c[..., None] * n[:, :, 1]],
        axis=2,
    )
    geo_rot = build_geometry(geo.embedding, frame=n_rot)
    act = interior(geo)
    # scalar built from the extrinsic curvature is frame invariant
    kk = np.einsum("...abi,...abi->...",
                   np.einsum("...ac,...bd,...cdi->...abi",
                             geo.gamma_inv.values, geo.gamma_inv.values, geo.K.values),
                   geo.K.values)
    kk_rot = np.einsum("...abi,...abi->...",
                       np.einsum("...ac,...bd,...cdi->...abi",
                                 geo_rot.gamma_inv.values, geo_rot.gamma_inv.values,
                                 geo_rot.K.values),
                       geo_rot.K.values)
    assert masked_max_abs(kk - kk_rot, act) <= 1e-9

    # gradient commutes with the rotation: rotate, differentiate, rotate back
    phi_vals = np.stack([np.sin(ss) * tt, np.cos(2 * ss)], axis=-1)
    phi = Field(grid, phi_vals, (NORMAL,))
    phi_rot = Field(
        grid,
        np.stack([c * phi_vals[..., 0] + s * phi_vals[..., 1],
                  -s * phi_vals[..., 0] + c * phi_vals[..., 1]], axis=-1),
        (NORMAL,),
    )
    g1 = normal_gradient(geo, phi).values
    g2 = normal_gradient(geo_rot, phi_rot).values
    g2_back = np.stack([c[..., None] * g2[..., 0] - s[..., None] * g2[..., 1],
                        s[..., None] * g2[..., 0] + c[..., None] * g2[..., 1]], axis=-1)
    assert masked_max_abs(g1 - g2_back, act) <= 1e-8


def test_covariant_gradient_metric_compatible(pulsating_geo):
    geo = pulsating_geo
    grad_gamma = covariant_gradient(geo, geo.gamma)
    assert masked_max_abs(grad_gamma.values, interior(geo)) <= 1e-7


def test_frame_override_shape_checked(pulsating_geo):
    with pytest.raises(GeometryError):
        build_geometry(pulsating_geo.embedding, frame=np.zeros((4, 4, 2, 4)))
