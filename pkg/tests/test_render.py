import numpy as np
import pytest

from s3dc import primitives
from s3dc.errors import DomainError, NoObjectFoundError
from s3dc.geometry import normalize_unit_cube
from s3dc.render import (
    RenderConfig,
    ViewImage,
    concat_grid,
    load_view,
    luma601,
    mask_background,
    render_views,
    save_view,
)


@pytest.fixture(scope="module")
def red_cube_views():
    cube = primitives.cube(primitives.solid_texture((255, 0, 0)))
    return render_views(normalize_unit_cube(cube))


def test_front_view_central_red_square(red_cube_views):
    front = red_cube_views["front"]
    center = front.pixels[128, 128]
    assert center[0] > 0 and center[1] == 0 and center[2] == 0
    assert front.alpha[128, 128]
    assert not front.alpha[2, 2]
    # the face occupies the central ~83% of the frame (margin 0.1 each side)
    covered = front.alpha.mean()
    assert covered == pytest.approx((1 / 1.2) ** 2, abs=0.02)


def test_mask_matches_projection(red_cube_views):
    front = red_cube_views["front"]
    rows = np.nonzero(front.alpha.any(axis=1))[0]
    cols = np.nonzero(front.alpha.any(axis=0))[0]
    # square silhouette: contiguous identical spans in both axes
    assert len(rows) == rows[-1] - rows[0] + 1
    assert len(cols) == cols[-1] - cols[0] + 1
    assert len(rows) == len(cols)


def test_front_back_mirrored(red_cube_views):
    front, back = red_cube_views["front"], red_cube_views["back"]
    np.testing.assert_array_equal(front.alpha, back.alpha[:, ::-1])
    assert front.alpha.sum() == back.alpha.sum()


def test_default_albedo_gray():
    views = render_views(normalize_unit_cube(primitives.cube()))
    top = views["top"]
    obj = top.pixels[top.alpha]
    assert (obj[:, 0] == obj[:, 1]).all() and (obj[:, 1] == obj[:, 2]).all()


def test_render_deterministic():
    mesh = normalize_unit_cube(primitives.icosphere(2))
    a = render_views(mesh)
    b = render_views(mesh)
    for tag in a:
        np.testing.assert_array_equal(a[tag].pixels, b[tag].pixels)
        np.testing.assert_array_equal(a[tag].alpha, b[tag].alpha)


def test_render_rejects_unnormalized():
    mesh = primitives.cube()
    big = type(mesh)(vertices=mesh.vertices * 3.0, triangles=mesh.triangles)
    with pytest.raises(DomainError, match="normalized"):
        render_views(big)


def test_render_config_validation():
    with pytest.raises(DomainError):
        RenderConfig(resolution=8)


def test_concat_dimensions(red_cube_views):
    comp = concat_grid(red_cube_views)
    assert comp.pixels.shape == (512, 768, 3)
    assert comp.camera_tag == "composite"
    np.testing.assert_array_equal(
        comp.pixels[0, 0], red_cube_views["front"].pixels[0, 0]
    )
    np.testing.assert_array_equal(
        comp.pixels[:256, :256], red_cube_views["front"].pixels
    )


def test_concat_solid_views():
    solid = np.full((64, 64, 3), 17, dtype=np.uint8)
    views = {
        tag: ViewImage(pixels=solid, camera_tag=tag)
        for tag in ("front", "right", "back", "left", "top", "bottom")
    }
    comp = concat_grid(views)
    assert (comp.pixels == 17).all()


def test_concat_mismatched_resolutions(red_cube_views):
    views = dict(red_cube_views)
    views["top"] = ViewImage(
        pixels=np.zeros((64, 64, 3), dtype=np.uint8), camera_tag="top"
    )
    with pytest.raises(DomainError, match="resolution"):
        concat_grid(views)


def _disk_image(size=100, radius=30):
    img = np.full((size, size, 3), 255, dtype=np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    disk = (yy - size // 2) ** 2 + (xx - size // 2) ** 2 <= radius**2
    img[disk] = (180, 20, 20)
    return img, disk


def test_mask_background_disk():
    img, disk = _disk_image()
    out = mask_background(ViewImage(pixels=img, camera_tag="external"))
    # mask must agree with the disk up to a 1-pixel boundary band
    disagreement = out.alpha ^ disk
    from scipy import ndimage

    boundary = ndimage.binary_dilation(disk) & ~ndimage.binary_erosion(disk)
    assert not (disagreement & ~boundary).any()


def test_mask_background_keeps_rgb():
    img, _ = _disk_image()
    out = mask_background(ViewImage(pixels=img, camera_tag="external"))
    np.testing.assert_array_equal(out.pixels, img)


def test_mask_background_uniform_errors():
    img = np.full((64, 64, 3), 99, dtype=np.uint8)
    with pytest.raises(NoObjectFoundError):
        mask_background(ViewImage(pixels=img, camera_tag="external"))


def test_mask_background_rejects_masked_input():
    img, disk = _disk_image()
    view = ViewImage(pixels=img, alpha=disk, camera_tag="external")
    with pytest.raises(DomainError, match="mask"):
        mask_background(view)


def test_save_load_view_round_trip(tmp_path, red_cube_views):
    front = red_cube_views["front"]
    path = tmp_path / "front.png"
    save_view(front, path)
    loaded = load_view(path, camera_tag="front")
    np.testing.assert_array_equal(loaded.pixels, front.pixels)
    np.testing.assert_array_equal(loaded.alpha, front.alpha)


def test_luma601_weights():
    px = np.zeros((1, 3, 3), dtype=np.uint8)
    px[0, 0] = (255, 0, 0)
    px[0, 1] = (0, 255, 0)
    px[0, 2] = (0, 0, 255)
    lum = luma601(px)
    np.testing.assert_allclose(lum[0], [0.299 * 255, 0.587 * 255, 0.114 * 255])
