import numpy as np
import pytest

from s3dc import primitives
from s3dc.mesh_io import save_object

# hand-written OBJ used for bit-exact round-trip checks
HAND_OBJ = """\
# irregular textured fan
v 0.0 0.0 0.0
v 1.5 0.25 0.0
v 1.0 1.0 0.125
v 0.0 1.0 0.5
v -0.5 0.5 0.75
vt 0.0 0.0
vt 1.0 0.0
vt 1.0 1.0
vt 0.0 1.0
vt 0.5 0.5
f 1/1 2/2 3/3
f 1/1 3/3 4/4
f 1/1 4/4 5/5
f 2/2 3/3 5/5
"""


@pytest.fixture()
def hand_obj(tmp_path):
    path = tmp_path / "hand.obj"
    path.write_text(HAND_OBJ)
    return path


@pytest.fixture()
def cube_obj(tmp_path):
    """Plain unit cube on disk, no texture."""
    path = tmp_path / "cube.obj"
    save_object(primitives.cube(), path)
    return path


@pytest.fixture()
def textured_cube_obj(tmp_path):
    """Cube with a small noise texture on disk."""
    path = tmp_path / "cube_tex.obj"
    save_object(primitives.cube(primitives.noise_texture(64, seed=1)), path)
    return path


@pytest.fixture(scope="session")
def icosphere():
    return primitives.icosphere(3)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
