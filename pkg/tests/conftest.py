import math

import numpy as np
import pytest

from kinoplan import KinodynamicLimits, MeshGraph, synth_mesh


@pytest.fixture
def two_triangle_mesh():
    # a unit square split along the 1-2 diagonal, lying in the xy plane
    vertices = np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
    ])
    faces = np.array([[0, 1, 2], [1, 3, 2]])
    return MeshGraph(vertices, faces)


@pytest.fixture
def strip_mesh():
    # 2 x 5 vertex strip: a straight corridor of 8 triangles along x
    return synth_mesh("plane-grid", nx=5, ny=2, spacing=1.0)


@pytest.fixture
def grid_mesh():
    return synth_mesh("plane-grid", nx=4, ny=4, spacing=1.0)


@pytest.fixture
def basic_limits():
    return KinodynamicLimits(
        theta_max_yaw=math.pi / 2,
        theta_max_pitch=math.pi / 6,
        phi_max=math.pi / 4,
        a_max=0.5,
        v_max=0.9,
        kappa=0.1,
        gamma=0.1,
    )


def jittered_grid(nx, ny, seed, spacing=1.0, jitter=0.25, z_scale=0.1):
    """Random planar-ish terrain: grid vertices nudged in xy and lifted in z.

    Jitter stays below spacing/2 so the triangulation keeps its orientation.
    """
    rng = np.random.default_rng(seed)
    base = synth_mesh("plane-grid", nx=nx, ny=ny, spacing=spacing)
    vertices = np.array(base.vertices)
    vertices[:, :2] += rng.uniform(-jitter, jitter, (len(vertices), 2)) * spacing
    vertices[:, 2] += rng.uniform(-z_scale, z_scale, len(vertices)) * spacing
    return MeshGraph(vertices, np.array(base.faces))
