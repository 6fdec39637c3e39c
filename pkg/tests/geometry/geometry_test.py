import pytest
import numpy as np
import rigidnet.geometry.geometry as geo
import rigidnet.numerics.numerics as num
from rigidnet.exceptions import CoincidentPoints


@pytest.fixture
def triangle():
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@pytest.fixture
def equilateral():
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])


def atan2_angle(p_i, p_j, p_k):
    # direct polar difference of the two bearings
    first = np.arctan2(p_i[1] - p_j[1], p_i[0] - p_j[0])
    second = np.arctan2(p_k[1] - p_j[1], p_k[0] - p_j[0])
    return np.mod(second - first, 2 * np.pi)


def test_rotation_and_perp():
    assert np.allclose(geo.rotation_matrix(np.pi / 2) @ [1.0, 0.0], [0.0, 1.0])
    assert np.allclose(geo.perp([1.0, 2.0]), [-2.0, 1.0])
    assert np.allclose(geo.perp([1.0, 2.0]), geo.rotation_matrix(np.pi / 2) @ [1.0, 2.0])


def test_wrap_angle():
    assert np.isclose(geo.wrap_angle(-np.pi / 2), 3 * np.pi / 2)
    assert geo.wrap_angle(2 * np.pi) == 0.0
    # rounds up to 2pi under np.mod
    assert geo.wrap_angle(-1e-18) == 0.0
    wrapped = geo.wrap_angle(np.linspace(-20, 20, 101))
    assert np.all((wrapped >= 0) & (wrapped < 2 * np.pi))


def test_wrap_to_pi():
    assert np.isclose(geo.wrap_to_pi(3 * np.pi / 2), -np.pi / 2)
    assert geo.wrap_to_pi(np.pi) == np.pi
    assert geo.wrap_to_pi(-np.pi) == np.pi
    assert np.isclose(geo.angular_distance(0.1, 2 * np.pi - 0.1), 0.2)


def test_bearing():
    assert np.allclose(geo.bearing([0.0, 0.0], [2.0, 0.0]), [1.0, 0.0])
    assert np.allclose(geo.bearing([1.0, 1.0], [0.0, 0.0]), [-1.0, -1.0] / np.sqrt(2))
    with pytest.raises(CoincidentPoints):
        geo.bearing([1.0, 1.0], [1.0, 1.0 + 1e-12])


def test_signed_angle_on_right_triangle(triangle):
    alpha = geo.signed_angle(triangle[0], triangle[1], triangle[2])
    assert np.isclose(alpha, 7 * np.pi / 4)
    assert np.isclose(alpha, atan2_angle(triangle[0], triangle[1], triangle[2]))
    assert np.isclose(geo.signed_angle(triangle[1], triangle[0], triangle[2]), np.pi / 2)


def test_signed_angle_orientation(triangle):
    forward = geo.signed_angle(triangle[0], triangle[1], triangle[2])
    backward = geo.signed_angle(triangle[2], triangle[1], triangle[0])
    assert np.isclose(forward + backward, 2 * np.pi)


def test_signed_angle_collinear():
    assert np.isclose(geo.signed_angle([0.0, 0.0], [1.0, 0.0], [2.0, 0.0]), np.pi)
    assert geo.signed_angle([2.0, 0.0], [0.0, 0.0], [1.0, 0.0]) == 0.0


def test_equilateral_angles(equilateral):
    triples = np.array([[1, 0, 2], [2, 1, 0], [0, 2, 1]])
    alphas = geo.signed_angles(equilateral, triples)
    assert np.allclose(alphas, alphas[0])
    assert np.isclose(alphas[0], np.pi / 3) or np.isclose(alphas[0], 5 * np.pi / 3)


def test_signed_angles_matches_scalar():
    rng = num.seeded_rng(11)
    points = rng.uniform(0, 1, size=(6, 2))
    triples = np.array([[0, 1, 2], [3, 4, 5], [5, 0, 3], [2, 3, 1]])
    expected = [geo.signed_angle(points[i], points[j], points[k]) for i, j, k in triples]
    assert np.allclose(geo.signed_angles(points, triples), expected)
    assert len(geo.signed_angles(points, np.zeros((0, 3), dtype=int))) == 0


def test_signed_angles_invariant_under_similarity():
    rng = num.seeded_rng(5)
    points = rng.uniform(0, 1, size=(5, 2))
    triples = np.array([[1, 0, 2], [0, 2, 4], [3, 4, 1], [2, 3, 0]])
    alphas = geo.signed_angles(points, triples)
    for _ in range(100):
        scale = rng.uniform(0.1, 10.0)
        theta = rng.uniform(0, 2 * np.pi)
        shift = rng.uniform(-10, 10, size=2)
        moved = geo.similarity_transform(points, scale, theta, shift)
        assert np.all(geo.angular_distance(geo.signed_angles(moved, triples), alphas) < 1e-9)


def test_reflection_flips_signed_angles(triangle):
    triples = np.array([[0, 1, 2], [1, 0, 2]])
    alphas = geo.signed_angles(triangle, triples)
    mirrored = geo.signed_angles(geo.reflect(triangle), triples)
    assert np.allclose(mirrored, 2 * np.pi - alphas)


def test_projection_matrix():
    b = np.array([0.6, 0.8])
    p = geo.projection_matrix(b)
    assert np.allclose(p @ b, 0.0)
    assert np.allclose(p @ p, p)
    assert np.allclose(p @ geo.perp(b), geo.perp(b))


def test_polar_angle():
    assert np.isclose(geo.polar_angle([0.0, -1.0]), 3 * np.pi / 2)
    assert geo.polar_angle([1.0, 0.0]) == 0.0
