from __future__ import annotations
import numpy as np

from rigidnet.exceptions import CoincidentPoints

COINCIDENCE_TOLERANCE = 1e-9
TWO_PI = 2 * np.pi


def rotation_matrix(theta: float) -> np.ndarray:
    """Counter-clockwise rotation of the plane by theta radians."""
    c = np.cos(theta)
    s = np.sin(theta)
    return np.array([[c, -s], [s, c]])


def perp(v: np.ndarray) -> np.ndarray:
    """Quarter turn of v: (x, y) -> (-y, x)."""
    v = np.asarray(v, dtype=float)
    return np.array([-v[1], v[0]])


def wrap_angle(theta):
    """Reduce angles into [0, 2pi) by floored modulo."""
    wrapped = np.mod(theta, TWO_PI)
    # np.mod can round a tiny negative angle up to exactly 2pi
    wrapped = np.where(wrapped >= TWO_PI, 0.0, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def wrap_to_pi(theta):
    """Reduce angles into (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), TWO_PI)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def angular_distance(a, b):
    """Absolute wrapped difference of two angles, in [0, pi]."""
    return np.abs(wrap_to_pi(np.asarray(a) - np.asarray(b)))


def polar_angle(v: np.ndarray) -> float:
    """Direction of v measured counter-clockwise from the x-axis, in [0, 2pi)."""
    v = np.asarray(v, dtype=float)
    return wrap_angle(np.arctan2(v[..., 1], v[..., 0]))


def bearing(p_j: np.ndarray, p_i: np.ndarray) -> np.ndarray:
    """Unit vector pointing from p_j towards p_i.

    Parameters
    ----------
    p_j: numpy.ndarray
        Tail point.
    p_i: numpy.ndarray
        Head point.

    Returns
    -------
    b_ji: numpy.ndarray
        (p_i - p_j) / |p_i - p_j|.
    """
    e = np.asarray(p_i, dtype=float) - np.asarray(p_j, dtype=float)
    length = np.linalg.norm(e)
    if length < COINCIDENCE_TOLERANCE:
        raise CoincidentPoints(
            "Points %s and %s coincide within %.0e" % (p_j, p_i, COINCIDENCE_TOLERANCE)
        )
    return e / length


def bearings(tails: np.ndarray, heads: np.ndarray):
    """Row-wise bearings from tails to heads.

    Returns
    -------
    unit: numpy.ndarray
        (m, 2) unit vectors.
    lengths: numpy.ndarray
        (m,) distances.
    """
    e = np.asarray(heads, dtype=float) - np.asarray(tails, dtype=float)
    lengths = np.linalg.norm(e, axis=-1)
    if np.any(lengths < COINCIDENCE_TOLERANCE):
        row = int(np.argmin(lengths))
        raise CoincidentPoints(
            "Points %s and %s coincide within %.0e"
            % (tails[row], heads[row], COINCIDENCE_TOLERANCE)
        )
    return e / lengths[..., None], lengths


def _signed_angle_from_bearings(b_ji: np.ndarray, b_jk: np.ndarray):
    cosine = np.clip(np.sum(b_jk * b_ji, axis=-1), -1.0, 1.0)
    # b_jk . perp(b_ji)
    side = b_jk[..., 1] * b_ji[..., 0] - b_jk[..., 0] * b_ji[..., 1]
    alpha = np.arccos(cosine)
    alpha = np.where(side >= 0, alpha, TWO_PI - alpha)
    return wrap_angle(alpha)


def signed_angle(p_i: np.ndarray, p_j: np.ndarray, p_k: np.ndarray) -> float:
    """Counter-clockwise angle at p_j from the bearing towards p_i to the bearing towards p_k.

    Parameters
    ----------
    p_i, p_j, p_k: numpy.ndarray
        Points; p_j is the vertex of the angle.

    Returns
    -------
    alpha: float
        Angle in [0, 2pi).
    """
    b_ji = bearing(p_j, p_i)
    b_jk = bearing(p_j, p_k)
    return float(_signed_angle_from_bearings(b_ji, b_jk))


def signed_angles(points: np.ndarray, triples: np.ndarray) -> np.ndarray:
    """Signed angles for many triples at once.

    Parameters
    ----------
    points: numpy.ndarray
        (n, 2) configuration.
    triples: numpy.ndarray
        (m, 3) integer array of zero based (i, j, k) rows.

    Returns
    -------
    alphas: numpy.ndarray
        (m,) angles in [0, 2pi).
    """
    points = np.asarray(points, dtype=float)
    triples = np.asarray(triples, dtype=int).reshape(-1, 3)
    if len(triples) == 0:
        return np.zeros(0)
    b_ji, _ = bearings(points[triples[:, 1]], points[triples[:, 0]])
    b_jk, _ = bearings(points[triples[:, 1]], points[triples[:, 2]])
    return np.atleast_1d(_signed_angle_from_bearings(b_ji, b_jk))


def projection_matrix(b: np.ndarray) -> np.ndarray:
    """I - b b^T. Only an orthogonal projection when b has unit length."""
    b = np.asarray(b, dtype=float)
    return np.eye(2) - np.outer(b, b)


def similarity_transform(
    points: np.ndarray, scale: float, theta: float, shift: np.ndarray
) -> np.ndarray:
    """Map every point p_m to scale * R(theta) p_m + shift."""
    points = np.asarray(points, dtype=float)
    return scale * points @ rotation_matrix(theta).T + np.asarray(shift, dtype=float)


def reflect(points: np.ndarray) -> np.ndarray:
    """Mirror image of a configuration across the x-axis."""
    mirrored = np.array(points, dtype=float)
    mirrored[:, 1] = -mirrored[:, 1]
    return mirrored
