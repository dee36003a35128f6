"""
Curve resampling, rotation-minimizing frames, tube meshes and tube coordinates.
"""

import logging
from pathlib import Path
from typing import Any, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from ..errors import (
    DegenerateCurve,
    IOFailure,
    NotClosed,
    OutsideTubeNeighborhood,
    SelfIntersecting,
    TubeSelfOverlap,
)
from ..models.geometry import Curve, Frame, TubeCoords, TubeMesh

logger = logging.getLogger(__name__)

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(6)


def _segment_lengths(spline: CubicSpline, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Arc length of the spline between parameters a and b (Gauss-Legendre per segment)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[..., None] + half[..., None] * _GAUSS_NODES
    speed = np.linalg.norm(spline(nodes, 1), axis=-1)
    return np.asarray(half * np.sum(speed * _GAUSS_WEIGHTS, axis=-1))


def _check_self_intersection(samples: np.ndarray, spacing: float) -> None:
    n = samples.shape[0]
    for i, j in cKDTree(samples).query_pairs(r=2.0 * spacing):
        gap = min(abs(i - j), n - abs(i - j))
        if gap >= 3:
            raise SelfIntersecting(
                f"Curve passes within {np.linalg.norm(samples[i] - samples[j]):.3g} of itself "
                f"between samples {i} and {j}"
            )


def resample_arclength(points: Any, n: int) -> Curve:
    """
    Resample a closed polygon uniformly in arc length on its periodic cubic spline.

    Args:
        points: (M, 3) polygon vertices, M >= 4; a repeated closing vertex is dropped
        n: Number of output samples, at least 16

    Returns:
        Curve with n samples

    Raises:
        DegenerateCurve: Too few points or samples, or repeated consecutive points
        SelfIntersecting: The resampled curve comes back onto itself
    """
    if n < 16:
        raise DegenerateCurve(f"Need at least 16 samples, got {n}")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DegenerateCurve(f"Curve points must have shape (M, 3), got {pts.shape}")
    if len(pts) > 1 and np.allclose(pts[0], pts[-1], rtol=0.0, atol=1e-14):
        pts = pts[:-1]
    if len(pts) < 4:
        raise DegenerateCurve(f"Need at least 4 distinct points, got {len(pts)}")

    closed_pts = np.vstack([pts, pts[:1]])
    chords = np.linalg.norm(np.diff(closed_pts, axis=0), axis=1)
    perimeter = float(np.sum(chords))
    if np.min(chords) <= 1e-12 * perimeter:
        raise DegenerateCurve(f"Repeated consecutive point at index {int(np.argmin(chords))}")

    knots = np.concatenate([[0.0], np.cumsum(chords)])
    spline = CubicSpline(knots, closed_pts, axis=0, bc_type="periodic")

    # cumulative arc length on a fine grid that contains every knot
    sub = max(8, int(np.ceil(4 * n / len(pts))))
    fine = np.concatenate(
        [np.linspace(knots[i], knots[i + 1], sub, endpoint=False) for i in range(len(pts))]
        + [knots[-1:]]
    )
    cumulative = np.concatenate([[0.0], np.cumsum(_segment_lengths(spline, fine[:-1], fine[1:]))])
    length = float(cumulative[-1])

    arc_params = length * np.arange(n) / n
    u = np.interp(arc_params, cumulative, fine)
    for _ in range(3):
        index = np.clip(np.searchsorted(fine, u, side="right") - 1, 0, len(fine) - 2)
        s_of_u = cumulative[index] + _segment_lengths(spline, fine[index], u)
        speed = np.linalg.norm(spline(u, 1), axis=1)
        u = u - (s_of_u - arc_params) / speed

    samples = spline(u)
    _check_self_intersection(samples, length / n)
    logger.debug(f"Resampled {len(pts)} points to {n} samples, length {length:.12g}")
    return Curve(samples=samples, arc_params=arc_params, length=length)


def circle_curve(
    radius: float,
    n: int,
    center: Any = (0.0, 0.0, 0.0),
    orientation: str = "counterclockwise",
) -> Curve:
    """Exact arc-length samples of a circle in a plane parallel to the xy-plane."""
    if radius <= 0.0:
        raise DegenerateCurve("Circle radius must be positive")
    sign = 1.0 if orientation == "counterclockwise" else -1.0
    phi = 2.0 * np.pi * np.arange(n) / n
    samples = np.stack(
        [radius * np.cos(phi), sign * radius * np.sin(phi), np.zeros(n)], axis=1
    ) + np.asarray(center, dtype=np.float64)
    length = 2.0 * np.pi * radius
    return Curve(samples=samples, arc_params=length * np.arange(n) / n, length=length)


def builtin_points(kind: str, n: int = 512, **params: float) -> np.ndarray:
    """
    Dense vertices of a named closed curve.

    Args:
        kind: One of ``ellipse``, ``trefoil``, ``torus_knot``
        n: Number of vertices
        params: Shape parameters (``a``, ``b`` for ellipses; ``p``, ``q``, ``R``, ``r``
            for torus knots; ``scale`` for the trefoil)

    Returns:
        (n, 3) array of points
    """
    s = 2.0 * np.pi * np.arange(n) / n
    if kind == "ellipse":
        a, b = params.get("a", 1.0), params.get("b", 0.7)
        return np.stack([a * np.cos(s), b * np.sin(s), np.zeros(n)], axis=1)
    if kind == "trefoil":
        scale = params.get("scale", 1.0)
        return scale * np.stack(
            [np.sin(s) + 2 * np.sin(2 * s), np.cos(s) - 2 * np.cos(2 * s), -np.sin(3 * s)], axis=1
        )
    if kind == "torus_knot":
        p, q = int(params.get("p", 2)), int(params.get("q", 3))
        big, small = params.get("R", 2.0), params.get("r", 0.6)
        radius = big + small * np.cos(q * s)
        return np.stack(
            [radius * np.cos(p * s), radius * np.sin(p * s), small * np.sin(q * s)], axis=1
        )
    raise ValueError(f"Unknown built-in curve '{kind}'")


def _reflect(v: np.ndarray, axis: np.ndarray, c: float) -> np.ndarray:
    if c < 1e-300:
        return v
    return np.asarray(v - (2.0 / c) * np.dot(axis, v) * axis)


def _initial_normal(curve: Curve) -> np.ndarray:
    area = 0.5 * np.sum(np.cross(curve.samples, curve.tangents), axis=0)
    if np.linalg.norm(area) > 1e-8 * curve.length**2:
        return np.asarray(area / np.linalg.norm(area))
    centered = curve.samples - curve.centroid()
    return np.asarray(np.linalg.svd(centered, full_matrices=False)[2][-1])


def build_frame(curve: Curve) -> Frame:
    """
    Rotation-minimizing frame by the double-reflection method, closed by a uniform twist.

    s2 starts along the curve's mean plane normal. The angle between the transported
    vector and the starting one after one loop is the holonomy; it is removed by rotating
    the frame at arc length s by -holonomy * s / L.

    Raises:
        NotClosed: The curve is not closed
    """
    if not curve.closed:
        raise NotClosed("Frames are only built on closed curves")
    x = curve.samples
    t = curve.tangents
    n = curve.n_samples

    normal = _initial_normal(curve)
    r = normal - np.dot(normal, t[0]) * t[0]
    if np.linalg.norm(r) < 1e-8:
        axis = np.eye(3)[int(np.argmin(np.abs(t[0])))]
        r = axis - np.dot(axis, t[0]) * t[0]
    r = r / np.linalg.norm(r)

    transported = np.empty((n + 1, 3))
    transported[0] = r
    for i in range(n):
        nxt = (i + 1) % n
        v1 = x[nxt] - x[i]
        c1 = float(np.dot(v1, v1))
        r_l = _reflect(transported[i], v1, c1)
        t_l = _reflect(t[i], v1, c1)
        v2 = t[nxt] - t_l
        r_next = _reflect(r_l, v2, float(np.dot(v2, v2)))
        r_next = r_next - np.dot(r_next, t[nxt]) * t[nxt]
        transported[i + 1] = r_next / np.linalg.norm(r_next)

    r0, r_end = transported[0], transported[n]
    holonomy = float(np.arctan2(np.dot(np.cross(r0, r_end), t[0]), np.dot(r0, r_end)))
    twist_rate = -holonomy / curve.length

    angle = twist_rate * curve.arc_params
    base = transported[:n]
    s2 = np.cos(angle)[:, None] * base + np.sin(angle)[:, None] * np.cross(t, base)
    s2 = s2 - np.sum(s2 * t, axis=1, keepdims=True) * t
    s2 = s2 / np.linalg.norm(s2, axis=1, keepdims=True)
    s1 = np.cross(s2, t)
    logger.debug(f"Frame holonomy {holonomy:.3e} rad, twist rate {twist_rate:.3e}")
    return Frame(
        s1=s1,
        s2=s2,
        tau=t,
        arc_params=curve.arc_params,
        length=curve.length,
        holonomy=holonomy,
        twist_rate=twist_rate,
    )


def _check_tube_overlap(curve: Curve, eps: float) -> None:
    if eps >= 0.5 * curve.min_curvature_radius:
        raise TubeSelfOverlap(
            f"Tube radius {eps} is not below half the minimum curvature radius "
            f"{curve.min_curvature_radius:.4g}"
        )
    n = curve.n_samples
    for i, j in curve.kdtree.query_pairs(r=2.0 * eps):
        gap = min(abs(i - j), n - abs(i - j)) * curve.spacing
        if gap > 4.0 * eps:
            raise TubeSelfOverlap(
                f"Tube of radius {eps} touches itself near samples {i} and {j}"
            )


def tube_mesh(curve: Curve, frame: Frame, eps: float, n_t: int, n_theta: int) -> TubeMesh:
    """
    Quadrilateral panel mesh of the tube surface at distance eps from the curve.

    Args:
        curve: Centreline
        frame: Frame on the centreline
        eps: Tube radius
        n_t: Panels along the curve (>= 32)
        n_theta: Panels around each cross-section (>= 8)

    Returns:
        TubeMesh with centroids on the exact surface and normals pointing into the solid

    Raises:
        TubeSelfOverlap: eps is too large for the curve
    """
    if eps <= 0.0:
        raise ValueError("Tube radius must be positive")
    if n_t < 32 or n_theta < 8:
        raise ValueError(f"Mesh resolution too low: N_t={n_t} (>= 32), N_theta={n_theta} (>= 8)")
    _check_tube_overlap(curve, eps)

    dt = curve.length / n_t
    dtheta = 2.0 * np.pi / n_theta
    t_c = (np.arange(n_t) + 0.5) * dt
    theta_c = (np.arange(n_theta) + 0.5) * dtheta

    position, tangent, curvature = curve.evaluate(t_c)
    s1, s2, _ = frame.evaluate(curve, t_c)
    radial = (
        np.cos(theta_c)[None, :, None] * s1[:, None, :]
        + np.sin(theta_c)[None, :, None] * s2[:, None, :]
    )
    stretch = 1.0 - eps * np.sum(curvature[:, None, :] * radial, axis=-1)

    t_nodes = np.arange(n_t) * dt
    theta_nodes = np.arange(n_theta) * dtheta
    node_pos, _, _ = curve.evaluate(t_nodes)
    node_s1, node_s2, _ = frame.evaluate(curve, t_nodes)
    vertices = node_pos[:, None, :] + eps * (
        np.cos(theta_nodes)[None, :, None] * node_s1[:, None, :]
        + np.sin(theta_nodes)[None, :, None] * node_s2[:, None, :]
    )
    j, k = np.meshgrid(np.arange(n_t), np.arange(n_theta), indexing="ij")
    jn, kn = (j + 1) % n_t, (k + 1) % n_theta
    faces = np.stack(
        [j * n_theta + k, jn * n_theta + k, jn * n_theta + kn, j * n_theta + kn], axis=-1
    )

    n_panels = n_t * n_theta
    mesh = TubeMesh(
        curve=curve,
        frame=frame,
        eps=eps,
        n_t=n_t,
        n_theta=n_theta,
        centroids=(position[:, None, :] + eps * radial).reshape(n_panels, 3),
        normals=(-radial).reshape(n_panels, 3),
        tangents=np.broadcast_to(tangent[:, None, :], (n_t, n_theta, 3)).reshape(n_panels, 3),
        areas=(eps * dtheta * dt * stretch).reshape(n_panels),
        t_values=np.repeat(t_c, n_theta),
        theta_values=np.tile(theta_c, n_t),
        t_index=j.reshape(n_panels),
        theta_index=k.reshape(n_panels),
        panel_lengths=(dt * stretch).reshape(n_panels),
        panel_widths=np.full(n_panels, eps * dtheta),
        vertices=vertices.reshape(n_panels, 3),
        faces=faces.reshape(n_panels, 4),
    )
    logger.info(
        f"Built tube mesh eps={eps}, {n_t}x{n_theta} panels, area {np.sum(mesh.areas):.6g}"
    )
    return mesh


def area_volume_vectors(curve: Curve) -> Tuple[np.ndarray, np.ndarray]:
    """
    Area vector A0 = ½∮γ∧γ' ds and volume vector V0 = -½∮|γ|²γ' ds.

    Trapezoidal rule on the uniform arc grid, orientation as stored.
    """
    return moment_vectors(curve.samples, curve.tangents, curve.spacing)


def moment_vectors(
    points: np.ndarray, tangents: np.ndarray, spacing: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Area and volume vectors of uniformly spaced samples with unit tangents."""
    a0 = 0.5 * spacing * np.sum(np.cross(points, tangents), axis=0)
    v0 = -0.5 * spacing * np.sum(np.sum(points**2, axis=1)[:, None] * tangents, axis=0)
    return a0, v0


def tube_point(curve: Curve, frame: Frame, t: float, a: float, b: float) -> np.ndarray:
    """Inverse of tube_coordinates: γ(t) + a s1(t) + b s2(t)."""
    position, _, _ = curve.evaluate(t)
    s1, s2, _ = frame.evaluate(curve, t)
    return np.asarray(position + a * s1 + b * s2)


def tube_coordinates(
    x: Any, curve: Curve, frame: Frame, radius: Optional[float] = None
) -> TubeCoords:
    """
    Tube coordinates of a point near the curve by Newton projection onto the centreline.

    Args:
        x: Point in space
        curve: Centreline
        frame: Frame on the centreline
        radius: Neighbourhood radius, default half the minimum curvature radius

    Returns:
        TubeCoords (t, a, b, w)

    Raises:
        OutsideTubeNeighborhood: x is not within radius of the curve
    """
    point = np.asarray(x, dtype=np.float64)
    if radius is None:
        radius = 0.5 * curve.min_curvature_radius
    distance, index = curve.kdtree.query(point)
    if distance >= radius + curve.spacing:
        raise OutsideTubeNeighborhood(
            f"Point is {distance:.4g} from the curve, neighbourhood radius is {radius:.4g}"
        )
    spline = curve.spline
    t = float(curve.arc_params[index])
    for _ in range(50):
        s = t % curve.length
        d0, d1, d2 = spline(s), spline(s, 1), spline(s, 2)
        offset = point - d0
        f = float(np.dot(offset, d1))
        fprime = float(np.dot(offset, d2) - np.dot(d1, d1))
        step = f / fprime
        t -= step
        if abs(step) < 1e-15 * curve.length:
            break
    t = t % curve.length
    d0, d1, d2 = spline(t), spline(t, 1), spline(t, 2)
    offset = point - d0
    if np.linalg.norm(offset) >= radius:
        raise OutsideTubeNeighborhood(
            f"Point is {np.linalg.norm(offset):.4g} from the curve, "
            f"neighbourhood radius is {radius:.4g}"
        )
    s1, s2, _ = frame.evaluate(curve, t)
    speed = float(np.linalg.norm(d1))
    w = speed / (speed**2 - float(np.dot(offset, d2)))
    return TubeCoords(t=t, a=float(np.dot(offset, s1)), b=float(np.dot(offset, s2)), w=w)


def jacobian_bound_constant(
    curve: Curve, frame: Frame, distances: Any, n_points: int = 64, seed: int = 0
) -> float:
    """
    Fitted constant C in |w - 1| <= C dist over random points at the given distances.

    Returns:
        max over points of |w - 1| / dist
    """
    rng = np.random.default_rng(seed)
    ratios = []
    for dist in np.atleast_1d(distances):
        for t, theta in zip(
            rng.uniform(0.0, curve.length, n_points), rng.uniform(0.0, 2 * np.pi, n_points)
        ):
            x = tube_point(curve, frame, t, dist * np.cos(theta), dist * np.sin(theta))
            coords = tube_coordinates(x, curve, frame)
            ratios.append(abs(coords.w - 1.0) / coords.distance)
    return float(np.max(ratios))


def export_obj(mesh: TubeMesh, path: Union[str, Path]) -> Path:
    """
    Write the mesh as a Wavefront OBJ file (vertices and quad faces).

    Raises:
        IOFailure: File cannot be written
    """
    path = Path(path)
    lines = [f"# tube mesh eps={mesh.eps} n_t={mesh.n_t} n_theta={mesh.n_theta}"]
    lines += [f"v {v[0]:.12g} {v[1]:.12g} {v[2]:.12g}" for v in mesh.vertices]
    lines += [f"f {f[0] + 1} {f[1] + 1} {f[2] + 1} {f[3] + 1}" for f in mesh.faces]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise IOFailure(f"Cannot write mesh to {path}: {e}")
    return path
