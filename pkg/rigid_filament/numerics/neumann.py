"""
Exterior Neumann problem on the tube surface.

Piecewise-constant single-layer collocation: the potential of a density q is
φ(x) = Σ_j q_j ∫_panel_j G(x, y) dσ_y with G = 1/(4π|x - y|), and its normal derivative
from the fluid side is (½ I + D) q with D_ij = ∫_panel_j n_i · ∇_x G(x_i, y) dσ_y.
Normals point into the solid.
"""

import logging
import warnings
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.spatial import cKDTree

from ..errors import CompatibilityViolation, SolverFailure, SupportTooClose
from ..models.config import QuadratureSpec
from ..models.coefficients import KirchhoffSet
from ..models.fields import FieldSample, SurfaceDensity, SurfaceField, VortexParticleCloud
from ..models.geometry import Curve, TubeMesh
from .kernels import FOUR_PI, CurveField, SumField, biot_savart_particles, chunk_slices

logger = logging.getLogger(__name__)

_PairGroups = List[Tuple[int, np.ndarray, np.ndarray]]


def rigid_modes(points: np.ndarray) -> np.ndarray:
    """Elementary rigid velocities ζ_i(x): e_1, e_2, e_3, then e_j ∧ x, shape (6, M, 3)."""
    points = np.atleast_2d(points)
    modes = np.zeros((6,) + points.shape)
    for k in range(3):
        modes[k, :, k] = 1.0
        modes[3 + k] = np.cross(np.eye(3)[k], points)
    return modes


def self_panel_single_layer(length: Any, width: Any, n_gauss: int = 16) -> np.ndarray:
    """
    ∫ G dσ over a flat rectangle, evaluated at its centre by polar integration.

    The rectangle splits into four triangles with apex at the centre. The radial integral
    of 1/r is exact, leaving a smooth angular integrand for Gauss-Legendre.
    """
    nodes, weights = np.polynomial.legendre.leggauss(n_gauss)
    half_a = 0.5 * np.asarray(length, dtype=np.float64)
    half_b = 0.5 * np.asarray(width, dtype=np.float64)

    def edge_integral(distance: np.ndarray, half_edge: np.ndarray) -> np.ndarray:
        limit = np.arctan(half_edge / distance)
        angles = limit[..., None] * nodes
        return np.asarray(
            limit * np.sum(weights * distance[..., None] / np.cos(angles), axis=-1)
        )

    total = 2.0 * edge_integral(half_a, half_b) + 2.0 * edge_integral(half_b, half_a)
    return np.asarray(total / FOUR_PI)


def _panel_terms(
    x: np.ndarray,
    nodes: np.ndarray,
    weights: np.ndarray,
    tiny: float,
    want_gradient: bool = True,
    want_hessian: bool = False,
) -> Dict[str, np.ndarray]:
    """
    Weighted sums of G, ∇_x G and ∇_x ∇_x G over the trailing node axis.

    x is (n, 3), nodes (n, s, 3), weights (n, s). Nodes closer than tiny are ignored.
    """
    r = x[:, None, :] - nodes
    d = np.sqrt(np.einsum("nsa,nsa->ns", r, r))
    inv = np.where(d > tiny, 1.0 / np.maximum(d, tiny), 0.0)
    w_inv3 = weights * inv**3
    terms = {"potential": np.sum(weights * inv, axis=1) / FOUR_PI}
    if want_gradient:
        terms["gradient"] = -np.einsum("ns,nsa->na", w_inv3, r) / FOUR_PI
    if want_hessian:
        trace_part = np.sum(w_inv3, axis=1)[:, None, None] * np.eye(3)
        outer = np.einsum("ns,nsa,nsb->nab", w_inv3 * inv**2, r, r)
        terms["hessian"] = -(trace_part - 3.0 * outer) / FOUR_PI
    return terms


class SingleLayer:
    """
    Quadrature of the single-layer potential of a tube mesh at arbitrary targets.

    Far pairs use the centroid rule. Pairs within far_ratio panel diameters switch to
    4x4, 8x8 or 16x16 sub-rules on the exact surface.
    """

    def __init__(self, mesh: TubeMesh, quadrature: Optional[QuadratureSpec] = None):
        self.mesh = mesh
        self.quadrature = quadrature or QuadratureSpec()
        self.tiny = 1e-12 * mesh.curve.length

    def near_pairs(self, points: np.ndarray, skip: Optional[np.ndarray] = None) -> _PairGroups:
        """
        Target-panel pairs that need a refined rule, grouped by sub-rule order.

        Args:
            points: (M, 3) targets
            skip: Optional (M,) panel index per target whose pair is left out

        Returns:
            List of (q, target indices, panel indices)
        """
        settings = self.quadrature
        diameters = self.mesh.diameters
        radius = settings.far_ratio * float(np.max(diameters))
        records = self.mesh.kdtree.sparse_distance_matrix(
            cKDTree(points), radius, output_type="ndarray"
        )
        panels = np.asarray(records["i"], dtype=np.int64)
        targets = np.asarray(records["j"], dtype=np.int64)
        ratio = np.asarray(records["v"]) / diameters[panels]
        keep = ratio < settings.far_ratio
        if skip is not None:
            keep &= skip[targets] != panels
        panels, targets, ratio = panels[keep], targets[keep], ratio[keep]
        groups: _PairGroups = []
        bands = [
            (4, ratio >= settings.medium_ratio),
            (8, (ratio < settings.medium_ratio) & (ratio >= settings.near_ratio)),
            (16, ratio < settings.near_ratio),
        ]
        for q, mask in bands:
            if np.any(mask):
                groups.append((q, targets[mask], panels[mask]))
        return groups

    def _refined(
        self,
        points: np.ndarray,
        q: int,
        targets: np.ndarray,
        panels: np.ndarray,
        want_gradient: bool,
        want_hessian: bool,
    ) -> List[Tuple[slice, Dict[str, np.ndarray], Dict[str, np.ndarray]]]:
        """Exact-rule and centroid-rule terms for a group of pairs, chunked."""
        rule = self.mesh.quadrature(q)
        out = []
        step = max(1, 2_000_000 // (q * q))
        for start in range(0, len(targets), step):
            chunk = slice(start, min(len(targets), start + step))
            t, p = targets[chunk], panels[chunk]
            x = points[t]
            exact = _panel_terms(
                x, rule.points[p], rule.weights[p], self.tiny, want_gradient, want_hessian
            )
            centroid = _panel_terms(
                x,
                self.mesh.centroids[p][:, None, :],
                self.mesh.areas[p][:, None],
                self.tiny,
                want_gradient,
                want_hessian,
            )
            out.append((chunk, exact, centroid))
        return out

    def influence(
        self,
        points: np.ndarray,
        normals: Optional[np.ndarray] = None,
        skip: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        Dense influence matrices of unit panel densities at the targets.

        Returns:
            S with S[m, j] = ∫_panel_j G(x_m, y) dσ, and when normals are given
            D with D[m, j] = ∫_panel_j n_m · ∇_x G(x_m, y) dσ. Skipped pairs are zero.
        """
        mesh = self.mesh
        m, n_panels = points.shape[0], mesh.n_panels
        single = np.zeros((m, n_panels))
        double = np.zeros((m, n_panels)) if normals is not None else None
        for chunk in chunk_slices(m, n_panels):
            r = points[chunk, None, :] - mesh.centroids[None, :, :]
            d = np.sqrt(np.einsum("mpa,mpa->mp", r, r))
            inv = np.where(d > self.tiny, 1.0 / np.maximum(d, self.tiny), 0.0)
            single[chunk] = mesh.areas * inv / FOUR_PI
            if double is not None and normals is not None:
                n_dot_r = np.einsum("ma,mpa->mp", normals[chunk], r)
                double[chunk] = -mesh.areas * n_dot_r * inv**3 / FOUR_PI
        if skip is not None:
            rows = np.arange(m)
            single[rows, skip] = 0.0
            if double is not None:
                double[rows, skip] = 0.0
        for q, targets, panels in self.near_pairs(points, skip):
            for chunk, exact, _ in self._refined(
                points, q, targets, panels, double is not None, False
            ):
                t, p = targets[chunk], panels[chunk]
                single[t, p] = exact["potential"]
                if double is not None and normals is not None:
                    double[t, p] = np.einsum("na,na->n", normals[t], exact["gradient"])
        return single, double

    def potential(self, densities: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Potentials (K, M) of densities (K, P) at off-surface targets."""
        single, _ = self.influence(np.atleast_2d(points))
        return np.asarray(np.atleast_2d(densities) @ single.T)

    def gradient(
        self, densities: np.ndarray, points: np.ndarray, want_hessian: bool = False
    ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        ∇φ and optionally ∇∇φ of densities (K, P) at off-surface targets (M, 3).

        Returns:
            Gradients (K, M, 3) and Hessians (K, M, 3, 3) or None
        """
        mesh = self.mesh
        points = np.atleast_2d(points)
        densities = np.atleast_2d(densities)
        n_fields, m = densities.shape[0], points.shape[0]
        weighted = densities * mesh.areas
        grads = np.zeros((n_fields, m, 3))
        hessians = np.zeros((n_fields, m, 3, 3)) if want_hessian else None
        for chunk in chunk_slices(m, 3 * mesh.n_panels):
            r = points[chunk, None, :] - mesh.centroids[None, :, :]
            d = np.sqrt(np.einsum("mpa,mpa->mp", r, r))
            inv = np.where(d > self.tiny, 1.0 / np.maximum(d, self.tiny), 0.0)
            inv3 = inv**3
            grads[:, chunk] = -np.einsum("kp,mp,mpa->kma", weighted, inv3, r) / FOUR_PI
            if hessians is not None:
                trace_part = np.einsum("kp,mp->km", weighted, inv3)[..., None, None] * np.eye(3)
                outer = np.einsum("kp,mp,mpa,mpb->kmab", weighted, inv3 * inv**2, r, r)
                hessians[:, chunk] = -(trace_part - 3.0 * outer) / FOUR_PI
        for q, targets, panels in self.near_pairs(points):
            for chunk, exact, centroid in self._refined(
                points, q, targets, panels, True, want_hessian
            ):
                t, p = targets[chunk], panels[chunk]
                correction = exact["gradient"] - centroid["gradient"]
                for k in range(n_fields):
                    np.add.at(grads[k], t, densities[k, p, None] * correction)
                if hessians is not None:
                    correction_h = exact["hessian"] - centroid["hessian"]
                    for k in range(n_fields):
                        np.add.at(hessians[k], t, densities[k, p, None, None] * correction_h)
        return grads, hessians


class SingleLayerField:
    """Gradient of a single-layer potential as a field evaluator."""

    def __init__(self, layer: SingleLayer, density: np.ndarray):
        self.layer = layer
        self.density = np.asarray(density, dtype=np.float64)

    def __call__(self, points: np.ndarray, want_gradient: bool = False) -> FieldSample:
        grads, hessians = self.layer.gradient(self.density[None, :], points, want_gradient)
        return FieldSample(value=grads[0], gradient=None if hessians is None else hessians[0])


class NeumannSolver:
    """
    Assembled and factored collocation system of one tube mesh.

    Args:
        mesh: Tube mesh
        quadrature: Panel quadrature settings
        tol_compat: Relative flux tolerance of accepted data
        residual_tol: Relative residual bound of every solve
        cache: Optional MatrixCache for the assembled matrices
    """

    def __init__(
        self,
        mesh: TubeMesh,
        quadrature: Optional[QuadratureSpec] = None,
        tol_compat: float = 1e-6,
        residual_tol: float = 1e-10,
        cache: Optional[Any] = None,
    ):
        self.mesh = mesh
        self.layer = SingleLayer(mesh, quadrature)
        self.tol_compat = tol_compat
        self.residual_tol = residual_tol

        key = None
        matrices = None
        if cache is not None:
            key = cache.key_for(mesh, self.layer.quadrature)
            matrices = cache.load(key)
        if matrices is None:
            matrices = self._assemble()
            if cache is not None and key is not None:
                cache.save(key, matrices)
        self.single_layer_matrix, self.system_matrix = matrices
        self._factor()

    def _assemble(self) -> Tuple[np.ndarray, np.ndarray]:
        mesh = self.mesh
        diagonal = np.arange(mesh.n_panels)
        single, double = self.layer.influence(mesh.centroids, mesh.normals, skip=diagonal)
        assert double is not None
        single[diagonal, diagonal] = self_panel_single_layer(
            mesh.panel_lengths, mesh.panel_widths, self.layer.quadrature.self_gauss
        )
        # Σ_i area_i D_ij = ½ area_j for a closed surface
        column_flux = mesh.areas @ double
        double[diagonal, diagonal] = (0.5 * mesh.areas - column_flux) / mesh.areas
        system = 0.5 * np.eye(mesh.n_panels) + double
        logger.info(f"Assembled Neumann system with {mesh.n_panels} panels (eps={mesh.eps})")
        return single, system

    def _factor(self) -> None:
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            try:
                self._lu = lu_factor(self.system_matrix, check_finite=True)
            except (LinAlgWarning, ValueError, np.linalg.LinAlgError) as e:
                raise SolverFailure(f"Cannot factor the Neumann system: {e}")
        pivots = np.abs(np.diag(self._lu[0]))
        if np.min(pivots) <= 1e-14 * np.max(pivots):
            raise SolverFailure("Neumann system is numerically singular")

    def check_compatibility(self, g: np.ndarray) -> np.ndarray:
        """
        Check and project Neumann data to exactly zero mean flux.

        Raises:
            CompatibilityViolation: |Σ g area| > tol_compat Σ |g| area
        """
        areas = self.mesh.areas
        flux = float(np.sum(g * areas))
        scale = float(np.sum(np.abs(g) * areas))
        if abs(flux) > self.tol_compat * scale:
            raise CompatibilityViolation(
                f"Neumann data has net flux {flux:.3e} (scale {scale:.3e}, "
                f"tolerance {self.tol_compat:.1e})"
            )
        return np.asarray(g - flux / float(np.sum(areas)))

    def solve(self, g: Any) -> SurfaceDensity:
        """
        Density whose single-layer potential has normal derivative g.

        Raises:
            CompatibilityViolation: Data with net flux
            SolverFailure: Residual above residual_tol
        """
        data = np.asarray(g, dtype=np.float64)
        if data.shape != (self.mesh.n_panels,):
            raise ValueError(f"Neumann data must have one value per panel, got {data.shape}")
        if not np.any(data):
            return SurfaceDensity(values=np.zeros(self.mesh.n_panels))
        data = self.check_compatibility(data)
        q = lu_solve(self._lu, data)
        residual = float(np.linalg.norm(self.system_matrix @ q - data))
        relative = residual / max(float(np.linalg.norm(data)), 1e-300)
        if not np.all(np.isfinite(q)) or relative > self.residual_tol:
            raise SolverFailure(f"Neumann solve residual {relative:.3e} above {self.residual_tol}")
        logger.debug(f"Neumann solve residual {relative:.3e}")
        return SurfaceDensity(values=q)

    def represented_flux(self, density: np.ndarray) -> np.ndarray:
        """Normal derivative (½ I + D) q of the represented potential."""
        return np.asarray(self.system_matrix @ density)

    def surface_potential(self, density: np.ndarray) -> np.ndarray:
        return np.asarray(self.single_layer_matrix @ density)

    def surface_gradient(self, densities: np.ndarray) -> np.ndarray:
        """
        Trace of ∇φ on the surface from the fluid side, shape (K, P, 3).

        The tangential part is the kernel gradient at three offsets h, 2h, 3h along the
        fluid-side normal, extrapolated quadratically to the surface. The normal part is
        the represented flux.
        """
        mesh = self.mesh
        densities = np.atleast_2d(densities)
        h = self.layer.quadrature.offset_fraction * mesh.panel_widths
        outward = -mesh.normals
        offsets = np.concatenate(
            [mesh.centroids + k * h[:, None] * outward for k in (1, 2, 3)], axis=0
        )
        grads, _ = self.layer.gradient(densities, offsets)
        n_panels = mesh.n_panels
        t1, t2, t3 = (grads[:, k * n_panels : (k + 1) * n_panels] for k in range(3))
        extrapolated = 3.0 * t1 - 3.0 * t2 + t3
        normal = mesh.normals[None, :, :]
        tangential = extrapolated - np.sum(extrapolated * normal, axis=-1, keepdims=True) * normal
        flux = densities @ self.system_matrix.T
        return np.asarray(tangential + flux[..., None] * normal)

    def field(self, density: np.ndarray) -> SingleLayerField:
        return SingleLayerField(self.layer, density)


def solve_exterior_neumann(
    mesh: TubeMesh,
    g: Any,
    tol_compat: float = 1e-6,
    solver: Optional[NeumannSolver] = None,
) -> SurfaceDensity:
    """
    Solve the exterior Neumann problem with data g on the tube surface.

    Args:
        mesh: Tube mesh
        g: Normal derivative per panel
        tol_compat: Relative flux tolerance
        solver: Reuse an assembled solver of the same mesh

    Returns:
        Single-layer density

    Raises:
        CompatibilityViolation: g has net flux
        SolverFailure: The system is singular or the residual is too large
    """
    if solver is None:
        solver = NeumannSolver(mesh, tol_compat=tol_compat)
    return solver.solve(g)


def kirchhoff_system(mesh: TubeMesh, solver: Optional[NeumannSolver] = None) -> KirchhoffSet:
    """
    Kirchhoff potentials of the six rigid modes and the added mass matrix.

    Ma_ij = ∫ Φ_i ∂_n Φ_j dσ, symmetrized.
    """
    if solver is None:
        solver = NeumannSolver(mesh)
    modes = rigid_modes(mesh.centroids)
    data = np.einsum("ipa,pa->ip", modes, mesh.normals)
    # modes tangent to the surface leave only roundoff
    data[np.abs(data) < 1e-12 * np.max(np.abs(modes))] = 0.0
    densities = np.stack([solver.solve(data[i]).values for i in range(6)])
    potentials = densities @ solver.single_layer_matrix.T
    gradients = solver.surface_gradient(densities)
    ma = potentials @ (mesh.areas * data).T
    norm = float(np.max(np.abs(ma)))
    asymmetry = float(np.max(np.abs(ma - ma.T))) / norm if norm > 0.0 else 0.0
    ma = 0.5 * (ma + ma.T)
    eigenvalues = np.linalg.eigvalsh(ma)
    if np.min(eigenvalues) < -1e-10 * norm:
        logger.warning(f"Added mass has a negative eigenvalue {np.min(eigenvalues):.3e}")
    logger.info(f"Kirchhoff system solved (eps={mesh.eps}), Ma asymmetry {asymmetry:.2e}")
    return KirchhoffSet(
        densities=densities,
        potentials=potentials,
        surface_gradients=gradients,
        Ma=ma,
        asymmetry=asymmetry,
    )


class KirchhoffField:
    """Off-surface gradients of the six Kirchhoff potentials."""

    def __init__(self, solver: NeumannSolver, kirchhoff: KirchhoffSet):
        self.solver = solver
        self.kirchhoff = kirchhoff

    def gradients(
        self, points: np.ndarray, want_hessian: bool = False
    ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """∇Φ_i (6, M, 3) and optionally their Hessians (6, M, 3, 3)."""
        return self.solver.layer.gradient(self.kirchhoff.densities, points, want_hessian)

    def combination(self, p: np.ndarray) -> SingleLayerField:
        """Field Σ p_i ∇Φ_i."""
        return self.solver.field(np.asarray(p) @ self.kirchhoff.densities)


class HarmonicField(NamedTuple):
    """Circulation-one harmonic field: surface trace, correction density, evaluator."""

    trace: SurfaceField
    density: SurfaceDensity
    evaluator: SumField


def harmonic_field(
    mesh: TubeMesh,
    curve: Optional[Curve] = None,
    solver: Optional[NeumannSolver] = None,
    oversampling: int = 8,
) -> HarmonicField:
    """
    H = K[κ] + ∇φ with ∂_n φ = -K[κ]·n, tangent to the surface with unit circulation.

    Args:
        mesh: Tube mesh
        curve: Centreline, default the mesh's own curve
        solver: Reuse an assembled solver
        oversampling: Filament quadrature nodes per curve sample
    """
    curve = mesh.curve if curve is None else curve
    if solver is None:
        solver = NeumannSolver(mesh)
    filament = CurveField(curve, 1.0, oversampling)
    free = filament(mesh.centroids).value
    density = solver.solve(-np.sum(free * mesh.normals, axis=1))
    correction = solver.surface_gradient(density.values)[0]
    trace = SurfaceField(vectors=free + correction)
    residual = trace.normal_component(mesh)
    logger.info(
        f"Harmonic field (eps={mesh.eps}): normal residual RMS "
        f"{np.sqrt(np.mean(residual**2)):.3e}, field RMS {trace.rms():.3e}"
    )
    return HarmonicField(
        trace=trace,
        density=density,
        evaluator=SumField(filament, solver.field(density.values)),
    )


class ReflectionField(NamedTuple):
    """Reflection u_ref of a vorticity field: surface trace, density, evaluator."""

    trace: SurfaceField
    density: SurfaceDensity
    evaluator: SingleLayerField


def reflection_field(
    mesh: TubeMesh,
    cloud: VortexParticleCloud,
    solver: Optional[NeumannSolver] = None,
    min_separation: Optional[float] = None,
) -> ReflectionField:
    """
    Potential correction u_ref = ∇φ with ∂_n φ = -K[ω]·n.

    Raises:
        SupportTooClose: The cloud is closer than min_separation (default 2 eps) to the surface
    """
    if solver is None:
        solver = NeumannSolver(mesh)
    floor = 2.0 * mesh.eps if min_separation is None else min_separation
    if cloud.is_empty:
        zeros = np.zeros(mesh.n_panels)
        return ReflectionField(
            trace=SurfaceField.zeros(mesh),
            density=SurfaceDensity(values=zeros),
            evaluator=solver.field(zeros),
        )
    separation = cloud.min_distance_to(mesh.centroids)
    if separation < floor:
        raise SupportTooClose(
            f"Vorticity is {separation:.4g} from the surface, floor is {floor:.4g}", separation
        )
    free = biot_savart_particles(cloud, mesh.centroids).value
    density = solver.solve(-np.sum(free * mesh.normals, axis=1))
    trace = SurfaceField(vectors=solver.surface_gradient(density.values)[0])
    return ReflectionField(trace=trace, density=density, evaluator=solver.field(density.values))


def cross_section_circulation(mesh: TubeMesh, field: SurfaceField) -> np.ndarray:
    """Circulation ∮ u · e_θ ε dθ of a surface field around each cross-section, shape (n_t,)."""
    tangential = np.sum(field.vectors * mesh.e_theta, axis=1).reshape(mesh.n_t, mesh.n_theta)
    return np.asarray(np.sum(tangential, axis=1) * mesh.eps * mesh.dtheta)
