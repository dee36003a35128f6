"""
Time integration of the body-frame equations, particle transport and pose reconstruction.
"""

import logging
from typing import Any, Callable, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import LinAlgError, polar, solve

from ..errors import InvalidTimestep, SolverFailure, SupportTooClose
from ..models.base import cross_matrix, split_p
from ..models.coefficients import InertiaSpec
from ..models.fields import SurfaceDensity, SurfaceField, VortexParticleCloud
from ..models.geometry import Curve
from ..models.state import Pose, PoseTrajectory, RigidState, SimState
from .coefficients import calB_matrix, calD, calD_star, gamma_a, gamma_g
from .geometry import moment_vectors
from .kernels import CurveField, ParticleField, ScaledField, SumField, biot_savart_particles
from .neumann import KirchhoffField, reflection_field

logger = logging.getLogger(__name__)


class StageFields(NamedTuple):
    """Velocity evaluators of one RK stage: full fluid velocity and the reflection trace."""

    fluid: SumField
    boundary_trace: Optional[SurfaceField]


def default_separation_floor(regime: str, curve: Curve, eps: Optional[float]) -> float:
    """3 eps for a tube, 0.05 L for the limit filament."""
    if regime == "eps" and eps is not None:
        return 3.0 * eps
    return 0.05 * curve.length


def support_separation(state: SimState, cloud: Optional[VortexParticleCloud] = None) -> float:
    """Distance between the vorticity support and the body."""
    cloud = state.cloud if cloud is None else cloud
    if cloud.is_empty:
        return float("inf")
    mesh = state.environment.mesh
    if state.regime == "eps" and mesh is not None:
        return cloud.min_distance_to(mesh.centroids)
    return float(np.min(state.environment.curve.distance_to(cloud.positions)))


def _kirchhoff_field(state: SimState) -> Optional[KirchhoffField]:
    env = state.environment
    if state.regime != "eps" or env.kirchhoff is None or env.solver is None:
        return None
    return KirchhoffField(env.solver, env.kirchhoff)


def _reflection_values(state: SimState) -> Optional[np.ndarray]:
    density = state.reflection_density
    return None if density is None else density.values


def refresh_reflection(state: SimState, cloud: VortexParticleCloud) -> Optional[np.ndarray]:
    """Density of u_ref for the cloud, or None outside the eps regime."""
    env = state.environment
    if state.regime != "eps" or env.mesh is None or env.solver is None or cloud.is_empty:
        return None
    reflected = reflection_field(env.mesh, cloud, env.solver, min_separation=state.separation_floor)
    return reflected.density.values


def stage_fields(
    state: SimState,
    p: np.ndarray,
    cloud: VortexParticleCloud,
    reflection_density: Optional[np.ndarray],
) -> StageFields:
    """
    Fluid velocity in the body frame for given body velocity and cloud.

    Limit: u = μ K[κ] + K[ω]. Eps: u = μ H + Σ p_i ∇Φ_i + K[ω] + u_ref.
    """
    env = state.environment
    particles = None if cloud.is_empty else ParticleField(cloud)
    if state.regime == "limit":
        field = CurveField(env.curve, state.mu, env.curve_oversampling)
        return StageFields(SumField(field, particles), None)

    kirchhoff = _kirchhoff_field(state)
    harmonic = None
    if env.harmonic_density is not None and env.solver is not None:
        harmonic = SumField(
            CurveField(env.curve, 1.0, env.curve_oversampling),
            env.solver.field(env.harmonic_density.values),
        )
    potential = kirchhoff.combination(p) if kirchhoff is not None and np.any(p) else None
    reflection = None
    trace = None
    if reflection_density is not None and env.solver is not None and env.mesh is not None:
        reflection = env.solver.field(reflection_density)
        gradient = env.solver.surface_gradient(reflection_density)[0]
        free = biot_savart_particles(cloud, env.mesh.centroids).value
        trace = SurfaceField(vectors=free + gradient)
    fluid = SumField(
        None if harmonic is None else ScaledField(harmonic, state.mu),
        potential,
        particles,
        reflection,
    )
    return StageFields(fluid, trace)


def rhs_body_frame(
    state: SimState,
    p: Optional[np.ndarray] = None,
    cloud: Optional[VortexParticleCloud] = None,
    fields: Optional[StageFields] = None,
) -> np.ndarray:
    """
    dp/dt of the body-frame Newton equations.

    Solves (Mg [+ Ma]) p' = -Γ_g [- Γ_a] + μ B p [+ 𝓑[K_F[ω]] p] [+ D or D*].

    Raises:
        SolverFailure: The total inertia is singular
    """
    p = state.rigid.p if p is None else np.asarray(p, dtype=np.float64)
    cloud = state.cloud if cloud is None else cloud
    coeffs = state.coeffs
    force = -gamma_g(coeffs.inertia, p, coeffs.eps) + state.mu * (coeffs.B @ p)
    if state.regime == "eps":
        force -= gamma_a(coeffs, p)

    if state.flow == "vortical" and not cloud.is_empty:
        if fields is None:
            fields = stage_fields(state, p, cloud, _reflection_values(state))
        if state.regime == "limit":
            force += calD_star(cloud, fields.fluid)
        else:
            if fields.boundary_trace is not None and state.environment.mesh is not None:
                force += calB_matrix(state.environment.mesh, fields.boundary_trace) @ p
            force += calD(
                state.environment.mesh,
                _kirchhoff_field(state),
                p,
                cloud,
                fields.fluid,
            )

    if state.reduced_axis is not None:
        axis = state.reduced_axis
        dp = np.zeros(6)
        dp[axis] = force[axis] / coeffs.total_mass[axis, axis]
        return dp
    try:
        return np.asarray(solve(coeffs.total_mass, force, assume_a="pos"))
    except (LinAlgError, ValueError) as e:
        raise SolverFailure(f"Singular total inertia: {e}")


def particle_rates(
    state: SimState,
    p: Optional[np.ndarray] = None,
    cloud: Optional[VortexParticleCloud] = None,
    fields: Optional[StageFields] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Time derivatives of particle positions and weights.

    Positions move with u - u_S; weights follow α' = (α·∇)u - Ω ∧ α.

    Returns:
        (dX/dt, dα/dt), each (N, 3)
    """
    p = state.rigid.p if p is None else p
    cloud = state.cloud if cloud is None else cloud
    if cloud.is_empty:
        return np.zeros((0, 3)), np.zeros((0, 3))
    if fields is None:
        fields = stage_fields(state, p, cloud, _reflection_values(state))
    sample = fields.fluid(cloud.positions, want_gradient=True)
    assert sample.gradient is not None
    ell, omega = split_p(p)
    velocity = sample.value - ell - np.cross(omega, cloud.positions)
    stretch = np.einsum("nab,nb->na", sample.gradient, cloud.alphas)
    return velocity, stretch - np.cross(omega, cloud.alphas)


def _derivative(
    state: SimState,
    p: np.ndarray,
    q: np.ndarray,
    positions: np.ndarray,
    alphas: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    cloud = state.cloud
    if not cloud.is_empty:
        cloud = cloud.with_state(positions, alphas)
    fields = None
    if state.flow == "vortical" and not cloud.is_empty:
        fields = stage_fields(state, p, cloud, _reflection_values(state))
    dp = rhs_body_frame(state, p, cloud, fields)
    ell, omega = split_p(p)
    dh = q @ ell
    dq = q @ cross_matrix(omega)
    if state.flow == "vortical" and not cloud.is_empty:
        dx, da = particle_rates(state, p, cloud, fields)
    else:
        dx, da = np.zeros_like(positions), np.zeros_like(alphas)
    return dp, dh, dq, dx, da


def orthonormalize(q: np.ndarray) -> np.ndarray:
    """Nearest rotation by polar decomposition."""
    rotation, _ = polar(q)
    return np.asarray(rotation)


def step_rk4(state: SimState, dt: float) -> SimState:
    """
    One classical RK4 step of (p, h, Q, particle positions, particle weights).

    The reflection density is refreshed at the start of the step every
    reflection_stride steps and frozen over the stages.

    Raises:
        InvalidTimestep: dt is not positive
        SupportTooClose: The vorticity support is closer than the separation floor after the step
    """
    if dt <= 0.0:
        raise InvalidTimestep(f"Time step must be positive, got {dt}")
    if (
        state.flow == "vortical"
        and state.regime == "eps"
        and state.step_index % state.reflection_stride == 0
    ):
        density = refresh_reflection(state, state.cloud)
        state = state.evolve(reflection_density=_density_model(density))

    p0, h0, q0 = state.rigid.p, state.pose.h, state.pose.Q
    x0, a0 = state.cloud.positions, state.cloud.alphas

    def shifted(k: Tuple[np.ndarray, ...], scale: float) -> Tuple[np.ndarray, ...]:
        return tuple(base + scale * dk for base, dk in zip((p0, h0, q0, x0, a0), k))

    k1 = _derivative(state, p0, q0, x0, a0)
    y2 = shifted(k1, 0.5 * dt)
    k2 = _derivative(state, y2[0], y2[2], y2[3], y2[4])
    y3 = shifted(k2, 0.5 * dt)
    k3 = _derivative(state, y3[0], y3[2], y3[3], y3[4])
    y4 = shifted(k3, dt)
    k4 = _derivative(state, y4[0], y4[2], y4[3], y4[4])

    new = [
        base + dt / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        for base, d1, d2, d3, d4 in zip((p0, h0, q0, x0, a0), k1, k2, k3, k4)
    ]
    p1, h1, q1, x1, a1 = new
    if state.reduced_axis is not None:
        mask = np.zeros(6)
        mask[state.reduced_axis] = 1.0
        p1 = p1 * mask
    cloud = state.cloud if state.cloud.is_empty else state.cloud.with_state(x1, a1)
    next_state = state.evolve(
        rigid=RigidState(p=p1, t=state.t + dt),
        pose=Pose(h=h1, Q=orthonormalize(q1)),
        cloud=cloud,
        step_index=state.step_index + 1,
    )
    if state.flow == "vortical" and state.separation_floor > 0.0:
        separation = support_separation(next_state)
        if separation < state.separation_floor:
            raise SupportTooClose(
                f"Vorticity reached {separation:.4g} from the body at t={next_state.t:.4g} "
                f"(floor {state.separation_floor:.4g})",
                separation,
                state=state,
            )
    return next_state


def advect_stretch(state: SimState, dt: float) -> VortexParticleCloud:
    """
    Particle cloud after one step, advanced jointly with the body by step_rk4.

    Raises:
        InvalidTimestep: dt is not positive
        SupportTooClose: The cloud ends up closer than the separation floor
    """
    return step_rk4(state, dt).cloud


def _density_model(values: Optional[np.ndarray]) -> Optional[SurfaceDensity]:
    return None if values is None else SurfaceDensity(values=values)


class Trajectory(NamedTuple):
    """Sampled states of one run."""

    states: List[SimState]
    halted: Optional[SupportTooClose]


def integrate(
    state: SimState,
    dt: float,
    T: float,
    output_stride: int = 1,
    callback: Optional[Callable[[SimState], None]] = None,
) -> Trajectory:
    """
    Integrate up to time T, keeping every output_stride-th state.

    A separation violation halts the run; the states up to the halt are returned.
    """
    if dt <= 0.0:
        raise InvalidTimestep(f"Time step must be positive, got {dt}")
    n_steps = int(round(T / dt))
    states = [state]
    if callback is not None:
        callback(state)
    for step in range(1, n_steps + 1):
        try:
            state = step_rk4(state, dt)
        except SupportTooClose as e:
            logger.warning(f"Run halted: {e}")
            if states[-1] is not e.state and e.state is not None:
                states.append(e.state)
            return Trajectory(states=states, halted=e)
        if step % output_stride == 0 or step == n_steps:
            states.append(state)
            if callback is not None:
                callback(state)
    return Trajectory(states=states, halted=None)


def reconstruct_pose(
    times: Any,
    p_history: Any,
    pose0: Optional[Pose] = None,
    substeps: int = 8,
) -> PoseTrajectory:
    """
    Lab-frame poses from a sampled body velocity history.

    p(t) is interpolated by a cubic spline and Q' = Q [Ω]×, h' = Q ℓ are integrated with
    RK4, re-orthonormalizing Q after every step.
    """
    times = np.asarray(times, dtype=np.float64)
    history = np.asarray(p_history, dtype=np.float64)
    pose0 = Pose.identity() if pose0 is None else pose0
    if len(times) < 2:
        return PoseTrajectory(times=times, h=pose0.h[None, :], Q=pose0.Q[None, :, :])
    spline = CubicSpline(times, history, axis=0)

    def rates(t: float, h: np.ndarray, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ell, omega = split_p(spline(t))
        return q @ ell, q @ cross_matrix(omega)

    hs, qs = [pose0.h.copy()], [pose0.Q.copy()]
    h, q = pose0.h.copy(), pose0.Q.copy()
    for t0, t1 in zip(times[:-1], times[1:]):
        step = (t1 - t0) / substeps
        for k in range(substeps):
            t = t0 + k * step
            dh1, dq1 = rates(t, h, q)
            dh2, dq2 = rates(t + 0.5 * step, h + 0.5 * step * dh1, q + 0.5 * step * dq1)
            dh3, dq3 = rates(t + 0.5 * step, h + 0.5 * step * dh2, q + 0.5 * step * dq2)
            dh4, dq4 = rates(t + step, h + step * dh3, q + step * dq3)
            h = h + step / 6.0 * (dh1 + 2 * dh2 + 2 * dh3 + dh4)
            q = orthonormalize(q + step / 6.0 * (dq1 + 2 * dq2 + 2 * dq3 + dq4))
        hs.append(h.copy())
        qs.append(q.copy())
    return PoseTrajectory(times=times, h=np.array(hs), Q=np.array(qs))


class LabTrajectory(NamedTuple):
    """Lab-frame limit trajectory: poses, centre velocities and lab angular velocities."""

    poses: PoseTrajectory
    velocity: np.ndarray
    angular_velocity: np.ndarray


def lab_vectors(curve: Curve, h: np.ndarray, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Area and volume vectors of the moved curve h + Q γ, taken about h."""
    moved = curve.samples @ q.T + h
    return moment_vectors(moved - h, curve.tangents @ q.T, curve.spacing)


def lab_limit_rates(
    curve: Curve,
    inertia: InertiaSpec,
    mu: float,
    h: np.ndarray,
    velocity: np.ndarray,
    q: np.ndarray,
    momentum: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Rates of (h, h', Q, J R) for m h'' = μ A ∧ R and (J R)' = μ A ∧ h' + μ V ∧ R.
    """
    m, j0 = inertia.effective(None)
    inertia_lab = q @ j0 @ q.T
    omega_lab = np.linalg.solve(inertia_lab, momentum)
    area, volume = lab_vectors(curve, h, q)
    acceleration = mu * np.cross(area, omega_lab) / m
    torque = mu * np.cross(area, velocity) + mu * np.cross(volume, omega_lab)
    return velocity, acceleration, cross_matrix(omega_lab) @ q, torque


def integrate_lab_frame_limit(
    curve: Curve,
    inertia: InertiaSpec,
    mu: float,
    p0: Any,
    dt: float,
    T: float,
    pose0: Optional[Pose] = None,
) -> LabTrajectory:
    """
    Integrate the lab-frame limit equations directly, recomputing A and V from the moved curve.

    The initial body velocity p0 = (ℓ, Ω) is mapped to h' = Q ℓ and R = Q Ω.
    """
    if dt <= 0.0:
        raise InvalidTimestep(f"Time step must be positive, got {dt}")
    pose0 = Pose.identity() if pose0 is None else pose0
    p0 = np.asarray(p0, dtype=np.float64)
    _, j0 = inertia.effective(None)
    h, q = pose0.h.copy(), pose0.Q.copy()
    velocity = q @ p0[:3]
    momentum = q @ j0 @ p0[3:]
    n_steps = int(round(T / dt))
    times, hs, qs, vs, rs = [0.0], [h.copy()], [q.copy()], [velocity.copy()], [q @ p0[3:]]

    def rates(y: Tuple[np.ndarray, ...]) -> Tuple[np.ndarray, ...]:
        return lab_limit_rates(curve, inertia, mu, y[0], y[1], y[2], y[3])

    for step in range(1, n_steps + 1):
        y = (h, velocity, q, momentum)
        k1 = rates(y)
        k2 = rates(tuple(a + 0.5 * dt * b for a, b in zip(y, k1)))
        k3 = rates(tuple(a + 0.5 * dt * b for a, b in zip(y, k2)))
        k4 = rates(tuple(a + dt * b for a, b in zip(y, k3)))
        h, velocity, q, momentum = (
            a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
            for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
        )
        q = orthonormalize(q)
        times.append(step * dt)
        hs.append(h.copy())
        qs.append(q.copy())
        vs.append(velocity.copy())
        rs.append(np.linalg.solve(q @ j0 @ q.T, momentum))
    poses = PoseTrajectory(times=np.array(times), h=np.array(hs), Q=np.array(qs))
    return LabTrajectory(poses=poses, velocity=np.array(vs), angular_velocity=np.array(rs))


def lab_frame_residual(
    curve: Curve,
    inertia: InertiaSpec,
    mu: float,
    poses: PoseTrajectory,
    j0: Optional[np.ndarray] = None,
) -> float:
    """
    Relative residual of the lab-frame limit equations along a sampled trajectory.

    h'' and (J R)' are taken by central differences of the samples; R comes from
    Q' Qᵀ. Returns the largest residual over interior samples relative to the force scale.
    """
    times, h, q = poses.times, poses.h, poses.Q
    m, j_body = inertia.effective(None)
    j_body = j_body if j0 is None else j0
    dt = np.diff(times)
    if len(times) < 5 or np.max(np.abs(dt - dt[0])) > 1e-9 * dt[0]:
        raise ValueError("Residual needs at least 5 uniformly spaced samples")
    step = float(dt[0])
    velocity = np.gradient(h, step, axis=0, edge_order=2)
    acceleration = np.gradient(velocity, step, axis=0, edge_order=2)
    q_dot = np.gradient(q, step, axis=0, edge_order=2)
    omega_skew = np.einsum("nab,ncb->nac", q_dot, q)
    omega = np.stack([omega_skew[:, 2, 1], omega_skew[:, 0, 2], omega_skew[:, 1, 0]], axis=1)
    momentum = np.einsum("nab,bc,ndc,nd->na", q, j_body, q, omega)
    momentum_dot = np.gradient(momentum, step, axis=0, edge_order=2)
    worst = 0.0
    for k in range(2, len(times) - 2):
        area, volume = lab_vectors(curve, h[k], q[k])
        force = mu * np.cross(area, omega[k])
        torque = mu * np.cross(area, velocity[k]) + mu * np.cross(volume, omega[k])
        scale = max(np.linalg.norm(force) + np.linalg.norm(torque), 1e-300)
        defect = np.linalg.norm(m * acceleration[k] - force) + np.linalg.norm(
            momentum_dot[k] - torque
        )
        worst = max(worst, float(defect / scale))
    return worst
