"""
Scenario runner: coefficient convergence study, limit-vs-tube trajectory comparison and
divergence experiment.
"""

import logging
import time
from pathlib import Path
from typing import List, NamedTuple, Optional, Union

import numpy as np

from rigid_filament.errors import IOFailure, SupportTooClose
from rigid_filament.models.coefficients import CoefficientSet
from rigid_filament.models.config import ScenarioConfig
from rigid_filament.models.fields import SurfaceDensity, SurfaceField, VortexParticleCloud
from rigid_filament.models.geometry import Curve, Frame, TubeMesh
from rigid_filament.models.report import RunReport
from rigid_filament.models.state import FlowEnvironment, Pose, RigidState, SimState
from rigid_filament.numerics.coefficients import (
    bstar_matrix,
    build_coefficients,
    calB_matrix,
    calD,
    export_coefficients,
    gamma_a,
    total_energy,
)
from rigid_filament.numerics.dynamics import (
    Trajectory,
    default_separation_floor,
    integrate,
    integrate_lab_frame_limit,
    lab_frame_residual,
    reconstruct_pose,
    refresh_reflection,
    rhs_body_frame,
    stage_fields,
    support_separation,
)
from rigid_filament.numerics.geometry import (
    build_frame,
    export_obj,
    jacobian_bound_constant,
    tube_mesh,
)
from rigid_filament.numerics.kernels import (
    CurveField,
    biot_savart_particles,
    h2d_field,
    ring_vortex_cloud,
)
from rigid_filament.numerics.neumann import (
    KirchhoffField,
    NeumannSolver,
    cross_section_circulation,
    harmonic_field,
    kirchhoff_system,
)
from rigid_filament.parser.curve_parser import build_curve
from rigid_filament.utils.matrix_cache import MatrixCache

P_COLUMNS = [f"p{i}" for i in range(1, 7)]
H_COLUMNS = ["h1", "h2", "h3"]
Q_COLUMNS = [f"Q{i}{j}" for i in range(1, 4) for j in range(1, 4)]
TRAJECTORY_COLUMNS = (
    ["t"]
    + P_COLUMNS
    + H_COLUMNS
    + Q_COLUMNS
    + ["energy", "separation", "n_particles", "total_vorticity", "max_weight"]
)
CONVERGENCE_COLUMNS = [
    "eps",
    "n_t",
    "n_theta",
    "n_panels",
    "bstar_error",
    "h2d_error",
    "ma_norm",
    "ma_asymmetry",
    "gamma_a_norm",
    "circulation",
    "circulation_spread",
    "normal_residual",
    "h_minus_h2d",
    "jacobian_constant",
]
TRAJECTORY_SUMMARY_COLUMNS = [
    "eps",
    "sup_p_error",
    "probe_error",
    "probe_constant",
    "energy_drift",
    "final_time",
    "halted",
]
PROBE_COLUMNS = [
    "eps",
    "t",
    "probe",
    "star_x",
    "star_y",
    "star_z",
    "eps_x",
    "eps_y",
    "eps_z",
    "error",
]
JACOBIAN_SAMPLES = 32
LAB_COLUMNS = ["t", "h1_body", "h2_body", "h3_body", "h1_lab", "h2_lab", "h3_lab", "difference"]
DIVERGENCE_COLUMNS = ["t", "p3", "travelled", "separation", "distance", "D3", "D3_prediction"]
DIVERGENCE_SUMMARY_COLUMNS = [
    "eps",
    "initial_acceleration",
    "p3_final",
    "travelled",
    "travel_threshold",
    "D3_initial",
    "D3_prediction",
    "min_separation",
    "final_time",
    "halted",
]


class TubeData(NamedTuple):
    """Everything built once per tube radius."""

    mesh: TubeMesh
    solver: NeumannSolver
    environment: FlowEnvironment
    coeffs: CoefficientSet


def state_row(state: SimState) -> List[float]:
    """One TRAJECTORY_COLUMNS row for a state."""
    cloud = state.cloud
    separation = support_separation(state)
    return (
        [state.t]
        + list(state.rigid.p)
        + list(state.pose.h)
        + list(state.pose.Q.reshape(-1))
        + [
            total_energy(state.coeffs, state.rigid.p),
            separation,
            float(cloud.n_particles),
            float(np.linalg.norm(cloud.total_vorticity())) if not cloud.is_empty else 0.0,
            float(np.max(np.linalg.norm(cloud.alphas, axis=1))) if not cloud.is_empty else 0.0,
        ]
    )


class ScenarioRunner:
    """Runs one configured scenario and collects its tables in a RunReport."""

    def __init__(
        self,
        config: ScenarioConfig,
        base_dir: Optional[Union[str, Path]] = None,
        log_level: int = logging.INFO,
    ):
        """
        Initialize the runner.

        Args:
            config: Validated scenario configuration
            base_dir: Directory that relative curve table paths are resolved against
            log_level: Logging level
        """
        self.config = config
        self.base_dir = Path(base_dir) if base_dir is not None else None
        self.report = RunReport(config.scenario, config.content_hash())
        self.logger = logging.getLogger(__name__)
        self.logger.setLevel(log_level)
        if not self.logger.handlers:
            handler = logging.StreamHandler()
            formatter = logging.Formatter("%(levelname)s: %(message)s")
            handler.setFormatter(formatter)
            self.logger.addHandler(handler)
        self.cache: Optional[MatrixCache] = None
        if config.numerics.cache_dir:
            self.cache = MatrixCache(config.numerics.cache_dir, log_level)
        self._curve: Optional[Curve] = None
        self._frame: Optional[Frame] = None

    def run(self) -> RunReport:
        """
        Run the configured scenario.

        Returns:
            RunReport with the tables of every completed part
        """
        self.logger.info(f"Starting scenario '{self.config.scenario}'")
        runners = {
            "convergence": self.run_convergence_study,
            "trajectory": self.run_trajectory_comparison,
            "divergence": self.run_divergence_experiment,
        }
        try:
            runners[self.config.scenario]()
        except IOFailure:
            raise
        except SupportTooClose as e:
            self._record_failure("initial state", e)
        except ValueError as e:
            self.logger.error(f"Scenario failed on invalid input: {e}")
            self.report.add_error("Validation", str(e))
            self.report.validation_failure = True
        except RuntimeError as e:
            self.logger.error(f"Scenario failed: {e}")
            self.report.add_error("Runtime", str(e))
            self.report.runtime_failure = True
        return self.report

    def _record_failure(self, label: str, error: Exception) -> None:
        """Record a failed part of the run and keep going with the rest."""
        if isinstance(error, IOFailure):
            raise error
        self.logger.error(f"{label} failed: {error}")
        if isinstance(error, SupportTooClose):
            t = error.state.t if isinstance(error.state, SimState) else 0.0
            self.report.record_halt(label, t, error.separation, str(error))
        elif isinstance(error, ValueError):
            self.report.add_error(label, str(error))
            self.report.validation_failure = True
        else:
            self.report.add_error(label, str(error))
            self.report.runtime_failure = True

    def _output_dir(self) -> Path:
        directory = Path(self.config.output.directory)
        try:
            directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise IOFailure(f"Cannot create output directory {directory}: {e}")
        return directory

    @property
    def curve(self) -> Curve:
        if self._curve is None:
            self._curve = build_curve(self.config.curve, self.base_dir)
        return self._curve

    @property
    def frame(self) -> Frame:
        if self._frame is None:
            self._frame = build_frame(self.curve)
        return self._frame

    def _build_tube(self, eps: float) -> TubeData:
        """Mesh, solver, Kirchhoff system, harmonic field and coefficients for one radius."""
        config = self.config
        n_t = config.mesh.resolve_n_t(self.curve.length, eps)
        mesh = tube_mesh(self.curve, self.frame, eps, n_t, config.mesh.n_theta)
        self.logger.info(f"eps={eps}: mesh {n_t} x {config.mesh.n_theta} panels")
        if config.output.export_mesh:
            export_obj(mesh, self._output_dir() / f"mesh_eps_{eps:g}.obj")
        solver = NeumannSolver(
            mesh,
            config.mesh.quadrature,
            tol_compat=config.numerics.tol_compat,
            residual_tol=config.numerics.residual_tol,
            cache=self.cache,
        )
        kirchhoff = kirchhoff_system(mesh, solver)
        harmonic = harmonic_field(mesh, self.curve, solver, config.mesh.curve_oversampling)
        B = calB_matrix(mesh, harmonic.trace)
        coeffs = build_coefficients(config.inertia, B, mesh, kirchhoff, eps)
        environment = FlowEnvironment(
            curve=self.curve,
            mesh=mesh,
            kirchhoff=kirchhoff,
            harmonic_density=harmonic.density,
            harmonic_trace=harmonic.trace,
            solver=solver,
            curve_oversampling=config.mesh.curve_oversampling,
        )
        if config.output.export_coefficients:
            export_coefficients(coeffs, self._output_dir() / f"coefficients_eps_{eps:g}.txt")
        return TubeData(mesh=mesh, solver=solver, environment=environment, coeffs=coeffs)

    def jacobian_constant(self, eps: float) -> float:
        """Fitted C in |w - 1| <= C dist over seeded random points at eps/2 and eps."""
        return jacobian_bound_constant(
            self.curve, self.frame, [0.5 * eps, eps], JACOBIAN_SAMPLES, seed=self.config.seed
        )

    def _limit_coefficients(self) -> CoefficientSet:
        return build_coefficients(self.config.inertia, bstar_matrix(self.curve))

    def _initial_cloud(self) -> VortexParticleCloud:
        spec = self.config.vorticity
        if spec.kind == "none":
            return VortexParticleCloud.empty()
        swirl = ring_vortex_cloud(spec.s0, spec.strength, spec.core, spec.n_particles, spec.delta)
        return swirl.cloud

    def _initial_state(
        self,
        regime: str,
        coeffs: CoefficientSet,
        environment: FlowEnvironment,
        cloud: VortexParticleCloud,
        eps: Optional[float] = None,
        reduced_axis: Optional[int] = None,
    ) -> SimState:
        config = self.config
        floor = config.numerics.separation_floor
        if floor is None:
            floor = default_separation_floor(regime, self.curve, eps)
        state = SimState(
            rigid=RigidState(p=config.p0, t=0.0),
            pose=Pose.identity(),
            cloud=cloud,
            coeffs=coeffs,
            environment=environment,
            regime=regime,
            flow="irrotational" if cloud.is_empty else "vortical",
            mu=config.mu,
            separation_floor=floor,
            reflection_stride=config.numerics.reflection_stride,
            reduced_axis=reduced_axis,
        )
        separation = support_separation(state)
        if separation < floor:
            raise SupportTooClose(
                f"Initial vorticity is {separation:.4g} from the body, floor {floor:.4g}",
                separation,
                state=state,
            )
        return state

    def _integrate(self, state: SimState, label: str) -> Trajectory:
        config = self.config
        table = self.report.table(f"trajectory_{label}", TRAJECTORY_COLUMNS)
        trajectory = integrate(
            state,
            config.dt,
            config.T,
            config.numerics.output_stride,
            callback=lambda s: table.append(state_row(s)),
        )
        if trajectory.halted is not None:
            last = trajectory.states[-1]
            self.report.record_halt(
                label, last.t, trajectory.halted.separation, str(trajectory.halted)
            )
        return trajectory

    # ------------------------------------------------------------------ convergence

    def run_convergence_study(self) -> RunReport:
        """
        Coefficient convergence over the configured tube radii.

        For every radius: distance of B^eps and of 𝓑[H_2D] to B*, added mass norm, Γ_a at the
        reference velocity, harmonic circulation and normal residual, the on-surface
        distance between H^eps and H_2D, and the seeded Jacobian bound constant.
        """
        config = self.config
        bstar = bstar_matrix(self.curve)
        self.logger.info(f"B* from the area and volume vectors, norm {np.linalg.norm(bstar):.6g}")
        table = self.report.table("convergence", CONVERGENCE_COLUMNS)
        for eps in config.eps_list:
            started = time.perf_counter()
            try:
                tube = self._build_tube(eps)
            except (ValueError, RuntimeError) as e:
                self._record_failure(f"eps={eps}", e)
                continue
            mesh, coeffs = tube.mesh, tube.coeffs
            trace = tube.environment.harmonic_trace
            assert trace is not None and tube.environment.kirchhoff is not None
            b2d = calB_matrix(mesh, h2d_field(mesh))
            circulation = cross_section_circulation(mesh, trace)
            normal = trace.normal_component(mesh)
            difference = SurfaceField(vectors=trace.vectors - h2d_field(mesh).vectors)
            seconds = time.perf_counter() - started
            table.append(
                [
                    eps,
                    mesh.n_t,
                    mesh.n_theta,
                    mesh.n_panels,
                    float(np.max(np.abs(coeffs.B - bstar))),
                    float(np.max(np.abs(b2d - bstar))),
                    float(np.linalg.norm(coeffs.Ma, 2)),
                    tube.environment.kirchhoff.asymmetry,
                    float(np.linalg.norm(gamma_a(coeffs, config.reference_p))),
                    float(np.mean(circulation)),
                    float(np.max(circulation) - np.min(circulation)),
                    float(np.sqrt(np.mean(normal**2))) / max(trace.rms(), 1e-300),
                    difference.l2_norm(mesh),
                    self.jacobian_constant(eps),
                ]
            )
            self.report.add_timing(f"eps={eps}", seconds)
            self.logger.info(f"eps={eps} done in {seconds:.1f} s")
        return self.report

    # ------------------------------------------------------------------ trajectories

    def _probe_points(self) -> np.ndarray:
        spec = self.config.probes
        t = self.curve.length * np.arange(spec.count) / spec.count
        position, _, _ = self.curve.evaluate(t)
        s1, _, _ = self.frame.evaluate(self.curve, t)
        return np.asarray(position + spec.distance * s1)

    def _probe_velocity(self, state: SimState, points: np.ndarray) -> np.ndarray:
        density = None if state.reflection_density is None else state.reflection_density.values
        if state.regime == "eps" and state.flow == "vortical" and density is None:
            density = refresh_reflection(state, state.cloud)
        fields = stage_fields(state, state.rigid.p, state.cloud, density)
        return np.asarray(fields.fluid(points).value)

    def run_trajectory_comparison(self) -> RunReport:
        """
        Integrate the limit system and the tube system for every radius from the same data.

        Emits the time series of every run, sup_t |p^eps - p*|, probe velocity comparisons at
        every output time,
        and for irrotational runs the body-frame versus lab-frame cross-check.
        """
        config = self.config
        cloud = self._initial_cloud()
        probes = self._probe_points()
        limit_env = FlowEnvironment(
            curve=self.curve, curve_oversampling=config.mesh.curve_oversampling
        )
        started = time.perf_counter()
        limit_state = self._initial_state("limit", self._limit_coefficients(), limit_env, cloud)
        limit = self._integrate(limit_state, "limit")
        self.report.add_timing("limit", time.perf_counter() - started)
        limit_p = np.array([s.rigid.p for s in limit.states])

        self._check_limit_field(limit_state, probes)
        if cloud.is_empty:
            self._lab_crosscheck(limit)

        summary = self.report.table("trajectory_summary", TRAJECTORY_SUMMARY_COLUMNS)
        probe_table = self.report.table("probes", PROBE_COLUMNS)
        for eps in config.eps_list:
            started = time.perf_counter()
            try:
                tube = self._build_tube(eps)
                state = self._initial_state("eps", tube.coeffs, tube.environment, cloud, eps)
                run = self._integrate(state, f"eps_{eps:g}")
            except (ValueError, RuntimeError) as e:
                self._record_failure(f"eps={eps}", e)
                continue
            eps_p = np.array([s.rigid.p for s in run.states])
            n = min(len(eps_p), len(limit_p))
            sup_error = float(np.max(np.linalg.norm(eps_p[:n] - limit_p[:n], axis=1)))

            errors = []
            for k in range(n):
                star = self._probe_velocity(limit.states[k], probes)
                tube_u = self._probe_velocity(run.states[k], probes)
                for j in range(len(probes)):
                    error = float(np.linalg.norm(tube_u[j] - star[j]))
                    errors.append(error)
                    probe_table.append(
                        [eps, run.states[k].t, j, *star[j], *tube_u[j], error]
                    )
            probe_error = max(errors)
            energies = [total_energy(s.coeffs, s.rigid.p) for s in run.states]
            drift = abs(energies[-1] - energies[0]) / max(abs(energies[0]), 1e-300)
            seconds = time.perf_counter() - started
            summary.append(
                [
                    eps,
                    sup_error,
                    probe_error,
                    probe_error / (eps * np.log(eps) ** 2),
                    drift,
                    run.states[-1].t,
                    float(run.halted is not None),
                ]
            )
            self.report.add_timing(f"eps={eps}", seconds)
            self.logger.info(f"eps={eps}: sup |p_eps - p*| = {sup_error:.4e} ({seconds:.1f} s)")
        return self.report

    def _check_limit_field(self, state: SimState, probes: np.ndarray) -> None:
        """Limit probe field against a direct filament quadrature of μ K[κ] (+ K[ω])."""
        fine = CurveField(self.curve, self.config.mu, 4 * self.config.mesh.curve_oversampling)
        direct = fine(probes).value
        if not state.cloud.is_empty:
            direct = direct + biot_savart_particles(state.cloud, probes).value
        field = self._probe_velocity(state, probes)
        error = float(np.max(np.linalg.norm(field - direct, axis=1)))
        scale = float(np.max(np.linalg.norm(direct, axis=1)))
        self.report.metrics["limit_field_error"] = error / max(scale, 1e-300)

    def _lab_crosscheck(self, body: Trajectory) -> None:
        """Compare the body-frame run with the lab-frame limit equations."""
        config = self.config
        lab = integrate_lab_frame_limit(
            self.curve, config.inertia, config.mu, config.p0, config.dt, config.T
        )
        table = self.report.table("lab_crosscheck", LAB_COLUMNS)
        for state in body.states:
            k = int(round(state.t / config.dt))
            if k >= len(lab.poses.times):
                break
            h_lab = lab.poses.h[k]
            difference = float(np.linalg.norm(state.pose.h - h_lab))
            table.append([state.t, *state.pose.h, *h_lab, difference])

        times = np.array([s.t for s in body.states])
        history = np.array([s.rigid.p for s in body.states])
        if len(times) >= 4:
            rebuilt = reconstruct_pose(times, history)
            joint = np.array([s.pose.h for s in body.states])
            self.report.metrics["reconstruct_h_error"] = float(
                np.max(np.linalg.norm(rebuilt.h - joint, axis=1))
            )
        if len(lab.poses.times) >= 5:
            self.report.metrics["lab_frame_residual"] = lab_frame_residual(
                self.curve, config.inertia, config.mu, lab.poses
            )

    # ------------------------------------------------------------------ divergence

    def run_divergence_experiment(self) -> RunReport:
        """
        Axisymmetric massless-limit experiment: only p3 is active and the swirl below the body
        pushes it upwards. Emits p3(t), the travelled distance, D3 against its s⁻⁴ prediction,
        and the eps^(-1/10) travel threshold next to the measured distance.
        """
        config = self.config
        spec = config.vorticity
        if config.curve.orientation != "clockwise":
            self.logger.warning("Divergence run on a counterclockwise circle: D3 changes sign")
        swirl = ring_vortex_cloud(spec.s0, spec.strength, spec.core, spec.n_particles, spec.delta)
        self.report.metrics["swirl_moment"] = swirl.moment
        summary = self.report.table("divergence_summary", DIVERGENCE_SUMMARY_COLUMNS)
        for eps in config.eps_list:
            started = time.perf_counter()
            try:
                tube = self._build_tube(eps)
                state = self._initial_state(
                    "eps", tube.coeffs, tube.environment, swirl.cloud, eps, reduced_axis=2
                )
                state = state.evolve(
                    reflection_density=_density(refresh_reflection(state, state.cloud))
                )
                acceleration = float(rhs_body_frame(state)[2])
                table = self.report.table(f"divergence_eps_{eps:g}", DIVERGENCE_COLUMNS)

                def record(s: SimState) -> None:
                    table.append(self._divergence_row(s, swirl.moment))

                run = integrate(state, config.dt, config.T, config.numerics.output_stride, record)
            except (ValueError, RuntimeError) as e:
                self._record_failure(f"eps={eps}", e)
                continue
            if run.halted is not None:
                last = run.states[-1]
                self.report.record_halt(
                    f"eps_{eps:g}", last.t, run.halted.separation, str(run.halted)
                )
            first = table.rows[0]
            last_row = table.rows[-1]
            seconds = time.perf_counter() - started
            summary.append(
                [
                    eps,
                    acceleration,
                    last_row[1],
                    last_row[2],
                    eps ** (-0.1),
                    first[5],
                    first[6],
                    float(min(row[3] for row in table.rows)),
                    last_row[0],
                    float(run.halted is not None),
                ]
            )
            self.report.add_timing(f"eps={eps}", seconds)
            self.logger.info(
                f"eps={eps}: p3'(0) = {acceleration:.4e}, travelled {last_row[2]:.4e} "
                f"(threshold eps^-1/10 = {eps ** (-0.1):.4f})"
            )
        return self.report

    def _divergence_row(self, state: SimState, moment: float) -> List[float]:
        """t, p3, h3, separation, swirl distance, D3 and its s⁻⁴ prediction."""
        cloud = state.cloud
        weights = np.linalg.norm(cloud.alphas, axis=1)
        distance = float(-np.sum(weights * cloud.positions[:, 2]) / np.sum(weights))
        density = None if state.reflection_density is None else state.reflection_density.values
        fields = stage_fields(state, state.rigid.p, cloud, density)
        env = state.environment
        kirchhoff = None
        if env.solver is not None and env.kirchhoff is not None:
            kirchhoff = KirchhoffField(env.solver, env.kirchhoff)
        d = calD(env.mesh, kirchhoff, state.rigid.p, cloud, fields.fluid)
        return [
            state.t,
            float(state.rigid.p[2]),
            float(state.pose.h[2]),
            support_separation(state),
            distance,
            float(d[2]),
            0.75 * moment / distance**4,
        ]


def _density(values: Optional[np.ndarray]) -> Optional[SurfaceDensity]:
    return None if values is None else SurfaceDensity(values=values)


def run_scenario(
    config: ScenarioConfig,
    base_dir: Optional[Union[str, Path]] = None,
    log_level: int = logging.INFO,
) -> RunReport:
    """Run a scenario and return its report."""
    return ScenarioRunner(config, base_dir, log_level).run()
