"""Run configuration, model registry and diagnostics used by the command line."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ccflow.errors import ConfigError, DimensionError, UnknownModelError
from ccflow.hamiltonian import (
    METHODS,
    FlowModel,
    Trajectory,
    admissibility_residual,
    drift_report,
    fd_gradient,
    involution_residual,
    integrate,
    speed_identity_check,
)
from ccflow.lie import ALGEBRAS, LieAlgebraSpec
from ccflow.models import (
    ConstrainedLagrangianModel,
    EulerModel,
    GeodesicModel,
    ReducedModel,
    RigidBodyParams,
    cc_euler_model,
    gd_degeneration_pair,
    heisenberg_dalembert_model,
    heisenberg_left_model,
    heisenberg_right_model,
    magnetic_circle_oracle,
    project_left,
    reduce_heisenberg,
    reduce_right_polar,
    rigid_body_e3_model,
)

INVOLUTION_TOL = 1e-9
CASIMIR_TOL = 1e-10
GRADIENT_RTOL = 1e-6
RHS_TOL = 1e-9
STRUCTURE_TOL = 1e-8
ALGEBRA_TOL = 1e-12


@dataclass(frozen=True)
class ModelEntry:
    build: Callable[[dict], FlowModel]
    defaults: dict
    summary: str


def _euler_from_params(p: dict) -> FlowModel:
    name = p.get("algebra", "so3")
    if name not in ALGEBRAS:
        raise ConfigError(f"unknown algebra {name!r}; choose from {sorted(ALGEBRAS)}")
    alg = ALGEBRAS[name]()
    J = np.eye(alg.dim) if p.get("J") is None else np.asarray(p["J"], dtype=float)
    sub = p.get("subspace")
    sub = tuple(range(alg.dim - 1)) if sub is None else tuple(sub)
    return cc_euler_model(EulerModel(alg, J, sub), name=f"cc-euler-{name}")


def _rigid_from_params(p: dict) -> FlowModel:
    return rigid_body_e3_model(RigidBodyParams(np.asarray(p["inertia"], dtype=float), np.asarray(p["r"], dtype=float)))


MODELS: dict[str, ModelEntry] = {
    "heisenberg-left": ModelEntry(lambda p: heisenberg_left_model(), {}, "left-invariant CC geodesic flow on H^3"),
    "heisenberg-right": ModelEntry(lambda p: heisenberg_right_model(), {}, "left metric, right-invariant distribution on H^3"),
    "reduced-left": ModelEntry(lambda p: reduce_heisenberg("left", p["C"]), {"C": 1.0}, "charged particle, constant field -C"),
    "reduced-right": ModelEntry(lambda p: reduce_heisenberg("right", p["C"]), {"C": 1.0}, "right reduced flow, Cartesian"),
    "reduced-right-polar": ModelEntry(lambda p: reduce_right_polar(p["C"]), {"C": 1.0}, "right reduced flow, polar"),
    "cc-euler": ModelEntry(
        _euler_from_params, {"algebra": "so3", "J": None, "subspace": None}, "CC Euler equations on a Lie co-algebra"
    ),
    "gd-euler": ModelEntry(lambda p: gd_degeneration_pair(p["D"])[0], {"D": 10.0}, "Euler flow on so(3)* for diag(1,1,D)"),
    "rigid-body-e3": ModelEntry(
        _rigid_from_params,
        {"inertia": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], "r": [0.0, 0.0, 0.0]},
        "heavy rigid body on e(3)*",
    ),
    "dalembert-heisenberg": ModelEntry(lambda p: heisenberg_dalembert_model(), {}, "Euclidean R^3 with dz - x dy = 0"),
}


def model_params(name: str, params: Optional[dict] = None) -> dict:
    if name not in MODELS:
        raise UnknownModelError(f"unknown model {name!r}; available: {', '.join(MODELS)}")
    merged = dict(MODELS[name].defaults)
    for key, value in (params or {}).items():
        if key not in merged:
            raise ConfigError(f"model {name!r} has no parameter {key!r} (known: {sorted(merged)})")
        merged[key] = value
    return merged


def build_model(name: str, params: Optional[dict] = None) -> FlowModel:
    merged = model_params(name, params)
    try:
        return MODELS[name].build(merged)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"bad parameters for {name!r}: {exc}") from exc


@dataclass
class RunConfig:
    model: str
    params: dict = field(default_factory=dict)
    initial_state: Optional[list[float]] = None
    dt: float = 1e-3
    t_final: float = 1.0
    method: str = "implicit_midpoint"
    out_trajectory: Optional[str] = None
    out_report: Optional[str] = None
    seed: int = 0

    def validate(self) -> "RunConfig":
        if self.model not in MODELS:
            raise UnknownModelError(f"unknown model {self.model!r}; available: {', '.join(MODELS)}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be a positive number, got {self.dt!r}")
        if not (isinstance(self.t_final, (int, float)) and self.t_final >= self.dt):
            raise ConfigError(f"t_final must be >= dt, got {self.t_final!r}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        model = data.pop("model", None)
        if isinstance(model, dict):
            data.setdefault("params", model.get("params", {}))
            model = model.get("name")
        outputs = data.pop("outputs", None) or {}
        data.setdefault("out_trajectory", outputs.get("trajectory"))
        data.setdefault("out_report", outputs.get("report"))
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if model is None:
            raise ConfigError("config has no model")
        cfg = cls(model=model, **data)
        if cfg.initial_state is not None:
            cfg.initial_state = [float(v) for v in cfg.initial_state]
        cfg.dt = float(cfg.dt)
        cfg.t_final = float(cfg.t_final)
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


def initial_state_for(model: FlowModel, cfg: RunConfig) -> np.ndarray:
    """Configured state, or a seeded sample from the model's box."""
    if cfg.initial_state is not None:
        z = np.asarray(cfg.initial_state, dtype=float)
        if z.shape != (model.state_dim,):
            raise DimensionError(
                f"initial_state has {z.size} components, model {model.name!r} needs {model.state_dim} {model.coords}"
            )
        return z
    z = model.sample_states(1, cfg.seed)[0]
    if isinstance(model, ConstrainedLagrangianModel):
        z = model.project_velocity(z)
    return z


def oracle_error(model: FlowModel, traj: Trajectory) -> Optional[dict]:
    """Error against the closed-form charged-particle motion, where one exists."""
    if isinstance(model, ReducedModel) and model.side == "left":
        planar = traj.states
        C = model.C
    elif model.name == "heisenberg-left":
        planar = project_left(traj.states)
        C = float(traj.states[0, 5])
    else:
        return None
    x0, y0, u0, v0 = planar[0]
    E = 0.5 * (u0 * u0 + v0 * v0)
    t = traj.times - traj.times[0]
    if C == 0.0 or E == 0.0:
        exact = np.stack([x0 + u0 * t, y0 + v0 * t, np.full_like(t, u0), np.full_like(t, v0)], axis=-1)
        kind = "straight-line"
    else:
        exact = magnetic_circle_oracle(E, C, (x0, y0, math.atan2(v0, u0))).states(t)
        kind = "magnetic-circle"
    return {"kind": kind, "max_error": float(np.max(np.abs(planar - exact)))}


@dataclass
class DiagnosticsReport:
    model: str
    params: dict
    method: str
    dt: float
    steps: int
    t_final: float
    drift: dict
    involution: Optional[dict] = None
    admissibility_residual: Optional[float] = None
    speed_identity_residual: Optional[float] = None
    oracle: Optional[dict] = None
    timing: Optional[dict] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def residuals(self) -> list[float]:
        vals = list(self.drift.values())
        if self.involution:
            vals += [v for row in self.involution["matrix"] for v in row]
        for v in (self.admissibility_residual, self.speed_identity_residual):
            if v is not None:
                vals.append(v)
        if self.oracle:
            vals.append(self.oracle["max_error"])
        return vals


def diagnose(model: FlowModel, traj: Trajectory, params: dict, seed: int, samples: int = 100) -> DiagnosticsReport:
    report = DiagnosticsReport(
        model=model.name,
        params=params,
        method=traj.method,
        dt=traj.dt,
        steps=len(traj) - 1,
        t_final=float(traj.times[-1]),
        drift=drift_report(traj, model),
    )
    if model.poisson is not None and len(model.integrals) >= 2:
        names, mat = involution_residual(model, samples, seed)
        report.involution = {
            "names": list(names),
            "matrix": mat.tolist(),
            "involutive": list(model.involutive),
            "samples": samples,
            "seed": seed,
        }
    if isinstance(model, GeodesicModel):
        report.admissibility_residual = admissibility_residual(traj, model.constraints, model.cometric)
        report.speed_identity_residual = speed_identity_check(traj, model.metric, model.cometric)
    elif isinstance(model, ConstrainedLagrangianModel):
        report.admissibility_residual = max(model.constraint_violation(z) for z in traj.states)
    report.oracle = oracle_error(model, traj)
    return report


def simulate(cfg: RunConfig, timing: bool = False) -> tuple[FlowModel, Trajectory, DiagnosticsReport]:
    cfg.validate()
    params = model_params(cfg.model, cfg.params)
    model = build_model(cfg.model, cfg.params)
    z0 = initial_state_for(model, cfg)
    steps = int(round(cfg.t_final / cfg.dt))
    start = time.perf_counter()
    traj = integrate(model, z0, cfg.dt, steps, cfg.method)
    elapsed = time.perf_counter() - start
    report = diagnose(model, traj, params, cfg.seed)
    if timing:
        report.timing = {"integration_wall_clock_s": elapsed}
    return model, traj, report


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Header ``t,<coords>``; floats written with ``repr`` so they round-trip exactly."""
    lines = [",".join(("t",) + traj.coords)]
    for t, row in zip(traj.times.tolist(), traj.states.tolist()):
        lines.append(",".join(repr(v) for v in [t] + row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory_csv(path) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    """Inverse of :func:`write_trajectory_csv`: ``(coords, times, states)``."""
    text = Path(path).read_text().splitlines()
    header = tuple(text[0].split(","))
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    return header[1:], data[:, 0], data[:, 1:]


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


# --- structural checks ------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return math.isfinite(self.value) and self.value <= self.threshold


def _poly_functions(dim: int, rng: np.random.Generator, count: int = 5):
    """Random cubic polynomials with analytic gradients, for Casimir checks."""
    out = []
    for _ in range(count):
        a = rng.normal(size=dim)
        B = rng.normal(size=(dim, dim))
        B = 0.5 * (B + B.T)
        c = rng.normal(size=dim)

        def grad(z, a=a, B=B, c=c):
            return a + 2.0 * B @ z + 3.0 * c * z**2

        out.append(grad)
    return out


def check_model(model: FlowModel, samples: int = 100, seed: int = 0) -> tuple[list[CheckResult], Optional[tuple]]:
    """Structural validation of a model on seeded sample states."""
    results: list[CheckResult] = []
    states = model.sample_states(samples, seed)
    matrix = None
    if model.poisson is not None:
        results.append(
            CheckResult("poisson antisymmetry", max(model.poisson.antisymmetry_residual(z) for z in states), STRUCTURE_TOL)
        )
        results.append(
            CheckResult("poisson jacobi", max(model.poisson.jacobi_residual(z) for z in states[:20]), STRUCTURE_TOL)
        )
    if model.hamiltonian is not None and model.grad_hamiltonian is not None:
        worst = 0.0
        for z in states:
            g = model.gradient(z)
            fd = fd_gradient(model.hamiltonian, z)
            worst = max(worst, float(np.max(np.abs(g - fd)) / max(1.0, float(np.max(np.abs(g))))))
        results.append(CheckResult("gradient vs finite differences (relative)", worst, GRADIENT_RTOL))
    if model.hamiltonian is not None and model.poisson is not None and model.rhs is not None:
        worst = max(float(np.max(np.abs(model.rhs(z) - model.poisson(z) @ model.gradient(z)))) for z in states)
        results.append(CheckResult("rhs vs Pi grad H", worst, RHS_TOL))
    if model.poisson is not None and len(model.involutive) >= 2:
        names, mat = involution_residual(model, samples, seed)
        matrix = (names, mat)
        idx = [names.index(k) for k in model.involutive]
        results.append(CheckResult("involution of " + ",".join(model.involutive), float(mat[np.ix_(idx, idx)].max()), INVOLUTION_TOL))
    if model.casimirs:
        rng = np.random.default_rng(seed)
        polys = _poly_functions(model.state_dim, rng)
        worst = 0.0
        for z in states:
            pi = model.poisson(z)
            for name in model.casimirs:
                gc = model.integral_gradient(name, z)
                for grad in polys:
                    worst = max(worst, abs(float(gc @ pi @ grad(z))))
        results.append(CheckResult("casimir brackets with random polynomials", worst, CASIMIR_TOL))
    if isinstance(model, ConstrainedLagrangianModel):
        worst = 0.0
        for z in states:
            z = model.project_velocity(z)
            x, v = model.split(z)
            acc = model.acceleration(z)
            # second derivative of the constraints along the flow must vanish
            W = model.constraints(x)
            dW = model.constraints.derivative(x)
            worst = max(worst, float(np.max(np.abs(W @ acc + np.einsum("aip,p,i->a", dW, v, v)))))
        results.append(CheckResult("constraint acceleration consistency", worst, RHS_TOL))
    return results, matrix


def load_algebra(path) -> LieAlgebraSpec:
    try:
        data = json.loads(Path(path).read_text())
        return LieAlgebraSpec(data.get("name", Path(path).stem), tuple(data["basis_names"]), np.asarray(data["structure_constants"], dtype=float))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read algebra file {path}: {exc}") from exc


def check_algebra(alg) -> list[CheckResult]:
    return [
        CheckResult(f"{alg.name} antisymmetry", alg.antisymmetry_residual(), ALGEBRA_TOL),
        CheckResult(f"{alg.name} jacobi", alg.jacobi_residual(), ALGEBRA_TOL),
    ]

