"""Scenario files: JSON schema, built-in scenarios, building and checking runs."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
from scipy.integrate import solve_ivp

from . import diagnostics as dg
from .dynamics import (
    FrictionSystem,
    LinearRateLaw,
    MassActionRateLaw,
    NonholonomicSystem,
    ReactionNetwork,
    ReactionSystem,
    TransferNetwork,
    TransferSystem,
)
from .errors import ConfigError, ThermoError
from .integrators import IntegratorConfig, Method, Trajectory, integrate, integrate_at
from .model import (
    GAS_CONSTANT,
    ForceField,
    HarmonicDrive,
    IdealMixtureEnergy,
    LinearConstraintSet,
    LinearEnergy,
    NonholonomicModel,
    PistonModel,
    PistonParams,
    ReactionModel,
    ThermalOscillatorModel,
    ThermoPhaseState,
    TransferModel,
    temperature,
)

KINDS = ("piston", "oscillator", "transfer", "reaction", "nonholonomic")

_num = {"type": "number"}
_vec = {"type": "array", "items": _num}
_mat = {"type": "array", "items": _vec}
_num_or_mat = {"oneOf": [_num, _vec, _mat]}
_intmat = {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCENARIO_SCHEMA = _obj(
    {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "kind": {"enum": list(KINDS)},
        "model": {"type": "object"},
        "force": _obj({"constant": _vec, "amplitude": _vec, "omega": _num}, ["constant"]),
        "friction": _num_or_mat,
        "transfer": _obj({"G": _mat}, ["G"]),
        "reaction": _obj(
            {
                "species": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "nu_fwd": _intmat,
                "nu_bwd": _intmat,
                "masses": _vec,
                "rate_law": {
                    "oneOf": [
                        _obj({"type": {"const": "linear"}, "L": _num_or_mat}, ["type", "L"]),
                        _obj(
                            {"type": {"const": "mass_action"}, "k_fwd": _vec, "k_bwd": _vec},
                            ["type", "k_fwd", "k_bwd"],
                        ),
                    ]
                },
            },
            ["species", "nu_fwd", "nu_bwd", "masses", "rate_law"],
        ),
        "initial": _obj({"q": _vec, "p": _vec, "S": _num, "T": _num, "N": _vec, "W": _vec, "nu": _vec}),
        "integrator": _obj(
            {
                "method": {"enum": [m.value for m in Method]},
                "t_end": _num,
                "dt": _num,
                "rtol": _num,
                "atol": _num,
                "dt_min": _num,
                "dt_max": _num,
                "record_stride": {"type": "integer", "minimum": 1},
            }
        ),
        "checks": {"type": "object", "additionalProperties": {"oneOf": [_num, {"const": False}]}},
    },
    ["name", "kind", "initial"],
)

MODEL_SCHEMAS = {
    "piston": _obj({k: _num for k in ("m", "alpha", "N0", "cv", "R", "T0", "V0", "S0")}),
    "oscillator": _obj(
        {"mass": _num_or_mat, "stiffness": _num_or_mat, "q_rest": _vec, "heat_capacity": _num, "T0": _num, "S0": _num},
        ["mass", "stiffness"],
    ),
    "transfer": _obj(
        {"volumes": _vec, "cv": _num, "T0": _num, "s0": _num, "c0": _num, "mass": _num_or_mat, "stiffness": _num_or_mat},
        ["volumes"],
    ),
    "reaction": _obj(
        {
            "energy": {"enum": ["ideal", "linear"]},
            "volume": _num,
            "cv": _num,
            "T0": _num,
            "s0": _vec,
            "u": _vec,
            "c0": _num,
            "c": _num,
        }
    ),
    "nonholonomic": _obj({"m": _num, "inertia": _num, "g": _num, "incline": _num}),
}

# default tolerances, one entry per check the kind supports
CHECKS = {
    "piston": {
        "first_law": 1e-8,
        "first_law_quadrature": 1e-8,
        "second_law": 1e-10,
        "entropy_monotone": 1e-10,
        "entropy_rate": 1e-10,
        "lagrangian_oracle": 1e-7,
        "temperature_consistency": 1e-9,
        "equilibrium": False,
        "gradient": 1e-6,
    },
    "oscillator": {
        "first_law": 1e-8,
        "first_law_quadrature": 1e-8,
        "second_law": 1e-10,
        "entropy_monotone": 1e-10,
        "lagrangian_oracle": 1e-7,
        "temperature_consistency": 1e-9,
        "equilibrium": False,
        "gradient": 1e-6,
    },
    "transfer": {
        "first_law": 1e-8,
        "first_law_quadrature": 1e-8,
        "second_law": 1e-10,
        "entropy_monotone": 1e-10,
        "mole_conservation": 1e-12,
        "flux_antisymmetry": 0.0,
        "transfer_entropy": 1e-10,
        "equilibrium": 1e-6,
        "gradient": 1e-6,
    },
    "reaction": {
        "lavoisier": 1e-12,
        "mass_conservation": 1e-12,
        "energy_conservation": 1e-9,
        "second_law": 1e-10,
        "entropy_monotone": 1e-10,
        "equilibrium": 1e-6,
        "dirac_consistency": 1e-9,
        "primary_constraints": 1e-10,
        "multiplier_match": 1e-9,
        "gradient": 1e-6,
    },
    "nonholonomic": {
        "constraint_residual": 1e-9,
        "first_law": 1e-8,
        "reference": 1e-6,
    },
}

# checks that need extra integrations; skipped by sweeps
EXPENSIVE = {"lagrangian_oracle", "temperature_consistency", "dirac_consistency", "primary_constraints",
             "multiplier_match", "reference", "gradient"}


BUILTINS = {
    "piston": {
        "name": "piston",
        "description": "Ideal-gas piston expanding against friction, no external force",
        "kind": "piston",
        "model": {"m": 1.0, "alpha": 1e-3, "N0": 4e-3, "T0": 300.0, "V0": 1e-4, "S0": 0.0},
        "friction": 1.0,
        "initial": {"q": [0.1], "p": [0.0], "S": 0.0},
        "integrator": {"method": "EmbeddedAdaptive", "t_end": 10.0, "rtol": 1e-10, "atol": 1e-12, "dt": 1e-3},
    },
    "piston-forced": {
        "name": "piston-forced",
        "description": "Compressed piston relaxing against a constant ambient force",
        "kind": "piston",
        "model": {"m": 1.0, "alpha": 1e-3, "N0": 4e-3, "T0": 300.0, "V0": 1e-4, "S0": 0.0},
        "friction": 20.0,
        "force": {"constant": [-100.0]},
        "initial": {"q": [0.05], "p": [0.0], "S": 0.0},
        "integrator": {"method": "EmbeddedAdaptive", "t_end": 10.0, "rtol": 1e-10, "atol": 1e-12, "dt": 1e-3},
        "checks": {"first_law": 1e-7, "first_law_quadrature": 1e-7, "equilibrium": 1e-6},
    },
    "oscillator": {
        "name": "oscillator",
        "description": "Two-mode damped oscillator heating a body of constant heat capacity",
        "kind": "oscillator",
        "model": {"mass": [1.0, 2.0], "stiffness": [[4.0, 1.0], [1.0, 3.0]], "heat_capacity": 10.0, "T0": 300.0},
        "friction": [[0.3, 0.1], [-0.1, 0.2]],
        "initial": {"q": [1.0, -0.5], "p": [0.0, 0.3], "S": 0.0},
        "integrator": {"method": "EmbeddedAdaptive", "t_end": 20.0, "rtol": 1e-10, "atol": 1e-12, "dt": 1e-3},
    },
    "transfer-2c": {
        "name": "transfer-2c",
        "description": "Two gas compartments exchanging matter, plus a damped oscillator sharing the entropy",
        "kind": "transfer",
        "model": {"volumes": [1e-3, 1e-3], "T0": 300.0, "mass": [1.0], "stiffness": [4.0]},
        "friction": 0.5,
        "transfer": {"G": [[0.0, 1e-5], [1e-5, 0.0]]},
        "initial": {"q": [0.2], "p": [0.0], "N": [0.08, 0.02], "T": 300.0},
        "integrator": {"method": "EmbeddedAdaptive", "t_end": 100.0, "rtol": 1e-10, "atol": 1e-12, "dt": 1e-3},
    },
    "transfer-3c": {
        "name": "transfer-3c",
        "description": "Three compartments of different volume, purely thermodynamic",
        "kind": "transfer",
        "model": {"volumes": [1e-3, 2e-3, 5e-4], "T0": 300.0},
        "transfer": {"G": [[0.0, 1e-6, 2e-7], [1e-6, 0.0, 5e-7], [2e-7, 5e-7, 0.0]]},
        "initial": {"N": [0.05, 0.01, 0.03], "T": 300.0},
        "integrator": {"method": "EmbeddedAdaptive", "t_end": 100.0, "rtol": 1e-10, "atol": 1e-12, "dt": 1e-3},
    },
    "reaction-ab": {
        "name": "reaction-ab",
        "description": "Isomerisation A <=> B in a closed rigid vessel, linear rate law",
        "kind": "reaction",
        "model": {"energy": "ideal", "volume": 1e-3, "T0": 300.0, "s0": [0.0, 5.0], "u": [0.0, 500.0]},
        "reaction": {
            "species": ["A", "B"],
            "nu_fwd": [[1, 0]],
            "nu_bwd": [[0, 1]],
            "masses": [0.028, 0.028],
            "rate_law": {"type": "linear", "L": [[1e-6]]},
        },
        "initial": {"N": [0.05, 0.005], "T": 300.0},
        "integrator": {"method": "EmbeddedAdaptive", "t_end": 100.0, "rtol": 1e-10, "atol": 1e-12, "dt": 1e-3},
    },
    "reaction-2a-b": {
        "name": "reaction-2a-b",
        "description": "Dimerisation 2A <=> B with m_B = 2 m_A, linear rate law",
        "kind": "reaction",
        "model": {"energy": "ideal", "volume": 1e-3, "T0": 300.0, "s0": [0.0, 0.0], "u": [0.0, -2000.0]},
        "reaction": {
            "species": ["A", "B"],
            "nu_fwd": [[2, 0]],
            "nu_bwd": [[0, 1]],
            "masses": [0.014, 0.028],
            "rate_law": {"type": "linear", "L": [[2e-7]]},
        },
        "initial": {"N": [0.05, 0.01], "T": 300.0},
        "integrator": {"method": "EmbeddedAdaptive", "t_end": 100.0, "rtol": 1e-10, "atol": 1e-12, "dt": 1e-3},
    },
    "skate": {
        "name": "skate",
        "description": "Knife edge on an inclined plane (linear nonholonomic calibration)",
        "kind": "nonholonomic",
        "model": {"m": 1.0, "inertia": 1.0, "g": 9.81, "incline": 0.3},
        "initial": {"q": [0.0, 0.0, 0.0], "p": [0.0, 0.0, 1.0]},
        "integrator": {"method": "EmbeddedAdaptive", "t_end": 10.0, "rtol": 1e-12, "atol": 1e-14, "dt": 1e-3},
    },
}


def builtin_names() -> list:
    return list(BUILTINS)


def load_scenario(source) -> dict:
    """Scenario dict from a built-in name, a JSON file path or a dict; validated."""
    if isinstance(source, dict):
        data = copy.deepcopy(source)
    elif str(source) in BUILTINS:
        data = copy.deepcopy(BUILTINS[str(source)])
    else:
        path = Path(source)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"no such scenario file or built-in: {source}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    validate(data)
    return data


def validate(data: dict) -> None:
    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
        jsonschema.validate(data.get("model", {}), MODEL_SCHEMAS[data["kind"]])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"scenario schema error at {where}: {exc.message}") from None
    unknown = set(data.get("checks", {})) - set(CHECKS[data["kind"]])
    if unknown:
        raise ConfigError(f"unknown checks for kind {data['kind']!r}: {sorted(unknown)}")


def config_hash(data: dict) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def set_path(data: dict, path: str, value) -> dict:
    """Copy of ``data`` with the dotted ``path`` set to ``value``."""
    out = copy.deepcopy(data)
    node = out
    keys = path.split(".")
    for key in keys[:-1]:
        if isinstance(node, list):
            node = node[int(key)]
        else:
            node = node.setdefault(key, {})
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return out


# ---------------------------------------------------------------------------
# building
# ---------------------------------------------------------------------------


@dataclass
class Built:
    data: dict
    system: object
    state0: ThermoPhaseState
    config: IntegratorConfig
    network: Optional[ReactionNetwork] = None


def _force(data, n):
    f = data.get("force")
    external = None
    if f is not None:
        external = HarmonicDrive(f["constant"], f.get("amplitude"), f.get("omega", 0.0))
        if external.constant.size != n:
            raise ConfigError(f"force has {external.constant.size} components, system has n={n}")
    return ForceField(n=n, external=external, friction=data.get("friction"))


def skate_model(m=1.0, inertia=1.0, g=9.81, incline=0.3):
    """Knife edge on an incline: q = (x, y, phi), x pointing down the slope."""
    pull = m * g * np.sin(incline)
    model = NonholonomicModel(
        [m, m, inertia],
        potential=lambda q: -pull * q[0],
        potential_grad=lambda q: np.array([-pull, 0.0, 0.0]),
    )

    def omega(q):
        return np.array([[np.sin(q[2]), -np.cos(q[2]), 0.0]])

    def domega(q):
        d = np.zeros((1, 3, 3))
        d[0, 0, 2] = np.cos(q[2])
        d[0, 1, 2] = np.sin(q[2])
        return d

    return model, LinearConstraintSet(omega, domega, m=1, n=3)


def skate_reference(model_params: dict, q0, p0, times) -> np.ndarray:
    """Textbook knife-edge equations integrated independently at high accuracy.

    Reduced variables (x, y, phi, s, w) with forward speed s and spin w:
    x' = s cos phi, y' = s sin phi, phi' = w, s' = g sin(incline) cos phi, w' = 0.
    Returns packed (q, p, S=0) rows at ``times``.
    """
    m, J = model_params.get("m", 1.0), model_params.get("inertia", 1.0)
    g, inc = model_params.get("g", 9.81), model_params.get("incline", 0.3)
    x, y, phi = q0
    s = (p0[0] * np.cos(phi) + p0[1] * np.sin(phi)) / m
    w = p0[2] / J

    def f(t, z):
        return [z[3] * np.cos(z[2]), z[3] * np.sin(z[2]), z[4], g * np.sin(inc) * np.cos(z[2]), 0.0]

    sol = solve_ivp(f, (times[0], times[-1]), [x, y, phi, s, w], method="DOP853", t_eval=times, rtol=1e-13, atol=1e-14)
    z = sol.y.T
    return np.column_stack(
        [z[:, 0], z[:, 1], z[:, 2], m * z[:, 3] * np.cos(z[:, 2]), m * z[:, 3] * np.sin(z[:, 2]), J * z[:, 4], np.zeros(len(z))]
    )


def _integrator(data, overrides) -> IntegratorConfig:
    cfg = dict(data.get("integrator", {}))
    cfg.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return IntegratorConfig(**cfg)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def build(data: dict, overrides: Optional[dict] = None) -> Built:
    """Construct system, initial state and integrator config; raises ConfigError."""
    try:
        return _build(data, overrides)
    except ConfigError:
        raise
    except (ThermoError, ValueError) as exc:
        raise ConfigError(f"{data.get('name', '?')}: {exc}") from None


def _build(data, overrides):
    kind = data["kind"]
    mp = data.get("model", {})
    init = data["initial"]
    network = None
    if kind == "piston":
        params = PistonParams(**mp, r=0.0)
        model = PistonModel(params)
        S = init.get("S", params.S0)
        state0 = ThermoPhaseState(q=init.get("q", [params.V0 / params.alpha]), p=init.get("p", [0.0]), S=S)
        system = FrictionSystem(model, _force(data, 1))
    elif kind == "oscillator":
        model = ThermalOscillatorModel(**mp)
        state0 = ThermoPhaseState(q=init.get("q", np.zeros(model.n)), p=init.get("p", np.zeros(model.n)), S=init.get("S", model.S0))
        system = FrictionSystem(model, _force(data, model.n))
    elif kind == "transfer":
        gas = IdealMixtureEnergy(
            mp["volumes"], cv=mp.get("cv", 1.5 * GAS_CONSTANT), T0=mp.get("T0", 300.0), s0=mp.get("s0", 0.0), c0=mp.get("c0", 1.0)
        )
        model = TransferModel(gas, mass=mp.get("mass", ()), stiffness=mp.get("stiffness", ()))
        N = np.asarray(init["N"], dtype=float)
        S = init["S"] if "S" in init else gas.entropy_at(N, init.get("T", gas.T0))
        n = model.n
        state0 = ThermoPhaseState(q=init.get("q", np.zeros(n)), p=init.get("p", np.zeros(n)), S=S, N=N, W=init.get("W", ()))
        if "transfer" not in data:
            raise ConfigError("transfer scenarios need a 'transfer' block")
        system = TransferSystem(model, _force(data, n), TransferNetwork(data["transfer"]["G"], model.K))
    elif kind == "reaction":
        rx = data.get("reaction")
        if rx is None:
            raise ConfigError("reaction scenarios need a 'reaction' block")
        R = len(rx["species"])
        if mp.get("energy", "ideal") == "linear":
            energy = LinearEnergy(mp.get("u", np.zeros(R)), mp.get("c", 300.0))
        else:
            energy = IdealMixtureEnergy(
                np.full(R, mp.get("volume", 1e-3)), cv=mp.get("cv", 1.5 * GAS_CONSTANT), T0=mp.get("T0", 300.0),
                s0=mp.get("s0", 0.0), u=mp.get("u", 0.0), c0=mp.get("c0", 1.0),
            )
        law = rx["rate_law"]
        if law["type"] == "linear":
            rate_law = LinearRateLaw(law["L"])
        else:
            rate_law = MassActionRateLaw(law["k_fwd"], law["k_bwd"], mp.get("volume", 1e-3))
        network = ReactionNetwork(rx["species"], rx["nu_fwd"], rx["nu_bwd"], rx["masses"], rate_law)
        model = ReactionModel(energy)
        N = np.asarray(init["N"], dtype=float)
        if "S" in init:
            S = init["S"]
        elif isinstance(energy, IdealMixtureEnergy):
            S = energy.entropy_at(N, init.get("T", energy.T0))
        else:
            S = 0.0
        state0 = ThermoPhaseState(S=S, N=N, W=init.get("W", ()), nu=init.get("nu", np.zeros(network.r)))
        system = ReactionSystem(network, model)
    elif kind == "nonholonomic":
        model, constraints = skate_model(**mp)
        state0 = ThermoPhaseState(q=init.get("q", np.zeros(3)), p=init.get("p", np.zeros(3)))
        system = NonholonomicSystem(model, constraints)
    else:  # pragma: no cover - schema guards this
        raise ConfigError(f"unknown kind {kind}")
    # domain validation of the initial state
    system.pack(state0)
    model.energy(state0)
    if kind != "nonholonomic":
        temperature(model, state0)
    else:
        res = np.max(np.abs(system.constraints.residual(state0.q, model.partials(state0).dHdp)))
        if res > 1e-12:
            raise ConfigError(f"initial velocity violates the nonholonomic constraint (residual {res:.3g})")
    return Built(data, system, state0, _integrator(data, overrides), network)


# ---------------------------------------------------------------------------
# running and checking
# ---------------------------------------------------------------------------


def enabled_checks(data: dict, skip_expensive: bool = False) -> dict:
    checks = dict(CHECKS[data["kind"]])
    checks.update(data.get("checks", {}))
    if data["kind"] == "oscillator" or data["kind"] == "piston":
        if not is_isolated(data):
            checks.pop("entropy_monotone", None)
    return {k: v for k, v in checks.items() if v is not False and not (skip_expensive and k in EXPENSIVE)}


def is_isolated(data) -> bool:
    f = data.get("force")
    return f is None or not (any(f.get("constant", [])) or any(f.get("amplitude", []) or []))


@dataclass
class RunResult:
    built: Built
    trajectory: Optional[Trajectory]
    report: dg.DiagnosticsReport


def run_checks(built: Built, traj: Trajectory, seed: int = 0, skip_expensive: bool = False) -> dg.DiagnosticsReport:
    data = built.data
    report = dg.DiagnosticsReport(data["name"], config_hash(data), aborted=traj.aborted)
    if traj.aborted:
        return report
    system, cfg = built.system, built.config
    for name, tol in enabled_checks(data, skip_expensive).items():
        tol = float(tol)
        if name == "first_law":
            report.add(name, dg.first_law_residual(traj) / abs(traj["H"][0]), tol, "relative to |H(0)|")
        elif name == "first_law_quadrature":
            report.add(name, dg.quadrature_self_check(traj) / abs(traj["H"][0]), tol, "Richardson estimate of the quadrature error / |H(0)|")
        elif name == "second_law":
            report.add(name, dg.second_law_residual(traj), tol, f"min sigma = {dg.second_law_check(traj):.6g}")
        elif name == "entropy_monotone":
            report.add(name, dg.entropy_decrease(traj), tol)
        elif name == "entropy_rate":
            report.add(name, dg.entropy_rate_closed_form(traj), tol, "|S' - r p^2/(m^2 T)| scaled")
        elif name == "lagrangian_oracle":
            cmp = dg.lagrangian_oracle_compare(system, built.state0, cfg)
            report.add(name, cmp.deviation, tol, "scaled (q, p, S) deviation")
            if "temperature_consistency" in enabled_checks(data, skip_expensive):
                report.add("temperature_consistency", cmp.temperature_mismatch, float(enabled_checks(data)["temperature_consistency"]))
        elif name == "temperature_consistency":
            continue  # reported together with the oracle
        elif name == "equilibrium":
            v = dg.equilibrium_check(traj, tol)
            report.add(name, v.residual, tol, v.description)
        elif name == "gradient":
            report.add(name, dg.gradient_check(system.model, np.random.default_rng(seed)), tol, f"100 random states, seed {seed}")
        elif name == "mole_conservation":
            report.add(name, dg.conservation_check(traj)["moles"], tol, "absolute (mol)")
        elif name == "flux_antisymmetry":
            report.add(name, dg.flux_antisymmetry(traj), tol)
        elif name == "transfer_entropy":
            report.add(name, dg.transfer_entropy_term(traj), tol)
        elif name == "lavoisier":
            report.add(name, float(np.max(np.abs(built.network.lavoisier_residuals()))), tol)
        elif name == "mass_conservation":
            report.add(name, dg.conservation_check(traj)["mass"], tol, "absolute (kg)")
        elif name == "energy_conservation":
            report.add(name, dg.energy_drift(traj), tol, "relative to |U(0)|")
        elif name in ("dirac_consistency", "primary_constraints", "multiplier_match"):
            if name == "dirac_consistency" or not any(c.name == "dirac_consistency" for c in report.checks):
                cmp = dg.dirac_consistency(system, built.state0, cfg)
                checks = enabled_checks(data, skip_expensive)
                for key, val in (
                    ("dirac_consistency", cmp.deviation),
                    ("primary_constraints", cmp.phi_max),
                    ("multiplier_match", cmp.multiplier_mismatch),
                ):
                    if key in checks and not any(c.name == key for c in report.checks):
                        report.add(key, val, float(checks[key]))
        elif name == "constraint_residual":
            report.add(name, float(np.max(traj["constraint_residual"])), tol)
        elif name == "reference":
            times = np.linspace(0.0, cfg.t_end, 101) + built.state0.t
            got = integrate_at(system, built.state0, times, cfg)
            ref = skate_reference(data.get("model", {}), built.state0.q, built.state0.p, times)
            report.add(name, dg.scaled_deviation(got, ref), tol, "scaled deviation from fine-step textbook solution")
    return report


def run(source, overrides: Optional[dict] = None, seed: int = 0, skip_expensive: bool = False) -> RunResult:
    data = load_scenario(source)
    built = build(data, overrides)
    traj = integrate(built.system, built.state0, built.config)
    return RunResult(built, traj, run_checks(built, traj, seed, skip_expensive))
