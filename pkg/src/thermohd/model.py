"""State types, Hamiltonian models, forces and constraint data.

Every object here is an immutable value: models and force fields can be
shared between threads and between concurrently running scenarios.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    IndefiniteCoefficient,
    NonPositiveTemperature,
    SingularMultiplierSystem,
)

GAS_CONSTANT = 8.314462618  # J/(mol K)
PSD_SLACK = 1e-12


def _vec(x) -> np.ndarray:
    a = np.array(x, dtype=float).reshape(-1)
    a.flags.writeable = False
    return a


def _mat(x, n: int) -> np.ndarray:
    """Coerce a scalar, vector (diagonal) or matrix into an (n, n) array."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a * np.eye(n)
    elif a.ndim == 1:
        a = np.diag(a)
    if a.shape != (n, n):
        raise DimensionMismatch(f"expected a {n}x{n} matrix, got shape {a.shape}")
    a = a.copy()
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThermoPhaseState:
    """Phase-space point of a simple adiabatically closed system.

    ``q``/``p`` are the mechanical coordinates and momenta, ``S`` the single
    entropy, ``N`` mole numbers with their thermodynamic displacements ``W``
    (primitives of the chemical potentials), and ``nu`` the reaction
    displacements whose rates are minus the affinities.
    """

    q: np.ndarray = field(default_factory=lambda: _vec(()))
    p: np.ndarray = field(default_factory=lambda: _vec(()))
    S: float = 0.0
    N: np.ndarray = field(default_factory=lambda: _vec(()))
    W: np.ndarray = field(default_factory=lambda: _vec(()))
    nu: np.ndarray = field(default_factory=lambda: _vec(()))
    t: float = 0.0

    def __post_init__(self):
        for name in ("q", "p", "N", "W", "nu"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        object.__setattr__(self, "S", float(self.S))
        object.__setattr__(self, "t", float(self.t))
        if self.q.size != self.p.size:
            raise DimensionMismatch(f"dim(q)={self.q.size} but dim(p)={self.p.size}")
        if self.W.size and self.W.size != self.N.size:
            raise DimensionMismatch(f"dim(N)={self.N.size} but dim(W)={self.W.size}")
        if not self.W.size and self.N.size:
            object.__setattr__(self, "W", _vec(np.zeros(self.N.size)))
        if not np.isfinite(self.S):
            raise DomainError("entropy is not finite")
        if np.any(self.N < 0):
            raise DomainError(f"negative mole number in N={self.N.tolist()}")

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def K(self) -> int:
        return self.N.size

    @property
    def r(self) -> int:
        return self.nu.size

    def replace(self, **changes) -> "ThermoPhaseState":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class StateRates:
    """Time derivatives of the components of a ThermoPhaseState."""

    dq: np.ndarray
    dp: np.ndarray
    dS: float
    dN: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dW: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dnu: np.ndarray = field(default_factory=lambda: np.zeros(0))


class Partials(NamedTuple):
    dHdq: np.ndarray
    dHdp: np.ndarray
    dHdS: float
    dHdN: np.ndarray


# ---------------------------------------------------------------------------
# Hamiltonian models
# ---------------------------------------------------------------------------


class ModelKind(str, Enum):
    SIMPLE_FRICTION = "SimpleFriction"
    MASS_TRANSFER = "MassTransfer"
    REACTION_NETWORK = "ReactionNetwork"
    LINEAR_NONHOLONOMIC = "LinearNonholonomic"


class HamiltonianModel:
    """Evaluation contract: total energy plus its exact partial derivatives.

    Subclasses set ``kind``, ``n`` (mechanical dimension) and ``K`` (number of
    mole numbers) and implement ``energy`` and ``partials``.
    """

    kind: ModelKind
    n: int = 0
    K: int = 0

    def check_dims(self, state: ThermoPhaseState) -> None:
        if state.n != self.n or state.K != self.K:
            raise DimensionMismatch(
                f"{type(self).__name__} expects n={self.n}, K={self.K}; "
                f"got n={state.n}, K={state.K}"
            )

    def energy(self, state: ThermoPhaseState) -> float:
        raise NotImplementedError

    def partials(self, state: ThermoPhaseState) -> Partials:
        raise NotImplementedError

    def sample_state(self, rng: np.random.Generator) -> ThermoPhaseState:
        """Random admissible state, used by the finite-difference suites."""
        raise NotImplementedError


@dataclass(frozen=True)
class PistonParams:
    m: float = 1.0  # kg
    alpha: float = 1e-3  # m^2
    N0: float = 4e-3  # mol
    cv: float = 1.5 * GAS_CONSTANT  # J/(mol K)
    R: float = GAS_CONSTANT
    T0: float = 300.0  # K
    V0: float = 1e-4  # m^3
    S0: float = 0.0  # J/K
    r: float = 1.0  # kg/s

    def __post_init__(self):
        for name in ("m", "alpha", "N0", "cv", "R", "T0", "V0"):
            if not getattr(self, name) > 0:
                raise DomainError(f"piston parameter {name} must be positive")
        if self.r < 0:
            raise IndefiniteCoefficient("piston friction coefficient r must be >= 0")


class PistonModel(HamiltonianModel):
    """Ideal gas (constant c_v) under a piston: H = p^2/2m + U(q, S).

    U = N0 c_v T with T = T0 (V0/(alpha q))^(R/c_v) exp((S - S0)/(N0 c_v)).
    """

    kind = ModelKind.SIMPLE_FRICTION
    n = 1
    K = 0

    def __init__(self, params: PistonParams = PistonParams()):
        self.params = params

    def gas_temperature(self, q: float, S: float) -> float:
        P = self.params
        if not q > 0:
            raise DomainError(f"piston position must be positive, got q={q}")
        return P.T0 * (P.V0 / (P.alpha * q)) ** (P.R / P.cv) * np.exp((S - P.S0) / (P.N0 * P.cv))

    def internal_energy(self, q: float, S: float) -> float:
        return self.params.N0 * self.params.cv * self.gas_temperature(q, S)

    def pressure(self, q: float, S: float) -> float:
        P = self.params
        return P.N0 * P.R * self.gas_temperature(q, S) / (P.alpha * q)

    def energy(self, state):
        self.check_dims(state)
        q, p = state.q[0], state.p[0]
        return 0.5 * p * p / self.params.m + self.internal_energy(q, state.S)

    def partials(self, state):
        self.check_dims(state)
        P = self.params
        q, p = state.q[0], state.p[0]
        T = self.gas_temperature(q, state.S)
        # dU/dq = -(R/c_v) U / q = -N0 R T / q
        dUdq = -P.N0 * P.R * T / q
        return Partials(np.array([dUdq]), np.array([p / P.m]), T, np.zeros(0))

    def sample_state(self, rng):
        P = self.params
        q0 = P.V0 / P.alpha
        return ThermoPhaseState(
            q=[q0 * rng.uniform(0.2, 5.0)],
            p=[rng.normal(0.0, 2.0) * P.m],
            S=P.S0 + rng.uniform(-1.0, 1.0) * P.N0 * P.cv,
        )


class ThermalOscillatorModel(HamiltonianModel):
    """n-dimensional oscillator coupled to a heat-storing body.

    H = 1/2 p^T M^-1 p + 1/2 (q - q_rest)^T K (q - q_rest) + C T0 exp((S - S0)/C)
    so that T = T0 exp((S - S0)/C) for a body of constant heat capacity C.
    """

    kind = ModelKind.SIMPLE_FRICTION
    K = 0

    def __init__(self, mass, stiffness, q_rest=None, heat_capacity=1.0, T0=300.0, S0=0.0):
        mass = np.asarray(mass, dtype=float)
        self.n = 1 if mass.ndim == 0 else mass.shape[0]
        self.mass = _mat(mass, self.n)
        self.mass_inv = np.linalg.inv(self.mass)
        self.stiffness = _mat(stiffness, self.n)
        self.q_rest = _vec(np.zeros(self.n) if q_rest is None else q_rest)
        if self.q_rest.size != self.n:
            raise DimensionMismatch("q_rest has the wrong length")
        if not (heat_capacity > 0 and T0 > 0):
            raise DomainError("heat_capacity and T0 must be positive")
        self.heat_capacity = float(heat_capacity)
        self.T0 = float(T0)
        self.S0 = float(S0)

    def body_temperature(self, S: float) -> float:
        return self.T0 * np.exp((S - self.S0) / self.heat_capacity)

    def potential(self, q) -> float:
        d = np.asarray(q) - self.q_rest
        return 0.5 * d @ self.stiffness @ d

    def energy(self, state):
        self.check_dims(state)
        p = state.p
        kinetic = 0.5 * p @ self.mass_inv @ p
        return kinetic + self.potential(state.q) + self.heat_capacity * self.body_temperature(state.S)

    def partials(self, state):
        self.check_dims(state)
        d = state.q - self.q_rest
        dHdq = 0.5 * (self.stiffness + self.stiffness.T) @ d
        dHdp = self.mass_inv @ state.p
        return Partials(dHdq, dHdp, self.body_temperature(state.S), np.zeros(0))

    def sample_state(self, rng):
        return ThermoPhaseState(
            q=self.q_rest + rng.normal(0.0, 1.0, self.n),
            p=rng.normal(0.0, 1.0, self.n),
            S=self.S0 + rng.uniform(-1.0, 1.0) * self.heat_capacity,
        )


class IdealMixtureEnergy:
    """Internal energy U(N, S) of ideal-gas pools sharing one temperature.

    Each pool k holds N_k moles in volume V_k (use one shared volume for a
    reacting mixture, one volume per compartment for transfer systems)::

        T = T0 exp((S - sum_k N_k sigma_k) / (c_v N)),  N = sum_k N_k
        sigma_k = s0_k - R ln(N_k / (V_k c0))
        U = sum_k N_k u_k + c_v N T

    so that dU/dS = T and
    mu_k = u_k + T (c_v + R - s0_k + R ln(N_k/(V_k c0)) - c_v ln(T/T0)).
    """

    def __init__(self, volumes, cv=1.5 * GAS_CONSTANT, T0=300.0, s0=0.0, u=0.0, c0=1.0, R=GAS_CONSTANT):
        self.volumes = _vec(volumes)
        K = self.volumes.size
        self.K = K
        self.s0 = _vec(np.broadcast_to(np.asarray(s0, dtype=float), (K,)))
        self.u = _vec(np.broadcast_to(np.asarray(u, dtype=float), (K,)))
        self.cv, self.T0, self.c0, self.R = float(cv), float(T0), float(c0), float(R)
        if np.any(self.volumes <= 0) or not (cv > 0 and T0 > 0 and c0 > 0):
            raise DomainError("volumes, cv, T0 and c0 must be positive")

    def _log_conc(self, N):
        N = np.asarray(N, dtype=float)
        if N.size != self.K:
            raise DimensionMismatch(f"expected {self.K} mole numbers, got {N.size}")
        if np.any(N <= 0):
            raise DomainError(f"mole numbers must be positive, got {N.tolist()}")
        return np.log(N / (self.volumes * self.c0))

    def temperature(self, N, S) -> float:
        lc = self._log_conc(N)
        N = np.asarray(N, dtype=float)
        ntot = N.sum()
        return self.T0 * np.exp((S - N @ (self.s0 - self.R * lc)) / (self.cv * ntot))

    def entropy_at(self, N, T) -> float:
        """Entropy giving temperature T at mole numbers N (inverse of ``temperature``)."""
        N = np.asarray(N, dtype=float)
        lc = self._log_conc(N)
        return N @ (self.s0 - self.R * lc) + self.cv * N.sum() * np.log(T / self.T0)

    def value(self, N, S) -> float:
        N = np.asarray(N, dtype=float)
        return N @ self.u + self.cv * N.sum() * self.temperature(N, S)

    def partials(self, N, S):
        """Return (dU/dN, dU/dS)."""
        lc = self._log_conc(N)
        T = self.temperature(N, S)
        mu = self.u + T * (self.cv + self.R - self.s0 + self.R * lc - self.cv * np.log(T / self.T0))
        return mu, T

    def sample(self, rng, scale=1.0):
        return scale * rng.uniform(0.2, 2.0, self.K)


class LinearEnergy:
    """U(N, S) = sum_I N_I u_I + c S (constant chemical potentials and temperature)."""

    def __init__(self, u, c):
        self.u = _vec(u)
        self.K = self.u.size
        self.c = float(c)

    def value(self, N, S):
        N = np.asarray(N, dtype=float)
        if N.size != self.K:
            raise DimensionMismatch(f"expected {self.K} mole numbers, got {N.size}")
        return float(N @ self.u + self.c * S)

    def partials(self, N, S):
        return self.u.copy(), self.c

    def temperature(self, N, S):
        return self.c

    def sample(self, rng, scale=1.0):
        return scale * rng.uniform(0.2, 2.0, self.K)


class TransferModel(HamiltonianModel):
    """Optional mechanical oscillator plus K gas compartments with one entropy.

    H(q, p, S, N) = 1/2 p^T M^-1 p + 1/2 q^T K_s q + U(N, S).
    """

    kind = ModelKind.MASS_TRANSFER

    def __init__(self, gas: IdealMixtureEnergy, mass=(), stiffness=()):
        self.gas = gas
        self.K = gas.K
        mass = np.asarray(mass, dtype=float)
        self.n = mass.size if mass.ndim <= 1 else mass.shape[0]
        self.mass = _mat(mass, self.n) if self.n else np.zeros((0, 0))
        self.mass_inv = np.linalg.inv(self.mass) if self.n else np.zeros((0, 0))
        self.stiffness = _mat(stiffness, self.n) if self.n else np.zeros((0, 0))

    def energy(self, state):
        self.check_dims(state)
        q, p = state.q, state.p
        mech = 0.5 * p @ self.mass_inv @ p + 0.5 * q @ self.stiffness @ q
        return float(mech + self.gas.value(state.N, state.S))

    def partials(self, state):
        self.check_dims(state)
        mu, T = self.gas.partials(state.N, state.S)
        dHdq = 0.5 * (self.stiffness + self.stiffness.T) @ state.q
        return Partials(dHdq, self.mass_inv @ state.p, T, mu)

    def sample_state(self, rng):
        N = self.gas.sample(rng, scale=0.05)
        return ThermoPhaseState(
            q=rng.normal(0.0, 0.1, self.n),
            p=rng.normal(0.0, 0.1, self.n),
            S=self.gas.entropy_at(N, rng.uniform(200.0, 400.0)),
            N=N,
        )


class ReactionModel(HamiltonianModel):
    """Totally degenerate case: H is the internal energy U(N, S), independent of p."""

    kind = ModelKind.REACTION_NETWORK
    n = 0

    def __init__(self, energy):
        self.internal = energy
        self.K = energy.K

    def energy(self, state):
        self.check_dims(state)
        return float(self.internal.value(state.N, state.S))

    def partials(self, state):
        self.check_dims(state)
        mu, T = self.internal.partials(state.N, state.S)
        return Partials(np.zeros(0), np.zeros(0), float(T), np.asarray(mu, dtype=float))

    def sample_state(self, rng):
        N = self.internal.sample(rng, scale=0.05)
        if isinstance(self.internal, IdealMixtureEnergy):
            S = self.internal.entropy_at(N, rng.uniform(200.0, 400.0))
        else:
            S = rng.uniform(-1.0, 1.0)
        return ThermoPhaseState(S=S, N=N, nu=())


class NonholonomicModel(HamiltonianModel):
    """Purely mechanical H(q, p) = 1/2 p^T M^-1 p + V(q); the entropy slot is unused."""

    kind = ModelKind.LINEAR_NONHOLONOMIC
    K = 0

    def __init__(self, mass, potential: Callable, potential_grad: Callable):
        mass = np.asarray(mass, dtype=float)
        self.n = 1 if mass.ndim == 0 else mass.shape[0]
        self.mass = _mat(mass, self.n)
        self.mass_inv = np.linalg.inv(self.mass)
        self.potential = potential
        self.potential_grad = potential_grad

    def energy(self, state):
        self.check_dims(state)
        return float(0.5 * state.p @ self.mass_inv @ state.p + self.potential(state.q))

    def partials(self, state):
        self.check_dims(state)
        return Partials(np.asarray(self.potential_grad(state.q), dtype=float), self.mass_inv @ state.p, 0.0, np.zeros(0))

    def hess_pp(self, state):
        return self.mass_inv

    def hess_pq(self, state):
        return np.zeros((self.n, self.n))

    def sample_state(self, rng):
        return ThermoPhaseState(q=rng.normal(0.0, 1.0, self.n), p=rng.normal(0.0, 1.0, self.n))


class CallbackModel(HamiltonianModel):
    """User-supplied Hamiltonian honouring the evaluation contract.

    ``energy_fn(state) -> float`` and ``partials_fn(state) -> Partials``.
    """

    def __init__(self, kind: ModelKind, n: int, K: int, energy_fn, partials_fn, sampler=None):
        self.kind = ModelKind(kind)
        self.n, self.K = n, K
        self._energy, self._partials, self._sampler = energy_fn, partials_fn, sampler

    def energy(self, state):
        self.check_dims(state)
        return float(self._energy(state))

    def partials(self, state):
        self.check_dims(state)
        return Partials(*self._partials(state))

    def sample_state(self, rng):
        if self._sampler is None:
            raise NotImplementedError("no sampler supplied")
        return self._sampler(rng)


def eval_hamiltonian(model: HamiltonianModel, state: ThermoPhaseState) -> float:
    return float(model.energy(state))


def eval_partials(model: HamiltonianModel, state: ThermoPhaseState) -> Partials:
    return model.partials(state)


def temperature(model: HamiltonianModel, state: ThermoPhaseState) -> float:
    """T = dH/dS, required to be strictly positive."""
    T = float(model.partials(state).dHdS)
    if not T > 0:
        raise NonPositiveTemperature(f"dH/dS = {T} at t={state.t}")
    return T


# ---------------------------------------------------------------------------
# forces
# ---------------------------------------------------------------------------


def check_psd(matrix, slack: float = PSD_SLACK, what: str = "coefficient matrix") -> None:
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    if a.size == 0:
        return
    lo = np.linalg.eigvalsh(0.5 * (a + a.T)).min()
    if lo < -slack:
        raise IndefiniteCoefficient(f"symmetric part of {what} has eigenvalue {lo:.3e} < -{slack:g}")


@dataclass(frozen=True)
class HarmonicDrive:
    """External force F(t) = constant + amplitude sin(omega t), one entry per coordinate."""

    constant: np.ndarray
    amplitude: Optional[np.ndarray] = None
    omega: float = 0.0

    def __post_init__(self):
        c = _vec(self.constant)
        a = _vec(np.zeros_like(c) if self.amplitude is None else self.amplitude)
        if a.size != c.size:
            raise DimensionMismatch("amplitude and constant must have the same length")
        object.__setattr__(self, "constant", c)
        object.__setattr__(self, "amplitude", a)
        object.__setattr__(self, "omega", float(self.omega))

    def __call__(self, t: float, state=None) -> np.ndarray:
        return self.constant + self.amplitude * np.sin(self.omega * t)

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.constant) or np.any(self.amplitude))


FrictionSpec = Union[None, float, np.ndarray, Callable]


@dataclass(frozen=True)
class ForceField:
    """External force plus linear friction F_fr = -r(q, S) dH/dp.

    ``external`` is a callable ``(t, state) -> covector`` (None means zero).
    ``friction`` is a constant matrix/scalar or a callable ``(q, S) -> matrix``;
    constant matrices are PSD-checked here, callables at every evaluation.
    """

    n: int
    external: Optional[Callable] = None
    friction: FrictionSpec = None

    def __post_init__(self):
        if self.friction is not None and not callable(self.friction):
            r = _mat(self.friction, self.n)
            check_psd(r, what="friction matrix r")
            object.__setattr__(self, "friction", r)

    def external_force(self, state: ThermoPhaseState) -> np.ndarray:
        if self.external is None:
            return np.zeros(self.n)
        f = np.asarray(self.external(state.t, state), dtype=float).reshape(-1)
        if f.size != self.n:
            raise DimensionMismatch(f"external force has length {f.size}, expected {self.n}")
        return f

    def friction_matrix(self, state: ThermoPhaseState) -> np.ndarray:
        if self.friction is None:
            return np.zeros((self.n, self.n))
        if callable(self.friction):
            r = _mat(self.friction(state.q, state.S), self.n)
            check_psd(r, what="friction matrix r")
            return r
        return self.friction

    @property
    def is_isolated(self) -> bool:
        if self.external is None:
            return True
        return isinstance(self.external, HarmonicDrive) and self.external.is_zero


def friction_covector(force: ForceField, model: HamiltonianModel, state: ThermoPhaseState) -> np.ndarray:
    """F_fr_i = -sum_j r_ij dH/dp_j."""
    dHdp = model.partials(state).dHdp
    return -force.friction_matrix(state) @ dHdp


# ---------------------------------------------------------------------------
# constraints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThermoVariationalConstraint:
    """Codimension-one constraint of thermodynamic type at one state.

    Variational form: -T dS = <F_fr, dq> + <flux, dW>, where ``flux[k]`` is
    the net molar inflow sum_l J^{l->k}. The kinematic (phenomenological)
    constraint is the same relation evaluated on velocities.
    """

    entropy_coefficient: float
    friction: np.ndarray
    flux: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def at(cls, model: HamiltonianModel, force: Optional[ForceField], state: ThermoPhaseState, flux=None):
        T = temperature(model, state)
        fr = friction_covector(force, model, state) if force is not None else np.zeros(state.n)
        return cls(-T, fr, np.zeros(0) if flux is None else np.asarray(flux, dtype=float))

    def variational_residual(self, dq, dS, dW=None) -> float:
        res = self.entropy_coefficient * dS - np.dot(self.friction, dq)
        if self.flux.size:
            res -= np.dot(self.flux, dW)
        return float(res)

    def kinematic_residual(self, rates: StateRates) -> float:
        return self.variational_residual(rates.dq, rates.dS, rates.dW)

    def solve_entropy_rate(self, dq, dW=None) -> float:
        """Eliminate the entropy direction: the coefficient -T is nonzero."""
        rhs = np.dot(self.friction, dq)
        if self.flux.size:
            rhs += np.dot(self.flux, dW)
        return float(rhs / self.entropy_coefficient)


@dataclass(frozen=True)
class LinearConstraintSet:
    """Linear nonholonomic constraints <omega^r(q), v> = 0, r = 1..m < n.

    ``omega(q)`` returns the (m, n) coefficient matrix, ``domega(q)`` the
    (m, n, n) array of derivatives d omega^r_i / d q^j.
    """

    omega: Callable
    domega: Callable
    m: int
    n: int

    def __post_init__(self):
        if not 0 < self.m < self.n:
            raise DimensionMismatch(f"need 0 < m < n, got m={self.m}, n={self.n}")

    def matrix(self, q) -> np.ndarray:
        w = np.asarray(self.omega(q), dtype=float).reshape(self.m, self.n)
        if np.linalg.matrix_rank(w) < self.m:
            raise SingularMultiplierSystem(f"constraint one-forms are rank deficient at q={np.asarray(q).tolist()}")
        return w

    def derivative(self, q) -> np.ndarray:
        return np.asarray(self.domega(q), dtype=float).reshape(self.m, self.n, self.n)

    def residual(self, q, v) -> np.ndarray:
        return self.matrix(q) @ np.asarray(v)


def as_vector(x: Sequence[float]) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1)
