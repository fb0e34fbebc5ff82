"""Vector fields of the Hamilton-d'Alembert equations for each system class.

The operations (``simple_friction_field``, ``transfer_field``,
``reaction_field``, ``dirac_reduce``, ``linear_nonholonomic_field``) work on
:class:`ThermoPhaseState` objects. The ``*System`` classes wrap them behind a
flat-vector ``rhs(t, y)`` for the integrators and compute the per-sample
observables recorded in trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from ._accel import ENABLED as NUMBA_ENABLED
from .errors import (
    DimensionMismatch,
    DomainError,
    IndefiniteCoefficient,
    LavoisierViolation,
    NonPositiveTemperature,
    SingularMultiplierSystem,
    UnsupportedConstraintStructure,
)
from .model import (
    ForceField,
    HamiltonianModel,
    HarmonicDrive,
    LinearConstraintSet,
    ModelKind,
    NonholonomicModel,
    PistonModel,
    PistonParams,
    ReactionModel,
    StateRates,
    ThermoPhaseState,
    ThermoVariationalConstraint,
    TransferModel,
    check_psd,
    friction_covector,
    temperature,
)

# ---------------------------------------------------------------------------
# simple systems with friction
# ---------------------------------------------------------------------------


def simple_friction_field(model: HamiltonianModel, force: ForceField, state: ThermoPhaseState) -> StateRates:
    """q' = dH/dp, p' = -dH/dq + F_ext + F_fr, -T S' = <F_fr, q'>."""
    d = model.partials(state)
    constraint = ThermoVariationalConstraint.at(model, force, state)
    dq = d.dHdp
    dp = -d.dHdq + force.external_force(state) + constraint.friction
    dS = constraint.solve_entropy_rate(dq)
    return StateRates(dq=dq, dp=dp, dS=dS)


def piston_cylinder_model(params: PistonParams = PistonParams(), external=None):
    """Ideal-gas piston with friction coefficient ``params.r``.

    ``external`` is None, a number (constant force) or any callable accepted
    by :class:`ForceField`.
    """
    if external is not None and not callable(external):
        external = HarmonicDrive([float(external)])
    model = PistonModel(params)
    return model, ForceField(n=1, external=external, friction=params.r)


# ---------------------------------------------------------------------------
# internal mass transfer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferNetwork:
    """Transfer coefficients G[k, l] >= 0 between compartments.

    ``G`` is a symmetric (K, K) matrix (zero entries mean no wall) or a
    callable ``state -> matrix``. Only the upper triangle feeds the fluxes;
    the reverse direction follows from antisymmetry.
    """

    G: Union[np.ndarray, Callable]
    K: int

    def __post_init__(self):
        if not callable(self.G):
            object.__setattr__(self, "G", self._validate(self.G))

    def _validate(self, G) -> np.ndarray:
        G = np.array(G, dtype=float)
        if G.shape != (self.K, self.K):
            raise DimensionMismatch(f"G must be {self.K}x{self.K}, got {G.shape}")
        if np.any(G < 0):
            raise IndefiniteCoefficient("transfer coefficients must be non-negative")
        if not np.allclose(G, G.T, rtol=1e-12, atol=0.0):
            raise ValueError("transfer coefficient matrix must be symmetric")
        G.flags.writeable = False
        return G

    def coefficients(self, state: ThermoPhaseState) -> np.ndarray:
        if callable(self.G):
            return self._validate(self.G(state))
        return self.G

    @property
    def topology(self):
        if callable(self.G):
            return [(k, l) for k in range(self.K) for l in range(k + 1, self.K)]
        return [(k, l) for k in range(self.K) for l in range(k + 1, self.K) if self.G[k, l] > 0]


def transfer_fluxes(network: TransferNetwork, mu: np.ndarray, state: ThermoPhaseState):
    """Return (flux, dN, T*sigma_transfer) with flux[k, l] = J^{k->l}."""
    K = network.K
    flux = np.empty((K, K))
    dN = np.empty(K)
    total = kernels.transfer_exchange(np.ascontiguousarray(mu, dtype=float), network.coefficients(state), flux, dN)
    return flux, dN, total


def transfer_field(model: HamiltonianModel, force: ForceField, network: TransferNetwork, state: ThermoPhaseState) -> StateRates:
    """Evolution of (q, p, S, W, N) for a closed system with internal diffusion."""
    if network.K != state.K:
        raise DimensionMismatch(f"network has K={network.K}, state has K={state.K}")
    d = model.partials(state)
    T = temperature(model, state)
    fr = friction_covector(force, model, state)
    flux, dN, exchange = transfer_fluxes(network, d.dHdN, state)
    dq = d.dHdp
    dp = -d.dHdq + fr + force.external_force(state)
    # sum_{k<l} J^{l->k} (mu_k - mu_l) = -exchange
    dS = -(np.dot(fr, dq) - exchange) / T
    return StateRates(dq=dq, dp=dp, dS=dS, dN=dN, dW=d.dHdN.copy())


# ---------------------------------------------------------------------------
# chemical reactions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearRateLaw:
    """J = L A with sym(L) positive semi-definite (units mol^2/(J s))."""

    L: np.ndarray

    def __post_init__(self):
        L = np.atleast_2d(np.array(self.L, dtype=float))
        check_psd(L, what="rate matrix L")
        L.flags.writeable = False
        object.__setattr__(self, "L", L)


@dataclass(frozen=True)
class MassActionRateLaw:
    """J_a = k+_a prod c^nu' - k-_a prod c^nu'' with c = N / volume."""

    k_fwd: np.ndarray
    k_bwd: np.ndarray
    volume: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "k_fwd", np.array(self.k_fwd, dtype=float).reshape(-1))
        object.__setattr__(self, "k_bwd", np.array(self.k_bwd, dtype=float).reshape(-1))
        if np.any(self.k_fwd < 0) or np.any(self.k_bwd < 0) or not self.volume > 0:
            raise ValueError("rate constants must be >= 0 and the volume > 0")


RateLaw = Union[LinearRateLaw, MassActionRateLaw]


@dataclass(frozen=True)
class ReactionNetwork:
    """r reactions sum_I nu'_aI I <=> sum_I nu''_aI I among R species."""

    species: tuple
    nu_fwd: np.ndarray
    nu_bwd: np.ndarray
    masses: np.ndarray
    rate_law: RateLaw
    lavoisier_tol: float = 1e-12

    def __post_init__(self):
        nf = np.atleast_2d(np.array(self.nu_fwd, dtype=np.int64))
        nb = np.atleast_2d(np.array(self.nu_bwd, dtype=np.int64))
        m = np.array(self.masses, dtype=float).reshape(-1)
        R = len(self.species)
        if nf.shape != nb.shape or nf.shape[1] != R or m.size != R:
            raise DimensionMismatch(
                f"stoichiometry shapes {nf.shape}/{nb.shape} and {m.size} masses do not match {R} species"
            )
        if np.any(nf < 0) or np.any(nb < 0):
            raise ValueError("stoichiometric coefficients must be non-negative")
        if np.any(m <= 0):
            raise ValueError("molecular masses must be positive")
        nu = nb - nf
        for a in range(nu.shape[0]):
            imbalance = float(m @ nu[a])
            scale = float(np.abs(m) @ np.abs(nu[a]))
            if abs(imbalance) > self.lavoisier_tol * max(scale, 1.0):
                raise LavoisierViolation(
                    f"reaction {a + 1} ({self.equation(a, nf, nb)}) violates Lavoisier's law: "
                    f"sum_I m_I nu_I = {imbalance:.6g}"
                )
        for arr in (nf, nb, m):
            arr.flags.writeable = False
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "nu_fwd", nf)
        object.__setattr__(self, "nu_bwd", nb)
        object.__setattr__(self, "masses", m)
        r = nf.shape[0]
        law = self.rate_law
        if isinstance(law, LinearRateLaw) and law.L.shape != (r, r):
            raise DimensionMismatch(f"L must be {r}x{r}, got {law.L.shape}")
        if isinstance(law, MassActionRateLaw) and (law.k_fwd.size != r or law.k_bwd.size != r):
            raise DimensionMismatch(f"mass-action constants must have length {r}")

    def equation(self, a: int, nf=None, nb=None) -> str:
        nf = self.nu_fwd if nf is None else nf
        nb = self.nu_bwd if nb is None else nb

        def side(row):
            terms = [f"{c if c != 1 else ''}{s}" for c, s in zip(row, self.species) if c]
            return " + ".join(terms) or "0"

        return f"{side(nf[a])} <=> {side(nb[a])}"

    @property
    def nu(self) -> np.ndarray:
        return self.nu_bwd - self.nu_fwd

    @property
    def R(self) -> int:
        return len(self.species)

    @property
    def r(self) -> int:
        return self.nu_fwd.shape[0]

    def lavoisier_residuals(self) -> np.ndarray:
        return self.nu @ self.masses


def affinities(network: ReactionNetwork, mu) -> np.ndarray:
    """A^a = -sum_I nu^a_I mu^I."""
    mu = np.asarray(mu, dtype=float)
    if mu.size != network.R:
        raise DimensionMismatch(f"expected {network.R} chemical potentials, got {mu.size}")
    return -(network.nu @ mu)


def reaction_rates(network: ReactionNetwork, state: ThermoPhaseState, mu) -> np.ndarray:
    law = network.rate_law
    if isinstance(law, LinearRateLaw):
        return law.L @ affinities(network, mu)
    conc = np.asarray(state.N, dtype=float) / law.volume
    out = np.empty(network.r)
    status = kernels.mass_action_rates(conc, network.nu_fwd, network.nu_bwd, law.k_fwd, law.k_bwd, out)
    if status != kernels.OK:
        raise DomainError(f"negative concentration in {conc.tolist()}")
    return out


def reaction_field(network: ReactionNetwork, energy, state: ThermoPhaseState) -> StateRates:
    """N' = nu^T J, W' = dU/dN, T S' = J . A, nu_ext' = -A.

    ``energy`` is an internal-energy object (``value``/``partials`` of
    (N, S)) or a :class:`ReactionModel`.
    """
    internal = energy.internal if isinstance(energy, ReactionModel) else energy
    if state.K != network.R:
        raise DimensionMismatch(f"state has {state.K} mole numbers, network has {network.R} species")
    mu, T = internal.partials(state.N, state.S)
    mu = np.asarray(mu, dtype=float)
    if not T > 0:
        raise NonPositiveTemperature(f"dU/dS = {T} at t={state.t}")
    A = affinities(network, mu)
    J = reaction_rates(network, state, mu)
    dN = network.nu.T @ J
    dS = float(J @ A) / T
    return StateRates(dq=np.zeros(0), dp=np.zeros(0), dS=dS, dN=dN, dW=mu, dnu=-A)


# ---------------------------------------------------------------------------
# Dirac constraint reduction (degenerate Lagrangians)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrimaryConstraintSet:
    """Primary constraints phi_A(q, p) = 0 with their gradients.

    ``momentum_indices`` is set when every phi_A is a single momentum
    coordinate p_{i_A}, the structure the reduction supports.
    """

    phi: Callable
    grad_q: Callable
    grad_p: Callable
    m: int
    momentum_indices: Optional[tuple] = None

    @classmethod
    def momenta(cls, indices: Sequence[int], dim: int) -> "PrimaryConstraintSet":
        idx = np.asarray(indices, dtype=int)
        sel = np.zeros((idx.size, dim))
        sel[np.arange(idx.size), idx] = 1.0
        return cls(
            phi=lambda q, p: np.asarray(p, dtype=float)[idx],
            grad_q=lambda q, p: np.zeros((idx.size, dim)),
            grad_p=lambda q, p: sel,
            m=idx.size,
            momentum_indices=tuple(int(i) for i in idx),
        )

    def values(self, q, p) -> np.ndarray:
        return np.asarray(self.phi(q, p), dtype=float).reshape(self.m)


@dataclass(frozen=True)
class TotalHamiltonian:
    """H_T(q, p, lambda) = H~(q, p) + sum_A lambda^A phi_A(q, p).

    ``base`` returns H~ and ``base_grad`` returns (dH~/dq, dH~/dp).
    """

    base: Callable
    base_grad: Callable
    constraints: PrimaryConstraintSet

    def value(self, q, p, lam) -> float:
        return float(self.base(q, p) + np.dot(lam, self.constraints.values(q, p)))

    def grad(self, q, p, lam):
        gq, gp = self.base_grad(q, p)
        c = self.constraints
        lam = np.asarray(lam, dtype=float)
        return (
            np.asarray(gq, dtype=float) + lam @ c.grad_q(q, p),
            np.asarray(gp, dtype=float) + lam @ c.grad_p(q, p),
        )


def reaction_total_hamiltonian(energy) -> TotalHamiltonian:
    """Dirac data of a reaction system on T*(R^R x R), coordinates q = (N, S).

    The Lagrangian -U(N, S) has no velocity dependence, so every momentum is a
    primary constraint and H~ = U.
    """
    internal = energy.internal if isinstance(energy, ReactionModel) else energy
    R = internal.K

    def base(q, p):
        return internal.value(q[:R], q[R])

    def base_grad(q, p):
        mu, T = internal.partials(q[:R], q[R])
        return np.concatenate([mu, [T]]), np.zeros(R + 1)

    return TotalHamiltonian(base, base_grad, PrimaryConstraintSet.momenta(range(R + 1), R + 1))


def generalized_energy(L: Callable, q, v, p) -> float:
    """E(q, v, p) = <p, v> - L(q, v)."""
    return float(np.dot(p, v) - L(q, v))


@dataclass
class DiracReduction:
    """Result of :func:`dirac_reduce`: the reduced field plus multiplier access."""

    total: TotalHamiltonian
    network: ReactionNetwork

    def multipliers(self, q, p):
        """Solve the multipliers of the degenerate equations at (q, p).

        Returns (lam, nu_rate, W_rate, J, pdot): lam = (lambda^N, lambda^S),
        the velocities of the displacements, the reaction rates and the
        momentum rates with the annihilator multiplier fixed by d/dt phi = 0.
        """
        R = self.network.R
        c = self.total.constraints
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        gq, _ = self.total.base_grad(q, p)
        mu, T = gq[:R], gq[R]
        if not T > 0:
            raise NonPositiveTemperature(f"dU/dS = {T}")
        W_rate = mu.copy()  # W' is the primitive of mu
        nu_rate = self.network.nu @ W_rate  # chemical constraint nu' = nu W'
        state = ThermoPhaseState(S=q[R], N=q[:R])
        J = reaction_rates(self.network, state, mu)
        # momentum equations before the annihilator term:
        #   p_S' = beta - dH_T/dS,  p_N' = W' - dH_T/dN
        # lambda-terms vanish in dH_T/dq because phi does not depend on q.
        gq_T, _ = self.total.grad(q, p, np.zeros(c.m))
        # consistency d/dt phi_S = p_S' = 0 fixes the annihilator multiplier beta
        beta = gq_T[R]
        pdot = np.concatenate([W_rate - gq_T[:R], [beta - gq_T[R]]])
        lam_N = (pdot[R] / T + beta / T) * (self.network.nu.T @ J)
        lam_S = -float(J @ nu_rate) / T
        return np.concatenate([lam_N, [lam_S]]), nu_rate, W_rate, J, pdot

    def field(self, state: ThermoPhaseState) -> StateRates:
        R = self.network.R
        q = np.concatenate([state.N, [state.S]])
        lam, nu_rate, W_rate, _, _ = self.multipliers(q, np.zeros(R + 1))
        return StateRates(dq=np.zeros(0), dp=np.zeros(0), dS=lam[R], dN=lam[:R], dW=W_rate, dnu=nu_rate)

    __call__ = field

    def extract(self, q, p) -> dict:
        """Multipliers and primary-constraint residuals at (q, p)."""
        lam, *_ = self.multipliers(q, p)
        return {"lambda": lam, "phi": self.total.constraints.values(q, p)}


def dirac_reduce(total: TotalHamiltonian, network: ReactionNetwork) -> DiracReduction:
    """Eliminate the multipliers of the degenerate reaction equations.

    Only primary constraints that are individual momentum coordinates
    covering all of (p_N, p_S) are supported.
    """
    idx = total.constraints.momentum_indices
    if idx is None or sorted(idx) != list(range(network.R + 1)):
        raise UnsupportedConstraintStructure(
            "dirac_reduce needs phi_A = p_A for every coordinate (N_1..N_R, S)"
        )
    return DiracReduction(total, network)


# ---------------------------------------------------------------------------
# linear nonholonomic mechanics
# ---------------------------------------------------------------------------


def linear_nonholonomic_field(model: NonholonomicModel, constraints: LinearConstraintSet, external, state: ThermoPhaseState):
    """Hamilton-d'Alembert equations with multipliers solved explicitly.

    Returns (rates, lam). lam solves A lam = b with A = w H_pp w^T, obtained
    from d/dt (w dH/dp) = 0.
    """
    d = model.partials(state)
    q, v = state.q, d.dHdp
    w = constraints.matrix(q)
    dw = constraints.derivative(q)
    F = np.zeros(state.n) if external is None else np.asarray(external(state.t, state), dtype=float)
    Hpp = model.hess_pp(state)
    Hpq = model.hess_pq(state)
    free_pdot = -d.dHdq + F
    # d/dt (w v) = (dw . qdot) v + w (Hpq qdot + Hpp pdot)
    drift = np.einsum("rij,j,i->r", dw, v, v) + w @ (Hpq @ v) + w @ (Hpp @ free_pdot)
    A = w @ Hpp @ w.T
    try:
        if np.linalg.cond(A) > 1e12:
            raise np.linalg.LinAlgError
        lam = np.linalg.solve(A, -drift)
    except np.linalg.LinAlgError:
        raise SingularMultiplierSystem(f"multiplier matrix is singular at t={state.t}") from None
    dp = free_pdot + w.T @ lam
    return StateRates(dq=v, dp=dp, dS=0.0), lam


# ---------------------------------------------------------------------------
# integrable systems (flat-vector wrappers)
# ---------------------------------------------------------------------------


def _raise_status(status: int, t: float, y) -> None:
    if status == kernels.DOMAIN:
        raise DomainError(f"state left the admissible domain at t={t}: y={np.asarray(y).tolist()}")
    if status == kernels.NONPOSITIVE_T:
        raise NonPositiveTemperature(f"non-positive temperature at t={t}")
    if status == kernels.NONFINITE:
        raise DomainError(f"non-finite rates at t={t}")


class System:
    """Common flat-vector layout y = (q, p, S, N, W, nu)."""

    label = "system"
    model: HamiltonianModel
    n = K = r = 0
    isolated = True

    @property
    def dim(self) -> int:
        return 2 * self.n + 1 + 2 * self.K + self.r

    def pack(self, state: ThermoPhaseState) -> np.ndarray:
        if state.n != self.n or state.K != self.K or state.r != self.r:
            raise DimensionMismatch(
                f"{self.label} expects (n, K, r)=({self.n}, {self.K}, {self.r}); got ({state.n}, {state.K}, {state.r})"
            )
        return np.concatenate([state.q, state.p, [state.S], state.N, state.W, state.nu])

    def unpack(self, t: float, y) -> ThermoPhaseState:
        n, K = self.n, self.K
        i = 2 * n
        return ThermoPhaseState(
            q=y[:n], p=y[n:i], S=y[i], N=y[i + 1 : i + 1 + K], W=y[i + 1 + K : i + 1 + 2 * K], nu=y[i + 1 + 2 * K :], t=t
        )

    def pack_rates(self, rates: StateRates) -> np.ndarray:
        return np.concatenate([rates.dq, rates.dp, [rates.dS], rates.dN, rates.dW, rates.dnu])

    def rates(self, state: ThermoPhaseState) -> StateRates:
        raise NotImplementedError

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.pack_rates(self.rates(self.unpack(t, y)))

    def observables(self, t: float, y: np.ndarray) -> dict:
        raise NotImplementedError


class FrictionSystem(System):
    """Simple adiabatically closed system with friction and external force."""

    label = "friction"

    def __init__(self, model: HamiltonianModel, force: ForceField):
        if model.kind != ModelKind.SIMPLE_FRICTION:
            raise ValueError(f"FrictionSystem needs a SimpleFriction model, got {model.kind}")
        self.model, self.force = model, force
        self.n = model.n
        self.isolated = force.is_isolated
        self.kernel = None
        self.kernel_params = None
        ext = force.external
        if (
            isinstance(model, PistonModel)
            and not callable(force.friction)
            and (ext is None or isinstance(ext, HarmonicDrive))
        ):
            P = model.params
            drive = ext if ext is not None else HarmonicDrive([0.0])
            r = 0.0 if force.friction is None else float(force.friction[0, 0])
            self.kernel = kernels.piston_rhs
            self.kernel_params = np.array(
                [P.m, P.alpha, P.N0, P.cv, P.R, P.T0, P.V0, P.S0, r, drive.constant[0], drive.amplitude[0], drive.omega]
            )

    def rates(self, state):
        return simple_friction_field(self.model, self.force, state)

    def rhs(self, t, y):
        if self.kernel is None:
            return super().rhs(t, y)
        out = np.empty(3)
        status = self.kernel(t, np.asarray(y, dtype=float), self.kernel_params, out)
        if status != kernels.OK:
            _raise_status(status, t, y)
        return out

    def observables(self, t, y):
        state = self.unpack(t, y)
        d = self.model.partials(state)
        T = temperature(self.model, state)
        r = self.force.friction_matrix(state)
        v = d.dHdp
        F = self.force.external_force(state)
        rates = self.rates(state)
        obs = {
            "H": self.model.energy(state),
            "T": T,
            "sigma": float(v @ r @ v) / T,
            "S_dot": rates.dS,
            "P_ext": float(F @ v),
        }
        if isinstance(self.model, PistonModel):
            obs["pressure"] = self.model.pressure(state.q[0], state.S)
            obs["F_ext"] = float(F[0])
        return obs


class TransferSystem(System):
    label = "transfer"

    def __init__(self, model: TransferModel, force: ForceField, network: TransferNetwork):
        if model.kind != ModelKind.MASS_TRANSFER:
            raise ValueError(f"TransferSystem needs a MassTransfer model, got {model.kind}")
        if network.K != model.K:
            raise DimensionMismatch(f"network K={network.K} differs from model K={model.K}")
        self.model, self.force, self.network = model, force, network
        self.n, self.K = model.n, model.K
        self.isolated = force.is_isolated

    def rates(self, state):
        return transfer_field(self.model, self.force, self.network, state)

    def observables(self, t, y):
        state = self.unpack(t, y)
        d = self.model.partials(state)
        T = temperature(self.model, state)
        r = self.force.friction_matrix(state)
        v = d.dHdp
        flux, dN, exchange = transfer_fluxes(self.network, d.dHdN, state)
        rates = self.rates(state)
        sigma_fr = float(v @ r @ v) / T
        obs = {
            "H": self.model.energy(state),
            "T": T,
            "sigma": sigma_fr + exchange / T,
            "S_dot": rates.dS,
            "P_ext": float(self.force.external_force(state) @ v),
            "sigma_friction": sigma_fr,
            "sigma_transfer": exchange / T,
            "N_total": float(np.sum(state.N)),
        }
        for k in range(self.K):
            obs[f"mu_{k + 1}"] = float(d.dHdN[k])
        for k in range(self.K):
            for l in range(k + 1, self.K):
                obs[f"J_{k + 1}_to_{l + 1}"] = float(flux[k, l])
                obs[f"J_{l + 1}_to_{k + 1}"] = float(flux[l, k])
        return obs


class ReactionSystem(System):
    """Reduced reaction dynamics on y = (S, N, W, nu_ext)."""

    label = "reaction"

    def __init__(self, network: ReactionNetwork, model: ReactionModel):
        if model.K != network.R:
            raise DimensionMismatch(f"energy has {model.K} species, network has {network.R}")
        self.network, self.model = network, model
        self.K, self.r = network.R, network.r

    def rates(self, state):
        return reaction_field(self.network, self.model, state)

    def observables(self, t, y):
        state = self.unpack(t, y)
        mu, T = self.model.internal.partials(state.N, state.S)
        T = float(T)
        A = affinities(self.network, mu)
        J = reaction_rates(self.network, state, mu)
        rates = self.rates(state)
        obs = {
            "H": self.model.energy(state),
            "T": T,
            "sigma": float(J @ A) / T,
            "S_dot": rates.dS,
            "P_ext": 0.0,
            "mass": float(self.network.masses @ state.N),
        }
        for i, s in enumerate(self.network.species):
            obs[f"mu_{s}"] = float(mu[i])
        for a in range(self.network.r):
            obs[f"A_{a + 1}"] = float(A[a])
            obs[f"J_{a + 1}"] = float(J[a])
        for a in range(self.network.r):
            obs[f"nu_{a + 1}"] = float(state.nu[a])
        return obs


class DiracReactionSystem(System):
    """Unreduced degenerate reaction equations with explicit momenta.

    y = (N, S, p_N, p_S, W, nu_ext); the multipliers are re-solved at every
    evaluation, and the momenta should stay on the primary constraint set.
    """

    label = "reaction-dirac"

    def __init__(self, network: ReactionNetwork, model: ReactionModel):
        self.network, self.model = network, model
        self.K, self.r = network.R, network.r
        self.reduction = dirac_reduce(reaction_total_hamiltonian(model), network)

    @property
    def dim(self):
        return 2 * (self.K + 1) + self.K + self.r

    def pack(self, state, momenta=None):
        R = self.K
        mom = np.zeros(R + 1) if momenta is None else np.asarray(momenta, dtype=float)
        return np.concatenate([state.N, [state.S], mom, state.W, state.nu])

    def split(self, y):
        R = self.K
        q = np.asarray(y[: R + 1])
        p = np.asarray(y[R + 1 : 2 * R + 2])
        W = y[2 * R + 2 : 3 * R + 2]
        nu = y[3 * R + 2 :]
        return q, p, W, nu

    def unpack(self, t, y):
        q, p, W, nu = self.split(y)
        return ThermoPhaseState(S=q[self.K], N=q[: self.K], W=W, nu=nu, t=t)

    def rhs(self, t, y):
        q, p, _, _ = self.split(y)
        if np.any(q[: self.K] < 0):
            raise DomainError(f"negative mole number at t={t}")
        lam, nu_rate, W_rate, _, pdot = self.reduction.multipliers(q, p)
        # q' = dH~/dp + lambda^A dphi_A/dp = lambda
        _, qdot = self.reduction.total.grad(q, p, lam)
        return np.concatenate([qdot, pdot, W_rate, nu_rate])

    def observables(self, t, y):
        q, p, _, _ = self.split(y)
        info = self.reduction.extract(q, p)
        obs = {"H": self.reduction.total.value(q, p, info["lambda"]), "phi_max": float(np.max(np.abs(info["phi"])))}
        for i, s in enumerate(self.network.species):
            obs[f"lambda_{s}"] = float(info["lambda"][i])
        obs["lambda_S"] = float(info["lambda"][self.K])
        return obs


class NonholonomicSystem(System):
    """Mechanical system with linear constraints; the entropy slot is inert."""

    label = "nonholonomic"

    def __init__(self, model: NonholonomicModel, constraints: LinearConstraintSet, external=None):
        self.model, self.constraints, self.external = model, constraints, external
        self.n = model.n
        self.isolated = external is None

    def rates(self, state):
        return linear_nonholonomic_field(self.model, self.constraints, self.external, state)[0]

    def observables(self, t, y):
        state = self.unpack(t, y)
        rates, lam = linear_nonholonomic_field(self.model, self.constraints, self.external, state)
        F = np.zeros(self.n) if self.external is None else np.asarray(self.external(t, state), dtype=float)
        obs = {
            "H": self.model.energy(state),
            "T": float("nan"),
            "sigma": 0.0,
            "P_ext": float(F @ rates.dq),
            "constraint_residual": float(np.max(np.abs(self.constraints.residual(state.q, rates.dq)))),
        }
        for k, val in enumerate(lam):
            obs[f"lambda_{k + 1}"] = float(val)
        return obs


def uses_numba() -> bool:
    return NUMBA_ENABLED
