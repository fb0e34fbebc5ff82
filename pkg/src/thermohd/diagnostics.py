"""Checks of the structural laws on recorded trajectories.

All checks are pure functions of their inputs; a report built twice from the
same trajectory is identical.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .dynamics import (
    DiracReactionSystem,
    FrictionSystem,
    ReactionSystem,
    TransferSystem,
    reaction_field,
)
from .errors import LegendreInversionFailure
from .integrators import IntegratorConfig, Trajectory, integrate_at
from .model import (
    GAS_CONSTANT,
    HamiltonianModel,
    PistonModel,
    ThermalOscillatorModel,
    ThermoPhaseState,
)

# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    max_residual: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_residual) and self.max_residual <= self.tolerance)


@dataclass
class DiagnosticsReport:
    scenario: str = ""
    config_hash: str = ""
    checks: list = field(default_factory=list)
    aborted: Optional[str] = None

    def add(self, name: str, residual: float, tolerance: float, detail: str = "") -> CheckResult:
        res = CheckResult(name, float(residual), float(tolerance), detail)
        self.checks.append(res)
        return res

    @property
    def passed(self) -> bool:
        return self.aborted is None and all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "passed": self.passed,
            "aborted": self.aborted,
            "checks": [dict(asdict(c), passed=c.passed) for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"

    def table(self) -> str:
        width = max([len(c.name) for c in self.checks] + [5])
        lines = [f"{'check':<{width}}  {'max_residual':>12}  {'tolerance':>10}  result"]
        for c in self.checks:
            lines.append(f"{c.name:<{width}}  {c.max_residual:12.4e}  {c.tolerance:10.2e}  {'PASS' if c.passed else 'FAIL'}")
        if self.aborted:
            lines.append(f"ABORTED: {self.aborted}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def scaled_deviation(a, b, atol: float = 1e-12) -> float:
    """max_{t,i} |a - b| / (atol + max_t |b_i|): componentwise relative to each column's magnitude."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    scale = atol + np.max(np.abs(b), axis=0)
    return float(np.max(np.abs(a - b) / scale))


# ---------------------------------------------------------------------------
# first law
# ---------------------------------------------------------------------------


def work_integral(t, power) -> np.ndarray:
    """Cumulative int_0^t P dtau by composite Simpson on the recorded samples.

    Sample pairs of intervals are integrated with the non-uniform Simpson
    rule; values at odd samples add the first half of the next pair's
    quadratic, and an unpaired final interval uses the quadratic through the
    last three samples. Fourth order on smooth data, unlike a per-interval
    cumulative scheme.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(power, dtype=float)
    n = t.size
    out = np.zeros(n)
    if n < 2:
        return out
    if n == 2:
        out[1] = 0.5 * (t[1] - t[0]) * (f[0] + f[1])
        return out
    npair = (n - 1) // 2
    i = 2 * np.arange(npair)
    h0 = t[i + 1] - t[i]
    h1 = t[i + 2] - t[i + 1]
    H = h0 + h1
    pair = H / 6.0 * ((2.0 - h1 / h0) * f[i] + H * H / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2])
    half = (h0 / 2 - h0 * h0 / (6 * H)) * f[i] + h0 * (3 * H - 2 * h0) / (6 * h1) * f[i + 1] - h0**3 / (6 * H * h1) * f[i + 2]
    acc = np.concatenate([[0.0], np.cumsum(pair)])
    out[0 : 2 * npair + 1 : 2] = acc
    out[1 : 2 * npair : 2] = acc[:-1] + half
    if n % 2 == 0:
        # unpaired last interval [t[n-2], t[n-1]]
        a, b, c = n - 3, n - 2, n - 1
        g0, g1 = t[b] - t[a], t[c] - t[b]
        G = g0 + g1
        last = (g1 / 2 - g1 * g1 / (6 * G)) * f[c] + g1 * (3 * G - 2 * g1) / (6 * g0) * f[b] - g1**3 / (6 * G * g0) * f[a]
        out[c] = out[b] + last
    return out


def first_law_residual(traj: Trajectory) -> float:
    """max_t |H(t) - H(0) - int_0^t <F_ext, q'> dtau|."""
    H = traj["H"]
    work = work_integral(traj.t, traj["P_ext"])
    return float(np.max(np.abs(H - H[0] - work)))


def quadrature_self_check(traj: Trajectory) -> float:
    """Richardson estimate of the work-integral quadrature error.

    Compares the integral on all samples with the one on every other sample;
    for a fourth-order rule the fine-grid error is about |full - half| / 15.
    """
    if len(traj) < 5:
        return 0.0
    full = work_integral(traj.t, traj["P_ext"])[::2]
    half = work_integral(traj.t[::2], traj["P_ext"][::2])
    return float(np.max(np.abs(full - half))) / 15.0


# ---------------------------------------------------------------------------
# second law
# ---------------------------------------------------------------------------


def second_law_check(traj: Trajectory) -> float:
    """Minimum over the samples of the entropy production rate."""
    return float(np.min(traj["sigma"]))


def _sigma_scale(traj):
    return max(float(np.max(np.abs(traj["sigma"]))), 1e-300)


def second_law_residual(traj: Trajectory) -> float:
    """max(0, -min sigma) in units of max |sigma|."""
    return max(0.0, -second_law_check(traj)) / _sigma_scale(traj)


def entropy_decrease(traj: Trajectory) -> float:
    """Largest drop of S between consecutive samples, scaled by the entropy magnitude."""
    S = traj.y[:, 2 * traj.system.n]
    if S.size < 2:
        return 0.0
    scale = max(float(np.max(np.abs(S))), float(abs(S[-1] - S[0])), 1e-300)
    return max(0.0, float(-np.min(np.diff(S)))) / scale


def entropy_rate_closed_form(traj: Trajectory) -> float:
    """Piston only: max |S' - r p^2/(m^2 T)|, scaled by the largest closed-form value."""
    sys = traj.system
    P = sys.model.params
    r = float(sys.force.friction_matrix(traj.state(0))[0, 0])
    p = traj.y[:, 1]
    closed = r * p**2 / (P.m**2 * traj["T"])
    scale = max(float(np.max(np.abs(closed))), 1e-300)
    return float(np.max(np.abs(traj["S_dot"] - closed))) / scale


# ---------------------------------------------------------------------------
# conservation
# ---------------------------------------------------------------------------


def conservation_check(traj: Trajectory) -> dict:
    """Absolute drift of total moles (transfer) and total mass (reactions)."""
    sys = traj.system
    out = {}
    if isinstance(sys, TransferSystem):
        i = 2 * sys.n + 1
        tot = np.sum(traj.y[:, i : i + sys.K], axis=1)
        out["moles"] = float(np.max(np.abs(tot - tot[0])))
    if isinstance(sys, ReactionSystem):
        N = traj.y[:, 1 : 1 + sys.K]
        mass = N @ sys.network.masses
        out["mass"] = float(np.max(np.abs(mass - mass[0])))
    return out


def energy_drift(traj: Trajectory) -> float:
    """max_t |H(t) - H(0)| / |H(0)|."""
    H = traj["H"]
    return float(np.max(np.abs(H - H[0])) / abs(H[0]))


def flux_antisymmetry(traj: Trajectory) -> float:
    K = traj.system.K
    worst = 0.0
    for k in range(K):
        for l in range(k + 1, K):
            s = traj[f"J_{k + 1}_to_{l + 1}"] + traj[f"J_{l + 1}_to_{k + 1}"]
            worst = max(worst, float(np.max(np.abs(s))))
    return worst


def transfer_entropy_term(traj: Trajectory) -> float:
    """max |sigma_transfer - sum_{k<l} G_kl (mu_k - mu_l)^2 / T|, relative to its largest value."""
    sys = traj.system
    expected = np.zeros(len(traj))
    for i in range(len(traj)):
        G = sys.network.coefficients(traj.state(i))
        mu = np.array([traj[f"mu_{k + 1}"][i] for k in range(sys.K)])
        for k in range(sys.K):
            for l in range(k + 1, sys.K):
                expected[i] += G[k, l] * (mu[k] - mu[l]) ** 2
    expected /= traj["T"]
    scale = max(float(np.max(np.abs(expected))), 1e-300)
    return float(np.max(np.abs(traj["sigma_transfer"] - expected))) / scale


# ---------------------------------------------------------------------------
# Lagrangian oracle
# ---------------------------------------------------------------------------


class LagrangianModel:
    """L(q, v, S) = 1/2 v^T M v - V(q, S) for the friction class.

    The potential is read off the Hamiltonian at zero momentum; the dynamics
    are then built from L alone (Lagrange-d'Alembert side).
    """

    def __init__(self, mass, potential, potential_dq, potential_dS):
        self.mass = np.atleast_2d(np.asarray(mass, dtype=float))
        self.n = self.mass.shape[0]
        self.potential = potential
        self.potential_dq = potential_dq
        self.potential_dS = potential_dS

    @classmethod
    def from_model(cls, model: HamiltonianModel) -> "LagrangianModel":
        if isinstance(model, PistonModel):
            mass = [[model.params.m]]
        elif isinstance(model, ThermalOscillatorModel):
            mass = model.mass
        else:
            raise LegendreInversionFailure(f"no Lagrangian available for {type(model).__name__}")

        def at_rest(q, S):
            return ThermoPhaseState(q=q, p=np.zeros(model.n), S=S)

        return cls(
            mass,
            lambda q, S: model.energy(at_rest(q, S)),
            lambda q, S: model.partials(at_rest(q, S)).dHdq,
            lambda q, S: model.partials(at_rest(q, S)).dHdS,
        )

    def L(self, q, v, S) -> float:
        v = np.asarray(v, dtype=float)
        return 0.5 * v @ self.mass @ v - self.potential(q, S)

    def dL_dq(self, q, v, S):
        return -np.asarray(self.potential_dq(q, S), dtype=float)

    def dL_dv(self, q, v, S):
        return self.mass @ np.asarray(v, dtype=float)

    def dL_dS(self, q, v, S) -> float:
        return -float(self.potential_dS(q, S))

    def energy(self, q, v, S) -> float:
        return float(self.dL_dv(q, v, S) @ v - self.L(q, v, S))

    def legendre(self, q, v, S):
        return self.dL_dv(q, v, S)

    def inverse_legendre(self, q, p, S, tol=1e-14, max_iter=20):
        """Solve dL/dv(q, v, S) = p for v by Newton iteration."""
        v = np.zeros(self.n)
        p = np.asarray(p, dtype=float)
        for _ in range(max_iter):
            res = self.dL_dv(q, v, S) - p
            if np.max(np.abs(res)) <= tol * max(1.0, float(np.max(np.abs(p)))):
                return v
            try:
                v = v - np.linalg.solve(self.mass, res)
            except np.linalg.LinAlgError:
                raise LegendreInversionFailure("singular fiber Hessian d2L/dv2") from None
        raise LegendreInversionFailure("Newton iteration for the Legendre transform did not converge")


def lagrangian_field(lag: LagrangianModel, force, model_n: int):
    """Right-hand side of d/dt dL/dv - dL/dq = F_fr + F_ext, (dL/dS) S' = <F_fr, v> on y = (q, v, S)."""
    n = model_n

    def f(t, y):
        q, v, S = y[:n], y[n : 2 * n], y[2 * n]
        st = ThermoPhaseState(q=q, p=lag.legendre(q, v, S), S=S, t=t)
        r = force.friction_matrix(st)
        F_fr = -r @ v
        F_ext = force.external_force(st)
        vdot = np.linalg.solve(lag.mass, lag.dL_dq(q, v, S) + F_fr + F_ext)
        Sdot = float(F_fr @ v) / lag.dL_dS(q, v, S)
        return np.concatenate([v, vdot, [Sdot]])

    return f


@dataclass
class OracleComparison:
    deviation: float
    temperature_mismatch: float
    times: np.ndarray
    hamiltonian: np.ndarray
    lagrangian: np.ndarray


def lagrangian_oracle_compare(system: FrictionSystem, state0: ThermoPhaseState, config: IntegratorConfig, n_checkpoints: int = 101) -> OracleComparison:
    """Integrate the Lagrangian-side equations and compare with the Hamiltonian run.

    Both sides are integrated with ``config`` to the same checkpoints; the
    Lagrangian states are mapped to (q, p, S) through p = dL/dv.
    """
    lag = LagrangianModel.from_model(system.model)
    n = system.n
    times = state0.t + np.linspace(0.0, config.t_end, n_checkpoints)
    yh = integrate_at(system, system.pack(state0), times, config)
    v0 = lag.inverse_legendre(state0.q, state0.p, state0.S)
    yl0 = np.concatenate([state0.q, v0, [state0.S]])
    yl = integrate_at(lagrangian_field(lag, system.force, n), yl0, times, config)
    mapped = np.array([np.concatenate([y[:n], lag.legendre(y[:n], y[n : 2 * n], y[2 * n]), [y[2 * n]]]) for y in yl])
    T_lag = np.array([-lag.dL_dS(y[:n], y[n : 2 * n], y[2 * n]) for y in yl])
    T_ham = np.array([system.model.partials(system.unpack(t, y)).dHdS for t, y in zip(times, mapped)])
    temp_mismatch = float(np.max(np.abs(T_lag - T_ham) / np.abs(T_ham)))
    return OracleComparison(scaled_deviation(mapped, yh), temp_mismatch, times, yh, mapped)


# ---------------------------------------------------------------------------
# Dirac consistency
# ---------------------------------------------------------------------------


@dataclass
class DiracComparison:
    deviation: float
    phi_max: float
    multiplier_mismatch: float


def dirac_consistency(reduced: ReactionSystem, state0: ThermoPhaseState, config: IntegratorConfig, n_checkpoints: int = 101) -> DiracComparison:
    """Compare reduced and unreduced (explicit momenta + multipliers) reaction runs."""
    unreduced = DiracReactionSystem(reduced.network, reduced.model)
    times = state0.t + np.linspace(0.0, config.t_end, n_checkpoints)
    yr = integrate_at(reduced, reduced.pack(state0), times, config)
    yu = integrate_at(unreduced, unreduced.pack(state0), times, config)
    R = reduced.K
    # reduced layout (S, N, W, nu) vs unreduced (N, S, p_N, p_S, W, nu)
    red = np.column_stack([yr[:, 1 : 1 + R], yr[:, 0], yr[:, 1 + R :]])
    unr = np.column_stack([yu[:, :R], yu[:, R], yu[:, 2 * R + 2 :]])
    phi = np.max(np.abs(yu[:, R + 1 : 2 * R + 2]))
    worst = 0.0
    scale = 0.0
    diffs = []
    for t, y in zip(times, yu):
        q, p, _, _ = unreduced.split(y)
        lam = unreduced.reduction.extract(q, p)["lambda"][:R]
        Ndot = reaction_field(reduced.network, reduced.model, unreduced.unpack(t, y)).dN
        diffs.append(np.max(np.abs(lam - Ndot)))
        scale = max(scale, float(np.max(np.abs(Ndot))))
    worst = max(diffs) / max(scale, 1e-300)
    return DiracComparison(scaled_deviation(unr, red), float(phi), float(worst))


# ---------------------------------------------------------------------------
# equilibrium
# ---------------------------------------------------------------------------


@dataclass
class EquilibriumVerdict:
    satisfied: bool
    residual: float
    tolerance: float
    description: str


def equilibrium_check(traj: Trajectory, tol: float = 1e-6) -> EquilibriumVerdict:
    """Test the terminal state against the equilibrium conditions of its class.

    friction: rest and force balance, |dH/dq - F_ext| / |F_ext| and |v_end| / max|v|;
    transfer: (max mu - min mu) / (R T); reactions: max |A| / (R T).
    """
    sys = traj.system
    st = traj.final_state
    if isinstance(sys, FrictionSystem):
        d = sys.model.partials(st)
        F = sys.force.external_force(st)
        scale = max(float(np.max(np.abs(F))), float(np.max(np.abs(d.dHdq))), 1e-300)
        force_res = float(np.max(np.abs(F - d.dHdq))) / scale
        speeds = np.array([np.max(np.abs(sys.model.partials(traj.state(i)).dHdp)) for i in range(len(traj))])
        vel_res = float(speeds[-1] / max(float(speeds.max()), 1e-300))
        res = max(force_res, vel_res)
        desc = f"force balance {force_res:.3e}, rest {vel_res:.3e}"
    elif isinstance(sys, TransferSystem):
        d = sys.model.partials(st)
        mu = d.dHdN
        res = float((mu.max() - mu.min()) / (GAS_CONSTANT * d.dHdS))
        desc = f"chemical potential spread {res:.3e}"
    elif isinstance(sys, ReactionSystem):
        A = traj.observables
        aff = np.array([A[f"A_{a + 1}"][-1] for a in range(sys.network.r)])
        res = float(np.max(np.abs(aff)) / (GAS_CONSTANT * traj["T"][-1]))
        desc = f"max |affinity| / RT {res:.3e}"
    else:
        raise TypeError(f"no equilibrium conditions for {type(sys).__name__}")
    return EquilibriumVerdict(res <= tol, res, tol, desc)


# ---------------------------------------------------------------------------
# finite-difference gradient suite
# ---------------------------------------------------------------------------


def _perturb(state: ThermoPhaseState, part: str, i: int, delta: float) -> ThermoPhaseState:
    if part == "S":
        return state.replace(S=state.S + delta)
    arr = getattr(state, part).copy()
    arr[i] += delta
    return state.replace(**{part: arr})


def gradient_check(model: HamiltonianModel, rng: np.random.Generator, n_states: int = 100) -> float:
    """Largest relative error of the analytic partials against central differences.

    Step h = 1e-6 max(1, |x|). The part of the difference that lies inside the
    rounding bound of the quotient, 32 eps max|H(x +- h)| / h, is discounted
    before dividing by |analytic|.
    """
    eps = np.finfo(float).eps
    worst = 0.0
    for _ in range(n_states):
        st = model.sample_state(rng)
        d = model.partials(st)
        items = [("q", i, d.dHdq[i]) for i in range(st.n)]
        items += [("p", i, d.dHdp[i]) for i in range(st.n)]
        items += [("S", 0, d.dHdS)]
        items += [("N", i, d.dHdN[i]) for i in range(st.K)]
        for part, i, analytic in items:
            x = st.S if part == "S" else getattr(st, part)[i]
            h = 1e-6 * max(1.0, abs(x))
            if part == "N":
                h = min(h, 0.5 * x)
            hp = model.energy(_perturb(st, part, i, h))
            hm = model.energy(_perturb(st, part, i, -h))
            fd = (hp - hm) / (2 * h)
            noise = 32 * eps * max(abs(hp), abs(hm)) / h
            excess = max(0.0, abs(fd - analytic) - noise)
            if excess == 0.0:
                continue
            worst = max(worst, excess / max(abs(analytic), 1e-300))
    return worst
