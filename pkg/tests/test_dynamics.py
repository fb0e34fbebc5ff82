import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermohd import scenarios
from thermohd.dynamics import (
    DiracReactionSystem,
    FrictionSystem,
    LinearRateLaw,
    MassActionRateLaw,
    NonholonomicSystem,
    PrimaryConstraintSet,
    ReactionNetwork,
    TotalHamiltonian,
    TransferNetwork,
    affinities,
    dirac_reduce,
    generalized_energy,
    linear_nonholonomic_field,
    piston_cylinder_model,
    reaction_field,
    reaction_rates,
    reaction_total_hamiltonian,
    simple_friction_field,
    transfer_field,
    transfer_fluxes,
)
from thermohd.errors import (
    DimensionMismatch,
    IndefiniteCoefficient,
    LavoisierViolation,
    SingularMultiplierSystem,
    UnsupportedConstraintStructure,
)
from thermohd.integrators import IntegratorConfig, integrate
from thermohd.model import (
    ForceField,
    HarmonicDrive,
    IdealMixtureEnergy,
    LinearConstraintSet,
    LinearEnergy,
    NonholonomicModel,
    PistonParams,
    ReactionModel,
    ThermoPhaseState,
    TransferModel,
    eval_partials,
)


def ab_network(L=1e-6, masses=(0.028, 0.028)):
    return ReactionNetwork(["A", "B"], [[1, 0]], [[0, 1]], masses, LinearRateLaw([[L]]))


def dimer_network(L=2e-7):
    return ReactionNetwork(["A", "B"], [[2, 0]], [[0, 1]], [0.014, 0.028], LinearRateLaw([[L]]))


def mixture(R=2, u=(0.0, -2000.0), s0=0.0):
    return IdealMixtureEnergy(np.full(R, 1e-3), T0=300.0, s0=s0, u=u)


# friction ------------------------------------------------------------------


def test_reversible_limit_no_entropy():
    model, force = piston_cylinder_model(PistonParams(r=0.0))
    rates = simple_friction_field(model, force, ThermoPhaseState(q=[0.1], p=[1.5], S=0.0))
    assert rates.dS == 0.0


@settings(max_examples=50, deadline=None)
@given(q=st.floats(0.02, 0.4), p=st.floats(-5, 5), S=st.floats(-0.05, 0.05), r=st.floats(0.0, 5.0))
def test_piston_entropy_rate_closed_form(q, p, S, r):
    P = PistonParams(m=1.7, r=r)
    model, force = piston_cylinder_model(P)
    s = ThermoPhaseState(q=[q], p=[p], S=S)
    rates = simple_friction_field(model, force, s)
    T = model.gas_temperature(q, S)
    assert rates.dS == pytest.approx(r * p * p / (P.m**2 * T), rel=1e-12, abs=1e-300)
    assert rates.dp[0] == pytest.approx(model.pressure(q, S) * P.alpha - r * p / P.m, rel=1e-12, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(q=st.floats(0.02, 0.4), p=st.floats(-5, 5), S=st.floats(-0.05, 0.05), t=st.floats(0, 10))
def test_energy_balance_identity(q, p, S, t):
    P = PistonParams(r=2.0)
    model, force = piston_cylinder_model(P, external=HarmonicDrive([3.0], [5.0], 2.0))
    s = ThermoPhaseState(q=[q], p=[p], S=S, t=t)
    rates = simple_friction_field(model, force, s)
    d = eval_partials(model, s)
    dH = d.dHdq @ rates.dq + rates.dp @ d.dHdp + d.dHdS * rates.dS
    work = force.external_force(s) @ rates.dq
    assert dH == pytest.approx(work, abs=1e-9 * (1 + abs(d.dHdq[0] * rates.dq[0])))


def test_piston_force_balance_at_rest():
    model, force = piston_cylinder_model(PistonParams(), external=-100.0)
    # q where the gas pressure balances the external force: p alpha = 100
    S = 0.0
    P = model.params
    # N0 R T(q)/q = 100 with T = T0 (V0/(alpha q))^(R/cv); solve for q
    k = P.N0 * P.R * P.T0 * (P.V0 / P.alpha) ** (P.R / P.cv)
    q_eq = (k / 100.0) ** (1.0 / (1.0 + P.R / P.cv))
    rates = simple_friction_field(model, force, ThermoPhaseState(q=[q_eq], p=[0.0], S=S))
    assert abs(rates.dp[0]) < 1e-10
    assert rates.dS == 0.0


def test_friction_system_kernel_matches_python_path():
    model, force = piston_cylinder_model(PistonParams(r=3.0), external=HarmonicDrive([1.0], [2.0], 5.0))
    sys_ = FrictionSystem(model, force)
    assert sys_.kernel is not None
    rng = np.random.default_rng(5)
    for _ in range(20):
        s = model.sample_state(rng).replace(t=rng.uniform(0, 3))
        y = sys_.pack(s)
        fast = sys_.rhs(s.t, y)
        slow = sys_.pack_rates(simple_friction_field(model, force, s))
        np.testing.assert_allclose(fast, slow, rtol=1e-13, atol=1e-15)


# transfer --------------------------------------------------------------------


def test_transfer_network_validation():
    with pytest.raises(ValueError):
        TransferNetwork([[0.0, -1.0], [-1.0, 0.0]], 2)
    with pytest.raises(ValueError):
        TransferNetwork([[0.0, 1.0], [2.0, 0.0]], 2)


def test_transfer_two_compartment_arithmetic():
    g = 2.5e-6
    net = TransferNetwork([[0.0, g], [g, 0.0]], 2)
    mu = np.array([1200.0, 800.0])
    flux, dN, exchange = transfer_fluxes(net, mu, ThermoPhaseState(N=[1.0, 1.0]))
    assert dN[1] == pytest.approx(g * 400.0)
    assert dN[0] == -dN[1]
    assert flux[0, 1] == -flux[1, 0]
    assert exchange == pytest.approx(g * 400.0**2)


def test_transfer_equal_mu_no_flux():
    gas = IdealMixtureEnergy([1e-3, 1e-3])
    model = TransferModel(gas)
    N = [0.04, 0.04]
    s = ThermoPhaseState(S=gas.entropy_at(N, 300.0), N=N)
    rates = transfer_field(model, ForceField(0), TransferNetwork([[0, 1e-5], [1e-5, 0]], 2), s)
    assert np.all(rates.dN == 0.0)
    assert rates.dS == 0.0


def test_transfer_entropy_term():
    gas = IdealMixtureEnergy([1e-3, 1e-3])
    model = TransferModel(gas)
    N = np.array([0.06, 0.02])
    s = ThermoPhaseState(S=gas.entropy_at(N, 300.0), N=N)
    g = 1e-5
    rates = transfer_field(model, ForceField(0), TransferNetwork([[0, g], [g, 0]], 2), s)
    mu, T = gas.partials(N, s.S)
    assert mu[0] > mu[1]
    assert rates.dN[1] == pytest.approx(g * (mu[0] - mu[1]), rel=1e-14)
    assert rates.dS == pytest.approx(g * (mu[0] - mu[1]) ** 2 / T, rel=1e-12)
    assert np.array_equal(rates.dW, mu)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_transfer_pairwise_cancellation(seed):
    rng = np.random.default_rng(seed)
    K = 4
    G = rng.uniform(0, 1e-5, (K, K))
    G = G + G.T
    np.fill_diagonal(G, 0.0)
    gas = IdealMixtureEnergy(rng.uniform(5e-4, 2e-3, K))
    N = rng.uniform(0.005, 0.1, K)
    s = ThermoPhaseState(S=gas.entropy_at(N, rng.uniform(250, 400)), N=N)
    rates = transfer_field(TransferModel(gas), ForceField(0), TransferNetwork(G, K), s)
    assert abs(rates.dN.sum()) <= 1e-15 * np.abs(rates.dN).sum() + 1e-300
    assert rates.dS >= 0


def test_transfer_dimension_mismatch():
    gas = IdealMixtureEnergy([1e-3, 1e-3])
    s = ThermoPhaseState(S=0.0, N=[0.01, 0.01])
    with pytest.raises(DimensionMismatch):
        transfer_field(TransferModel(gas), ForceField(0), TransferNetwork(np.zeros((3, 3)), 3), s)


# reactions -------------------------------------------------------------------


def test_affinity_values():
    net = ab_network()
    assert affinities(net, [0.0, 0.0]).tolist() == [0.0]
    assert affinities(net, [3.0, 1.0]).tolist() == [2.0]
    with pytest.raises(DimensionMismatch):
        affinities(net, [1.0, 2.0, 3.0])


def test_lavoisier_violation_names_reaction():
    with pytest.raises(LavoisierViolation, match=r"reaction 1 \(A <=> B\)"):
        ab_network(masses=(0.028, 0.030))
    ok = dimer_network()
    assert np.all(ok.lavoisier_residuals() == 0.0)


def test_rate_laws():
    net = ab_network(L=3.0)
    s = ThermoPhaseState(S=0.0, N=[1.0, 1.0])
    assert reaction_rates(net, s, [5.0, 5.0]).tolist() == [0.0]
    J = reaction_rates(net, s, [3.0, 1.0])
    A = affinities(net, [3.0, 1.0])
    assert J[0] * A[0] == pytest.approx(3.0 * 4.0)
    ma = ReactionNetwork(["A", "B"], [[1, 0]], [[0, 1]], [1.0, 1.0], MassActionRateLaw([1.0], [1.0], 2.0))
    assert reaction_rates(ma, ThermoPhaseState(N=[0.3, 0.3]), [0.0, 0.0]).tolist() == [0.0]
    with pytest.raises(IndefiniteCoefficient):
        LinearRateLaw([[-1.0]])


def test_reaction_field_equilibrium_and_identities():
    net = dimer_network()
    energy = mixture()
    rng = np.random.default_rng(2)
    for _ in range(50):
        N = rng.uniform(0.005, 0.1, 2)
        s = ThermoPhaseState(S=energy.entropy_at(N, rng.uniform(250, 450)), N=N)
        r = reaction_field(net, energy, s)
        mu, T = energy.partials(N, s.S)
        # mass
        assert abs(net.masses @ r.dN) <= 1e-15 * np.abs(net.masses) @ np.abs(r.dN) + 1e-300
        # dU/dt = mu . N' + T S' = 0
        assert abs(mu @ r.dN + T * r.dS) <= 1e-12 * (np.abs(mu) @ np.abs(r.dN))
        assert r.dS >= 0.0
    lin = ReactionModel(LinearEnergy([4.0, 2.0], 300.0))  # A = 8 - 2 != 0
    net_eq = ReactionNetwork(["A", "B"], [[2, 0]], [[0, 1]], [1.0, 2.0], LinearRateLaw([[1.0]]))
    eq_state = ThermoPhaseState(S=1.0, N=[1.0, 1.0])  # u = (1, 2) gives A = 2 - 2 = 0
    eq = reaction_field(net_eq, ReactionModel(LinearEnergy([1.0, 2.0], 300.0)), eq_state)
    assert np.all(eq.dN == 0.0) and eq.dS == 0.0
    assert reaction_field(net_eq, lin, eq_state).dS > 0


def test_dirac_reduced_equals_reaction_field_exactly():
    net = dimer_network()
    energy = mixture()
    red = dirac_reduce(reaction_total_hamiltonian(energy), net)
    rng = np.random.default_rng(7)
    for _ in range(100):
        N = rng.uniform(0.005, 0.1, 2)
        s = ThermoPhaseState(S=energy.entropy_at(N, rng.uniform(250, 450)), N=N)
        a = red(s)
        b = reaction_field(net, energy, s)
        assert np.array_equal(a.dN, b.dN)
        assert a.dS == b.dS
        assert np.array_equal(a.dW, b.dW)
        assert np.array_equal(a.dnu, b.dnu)


def test_total_hamiltonian_on_constraint_set():
    energy = mixture()
    total = reaction_total_hamiltonian(energy)
    q = np.array([0.03, 0.02, energy.entropy_at([0.03, 0.02], 320.0)])
    for lam in ([0, 0, 0], [1.0, -2.0, 5.0]):
        assert total.value(q, np.zeros(3), lam) == energy.value(q[:2], q[2])
    # generalized energy E = <p, v> - L equals H~ on the Legendre image (p = 0, L = -U)
    L = lambda q_, v_: -energy.value(q_[:2], q_[2])
    assert generalized_energy(L, q, np.array([1.0, 2.0, 3.0]), np.zeros(3)) == total.base(q, np.zeros(3))


def test_dirac_unsupported_structure():
    energy = mixture()
    base = reaction_total_hamiltonian(energy)
    partial = TotalHamiltonian(base.base, base.base_grad, PrimaryConstraintSet.momenta([0, 1], 3))
    with pytest.raises(UnsupportedConstraintStructure):
        dirac_reduce(partial, dimer_network())
    generic = PrimaryConstraintSet(
        phi=lambda q, p: p + q, grad_q=lambda q, p: np.eye(3), grad_p=lambda q, p: np.eye(3), m=3
    )
    with pytest.raises(UnsupportedConstraintStructure):
        dirac_reduce(TotalHamiltonian(base.base, base.base_grad, generic), dimer_network())


def test_dirac_unreduced_keeps_constraints():
    net = dimer_network()
    model = ReactionModel(mixture())
    sys_ = DiracReactionSystem(net, model)
    N = np.array([0.05, 0.01])
    s0 = ThermoPhaseState(S=model.internal.entropy_at(N, 300.0), N=N, nu=[0.0])
    tr = integrate(sys_, sys_.pack(s0), IntegratorConfig(t_end=20.0, rtol=1e-10, atol=1e-14))
    assert tr["phi_max"].max() <= 1e-10
    lam_N = tr["lambda_A"]
    Ndot = np.array([reaction_field(net, model, tr.state(i)).dN[0] for i in range(len(tr))])
    assert np.max(np.abs(lam_N - Ndot)) <= 1e-9 * np.max(np.abs(Ndot))


# nonholonomic ------------------------------------------------------------------


def free_particle():
    model = NonholonomicModel([1.0, 1.0], potential=lambda q: 0.0, potential_grad=lambda q: np.zeros(2))
    cons = LinearConstraintSet(lambda q: np.array([[0.0, 1.0]]), lambda q: np.zeros((1, 2, 2)), m=1, n=2)
    return model, cons


def test_free_particle_straight_line():
    model, cons = free_particle()
    sys_ = NonholonomicSystem(model, cons)
    s0 = ThermoPhaseState(q=[0.0, 0.0], p=[1.0, 0.0])
    tr = integrate(sys_, s0, IntegratorConfig(t_end=5.0, rtol=1e-10))
    np.testing.assert_allclose(tr.y[:, 0], tr.t, rtol=1e-12, atol=1e-12)
    assert np.all(tr.y[:, 1] == 0.0)
    assert np.all(tr["lambda_1"] == 0.0)


def test_singular_multiplier_system():
    model, _ = free_particle()
    cons = LinearConstraintSet(lambda q: np.array([[0.0, 0.0]]), lambda q: np.zeros((1, 2, 2)), m=1, n=2)
    with pytest.raises(SingularMultiplierSystem):
        linear_nonholonomic_field(model, cons, None, ThermoPhaseState(q=[0.0, 0.0], p=[1.0, 0.0]))


def test_skate_matches_analytic_solution():
    # x = (g sin a / (2 w^2)) sin^2(w t), y = (g sin a / (2 w^2)) (w t - sin(2 w t)/2), phi = w t
    g, a, w = 9.81, 0.3, 1.0
    model, cons = scenarios.skate_model(1.0, 1.0, g, a)
    sys_ = NonholonomicSystem(model, cons)
    tr = integrate(sys_, ThermoPhaseState(q=[0.0, 0.0, 0.0], p=[0.0, 0.0, w]), IntegratorConfig(t_end=10.0, rtol=1e-12, atol=1e-14))
    c = g * np.sin(a) / (2 * w**2)
    t = tr.t
    exact = np.column_stack([c * np.sin(w * t) ** 2, c * (w * t - 0.5 * np.sin(2 * w * t)), w * t])
    np.testing.assert_allclose(tr.y[:, :3], exact, rtol=0, atol=1e-8 * c)
    assert tr["constraint_residual"].max() <= 1e-9
