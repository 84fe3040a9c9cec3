import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pdae_lab.convergence import discrete_l2
from pdae_lab.discretize import GridSpec, assemble
from pdae_lab.integrate import (
    NonintegerStepCount,
    SingularStageMatrix,
    factor_stage_matrix,
    initial_state,
    integrate,
    step,
)
from pdae_lab.problem import PdaeProblem, builtin, exact_on_grid
from pdae_lab.tableau import backward_euler, radau_iia, stability_function

TABLEAUS = [backward_euler(), radau_iia(2), radau_iia(3)]


def _const_fn(vec):
    vec = np.asarray(vec, dtype=float)

    def fn(t, x):
        return np.tile(vec, (np.size(x), 1)) if np.ndim(x) else vec.copy()

    return fn


def ode_problem(A, C, forcing=None, u0=None, te=1.0):
    """``A u' + C u = f`` on a single interior point (B = 0 removes space)."""
    A, C = np.atleast_2d(A).astype(float), np.atleast_2d(C).astype(float)
    n = A.shape[0]
    zero = np.zeros(n)
    return PdaeProblem(
        A=A, B=np.zeros((n, n)), C=C, r=0.0, x_lo=0.0, x_hi=1.0, t0=0.0, te=te,
        forcing=forcing or _const_fn(zero),
        initial=lambda x: np.tile(zero if u0 is None else u0, (np.size(x), 1)) if np.ndim(x) else (zero if u0 is None else np.asarray(u0, float)),
        dirichlet_lo=lambda t: zero, dirichlet_hi=lambda t: zero,
    )


def _mol(p, N=1):
    g = GridSpec.for_problem(p, N)
    return assemble(p, g), g


def test_scalar_stage_matrix():
    p = ode_problem([[1.0]], [[-1.0]])  # u' = u
    mol, _ = _mol(p)
    f = factor_stage_matrix(mol, backward_euler(), 0.25, method="dense")
    assert f.factors.determinant() == pytest.approx(1 - 0.25)


@pytest.mark.parametrize("t", TABLEAUS, ids=lambda t: t.label)
def test_decoupled_modes_factor(t):
    lams = np.array([0.0, -1.0, -30.0, -1e4])
    p = ode_problem(np.eye(4), -np.diag(lams))
    mol, _ = _mol(p)
    fact = factor_stage_matrix(mol, t, 0.1, method="dense")
    S = np.kron(np.eye(t.s), mol.mass) - 0.1 * np.kron(t.a, mol.stiffness)
    blocks = [np.eye(t.s) - 0.1 * lam * t.a for lam in lams]
    for k, blk in enumerate(blocks):
        idx = np.arange(t.s) * 4 + k
        np.testing.assert_allclose(S[np.ix_(idx, idx)], blk)
    assert abs(fact.factors.determinant() - np.prod([np.linalg.det(b) for b in blocks])) <= 1e-8 * abs(
        fact.factors.determinant()
    )


@pytest.mark.parametrize("t", TABLEAUS, ids=lambda t: t.label)
def test_pure_algebraic_stage_matrix(t):
    p = ode_problem(np.zeros((2, 2)), np.array([[2.0, 1.0], [0.0, 1.0]]))
    mol, _ = _mol(p)
    for tau in (1e-4, 0.5, 10.0):
        factor_stage_matrix(mol, t, tau, method="dense")


def test_singular_stage_matrix():
    p = ode_problem(np.zeros((1, 1)), np.zeros((1, 1)))
    mol, _ = _mol(p)
    with pytest.raises(SingularStageMatrix):
        factor_stage_matrix(mol, backward_euler(), 0.1)


@pytest.mark.parametrize("t", TABLEAUS, ids=lambda t: t.label)
def test_zero_system_is_identity_map(t):
    p = ode_problem(np.eye(3), np.zeros((3, 3)))
    mol, _ = _mol(p)
    fact = factor_stage_matrix(mol, t, 0.2)
    U = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(step(fact, U, 0.0), U)


@given(
    lam=st.complex_numbers(max_magnitude=1e3).filter(lambda z: z.real <= 0),
    tau=st.floats(1e-3, 1.0),
    s=st.sampled_from([1, 2, 3]),
)
def test_one_step_is_stability_function(lam, tau, s):
    t = radau_iia(s)
    # M = I, D = lam I on real and imaginary parts: u' = lam u written as a real 2x2 system
    D = np.array([[lam.real, -lam.imag], [lam.imag, lam.real]])
    p = ode_problem(np.eye(2), -D)
    mol, _ = _mol(p)
    fact = factor_stage_matrix(mol, t, tau)
    U1 = step(fact, np.array([1.0, 0.0]), 0.0)
    R = stability_function(t, tau * lam)
    assert abs(complex(U1[0], U1[1]) - R) <= 1e-12 * max(1.0, abs(R))


@pytest.mark.parametrize("t", TABLEAUS, ids=lambda t: t.label)
def test_complex_state_matches_stability_function(t):
    lams = np.array([-0.5, -3.0, -100.0])
    p = ode_problem(np.eye(3), -np.diag(lams))
    mol, _ = _mol(p)
    fact = factor_stage_matrix(mol, t, 0.1)
    U = np.array([1 + 1j, 2 - 1j, -1j])
    R = np.array([stability_function(t, 0.1 * lam) for lam in lams])
    np.testing.assert_allclose(step(fact, U, 0.0), R * U, rtol=1e-12)


def _homogeneous(bid):
    p = builtin(bid)
    zero = np.zeros(p.n)
    return PdaeProblem(
        A=p.A, B=p.B, C=p.C, r=p.r, x_lo=p.x_lo, x_hi=p.x_hi, t0=p.t0, te=p.te,
        forcing=_const_fn(zero), initial=lambda x: zero, dirichlet_lo=lambda t: zero, dirichlet_hi=lambda t: zero,
    )


@pytest.mark.parametrize("bid", ["index3-btcs", "coil"])
@given(seed=st.integers(0, 2**31 - 1), alpha=st.floats(-5, 5), beta=st.floats(-5, 5))
def test_step_map_is_linear(bid, seed, alpha, beta):
    p = _homogeneous(bid)
    mol, _ = _mol(p, 6)
    fact = factor_stage_matrix(mol, radau_iia(3), 0.05)
    rng = np.random.default_rng(seed)
    U, V = rng.standard_normal((2, mol.dim))
    lhs = step(fact, alpha * U + beta * V, 0.0)
    rhs = alpha * step(fact, U, 0.0) + beta * step(fact, V, 0.0)
    scale = max(1.0, np.max(np.abs(lhs)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale


@pytest.mark.parametrize("t", [radau_iia(2), radau_iia(3), backward_euler()], ids=lambda t: t.label)
def test_stiffly_accurate_algebraic_constraint(t):
    g = lambda tt: np.array([np.sin(3 * tt) + tt**7, np.exp(-tt)])
    forcing = lambda tt, x: np.tile(g(tt), (np.size(x), 1)) if np.ndim(x) else g(tt)
    p = ode_problem(np.zeros((2, 2)), np.eye(2), forcing=forcing, u0=g(0.0))
    mol, _ = _mol(p)
    tau = 0.1
    fact = factor_stage_matrix(mol, t, tau)
    U = g(0.0)
    for m in range(5):
        U = step(fact, U, m * tau)
        np.testing.assert_allclose(U, g((m + 1) * tau), rtol=0, atol=1e-13)


@pytest.mark.parametrize("t", TABLEAUS, ids=lambda t: t.label)
def test_time_independent_exact_solution_is_preserved(t):
    base = builtin("radau-index1-inhomog")
    prof = lambda x: np.stack(np.broadcast_arrays(1 + x, 2 - x, 3 * x), axis=-1)
    u = lambda tt, x: prof(x)
    forcing = lambda tt, x: prof(x) @ base.C.T
    p = PdaeProblem(
        A=base.A, B=base.B, C=base.C, r=0.0, x_lo=-1.0, x_hi=1.0, t0=0.0, te=1.0,
        forcing=forcing, initial=lambda x: prof(x),
        dirichlet_lo=lambda tt: prof(-1.0), dirichlet_hi=lambda tt: prof(1.0), exact=u,
    )
    g = GridSpec.for_problem(p, 9)
    tr = integrate(p, g, t, 0.1)
    np.testing.assert_allclose(tr.final, tr.states[0], atol=1e-12)
    np.testing.assert_allclose(tr.final, exact_on_grid(p, 1.0, g), atol=1e-12)


def test_btcs_rate_at_fine_steps():
    p = builtin("index3-btcs")
    g = GridSpec.for_problem(p, 15)
    ex = exact_on_grid(p, p.te, g)
    errs = [discrete_l2(integrate(p, g, backward_euler(), 0.1 / 2**j).final - ex, g.h) for j in (6, 7)]
    assert np.log2(errs[0] / errs[1]) == pytest.approx(0.99, abs=0.02)


def test_coil_constraint_after_index_steps():
    p = builtin("coil")
    g = GridSpec.for_problem(p, 7)
    mol = assemble(p, g)
    tau = 0.05
    fact = factor_stage_matrix(mol, radau_iia(3), tau)
    U = initial_state(p, g)
    for m in range(2):
        U = step(fact, U, m * tau)
    res = (mol.stiffness @ U + mol.forcing(2 * tau)).reshape(g.N, p.n)
    # the first row of A is zero: -u1_xx + u2 = 0 must hold at every node
    assert np.max(np.abs(res[:, 0])) <= 1e-8


@pytest.mark.parametrize("bid", ["radau-index1-inhomog", "coil"])
def test_fresh_factorization_per_step_matches_reuse(bid):
    p = builtin(bid)
    g = GridSpec.for_problem(p, 9)
    mol = assemble(p, g)
    tau = 0.1
    t = radau_iia(3)
    reused = integrate(p, g, t, tau, mol=mol).final
    U = initial_state(p, g)
    for m in range(10):
        U = step(factor_stage_matrix(mol, t, tau), U, m * tau)
    assert np.max(np.abs(U - reused)) <= 1e-13 * max(1.0, np.max(np.abs(reused)))


def test_dense_and_banded_agree():
    p = builtin("radau-index1-homog4")
    g = GridSpec.for_problem(p, 31)
    mol = assemble(p, g)
    t = radau_iia(3)
    a = integrate(p, g, t, 0.05, fact=factor_stage_matrix(mol, t, 0.05, method="dense")).final
    b = integrate(p, g, t, 0.05, fact=factor_stage_matrix(mol, t, 0.05, method="banded")).final
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_auto_method_switches_to_banded():
    p = builtin("radau-index1-inhomog")
    small = assemble(p, GridSpec.for_problem(p, 9))
    large = assemble(p, GridSpec.for_problem(p, 255))
    assert not factor_stage_matrix(small, radau_iia(3), 0.1).banded
    assert factor_stage_matrix(large, radau_iia(3), 0.1).banded


def test_trajectory_bookkeeping():
    p = builtin("index3-btcs")
    g = GridSpec.for_problem(p, 5)
    full = integrate(p, g, backward_euler(), 0.25, keep_trajectory=True)
    short = integrate(p, g, backward_euler(), 0.25)
    assert full.steps_taken == short.steps_taken == 4
    np.testing.assert_allclose(full.times, [0, 0.25, 0.5, 0.75, 1.0])
    assert len(short.states) == 2
    np.testing.assert_array_equal(full.final, short.final)


def test_noninteger_step_count():
    p = builtin("index3-btcs")
    with pytest.raises(NonintegerStepCount):
        integrate(p, GridSpec.for_problem(p, 3), backward_euler(), 0.3)
