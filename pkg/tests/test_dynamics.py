import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from dampedcasimir import analytic, dynamics, fock, kernels
from dampedcasimir.dynamics import IntegratorOptions
from dampedcasimir.errors import (
    DegenerateKernel,
    DimensionMismatch,
    ObservableNotRegistered,
    TruncationLeak,
)
from dampedcasimir.params import SystemParams, derive

SMALL = derive(SystemParams.from_ratios(0.5, 10.0, 3.0))


def dense(L):
    return L.matrix.toarray()


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = x @ x.conj().T
    return rho / np.trace(rho)


# ---- generator construction


def test_dissipator_on_single_photon():
    sp = fock.HilbertSpace(4)
    D = dynamics.lindblad_dissipator(fock.annihilation(sp))
    one = fock.fock_state(sp, 1).projector().matrix
    expected = np.zeros((4, 4), dtype=complex)
    expected[0, 0], expected[1, 1] = 2.0, -2.0
    np.testing.assert_allclose(D.apply(one), expected, atol=1e-15)
    np.testing.assert_allclose(D.apply(fock.fock_state(sp, 0).projector()), 0, atol=1e-15)


def test_superoperator_algebra():
    sp = fock.HilbertSpace(5)
    H = fock.number(sp)
    a = fock.annihilation(sp)
    L = dynamics.hamiltonian_part(H) + 0.3 * dynamics.lindblad_dissipator(a)
    rho = random_state(5, 0)
    ref = -1j * (H.matrix @ rho - rho @ H.matrix) + 0.3 * (
        2 * a.matrix @ rho @ a.matrix.conj().T
        - a.matrix.conj().T @ a.matrix @ rho - rho @ a.matrix.conj().T @ a.matrix)
    np.testing.assert_allclose(L.apply(rho), ref, atol=1e-13)
    np.testing.assert_allclose((2 * L).apply(rho), 2 * ref, atol=1e-13)
    with pytest.raises(DimensionMismatch):
        L + dynamics.hamiltonian_part(fock.number(fock.HilbertSpace(6)))
    with pytest.raises(DimensionMismatch):
        dynamics.Superoperator(sp, np.eye(4))


@pytest.mark.parametrize("model", dynamics.MODELS)
def test_trace_preserving_and_hermiticity_preserving(model):
    L = dynamics.build_liouvillian(model, SMALL, fock.HilbertSpace(20))
    assert L.trace_defect() < 1e-9
    out = L.apply(random_state(20, 1))
    assert np.max(np.abs(out - out.conj().T)) < 1e-12


def test_unknown_model():
    with pytest.raises(ValueError):
        dynamics.build_liouvillian("nonsense", SMALL, fock.HilbertSpace(4))


def test_spectrum_dissipative_with_expected_rates():
    L = dynamics.liouvillian_microscopic(SMALL, fock.HilbertSpace(24))
    eig = scipy.linalg.eigvals(dense(L))
    assert eig.real.max() < 1e-10
    gr, Om = SMALL.gamma_r, SMALL.Omega
    # truncation at dim 24 shifts these by ~1e-5
    for target in (-gr + 1j * Om, -gr - 1j * Om, -2 * gr):
        assert np.min(np.abs(eig - target)) < 1e-4, target
    vals, _, _ = dynamics.kernel_spectrum(L, k=4)
    assert abs(vals[0]) < 1e-10
    assert abs(vals[1] + 2 * gr) < 1e-4


# ---- evolution


def test_zero_generator_is_constant():
    sp = fock.HilbertSpace(6)
    rho = random_state(6, 2)
    traj = dynamics.evolve(dynamics.Superoperator(sp), rho, [0, 1, 5],
                           opts=IntegratorOptions(retain_states=True, leak_threshold=None))
    for s in traj.states:
        np.testing.assert_allclose(s, rho, atol=1e-15)


def test_truncation_leak_and_mismatch():
    sp = fock.HilbertSpace(8)
    L = dynamics.liouvillian_microscopic(SMALL, sp)
    with pytest.raises(TruncationLeak):
        dynamics.evolve(L, dynamics.vacuum(sp), [0, 5])
    with pytest.raises(DimensionMismatch):
        dynamics.evolve(L, np.eye(5), [0, 1])
    with pytest.raises(DimensionMismatch):
        dynamics.evolve(L, dynamics.vacuum(sp), [0, 1], {"n": fock.number(fock.HilbertSpace(9))})
    with pytest.raises(ValueError):
        dynamics.evolve(L, dynamics.vacuum(sp), [1, 0])


def test_observable_series_lookup():
    sp = fock.HilbertSpace(40)
    L = dynamics.liouvillian_microscopic(SMALL, sp)
    n = fock.number(sp)
    traj = dynamics.evolve(L, dynamics.vacuum(sp), np.linspace(0, 2, 5), {"n": n},
                           IntegratorOptions(retain_states=True))
    np.testing.assert_array_equal(dynamics.observable_series(traj, n).values, traj.observables["n"])
    ident = dynamics.observable_series(traj, fock.identity(sp))
    np.testing.assert_allclose(ident.real, 1.0, atol=1e-12)
    with pytest.raises(ObservableNotRegistered):
        traj.series("missing")
    bare = dynamics.evolve(L, dynamics.vacuum(sp), [0, 1], {"n": n})
    with pytest.raises(ObservableNotRegistered):
        dynamics.observable_series(bare, fock.identity(sp))


def test_diagnostics_and_exact_hermiticity():
    sp = fock.HilbertSpace(40)
    L = dynamics.liouvillian_microscopic(SMALL, sp)
    traj = dynamics.evolve(L, dynamics.vacuum(sp), np.linspace(0, 3, 7),
                           opts=IntegratorOptions(diagnostics=True))
    assert traj.stats["hermitian"]
    assert np.max(np.abs(traj.diagnostics["trace"] - 1)) < 1e-12
    assert np.max(traj.diagnostics["hermiticity_defect"]) == 0.0
    assert np.min(traj.diagnostics["min_eigenvalue"]) > -1e-10


def test_microscopic_photon_number_matches_closed_form():
    t = np.linspace(0, 4, 9) / SMALL.raw.gamma
    run = dynamics.simulate_photon_number(SMALL, t)
    assert run.retries == 0
    np.testing.assert_allclose(run.photon_number, analytic.n_microscopic(t, SMALL), atol=1e-9)


def test_phenomenological_photon_number_matches_closed_form():
    t = np.linspace(0, 3, 7)
    run = dynamics.simulate_photon_number(SMALL, t, model="phenomenological")
    np.testing.assert_allclose(run.photon_number, analytic.n_phenomenological(t, SMALL), atol=1e-9)


def test_lossless_limit():
    p = derive(SystemParams(omega0=100, epsilon=0.05, K=10, gamma=0, kappa=0))
    t = np.linspace(0, 2, 9)
    for model in dynamics.MODELS:
        run = dynamics.simulate_photon_number(p, t, model=model)
        np.testing.assert_allclose(run.photon_number, analytic.n_lossless(t, p), atol=1e-9)


def test_auto_retry_doubles_dimension(monkeypatch):
    monkeypatch.setattr(dynamics, "vacuum_run_dim", lambda model, p, times: 10)
    run = dynamics.simulate_photon_number(SMALL, [0.0, 1.0])
    assert run.retries >= 1 and run.dim >= 20
    with pytest.raises(TruncationLeak):
        dynamics.simulate_photon_number(SMALL, [0.0, 1.0], dim=10)


def test_representation_equivalence():
    # -i[Omega n, .] + gamma_r(N+1) L[a] + gamma_r N L[a+] conjugated by S(r)
    p = SMALL
    sp = fock.HilbertSpace(80)
    U = fock.squeeze(sp, p.r).matrix
    a = fock.annihilation(sp).matrix
    Lb = dynamics.Superoperator(sp, p.Omega * fock.number(sp).matrix,
                                [(p.gamma_r * (p.N_Omega + 1), a), (p.gamma_r * p.N_Omega, a.conj().T)])
    La = dynamics.liouvillian_microscopic(p, sp)
    vac = dynamics.vacuum(sp).matrix
    o = IntegratorOptions(retain_states=True, rtol=1e-11, atol=1e-14)
    t = [0.0, 0.5, 2.0]
    ra = dynamics.evolve(La, vac, t, opts=o).states
    rb = dynamics.evolve(Lb, U.conj().T @ vac @ U, t, opts=o).states
    for x, y in zip(ra, rb):
        assert np.max(np.abs((U @ y @ U.conj().T - x)[:12, :12])) < 1e-8


@pytest.mark.skipif(len(kernels.BACKENDS) < 2, reason="compiled extension not built")
def test_backends_give_same_trajectory():
    t = np.linspace(0, 2, 5)
    runs = [dynamics.simulate_photon_number(SMALL, t, opts=IntegratorOptions(backend=b))
            for b in ("compiled", "python")]
    assert np.max(np.abs(runs[0].photon_number - runs[1].photon_number)) < 1e-11


# ---- steady states


def test_pure_loss_relaxes_to_vacuum():
    sp = fock.HilbertSpace(10)
    L = dynamics.hamiltonian_part(fock.number(sp)) + 0.5 * dynamics.lindblad_dissipator(fock.annihilation(sp))
    rho = dynamics.steady_state(L)
    np.testing.assert_allclose(rho.matrix, dynamics.vacuum(sp).matrix, atol=1e-12)


def test_zero_temperature_steady_state_is_squeezed_vacuum():
    p = derive(SystemParams.from_ratios(0.5, 10.0, 0.0))
    sp = fock.HilbertSpace(dynamics.steady_dim(p))
    rho = dynamics.steady_state(dynamics.liouvillian_microscopic(p, sp))
    ref = fock.squeezed_thermal_state(sp, p.r, 0.0)
    assert 1 - fock.fidelity(rho, ref) < 1e-10


@settings(max_examples=15)
@given(x=st.floats(0.1, 0.7), hk=st.floats(0.5, 10.0))
def test_steady_state_photon_number(x, hk):
    p = derive(SystemParams.from_ratios(x, 10.0, hk))
    sp = fock.HilbertSpace(dynamics.steady_dim(p))
    rho = dynamics.steady_state(dynamics.liouvillian_microscopic(p, sp))
    assert abs(fock.expectation(rho, fock.number(sp)).real - p.n_st) < 1e-8 * max(1, p.n_st)


def test_phenomenological_steady_state():
    sp = fock.HilbertSpace(40)
    rho = dynamics.steady_state(dynamics.liouvillian_phenomenological(SMALL, sp))
    assert abs(fock.expectation(rho, fock.number(sp)).real - SMALL.n_st_ph) < 1e-6


def test_evolve_method_agrees_with_kernel():
    sp = fock.HilbertSpace(dynamics.steady_dim(SMALL))
    L = dynamics.liouvillian_microscopic(SMALL, sp)
    a = dynamics.steady_state(L)
    b = dynamics.steady_state(L, method="evolve", t_final=40 / SMALL.gamma_r)
    assert np.max(np.abs(a.matrix - b.matrix)) < 1e-8
    with pytest.raises(ValueError):
        dynamics.steady_state(L, method="evolve")
    with pytest.raises(ValueError):
        dynamics.steady_state(L, method="magic")


def test_degenerate_kernel():
    L = dynamics.hamiltonian_part(fock.number(fock.HilbertSpace(6)))
    with pytest.raises(DegenerateKernel):
        dynamics.steady_state(L)
