"""Shared oracles. These deliberately avoid the package's own generators."""

import numpy as np
import pytest


def ref_hamiltonian(dp, d, op=1.0, os_=1.0, dim=3):
    H = np.zeros((dim, dim), dtype=complex)
    H[:3, :3] = 0.5 * np.array([[0, op, 0], [op, 2 * dp, os_], [0, os_, 2 * d]])
    return H


def ref_rhs(rho, H, ops):
    out = -1j * (H @ rho - rho @ H)
    for L in ops:
        Ld = L.conj().T
        out = out + L @ rho @ Ld - 0.5 * (Ld @ L @ rho + rho @ Ld @ L)
    return out


def ref_rk4(rho, H_of_t, ops, T, n_steps):
    """Plain fixed-step RK4 on the density matrix."""
    h = T / n_steps
    for k in range(n_steps):
        t = k * h
        H0, Hm, H1 = H_of_t(t), H_of_t(t + h / 2), H_of_t(t + h)
        k1 = ref_rhs(rho, H0, ops)
        k2 = ref_rhs(rho + h / 2 * k1, Hm, ops)
        k3 = ref_rhs(rho + h / 2 * k2, Hm, ops)
        k4 = ref_rhs(rho + h * k3, H1, ops)
        rho = rho + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


def ref_pure_evolution(H, psi0, t):
    """Closed form through the eigendecomposition of a constant Hamiltonian."""
    w, V = np.linalg.eigh(H)
    return V @ (np.exp(-1j * w * t) * (V.conj().T @ psi0))


def random_state(rng, dim):
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
