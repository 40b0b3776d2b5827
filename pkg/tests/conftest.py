"""Shared fixtures and a brute-force dense spin oracle.

The dense helpers build operators with Kronecker products in the basis
``(up, down)`` per site, site 0 leftmost. They share no code with
``ldechain.ed`` and serve as an independent check on it.
"""

from functools import reduce

import numpy as np
import pytest
from scipy import sparse
from scipy.linalg import expm

SZ = np.diag([0.5, -0.5])
SP = np.array([[0.0, 1.0], [0.0, 0.0]])
SM = SP.T
SX = 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]])
SY = 0.5 * np.array([[0.0, -1j], [1j, 0.0]])
I2 = np.eye(2)


def site_op(op, site, n):
    return reduce(np.kron, [op if k == site else I2 for k in range(n)])


def _sparse_site_op(op, site, n):
    return reduce(sparse.kron, [sparse.csr_matrix(op if k == site else I2) for k in range(n)]).tocsr()


def dense_hamiltonian(couplings):
    # SxSx + SySy = (S+S- + S-S+) / 2 keeps everything real
    n = len(couplings) + 1
    h = sparse.csr_matrix((2**n, 2**n))
    for k, J in enumerate(couplings):
        a, b = _sparse_site_op(SP, k, n), _sparse_site_op(SM, k + 1, n)
        hop = a @ b
        h = h - 0.5 * J * (hop + hop.T)
    return h.toarray()


def dense_gibbs(couplings, T):
    h = dense_hamiltonian(couplings)
    e, v = np.linalg.eigh(h)
    if T == 0:
        w = (e - e[0] < 1e-9).astype(float)
    else:
        w = np.exp(-(e - e[0]) / T)
    w /= w.sum()
    return (v * w) @ v.conj().T


def dense_reduce(rho, sites, n):
    """Partial trace onto ``sites`` (ordered as given)."""
    t = rho.reshape((2,) * (2 * n))
    keep = list(sites)
    rest = [k for k in range(n) if k not in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    bra = [letters[k] for k in range(n)]
    ket = [letters[k].upper() for k in range(n)]
    for k in rest:
        ket[k] = bra[k]
    out = "".join(bra[k] for k in keep) + "".join(ket[k] for k in keep)
    r = np.einsum("".join(bra) + "".join(ket) + "->" + out, t)
    d = 2 ** len(keep)
    return r.reshape(d, d)


def dense_evolve(rho, couplings, t):
    u = expm(-1j * dense_hamiltonian(couplings) * t)
    return u @ rho @ u.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(20091021)


# ---------------------------------------------------------------------------
# Acceptance report

_ACCEPTANCE = {}


def record_acceptance(key, passed, detail):
    _ACCEPTANCE[key] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{key:<4} {'PASS' if passed else 'FAIL'}  {detail}")
