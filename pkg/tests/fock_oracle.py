"""Independent truncated Fock-space simulator used as a test oracle.

Builds every gate as a dense matrix exponential on a photon-number-truncated
Hilbert space and evaluates observables as explicit operator products, so it
shares no code path with the Heisenberg-picture engine. Conventions match
the engine: hbar = 2, x = a + a', p = -i(a - a'), and the cubic phase gate
is exp(i*gamma*x^3/(3*hbar)).
"""
from __future__ import annotations

import numpy as np

from qgrad.ir import CircuitIR, resolve

HBAR = 2.0
TAIL_TOL = 1e-12


def _ladder(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)


def _expm_antihermitian(k: np.ndarray) -> np.ndarray:
    """exp(K) for anti-Hermitian K via eigendecomposition of iK."""
    h = 1j * k
    res = np.max(np.abs(h - h.conj().T))
    if res > 1e-10:
        raise ValueError(f"exponent is not anti-Hermitian (residue {res:.3e})")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return (v * np.exp(-1j * w)) @ v.conj().T


class FockOracle:
    """Dense simulation of a CV circuit at a fixed per-mode photon cutoff."""

    def __init__(self, n_modes: int, cutoff: int):
        self.n_modes = n_modes
        self.cutoff = cutoff
        self.dim = cutoff**n_modes
        a = _ladder(cutoff)
        eye = np.eye(cutoff, dtype=complex)
        self.a = []
        for m in range(n_modes):
            mats = [eye] * n_modes
            mats[m] = a
            full = mats[0]
            for extra in mats[1:]:
                full = np.kron(full, extra)
            self.a.append(full)
        self.x = [am + am.conj().T for am in self.a]
        self.p = [-1j * (am - am.conj().T) for am in self.a]

    def vacuum(self) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[0] = 1.0
        return psi

    def _embed_single(self, local: np.ndarray, mode: int) -> np.ndarray:
        """Kron a single-mode gate into the full register."""
        eye = np.eye(self.cutoff, dtype=complex)
        full = np.array([[1.0 + 0j]])
        for m in range(self.n_modes):
            full = np.kron(full, local if m == mode else eye)
        return full

    def gate(self, kind: str, wires, values) -> np.ndarray:
        a1 = _ladder(self.cutoff)
        if kind == "R":
            (phi,) = values
            local = _expm_antihermitian(1j * phi * (a1.conj().T @ a1))
            return self._embed_single(local, wires[0])
        if kind == "D":
            r, phi = values
            alpha = r * np.exp(1j * phi)
            local = _expm_antihermitian(alpha * a1.conj().T - np.conj(alpha) * a1)
            return self._embed_single(local, wires[0])
        if kind == "S":
            (r,) = values
            local = _expm_antihermitian(r / 2.0 * (a1 @ a1 - a1.conj().T @ a1.conj().T))
            return self._embed_single(local, wires[0])
        if kind == "BS":
            theta, phi = values
            am, bm = self.a[wires[0]], self.a[wires[1]]
            k = theta * (np.exp(1j * phi) * am @ bm.conj().T
                         - np.exp(-1j * phi) * am.conj().T @ bm)
            return self._expm_number_conserving(k)
        if kind == "CUBICPHASE":
            (gamma,) = values
            x1 = a1 + a1.conj().T
            local = _expm_antihermitian(1j * gamma / (3.0 * HBAR) * (x1 @ x1 @ x1))
            return self._embed_single(local, wires[0])
        raise ValueError(f"unsupported gate kind {kind!r}")

    def _expm_number_conserving(self, k: np.ndarray) -> np.ndarray:
        """exp(K) for an exponent that conserves total photon number.

        The exponent is block-diagonal over constant-total-photon sectors, so
        each small block is exponentiated separately (cutoff^n_modes would be
        too large for a dense eigendecomposition at useful cutoffs).
        """
        grids = np.meshgrid(*[np.arange(self.cutoff)] * self.n_modes, indexing="ij")
        totals = sum(grids).reshape(-1)
        off_block = np.abs(k[totals[:, None] != totals[None, :]])
        if off_block.size and off_block.max() > 1e-14:
            raise ValueError("exponent is not number-conserving")
        out = np.zeros_like(k)
        for total in range(int(totals.max()) + 1):
            idx = np.nonzero(totals == total)[0]
            out[np.ix_(idx, idx)] = _expm_antihermitian(k[np.ix_(idx, idx)])
        return out

    def run(self, circuit: CircuitIR, theta) -> np.ndarray:
        psi = self.vacuum()
        for gate in circuit.gates:
            values = [resolve(arg, theta) for arg in gate.args]
            psi = self.gate(gate.kind, gate.wires, values) @ psi
        return psi

    def tail_population(self, psi: np.ndarray, levels: int = 2) -> float:
        """Total probability in the top `levels` photon numbers of any mode."""
        probs = np.abs(psi.reshape((self.cutoff,) * self.n_modes)) ** 2
        worst = 0.0
        for m in range(self.n_modes):
            rolled = np.moveaxis(probs, m, 0)
            worst = max(worst, float(rolled[self.cutoff - levels:].sum()))
        return worst

    def observable_matrix(self, raw_terms) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for coeff, word in raw_terms:
            term = np.eye(self.dim, dtype=complex)
            for mode, ch in word:
                term = term @ (self.x[mode] if ch == "x" else self.p[mode])
            out += coeff * term
        return out

    def expectation(self, circuit: CircuitIR, theta, check_tail: bool = True) -> float:
        psi = self.run(circuit, theta)
        if check_tail:
            tail = self.tail_population(psi)
            if tail > TAIL_TOL:
                raise ValueError(f"truncation tail {tail:.3e} above {TAIL_TOL:g}; raise the cutoff")
        obs = self.observable_matrix(circuit.observable.raw_terms)
        value = np.vdot(psi, obs @ psi)
        return float(value.real)

    def word_matrix(self, word) -> np.ndarray:
        term = np.eye(self.dim, dtype=complex)
        for mode, ch in word:
            term = term @ (self.x[mode] if ch == "x" else self.p[mode])
        return term

    def polynomial_matrix(self, poly) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for mono, coeff in poly.terms.items():
            out += coeff * self.word_matrix(mono.factors())
        return out
