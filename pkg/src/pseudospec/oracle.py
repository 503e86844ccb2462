"""Free-fermion reference spectra for the Hermitian chain.

The gamma = 0 Hamiltonian maps to free fermions (Jordan-Wigner followed by
a Bogolyubov rotation).  Mode energies come out of an N x N singular value
problem, so the full 2^N many-body spectrum is available in closed form and
serves as an independent check on the dense eigensolver, together with the
analytic spin-flip index (-1)^(N + number of excited modes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_CLIP = 1e-12


@dataclass(frozen=True)
class FermionModes:
    """Single-particle mode energies of the quadratic chain."""

    energies: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(e) for e in self.energies)
        if any(e < -_CLIP for e in vals):
            raise ValueError("mode energies must be non-negative")
        vals = tuple(max(e, 0.0) for e in vals)
        if any(a > b for a, b in zip(vals, vals[1:])):
            raise ValueError("mode energies must be sorted ascending")
        object.__setattr__(self, "energies", vals)

    @property
    def ground_energy(self) -> float:
        return -0.5 * sum(self.energies)

    @property
    def n_modes(self) -> int:
        return len(self.energies)


def single_particle_modes(delta: float, coupling: float, n_sites: int) -> FermionModes:
    """Mode energies of H0 = sum Delta sigma^x_j - J sum sigma^z_j sigma^z_{j+1}.

    After Jordan-Wigner the open chain is a quadratic fermion form whose
    excitation energies are twice the singular values of the upper
    bidiagonal N x N block with Delta on the diagonal and -J above it.
    """
    if n_sites < 2:
        raise ValueError("free-fermion reduction needs n_sites >= 2")
    c = np.zeros((n_sites, n_sites))
    np.fill_diagonal(c, delta)
    idx = np.arange(n_sites - 1)
    c[idx, idx + 1] = -coupling
    energies = np.sort(2.0 * np.linalg.svd(c, compute_uv=False))
    return FermionModes(tuple(energies))


def many_body_spectrum(modes: FermionModes) -> np.ndarray:
    """All 2^N occupation energies, sorted ascending."""
    eps = np.asarray(modes.energies)
    n = modes.n_modes
    masks = np.arange(2**n)
    occ = (masks[:, None] >> np.arange(n)[None, :]) & 1
    return np.sort(modes.ground_energy + occ @ eps)


def u_index_oracle(occupation_bitmask: int, n_modes: int) -> int:
    """Spin-flip index of an occupation state: (-1)^(n_modes + excited count).

    The quasiparticle vacuum inherits the fermion parity of the fully
    occupied J = 0 ground state, (-1)^n_modes; it cannot change while the
    modes stay gapped, and each excited mode flips the sign once.
    """
    if occupation_bitmask < 0:
        raise ValueError("bitmask must be non-negative")
    if n_modes < 1:
        raise ValueError("n_modes must be positive")
    return -1 if (n_modes + bin(occupation_bitmask).count("1")) % 2 else 1


def occupation_table(modes: FermionModes) -> list[tuple[float, int]]:
    """(energy, bitmask) pairs sorted by energy, ties broken by bitmask.

    The bitmask's bit k marks mode k (ascending energy order) as excited;
    the associated analytic spin-flip index is
    u_index_oracle(bitmask, n_modes).
    """
    eps = modes.energies
    out = []
    for mask in range(2**modes.n_modes):
        e = modes.ground_energy + sum(
            eps[k] for k in range(modes.n_modes) if mask >> k & 1
        )
        out.append((e, mask))
    out.sort(key=lambda t: (t[0], t[1]))
    return out
