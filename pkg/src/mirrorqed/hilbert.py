"""Labeled tensor-product spaces (qubit x truncated bosonic modes).

A :class:`CompositeSpace` enumerates occupation tuples ``(s, n_1, ..., n_M)``
with the qubit first and the modes in ascending-nu order.  An optional cap on
the total excitation number keeps single- and few-excitation problems at
their natural dimension instead of the full Fock product.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-12


class DimensionMismatchError(ValueError):
    """Local operator dimension does not match the targeted factor."""


class CompositeSpace:
    """Qubit plus ``n_modes`` bosonic modes, each truncated at ``n_max`` photons."""

    def __init__(self, n_modes: int, n_max: int, max_excitations: int | None = None):
        if n_modes < 0 or n_max < 0:
            raise ValueError("n_modes and n_max must be non-negative")
        if max_excitations is not None and max_excitations < 0:
            raise ValueError("max_excitations must be non-negative")
        self.n_modes = n_modes
        self.n_max = n_max
        self.max_excitations = max_excitations
        self.factor_dims = (2,) + (n_max + 1,) * n_modes
        if max_excitations is None:
            basis = list(itertools.product(*(range(d) for d in self.factor_dims)))
        else:
            # walk only occupations with bounded total — the full product is
            # exponential in the number of modes
            basis = []

            def extend(prefix, budget, factor):
                if factor == len(self.factor_dims):
                    basis.append(tuple(prefix))
                    return
                for n in range(min(self.factor_dims[factor] - 1, budget) + 1):
                    prefix.append(n)
                    extend(prefix, budget - n, factor + 1)
                    prefix.pop()

            extend([], max_excitations, 0)
        self.basis = tuple(basis)
        self.index = {occ: i for i, occ in enumerate(basis)}
        self.dim = len(basis)

    @property
    def n_factors(self) -> int:
        return 1 + self.n_modes

    def __repr__(self):
        cap = self.max_excitations
        return (
            f"CompositeSpace(n_modes={self.n_modes}, n_max={self.n_max}, "
            f"max_excitations={cap}, dim={self.dim})"
        )

    def __eq__(self, other):
        return (
            isinstance(other, CompositeSpace)
            and self.n_modes == other.n_modes
            and self.n_max == other.n_max
            and self.max_excitations == other.max_excitations
        )

    def __hash__(self):
        return hash((self.n_modes, self.n_max, self.max_excitations))

    def basis_state(self, occ) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index[tuple(occ)]] = 1.0
        return v

    def vacuum(self, excited: bool = False) -> np.ndarray:
        occ = (1 if excited else 0,) + (0,) * self.n_modes
        return self.basis_state(occ)

    def excitations(self) -> np.ndarray:
        """Total excitation number of each basis state."""
        return np.array([sum(occ) for occ in self.basis])

    def embed(self, local: np.ndarray, factor: int) -> np.ndarray:
        """Lift a single-factor operator; identity on all other factors.

        On a capped space this is the compression P (op x 1) P with P the
        projector onto the kept basis.
        """
        local = np.asarray(local, dtype=complex)
        d = self.factor_dims[factor]
        if local.shape != (d, d):
            raise DimensionMismatchError(
                f"factor {factor} has dimension {d}, operator is {local.shape}"
            )
        out = np.zeros((self.dim, self.dim), dtype=complex)
        rows, cols = np.nonzero(local)
        for i, occ in enumerate(self.basis):
            n = occ[factor]
            for r, c in zip(rows, cols):
                if c != n:
                    continue
                target = occ[:factor] + (int(r),) + occ[factor + 1 :]
                j = self.index.get(target)
                if j is not None:
                    out[j, i] += local[r, c]
        return out

    def mode_factor(self, mode: int) -> int:
        """Factor index of the mode at storage position ``mode`` (0-based)."""
        if not 0 <= mode < self.n_modes:
            raise IndexError(f"mode index {mode} out of range")
        return 1 + mode

    def boundary_projector(self) -> np.ndarray:
        """Diagonal projector onto truncation-boundary states.

        A state is on the boundary if any mode sits in its top Fock level or,
        on a capped space, if the total excitation number equals the cap.
        Population here measures truncation leakage.
        """
        diag = np.zeros(self.dim)
        for i, occ in enumerate(self.basis):
            at_top = self.n_modes > 0 and max(occ[1:]) >= self.n_max > 0
            at_cap = (
                self.max_excitations is not None
                and sum(occ) >= self.max_excitations > 0
            )
            if at_top or at_cap:
                diag[i] = 1.0
        return np.diag(diag)

    def ptrace_qubit(self, rho: np.ndarray) -> np.ndarray:
        """Reduced 2x2 qubit state."""
        out = np.zeros((2, 2), dtype=complex)
        for i, occ_i in enumerate(self.basis):
            rest = occ_i[1:]
            other = (1 - occ_i[0],) + rest
            out[occ_i[0], occ_i[0]] += rho[i, i]
            j = self.index.get(other)
            if j is not None and occ_i[0] == 1:
                out[1, 0] += rho[i, j]
                out[0, 1] += rho[j, i]
        return out


@dataclass(frozen=True)
class QuantumOperator:
    """Dense operator bound to the space it acts on."""

    space: CompositeSpace
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatchError(
                f"matrix shape {self.matrix.shape} vs space dim {self.space.dim}"
            )

    def dag(self) -> "QuantumOperator":
        return QuantumOperator(self.space, self.matrix.conj().T)

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T))) < tol


def destroy(dim: int) -> np.ndarray:
    """Truncated annihilation operator; [a, a+] = 1 except in the top level."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)


def sigma_minus() -> np.ndarray:
    return np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


def sigma_plus() -> np.ndarray:
    return sigma_minus().conj().T


def sigma_x() -> np.ndarray:
    return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def number_op(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)
