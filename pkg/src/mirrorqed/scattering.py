"""Coherent-pulse drives and input-output observables.

The incoming coherent pulse drives every retained mode through the shared
loss channel; the outgoing field is the input displaced by the radiated
collective mode, O(t) = E_in(t) * 1 + i sqrt(gamma) A.  The drive carries the
opposite sign so that, with this output convention, photon flux is conserved
(a transparent block transmits |E_in|^2 unchanged).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hilbert import CompositeSpace
from .lindblad import collective_mode_op, total_excitation_op
from .model import EffectiveModel, ParameterError
from .results import EvolutionResult


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian coherent input: bandwidth W, center t0, mean photons n_ph."""

    W: float
    t0: float
    n_ph: float
    delta_in: float = 0.0  # carrier detuning from the atom (rotating frame)

    def __post_init__(self):
        if self.W <= 0:
            raise ParameterError("W must be positive")
        if self.n_ph < 0:
            raise ParameterError("n_ph must be non-negative")


def gaussian_envelope(spec: PulseSpec, t):
    """E_in(t), normalized so that the integral of |E_in|^2 is n_ph."""
    t = np.asarray(t, dtype=float)
    amp = (
        math.sqrt(spec.n_ph)
        * (spec.W**2 / (2.0 * math.pi)) ** 0.25
        * np.exp(-0.25 * spec.W**2 * (t - spec.t0) ** 2)
    )
    out = amp * np.exp(-1j * spec.delta_in * t)
    return out if out.ndim else complex(out)


def build_drive_term(model: EffectiveModel, spec: PulseSpec, space: CompositeSpace | None = None):
    """Drive coefficient and (optionally) the collective raising operator.

    Returns (coeff_fn, op) suitable for the td_terms of the integrators:
    H(t) += coeff(t) * op + h.c., with op = sum_nu a_nu^dagger.  The minus
    sign pairs the drive with the output convention of output_observables.
    """
    if model.frame != "rotating":
        raise ParameterError("pulse drives are defined in the rotating frame")
    root_gamma = math.sqrt(model.gamma)

    def coeff(t: float) -> complex:
        return -root_gamma * gaussian_envelope(spec, t)

    if space is None:
        return coeff, None
    return coeff, collective_mode_op(space).conj().T


def output_operator(space: CompositeSpace, gamma: float, E_in: complex) -> np.ndarray:
    """O = E_in * 1 + i sqrt(gamma) A at one instant."""
    O = 1j * math.sqrt(gamma) * collective_mode_op(space)
    O[np.diag_indices_from(O)] += E_in
    return O


def make_output_e_ops(space: CompositeSpace, model: EffectiveModel, spec: PulseSpec | None):
    """Callable observables I_out and G2 for the MCWF engine.

    I_out = <O+ O>, G2 = <O+ O+ O O>, evaluated on normalized states; the
    coherent input amplitude enters as a scalar displacement.
    """
    A = collective_mode_op(space)
    rg = math.sqrt(model.gamma)

    def envelope(t: float) -> complex:
        return gaussian_envelope(spec, t) if spec is not None else 0.0

    def apply_O(t: float, psi: np.ndarray) -> np.ndarray:
        return envelope(t) * psi + 1j * rg * (A @ psi)

    def i_out(t: float, psi: np.ndarray) -> float:
        Op = apply_O(t, psi)
        return float(np.vdot(Op, Op).real)

    def g2(t: float, psi: np.ndarray) -> float:
        OOp = apply_O(t, apply_O(t, psi))
        return float(np.vdot(OOp, OOp).real)

    return {"I_out": i_out, "G2": g2}


def output_observables(result: EvolutionResult, model: EffectiveModel, space: CompositeSpace, spec: PulseSpec | None = None):
    """(I_out(t), G2(t)) from a density-matrix evolution with retained states."""
    if result.states is None:
        raise ParameterError("evolution result does not retain states")
    I_out = np.empty(len(result.t))
    G2 = np.empty(len(result.t))
    for i, (t, rho) in enumerate(zip(result.t, result.states)):
        E = gaussian_envelope(spec, t) if spec is not None else 0.0
        O = output_operator(space, model.gamma, E)
        OdO = O.conj().T @ O
        I_out[i] = float(np.real(np.trace(OdO @ rho)))
        O2 = O @ O
        G2[i] = float(np.real(np.trace((O2.conj().T @ O2) @ rho)))
    return I_out, G2


def flux_balance(
    t: np.ndarray,
    I_out: np.ndarray,
    residual_excitation: float,
    leakage: float,
    n_ph: float,
) -> dict:
    """Photon-number audit: input = integrated output + what is still inside."""
    emitted = float(np.trapezoid(I_out, t))
    mismatch = n_ph - emitted - residual_excitation - leakage
    return {
        "n_ph": n_ph,
        "integrated_output": emitted,
        "residual_excitation": residual_excitation,
        "leakage": leakage,
        "mismatch": float(mismatch),
    }
