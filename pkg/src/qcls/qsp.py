"""Walk operator, branch spectrum, and phase-sequence application.

Responses are 2x2-operator-valued functions of the walk eigenphase theta,
written ``Op(a,b,c,d) = a I + i b Z + i c X + i d Y`` with real component
functions.  A phase sequence realizes ``U_Phi(theta) = R_{phi_l} ... R_{phi_1}``
with ``R_phi(theta) = exp(-i (theta/2) (cos(phi) X + sin(phi) Y))``.

The phased select used here symmetrizes the controlled walk over the
half-step walk S = W^(1/2) and its inverse, which makes the per-branch action
exactly ``R_phi(theta)``; a one-sided controlled-W would leave a branch phase
exp(i theta/2) that the spectral-decomposition contract does not allow.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

from . import numeric as nc
from .coordinator import BlockEncoding, CommLedger
from .errors import LayoutError, PreconditionError

MODES = ("circuit", "spectral")


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise PreconditionError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def op4(a, b, c, d) -> np.ndarray:
    """Op(a,b,c,d) = aI + ibZ + icX + idY."""
    return np.array([[a + 1j * b, 1j * c + d], [1j * c - d, a - 1j * b]])


def su2_components(mats: np.ndarray):
    """Inverse of :func:`op4` for an array of 2x2 matrices (broadcast)."""
    m00 = mats[..., 0, 0]
    m11 = mats[..., 1, 1]
    m01 = mats[..., 0, 1]
    m10 = mats[..., 1, 0]
    a = 0.5 * np.real(m00 + m11)
    b = 0.5 * np.imag(m00 - m11)
    c = 0.5 * np.imag(m01 + m10)
    d = 0.5 * np.real(m01 - m10)
    return a, b, c, d


def evaluate_sequence(angles, thetas) -> np.ndarray:
    """U_Phi(theta) for each theta; shape (len(thetas), 2, 2)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    x = np.cos(thetas / 2)
    y = np.sin(thetas / 2)
    out = np.zeros((len(thetas), 2, 2), dtype=complex)
    out[:, 0, 0] = 1.0
    out[:, 1, 1] = 1.0
    for phi in angles:
        r = np.zeros_like(out)
        r[:, 0, 0] = x
        r[:, 1, 1] = x
        r[:, 0, 1] = -1j * y * np.exp(-1j * phi)
        r[:, 1, 0] = -1j * y * np.exp(1j * phi)
        out = r @ out
    return out


@dataclasses.dataclass(frozen=True)
class PhaseSequence:
    """Synthesized angle list plus bookkeeping about how good it is."""

    angles: tuple[float, ...]
    kind: str = "generic"
    target_eps: float = 0.0
    achieved_error: float = 0.0
    budget_constant: float = 0.0

    @property
    def degree(self) -> int:
        return len(self.angles)

    def evaluate(self, thetas) -> np.ndarray:
        return evaluate_sequence(self.angles, thetas)

    def to_json(self) -> str:
        return json.dumps(list(self.angles))


@dataclasses.dataclass(frozen=True)
class TargetBand:
    lo: float
    hi: float
    coeffs: object  # (a, b, c, d) constants, or a callable theta -> 4 arrays
    tol: float

    def values(self, thetas):
        if callable(self.coeffs):
            return self.coeffs(np.asarray(thetas, dtype=float))
        a, b, c, d = self.coeffs
        one = np.ones_like(thetas)
        return a * one, b * one, c * one, d * one


@dataclasses.dataclass(frozen=True)
class PiecewiseTarget:
    """Declared theta-interval targets a phase sequence must realize."""

    bands: tuple[TargetBand, ...]
    degree_budget: int

    def __post_init__(self):
        spans = sorted((b.lo, b.hi) for b in self.bands)
        for (l1, h1), (l2, _) in zip(spans, spans[1:]):
            if l2 < h1 - 1e-12:
                raise PreconditionError("target bands overlap")

    def band_errors(self, angles, points: int = 4096) -> list[float]:
        """Max operator-norm error per band over a uniform grid incl. endpoints.

        For Op-valued differences the operator norm is exactly the Euclidean
        norm of the component difference vector.
        """
        errs = []
        for band in self.bands:
            thetas = np.linspace(band.lo, band.hi, points)
            got = su2_components(evaluate_sequence(angles, thetas))
            want = band.values(thetas)
            err = np.sqrt(sum((g - w) ** 2 for g, w in zip(got, want)))
            errs.append(float(np.max(err)))
        return errs

    def validate(self, angles, points: int = 4096) -> bool:
        return all(e <= band.tol for e, band in zip(self.band_errors(angles, points), self.bands))


@dataclasses.dataclass(frozen=True)
class WalkSpectrum:
    """Full eigenstructure of the walk operator W = (2GG^dag - I)U.

    The lemma branches carry sign +-1 and phases +-arccos(lambda_u/alpha_eff);
    the orthogonal complement (where W acts as -U) carries sign 0 and phases
    in {0, pi}.  ``vectors`` is a complete orthonormal basis of the walk
    space, ancilla register most significant.
    """

    be: BlockEncoding
    walk: np.ndarray
    phases: np.ndarray
    vectors: np.ndarray
    branch_sign: np.ndarray
    eig_index: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def alpha_eff(self) -> float:
        return self.be.alpha_eff

    @property
    def half_walk(self) -> np.ndarray:
        """Principal square root of W, shared eigenbasis with everything else."""
        return (self.vectors * np.exp(0.5j * self.phases)) @ self.vectors.conj().T

    def branch_mask(self) -> np.ndarray:
        return self.branch_sign != 0

    def response_blocks(self, fn) -> np.ndarray:
        """Evaluate a response theta -> 2x2 on every basis column."""
        return np.asarray(fn(self.phases), dtype=complex)

    def blocks_from_angles(self, angles) -> np.ndarray:
        return evaluate_sequence(angles, self.phases)


def walk_operator(be: BlockEncoding, policy: nc.NumericPolicy = nc.POLICY) -> WalkSpectrum:
    """Build W and its branch decomposition from a Hermitian encoding."""
    if not be.hermitian:
        raise PreconditionError("walk operator needs a Hermitian block encoding")
    evals = np.linalg.eigvalsh(be.target)
    if be.alpha_eff < 2 * np.max(np.abs(evals)) - 1e-9:
        raise PreconditionError("alpha_eff must be at least twice the target norm")

    d = be.sys_dim
    nw = be.u.shape[0]
    w_op = np.array(be.u)
    w_op[d:, :] *= -1.0  # (2GG^dag - I) U with G = |0...0> x I

    lam, vecs = np.linalg.eigh(be.target)
    mu = lam / be.alpha_eff
    g_embed = np.zeros((nw, d), dtype=complex)
    g_embed[:d, :] = vecs
    u_g = be.u @ g_embed
    denom = np.sqrt(1.0 - mu ** 2)
    # the extra i makes (phi0 +- phi1)/sqrt(2) exact e^(+-i theta) eigenvectors:
    # in the (phi0, phi1) plane W is the real rotation [[mu, s], [-s, mu]]
    phi1 = 1j * (u_g - g_embed * mu) / denom

    n_br = 2 * d
    vectors = np.zeros((nw, nw), dtype=complex)
    phases = np.zeros(nw)
    sign = np.zeros(nw, dtype=int)
    eig_index = np.full(nw, -1, dtype=int)
    theta = np.arccos(mu)
    vectors[:, 0:n_br:2] = (g_embed + phi1) / math.sqrt(2)
    vectors[:, 1:n_br:2] = (g_embed - phi1) / math.sqrt(2)
    phases[0:n_br:2] = theta
    phases[1:n_br:2] = -theta
    sign[0:n_br:2] = 1
    sign[1:n_br:2] = -1
    eig_index[0:n_br:2] = np.arange(d)
    eig_index[1:n_br:2] = np.arange(d)

    if nw > n_br:
        # complement = null space of the branch columns; W acts there as -U
        u_full, s_full, _ = np.linalg.svd(vectors[:, :n_br])
        comp = u_full[:, n_br:]
        restricted = comp.conj().T @ w_op @ comp
        cw, cv = np.linalg.eigh(restricted)
        vectors[:, n_br:] = comp @ cv
        phases[n_br:] = np.where(cw > 0, 0.0, math.pi)

    spec = WalkSpectrum(
        be=be, walk=w_op, phases=phases, vectors=vectors,
        branch_sign=sign, eig_index=eig_index,
        eigenvalues=lam, eigenvectors=vecs,
    )
    resid = np.max(np.abs(w_op @ vectors - vectors * np.exp(1j * phases)))
    if resid > 1e-8:
        raise PreconditionError(f"walk spectral residual {resid:.2e}; encoding broken?")
    return spec


def controlled_u_phi(spec: WalkSpectrum, phi: float) -> np.ndarray:
    """Dense U_phi on (P, walk): acts as R_phi(theta) on each eigenbranch."""
    s_half = spec.half_walk
    nw = s_half.shape[0]
    sel = np.zeros((2 * nw, 2 * nw), dtype=complex)
    sel[:nw, :nw] = s_half.conj().T
    sel[nw:, nw:] = s_half
    rz = np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])
    outer = np.kron(rz @ nc.H, np.eye(nw))
    return outer @ sel @ outer.conj().T


def gate_product(spec: WalkSpectrum, angles) -> np.ndarray:
    """Full-space Prod_i U_{phi_i} built gate by gate (test / audit path)."""
    nw = spec.walk.shape[0]
    out = np.eye(2 * nw, dtype=complex)
    for phi in angles:
        out = controlled_u_phi(spec, phi) @ out
    return out


def branch_assembled(spec: WalkSpectrum, angles) -> np.ndarray:
    """The same operator assembled branchwise from 2x2 products."""
    return nc.assemble_branch_operator(spec.vectors, spec.blocks_from_angles(angles))


def apply_phase_sequence(spec: WalkSpectrum, seq: PhaseSequence,
                         state: nc.StateVector, mode: str,
                         ledger: CommLedger | None = None,
                         anc: str = "p", sys_regs=("q", "i"),
                         controls=None, context: str | None = None,
                         inverse: bool = False) -> nc.StateVector:
    """Apply Prod_i U_{phi_i} to (anc, walk registers).

    Circuit and spectral mode coincide here by construction (U_phi is
    branch-diagonal); both are computed by branchwise 2x2 chains, which the
    test suite checks against the literal gate product.  The ledger is
    charged one walk query per angle regardless of mode.
    """
    check_mode(mode)
    blocks = spec.blocks_from_angles(seq.angles)
    if inverse:
        blocks = np.conj(np.transpose(blocks, (0, 2, 1)))
    out = nc.apply_branch_response(state, anc, list(sys_regs), spec.vectors,
                                   blocks, controls=controls)
    if ledger is not None:
        ledger.charge("qsp_query", spec.be.per_use_qubits, n=seq.degree, context=context)
    return out


def spectral_apply(spec: WalkSpectrum, fn, state: nc.StateVector,
                   ledger: CommLedger | None = None, charge_degree: int = 0,
                   anc: str = "p", sys_regs=("q", "i"), controls=None,
                   context: str | None = None) -> nc.StateVector:
    """Apply an ideal branchwise response ``fn: thetas -> (nb, 2, 2)``.

    The ledger is charged as if a degree-``charge_degree`` sequence ran, so
    cost accounting is independent of the apply mode.
    """
    blocks = spec.response_blocks(fn)
    out = nc.apply_branch_response(state, anc, list(sys_regs), spec.vectors,
                                   blocks, controls=controls)
    if ledger is not None and charge_degree:
        ledger.charge("qsp_query", spec.be.per_use_qubits, n=charge_degree, context=context)
    return out
