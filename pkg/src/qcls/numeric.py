"""Dense complex linear algebra and multi-register statevector machinery.

Conventions used throughout the package:

* A "matrix" is a 2-D ``numpy`` array of ``complex128`` (real inputs are
  promoted).  No wrapper class; validation helpers enforce invariants.
* Register order: the first register in a :class:`RegisterLayout` owns the
  most significant bits of the global basis index.  Within a register,
  qubit ``k`` is bit ``k`` of the register value, little-endian (qubit 0 is
  the least significant bit).
* ``<0|^a U |0>^a`` therefore is literally the top-left block of ``U`` when
  the ancilla registers are listed first.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import LayoutError, NumericError, PreconditionError, ShapeError

# Pauli / elementary gates
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)

PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)
MINUS = np.array([1, -1], dtype=complex) / math.sqrt(2)


@dataclasses.dataclass(frozen=True)
class NumericPolicy:
    """Central source of truth for numeric tolerances."""

    residual: float = 1e-9      # relative reconstruction / contract residuals
    unitarity: float = 1e-10    # ||U'U - I||_max for matrices flagged unitary
    norm: float = 1e-9          # statevector normalization
    hermiticity: float = 1e-10  # ||M - M'||_max for matrices flagged Hermitian


POLICY = NumericPolicy()


def as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m.view(float))):
        raise ShapeError("matrix has non-finite entries")
    return m


def is_unitary(u, tol: float = POLICY.unitarity) -> bool:
    u = np.asarray(u)
    d = u.shape[0]
    return u.shape == (d, d) and np.max(np.abs(u.conj().T @ u - np.eye(d))) <= tol


def is_hermitian(m, tol: float = POLICY.hermiticity) -> bool:
    m = np.asarray(m)
    return m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T)) <= tol


def spectral_norm(m) -> float:
    return float(np.linalg.norm(np.asarray(m, dtype=complex), 2))


def next_pow2(n: int) -> int:
    return 1 << max(0, int(math.ceil(math.log2(max(1, n)))))


def clog2(n) -> int:
    """ceil(log2(n)) floored at 1, as used by the communication cost model."""
    return max(1, int(math.ceil(math.log2(max(2, n)))))


@dataclasses.dataclass(frozen=True)
class SpectralData:
    """SVD (and, for Hermitian inputs, eigendecomposition) of a matrix.

    ``matrix = left @ diag(singular_values) @ right.conj().T`` with
    ``singular_values`` sorted descending and orthonormal factor columns.
    """

    singular_values: np.ndarray
    left: np.ndarray
    right: np.ndarray
    eigenvalues: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None

    def reconstruction_residual(self, m) -> float:
        m = np.asarray(m, dtype=complex)
        approx = (self.left * self.singular_values) @ self.right.conj().T
        return float(np.linalg.norm(m - approx, 2))


def svd(m, policy: NumericPolicy = POLICY) -> SpectralData:
    """Full SVD; adds the eigendecomposition when the input is Hermitian."""
    m = as_matrix(m)
    try:
        u, s, vh = np.linalg.svd(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - numpy rarely fails
        raise NumericError(f"SVD did not converge: {exc}") from exc
    k = min(m.shape)
    data_kwargs = {}
    if m.shape[0] == m.shape[1] and is_hermitian(m, policy.hermiticity):
        w, v = np.linalg.eigh(m)
        data_kwargs = {"eigenvalues": w, "eigenvectors": v}
    out = SpectralData(s, u[:, :k], vh.conj().T[:, :k], **data_kwargs)
    scale = max(1.0, float(s[0]) if len(s) else 1.0)
    res = out.reconstruction_residual(m)
    if res > policy.residual * scale:
        raise NumericError(f"SVD reconstruction residual {res:.3e} exceeds policy")
    return out


def hermitian_dilation(a) -> np.ndarray:
    """Return ``[[0, A], [A^dag, 0]]``; eigenvalues are +/- sigma_k plus zeros."""
    a = as_matrix(a)
    m, n = a.shape
    out = np.zeros((m + n, m + n), dtype=complex)
    out[:m, m:] = a
    out[m:, :m] = a.conj().T
    return out


def unitary_completion(c, scale: float, policy: NumericPolicy = POLICY) -> np.ndarray:
    """Embed ``c/scale`` as the top-left block of a unitary of twice the size.

    For Hermitian ``c`` the symmetric dilation ``[[C, S], [S, -C]]`` is used so
    the output is itself Hermitian.
    """
    c = as_matrix(c)
    if c.shape[0] != c.shape[1]:
        raise ShapeError("unitary_completion expects a square block; pad first")
    if scale <= 0:
        raise PreconditionError("scale must be positive")
    nrm = spectral_norm(c)
    if nrm > scale * (1 + 1e-12):
        raise PreconditionError(f"scale {scale} is below ||C|| = {nrm}")
    cs = c / scale
    d = c.shape[0]
    out = np.zeros((2 * d, 2 * d), dtype=complex)
    if is_hermitian(c, policy.hermiticity):
        w, q = np.linalg.eigh(cs)
        comp = (q * np.sqrt(np.clip(1.0 - w * w, 0.0, None))) @ q.conj().T
        out[:d, :d] = cs
        out[:d, d:] = comp
        out[d:, :d] = comp
        out[d:, d:] = -cs
    else:
        # single SVD keeps C sqrt(I - C'C) = sqrt(I - CC') C exact
        u, s, vh = np.linalg.svd(cs)
        comp = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
        out[:d, :d] = (u * s) @ vh
        out[:d, d:] = (u * comp) @ u.conj().T
        out[d:, :d] = (vh.conj().T * comp) @ vh
        out[d:, d:] = -(vh.conj().T * s) @ u.conj().T
    return out


@dataclasses.dataclass(frozen=True)
class RegisterLayout:
    """Ordered named qubit registers; first register = most significant bits."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [n for n, _ in self.registers]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        for n, w in self.registers:
            if w < 1:
                raise LayoutError(f"register {n!r} must have width >= 1")

    @property
    def total(self) -> int:
        return sum(w for _, w in self.registers)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    def width(self, name: str) -> int:
        for n, w in self.registers:
            if n == name:
                return w
        raise LayoutError(f"no register named {name!r}")

    def axes(self, name: str) -> list[int]:
        """Tensor axes of a register in ``amps.reshape([2]*total)`` order."""
        start = 0
        for n, w in self.registers:
            if n == name:
                return list(range(start, start + w))
            start += w
        raise LayoutError(f"no register named {name!r}")

    def index(self, values: dict[str, int]) -> int:
        """Global basis index for the given register values (others zero)."""
        idx = 0
        for n, w in self.registers:
            v = values.get(n, 0)
            if not 0 <= v < (1 << w):
                raise LayoutError(f"value {v} out of range for register {n!r}")
            idx = (idx << w) | v
        return idx


@dataclasses.dataclass(frozen=True)
class StateVector:
    """Immutable statevector over a register layout."""

    layout: RegisterLayout
    amps: np.ndarray
    unnormalized: bool = False

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        object.__setattr__(self, "amps", amps)
        if amps.shape != (1 << self.layout.total,):
            raise LayoutError(
                f"amplitude length {amps.shape} does not match layout "
                f"(expected {1 << self.layout.total})"
            )
        if not self.unnormalized:
            nrm = np.linalg.norm(amps)
            if abs(nrm - 1.0) > POLICY.norm:
                raise LayoutError(f"state norm {nrm} is not 1 (flag unnormalized?)")

    @property
    def tensor(self) -> np.ndarray:
        return self.amps.reshape([2] * self.layout.total)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    @staticmethod
    def from_registers(layout: RegisterLayout, init: dict[str, object] | None = None,
                       unnormalized: bool = False) -> "StateVector":
        """Product state; each register gets an int basis value or a vector."""
        init = init or {}
        parts = []
        for name, w in layout.registers:
            v = init.get(name, 0)
            if isinstance(v, (int, np.integer)):
                vec = np.zeros(1 << w, dtype=complex)
                vec[int(v)] = 1.0
            else:
                vec = np.asarray(v, dtype=complex)
                if vec.shape != (1 << w,):
                    raise LayoutError(f"initial vector for {name!r} has wrong length")
            parts.append(vec)
        amps = parts[0]
        for p in parts[1:]:
            amps = np.kron(amps, p)
        return StateVector(layout, amps, unnormalized=unnormalized)

    def register_vector(self, name: str, expect_product: bool = True,
                        tol: float = 1e-9) -> np.ndarray:
        """Extract a register's vector, requiring it be unentangled."""
        ax = self.layout.axes(name)
        w = len(ax)
        t = np.moveaxis(self.tensor, ax, range(w)).reshape(1 << w, -1)
        u, s, vh = np.linalg.svd(t, full_matrices=False)
        if expect_product and len(s) > 1 and s[1] > tol * max(s[0], 1e-30):
            raise NumericError(f"register {name!r} is entangled (s1={s[1]:.2e})")
        return u[:, 0] * s[0]


def _moved_tensor(state: StateVector, regs: list[str]):
    """Tensor with the given registers' axes moved to the back, plus helpers."""
    ax = []
    for r in regs:
        ax.extend(state.layout.axes(r))
    t = state.tensor
    rest = [i for i in range(state.layout.total) if i not in ax]
    perm = rest + ax
    moved = np.transpose(t, perm)
    return moved, perm, len(ax)


def _restore(moved, perm, total):
    inv = np.argsort(perm)
    return np.transpose(moved.reshape([2] * total), inv).reshape(-1)


def _control_slices(layout: RegisterLayout, perm, controls):
    """Index tuple selecting the control-satisfying block of a permuted tensor.

    Returns (index, ok) where ``index`` addresses the leading (batch) axes of
    the permuted tensor.  Control registers must not be among the moved axes.
    """
    pos = {axis: i for i, axis in enumerate(perm)}
    sel = [slice(None)] * len(perm)
    for reg, value in controls:
        axes = layout.axes(reg)
        w = len(axes)
        if not 0 <= value < (1 << w):
            raise LayoutError(f"control value {value} out of range for {reg!r}")
        for k, axis in enumerate(axes):
            bit = (value >> (w - 1 - k)) & 1  # axis k is the MSB-first position
            sel[pos[axis]] = bit
    return tuple(sel)


def apply_operator(state: StateVector, u, targets: list[str],
                   controls: list[tuple[str, int]] | None = None) -> StateVector:
    """Apply a unitary on the product space of ``targets``.

    ``u`` indexes the targets in listed order, first register most
    significant.  ``controls`` is a list of ``(register, value)`` pairs; the
    operator acts only on basis states where each control register equals its
    value.  Norm is preserved to the policy tolerance for unitary ``u``.
    """
    controls = controls or []
    u = np.asarray(u, dtype=complex)
    dim = 1
    for r in targets:
        dim <<= state.layout.width(r)
    if u.shape != (dim, dim):
        raise LayoutError(f"operator shape {u.shape} does not match targets {targets}")
    tset = set(targets)
    for reg, _ in controls:
        if reg in tset:
            raise LayoutError(f"register {reg!r} is both control and target")
    moved, perm, nax = _moved_tensor(state, targets)
    shape = moved.shape
    sel = _control_slices(state.layout, perm[: len(perm) - nax], controls)
    block = moved[sel].reshape(-1, dim)
    out = np.array(moved)
    out[sel] = (block @ u.T).reshape(moved[sel].shape)
    amps = _restore(out.reshape(shape), perm, state.layout.total)
    return StateVector(state.layout, amps, unnormalized=state.unnormalized)


def apply_branch_response(state: StateVector, anc: str, sys_regs: list[str],
                          basis: np.ndarray, blocks: np.ndarray,
                          controls: list[tuple[str, int]] | None = None) -> StateVector:
    """Apply ``sum_b blocks[b] (x) |basis_b><basis_b|`` on ``(anc, sys_regs)``.

    ``anc`` must be a single-qubit register; ``basis`` must be a complete
    orthonormal basis (columns) of the joint system space.  This is the
    workhorse for responses diagonal in a walk/eigen basis: cost is two
    basis changes plus a batched 2x2 contraction.
    """
    controls = controls or []
    if state.layout.width(anc) != 1:
        raise LayoutError(f"response ancilla {anc!r} must be one qubit")
    moved_set = {anc, *sys_regs}
    for reg, _ in controls:
        if reg in moved_set:
            raise LayoutError(f"register {reg!r} is both control and target")
    dim = 1
    for r in sys_regs:
        dim <<= state.layout.width(r)
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != (dim, dim):
        raise LayoutError("basis must be square/complete over the system registers")
    blocks = np.asarray(blocks, dtype=complex)
    if blocks.shape != (dim, 2, 2):
        raise LayoutError(f"blocks shape {blocks.shape}, expected ({dim}, 2, 2)")

    regs = [anc] + list(sys_regs)
    moved, perm, nax = _moved_tensor(state, regs)
    shape = moved.shape
    sel = _control_slices(state.layout, perm[: len(perm) - nax], controls)
    block = moved[sel].reshape(-1, 2, dim)
    coeff = block @ basis.conj()                       # (batch, 2, nb)
    coeff = np.einsum("buv,kvb->kub", blocks, coeff)   # per-branch 2x2
    out_block = coeff @ basis.T                        # back to computational
    out = np.array(moved)
    out[sel] = out_block.reshape(moved[sel].shape)
    amps = _restore(out.reshape(shape), perm, state.layout.total)
    return StateVector(state.layout, amps, unnormalized=state.unnormalized)


def assemble_branch_operator(basis: np.ndarray, blocks: np.ndarray) -> np.ndarray:
    """Dense matrix of ``sum_b blocks[b] (x) |basis_b><basis_b|`` (ancilla first)."""
    basis = np.asarray(basis, dtype=complex)
    blocks = np.asarray(blocks, dtype=complex)
    proj = np.einsum("ib,jb->bij", basis, basis.conj())
    dim = basis.shape[0]
    out = np.einsum("buv,bij->uivj", blocks, proj).reshape(2 * dim, 2 * dim)
    return out


def projector_weight(state: StateVector, conditions: list[tuple[str, int]]) -> float:
    """Probability weight of the subspace where each register equals a value."""
    moved, perm, _ = _moved_tensor(state, [])
    sel = _control_slices(state.layout, perm, conditions)
    return float(np.sum(np.abs(moved[sel]) ** 2))


def project(state: StateVector, conditions: list[tuple[str, int]],
            renormalize: bool = True) -> StateVector:
    """Project onto a register-value subspace (zeroing the rest)."""
    moved, perm, _ = _moved_tensor(state, [])
    sel = _control_slices(state.layout, perm, conditions)
    out = np.zeros_like(moved)
    out[sel] = moved[sel]
    amps = _restore(out, perm, state.layout.total)
    nrm = np.linalg.norm(amps)
    if renormalize:
        if nrm < 1e-300:
            raise NumericError("projection annihilated the state")
        return StateVector(state.layout, amps / nrm)
    return StateVector(state.layout, amps, unnormalized=True)


def attach_register(state: StateVector, name: str, width: int, init,
                    position: int | None = None) -> StateVector:
    """Tensor a fresh register (int basis value or vector) into the state."""
    regs = list(state.layout.registers)
    position = len(regs) if position is None else position
    regs.insert(position, (name, width))
    new_layout = RegisterLayout(tuple(regs))
    if isinstance(init, (int, np.integer)):
        vec = np.zeros(1 << width, dtype=complex)
        vec[int(init)] = 1.0
    else:
        vec = np.asarray(init, dtype=complex)
    t = state.tensor
    before = sum(w for _, w in state.layout.registers[:position])
    t = np.expand_dims(t, axis=tuple(range(before, before + width)))
    vt = vec.reshape([1] * before + [2] * width + [1] * (state.layout.total - before))
    amps = (t * vt).reshape(-1)
    return StateVector(new_layout, amps, unnormalized=state.unnormalized)


def detach_register(state: StateVector, name: str, expect,
                    tol: float = 1e-6) -> tuple[StateVector, float]:
    """Remove a register expected to be in state ``expect`` (up to ``tol``).

    Returns the reduced state (renormalized projection onto ``expect``) and
    the weight remaining outside ``expect`` (the detach residual).
    """
    if isinstance(expect, (int, np.integer)):
        w = state.layout.width(name)
        vec = np.zeros(1 << w, dtype=complex)
        vec[int(expect)] = 1.0
    else:
        vec = np.asarray(expect, dtype=complex)
    ax = state.layout.axes(name)
    t = np.moveaxis(state.tensor, ax, range(len(ax))).reshape(len(vec), -1)
    reduced = vec.conj() @ t
    residual = float(np.linalg.norm(t - np.outer(vec, reduced)))
    if residual > tol:
        raise NumericError(
            f"register {name!r} deviates from the expected detach state "
            f"(residual {residual:.3e} > {tol:.1e})"
        )
    regs = tuple(r for r in state.layout.registers if r[0] != name)
    new_layout = RegisterLayout(regs)
    nrm = np.linalg.norm(reduced)
    return StateVector(new_layout, reduced / nrm), residual
