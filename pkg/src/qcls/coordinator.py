"""Parties, referee, distributed block encodings, and the qubit-cost ledger.

The cost model charges explicit qubit counts per primitive use.  Only the
scaling shape is contractual (the underlying propositions are O(.) bounds),
so the per-round multipliers ``c_be`` and ``c_b`` are configurable; ``log``
means ``ceil(log2(.))`` floored at 1 throughout.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

from . import numeric as nc
from .errors import InputError, PreconditionError, ShapeError

NONZERO_SV_CUTOFF = 1e-12  # relative threshold separating zero singular values


@dataclasses.dataclass(frozen=True)
class DistributedInstance:
    """The r parties' (A_i, b_i) blocks, the bound delta, and the stacked data."""

    parties: tuple[tuple[np.ndarray, np.ndarray], ...]
    delta: float

    @property
    def r(self) -> int:
        return len(self.parties)

    @property
    def n(self) -> int:
        return self.parties[0][0].shape[1]

    @property
    def m(self) -> int:
        return sum(a.shape[0] for a, _ in self.parties)

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([a for a, _ in self.parties])

    @property
    def rhs(self) -> np.ndarray:
        return np.concatenate([b for _, b in self.parties])

    @property
    def row_offsets(self) -> np.ndarray:
        sizes = [a.shape[0] for a, _ in self.parties]
        return np.concatenate([[0], np.cumsum(sizes)])

    def party_of_row(self, j: int) -> int:
        return int(np.searchsorted(self.row_offsets, j, side="right") - 1)

    def block_norms(self) -> np.ndarray:
        return np.array([nc.spectral_norm(a) for a, _ in self.parties])

    @property
    def alpha(self) -> float:
        """Base block-encoding scale sqrt(sum_i ||A_i||^2)."""
        return float(math.sqrt(np.sum(self.block_norms() ** 2)))


def build_instance(parties, delta: float) -> DistributedInstance:
    """Validate and assemble a distributed instance.

    ``parties`` is an iterable of (A_i, b_i).  delta must be a positive lower
    bound on the smallest nonzero singular value of the stacked A; at desk
    scale this is checked directly against the SVD.
    """
    if delta <= 0:
        raise PreconditionError("delta must be positive")
    packed = []
    for a, b in parties:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.ndim != 2 or b.ndim != 1 or a.shape[0] != b.shape[0]:
            raise ShapeError(f"party block shapes {a.shape}, {b.shape} inconsistent")
        packed.append((a, b))
    if not packed:
        raise ShapeError("at least one party is required")
    n = packed[0][0].shape[1]
    for a, _ in packed:
        if a.shape[1] != n:
            raise ShapeError(f"column counts differ: {a.shape[1]} vs {n}")
    inst = DistributedInstance(tuple(packed), float(delta))
    s = np.linalg.svd(inst.matrix, compute_uv=False)
    nonzero = s[s > NONZERO_SV_CUTOFF * max(1.0, s[0])]
    if len(nonzero) and delta > nonzero[-1] * (1 + 1e-12):
        raise PreconditionError(
            f"delta {delta} exceeds the minimum nonzero singular value {nonzero[-1]}"
        )
    return inst


@dataclasses.dataclass(frozen=True)
class PenaltySpec:
    """Hyperparameter and penalty matrix of the l2-regularized objective."""

    lam: float
    penalty_matrix: np.ndarray

    def __post_init__(self):
        l = np.asarray(self.penalty_matrix, dtype=float)
        object.__setattr__(self, "penalty_matrix", l)
        if self.lam <= 0:
            raise PreconditionError("lambda must be positive")
        if l.ndim != 2 or l.shape[0] != l.shape[1]:
            raise ShapeError("penalty matrix must be square")
        if self.delta_L <= NONZERO_SV_CUTOFF * max(1.0, self.norm_L):
            raise PreconditionError("penalty matrix must be nonsingular")

    @property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.penalty_matrix, compute_uv=False)

    @property
    def delta_L(self) -> float:
        return float(self.singular_values[-1])

    @property
    def norm_L(self) -> float:
        return float(self.singular_values[0])

    @property
    def kappa_L(self) -> float:
        return self.norm_L / self.delta_L


class CommLedger:
    """Per-primitive qubit-communication counters, monotone within a run."""

    def __init__(self, c_be: float = 2.0, c_b: float = 2.0):
        self.c_be = float(c_be)
        self.c_b = float(c_b)
        self.counts: dict[str, int] = {}
        self.qubits: dict[str, float] = {}
        self.context_qubits: dict[str, float] = {}

    def charge(self, key: str, per_use: float, n: int = 1, context: str | None = None):
        if n < 0 or per_use < 0:
            raise PreconditionError("ledger charges must be nonnegative")
        self.counts[key] = self.counts.get(key, 0) + n
        self.qubits[key] = self.qubits.get(key, 0.0) + n * per_use
        if context is not None:
            self.context_qubits[context] = self.context_qubits.get(context, 0.0) + n * per_use

    @property
    def qubits_total(self) -> float:
        return float(sum(self.qubits.values()))

    def snapshot(self) -> dict:
        return {
            "counts": dict(self.counts),
            "qubits": dict(self.qubits),
            "context_qubits": dict(self.context_qubits),
            "qubits_total": self.qubits_total,
        }


def ledger_report(ledger: CommLedger) -> dict:
    """Cost breakdown; the grand total always equals the sum of subtotals."""
    snap = ledger.snapshot()
    assert abs(snap["qubits_total"] - sum(snap["qubits"].values())) < 1e-9
    return snap


@dataclasses.dataclass(frozen=True)
class BlockEncoding:
    """A unitary whose top-left block is ``target / alpha_eff``.

    ``ancillas`` counts the qubits that must read |0> to expose the block;
    they are the most significant registers of ``u``.  ``per_use_qubits`` is
    the communication charge for one query, used by QSP-level charging.
    """

    u: np.ndarray
    alpha_base: float
    alpha_eff: float
    ancillas: int
    target: np.ndarray
    target_tag: str
    hermitian: bool
    r: int
    m: int
    n: int
    charge_key: str
    per_use_qubits: float
    residual: float = dataclasses.field(default=0.0)

    def __post_init__(self):
        d = self.target.shape[0]
        block = self.u[:d, :d]
        res = float(np.linalg.norm(self.target - self.alpha_eff * block, 2))
        object.__setattr__(self, "residual", res)
        if res > 1e-10 * max(1.0, self.alpha_eff):
            raise PreconditionError(f"block-encoding residual {res:.2e} too large")
        if self.hermitian and not nc.is_hermitian(self.u):
            raise PreconditionError("encoding flagged hermitian is not Hermitian")

    @property
    def sys_dim(self) -> int:
        return self.target.shape[0]

    @property
    def sys_qubits(self) -> int:
        return int(round(math.log2(self.sys_dim)))

    def block(self) -> np.ndarray:
        d = self.sys_dim
        return self.u[:d, :d]

    def charge(self, ledger: CommLedger, n: int = 1, context: str | None = None):
        ledger.charge(self.charge_key, self.per_use_qubits, n=n, context=context)


def _prepare_unitary(column: np.ndarray) -> np.ndarray:
    """Unitary whose first column is the given unit vector (Householder)."""
    d = len(column)
    v = column.astype(complex)
    e0 = np.zeros(d, dtype=complex)
    e0[0] = 1.0
    w = v - e0
    nw = np.linalg.norm(w)
    if nw < 1e-14:
        return np.eye(d, dtype=complex)
    w = w / nw
    return np.eye(d, dtype=complex) - 2.0 * np.outer(w, w.conj())


def _halve_block(u: np.ndarray) -> np.ndarray:
    """One-ancilla dilation halving the encoded block.

    (H x I)(|0><0| x U + |1><1| x (X_a0 x I))(H x I): the new block is
    (old + 0)/2 since the X on the first base ancilla has zero |0>-block.
    The output is Hermitian and squares to I whenever U does.
    """
    dim = u.shape[0]
    xa = np.kron(nc.X, np.eye(dim // 2, dtype=complex))  # X on the leading qubit
    sel = np.zeros((2 * dim, 2 * dim), dtype=complex)
    sel[:dim, :dim] = u
    sel[dim:, dim:] = xa
    hh = np.kron(nc.H, np.eye(dim, dtype=complex))
    return hh @ sel @ hh


def _stack_encoding(blocks: list[np.ndarray], row_dims: list[int], n_cols: int):
    """LCU-with-index-uncompute encoding of a vertical stack of blocks.

    Each block is embedded at its row offset in a D x D padded square, dilated
    to a unitary at scale ||block||, selected by a party index prepared with
    amplitudes ||block||/alpha, and the index is uncomputed by XOR-ing the
    block owner of each output row.  Yields exactly alpha = sqrt(sum ||.||^2).
    """
    m_total = sum(row_dims)
    d = nc.next_pow2(max(m_total, n_cols))
    r = len(blocks)
    p = max(0, int(math.ceil(math.log2(r)))) if r > 1 else 0
    norms = np.array([nc.spectral_norm(b) for b in blocks])
    alpha = float(math.sqrt(np.sum(norms ** 2)))
    if alpha <= 0:
        raise PreconditionError("cannot block-encode an all-zero stack")

    offsets = np.concatenate([[0], np.cumsum(row_dims)])
    dilations = []
    for i, b in enumerate(blocks):
        emb = np.zeros((d, d), dtype=complex)
        if norms[i] > 0:
            emb[offsets[i]:offsets[i + 1], : n_cols] = b
            dilations.append(nc.unitary_completion(emb, norms[i]))
        else:
            dilations.append(np.eye(2 * d, dtype=complex))

    np_idx = 1 << p
    sel = np.zeros((np_idx * 2 * d, np_idx * 2 * d), dtype=complex)
    for i in range(np_idx):
        blk = dilations[i] if i < r else np.eye(2 * d, dtype=complex)
        sel[i * 2 * d:(i + 1) * 2 * d, i * 2 * d:(i + 1) * 2 * d] = blk

    amps = np.zeros(np_idx)
    amps[:r] = norms / alpha
    prep = np.kron(_prepare_unitary(amps), np.eye(2 * d, dtype=complex))

    # index uncompute: |i>|dil>|j> -> |i ^ owner(j)>|dil>|j>
    owner = np.zeros(d, dtype=int)
    for j in range(m_total):
        owner[j] = int(np.searchsorted(offsets, j, side="right") - 1)
    perm = np.zeros(np_idx * 2 * d, dtype=int)
    for i in range(np_idx):
        for dil in range(2):
            for j in range(d):
                src = (i * 2 + dil) * d + j
                perm[((i ^ owner[j]) * 2 + dil) * d + j] = src
    unc = np.zeros((np_idx * 2 * d, np_idx * 2 * d), dtype=complex)
    unc[np.arange(np_idx * 2 * d), perm] = 1.0

    u = unc @ sel @ prep
    a_pad = np.zeros((d, d), dtype=complex)
    a_pad[:m_total, :n_cols] = np.vstack([b for b in blocks])
    return u, a_pad, alpha, p + 1, d


def be_of_A(inst: DistributedInstance, ledger: CommLedger | None = None) -> BlockEncoding:
    """Block encoding of the stacked A at effective scale 2*sqrt(sum ||A_i||^2).

    The scale doubling keeps downstream walk eigenphases inside the validity
    band of the tuple lemmas; ancilla count is ceil(log r) + 2.
    """
    u, a_pad, alpha, a_base, _ = _stack_encoding(
        [a for a, _ in inst.parties], [a.shape[0] for a, _ in inst.parties], inst.n
    )
    u2 = _halve_block(u)
    c_be = ledger.c_be if ledger is not None else 2.0
    be = BlockEncoding(
        u=u2, alpha_base=alpha, alpha_eff=2 * alpha, ancillas=a_base + 1,
        target=a_pad, target_tag="A", hermitian=False,
        r=inst.r, m=inst.m, n=inst.n,
        charge_key="be_A", per_use_qubits=c_be * inst.r * nc.clog2(inst.n),
    )
    if ledger is not None:
        be.charge(ledger, context="be_build")
    return be


def _bar_unitary(u: np.ndarray, d: int) -> np.ndarray:
    """Hermitian |0><1| x U + |1><0| x U^dag with the block qubit inside the system."""
    na = u.shape[0] // d
    ur = u.reshape(na, d, na, d)
    out = np.zeros((na, 2, d, na, 2, d), dtype=complex)
    out[:, 0, :, :, 1, :] = ur
    out[:, 1, :, :, 0, :] = np.conj(np.transpose(ur, (2, 3, 0, 1)))
    return out.reshape(2 * na * d, 2 * na * d)


def _assemble_bar_encoding(stack_result, tag: str, r: int, m: int, n: int,
                           charge_key: str, per_use: float) -> BlockEncoding:
    u, a_pad, alpha, a_base, d = stack_result
    ubar = _bar_unitary(u, d)
    u2 = _halve_block(ubar)
    abar_pad = np.zeros((2 * d, 2 * d), dtype=complex)
    abar_pad[:d, d:] = a_pad
    abar_pad[d:, :d] = a_pad.conj().T
    return BlockEncoding(
        u=u2, alpha_base=alpha, alpha_eff=2 * alpha, ancillas=a_base + 1,
        target=abar_pad, target_tag=tag, hermitian=True,
        r=r, m=m, n=n, charge_key=charge_key, per_use_qubits=per_use,
    )


def be_of_A_bar(inst: DistributedInstance, ledger: CommLedger | None = None) -> BlockEncoding:
    """Hermitian block encoding of the dilation of A (walk-operator input)."""
    res = _stack_encoding(
        [a for a, _ in inst.parties], [a.shape[0] for a, _ in inst.parties], inst.n
    )
    c_be = ledger.c_be if ledger is not None else 2.0
    per_use = c_be * inst.r * nc.clog2(inst.m * inst.n)
    be = _assemble_bar_encoding(res, "A_bar", inst.r, inst.m, inst.n, "be_A_bar", per_use)
    if ledger is not None:
        be.charge(ledger, context="be_build")
    return be


def augmented_stack(inst: DistributedInstance, penalty: PenaltySpec):
    """Blocks and row dims of A_L = stack(A, sqrt(lambda) L)."""
    blocks = [a for a, _ in inst.parties]
    blocks.append(math.sqrt(penalty.lam) * penalty.penalty_matrix)
    dims = [a.shape[0] for a, _ in inst.parties] + [inst.n]
    return blocks, dims


def be_of_A_L(inst: DistributedInstance, penalty: PenaltySpec,
              ledger: CommLedger | None = None) -> BlockEncoding:
    """Block encoding of the augmented matrix, the referee acting as an extra
    party holding sqrt(lambda) L; its block adds no communication charge."""
    blocks, dims = augmented_stack(inst, penalty)
    u, a_pad, alpha, a_base, _ = _stack_encoding(blocks, dims, inst.n)
    u2 = _halve_block(u)
    c_be = ledger.c_be if ledger is not None else 2.0
    per_use = c_be * inst.r * nc.clog2(inst.n)
    be = BlockEncoding(
        u=u2, alpha_base=alpha, alpha_eff=2 * alpha, ancillas=a_base + 1,
        target=a_pad, target_tag="A_L", hermitian=False,
        r=inst.r, m=inst.m + inst.n, n=inst.n,
        charge_key="be_A", per_use_qubits=per_use,
    )
    if ledger is not None:
        be.charge(ledger, context="be_build")
    return be


def be_of_A_L_bar(inst: DistributedInstance, penalty: PenaltySpec,
                  ledger: CommLedger | None = None) -> BlockEncoding:
    """Hermitian encoding of the dilation of A_L (l2 pipeline walk input)."""
    blocks, dims = augmented_stack(inst, penalty)
    res = _stack_encoding(blocks, dims, inst.n)
    m_aug = inst.m + inst.n
    c_be = ledger.c_be if ledger is not None else 2.0
    per_use = c_be * inst.r * nc.clog2(m_aug * inst.n)
    be = _assemble_bar_encoding(res, "A_L_bar", inst.r, m_aug, inst.n, "be_A_bar", per_use)
    if ledger is not None:
        be.charge(ledger, context="be_build")
    return be


def prepare_b(inst_or_vec, ledger: CommLedger | None = None,
              sys_dim: int | None = None, r: int | None = None) -> nc.StateVector:
    """State proportional to the stacked b on the dilated-space register I.

    The amplitudes occupy the first m coordinates (the row block) of the
    padded dilation space of size 2*D.  The charge uses log m since b lives
    in R^m (the proposition's log n appears to be a typo).
    """
    if isinstance(inst_or_vec, DistributedInstance):
        b = inst_or_vec.rhs
        m, n = inst_or_vec.m, inst_or_vec.n
        r = inst_or_vec.r
        d = nc.next_pow2(max(m, n))
    else:
        b = np.asarray(inst_or_vec, dtype=float)
        m = len(b)
        if sys_dim is None or r is None:
            raise PreconditionError("vector form needs sys_dim and r")
        d = sys_dim // 2
    nrm = np.linalg.norm(b)
    if nrm == 0:
        raise InputError("b is zero; nothing to prepare")
    amps = np.zeros(2 * d, dtype=complex)
    amps[:m] = b / nrm
    layout = nc.RegisterLayout((("i", int(round(math.log2(2 * d)))),))
    if ledger is not None:
        ledger.charge("b_prep", ledger.c_b * r * nc.clog2(m), context="b_prep")
    return nc.StateVector(layout, amps)


def load_instance(source) -> tuple[DistributedInstance, PenaltySpec | None]:
    """Read the instance JSON schema (path, file object, or dict)."""
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    try:
        parties = [(np.array(p["A"], dtype=float), np.array(p["b"], dtype=float))
                   for p in doc["parties"]]
        inst = build_instance(parties, float(doc["delta"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed instance document: {exc}") from exc
    penalty = None
    if doc.get("penalty") is not None:
        pen = doc["penalty"]
        penalty = PenaltySpec(float(pen["lambda"]), np.array(pen["L"], dtype=float))
    return inst, penalty


def instance_document(inst: DistributedInstance,
                      penalty: PenaltySpec | None = None) -> dict:
    doc = {
        "delta": inst.delta,
        "parties": [{"A": a.tolist(), "b": b.tolist()} for a, b in inst.parties],
    }
    if penalty is not None:
        doc["penalty"] = {"lambda": penalty.lam, "L": penalty.penalty_matrix.tolist()}
    return doc


def save_instance(inst: DistributedInstance, path,
                  penalty: PenaltySpec | None = None):
    with open(path, "w") as fh:
        json.dump(instance_document(inst, penalty), fh, sort_keys=True, indent=1)
        fh.write("\n")
