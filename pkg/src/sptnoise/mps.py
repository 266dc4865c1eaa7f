"""Translation-invariant matrix product states with onsite symmetry.

Conventions used throughout (and relied on by :mod:`sptnoise.observables`):

* a tensor ``A`` has shape ``(d, D, D)`` with ``A[i]`` the ``D x D`` matrix
  of physical index ``i``;
* the generalized transfer operator of a single-site operator ``X`` acts on
  ``D x D`` matrices as ``T_X(M) = sum_ij X[i,j] A[j] @ M @ A[i]^dag`` and is
  materialized as a ``D^2 x D^2`` matrix acting on row-major vectorized
  ``M``;
* canonical form means the plain transfer operator has leading eigenvalue 1
  with the identity as its left fixed point; the right fixed point is the
  trace-normalized positive matrix ``rho_R``.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    NonInjectiveError,
    NumericalConsistencyError,
    ValidationError,
)
from .groups import Character, Cocycle, FiniteAbelianGroup, GroupElement, unit_phase

__all__ = [
    "MpsTensor",
    "OnsiteRep",
    "SymmetricMps",
    "VirtualRep",
    "LeadingEig",
    "transfer_operator",
    "leading_eigs",
    "is_injective",
    "canonicalize",
    "aklt",
    "aklt_labels",
    "spin1_matrices",
    "regular_diagonal_rep",
    "projective_virtual_rep",
    "random_symmetric_mps",
    "extract_virtual_rep",
    "apply_kraus_trajectory",
    "twisted_sector_charge",
]

EIG_GAP_TOL = 1e-8
CANONICAL_TOL = 1e-10
FUNDAMENTAL_TOL = 1e-8
DENSE_LIMIT = 10**7


def _vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1)


def _unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim)


class MpsTensor:
    """Rank-three tensor of a translation-invariant MPS."""

    def __init__(self, entries: np.ndarray):
        arr = np.array(entries, dtype=complex)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValidationError(f"tensor must have shape (d, D, D), got {arr.shape}")
        arr.flags.writeable = False
        self.entries = arr

    @property
    def physical_dim(self) -> int:
        return self.entries.shape[0]

    @property
    def bond_dim(self) -> int:
        return self.entries.shape[1]

    def matrix(self, i: int) -> np.ndarray:
        return self.entries[i]

    def __repr__(self) -> str:
        return f"MpsTensor(d={self.physical_dim}, D={self.bond_dim})"


def transfer_operator(tensor: MpsTensor, X: np.ndarray) -> np.ndarray:
    """D^2 x D^2 matrix of ``M -> sum_ij X[i,j] A[j] M A[i]^dag``."""
    A = tensor.entries
    X = np.asarray(X, dtype=complex)
    if X.shape != (tensor.physical_dim, tensor.physical_dim):
        raise ValidationError(
            f"operator shape {X.shape} does not match physical dimension {tensor.physical_dim}"
        )
    D = tensor.bond_dim
    XA = np.tensordot(X, A, axes=(1, 0))  # XA[i] = sum_j X[i,j] A[j]
    T = np.einsum("iab,ice->acbe", XA, A.conj(), optimize=True)
    return T.reshape(D * D, D * D)


class LeadingEig:
    """Leading eigendata of a transfer operator.

    ``left`` and ``right`` are the D x D matrices of the dominant left/right
    eigenvectors, normalized so that ``<left|right> = Tr[left^dag right] = 1``
    when nondegenerate.  ``degenerate`` flags a leading-modulus gap below
    1e-8; callers decide how to proceed.
    """

    def __init__(self, value, left, right, degenerate, gap):
        self.value = complex(value)
        self.left = left
        self.right = right
        self.degenerate = bool(degenerate)
        self.gap = float(gap)

    def projector(self) -> np.ndarray:
        """Rank-one spectral projector |right><left| (requires nondegeneracy)."""
        l = _vec(self.left)
        r = _vec(self.right)
        return np.outer(r, l.conj())


def leading_eigs(T: np.ndarray) -> LeadingEig:
    """Dense eigendecomposition, returning the maximal-modulus eigenpair."""
    T = np.asarray(T, dtype=complex)
    dim = int(round(math.isqrt(T.shape[0])))
    vals, vecs = np.linalg.eig(T)
    order = np.argsort(-np.abs(vals))
    lead = order[0]
    gap = np.abs(vals[order[0]]) - (np.abs(vals[order[1]]) if len(vals) > 1 else 0.0)
    lvals, lvecs = np.linalg.eig(T.conj().T)
    lead_l = int(np.argmin(np.abs(lvals - vals[lead].conjugate())))
    left = _unvec(lvecs[:, lead_l], dim)
    right = _unvec(vecs[:, lead], dim)
    overlap = np.vdot(_vec(left), _vec(right))
    degenerate = gap < EIG_GAP_TOL
    if not degenerate:
        if abs(overlap) < 1e-12:
            raise NumericalConsistencyError("left/right eigenvector overlap vanished")
        right = right / overlap
    residual = np.linalg.norm(T @ _vec(right) - vals[lead] * _vec(right))
    if residual > 1e-8 * max(1.0, np.linalg.norm(T)):
        raise NumericalConsistencyError(f"eigenpair residual {residual:.2e} too large")
    return LeadingEig(vals[lead], left, right, degenerate, gap)


def is_injective(tensor: MpsTensor) -> bool:
    """Nondegenerate leading transfer eigenvalue with full-rank fixed points."""
    lead = leading_eigs(transfer_operator(tensor, np.eye(tensor.physical_dim)))
    if lead.degenerate:
        return False
    for fp in (lead.left, lead.right):
        smin = np.linalg.svd(fp, compute_uv=False)[-1]
        if smin <= 1e-8 * max(1.0, np.linalg.norm(fp, 2)):
            return False
    return True


def canonicalize(tensor: MpsTensor) -> tuple[MpsTensor, np.ndarray]:
    """Rescale and gauge so the left fixed point is the identity.

    Returns the new tensor together with its right fixed point ``rho_R``
    (positive, trace one).  Raises :class:`NonInjectiveError` when the
    leading eigenvalue is degenerate or a fixed point is rank deficient.
    """
    A = tensor.entries
    T = transfer_operator(tensor, np.eye(tensor.physical_dim))
    lead = leading_eigs(T)
    if lead.degenerate:
        raise NonInjectiveError(f"leading transfer eigenvalue degenerate (gap {lead.gap:.2e})")
    lam = lead.value
    if abs(lam.imag) > 1e-9 * abs(lam):
        raise NonInjectiveError(f"leading transfer eigenvalue {lam} is not positive")
    A = A / math.sqrt(lam.real)

    sigma = lead.left
    sigma = 0.5 * (sigma + sigma.conj().T)
    if sigma.trace().real < 0:
        sigma = -sigma
    evals, Q = np.linalg.eigh(sigma)
    if evals.min() <= 1e-10 * evals.max():
        raise NonInjectiveError("left fixed point is rank deficient")
    Y = np.diag(np.sqrt(evals)) @ Q.conj().T
    Yinv = Q @ np.diag(1.0 / np.sqrt(evals))
    new = MpsTensor(np.einsum("ab,ibc,cd->iad", Y, A, Yinv, optimize=True))

    lead2 = leading_eigs(transfer_operator(new, np.eye(new.physical_dim)))
    rho = lead2.right
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / rho.trace().real
    D = new.bond_dim
    ident_dev = np.max(np.abs(lead2.left / lead2.left.trace() * D - np.eye(D)))
    if abs(lead2.value - 1.0) > CANONICAL_TOL or ident_dev > 1e-8:
        raise NumericalConsistencyError(
            f"canonical form failed: eigenvalue {lead2.value}, identity deviation {ident_dev:.2e}"
        )
    rmin = np.linalg.eigvalsh(rho).min()
    if rmin < -1e-10:
        raise NumericalConsistencyError(f"right fixed point not positive (min eig {rmin:.2e})")
    return new, rho


class OnsiteRep:
    """Unitary linear representation of a finite abelian group on one site."""

    def __init__(self, group: FiniteAbelianGroup, matrices: dict[GroupElement, np.ndarray]):
        self.group = group
        self.matrices = {g: np.asarray(m, dtype=complex) for g, m in matrices.items()}
        dims = {m.shape for m in self.matrices.values()}
        if len(dims) != 1 or any(s[0] != s[1] for s in dims):
            raise ValidationError("representation matrices must be square and equal-sized")
        self.dim = next(iter(dims))[0]
        self._validate()

    def _validate(self) -> None:
        eye = np.eye(self.dim)
        if np.max(np.abs(self.matrix(self.group.identity) - eye)) > 1e-12:
            raise ValidationError("U at the identity element is not the identity matrix")
        for g, m in self.matrices.items():
            if np.max(np.abs(m.conj().T @ m - eye)) > 1e-12:
                raise ValidationError(f"U[{g}] is not unitary")
        for g in self.group.elements():
            for h in self.group.elements():
                dev = np.max(np.abs(self.matrix(g) @ self.matrix(h) - self.matrix(g + h)))
                if dev > 1e-12:
                    raise ValidationError(f"U[{g}] U[{h}] != U[{g}+{h}] (deviation {dev:.2e})")

    def matrix(self, g: GroupElement) -> np.ndarray:
        return self.matrices[g]

    def __iter__(self):
        return iter(self.group.elements())


def regular_diagonal_rep(group: FiniteAbelianGroup) -> OnsiteRep:
    """The |G|-dimensional rep carrying each character once, diagonally.

    Basis order follows the canonical character order, so basis vector ``a``
    transforms with the ``a``-th character.
    """
    chars = group.characters()
    mats = {g: np.diag([c.value(g) for c in chars]) for g in group.elements()}
    return OnsiteRep(group, mats)


def spin1_matrices() -> dict[str, np.ndarray]:
    """Spin-1 operators in the Sz eigenbasis ordered (+, 0, -)."""
    sq = 1.0 / math.sqrt(2.0)
    sx = np.array([[0, sq, 0], [sq, 0, sq], [0, sq, 0]], dtype=complex)
    sy = np.array([[0, -1j * sq, 0], [1j * sq, 0, -1j * sq], [0, 1j * sq, 0]], dtype=complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return {"e": np.eye(3, dtype=complex), "x": sx, "y": sy, "z": sz}


def aklt_labels(group: Optional[FiniteAbelianGroup] = None) -> dict[str, GroupElement]:
    """Label map e/x/y/z -> Z2 x Z2 elements used by the spin-1 rep."""
    group = group or FiniteAbelianGroup((2, 2))
    return {
        "e": group.element((0, 0)),
        "x": group.element((1, 0)),
        "y": group.element((0, 1)),
        "z": group.element((1, 1)),
    }


class VirtualRep:
    """Extracted virtual action: unitaries ``V_g``, phases, commutator table.

    ``commutator(g, h)`` is the scalar commutator phase of the virtual
    unitaries arranged to match :func:`sptnoise.groups.commutator_phase`:
    for a state in class k it equals ``exp(2 pi i k (z w - x y)/n)`` for
    ``g=(w,x)``, ``h=(y,z)``.
    """

    def __init__(self, group, matrices, phases, table):
        self.group = group
        self.matrices = matrices
        self.phases = phases
        self._table = table

    def matrix(self, g: GroupElement) -> np.ndarray:
        return self.matrices[g]

    def phase(self, g: GroupElement) -> float:
        return self.phases[g]

    def commutator(self, g: GroupElement, h: GroupElement) -> complex:
        return self._table[(g.residues, h.residues)]

    def matched_cocycle_index(self, tol: float = 1e-8) -> Optional[int]:
        """Index k whose commutator bicharacter matches the table, if any."""
        if self.group.rank != 2 or not self.group.is_uniform:
            return None
        elems = self.group.elements()
        for k in range(self.group.uniform_modulus):
            omega = Cocycle(self.group, k)
            ok = all(
                abs(self.commutator(g, h) - omega.commutator_phase(g, h)) <= tol
                for g in elems
                for h in elems
            )
            if ok:
                return k
        return None


class SymmetricMps:
    """Canonical injective MPS together with its onsite symmetry."""

    def __init__(self, tensor: MpsTensor, rep: OnsiteRep, rho_right: Optional[np.ndarray] = None):
        if tensor.physical_dim != rep.dim:
            raise ValidationError(
                f"physical dimension {tensor.physical_dim} does not match rep dimension {rep.dim}"
            )
        self.tensor = tensor
        self.rep = rep
        self._rho_right = rho_right
        self._virtual: Optional[VirtualRep] = None

    @classmethod
    def from_tensor(cls, tensor: MpsTensor, rep: OnsiteRep) -> "SymmetricMps":
        canon, rho = canonicalize(tensor)
        return cls(canon, rep, rho)

    @property
    def group(self) -> FiniteAbelianGroup:
        return self.rep.group

    @property
    def physical_dim(self) -> int:
        return self.tensor.physical_dim

    @property
    def bond_dim(self) -> int:
        return self.tensor.bond_dim

    @property
    def rho_right(self) -> np.ndarray:
        if self._rho_right is None:
            lead = leading_eigs(transfer_operator(self.tensor, np.eye(self.physical_dim)))
            rho = 0.5 * (lead.right + lead.right.conj().T)
            self._rho_right = rho / rho.trace().real
        return self._rho_right

    def virtual_rep(self) -> VirtualRep:
        if self._virtual is None:
            self._virtual = extract_virtual_rep(self)
        return self._virtual


def aklt() -> SymmetricMps:
    """The spin-1 valence-bond chain state with its Z2 x Z2 symmetry.

    Tensor convention (basis +, 0, -): ``A+ = sqrt(2/3) s+``,
    ``A0 = -sqrt(1/3) sz``, ``A- = -sqrt(2/3) s-``; already canonical, with
    diagonal string values -4/9 in the infinite-length limit.
    """
    sp = np.array([[0, 1], [0, 0]], dtype=complex)
    sm = sp.T.copy()
    sz = np.diag([1.0, -1.0]).astype(complex)
    A = np.stack(
        [math.sqrt(2.0 / 3.0) * sp, -math.sqrt(1.0 / 3.0) * sz, -math.sqrt(2.0 / 3.0) * sm]
    )
    # exp(i pi S_j) = 1 - 2 S_j^2 for spin 1; exact integer matrices
    flips = {
        "x": np.array([[0, 0, -1], [0, -1, 0], [-1, 0, 0]], dtype=complex),
        "y": np.array([[0, 0, 1], [0, -1, 0], [1, 0, 0]], dtype=complex),
        "z": np.diag([-1.0, 1.0, -1.0]).astype(complex),
    }
    labels = aklt_labels()
    group = labels["e"].group
    mats = {
        labels["e"]: np.eye(3, dtype=complex),
        labels["x"]: flips["x"],
        labels["y"]: flips["y"],
        labels["z"]: flips["z"],
    }
    rep = OnsiteRep(group, mats)
    tensor = MpsTensor(A)
    _, rho = canonicalize(tensor)
    return SymmetricMps(tensor, rep, rho)


def _clock_shift(n: int) -> tuple[np.ndarray, np.ndarray]:
    shift = np.zeros((n, n), dtype=complex)
    for j in range(n):
        shift[(j + 1) % n, j] = 1.0
    clock = np.diag([unit_phase(j, n) for j in range(n)])
    return shift, clock


def projective_virtual_rep(
    group: FiniteAbelianGroup, k: int, bond_dim: int
) -> dict[GroupElement, np.ndarray]:
    """Unitaries V_g of class k on C^D, padded by multiplicity.

    For k = 0 the rep is a diagonal linear rep cycling through all
    characters (so generic states populate many sectors).  For k != 0 it is
    the minimal clock/shift pair of degree ``n/gcd(k,n)`` tensored with an
    identity; ``bond_dim`` must be a multiple of that degree.
    """
    n = group.uniform_modulus
    if group.rank != 2:
        raise ValidationError("virtual rep construction requires a rank-2 group")
    k = k % n
    if k == 0:
        chars = group.characters()
        assign = [chars[i % len(chars)] for i in range(bond_dim)]
        return {g: np.diag([c.value(g) for c in assign]) for g in group.elements()}
    g0 = math.gcd(k, n)
    degree = n // g0
    if bond_dim % degree != 0:
        raise ValidationError(
            f"bond dimension {bond_dim} is not a multiple of the minimal degree {degree} "
            f"for cocycle index {k}"
        )
    mult = bond_dim // degree
    shift, clock = _clock_shift(degree)
    c = k // g0
    eye = np.eye(mult)
    out = {}
    for g in group.elements():
        w, x = g.residues
        base = np.linalg.matrix_power(shift, w % degree) @ np.linalg.matrix_power(
            clock, (c * x) % degree
        )
        out[g] = np.kron(base, eye)
    return out


def random_symmetric_mps(
    group: FiniteAbelianGroup,
    k: int,
    bond_dim: int,
    seed: int,
    max_retries: int = 32,
) -> SymmetricMps:
    """Random injective MPS with prescribed virtual class k.

    A complex Gaussian tensor is projected onto the symmetric subspace by
    group averaging against the regular physical rep and the prescribed
    virtual rep, then canonicalized; non-injective draws are retried.
    Deterministic for a fixed seed.
    """
    rep = regular_diagonal_rep(group)
    virt = projective_virtual_rep(group, k, bond_dim)
    d = rep.dim
    chars = group.characters()
    rng = np.random.default_rng(seed)
    for attempt in range(max_retries):
        raw = rng.standard_normal((d, bond_dim, bond_dim)) + 1j * rng.standard_normal(
            (d, bond_dim, bond_dim)
        )
        acc = np.zeros_like(raw)
        for g in group.elements():
            V = virt[g]
            conj_diag = np.array([chars[i].value(g).conjugate() for i in range(d)])
            acc += conj_diag[:, None, None] * np.einsum(
                "ab,ibc,cd->iad", V, raw, V.conj().T, optimize=True
            )
        acc /= group.order
        norm = np.linalg.norm(acc)
        if norm < 1e-12:
            raise ValidationError(
                f"symmetric subspace is empty for group {group}, k={k}, D={bond_dim}"
            )
        tensor = MpsTensor(acc / norm)
        try:
            canon, rho = canonicalize(tensor)
        except (NonInjectiveError, NumericalConsistencyError):
            continue
        if not is_injective(canon):
            continue
        return SymmetricMps(canon, rep, rho)
    raise NonInjectiveError(
        f"failed to draw an injective symmetric tensor after {max_retries} retries "
        f"(group {group}, k={k}, D={bond_dim}, seed={seed})"
    )


def _phase_fixed(V: np.ndarray) -> np.ndarray:
    """Rotate so the first non-negligible entry is real positive."""
    flat = V.reshape(-1)
    cutoff = 1e-9 * np.max(np.abs(flat))
    idx = int(np.argmax(np.abs(flat) > cutoff))
    phase = flat[idx] / abs(flat[idx])
    return V / phase


def extract_virtual_rep(state: SymmetricMps, tol: float = FUNDAMENTAL_TOL) -> VirtualRep:
    """Recover the virtual unitaries from mixed transfer operators.

    For each g the leading left eigenvector of ``T_{U_g}`` is the virtual
    unitary up to scale and phase; the leading modulus must be 1 within
    1e-8, otherwise the state is not symmetric under g.
    """
    A = state.tensor.entries
    D = state.bond_dim
    group = state.group
    matrices: dict[GroupElement, np.ndarray] = {}
    phases: dict[GroupElement, float] = {}
    for g in group.elements():
        U = state.rep.matrix(g)
        lead = leading_eigs(transfer_operator(state.tensor, U))
        if abs(lead.value) < 1.0 - tol:
            raise ValidationError(
                f"state is not symmetric under {g}: leading modulus {abs(lead.value):.6f}"
            )
        V = lead.left
        V = V * math.sqrt(D) / np.linalg.norm(V)
        V = _phase_fixed(V)
        unit_dev = np.max(np.abs(V.conj().T @ V - np.eye(D)))
        if unit_dev > 1e-8:
            raise NumericalConsistencyError(
                f"extracted virtual action at {g} is not unitary (deviation {unit_dev:.2e})"
            )
        phase = lead.value / abs(lead.value)
        UA = np.tensordot(U, A, axes=(1, 0))
        residual = np.max(np.abs(UA - phase * np.einsum("ab,ibc,cd->iad", V, A, V.conj().T)))
        if residual > tol:
            raise NumericalConsistencyError(
                f"virtual action residual {residual:.2e} exceeds {tol:.0e} at {g}"
            )
        matrices[g] = V
        phases[g] = float(np.angle(phase))
    table = {}
    for g in group.elements():
        for h in group.elements():
            M = matrices[h] @ matrices[g] @ matrices[h].conj().T @ matrices[g].conj().T
            c = np.trace(M) / D
            if abs(abs(c) - 1.0) > 1e-8 or np.max(np.abs(M - c * np.eye(D))) > 1e-8:
                raise NumericalConsistencyError(
                    f"virtual commutator at ({g},{h}) is not a scalar phase"
                )
            table[(g.residues, h.residues)] = complex(c / abs(c))
    return VirtualRep(group, matrices, phases, table)


def apply_kraus_trajectory(state: SymmetricMps, K: np.ndarray) -> SymmetricMps:
    """Site-wise action of a single Kraus operator on every tensor.

    The resulting tensor is re-canonicalized; a non-injective result is
    reported via :class:`NonInjectiveError` (invariant extraction refused).
    """
    K = np.asarray(K, dtype=complex)
    if K.shape != (state.physical_dim, state.physical_dim):
        raise ValidationError("Kraus operator dimension mismatch")
    if np.linalg.norm(K) < 1e-14:
        raise ValidationError("Kraus operator must be nonzero")
    B = np.tensordot(K, state.tensor.entries, axes=(1, 0))
    tensor = MpsTensor(B)
    try:
        canon, rho = canonicalize(tensor)
    except (NonInjectiveError, NumericalConsistencyError) as exc:
        raise NonInjectiveError(f"trajectory tensor is not injective: {exc}") from exc
    return SymmetricMps(canon, state.rep, rho)


def twisted_sector_charge(
    state: SymmetricMps, h: GroupElement, g: GroupElement, length: int
) -> complex:
    """Symmetry charge of the closed-chain state twisted by V_h.

    Builds the dense state with amplitudes ``Tr[V_h A^{i1} ... A^{iL}]`` and
    returns ``<psi_h| U_g^{x L} |psi_h> / <psi_h|psi_h>``.
    """
    d = state.physical_dim
    if length < 2:
        raise ValidationError("chain length must be at least 2")
    if d**length > DENSE_LIMIT:
        raise ValidationError(f"dense construction limit exceeded: {d}^{length} > {DENSE_LIMIT}")
    V = state.virtual_rep().matrix(h)
    A = state.tensor.entries
    current = V[None, :, :]
    for _ in range(length):
        current = np.einsum("xab,ibc->xiac", current, A, optimize=True)
        current = current.reshape(-1, state.bond_dim, state.bond_dim)
    psi = np.einsum("xaa->x", current)
    norm = float(np.vdot(psi, psi).real)
    if norm < 1e-12:
        raise ValidationError(f"twisted sector is empty at length {length} (norm {norm:.2e})")
    U = state.rep.matrix(g)
    phi = psi.reshape([d] * length)
    for axis in range(length):
        phi = np.moveaxis(np.tensordot(U, phi, axes=(1, axis)), 0, axis)
    return complex(np.vdot(psi, phi.reshape(-1)) / norm)
