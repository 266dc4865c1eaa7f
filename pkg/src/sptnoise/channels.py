"""Single-site quantum channels and Lindbladians with symmetry classification.

Superoperators act on row-major vectorized density matrices, so the matrix
of ``rho -> K rho K^dag`` is ``K (x) conj(K)`` and the Heisenberg (dual)
superoperator is the conjugate transpose of the Schroedinger one.

Classification distinguishes three nested symmetry notions for a channel
and an onsite unitary rep ``U_g``: weak (the superoperator commutes with
conjugation by ``U_g``), strong (``E^dag(U_g)`` is ``U_g`` up to a phase),
and twisted strong (``E^dag(U_g)`` is ``U_{sigma(g)}`` up to a phase for a
group endomorphism ``sigma``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import NumericalConsistencyError, ValidationError
from .groups import Character, Endomorphism, FiniteAbelianGroup, GroupElement
from .mps import OnsiteRep, aklt_labels, spin1_flips

__all__ = [
    "QuantumChannel",
    "SuperopChannel",
    "Lindbladian",
    "SymmetryReport",
    "Twist",
    "ValidationReport",
    "validate",
    "liouville",
    "dual_apply",
    "compose",
    "tensor_product",
    "convex_combine",
    "is_weakly_symmetric",
    "is_strongly_symmetric",
    "detect_twist",
    "genericness",
    "classify",
    "dilate",
    "dilation_commutation_residual",
    "choi_matrix",
    "lindblad_superop",
    "evolve",
    "lindblad_symmetry",
    "depolarising",
    "dephasing",
    "k_ss",
    "ws_depolarising16",
    "coser",
    "zoo",
]

COMPLETENESS_TOL = 1e-10
COMMUTATION_TOL = 1e-10
PHASE_TOL = 1e-10
GENERIC_FLOOR = 1e-12


def _vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1)


def _unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim)


class QuantumChannel:
    """Channel given by a Kraus list ``E(rho) = sum_i K_i rho K_i^dag``."""

    def __init__(self, kraus: Sequence[np.ndarray]):
        mats = [np.asarray(k, dtype=complex) for k in kraus]
        if not mats:
            raise ValidationError("a channel needs at least one Kraus operator")
        d = mats[0].shape[0]
        if any(m.shape != (d, d) for m in mats):
            raise ValidationError("all Kraus operators must be square with equal dimension")
        self.kraus = mats
        self.dim = d
        self._superop: Optional[np.ndarray] = None

    def superop(self) -> np.ndarray:
        if self._superop is None:
            self._superop = sum(np.kron(k, k.conj()) for k in self.kraus)
        return self._superop

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def dual_apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=complex)
        return sum(k.conj().T @ X @ k for k in self.kraus)

    def completeness_deviation(self) -> float:
        acc = sum(k.conj().T @ k for k in self.kraus)
        return float(np.max(np.abs(acc - np.eye(self.dim))))

    def __repr__(self) -> str:
        return f"QuantumChannel(dim={self.dim}, kraus={len(self.kraus)})"


class SuperopChannel:
    """Channel known only through its superoperator matrix."""

    def __init__(self, superop_matrix: np.ndarray, dim: int):
        S = np.asarray(superop_matrix, dtype=complex)
        if S.shape != (dim * dim, dim * dim):
            raise ValidationError(f"superoperator shape {S.shape} does not match dim {dim}")
        self._S = S
        self.dim = dim

    def superop(self) -> np.ndarray:
        return self._S

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return _unvec(self._S @ _vec(rho), self.dim)

    def dual_apply(self, X: np.ndarray) -> np.ndarray:
        return _unvec(self._S.conj().T @ _vec(X), self.dim)

    def __repr__(self) -> str:
        return f"SuperopChannel(dim={self.dim})"


ChannelLike = Union[QuantumChannel, SuperopChannel]


@dataclass
class ValidationReport:
    deviation: float
    passed: bool


def validate(channel: QuantumChannel, tol: float = COMPLETENESS_TOL) -> ValidationReport:
    """Trace-preservation report: max deviation of sum K^dag K from identity."""
    dev = channel.completeness_deviation()
    return ValidationReport(deviation=dev, passed=dev <= tol)


def liouville(channel: ChannelLike) -> np.ndarray:
    return channel.superop()


def dual_apply(channel: ChannelLike, X: np.ndarray) -> np.ndarray:
    """Heisenberg action E^dag(X)."""
    return channel.dual_apply(X)


def compose(after: ChannelLike, before: ChannelLike) -> ChannelLike:
    """Channel applying ``before`` first: liouville(compose(a,b)) = L_a @ L_b."""
    if after.dim != before.dim:
        raise ValidationError("cannot compose channels of different dimension")
    if isinstance(after, QuantumChannel) and isinstance(before, QuantumChannel):
        return QuantumChannel([ka @ kb for ka in after.kraus for kb in before.kraus])
    return SuperopChannel(after.superop() @ before.superop(), after.dim)


def tensor_product(a: QuantumChannel, b: QuantumChannel) -> QuantumChannel:
    return QuantumChannel([np.kron(ka, kb) for ka in a.kraus for kb in b.kraus])


def convex_combine(weights: Sequence[float], channels: Sequence[QuantumChannel]) -> QuantumChannel:
    if len(weights) != len(channels):
        raise ValidationError("weights and channels must have equal length")
    if abs(sum(weights) - 1.0) > 1e-12 or any(w < 0 for w in weights):
        raise ValidationError(f"weights must be nonnegative and sum to 1, got {list(weights)}")
    dims = {ch.dim for ch in channels}
    if len(dims) != 1:
        raise ValidationError("cannot mix channels of different dimension")
    kraus = []
    for w, ch in zip(weights, channels):
        kraus.extend(math.sqrt(w) * k for k in ch.kraus)
    return QuantumChannel(kraus)


def is_weakly_symmetric(channel: ChannelLike, rep: OnsiteRep, tol: float = COMMUTATION_TOL) -> bool:
    if rep.dim != channel.dim:
        raise ValidationError("rep dimension does not match channel dimension")
    S = channel.superop()
    for g in rep.group.elements():
        ad = np.kron(rep.matrix(g), rep.matrix(g).conj())
        if np.max(np.abs(S @ ad - ad @ S)) > tol:
            return False
    return True


def _phase_match(M: np.ndarray, U: np.ndarray, tol: float) -> Optional[complex]:
    """Unimodular c with M = c U, if it exists within tolerance."""
    d = U.shape[0]
    c = np.trace(U.conj().T @ M) / d
    if abs(abs(c) - 1.0) > tol:
        return None
    if np.max(np.abs(M - c * U)) > tol:
        return None
    return complex(c)


def is_strongly_symmetric(
    channel: ChannelLike, rep: OnsiteRep, tol: float = COMMUTATION_TOL
) -> Optional[dict[GroupElement, float]]:
    """Phase map theta(g) with E^dag(U_g) = exp(i theta(g)) U_g, or None.

    Phases with modulus below 1 indicate decay and do not qualify.
    """
    if rep.dim != channel.dim:
        raise ValidationError("rep dimension does not match channel dimension")
    thetas = {}
    for g in rep.group.elements():
        c = _phase_match(channel.dual_apply(rep.matrix(g)), rep.matrix(g), tol)
        if c is None:
            return None
        thetas[g] = float(np.angle(c))
    return thetas


@dataclass
class Twist:
    sigma: Endomorphism
    theta: dict[GroupElement, float]

    @property
    def det(self) -> int:
        return self.sigma.det


def detect_twist(
    channel: ChannelLike,
    rep: OnsiteRep,
    group: Optional[FiniteAbelianGroup] = None,
    tol: float = COMMUTATION_TOL,
) -> Optional[Twist]:
    """Endomorphism sigma and phases with E^dag(U_g) = e^{i theta} U_{sigma(g)}.

    The search runs over group elements per generator; an ambiguous match
    (two elements passing the tolerance) aborts with None rather than
    tie-breaking.  The candidate map is then verified on the whole group.
    """
    group = group or rep.group
    if rep.dim != channel.dim:
        raise ValidationError("rep dimension does not match channel dimension")
    images = []
    for gen in group.generators():
        M = channel.dual_apply(rep.matrix(gen))
        matches = [h for h in group.elements() if _phase_match(M, rep.matrix(h), tol) is not None]
        if len(matches) != 1:
            return None
        images.append(matches[0])
    r = group.rank
    matrix = tuple(tuple(images[j].residues[i] for j in range(r)) for i in range(r))
    try:
        sigma = Endomorphism(group, matrix)
    except ValueError:
        return None
    theta = {}
    for g in group.elements():
        c = _phase_match(channel.dual_apply(rep.matrix(g)), rep.matrix(sigma(g)), tol)
        if c is None:
            return None
        theta[g] = float(np.angle(c))
    return Twist(sigma=sigma, theta=theta)


def _sector_projectors(rep: OnsiteRep) -> dict[Character, np.ndarray]:
    """Operator-space projectors onto the characters of U_g (.) U_g^dag."""
    group = rep.group
    out = {}
    for alpha in group.characters():
        acc = np.zeros((rep.dim**2, rep.dim**2), dtype=complex)
        for g in group.elements():
            ad = np.kron(rep.matrix(g), rep.matrix(g).conj())
            acc += np.conj(alpha.value(g)) * ad
        out[alpha] = acc / group.order
    return out


def genericness(
    channel: ChannelLike,
    rep: OnsiteRep,
    sigma: Optional[Endomorphism] = None,
    floor: float = GENERIC_FLOOR,
) -> tuple[list[Character], bool]:
    """Characters whose Heisenberg block is populated, and the generic flag.

    The operator space splits into character sectors of the adjoint action;
    the block of the Heisenberg superoperator mapping sector ``alpha`` into
    the sigma-pullback preimage of ``alpha`` is tested against a norm floor.
    The channel is generic when every character in the image of the
    pullback is present.
    """
    group = rep.group
    sigma = sigma or Endomorphism.identity(group)
    projectors = _sector_projectors(rep)
    Lh = channel.superop().conj().T
    chars = group.characters()
    present = []
    for alpha in chars:
        pre = sum(projectors[beta] for beta in chars if sigma.star(beta).residues == alpha.residues)
        if isinstance(pre, int):
            continue
        block = pre @ Lh @ projectors[alpha]
        if np.max(np.abs(block)) > floor:
            present.append(alpha)
    image = {sigma.star(beta).residues for beta in chars}
    present_set = {a.residues for a in present}
    generic = image.issubset(present_set)
    return present, generic


@dataclass
class SymmetryReport:
    weak: bool
    strong: Optional[dict[GroupElement, float]]
    twist: Optional[Twist]
    generic_irreps: list[Character] = field(default_factory=list)
    generic: bool = False
    tolerances: dict[str, float] = field(default_factory=dict)


def classify(channel: ChannelLike, rep: OnsiteRep, tol: float = COMMUTATION_TOL) -> SymmetryReport:
    weak = is_weakly_symmetric(channel, rep, tol)
    strong = is_strongly_symmetric(channel, rep, tol)
    twist = detect_twist(channel, rep, tol=tol)
    sigma = twist.sigma if twist is not None else None
    present, generic = genericness(channel, rep, sigma)
    return SymmetryReport(
        weak=weak,
        strong=strong,
        twist=twist,
        generic_irreps=present,
        generic=generic,
        tolerances={"commutation": tol, "generic_floor": GENERIC_FLOOR},
    )


def dilate(channel: QuantumChannel, tol: float = COMPLETENESS_TOL) -> np.ndarray:
    """Unitary on system (x) ancilla recovering the channel at ancilla 0.

    The first block column holds the Kraus operators; the remaining block
    columns start from sign-flipped copies and are orthonormalized with a
    block Gram-Schmidt sweep.  Right-multiplying factors are built from
    ``K_i^dag K_j`` sums, so a strongly symmetric Kraus set yields a
    dilation commuting with ``U_g (x) 1`` up to the channel phase.
    """
    report = validate(channel, tol)
    if not report.passed:
        raise ValidationError(f"channel is not trace preserving (deviation {report.deviation:.2e})")
    m = len(channel.kraus)
    d = channel.dim
    columns = [list(channel.kraus)]
    for j in range(1, m):
        cand = [((-1.0) ** (1 if i < j else 0)) * channel.kraus[i] for i in range(m)]
        for prev in columns:
            overlap = sum(p.conj().T @ c for p, c in zip(prev, cand))
            cand = [c - p @ overlap for p, c in zip(prev, cand)]
        gram = sum(c.conj().T @ c for c in cand)
        evals, Q = np.linalg.eigh(gram)
        if evals.min() < 1e-12 * max(1.0, evals.max()):
            raise ValidationError(
                f"Gram-Schmidt breakdown at block column {j}: rank-deficient candidate"
            )
        inv_sqrt = Q @ np.diag(evals**-0.5) @ Q.conj().T
        columns.append([c @ inv_sqrt for c in cand])
    W = np.zeros((d * m, d * m), dtype=complex)
    for j, col in enumerate(columns):
        for a, block in enumerate(col):
            W += np.kron(block, np.outer(np.eye(m)[:, a], np.eye(m)[:, j]))
    dev = np.max(np.abs(W.conj().T @ W - np.eye(d * m)))
    if dev > 1e-9:
        raise NumericalConsistencyError(f"dilation is not unitary (deviation {dev:.2e})")
    return W


def dilation_commutation_residual(W: np.ndarray, U: np.ndarray) -> tuple[float, float]:
    """Best-phase residual of (U (x) 1) W = e^{i theta} W (U (x) 1).

    Returns ``(residual, theta)`` where theta maximizes the overlap.
    """
    dm = W.shape[0]
    d = U.shape[0]
    m = dm // d
    Ue = np.kron(U, np.eye(m))
    left = Ue @ W
    right = W @ Ue
    overlap = np.trace(right.conj().T @ left)
    theta = float(np.angle(overlap)) if abs(overlap) > 1e-14 else 0.0
    residual = float(np.max(np.abs(left - np.exp(1j * theta) * right)))
    return residual, theta


def choi_matrix(channel: ChannelLike) -> np.ndarray:
    """Choi matrix; positive semidefinite iff the map is completely positive."""
    d = channel.dim
    S = channel.superop()
    return S.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


class Lindbladian:
    """Markovian generator with Hamiltonian part and jump operators."""

    def __init__(self, hamiltonian: np.ndarray, jumps: Sequence[np.ndarray]):
        H = np.asarray(hamiltonian, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValidationError("hamiltonian must be a square matrix")
        if np.max(np.abs(H - H.conj().T)) > 1e-12:
            raise ValidationError("hamiltonian must be Hermitian within 1e-12")
        self.hamiltonian = H
        self.jumps = [np.asarray(L, dtype=complex) for L in jumps]
        if any(L.shape != H.shape for L in self.jumps):
            raise ValidationError("jump operators must match the hamiltonian dimension")
        self.dim = H.shape[0]

    def dual_apply(self, X: np.ndarray) -> np.ndarray:
        """Heisenberg generator L^dag(X)."""
        X = np.asarray(X, dtype=complex)
        out = 1j * (self.hamiltonian @ X - X @ self.hamiltonian)
        for L in self.jumps:
            LdL = L.conj().T @ L
            out += L.conj().T @ X @ L - 0.5 * (LdL @ X + X @ LdL)
        return out

    def __repr__(self) -> str:
        return f"Lindbladian(dim={self.dim}, jumps={len(self.jumps)})"


def lindblad_superop(lb: Lindbladian) -> np.ndarray:
    d = lb.dim
    eye = np.eye(d)
    H = lb.hamiltonian
    S = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for L in lb.jumps:
        LdL = L.conj().T @ L
        S += np.kron(L, L.conj())
        S -= 0.5 * (np.kron(LdL, eye) + np.kron(eye, LdL.T))
    return S


def evolve(lb: Lindbladian, t: float) -> SuperopChannel:
    """exp(t L) as a superoperator channel (scaling-and-squaring expm)."""
    if t < 0:
        raise ValidationError("evolution time must be nonnegative")
    return SuperopChannel(scipy.linalg.expm(t * lindblad_superop(lb)), lb.dim)


def lindblad_symmetry(lb: Lindbladian, rep: OnsiteRep, tol: float = COMMUTATION_TOL) -> dict[str, bool]:
    """Weak/strong symmetry of the generator.

    Strong symmetry is checked both by commutation of the presented
    Hamiltonian and jumps with every ``U_g`` and by annihilation of the
    charges ``L^dag(U_g) = 0``; disagreement raises a consistency error.
    """
    if rep.dim != lb.dim:
        raise ValidationError("rep dimension does not match Lindbladian dimension")
    S = lindblad_superop(lb)
    weak = True
    for g in rep.group.elements():
        ad = np.kron(rep.matrix(g), rep.matrix(g).conj())
        if np.max(np.abs(S @ ad - ad @ S)) > tol:
            weak = False
            break
    strong_ops = True
    for g in rep.group.elements():
        U = rep.matrix(g)
        if np.max(np.abs(U @ lb.hamiltonian - lb.hamiltonian @ U)) > tol:
            strong_ops = False
            break
        if any(np.max(np.abs(U @ L - L @ U)) > tol for L in lb.jumps):
            strong_ops = False
            break
    strong_charge = all(
        np.max(np.abs(lb.dual_apply(rep.matrix(g)))) <= tol for g in rep.group.elements()
    )
    if strong_ops != strong_charge:
        raise NumericalConsistencyError(
            f"strong-symmetry criteria disagree: commutation={strong_ops}, charge={strong_charge}"
        )
    return {"weak": weak, "strong": strong_ops}


# --- built-in channels -------------------------------------------------


def _clock_shift(n: int) -> tuple[np.ndarray, np.ndarray]:
    shift = np.zeros((n, n), dtype=complex)
    for j in range(n):
        shift[(j + 1) % n, j] = 1.0
    clock = np.diag(np.exp(2j * np.pi * np.arange(n) / n))
    return shift, clock


def depolarising(dim: int, lam: float) -> QuantumChannel:
    """Uniform contraction toward the maximally mixed state.

    Kraus form: the identity with weight ``1 - lam + lam/d^2`` plus all
    nontrivial shift/clock words ``Z^a X^b`` with weight ``lam/d^2`` each,
    which realizes ``rho -> (1-lam) rho + lam tr(rho) 1/d``.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"decay rate must lie in [0, 1], got {lam}")
    shift, clock = _clock_shift(dim)
    kraus = [math.sqrt(1.0 - lam + lam / dim**2) * np.eye(dim, dtype=complex)]
    w = math.sqrt(lam) / dim
    for a in range(dim):
        za = np.linalg.matrix_power(clock, a)
        for b in range(dim):
            if a == 0 and b == 0:
                continue
            kraus.append(w * (za @ np.linalg.matrix_power(shift, b)))
    return QuantumChannel(kraus)


def dephasing(lam: float) -> QuantumChannel:
    """Spin-1 group twirl toward the pi-rotation eigenbasis.

    Mixes the identity with the three pi-rotations ``exp(i pi S_j)``; at
    ``lam = 1`` this is the full group average (the channel that kills all
    operators with nontrivial rotation charge).
    """
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"decay rate must lie in [0, 1], got {lam}")
    flips = spin1_flips()
    kraus = [math.sqrt(1.0 - 0.75 * lam) * np.eye(3, dtype=complex)]
    kraus.extend(math.sqrt(lam / 4.0) * flips[j] for j in ("x", "y", "z"))
    return QuantumChannel(kraus)


def _z4z4() -> FiniteAbelianGroup:
    return FiniteAbelianGroup((4, 4))


def k_ss(det_index: int) -> QuantumChannel:
    """Twisted strongly symmetric channels on the 16-dimensional regular rep.

    Basis vector ``4*p1 + p2`` carries the character ``(p1, p2)`` of
    Z4 x Z4.  The returned channel satisfies ``E^dag(U_g) = U_{sigma(g)}``
    exactly, with ``sigma = diag(1, det_index)``:

    * ``det_index = 0``: reset to the trivial-character basis state,
      sixteen rank-one Kraus operators;
    * ``det_index = 2``: four Kraus operators built from 4x4 blocks acting
      on the second character slot as multiplication by 2;
    * ``det_index = 3``: two Kraus operators whose 4x4 blocks act as
      multiplication by 3 (an automorphism).
    """
    d = 16
    if det_index == 0:
        eye = np.eye(d, dtype=complex)
        return QuantumChannel([np.outer(eye[:, 0], eye[:, i]) for i in range(d)])
    e = np.eye(4, dtype=complex)
    if det_index == 2:
        blocks = [
            np.outer(e[:, 0], e[:, 0]),
            np.outer(e[:, 2], e[:, 1]),
            np.outer(e[:, 0], e[:, 2]),
            np.outer(e[:, 2], e[:, 3]),
        ]
    elif det_index == 3:
        blocks = [
            np.outer(e[:, 0], e[:, 0]),
            np.outer(e[:, 3], e[:, 1]) + np.outer(e[:, 2], e[:, 2]) + np.outer(e[:, 1], e[:, 3]),
        ]
    else:
        raise ValidationError(f"no twisted construction for det index {det_index}")
    return QuantumChannel([np.kron(np.eye(4), b) for b in blocks])


def ws_depolarising16(lam: float) -> QuantumChannel:
    """Weakly (not strongly) symmetric reference channel on 16 dimensions."""
    return depolarising(16, lam)


def coser(phi: Optional[np.ndarray] = None) -> Lindbladian:
    """Single-site replacement Lindbladian ``rho -> tr(rho) |phi><phi| - rho``.

    Jump operators ``|phi><i|`` with vanishing Hamiltonian.  The default
    ``|phi>`` is the spin-1 ``Sz = 0`` state, which every pi-rotation maps
    to itself up to sign, so the generator is weakly but not strongly
    symmetric.
    """
    if phi is None:
        phi = np.array([0.0, 1.0, 0.0], dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    norm = np.linalg.norm(phi)
    if norm < 1e-14:
        raise ValidationError("target state must be nonzero")
    phi = phi / norm
    d = phi.shape[0]
    eye = np.eye(d, dtype=complex)
    jumps = [np.outer(phi, eye[:, i]) for i in range(d)]
    return Lindbladian(np.zeros((d, d)), jumps)


def zoo(name: str, **params) -> Union[QuantumChannel, Lindbladian]:
    """Named channel constructors used by the presets and the CLI."""
    builders = {
        "depolarising": lambda: depolarising(int(params.get("dim", 3)), float(params["lam"])),
        "dephasing": lambda: dephasing(float(params["lam"])),
        "k_ss": lambda: k_ss(int(params["k"])),
        "ws_depolarising16": lambda: ws_depolarising16(float(params["lam"])),
        "coser": lambda: coser(params.get("phi")),
    }
    if name not in builders:
        raise ValidationError(f"unknown channel name {name!r}; expected one of {sorted(builders)}")
    try:
        return builders[name]()
    except KeyError as exc:
        raise ValidationError(f"missing parameter {exc} for channel {name!r}") from exc
