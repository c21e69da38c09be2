"""Measurements, CP maps and instruments, stored through Choi matrices.

Choi convention: ``J(Φ) = Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`` (unnormalized, input
factor first). Reshaped to ``(d_in, d_out, d_in, d_out)`` the entry
``J[i, k, j, l]`` is ``Φ(|i⟩⟨j|)[k, l]``.
"""

from __future__ import annotations

import json
from collections.abc import Callable, Iterable, Sequence
from functools import cached_property
from typing import Any

import numpy as np

from . import linalg

VALID_TOL = 1e-9
KRAUS_CUT = 1e-10


# ---------------------------------------------------------------------------
# Choi plumbing


def choi_from_kraus(kraus: Sequence[np.ndarray], dim_in: int) -> np.ndarray:
    # (I ⊗ K)|Ω⟩ as a d_in × d_out matrix is K^T
    vecs = [np.asarray(k, dtype=complex).T.reshape(-1) for k in kraus]
    n = dim_in * np.asarray(kraus[0]).shape[0]
    out = np.zeros((n, n), dtype=complex)
    for v in vecs:
        out += np.outer(v, v.conj())
    return out


def choi_from_function(f: Callable[[np.ndarray], np.ndarray], dim_in: int, dim_out: int) -> np.ndarray:
    """Choi matrix of an arbitrary linear map given as a Python function."""
    j = np.zeros((dim_in, dim_out, dim_in, dim_out), dtype=complex)
    for a in range(dim_in):
        for b in range(dim_in):
            e = np.zeros((dim_in, dim_in), dtype=complex)
            e[a, b] = 1.0
            j[a, :, b, :] = f(e)
    return j.reshape(dim_in * dim_out, dim_in * dim_out)


def kraus_from_choi(choi: np.ndarray, dim_in: int, dim_out: int, cut: float = KRAUS_CUT) -> list[np.ndarray]:
    w, v = np.linalg.eigh(linalg.hermitian_part(choi))
    out = []
    for val, vec in zip(w[::-1], v[:, ::-1].T):
        if val <= cut:
            break
        out.append((np.sqrt(val) * vec).reshape(dim_in, dim_out).T)
    return out


def _apply_choi(choi: np.ndarray, dim_in: int, dim_out: int, rho: np.ndarray) -> np.ndarray:
    j4 = choi.reshape(dim_in, dim_out, dim_in, dim_out)
    return np.einsum("ij,ikjl->kl", rho, j4)


def _dual_choi(choi: np.ndarray, dim_in: int, dim_out: int, b: np.ndarray) -> np.ndarray:
    j4 = choi.reshape(dim_in, dim_out, dim_in, dim_out)
    return np.einsum("ikjl,lk->ij", j4, b).T


# ---------------------------------------------------------------------------
# value types


class Povm:
    """A finite-outcome measurement on ``C^dim``."""

    def __init__(self, elements: Sequence[np.ndarray], labels: Sequence[str] | None = None, validate: bool = True):
        self.elements = tuple(np.array(e, dtype=complex) for e in elements)
        if not self.elements:
            raise ValueError("a POVM needs at least one element")
        self.dim = self.elements[0].shape[0]
        self.labels = tuple(str(x) for x in labels) if labels is not None else tuple(str(i) for i in range(len(self.elements)))
        if len(self.labels) != len(self.elements):
            raise ValueError("labels and elements differ in length")
        if validate:
            self.check()

    def check(self, tol: float = VALID_TOL) -> None:
        for e in self.elements:
            if e.shape != (self.dim, self.dim):
                raise ValueError("POVM elements must share one square shape")
            if not linalg.is_hermitian(e, tol) or not linalg.is_psd(e, tol):
                raise ValueError("POVM element is not PSD")
        if np.max(np.abs(sum(self.elements) - np.eye(self.dim))) > tol:
            raise ValueError("POVM elements do not sum to the identity")

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.elements[i]

    def __repr__(self) -> str:
        return f"Povm(dim={self.dim}, outcomes={len(self)})"


class CpMap:
    """Completely positive map ``L(C^dim_in) → L(C^dim_out)`` held as its Choi matrix."""

    def __init__(
        self,
        choi: np.ndarray,
        dim_in: int,
        dim_out: int,
        kraus: Sequence[np.ndarray] | None = None,
        validate: bool = True,
    ):
        self.choi = np.array(choi, dtype=complex)
        self.dim_in = int(dim_in)
        self.dim_out = int(dim_out)
        n = self.dim_in * self.dim_out
        if self.choi.shape != (n, n):
            raise ValueError(f"Choi shape {self.choi.shape} does not match dims {dim_in}→{dim_out}")
        if kraus is not None:
            self.__dict__["kraus"] = [np.array(k, dtype=complex) for k in kraus]
        if validate:
            self.check()

    def check(self, tol: float = VALID_TOL) -> None:
        scale = max(1.0, float(np.max(np.abs(self.choi), initial=0.0)))
        if not linalg.is_hermitian(self.choi, tol):
            raise ValueError("Choi matrix is not Hermitian")
        if not linalg.is_psd(self.choi, tol * scale):
            raise ValueError("map is not completely positive")
        if not linalg.is_psd(np.eye(self.dim_in) - self.tr_out(), tol * scale):
            raise ValueError("map is trace increasing")
        if "kraus" in self.__dict__:
            if np.max(np.abs(choi_from_kraus(self.kraus, self.dim_in) - self.choi)) > tol * scale:
                raise ValueError("Kraus operators disagree with the Choi matrix")

    @cached_property
    def kraus(self) -> list[np.ndarray]:
        return kraus_from_choi(self.choi, self.dim_in, self.dim_out)

    def tr_out(self) -> np.ndarray:
        return linalg.partial_trace(self.choi, [self.dim_in, self.dim_out], 0)

    def is_trace_preserving(self, tol: float = VALID_TOL) -> bool:
        return bool(np.max(np.abs(self.tr_out() - np.eye(self.dim_in))) <= tol)

    def __add__(self, other: CpMap) -> CpMap:
        _same_dims(self, other)
        return CpMap(self.choi + other.choi, self.dim_in, self.dim_out, validate=False)

    def scaled(self, p: float) -> CpMap:
        return CpMap(p * self.choi, self.dim_in, self.dim_out, validate=False)

    def __repr__(self) -> str:
        return f"CpMap({self.dim_in}→{self.dim_out})"


def _same_dims(a: CpMap, b: CpMap) -> None:
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        raise ValueError(f"dimension mismatch: {a.dim_in}→{a.dim_out} vs {b.dim_in}→{b.dim_out}")


class Instrument:
    """Ordered CP branches whose sum is trace preserving."""

    def __init__(self, branches: Sequence[CpMap], labels: Sequence[str] | None = None, validate: bool = True):
        self.branches = tuple(branches)
        if not self.branches:
            raise ValueError("an instrument needs at least one branch")
        self.dim_in = self.branches[0].dim_in
        self.dim_out = self.branches[0].dim_out
        for b in self.branches:
            _same_dims(self.branches[0], b)
        self.labels = tuple(str(x) for x in labels) if labels is not None else tuple(str(i) for i in range(len(self.branches)))
        if len(self.labels) != len(self.branches):
            raise ValueError("labels and branches differ in length")
        if validate:
            self.check()

    def check(self, tol: float = VALID_TOL) -> None:
        for b in self.branches:
            b.check(tol)
        if not self.channel().is_trace_preserving(tol):
            raise ValueError("instrument branches do not sum to a channel")

    @classmethod
    def from_chois(cls, chois: Iterable[np.ndarray], dim_in: int, dim_out: int, labels: Sequence[str] | None = None, validate: bool = True) -> Instrument:
        return cls([CpMap(c, dim_in, dim_out, validate=validate) for c in chois], labels, validate=validate)

    @property
    def chois(self) -> np.ndarray:
        return np.stack([b.choi for b in self.branches])

    def channel(self) -> CpMap:
        """The induced channel Σ_a Φ_a."""
        return CpMap(self.chois.sum(axis=0), self.dim_in, self.dim_out, validate=False)

    def __len__(self) -> int:
        return len(self.branches)

    def __getitem__(self, i: int) -> CpMap:
        return self.branches[i]

    def __repr__(self) -> str:
        return f"Instrument({self.dim_in}→{self.dim_out}, outcomes={len(self)})"


class InstrumentSet:
    """Indexed family of instruments sharing input and output dimensions."""

    def __init__(self, instruments: Sequence[Instrument]):
        self.instruments = tuple(instruments)
        if not self.instruments:
            raise ValueError("empty instrument set")
        d = (self.instruments[0].dim_in, self.instruments[0].dim_out)
        for inst in self.instruments:
            if (inst.dim_in, inst.dim_out) != d:
                raise ValueError("instruments in a set must share dimensions")
        self.dim_in, self.dim_out = d

    def __len__(self) -> int:
        return len(self.instruments)

    def __getitem__(self, i: int) -> Instrument:
        return self.instruments[i]

    def __iter__(self):
        return iter(self.instruments)

    @property
    def outcome_counts(self) -> tuple[int, ...]:
        return tuple(len(i) for i in self.instruments)

    def aligned_with(self, other: InstrumentSet) -> bool:
        return (self.dim_in, self.dim_out, self.outcome_counts) == (other.dim_in, other.dim_out, other.outcome_counts)

    def __repr__(self) -> str:
        return f"InstrumentSet(n={len(self)}, {self.dim_in}→{self.dim_out}, outcomes={self.outcome_counts})"


def as_set(x: InstrumentSet | Instrument | CpMap | Sequence[Instrument]) -> InstrumentSet:
    if isinstance(x, InstrumentSet):
        return x
    if isinstance(x, Instrument):
        return InstrumentSet([x])
    if isinstance(x, CpMap):
        return InstrumentSet([one_outcome(x)])
    return InstrumentSet(list(x))


# ---------------------------------------------------------------------------
# constructors


def identity_channel(d: int) -> CpMap:
    return CpMap(np.outer(linalg.max_entangled(d, False), linalg.max_entangled(d, False)), d, d, kraus=[np.eye(d)])


def unitary_channel(u: np.ndarray) -> CpMap:
    u = np.asarray(u, dtype=complex)
    return CpMap(choi_from_kraus([u], u.shape[1]), u.shape[1], u.shape[0], kraus=[u])


def kraus_map(kraus: Sequence[np.ndarray], validate: bool = True) -> CpMap:
    k0 = np.asarray(kraus[0])
    return CpMap(choi_from_kraus(kraus, k0.shape[1]), k0.shape[1], k0.shape[0], kraus=kraus, validate=validate)


def depolarizing(d: int, t: float) -> CpMap:
    """ρ ↦ tρ + (1−t)Tr[ρ]I/d, defined for −1/(d²−1) ≤ t ≤ 1."""
    lo = -1.0 / (d * d - 1)
    if not (lo - 1e-12 <= t <= 1 + 1e-12):
        raise ValueError(f"depolarizing parameter {t} outside [{lo}, 1]")
    omega = np.outer(linalg.max_entangled(d, False), linalg.max_entangled(d, False))
    choi = t * omega + (1 - t) * np.eye(d * d) / d
    return CpMap(choi, d, d)


def trace_and_prepare(sigma: np.ndarray, dim_in: int) -> CpMap:
    """ρ ↦ Tr[ρ]σ."""
    sigma = np.asarray(sigma, dtype=complex)
    return CpMap(np.kron(np.eye(dim_in), sigma), dim_in, sigma.shape[0])


def trace_map(d: int) -> CpMap:
    """Tr: L(C^d) → C."""
    return CpMap(np.eye(d, dtype=complex), d, 1)


def append_state(sigma: np.ndarray, d: int, first: bool = True) -> CpMap:
    """σ ⊗ ρ (``first``) or ρ ⊗ σ as a channel C^d → C^(d·dim σ)."""
    sigma = np.asarray(sigma, dtype=complex)
    ds = sigma.shape[0]
    if first:
        f = lambda r: np.kron(sigma, r)  # noqa: E731
    else:
        f = lambda r: np.kron(r, sigma)  # noqa: E731
    return CpMap(choi_from_function(f, d, d * ds), d, d * ds)


def partial_trace_map(dims: Sequence[int], keep: Sequence[int]) -> CpMap:
    n = int(np.prod(dims))
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return CpMap(choi_from_function(lambda r: linalg.partial_trace(r, dims, keep), n, dk), n, dk)


def permutation_map(dims: Sequence[int], perm: Sequence[int]) -> CpMap:
    """Unitary channel reordering tensor factors (factor ``perm[i]`` goes to slot ``i``)."""
    return unitary_channel(permutation_matrix(dims, perm))


def permutation_matrix(dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    n = int(np.prod(dims))
    idx = np.arange(n).reshape(dims).transpose(perm).reshape(-1)
    p = np.zeros((n, n))
    p[np.arange(n), idx] = 1.0
    return p


def one_outcome(m: CpMap, label: str = "0") -> Instrument:
    return Instrument([m], [label])


def luders_instrument(povm: Povm) -> Instrument:
    """Branches ρ ↦ √M(a) ρ √M(a)."""
    return Instrument([kraus_map([linalg.psd_sqrt(e)], validate=False) for e in povm.elements], povm.labels)


def measure_prepare_instrument(povm: Povm, states: Sequence[np.ndarray]) -> Instrument:
    """Branches ρ ↦ Tr[ρ M(a)] σ_a."""
    d = povm.dim
    chois = [np.kron(e.T, np.asarray(s, dtype=complex)) for e, s in zip(povm.elements, states)]
    return Instrument.from_chois(chois, d, np.asarray(states[0]).shape[0], povm.labels)


def pvm(basis: np.ndarray, labels: Sequence[str] | None = None) -> Povm:
    """Projective measurement onto the columns of a unitary."""
    basis = np.asarray(basis, dtype=complex)
    return Povm([linalg.proj(basis[:, i]) for i in range(basis.shape[1])], labels)


def pauli_pvm(axis: str) -> Povm:
    w, v = linalg.hermitian_eigs(linalg.PAULI[axis.upper()])
    return pvm(v)


def trivial_povm(d: int) -> Povm:
    return Povm([np.eye(d)])


# ---------------------------------------------------------------------------
# operations


def apply(m: CpMap, rho: np.ndarray) -> np.ndarray:
    """Φ(ρ) = Tr_in[(ρ^T ⊗ I) J]."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (m.dim_in, m.dim_in):
        raise ValueError(f"input of shape {rho.shape} for a map on dimension {m.dim_in}")
    return _apply_choi(m.choi, m.dim_in, m.dim_out, rho)


def dual_apply(m: CpMap, b: np.ndarray) -> np.ndarray:
    """Heisenberg picture Φ†(B), fixed by Tr[Φ(A)B] = Tr[A Φ†(B)]."""
    b = np.asarray(b, dtype=complex)
    if b.shape != (m.dim_out, m.dim_out):
        raise ValueError(f"observable of shape {b.shape} for a map into dimension {m.dim_out}")
    return _dual_choi(m.choi, m.dim_in, m.dim_out, b)


def compose(second: CpMap, first: CpMap) -> CpMap:
    """Choi matrix of ``second ∘ first``."""
    if first.dim_out != second.dim_in:
        raise ValueError(f"cannot compose {second} after {first}")
    a, k, b = first.dim_in, first.dim_out, second.dim_out
    jf = first.choi.reshape(a, k, a, k)
    jg = second.choi.reshape(k, b, k, b)
    j = np.einsum("ikjl,kmln->imjn", jf, jg).reshape(a * b, a * b)
    return CpMap(j, a, b, validate=False)


def compose_all(*maps: CpMap) -> CpMap:
    """``maps[0] ∘ maps[1] ∘ …``."""
    out = maps[-1]
    for m in reversed(maps[:-1]):
        out = compose(m, out)
    return out


def tensor_maps(a: CpMap, b: CpMap) -> CpMap:
    """Φ ⊗ Ψ on the tensor-product input and output."""
    j = np.kron(a.choi, b.choi)
    dims = [a.dim_in, a.dim_out, b.dim_in, b.dim_out]
    j = linalg.permute_systems(j, dims, [0, 2, 1, 3])
    return CpMap(j, a.dim_in * b.dim_in, a.dim_out * b.dim_out, validate=False)


def tensor_identity(m: CpMap, d: int, left: bool = False) -> CpMap:
    """Φ ⊗ I_d (or I_d ⊗ Φ)."""
    if d == 1:
        return m
    i = identity_channel(d)
    return tensor_maps(i, m) if left else tensor_maps(m, i)


def induced_povm(inst: Instrument) -> Povm:
    """A(a) = Φ_a†(I)."""
    eye = np.eye(inst.dim_out)
    return Povm([linalg.hermitian_part(dual_apply(b, eye)) for b in inst.branches], inst.labels, validate=False)


def measure_prepare_channel(m: Povm) -> CpMap:
    """Γ_M(ρ) = Σ_a Tr[ρ M(a)] |a⟩⟨a|."""
    n = len(m)
    choi = sum(np.kron(e.T, np.diag(np.eye(n)[a]).astype(complex)) for a, e in enumerate(m.elements))
    return CpMap(choi, m.dim, n, validate=False)


def flag_channel(inst: Instrument) -> CpMap:
    """Γ_I(ρ) = Σ_a Φ_a(ρ) ⊗ |a⟩⟨a| with output K ⊗ H_Ω."""
    n = len(inst)
    choi = sum(np.kron(b.choi, np.diag(np.eye(n)[a]).astype(complex)) for a, b in enumerate(inst.branches))
    return CpMap(choi, inst.dim_in, inst.dim_out * n, validate=False)


def from_flag_channel(ch: CpMap, n: int, labels: Sequence[str] | None = None) -> Instrument:
    """Read the branches ⟨a|Γ(·)|a⟩ off a channel into K ⊗ C^n."""
    if ch.dim_out % n:
        raise ValueError("output dimension is not a multiple of the outcome count")
    k = ch.dim_out // n
    j = ch.choi.reshape(ch.dim_in, k, n, ch.dim_in, k, n)
    chois = [j[:, :, a, :, :, a].reshape(ch.dim_in * k, ch.dim_in * k) for a in range(n)]
    return Instrument.from_chois(chois, ch.dim_in, k, labels, validate=False)


def post_process(inst: Instrument, processors: Sequence[Instrument]) -> Instrument:
    """Φ̃_b = Σ_a P^a_b ∘ Φ_a."""
    if len(processors) != len(inst):
        raise ValueError("need one processor per outcome")
    p0 = processors[0]
    for p in processors:
        if p.dim_in != inst.dim_out or p.dim_out != p0.dim_out or len(p) != len(p0):
            raise ValueError("processors must act on the instrument output and share outcome structure")
    chois = []
    for b in range(len(p0)):
        acc = sum(compose(processors[a][b], inst[a]).choi for a in range(len(inst)))
        chois.append(acc)
    return Instrument.from_chois(chois, inst.dim_in, p0.dim_out, p0.labels, validate=False)


def heisenberg_measurement(inst: Instrument, b: Povm) -> Povm:
    """I†[B] with outcomes ``(a,b)``, ``a`` outer."""
    if b.dim != inst.dim_out:
        raise ValueError("measurement does not act on the instrument output")
    elements, labels = [], []
    for la, br in zip(inst.labels, inst.branches):
        for lb, e in zip(b.labels, b.elements):
            elements.append(linalg.hermitian_part(dual_apply(br, e)))
            labels.append(f"({la},{lb})")
    return Povm(elements, labels, validate=False)


def enlarge_instrument(inst: Instrument, dim_b: int) -> Instrument:
    """Φ̂_a = Φ_a ⊗ Tr_B on H_A ⊗ H_B."""
    if dim_b < 1:
        raise ValueError("dim_b must be positive")
    if dim_b == 1:
        return inst
    da, dk = inst.dim_in, inst.dim_out
    chois = [linalg.permute_systems(np.kron(b.choi, np.eye(dim_b)), [da, dk, dim_b], [0, 2, 1]) for b in inst.branches]
    return Instrument.from_chois(chois, da * dim_b, dk, inst.labels, validate=False)


def coarse_grain(povm: Povm, table: np.ndarray) -> Povm:
    """N(y) = Σ_x ν(y|x) M(x) for a row-stochastic ``table[x, y]``."""
    table = np.asarray(table, dtype=float)
    return Povm([sum(table[x, y] * povm[x] for x in range(len(povm))) for y in range(table.shape[1])])


# ---------------------------------------------------------------------------
# random objects


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_isometry(d_in: int, d_out: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d_out, d_in)) + 1j * rng.normal(size=(d_out, d_in))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    k = rank or d
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_channel(d_in: int, d_out: int, rng: np.random.Generator, kraus_rank: int | None = None) -> CpMap:
    """Stinespring truncation of a Haar isometry."""
    r = kraus_rank or d_in * d_out
    v = random_isometry(d_in, d_out * r, rng).reshape(d_out, r, d_in)
    kraus = [v[:, k, :] for k in range(r)]
    return kraus_map(kraus, validate=False)


def random_instrument(d_in: int, d_out: int, n: int, rng: np.random.Generator, kraus_rank: int = 2) -> Instrument:
    """Kraus operators of an isometry split into ``n`` groups."""
    v = random_isometry(d_in, d_out * n * kraus_rank, rng).reshape(n, kraus_rank, d_out, d_in)
    return Instrument([kraus_map(list(v[a]), validate=False) for a in range(n)], validate=False)


def random_povm(d: int, n: int, rng: np.random.Generator) -> Povm:
    v = random_isometry(d, d * n, rng).reshape(n, d, d)
    return Povm([k.conj().T @ k for k in v])


def random_trash_prepare_instrument(d_in: int, d_out: int, n: int, rng: np.random.Generator) -> Instrument:
    """Constant branches p_a Tr[ρ] σ_a."""
    p = rng.dirichlet(np.ones(n))
    return Instrument.from_chois(
        [p[a] * np.kron(np.eye(d_in), random_density(d_out, rng)) for a in range(n)], d_in, d_out, validate=False
    )


def random_eb_instrument(d_in: int, d_out: int, n: int, rng: np.random.Generator, terms: int = 2) -> Instrument:
    """Branches Σ_x Tr[ρ M(a,x)] σ_{a,x}: measure-and-prepare, hence EB."""
    m = random_povm(d_in, n * terms, rng)
    chois = []
    for a in range(n):
        chois.append(sum(np.kron(m[a * terms + x].T, random_density(d_out, rng)) for x in range(terms)))
    return Instrument.from_chois(chois, d_in, d_out, validate=False)


def random_stochastic(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.ones(cols), size=rows)


# ---------------------------------------------------------------------------
# worked examples


def example1_instrument() -> Instrument:
    """Φ₁ = ρ/2 and Φ_k = σ ρ σ / 6 for the three Paulis."""
    branches = [kraus_map([np.eye(2) / np.sqrt(2)], validate=False)]
    for ax in "XYZ":
        branches.append(kraus_map([linalg.PAULI[ax] / np.sqrt(6)], validate=False))
    return Instrument(branches, ["1", "2", "3", "4"])


def example2_pair() -> tuple[Povm, Povm]:
    """A = (|0⟩⟨0|, |1⟩⟨1|), B = (|+⟩⟨+|, |−⟩⟨−|)."""
    a = Povm([np.diag([1, 0]), np.diag([0, 1])], ["1", "2"])
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    b = Povm([linalg.proj(plus), linalg.proj(minus)], ["1", "2"])
    return a, b


def example2_table() -> np.ndarray:
    """Row-stochastic ν[(x,y), z] merging the eight outcomes of I†[A] into two."""
    ones = {(1, 1), (4, 1), (2, 2), (3, 2)}
    t = np.zeros((8, 2))
    for x in range(1, 5):
        for y in range(1, 3):
            t[(x - 1) * 2 + (y - 1), 0 if (x, y) in ones else 1] = 1.0
    return t


# ---------------------------------------------------------------------------
# JSON


def _enc(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _dec(x: Any) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("matrices are nested [re, im] arrays")
    return arr[..., 0] + 1j * arr[..., 1]


def instrument_to_json(inst: Instrument) -> dict[str, Any]:
    return {
        "format": "instrument.v1",
        "dim_in": inst.dim_in,
        "dim_out": inst.dim_out,
        "labels": list(inst.labels),
        "branches": [_enc(b.choi) for b in inst.branches],
    }


def instrument_from_json(data: dict[str, Any], validate: bool = True) -> Instrument:
    fmt = data.get("format", "instrument.v1")
    if fmt != "instrument.v1":
        raise ValueError(f"expected instrument.v1, got {fmt!r}")
    return Instrument.from_chois([_dec(b) for b in data["branches"]], data["dim_in"], data["dim_out"], data.get("labels"), validate=validate)


def povm_to_json(p: Povm) -> dict[str, Any]:
    return {"format": "povm.v1", "dim": p.dim, "labels": list(p.labels), "elements": [_enc(e) for e in p.elements]}


def povm_from_json(data: dict[str, Any], validate: bool = True) -> Povm:
    fmt = data.get("format", "povm.v1")
    if fmt != "povm.v1":
        raise ValueError(f"expected povm.v1, got {fmt!r}")
    return Povm([_dec(e) for e in data["elements"]], data.get("labels"), validate=validate)


def set_to_json(s: InstrumentSet) -> dict[str, Any]:
    return {"format": "instrument_set.v1", "instruments": [instrument_to_json(i) for i in s]}


def load_instruments(data: dict[str, Any], validate: bool = True) -> InstrumentSet:
    """Accept a single instrument or an ``instrument_set.v1`` document."""
    if data.get("format") == "instrument_set.v1":
        return InstrumentSet([instrument_from_json(d, validate) for d in data["instruments"]])
    return InstrumentSet([instrument_from_json(data, validate)])


def dumps(obj: Instrument | Povm | InstrumentSet) -> str:
    if isinstance(obj, Instrument):
        return json.dumps(instrument_to_json(obj))
    if isinstance(obj, Povm):
        return json.dumps(povm_to_json(obj))
    return json.dumps(set_to_json(obj))
