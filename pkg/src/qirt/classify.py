"""Membership tests for the free classes of instruments.

Compatibility questions (joint measurability, traditional and parallel
compatibility) share one engine. Given the branch Choi matrices of the
objects to be combined it solves

* a witness SDP, the dual of the generalized robustness
  ``min r : G_x ⪰ 0, marginals(G) ⪰ J, Tr_out Σ G = (1+r) I``.
  Its optimum (F, Y) is repaired and re-scored without trusting the
  solver, giving a certified lower bound ``w`` on the robustness. ``w > 0``
  proves incompatibility.
* when the witness is not conclusive, a depth SDP that looks for a joint
  object with exact marginals that is strictly positive on the largest
  support its marginals allow. Its depth ``λ`` is the membership margin.
"""

from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from . import linalg, sdp
from .qobjects import CpMap, Instrument, Povm, heisenberg_measurement, one_outcome, pauli_pvm, example2_pair, haar_unitary, pvm

EQ_TOL = 1e-8
PPT_TOL = 1e-10
WITNESS_THRESHOLD = 1e-6
DEPTH_THRESHOLD = 1e-8


class Status(str, Enum):
    MEMBER = "Member"
    NONMEMBER = "NonMember"
    INCONCLUSIVE = "Inconclusive"


class Relaxation(str, Enum):
    EXACT = "Exact"
    PPT = "PptRelaxation"
    WITNESS = "WitnessFamily"


@dataclass
class Verdict:
    status: Status
    margin: float
    relaxation: Relaxation = Relaxation.EXACT
    certificate: dict[str, Any] = field(default_factory=dict)

    @property
    def member(self) -> bool:
        return self.status is Status.MEMBER

    def summary(self) -> dict[str, Any]:
        return {"status": self.status.value, "margin": float(self.margin), "relaxation": self.relaxation.value}


# ---------------------------------------------------------------------------
# equality-type tests


def is_trash_and_prepare(inst: Instrument) -> Verdict:
    """Every branch is ρ ↦ Tr[ρ] τ_a, i.e. its Choi matrix is I ⊗ τ_a."""
    d, k = inst.dim_in, inst.dim_out
    residual = 0.0
    taus = []
    for b in inst.branches:
        tau = linalg.partial_trace(b.choi, [d, k], 1) / d
        taus.append(tau)
        residual = max(residual, float(np.max(np.abs(b.choi - np.kron(np.eye(d), tau)))))
    if residual <= EQ_TOL:
        return Verdict(Status.MEMBER, EQ_TOL - residual, certificate={"states": taus, "residual": residual})
    return Verdict(Status.NONMEMBER, residual, certificate={"residual": residual})


def is_weakly_compatible(insts: Sequence[Instrument]) -> Verdict:
    """All instruments induce the same channel."""
    _common_dims(insts, same_out=True)
    ref = insts[0].channel().choi
    residual = max(float(np.max(np.abs(i.channel().choi - ref))) for i in insts)
    if residual <= EQ_TOL:
        return Verdict(Status.MEMBER, EQ_TOL - residual, certificate={"channel": ref, "residual": residual})
    return Verdict(Status.NONMEMBER, residual, certificate={"residual": residual, "reason": "induced channels differ"})


def _common_dims(insts: Sequence[Instrument], same_out: bool) -> None:
    if not insts:
        raise ValueError("need at least one instrument")
    for i in insts:
        if i.dim_in != insts[0].dim_in or (same_out and i.dim_out != insts[0].dim_out):
            raise ValueError("instruments have mismatched dimensions")


# ---------------------------------------------------------------------------
# separability through PPT


def ppt_statistic(choi: np.ndarray, dim_in: int, dim_out: int) -> float:
    """λ_min of the partial transpose, normalized by the trace."""
    tr = float(np.trace(choi).real)
    if tr <= 1e-14:
        return 0.0
    return linalg.min_eig(linalg.partial_transpose(choi, [dim_in, dim_out], 1)) / tr


def _separability(chois: Sequence[np.ndarray], dim_in: int, dim_out: int) -> Verdict:
    stats = [ppt_statistic(c, dim_in, dim_out) for c in chois]
    worst = min(stats)
    cert = {"ppt_min_eigs": stats}
    if worst < -PPT_TOL:
        cert["witness_branch"] = int(np.argmin(stats))
        return Verdict(Status.NONMEMBER, -worst, Relaxation.EXACT, cert)
    if dim_in * dim_out <= 6:
        return Verdict(Status.MEMBER, worst, Relaxation.EXACT, cert)
    return Verdict(Status.INCONCLUSIVE, worst, Relaxation.PPT, cert)


def is_entanglement_breaking(inst: Instrument) -> Verdict:
    """Every branch has a separable Choi matrix (PPT, exact for 2⊗2 and 2⊗3)."""
    return _separability([b.choi for b in inst.branches], inst.dim_in, inst.dim_out)


def is_weak_entanglement_breaking(inst: Instrument) -> Verdict:
    """The induced channel is entanglement breaking."""
    return _separability([inst.channel().choi], inst.dim_in, inst.dim_out)


# ---------------------------------------------------------------------------
# compatibility engine


@dataclass
class _Layout:
    dim_in: int
    outs: list[int]  # output dimension per party
    parallel: bool

    @property
    def joint_dims(self) -> list[int]:
        return [self.dim_in, *self.outs] if self.parallel else [self.dim_in, self.outs[0]]

    @property
    def joint_size(self) -> int:
        return int(np.prod(self.joint_dims))

    def party_size(self, y: int) -> int:
        return self.dim_in * self.outs[y]

    def marginal(self, g: Any, y: int) -> Any:
        """Reduce a joint Choi matrix (array or Affine) to party ``y``."""
        if not self.parallel or len(self.outs) == 1:
            return g
        if isinstance(g, sdp.Affine):
            return g.partial_trace(self.joint_dims, [0, 1 + y])
        return linalg.partial_trace(g, self.joint_dims, [0, 1 + y])

    def embed(self, f: Any, y: int) -> Any:
        """Party operator ⊗ identity on the other outputs, in joint order."""
        if not self.parallel or len(self.outs) == 1:
            return f
        others = [d for i, d in enumerate(self.outs) if i != y]
        rest = int(np.prod(others))
        dims = [self.dim_in, self.outs[y], *others]
        # position of each joint factor inside ``dims``
        pos = [0]
        k = 2
        for i in range(len(self.outs)):
            if i == y:
                pos.append(1)
            else:
                pos.append(k)
                k += 1
        if isinstance(f, sdp.Affine):
            return f.kron_right(np.eye(rest)).permute(dims, pos)
        return linalg.permute_systems(np.kron(f, np.eye(rest)), dims, pos)


def _witness(chois: list[np.ndarray], lay: _Layout) -> dict[str, Any]:
    """Solve the dual robustness SDP and certify its value independently."""
    counts = [len(c) for c in chois]
    m = sdp.Model()
    F = [[m.hermitian(lay.party_size(y), psd=True) for _ in range(counts[y])] for y in range(len(chois))]
    Y = m.hermitian(lay.dim_in)
    m.add_eq(Y.trace(), 1.0)
    cap = Y.kron_right(np.eye(lay.joint_size // lay.dim_in))
    emb = [[lay.embed(F[y][a], y) for a in range(counts[y])] for y in range(len(chois))]
    for x in itertools.product(*[range(c) for c in counts]):
        m.add_psd(cap - sdp.affine_sum(emb[y][x[y]] for y in range(len(chois))))
    obj = sdp.affine_sum((F[y][a] @ chois[y][a]).trace() for y in range(len(chois)) for a in range(counts[y]))
    m.maximize(obj - 1.0)
    sol = m.solve()
    if sol.status != sdp.OPTIMAL:
        return {"solver_status": sol.status, "value": float("nan"), "certified": float("-inf")}
    Fv = [[linalg.psd_project(sol(F[y][a])) for a in range(counts[y])] for y in range(len(chois))]
    Yv = linalg.hermitian_part(sol(Y))
    # repair: shift Y until every Y⊗I − Σ_y F_y(x_y) is PSD
    eye_rest = np.eye(lay.joint_size // lay.dim_in)
    shift = 0.0
    for x in itertools.product(*[range(c) for c in counts]):
        s = np.kron(Yv, eye_rest) - sum(lay.embed(Fv[y][x[y]], y) for y in range(len(chois)))
        shift = max(shift, -linalg.min_eig(s))
    Yr = Yv + shift * np.eye(lay.dim_in)
    tr = float(np.trace(Yr).real)
    score = sum(float(np.trace(Fv[y][a] @ chois[y][a]).real) for y in range(len(chois)) for a in range(counts[y]))
    certified = (score - tr) / tr
    return {"solver_status": sol.status, "value": sol.value, "certified": certified, "F": Fv, "Y": Yr}


def _intersection_basis(chois: list[np.ndarray], x: tuple[int, ...], lay: _Layout) -> np.ndarray:
    n = lay.joint_size
    acc = np.zeros((n, n), dtype=complex)
    for y, a in enumerate(x):
        v = linalg.support_basis(chois[y][a])
        p = v @ v.conj().T
        acc += np.eye(n) - lay.embed(p, y)
    w, v = np.linalg.eigh(linalg.hermitian_part(acc))
    return v[:, w < 1e-9]


def _depth(chois: list[np.ndarray], lay: _Layout) -> dict[str, Any]:
    """Largest λ such that a joint with exact marginals has every block ⪰ λ on its support."""
    counts = [len(c) for c in chois]
    m = sdp.Model()
    lam = m.real()
    joint: dict[tuple[int, ...], sdp.Affine] = {}
    bases = {}
    for x in itertools.product(*[range(c) for c in counts]):
        v = _intersection_basis(chois, x, lay)
        if v.shape[1] == 0:
            continue
        yx = m.hermitian(v.shape[1])
        m.add_psd(yx - lam.kron_right(np.eye(v.shape[1])))
        joint[x] = v @ yx @ v.conj().T
        bases[x] = v
    if not joint:
        return {"solver_status": "NoSupport", "depth": float("-inf")}
    for y in range(len(chois)):
        for a in range(counts[y]):
            parts = [lay.marginal(g, y) for x, g in joint.items() if x[y] == a]
            lhs = sdp.affine_sum(parts, shape=chois[y][a].shape)
            m.add_eq(lhs, chois[y][a])
    m.add_le(lam, 1.0)
    m.maximize(lam)
    sol = m.solve()
    if sol.status != sdp.OPTIMAL:
        return {"solver_status": sol.status, "depth": float("-inf")}
    values = {x: linalg.hermitian_part(sol(g)) for x, g in joint.items()}
    residual = 0.0
    for y in range(len(chois)):
        for a in range(counts[y]):
            marg = sum((lay.marginal(g, y) for x, g in values.items() if x[y] == a), np.zeros_like(chois[y][a]))
            residual = max(residual, float(np.max(np.abs(marg - chois[y][a]))))
    depth = min(linalg.min_eig(bases[x].conj().T @ g @ bases[x]) for x, g in values.items())
    return {"solver_status": sol.status, "depth": depth, "joint": values, "residual": residual}


def _compatibility(chois: list[np.ndarray], lay: _Layout) -> Verdict:
    wit = _witness(chois, lay)
    cert: dict[str, Any] = {"robustness_lower_bound": wit["certified"], "solver_value": wit.get("value")}
    if wit["certified"] > WITNESS_THRESHOLD:
        cert.update(witness_F=wit["F"], witness_Y=wit["Y"])
        return Verdict(Status.NONMEMBER, wit["certified"], Relaxation.EXACT, cert)
    dep = _depth(chois, lay)
    cert["depth"] = dep["depth"]
    if dep["depth"] >= DEPTH_THRESHOLD and dep["residual"] <= EQ_TOL:
        cert["joint"] = dep["joint"]
        cert["marginal_residual"] = dep["residual"]
        return Verdict(Status.MEMBER, dep["depth"], Relaxation.EXACT, cert)
    return Verdict(Status.INCONCLUSIVE, max(wit["certified"], dep["depth"]), Relaxation.EXACT, cert)


def joint_measurement(povms: Sequence[Povm]) -> Verdict:
    """Decide joint measurability of a finite set of POVMs."""
    d = povms[0].dim
    if any(p.dim != d for p in povms):
        raise ValueError("POVMs act on different dimensions")
    chois = [np.stack([e.T for e in p.elements]) for p in povms]
    v = _compatibility(list(chois), _Layout(d, [1] * len(povms), parallel=False))
    if "joint" in v.certificate:
        v.certificate["joint"] = {x: g.T for x, g in v.certificate["joint"].items()}
    if "witness_F" in v.certificate:
        v.certificate["witness_F"] = [[f.T for f in fs] for fs in v.certificate["witness_F"]]
    return v


def is_traditionally_compatible(insts: Sequence[Instrument]) -> Verdict:
    """A joint instrument whose outcome marginals reproduce every instrument."""
    _common_dims(insts, same_out=True)
    weak = is_weakly_compatible(insts)
    if not weak.member:
        weak.certificate["reason"] = "not weakly compatible: induced channels differ"
        return weak
    lay = _Layout(insts[0].dim_in, [insts[0].dim_out] * len(insts), parallel=False)
    return _compatibility([i.chois for i in insts], lay)


def is_parallel_compatible(insts: Sequence[Instrument]) -> Verdict:
    """A joint instrument into K₁⊗…⊗K_n whose partial traces reproduce each instrument."""
    _common_dims(insts, same_out=False)
    lay = _Layout(insts[0].dim_in, [i.dim_out for i in insts], parallel=True)
    return _compatibility([i.chois for i in insts], lay)


# ---------------------------------------------------------------------------
# incompatibility breaking via witness families


@dataclass
class WitnessFamily:
    """Finite collection of incompatible measurement sets."""

    sets: list[tuple[Povm, ...]]
    note: str = ""

    def __post_init__(self) -> None:
        self.sets = [tuple(s) for s in self.sets]

    def validate(self) -> None:
        for i, s in enumerate(self.sets):
            v = joint_measurement(s)
            if v.status is not Status.NONMEMBER:
                raise ValueError(f"witness set {i} is not certified incompatible ({v.status.value})")

    @property
    def dim(self) -> int:
        return self.sets[0][0].dim


def default_witness_family(seed: int = 0x5EED, random_pairs: int = 5, validate: bool = False) -> WitnessFamily:
    """Qubit MUB pair and triple, the (A, B) pair, and seeded random sharp pairs."""
    z, x, y = pauli_pvm("Z"), pauli_pvm("X"), pauli_pvm("Y")
    a, b = example2_pair()
    sets: list[tuple[Povm, ...]] = [(z, x), (z, x, y), (a, b)]
    rng = np.random.default_rng(seed)
    while len(sets) < 3 + random_pairs:
        u, v = haar_unitary(2, rng), haar_unitary(2, rng)
        overlap = np.abs(u.conj().T @ v) ** 2
        if np.min(np.abs(overlap - np.round(overlap))) < 1e-3:
            continue  # nearly commuting, skip
        sets.append((pvm(u), pvm(v)))
    fam = WitnessFamily(sets, f"qubit MUB pair, MUB triple, pair (A,B), {random_pairs} random sharp pairs, seed {seed}")
    if validate:
        fam.validate()
    return fam


def breaks_incompatibility(inst: Instrument, family: WitnessFamily | None = None) -> Verdict:
    """I†[M] is compatible for every M in the family (evidence, not proof, of membership)."""
    family = family or default_witness_family()
    if family.dim != inst.dim_out:
        raise ValueError("witness measurements do not act on the instrument output")
    records = []
    inconclusive = False
    margins = []
    for i, mset in enumerate(family.sets):
        v = joint_measurement([heisenberg_measurement(inst, mm) for mm in mset])
        records.append({"set": i, **v.summary()})
        if v.status is Status.NONMEMBER:
            cert = {"violating_set": i, "per_set": records, "witness": v.certificate}
            return Verdict(Status.NONMEMBER, v.margin, Relaxation.EXACT, cert)
        if v.status is Status.INCONCLUSIVE:
            inconclusive = True
        margins.append(v.margin)
    cert = {"per_set": records, "family_note": family.note}
    status = Status.INCONCLUSIVE if inconclusive else Status.MEMBER
    return Verdict(status, min(margins), Relaxation.WITNESS, cert)


def is_weak_incompatibility_breaking(inst: Instrument, family: WitnessFamily | None = None) -> Verdict:
    """breaks_incompatibility applied to the induced channel."""
    return breaks_incompatibility(one_outcome(inst.channel()), family)


def depolarizing_thresholds(d: int, n: int) -> dict[str, float]:
    """Sufficient depolarizing parameters for EB, n-IB and IB behaviour."""
    if d < 2 or n < 2:
        raise ValueError("need d >= 2 and n >= 2")
    return {
        "eb": 1.0 / (1 + d),
        f"ibc{n}": (n + d) / (n * (1 + d)),
        "ibc": (3 * d - 1) * (d - 1) ** (d - 1) / (d**d * (d + 1)),
    }


def channel_verdict(fn: Any, m: CpMap, *args: Any) -> Verdict:
    """Run an instrument test on a channel viewed as a one-outcome instrument."""
    return fn(one_outcome(m), *args)
