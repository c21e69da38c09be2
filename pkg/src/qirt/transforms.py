"""Free transformations of instrument sets and a harness checking monotonicity.

Most theories share one wiring. An input set ``{I^a = {Φ^a_b}}`` is fed
through a pre-instrument ``Φ'^j`` (its outcome ``a`` picks the input
instrument) and a post-instrument ``Φ̃^{j,b}`` (chosen by the input outcome
``b``):

    Φ̄^j_c = Σ_{a,b} Φ̃^{j,b}_c ∘ (Φ^a_b ⊗ I_Q) ∘ Φ'^j_a.

The theories differ in which slots must be free and in whether two such
terms are mixed with weight ``q``. Slots are checked with :mod:`classify`
before a transform runs; a slot proven outside its class raises
:class:`SlotViolation`.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import classify, linalg
from .distances import set_distance
from .measures import FreeSetSpec, distance_measure
from .qobjects import (
    CpMap,
    Instrument,
    InstrumentSet,
    append_state,
    as_set,
    compose,
    flag_channel,
    from_flag_channel,
    haar_unitary,
    identity_channel,
    kraus_map,
    post_process,
    random_channel,
    random_density,
    random_eb_instrument,
    random_instrument,
    random_isometry,
    random_stochastic,
    tensor_identity,
    tensor_maps,
    trace_and_prepare,
)

THEORIES = ("ip", "ep", "sep", "mip", "smip", "ti", "pi")
FREE_TAGS = {"ip": "TP", "ep": "EB_PPT", "sep": "WEB_PPT", "mip": "IB_Witness", "smip": "WIB_Witness", "ti": "TC", "pi": "PC"}
TOL = 1e-7


class SlotViolation(ValueError):
    """A constituent of a supermap is not in the class its slot requires."""


@dataclass
class SupermapSpec:
    """Constituents of a supermap.

    ``pre``/``post`` hold the first (weight ``q``) term and
    ``pre_alt``/``post_alt`` the second (weight ``1-q``) term. ``post`` is
    indexed ``[j][b]``. The PID supermap reads ``channels['F']``,
    ``channels['K']`` and ``tables['p']``, ``tables['q']``; the controlled
    supermap reads CpMaps from ``pre``/``post`` and ``outcomes``.
    """

    theory: str
    pre: list[Any] = field(default_factory=list)
    post: list[Any] = field(default_factory=list)
    pre_alt: list[Any] | None = None
    post_alt: list[Any] | None = None
    q: float = 1.0
    tables: dict[str, np.ndarray] = field(default_factory=dict)
    channels: dict[str, Any] = field(default_factory=dict)
    outcomes: int | None = None
    note: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("mixing weight q must lie in [0, 1]")
        for name, t in self.tables.items():
            t = np.asarray(t, dtype=float)
            if np.any(t < -1e-12) or np.max(np.abs(t.sum(axis=-1) - 1.0), initial=0.0) > 1e-10:
                raise ValueError(f"probability table {name!r} is not row-stochastic")
            self.tables[name] = t


# ---------------------------------------------------------------------------
# building blocks


def zero_map(d_in: int, d_out: int) -> CpMap:
    return CpMap(np.zeros((d_in * d_out, d_in * d_out), dtype=complex), d_in, d_out, validate=False)


def _gamma0(d_state: int, d_sigma: int) -> CpMap:
    """σ ↦ |0⟩⟨0| ⊗ σ."""
    return append_state(linalg.proj(linalg.ket(0, d_state)), d_sigma, first=True)


def selector(branch: CpMap, n: int, index: int = 0) -> Instrument:
    """Instrument with ``n`` outcomes whose only nonzero branch is ``index``."""
    z = zero_map(branch.dim_in, branch.dim_out)
    return Instrument([branch if a == index else z for a in range(n)], validate=False)


def flag_reader(d_k: int, d_out: int, n_flags: int) -> Instrument:
    """Branches ω ↦ ⟨c| Tr_K ω |c⟩ on K ⊗ (K̄ ⊗ Ω), one per flag value ``c``."""
    eye = np.eye(d_out)
    branches = []
    for c in range(n_flags):
        kraus = [np.kron(np.kron(linalg.ket(k, d_k)[None, :], eye), linalg.ket(c, n_flags)[None, :]) for k in range(d_k)]
        branches.append(kraus_map(kraus, validate=False))
    return Instrument(branches, validate=False)


def discard_first(d_k: int, inner: CpMap) -> CpMap:
    """inner ∘ (Tr_K ⊗ I)."""
    kraus = [np.kron(linalg.ket(k, d_k)[None, :], np.eye(inner.dim_in)) for k in range(d_k)]
    return compose(inner, kraus_map(kraus, validate=False))


def _wire(inputs: Sequence[Instrument], pre: Sequence[Instrument], post: Sequence[Sequence[Instrument]]) -> list[list[np.ndarray]]:
    """Choi matrices of Σ_{a,b} Φ̃^{j,b}_c ∘ (Φ^a_b ⊗ I_Q) ∘ Φ'^j_a for every j, c."""
    d_h = inputs[0].dim_in
    nb = len(inputs[0])
    if any(len(i) != nb for i in inputs):
        raise ValueError("input instruments must share the outcome count")
    out = []
    for j, pj in enumerate(pre):
        if len(pj) != len(inputs):
            raise ValueError("pre-instrument outcomes must index the input instruments")
        if pj.dim_out % d_h:
            raise ValueError("pre-instrument output is not H ⊗ Q")
        qd = pj.dim_out // d_h
        posts = post[j]
        if len(posts) != nb:
            raise ValueError("need one post-instrument per input outcome")
        nc = len(posts[0])
        size = pj.dim_in * posts[0].dim_out
        acc = [np.zeros((size, size), dtype=complex) for _ in range(nc)]
        for a, inst in enumerate(inputs):
            if not np.any(pj[a].choi):
                continue
            for b in range(nb):
                mid = compose(tensor_identity(inst[b], qd), pj[a])
                for c in range(nc):
                    acc[c] += compose(posts[b][c], mid).choi
        out.append(acc)
    return out


def _assemble(chois: list[list[np.ndarray]], d_in: int, d_out: int) -> InstrumentSet:
    return InstrumentSet([Instrument.from_chois(row, d_in, d_out, validate=False) for row in chois])


def _mix(q: float, a: list[list[np.ndarray]], b: list[list[np.ndarray]]) -> list[list[np.ndarray]]:
    return [[q * x + (1 - q) * y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _require(verdict: classify.Verdict, what: str) -> None:
    if verdict.status is classify.Status.NONMEMBER:
        raise SlotViolation(f"{what} is not in the required class (margin {verdict.margin:.3g})")


def _check_ib(inst: Instrument, what: str, family: classify.WitnessFamily | None, weak: bool) -> None:
    eb = classify.is_weak_entanglement_breaking(inst) if weak else classify.is_entanglement_breaking(inst)
    if eb.status is not classify.Status.NONMEMBER:
        return
    family = family or classify.default_witness_family()
    if family.dim != inst.dim_out:
        return  # no witness acts on this output; nothing refutes membership
    fn = classify.is_weak_incompatibility_breaking if weak else classify.breaks_incompatibility
    _require(fn(inst, family), what)


# ---------------------------------------------------------------------------
# supermaps


def controlled_supermap(spec: SupermapSpec, items: Any) -> InstrumentSet:
    """[V(C)]_j = Θ^j_post ∘ (Σ_C ⊗ I_R) ∘ Θ^j_pre acting on flag channels.

    ``Σ_C = Σ_i Γ_i ⊗ (σ ↦ ⟨i|σ|i⟩ |i⟩⟨i|)`` reads the control register
    ``H_I`` (dimension = number of instruments) to pick which flag channel
    is applied. ``Θ^j_pre : H̄ → H ⊗ H_I ⊗ R`` and
    ``Θ^j_post : K ⊗ Ω ⊗ H_I ⊗ R → K̄ ⊗ Ω̄``; ``spec.outcomes`` is ``|Ω̄|``.
    """
    s = as_set(items)
    n = len(s)
    flags = [flag_channel(i) for i in s]
    if len({f.dim_out for f in flags}) != 1:
        raise ValueError("instruments must share outcome counts to be controlled together")
    sigma = None
    for i, f in enumerate(flags):
        sel = np.zeros((n * n, n * n), dtype=complex)
        sel[i * n + i, i * n + i] = 1.0
        term = tensor_maps(f, CpMap(sel, n, n, validate=False))
        sigma = term if sigma is None else sigma + term
    assert sigma is not None
    m_out = spec.outcomes or 1
    out = []
    for pre, post in zip(spec.pre, spec.post):
        if pre.dim_out % (s.dim_in * n):
            raise ValueError("pre-channel output must be H ⊗ H_I ⊗ R")
        r = pre.dim_out // (s.dim_in * n)
        mid = compose(tensor_identity(sigma, r), pre)
        ch = compose(post, mid)
        out.append(from_flag_channel(ch, m_out))
    return InstrumentSet(out)


def instrument_post_process(items: Any, processors: Sequence[Sequence[Instrument]]) -> InstrumentSet:
    """Post-process instrument ``i`` with ``processors[i]`` (one per outcome)."""
    s = as_set(items)
    if len(processors) != len(s):
        raise ValueError("need one processor family per instrument")
    return InstrumentSet([post_process(inst, procs) for inst, procs in zip(s, processors)])


def tp_free_transform(spec: SupermapSpec, items: Any, validate: bool = True) -> InstrumentSet:
    """Two-term mixture with trash-and-prepare slots Λ'^b (first term) and Θ'^b (second).

    Inputs with several outcomes enter through their flag channels, so the
    wiring sees one channel Φ^a per input instrument. ``tables['p'][b, a]``
    is p(a|b). The output is a set of one-outcome instruments indexed by b.
    """
    s = as_set(items)
    chans = InstrumentSet([Instrument([flag_channel(i)], validate=False) for i in s])
    p = spec.tables["p"]
    if validate:
        for lam in spec.pre:
            _require(classify.is_trash_and_prepare(lam), "Λ'")
        for theta in spec.post_alt or []:
            _require(classify.is_trash_and_prepare(theta), "Θ'")

    def term(pres: Sequence[Instrument], posts: Sequence[Instrument]) -> list[list[np.ndarray]]:
        pre_inst = [Instrument([pr[0].scaled(p[b, a]) for a in range(len(chans))], validate=False) for b, pr in enumerate(pres)]
        return _wire(chans, pre_inst, [[po] for po in posts])

    first = term(spec.pre, spec.post)
    d_in, d_out = spec.pre[0].dim_in, spec.post[0].dim_out
    if spec.pre_alt is None or spec.q == 1.0:
        return _assemble(first, d_in, d_out)
    second = term(spec.pre_alt, spec.post_alt)
    return _assemble(_mix(spec.q, first, second), d_in, d_out)


def _two_term(spec: SupermapSpec, items: Any) -> InstrumentSet:
    s = as_set(items)
    first = _wire(list(s), spec.pre, spec.post)
    d_in, d_out = spec.pre[0].dim_in, spec.post[0][0].dim_out
    if spec.pre_alt is None or spec.q == 1.0:
        return _assemble(first, d_in, d_out)
    second = _wire(list(s), spec.pre_alt, spec.post_alt)
    return _assemble(_mix(spec.q, first, second), d_in, d_out)


def eb_free_transform(spec: SupermapSpec, items: Any, validate: bool = True) -> InstrumentSet:
    """q·[EB pre slot] + (1−q)·[EB post slot]."""
    if validate:
        for inst in spec.pre:
            _require(classify.is_entanglement_breaking(inst), "Φ'*")
        for row in spec.post_alt or []:
            for inst in row:
                _require(classify.is_entanglement_breaking(inst), "Φ̃*")
    return _two_term(spec, items)


def ib_free_transform(spec: SupermapSpec, items: Any, validate: bool = True, family: classify.WitnessFamily | None = None) -> InstrumentSet:
    """q·[IB pre slot] + (1−q)·[IB post slot]."""
    if validate:
        for inst in spec.pre:
            _check_ib(inst, "Φ'*", family, weak=False)
        for row in spec.post_alt or []:
            for inst in row:
                _check_ib(inst, "Φ̃*", family, weak=False)
    return _two_term(spec, items)


def web_free_transform(spec: SupermapSpec, items: Any, validate: bool = True) -> InstrumentSet:
    """One term; every post-instrument has an entanglement-breaking induced channel."""
    if validate:
        for row in spec.post:
            for inst in row:
                _require(classify.is_weak_entanglement_breaking(inst), "Φ̃")
    return InstrumentSet(_two_term(SupermapSpec(spec.theory, spec.pre, spec.post), items))


def wib_free_transform(spec: SupermapSpec, items: Any, validate: bool = True, family: classify.WitnessFamily | None = None) -> InstrumentSet:
    """One term; every post-instrument has an incompatibility-breaking induced channel."""
    if validate:
        for row in spec.post:
            for inst in row:
                _check_ib(inst, "Φ̃", family, weak=True)
    return InstrumentSet(_two_term(SupermapSpec(spec.theory, spec.pre, spec.post), items))


def check_parallel_joint(insts: Sequence[Instrument], joint: dict[tuple[int, ...], np.ndarray], tol: float = 1e-8) -> bool:
    """Is ``joint`` (Choi matrices on H ⊗ K_1 ⊗ ... ⊗ K_n) a parallel joint of ``insts``?"""
    d_in = insts[0].dim_in
    outs = [i.dim_out for i in insts]
    dims = [d_in] + outs
    total = sum(joint.values())
    if np.max(np.abs(linalg.partial_trace(total, dims, [0]) - np.eye(d_in))) > tol:
        return False
    if any(linalg.min_eig(g) < -tol for g in joint.values()):
        return False
    for i, inst in enumerate(insts):
        for a in range(len(inst)):
            marg = sum((linalg.partial_trace(g, dims, [0, 1 + i]) for x, g in joint.items() if x[i] == a), np.zeros_like(inst[a].choi))
            if np.max(np.abs(marg - inst[a].choi)) > tol:
                return False
    return True


def pc_free_transform(spec: SupermapSpec, items: Any, validate: bool = True) -> InstrumentSet:
    """One term; the pre-instruments form a parallel compatible set.

    A joint instrument in ``spec.channels['pre_joint']`` is checked directly;
    otherwise membership is decided by SDP.
    """
    if validate:
        joint = spec.channels.get("pre_joint")
        if joint is not None:
            if not check_parallel_joint(spec.pre, joint):
                raise SlotViolation("supplied joint does not reproduce the pre-instrument set")
        else:
            _require(classify.is_parallel_compatible(spec.pre), "pre-instrument set")
    return InstrumentSet(_two_term(SupermapSpec(spec.theory, spec.pre, spec.post), items))


def pid_supermap(spec: SupermapSpec, items: Any, validate: bool = True) -> InstrumentSet:
    """Φ̃^j_b = Σ_{λ,i,a} p(b|i,j,λ,a) q(i|j,λ) K^λ ∘ (Φ^i_a ⊗ I_Q) ∘ F.

    ``tables['p']`` has shape (J, Λ, I, A, B) and ``tables['q']`` shape
    (J, Λ, I). The input set must be weakly compatible (one induced channel).
    """
    s = as_set(items)
    if validate:
        weak = classify.is_weakly_compatible(list(s))
        if not weak.member:
            raise SlotViolation("PID input set is not weakly compatible")
    f: CpMap = spec.channels["F"]
    kin: Instrument = spec.channels["K"]
    p, qt = spec.tables["p"], spec.tables["q"]
    n_j, n_l, n_i, n_a, n_b = p.shape
    if qt.shape != (n_j, n_l, n_i) or n_l != len(kin) or n_i != len(s) or any(len(x) != n_a for x in s):
        raise ValueError("PID tables do not match the instrument set")
    qd = f.dim_out // s.dim_in
    core = [[[compose(kin[l], compose(tensor_identity(s[i][a], qd), f)).choi for a in range(n_a)] for i in range(n_i)] for l in range(n_l)]
    out = []
    for j in range(n_j):
        chois = []
        for b in range(n_b):
            acc = sum(p[j, l, i, a, b] * qt[j, l, i] * core[l][i][a] for l in range(n_l) for i in range(n_i) for a in range(n_a))
            chois.append(np.asarray(acc, dtype=complex))
        out.append(Instrument.from_chois(chois, s.dim_in, kin.dim_out, validate=False))
    return InstrumentSet(out)


TRANSFORMS: dict[str, Callable[..., InstrumentSet]] = {
    "ip": tp_free_transform,
    "ep": eb_free_transform,
    "sep": web_free_transform,
    "mip": ib_free_transform,
    "smip": wib_free_transform,
    "ti": pid_supermap,
    "pi": pc_free_transform,
}


def apply_transform(theory: str, spec: SupermapSpec, items: Any, validate: bool = True) -> InstrumentSet:
    if theory not in TRANSFORMS:
        raise ValueError(f"unknown theory {theory!r}; expected one of {THEORIES}")
    return TRANSFORMS[theory](spec, items, validate=validate)


# ---------------------------------------------------------------------------
# random objects for the harness


def _regroup(kraus: Sequence[np.ndarray], n: int, rng: np.random.Generator) -> Instrument:
    """Haar-rotate a Kraus list and split it into ``n`` outcome groups."""
    r = len(kraus)
    u = haar_unitary(r, rng)
    mixed = [sum(u[l, k] * kraus[k] for k in range(r)) for l in range(r)]
    groups = np.array_split(np.arange(r), n)
    return Instrument([kraus_map([mixed[k] for k in g], validate=False) for g in groups], validate=False)


def random_weak_eb_instrument(d_in: int, d_out: int, n: int, rng: np.random.Generator, rank: int = 4) -> Instrument:
    """Instrument whose induced channel is measure-and-prepare with rank-one Kraus operators."""
    v = random_isometry(d_in, rank, rng)
    kraus = []
    for x in range(rank):
        psi = rng.normal(size=d_out) + 1j * rng.normal(size=d_out)
        psi /= np.linalg.norm(psi)
        kraus.append(np.outer(psi, v[x]))
    return _regroup(kraus, n, rng)


def random_weakly_compatible_set(d_in: int, d_out: int, count: int, n: int, rng: np.random.Generator, rank: int = 4) -> InstrumentSet:
    """Instruments obtained by regrouping the Kraus operators of one channel."""
    ch = random_channel(d_in, d_out, rng, kraus_rank=rank)
    return InstrumentSet([_regroup(ch.kraus, n, rng) for _ in range(count)])


def random_tc_set(d_in: int, d_out: int, counts: Sequence[int], rng: np.random.Generator) -> tuple[InstrumentSet, dict[tuple[int, ...], np.ndarray]]:
    """Marginals of a random joint instrument, plus that joint."""
    keys = list(itertools.product(*[range(c) for c in counts]))
    joint = random_instrument(d_in, d_out, len(keys), rng)
    g = {x: joint[k].choi for k, x in enumerate(keys)}
    insts = []
    for i, c in enumerate(counts):
        chois = [sum(g[x] for x in keys if x[i] == a) for a in range(c)]
        insts.append(Instrument.from_chois(chois, d_in, d_out, validate=False))
    return InstrumentSet(insts), g


def random_pc_set(d_in: int, d_out: int, counts: Sequence[int], rng: np.random.Generator) -> tuple[InstrumentSet, dict[tuple[int, ...], np.ndarray]]:
    """Partial-trace marginals of a random instrument into K^{⊗n}, plus that instrument."""
    keys = list(itertools.product(*[range(c) for c in counts]))
    n = len(counts)
    dims = [d_in] + [d_out] * n
    joint = random_instrument(d_in, d_out**n, len(keys), rng)
    insts = []
    for i, c in enumerate(counts):
        chois = [sum(linalg.partial_trace(joint[k].choi, dims, [0, 1 + i]) for k, x in enumerate(keys) if x[i] == a) for a in range(c)]
        insts.append(Instrument.from_chois(chois, d_in, d_out, validate=False))
    return InstrumentSet(insts), {x: joint[k].choi for k, x in enumerate(keys)}


def random_free_set(theory: str, rng: np.random.Generator, d: int = 2, count: int = 2, n: int = 2) -> InstrumentSet:
    """A random member of the theory's free class."""
    if theory == "ip":
        return InstrumentSet([Instrument([trace_and_prepare(random_density(d, rng), d)]) for _ in range(count)])
    if theory in ("ep", "mip"):
        return InstrumentSet([random_eb_instrument(d, d, n, rng) for _ in range(count)])
    if theory in ("sep", "smip"):
        return InstrumentSet([random_weak_eb_instrument(d, d, n, rng) for _ in range(count)])
    if theory == "ti":
        return random_tc_set(d, d, [n] * count, rng)[0]
    if theory == "pi":
        return random_pc_set(d, d, [n] * count, rng)[0]
    raise ValueError(f"unknown theory {theory!r}")


def random_input_set(theory: str, rng: np.random.Generator, d: int = 2, count: int = 2, n: int = 2) -> InstrumentSet:
    """Generic (usually resourceful) inputs; PID inputs are weakly compatible."""
    if theory == "ti":
        return random_weakly_compatible_set(d, d, count, n, rng)
    return InstrumentSet([random_instrument(d, d, n, rng) for _ in range(count)])


def random_spec(theory: str, rng: np.random.Generator, template: InstrumentSet, d_bar: int = 2, count_out: int = 2, n_out: int = 2) -> SupermapSpec:
    """A random valid spec for the theory, sized to the template input set."""
    d_h, d_k = template.dim_in, template.dim_out
    n_in, n_b = len(template), len(template[0])
    q_dim = int(rng.integers(1, 3))
    q_alt = int(rng.integers(1, 3))
    q = float(rng.uniform())
    seedinfo = f"Q={q_dim}, Q'={q_alt}"

    def posts(qd: int, maker: Callable[[int, int], Instrument]) -> list[list[Instrument]]:
        return [[maker(d_k * qd, d_bar) for _ in range(n_b)] for _ in range(count_out)]

    def rnd(di: int, do: int) -> Instrument:
        return random_instrument(di, do, n_out, rng)

    if theory == "ip":
        d_flag = d_k * n_b
        p = random_stochastic(count_out, n_in, rng)
        pre = [Instrument([trace_and_prepare(random_density(d_h * q_dim, rng), d_bar)]) for _ in range(count_out)]
        post = [Instrument([random_channel(d_flag * q_dim, d_bar, rng)]) for _ in range(count_out)]
        pre_alt = [Instrument([random_channel(d_bar, d_h * q_alt, rng)]) for _ in range(count_out)]
        post_alt = [Instrument([trace_and_prepare(random_density(d_bar, rng), d_flag * q_alt)]) for _ in range(count_out)]
        return SupermapSpec(theory, pre, post, pre_alt, post_alt, q=q, tables={"p": p}, note=seedinfo)
    if theory in ("ep", "mip"):
        pre = [random_eb_instrument(d_bar, d_h * q_alt, n_in, rng) for _ in range(count_out)]
        post = posts(q_alt, rnd)
        pre_alt = [random_instrument(d_bar, d_h * q_dim, n_in, rng) for _ in range(count_out)]
        post_alt = posts(q_dim, lambda di, do: random_eb_instrument(di, do, n_out, rng))
        return SupermapSpec(theory, pre, post, pre_alt, post_alt, q=q, note=seedinfo)
    if theory in ("sep", "smip"):
        pre = [random_instrument(d_bar, d_h * q_dim, n_in, rng) for _ in range(count_out)]
        post = posts(q_dim, lambda di, do: random_weak_eb_instrument(di, do, n_out, rng))
        return SupermapSpec(theory, pre, post, note=seedinfo)
    if theory == "pi":
        pre_set, joint = random_pc_set(d_bar, d_h * q_dim, [n_in] * count_out, rng)
        return SupermapSpec(theory, list(pre_set), posts(q_dim, rnd), channels={"pre_joint": joint}, note=seedinfo)
    if theory == "ti":
        n_l = 2
        f = random_channel(d_h, d_h * q_dim, rng)
        k = random_instrument(d_k * q_dim, d_bar, n_l, rng)
        p = rng.dirichlet(np.ones(n_out), size=(count_out, n_l, n_in, n_b))
        qt = rng.dirichlet(np.ones(n_in), size=(count_out, n_l))
        return SupermapSpec(theory, tables={"p": p, "q": qt}, channels={"F": f, "K": k}, note=seedinfo)
    raise ValueError(f"unknown theory {theory!r}")


# ---------------------------------------------------------------------------
# canonical reachability constructions


def canonical_spec(theory: str, source: InstrumentSet, target: InstrumentSet, joint: dict[tuple[int, ...], np.ndarray] | None = None) -> SupermapSpec:
    """A q = 1 spec sending ``source`` exactly onto the free ``target``.

    The prepared register Q carries either the target input (sep, smip) or
    the target's flag channel output (ip, ep, mip, pi). For ti a joint
    instrument of the target is needed; it is computed by SDP when not given.
    """
    d_h, d_k = source.dim_in, source.dim_out
    n_in, n_b = len(source), len(source[0])
    d_bar_in, d_bar_out = target.dim_in, target.dim_out
    if theory == "ip":
        d_flag = d_k * n_b
        pre = [Instrument([compose(_gamma0(d_h, d_bar_out), t.channel())], validate=False) for t in target]
        post = [Instrument([discard_first(d_flag, identity_channel(d_bar_out))], validate=False) for _ in target]
        pre_alt = [Instrument([random_channel(d_bar_in, d_h, np.random.default_rng(0))]) for _ in target]
        post_alt = [Instrument([trace_and_prepare(np.eye(d_bar_out) / d_bar_out, d_flag)]) for _ in target]
        p = np.full((len(target), n_in), 1.0 / n_in)
        return SupermapSpec(theory, pre, post, pre_alt, post_alt, q=1.0, tables={"p": p}, note="canonical")
    if theory in ("ep", "mip", "pi"):
        pre, post = [], []
        for t in target:
            m = len(t)
            g = compose(_gamma0(d_h, d_bar_out * m), flag_channel(t))
            pre.append(selector(g, n_in))
            reader = flag_reader(d_k, d_bar_out, m)
            post.append([reader] * n_b)
        if theory == "pi":
            return SupermapSpec(theory, pre, post, channels={"pre_joint": _flagged_joint(target, d_h, joint)}, note="canonical")
        pre_alt = pre
        post_alt = [[_trash_instrument(r[0].dim_in, d_bar_out, len(r[0])) for _ in range(n_b)] for r in post]
        return SupermapSpec(theory, pre, post, pre_alt, post_alt, q=1.0, note="canonical")
    if theory in ("sep", "smip"):
        pre, post = [], []
        for t in target:
            pre.append(selector(_gamma0(d_h, d_bar_in), n_in))
            reader = Instrument([discard_first(d_k, br) for br in t.branches], validate=False)
            post.append([reader] * n_b)
        return SupermapSpec(theory, pre, post, note="canonical")
    if theory == "ti":
        if joint is None:
            v = classify.is_traditionally_compatible(list(target))
            if not v.member:
                raise ValueError("target set is not certified traditionally compatible")
            joint = v.certificate["joint"]
        keys = sorted(joint)
        f = _gamma0(d_h, d_h)
        kin = Instrument([discard_first(d_k, CpMap(joint[x], d_h, d_bar_out, validate=False)) for x in keys], validate=False)
        n_j, n_c = len(target), len(target[0])
        p = np.zeros((n_j, len(keys), n_in, n_b, n_c))
        for j in range(n_j):
            for l, x in enumerate(keys):
                p[j, l, :, :, x[j]] = 1.0
        qt = np.full((n_j, len(keys), n_in), 1.0 / n_in)
        return SupermapSpec(theory, tables={"p": p, "q": qt}, channels={"F": f, "K": kin}, note="canonical")
    raise ValueError(f"unknown theory {theory!r}")


def _flagged_joint(target: InstrumentSet, d_h: int, joint: dict[tuple[int, ...], np.ndarray] | None) -> dict[tuple[int, ...], np.ndarray]:
    """Parallel joint of the canonical pi pre-set, built from a joint of the target."""
    if joint is None:
        v = classify.is_parallel_compatible(list(target))
        if not v.member:
            raise ValueError("target set is not certified parallel compatible")
        joint = v.certificate["joint"]
    n = len(target)
    d_in, d_k = target.dim_in, target.dim_out
    counts = [len(t) for t in target]
    keys = sorted(joint)
    flags = sum(np.kron(joint[x], linalg.proj(linalg.kron_all(*[linalg.ket(xi, m) for xi, m in zip(x, counts)]))) for x in keys)
    flag = CpMap(flags, d_in, d_k**n * int(np.prod(counts)), validate=False)
    zeros = linalg.proj(linalg.ket(0, d_h**n))
    full = compose(append_state(zeros, flag.dim_out, first=True), flag)
    # H_1..H_n K_1..K_n Ω_1..Ω_n  →  (H_j K_j Ω_j)_j
    dims = [d_h] * n + [d_k] * n + counts
    perm = [f for j in range(n) for f in (j, n + j, 2 * n + j)]
    choi = linalg.permute_systems(full.choi, [d_in] + dims, [0] + [1 + f for f in perm])
    out = {x: np.zeros_like(choi) for x in itertools.product(*[range(len(t)) for t in target])}
    out[(0,) * n] = choi
    return out


def _trash_instrument(d_in: int, d_out: int, n: int) -> Instrument:
    sigma = np.eye(d_out) / d_out
    br = trace_and_prepare(sigma, d_in).scaled(1.0 / n)
    return Instrument([br] * n, validate=False)


def identity_spec(template: InstrumentSet) -> SupermapSpec:
    """PID wiring that returns its input unchanged."""
    d_h, d_k = template.dim_in, template.dim_out
    n_i, n_a = len(template), len(template[0])
    p = np.zeros((n_i, 1, n_i, n_a, n_a))
    for j in range(n_i):
        for i in range(n_i):
            p[j, 0, i] = np.eye(n_a)
    qt = np.zeros((n_i, 1, n_i))
    for j in range(n_i):
        qt[j, 0, j] = 1.0
    return SupermapSpec("ti", tables={"p": p, "q": qt}, channels={"F": identity_channel(d_h), "K": Instrument([identity_channel(d_k)], validate=False)}, note="identity")


# ---------------------------------------------------------------------------
# harness


def monotonicity_harness(
    theory: str,
    trials: int = 25,
    seed: int = 0x5EED,
    measure: bool = True,
    q_values: Sequence[float] | None = None,
    family: classify.WitnessFamily | None = None,
) -> dict[str, Any]:
    """Random inputs and specs; records D̂ and the theory's measure before and after.

    D̂ is the max-over-index instrument distance between two input sets; the
    measure is the diamond-distance measure against the theory's free set.
    """
    if theory not in THEORIES:
        raise ValueError(f"unknown theory {theory!r}; expected one of {THEORIES}")
    free = FreeSetSpec(FREE_TAGS[theory], family if FREE_TAGS[theory].endswith("Witness") else None)
    records = []
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        a = random_input_set(theory, rng)
        b = random_input_set(theory, rng)
        spec = random_spec(theory, rng, a)
        if q_values:
            spec.q = float(q_values[t % len(q_values)])
        va = apply_transform(theory, spec, a, validate=False)
        vb = apply_transform(theory, spec, b, validate=False)
        rec: dict[str, Any] = {"trial": t, "q": spec.q, "note": spec.note}
        rec["distance_before"] = set_distance(a, b).value
        rec["distance_after"] = set_distance(va, vb).value
        rec["distance_increase"] = rec["distance_after"] - rec["distance_before"]
        if measure:
            rec["measure_before"] = distance_measure(a, free).value
            rec["measure_after"] = distance_measure(va, free).value
            rec["measure_increase"] = rec["measure_after"] - rec["measure_before"]
        records.append(rec)
    max_d = max(r["distance_increase"] for r in records)
    max_m = max((r["measure_increase"] for r in records), default=float("-inf")) if measure else None
    worst = max(max_d, max_m if max_m is not None else float("-inf"))
    return {
        "theory": theory,
        "free_set": free.tag.value,
        "trials": trials,
        "seed": seed,
        "tolerance": TOL,
        "max_distance_increase": max_d,
        "max_measure_increase": max_m,
        "violations": sum(1 for r in records if r["distance_increase"] > TOL or r.get("measure_increase", -1) > TOL),
        "passed": worst <= TOL,
        "records": records,
    }
