"""Resource measures of instrument sets: robustness, weight and diamond-distance measures.

Every measure is a single SDP over the branch Choi matrices of a free
competitor. A free set is described by :class:`FreeSetSpec`; the cone of
"scaled free sets" (free sets multiplied by ``s >= 0``) is what the
programs optimize over, so that robustness and weight stay linear.
"""

from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from . import linalg, sdp
from .classify import WitnessFamily, default_witness_family
from .qobjects import Instrument, InstrumentSet, as_set, enlarge_instrument


class FreeTag(str, Enum):
    TP = "TP"
    EB_PPT = "EB_PPT"
    WEB_PPT = "WEB_PPT"
    TC = "TC"
    PC = "PC"
    IB_WITNESS = "IB_Witness"
    WIB_WITNESS = "WIB_Witness"


_ALIASES = {
    "tp": FreeTag.TP, "ip": FreeTag.TP,
    "eb": FreeTag.EB_PPT, "ep": FreeTag.EB_PPT,
    "web": FreeTag.WEB_PPT, "sep": FreeTag.WEB_PPT,
    "tc": FreeTag.TC, "ti": FreeTag.TC,
    "pc": FreeTag.PC, "pi": FreeTag.PC,
    "ib": FreeTag.IB_WITNESS, "mip": FreeTag.IB_WITNESS,
    "wib": FreeTag.WIB_WITNESS, "smip": FreeTag.WIB_WITNESS,
}


class UnsupportedFreeSet(ValueError):
    pass


@dataclass
class FreeSetSpec:
    tag: FreeTag
    family: WitnessFamily | None = None
    note: str = ""

    def __post_init__(self) -> None:
        self.tag = FreeTag(self.tag)
        if self.tag in (FreeTag.IB_WITNESS, FreeTag.WIB_WITNESS) and self.family is None:
            self.family = default_witness_family()

    @classmethod
    def parse(cls, name: str, family: WitnessFamily | None = None) -> FreeSetSpec:
        key = name.lower()
        if key in _ALIASES:
            return cls(_ALIASES[key], family)
        return cls(FreeTag(name), family)

    @property
    def witness_based(self) -> bool:
        return self.tag in (FreeTag.IB_WITNESS, FreeTag.WIB_WITNESS)

    def bound_direction(self, dim_in: int, dim_out: int) -> str:
        """Exact, or LowerBound when the encoded set is larger than the true free set."""
        if self.witness_based:
            return "LowerBound"
        if self.tag in (FreeTag.EB_PPT, FreeTag.WEB_PPT) and dim_in * dim_out > 6:
            return "LowerBound"
        return "Exact"


@dataclass
class MeasureResult:
    value: float
    optimizer: list[list[np.ndarray]] | None = None
    bound_direction: str = "Exact"
    diagnostics: dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# scaled free cones


def _joint(m: sdp.Model, targets: Sequence[Sequence[sdp.Affine]], size: int) -> None:
    """Require a joint POVM-like family whose outcome marginals are ``targets``."""
    counts = [len(t) for t in targets]
    parts: dict[tuple[int, int], list[sdp.Affine]] = {}
    for x in itertools.product(*[range(c) for c in counts]):
        g = m.hermitian(size, psd=True)
        for y, k in enumerate(x):
            parts.setdefault((y, k), []).append(g)
    for y, t in enumerate(targets):
        for k, target in enumerate(t):
            m.add_eq(sdp.affine_sum(parts[(y, k)]) - target)


def _heisenberg_terms(branches: Sequence[sdp.Affine], povm_elements: Sequence[np.ndarray], din: int, dout: int) -> list[sdp.Affine]:
    """Transposed elements Φ_a†(B)ᵀ = Tr_out[J_a (I ⊗ Bᵀ)], ``a`` outer."""
    out = []
    for f in branches:
        for e in povm_elements:
            out.append((f @ np.kron(np.eye(din), e.T)).partial_trace([din, dout], 0))
    return out


def _scaled_free_point(m: sdp.Model, spec: FreeSetSpec, shape: list[int], din: int, dout: int, s: sdp.Affine) -> list[list[sdp.Affine]]:
    """Variables for ``s`` times a free set with the given outcome counts."""
    n = din * dout
    eye_in = np.eye(din)
    tag = spec.tag

    def normalize(branches: Sequence[sdp.Affine]) -> None:
        m.add_eq(sdp.affine_sum(branches).partial_trace([din, dout], 0) - s.kron_right(eye_in))

    if tag is FreeTag.TP:
        point = []
        for k in shape:
            taus = [m.hermitian(dout, psd=True) for _ in range(k)]
            m.add_eq(sdp.affine_sum(t.trace() for t in taus) - s)
            point.append([t.kron_left(eye_in) for t in taus])
        return point

    if tag in (FreeTag.TC, FreeTag.PC):
        if tag is FreeTag.TC:
            size, dims = n, [din, dout]
        else:
            dims = [din] + [dout] * len(shape)
            size = int(np.prod(dims))
        groups: dict[tuple[int, int], list[sdp.Affine]] = {}
        every = []
        for x in itertools.product(*[range(k) for k in shape]):
            g = m.hermitian(size, psd=True)
            every.append(g)
            for i, a in enumerate(x):
                part = g if tag is FreeTag.TC or len(shape) == 1 else g.partial_trace(dims, [0, 1 + i])
                groups.setdefault((i, a), []).append(part)
        m.add_eq(sdp.affine_sum(every).partial_trace(dims, 0) - s.kron_right(eye_in))
        return [[sdp.affine_sum(groups[(i, a)]) for a in range(k)] for i, k in enumerate(shape)]

    point = []
    for k in shape:
        branches = [m.hermitian(n, psd=True) for _ in range(k)]
        normalize(branches)
        if tag is FreeTag.EB_PPT:
            for b in branches:
                m.add_psd(b.partial_transpose([din, dout], 1))
        elif tag is FreeTag.WEB_PPT:
            m.add_psd(sdp.affine_sum(branches).partial_transpose([din, dout], 1))
        elif spec.witness_based:
            assert spec.family is not None
            if spec.family.dim != dout:
                raise ValueError("witness family does not act on the output space")
            pool = branches if tag is FreeTag.IB_WITNESS else [sdp.affine_sum(branches)]
            for mset in spec.family.sets:
                _joint(m, [_heisenberg_terms(pool, p.elements, din, dout) for p in mset], din)
        point.append(branches)
    return point


def _prepare(items: Any) -> tuple[InstrumentSet, int, int, list[int]]:
    s = as_set(items)
    din, dout = s[0].dim_in, s[0].dim_out
    for inst in s:
        if (inst.dim_in, inst.dim_out) != (din, dout):
            raise ValueError("instruments in the set have mismatched dimensions")
    return s, din, dout, [len(i) for i in s]


def _values(sol: sdp.ModelSolution, point: list[list[sdp.Affine]]) -> list[list[np.ndarray]]:
    return [[linalg.hermitian_part(sol(f)) for f in row] for row in point]


def _diag(sol: sdp.ModelSolution) -> dict[str, Any]:
    return {"solver_status": sol.status, "gap": sol.sol.gap, "iterations": sol.sol.iterations}


def _check_status(sol: sdp.ModelSolution, what: str) -> None:
    if sol.status != sdp.OPTIMAL:
        raise RuntimeError(f"{what} SDP ended with status {sol.status}")


# ---------------------------------------------------------------------------
# measures


def robustness(items: Any, free: FreeSetSpec, dump: str | None = None) -> MeasureResult:
    """min r such that (J + r·noise)/(1+r) is free for some noise instrument set."""
    if free.witness_based:
        raise UnsupportedFreeSet(f"robustness against {free.tag.value} is not provided")
    s_set, din, dout, shape = _prepare(items)
    m = sdp.Model()
    s = m.real()
    point = _scaled_free_point(m, free, shape, din, dout, s)
    for inst, row in zip(s_set, point):
        for f, b in zip(row, inst.branches):
            m.add_psd(f - b.choi)
    m.minimize(s - 1.0)
    sol = m.solve(dump=dump)
    _check_status(sol, "robustness")
    scale = sol.scalar(s)
    opt = [[f / scale for f in row] for row in _values(sol, point)]
    return MeasureResult(max(sol.value, 0.0), opt, free.bound_direction(din, dout), _diag(sol))


def weight(items: Any, free: FreeSetSpec, dump: str | None = None) -> MeasureResult:
    """min r with J = (free + r·noise)/(1+r); reported as r = w/(1−w)."""
    if free.witness_based:
        raise UnsupportedFreeSet(f"weight against {free.tag.value} is not provided")
    s_set, din, dout, shape = _prepare(items)
    m = sdp.Model()
    s = m.real(nonneg=True)
    m.add_le(s, 1.0)
    point = _scaled_free_point(m, free, shape, din, dout, s)
    for inst, row in zip(s_set, point):
        for f, b in zip(row, inst.branches):
            m.add_psd(b.choi - f)
    m.maximize(s)
    sol = m.solve(dump=dump)
    _check_status(sol, "weight")
    keep = min(max(sol.value, 0.0), 1.0)
    w = 1.0 - keep
    diag = _diag(sol) | {"free_fraction": keep, "weight_fraction": w}
    value = float("inf") if keep <= 1e-6 else max(w / keep, 0.0)
    opt = [[f / keep for f in row] for row in _values(sol, point)] if keep > 1e-6 else None
    return MeasureResult(value, opt, free.bound_direction(din, dout), diag)


def distance_measure(items: Any, free: FreeSetSpec, dump: str | None = None) -> MeasureResult:
    """min over free sets of the max-over-index instrument diamond distance.

    Uses the min form of the diamond norm, block diagonal in the flag:
    D(I, F) = 2 min ‖Σ_a Tr_out Z_a‖∞ with Z_a ⪰ J_a − F_a, Z_a ⪰ 0.
    """
    s_set, din, dout, shape = _prepare(items)
    m = sdp.Model()
    one = sdp.Affine(np.ones((1, 1)))
    point = _scaled_free_point(m, free, shape, din, dout, one)
    t = m.real(nonneg=True)
    for inst, row in zip(s_set, point):
        zs = []
        for f, b in zip(row, inst.branches):
            z = m.hermitian(din * dout, psd=True)
            m.add_psd(z - (b.choi - f))
            zs.append(z)
        m.add_psd(t.kron_right(np.eye(din) / 2) - sdp.affine_sum(zs).partial_trace([din, dout], 0))
    m.minimize(t)
    sol = m.solve(dump=dump)
    _check_status(sol, "distance measure")
    value = float(np.clip(sol.value, 0.0, 2.0))
    return MeasureResult(value, _values(sol, point), free.bound_direction(din, dout), _diag(sol))


def extended_measure(items: Any, free: FreeSetSpec, max_dim_b: int = 2) -> MeasureResult:
    """Minimum of the distance measure over trivial enlargements with dim(H_B) ≤ max_dim_b.

    The true quantity is an infimum over all H_B, so the returned value is
    an upper bound on it at the stated truncation level.
    """
    if max_dim_b < 1:
        raise ValueError("max_dim_b must be positive")
    s_set = as_set(items)
    per = []
    best: MeasureResult | None = None
    for db in range(1, max_dim_b + 1):
        enlarged = InstrumentSet([enlarge_instrument(i, db) for i in s_set])
        r = distance_measure(enlarged, free)
        per.append(r.value)
        if best is None or r.value < best.value:
            best = r
    assert best is not None
    diag = {"per_dim_b": per, "truncation": max_dim_b, "inf_bound": "UpperBound"}
    return MeasureResult(best.value, best.optimizer, best.bound_direction, diag)


# ---------------------------------------------------------------------------
# reports


HIERARCHY_CHAINS = (("IP", "EP", "SEP", "SMIP"), ("IP", "EP", "MIP", "SMIP"))
_HIERARCHY_TAGS = {"IP": FreeTag.TP, "EP": FreeTag.EB_PPT, "SEP": FreeTag.WEB_PPT, "MIP": FreeTag.IB_WITNESS, "SMIP": FreeTag.WIB_WITNESS}


def hierarchy_report(inst: Instrument, family: WitnessFamily | None = None, slack: float = 1e-6, include_mip: bool = True) -> dict[str, Any]:
    """Distance measures for the nested free sets and the two inequality chains."""
    family = family or default_witness_family()
    exact = inst.dim_in * inst.dim_out <= 6
    values: dict[str, float] = {}
    directions: dict[str, str] = {}
    for name, tag in _HIERARCHY_TAGS.items():
        if name == "MIP" and not include_mip:
            continue
        fam = family if tag in (FreeTag.IB_WITNESS, FreeTag.WIB_WITNESS) else None
        spec = FreeSetSpec(tag, fam)
        if spec.witness_based and family.dim != inst.dim_out:
            continue
        r = distance_measure(inst, spec)
        values[name] = r.value
        directions[name] = r.bound_direction
    chains = []
    for chain in HIERARCHY_CHAINS:
        names = [c for c in chain if c in values]
        gaps = [values[a] - values[b] for a, b in zip(names, names[1:])]
        chains.append({"chain": names, "gaps": gaps, "holds": all(g >= -slack for g in gaps)})
    return {
        "values": values,
        "bound_direction": directions,
        "regime": "exact" if exact else "relaxed",
        "chains": chains,
        "holds": all(c["holds"] for c in chains),
    }


def bound_chain(items: Any, free: FreeSetSpec, max_dim_b: int = 2) -> dict[str, Any]:
    """Extended measure ≤ distance measure ≤ min{2R/(1+R), 2W/(1+W)}."""
    ext = extended_measure(items, free, max_dim_b).value
    dist = distance_measure(items, free).value
    rob = robustness(items, free).value
    wt = weight(items, free).value
    cap_r = 2 * rob / (1 + rob)
    cap_w = 2.0 if np.isinf(wt) else 2 * wt / (1 + wt)
    return {
        "extended": ext,
        "distance": dist,
        "robustness": rob,
        "weight": wt,
        "robustness_cap": cap_r,
        "weight_cap": cap_w,
        "slack": min(dist - ext, min(cap_r, cap_w) - dist),
    }
