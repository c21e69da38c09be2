"""Diamond-norm distances for channels, measurements, instruments and sets.

For trace-preserving Φ, Ψ with Choi difference ``J = J(Φ) − J(Ψ)``

    ‖Φ − Ψ‖◇ = 2 max { ⟨J, W⟩ : 0 ⪯ W ⪯ ρ ⊗ I_out, Tr ρ = 1 }
             = 2 min { ‖Tr_out Z‖∞ : Z ⪰ J, Z ⪰ 0 }.

The max form is solved here (its optimal ρ is the achiever, the input
state being (√ρ ⊗ I)|Ω⟩). When the difference is block diagonal in a
classical flag, as for instruments and measure-prepare channels, ``W``
is restricted to the same blocks without loss.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import linalg, sdp
from .qobjects import CpMap, Instrument, InstrumentSet, Povm, as_set, random_pure_state


@dataclass
class DistanceResult:
    value: float
    method: str = "SDP"
    achiever: dict[str, Any] = field(default_factory=dict)


def _diamond_blocks(blocks: Sequence[np.ndarray], dim_in: int, dim_out: int, dump: str | None = None) -> tuple[float, np.ndarray, sdp.ModelSolution]:
    m = sdp.Model()
    rho = m.hermitian(dim_in, psd=True)
    m.add_eq(rho.trace(), 1.0)
    cap = rho.kron_right(np.eye(dim_out))
    terms = []
    for d in blocks:
        if np.max(np.abs(d), initial=0.0) == 0.0:
            continue
        w = m.hermitian(dim_in * dim_out, psd=True)
        m.add_psd(cap - w)
        terms.append((w @ d).trace())
    if not terms:
        return 0.0, np.eye(dim_in) / dim_in, None  # type: ignore[return-value]
    m.maximize(2 * sdp.affine_sum(terms))
    sol = m.solve(dump=dump)
    if sol.status != sdp.OPTIMAL:
        raise RuntimeError(f"diamond-norm SDP ended with status {sol.status}")
    value = float(np.clip(sol.value, 0.0, 2.0))
    return value, sol(rho), sol


def _check_channels(a: CpMap, b: CpMap) -> None:
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        raise ValueError("channels have different dimensions")
    for m in (a, b):
        if not m.is_trace_preserving(1e-8):
            raise ValueError("diamond distance needs trace-preserving maps")


def diamond_distance(a: CpMap, b: CpMap, dump: str | None = None) -> DistanceResult:
    """‖a − b‖◇ (range [0, 2])."""
    _check_channels(a, b)
    value, rho, sol = _diamond_blocks([a.choi - b.choi], a.dim_in, a.dim_out, dump)
    iters = sol.sol.iterations if sol is not None else 0
    return DistanceResult(value, "SDP", {"input_marginal": rho, "iterations": iters})


def _output_on_ancilla(delta: np.ndarray, dim_in: int, dim_out: int, psi: np.ndarray) -> np.ndarray:
    """(I_anc ⊗ Δ)(|ψ⟩⟨ψ|) with ψ given as an ``anc × dim_in`` coefficient matrix."""
    j4 = delta.reshape(dim_in, dim_out, dim_in, dim_out)
    out = np.einsum("ri,sj,ikjl->rksl", psi, psi.conj(), j4)
    n = psi.shape[0] * dim_out
    return out.reshape(n, n)


def _seesaw(delta: np.ndarray, dim_in: int, dim_out: int, psi: np.ndarray, steps: int) -> tuple[float, np.ndarray]:
    """Monotone ascent on ‖(I⊗Δ)(ψψ†)‖₁ by alternating sign matrix and top eigenvector."""
    j4 = delta.reshape(dim_in, dim_out, dim_in, dim_out)
    anc = psi.shape[0]
    best = linalg.trace_norm(_output_on_ancilla(delta, dim_in, dim_out, psi))
    for _ in range(steps):
        out = _output_on_ancilla(delta, dim_in, dim_out, psi)
        w, v = np.linalg.eigh(linalg.hermitian_part(out))
        s = (v * np.sign(w)) @ v.conj().T
        s4 = s.reshape(anc, dim_out, anc, dim_out)
        # ψ† M ψ = Tr[S (I⊗Δ)(ψψ†)]
        m = np.einsum("rksl,ikjl->risj", s4, j4).reshape(anc * dim_in, anc * dim_in)
        ev, evec = np.linalg.eigh(linalg.hermitian_part(m))
        cand = evec[:, -1].reshape(anc, dim_in)
        val = linalg.trace_norm(_output_on_ancilla(delta, dim_in, dim_out, cand))
        if val <= best + 1e-13:
            break
        best, psi = val, cand
    return best, psi


def diamond_lower_bound(a: CpMap, b: CpMap, samples: int = 200, seed: int = 0, refine_steps: int = 30) -> DistanceResult:
    """Best ‖(I⊗(a−b))(ψψ†)‖₁ over sampled pure inputs.

    Candidates are the maximally entangled state plus ``samples`` Haar-random
    states on ``C^d ⊗ C^d``; the best few are improved by a see-saw ascent.
    Every value reported is attained by an explicit state, so the result is
    a lower bound on the diamond norm.
    """
    _check_channels(a, b)
    d, k = a.dim_in, a.dim_out
    delta = a.choi - b.choi
    rng = np.random.default_rng(seed)
    cands = [np.eye(d, dtype=complex) / np.sqrt(d)]
    cands += [random_pure_state(d * d, rng).reshape(d, d) for _ in range(samples)]
    scored = sorted(((linalg.trace_norm(_output_on_ancilla(delta, d, k, p)), i) for i, p in enumerate(cands)), reverse=True)
    best, best_psi = scored[0][0], cands[scored[0][1]]
    if refine_steps:
        for _, i in scored[: min(5, len(scored))]:
            val, psi = _seesaw(delta, d, k, cands[i], refine_steps)
            if val > best:
                best, best_psi = val, psi
    return DistanceResult(float(best), "OracleLowerBound", {"state": best_psi.reshape(-1), "max_entangled_value": next(v for v, i in scored if i == 0)})


def measurement_distance(m: Povm, n: Povm) -> DistanceResult:
    """Diamond distance of the measure-prepare channels Γ_M, Γ_N."""
    if m.dim != n.dim or len(m) != len(n):
        raise ValueError("measurements differ in dimension or outcome count")
    blocks = [(x - y).T for x, y in zip(m.elements, n.elements)]
    value, rho, _ = _diamond_blocks(blocks, m.dim, 1)
    return DistanceResult(value, "SDP", {"input_marginal": rho})


def instrument_distance(a: Instrument, b: Instrument) -> DistanceResult:
    """Diamond distance of the flag channels Γ̂_a, Γ̂_b."""
    if (a.dim_in, a.dim_out, len(a)) != (b.dim_in, b.dim_out, len(b)):
        raise ValueError("instruments differ in dimensions or outcome count")
    blocks = [x.choi - y.choi for x, y in zip(a.branches, b.branches)]
    value, rho, _ = _diamond_blocks(blocks, a.dim_in, a.dim_out)
    return DistanceResult(value, "SDP", {"input_marginal": rho})


def set_distance(a: Any, b: Any) -> DistanceResult:
    """Max over the index of pairwise distances.

    Works for instrument sets, and for plain sequences of channels or of
    POVMs (the set distances of channels and of measurements).
    """
    if isinstance(a, (list, tuple)) and a and isinstance(a[0], Povm):
        pairs = list(zip(a, b, strict=True)) if len(a) == len(b) else None
        if pairs is None:
            raise ValueError("measurement sets are not aligned")
        vals = [measurement_distance(x, y).value for x, y in pairs]
    elif isinstance(a, (list, tuple)) and a and isinstance(a[0], CpMap):
        if len(a) != len(b):
            raise ValueError("channel sets are not aligned")
        vals = [diamond_distance(x, y).value for x, y in zip(a, b)]
    else:
        sa, sb = as_set(a), as_set(b)
        if not sa.aligned_with(sb):
            raise ValueError("instrument sets are not aligned")
        vals = [instrument_distance(x, y).value for x, y in zip(sa, sb)]
    i = int(np.argmax(vals))
    return DistanceResult(float(vals[i]), "SDP", {"index": i, "pairwise": vals})


def instrument_set_distance(a: InstrumentSet, b: InstrumentSet) -> float:
    return set_distance(a, b).value
