"""Small dense semidefinite programs.

Two layers live here:

* ``SdpProblem`` / ``solve`` / ``feasibility``: a real conic program in
  the standard form ``min c·x  s.t.  A x + s = b,  s ∈ K`` where ``K`` is
  a product of zero, nonnegative and PSD cones (PSD slices stored as the
  column-major upper triangle with off-diagonals scaled by √2). The
  interior-point work is delegated to Clarabel; everything around it
  (status mapping, duality gap, certificate checks) is ours.
* ``Model`` / ``Affine``: a thin modeling layer for complex Hermitian
  matrix variables. Complex PSD constraints are embedded as real symmetric
  matrices via ``[[Re, -Im], [Im, Re]]``.
"""

from __future__ import annotations

import json
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

import clarabel
import numpy as np
import scipy.sparse as sp

from . import linalg

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MAXITER = "MaxIter"

DEFAULTS = {
    "max_iter": 200,
    "tol_gap_abs": 1e-9,
    "tol_gap_rel": 1e-9,
    "tol_feas": 1e-9,
    "gap_accept": 1e-7,
    "certificate_tol": 1e-8,
}


def configure(**kwargs: float) -> None:
    """Override solver defaults (used by the CLI config file)."""
    for k, v in kwargs.items():
        if k not in DEFAULTS:
            raise KeyError(f"unknown solver option {k!r}")
        DEFAULTS[k] = type(DEFAULTS[k])(v)


# ---------------------------------------------------------------------------
# standard form


@dataclass
class SdpProblem:
    """``min c·x + offset`` subject to ``b - A x`` in the cone product.

    ``cones`` is a list of ``(kind, size)`` with kind in
    ``{"zero", "nonneg", "psd"}``; for ``psd`` the size is the matrix
    order and the slice length is ``size(size+1)/2``.
    """

    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    cones: list[tuple[str, int]]
    offset: float = 0.0
    sense: str = "min"

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.A = sp.csc_matrix(self.A)
        if self.A.shape != (self.b.size, self.c.size):
            raise ValueError(f"A has shape {self.A.shape}, expected {(self.b.size, self.c.size)}")
        if sum(cone_length(k, n) for k, n in self.cones) != self.b.size:
            raise ValueError("cone sizes do not add up to the number of rows")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def to_json(self) -> dict[str, Any]:
        a = self.A.tocoo()
        return {
            "format": "sdp.v1",
            "sense": self.sense,
            "n_vars": int(self.n_vars),
            "c": self.c.tolist(),
            "offset": float(self.offset),
            "cones": [{"kind": k, "size": int(n)} for k, n in self.cones],
            "A": {"rows": a.row.tolist(), "cols": a.col.tolist(), "vals": a.data.tolist(), "shape": list(a.shape)},
            "b": self.b.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> SdpProblem:
        if data.get("format") != "sdp.v1":
            raise ValueError("not an sdp.v1 document")
        a = data["A"]
        A = sp.coo_matrix((a["vals"], (a["rows"], a["cols"])), shape=tuple(a["shape"]))
        return cls(
            c=np.array(data["c"], dtype=float),
            A=A.tocsc(),
            b=np.array(data["b"], dtype=float),
            cones=[(d["kind"], int(d["size"])) for d in data["cones"]],
            offset=float(data["offset"]),
            sense=data["sense"],
        )

    def dump(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def cone_length(kind: str, size: int) -> int:
    return size * (size + 1) // 2 if kind == "psd" else size


@dataclass
class InfeasibilityCertificate:
    """A dual improving ray ``z``: ``Aᵀz ≈ 0``, ``z ∈ K*``, ``bᵀz < 0``."""

    z: np.ndarray
    margin: float
    residual: float
    cone_violation: float
    valid: bool


@dataclass
class SdpSolution:
    status: str
    primal_value: float
    dual_value: float
    gap: float
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    iterations: int
    solver_status: str
    certificate: InfeasibilityCertificate | None = None

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _settings(**overrides: Any) -> clarabel.DefaultSettings:
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.max_iter = int(DEFAULTS["max_iter"])
    s.tol_gap_abs = DEFAULTS["tol_gap_abs"]
    s.tol_gap_rel = DEFAULTS["tol_gap_rel"]
    s.tol_feas = DEFAULTS["tol_feas"]
    s.chordal_decomposition_enable = False
    s.max_threads = 1
    for k, v in overrides.items():
        setattr(s, k, v)
    return s


def _clarabel_cones(cones: Sequence[tuple[str, int]]) -> list:
    out = []
    for kind, n in cones:
        if kind == "zero":
            out.append(clarabel.ZeroConeT(n))
        elif kind == "nonneg":
            out.append(clarabel.NonnegativeConeT(n))
        elif kind == "psd":
            out.append(clarabel.PSDTriangleConeT(n))
        else:
            raise ValueError(f"unknown cone {kind!r}")
    return out


def svec_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(row, col) of the column-major upper triangle."""
    r, c = np.tril_indices(n)
    return c, r


def svec(m: np.ndarray) -> np.ndarray:
    """Scaled vectorization matching the PSD triangle cone (batch aware)."""
    n = m.shape[-1]
    i, j = svec_indices(n)
    v = m[..., i, j]
    scale = np.where(i == j, 1.0, np.sqrt(2.0))
    return v * scale


def smat(v: np.ndarray, n: int) -> np.ndarray:
    i, j = svec_indices(n)
    m = np.zeros((n, n))
    scale = np.where(i == j, 1.0, 1 / np.sqrt(2.0))
    m[i, j] = v * scale
    m[j, i] = v * scale
    return m


def verify_infeasibility(p: SdpProblem, z: np.ndarray, tol: float | None = None) -> InfeasibilityCertificate:
    """Check a Farkas ray for ``{x : b - A x ∈ K}`` independently of the solver."""
    tol = DEFAULTS["certificate_tol"] if tol is None else tol
    z = np.asarray(z, dtype=float)
    nz = float(np.linalg.norm(z))
    if nz == 0.0:
        return InfeasibilityCertificate(z, 0.0, np.inf, np.inf, False)
    zn = z / nz
    residual = float(np.max(np.abs(p.A.T @ zn), initial=0.0))
    violation = 0.0
    pos = 0
    for kind, n in p.cones:
        seg = zn[pos : pos + cone_length(kind, n)]
        pos += cone_length(kind, n)
        if kind == "nonneg":
            violation = max(violation, float(-np.min(seg, initial=0.0)))
        elif kind == "psd":
            violation = max(violation, -linalg.min_eig(smat(seg, n)))
    margin = float(-(p.b @ zn))
    valid = margin >= tol and residual <= tol and violation <= tol
    return InfeasibilityCertificate(zn, margin, residual, violation, bool(valid))


# tried in order while the duality gap misses the acceptance threshold
_RETRY_LADDER: tuple[dict[str, Any], ...] = (
    {},
    {"iterative_refinement_reltol": 1e-14, "iterative_refinement_abstol": 1e-14, "iterative_refinement_max_iter": 50},
    {"static_regularization_constant": 1e-7, "max_step_fraction": 0.9},
)


def solve(p: SdpProblem, **settings: Any) -> SdpSolution:
    """Solve a standard-form problem; deterministic for identical input."""
    n = p.n_vars
    P = sp.csc_matrix((n, n))
    sign = 1.0 if p.sense == "min" else -1.0
    raw = None
    for extra in _RETRY_LADDER:
        solver = clarabel.DefaultSolver(P, sign * p.c, p.A, p.b, _clarabel_cones(p.cones), _settings(**(extra | settings)))
        raw = solver.solve()
        st = str(raw.status)
        if st not in ("Solved", "AlmostSolved", "MaxIterations", "InsufficientProgress", "NumericalError"):
            break
        pv = sign * float(raw.obj_val) + p.offset
        gap = abs(raw.obj_val - raw.obj_val_dual)
        if st in ("Solved", "AlmostSolved") and gap <= DEFAULTS["gap_accept"] * (1 + abs(pv)):
            break
    st = str(raw.status)
    x = np.array(raw.x, dtype=float)
    s = np.array(raw.s, dtype=float)
    z = np.array(raw.z, dtype=float)
    pv = sign * float(raw.obj_val) + p.offset
    dv = sign * float(raw.obj_val_dual) + p.offset
    gap = abs(pv - dv)
    cert = None
    if st in ("Solved", "AlmostSolved"):
        status = OPTIMAL if gap <= DEFAULTS["gap_accept"] * (1 + abs(pv)) else MAXITER
    elif st in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        cert = verify_infeasibility(p, z)
        status = INFEASIBLE if cert.valid else MAXITER
        pv, dv, gap = np.inf * sign, np.inf * sign, np.inf
    elif st in ("DualInfeasible", "AlmostDualInfeasible"):
        status = UNBOUNDED
        pv, dv, gap = -np.inf * sign, -np.inf * sign, np.inf
    else:
        status = MAXITER
    return SdpSolution(status, pv, dv, gap, x, s, z, int(raw.iterations), st, cert)


def feasibility(p: SdpProblem, **settings: Any) -> SdpSolution:
    """Decide feasibility; Infeasible results carry a checked certificate."""
    if np.any(p.c != 0):
        raise ValueError("feasibility problems must have a zero objective")
    return solve(p, **settings)


# ---------------------------------------------------------------------------
# modeling layer


def _bkron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product over the last two axes with broadcast batch axes."""
    a = np.asarray(a)
    b = np.asarray(b)
    out = a[..., :, None, :, None] * b[..., None, :, None, :]
    sh = out.shape
    return out.reshape(*sh[:-4], sh[-4] * sh[-3], sh[-2] * sh[-1])


class Affine:
    """Complex matrix-valued affine function of the model's real variables.

    ``const`` has shape ``(r, c)``; ``terms`` maps a variable block id to a
    coefficient tensor of shape ``(p, r, c)`` where ``p`` is the number of
    real scalars in that block.
    """

    __array_ufunc__ = None

    def __init__(self, const: np.ndarray, terms: dict[int, np.ndarray] | None = None):
        self.const = np.asarray(const, dtype=complex)
        if self.const.ndim == 0:
            self.const = self.const.reshape(1, 1)
        self.terms = terms or {}

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    @staticmethod
    def lift(x: Any) -> Affine:
        if isinstance(x, Affine):
            return x
        return Affine(np.asarray(x, dtype=complex))

    def apply(self, f: Callable[[np.ndarray], np.ndarray]) -> Affine:
        """Push a linear map (acting on stacks of matrices) through."""
        const = f(self.const[None])[0]
        return Affine(const, {k: f(v) for k, v in self.terms.items()})

    def __add__(self, other: Any) -> Affine:
        other = Affine.lift(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms[k] + v if k in terms else v
        return Affine(self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self) -> Affine:
        return Affine(-self.const, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other: Any) -> Affine:
        return self + (-Affine.lift(other))

    def __rsub__(self, other: Any) -> Affine:
        return Affine.lift(other) + (-self)

    def __mul__(self, s: Any) -> Affine:
        if isinstance(s, Affine):
            raise TypeError("products of affine expressions are not affine")
        s = complex(s) if np.ndim(s) == 0 else s
        if np.ndim(s) != 0:
            raise TypeError("use @ for matrix products")
        return Affine(self.const * s, {k: v * s for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, s: float) -> Affine:
        return self * (1.0 / s)

    def __matmul__(self, m: np.ndarray) -> Affine:
        m = np.asarray(m)
        return self.apply(lambda a: a @ m)

    def __rmatmul__(self, m: np.ndarray) -> Affine:
        m = np.asarray(m)
        return self.apply(lambda a: m @ a)

    @property
    def H(self) -> Affine:
        return self.apply(lambda a: np.swapaxes(a.conj(), -1, -2))

    @property
    def T(self) -> Affine:
        return self.apply(lambda a: np.swapaxes(a, -1, -2))

    def trace(self) -> Affine:
        return self.apply(lambda a: np.trace(a, axis1=-2, axis2=-1)[..., None, None])

    def kron_left(self, m: np.ndarray) -> Affine:
        """``m ⊗ self``."""
        return self.apply(lambda a: _bkron(m, a))

    def kron_right(self, m: np.ndarray) -> Affine:
        """``self ⊗ m``."""
        return self.apply(lambda a: _bkron(a, m))

    def partial_trace(self, dims: Sequence[int], keep: Sequence[int] | int) -> Affine:
        return self.apply(lambda a: linalg.partial_trace(a, dims, keep))

    def partial_transpose(self, dims: Sequence[int], system: int | Sequence[int]) -> Affine:
        return self.apply(lambda a: linalg.partial_transpose(a, dims, system))

    def permute(self, dims: Sequence[int], perm: Sequence[int]) -> Affine:
        return self.apply(lambda a: linalg.permute_systems(a, dims, perm))

    def __getitem__(self, idx: tuple[Any, Any]) -> Affine:
        """2-D indexing; integer indices keep their axis."""
        r, c = (slice(i, i + 1) if isinstance(i, (int, np.integer)) else i for i in idx)
        return self.apply(lambda a: a[..., r, c])

    def is_constant(self) -> bool:
        return not any(np.any(v != 0) for v in self.terms.values())


def affine_sum(items: Iterable[Any], shape: tuple[int, int] | None = None) -> Affine:
    out: Affine | None = None
    for it in items:
        out = Affine.lift(it) if out is None else out + it
    if out is None:
        if shape is None:
            raise ValueError("empty sum needs a shape")
        return Affine(np.zeros(shape, dtype=complex))
    return out


def _hermitian_basis(n: int) -> np.ndarray:
    basis = np.zeros((n * n, n, n), dtype=complex)
    k = 0
    for i in range(n):
        basis[k, i, i] = 1.0
        k += 1
    for i in range(n):
        for j in range(i + 1, n):
            basis[k, i, j] = basis[k, j, i] = 1.0
            k += 1
            basis[k, i, j] = 1j
            basis[k, j, i] = -1j
            k += 1
    return basis


@dataclass
class _Block:
    offset: int
    size: int


@dataclass
class Model:
    """Accumulates variables and constraints, then compiles to ``SdpProblem``."""

    blocks: list[_Block] = field(default_factory=list)
    _eq: list[tuple[np.ndarray, dict[int, np.ndarray]]] = field(default_factory=list)
    _le: list[tuple[np.ndarray, dict[int, np.ndarray]]] = field(default_factory=list)
    _psd: list[tuple[int, np.ndarray, dict[int, np.ndarray]]] = field(default_factory=list)
    _objective: Affine | None = None
    _sense: str = "min"

    @property
    def n_vars(self) -> int:
        return sum(b.size for b in self.blocks)

    def _new_block(self, coeffs: np.ndarray) -> Affine:
        bid = len(self.blocks)
        self.blocks.append(_Block(self.n_vars, coeffs.shape[0]))
        return Affine(np.zeros(coeffs.shape[1:], dtype=complex), {bid: coeffs})

    def real(self, nonneg: bool = False) -> Affine:
        """A real scalar variable as a 1×1 expression."""
        v = self._new_block(np.ones((1, 1, 1), dtype=complex))
        if nonneg:
            self.add_le(-v, 0.0)
        return v

    def hermitian(self, n: int, psd: bool = False) -> Affine:
        v = self._new_block(_hermitian_basis(n))
        if psd:
            self.add_psd(v)
        return v

    # constraints ----------------------------------------------------------

    def _rows(self, e: Affine, hermitian: bool) -> tuple[np.ndarray, dict[int, np.ndarray]]:
        r, c = e.shape
        if hermitian and r == c:
            iu = np.triu_indices(r)
            ius = np.triu_indices(r, 1)
            def pick(a: np.ndarray) -> np.ndarray:
                return np.concatenate([a[..., iu[0], iu[1]].real, a[..., ius[0], ius[1]].imag], axis=-1)
        else:
            def pick(a: np.ndarray) -> np.ndarray:
                flat = a.reshape(*a.shape[:-2], r * c)
                return np.concatenate([flat.real, flat.imag], axis=-1)
        const = pick(e.const)
        terms = {k: pick(v) for k, v in e.terms.items()}
        keep = np.abs(const) > 0
        for v in terms.values():
            keep |= np.any(np.abs(v) > 0, axis=0)
        return const[keep], {k: v[:, keep] for k, v in terms.items()}

    def add_eq(self, lhs: Any, rhs: Any = 0.0, hermitian: bool = True) -> None:
        """``lhs == rhs``; square Hermitian equations keep only independent rows."""
        e = Affine.lift(lhs) - rhs
        self._eq.append(self._rows(e, hermitian))

    def add_le(self, lhs: Any, rhs: Any = 0.0) -> None:
        """Entrywise real ``lhs <= rhs``."""
        e = Affine.lift(lhs) - rhs
        r, c = e.shape
        const = e.const.real.reshape(r * c)
        terms = {k: v.real.reshape(v.shape[0], r * c) for k, v in e.terms.items()}
        self._le.append((const, terms))

    def add_psd(self, expr: Any) -> None:
        """Hermitian ``expr ⪰ 0``."""
        e = Affine.lift(expr)
        n = e.shape[0]
        if e.shape != (n, n):
            raise ValueError("PSD constraint needs a square expression")
        if n == 1:
            self.add_le(-e.apply(lambda a: a.real.astype(complex)), 0.0)
            return
        e = e.apply(linalg.hermitian_part)
        complex_valued = np.any(np.abs(e.const.imag) > 0) or any(np.any(np.abs(v.imag) > 0) for v in e.terms.values())
        if complex_valued:
            def emb(a: np.ndarray) -> np.ndarray:
                top = np.concatenate([a.real, -a.imag], axis=-1)
                bot = np.concatenate([a.imag, a.real], axis=-1)
                return np.concatenate([top, bot], axis=-2)
            size = 2 * n
        else:
            def emb(a: np.ndarray) -> np.ndarray:
                return a.real
            size = n
        self._psd.append((size, svec(emb(e.const)), {k: svec(emb(v)) for k, v in e.terms.items()}))

    def minimize(self, expr: Any) -> None:
        self._objective = Affine.lift(expr)
        self._sense = "min"

    def maximize(self, expr: Any) -> None:
        self._objective = Affine.lift(expr)
        self._sense = "max"

    # compilation ----------------------------------------------------------

    def _stack(self, rows: list[tuple[np.ndarray, dict[int, np.ndarray]]], sign: float) -> tuple[sp.csc_matrix, np.ndarray]:
        """Rows of ``const + Σ coeff·x``; returns ``(A, b)`` with ``b - A x = sign·(...)``."""
        n = self.n_vars
        mats, bs = [], []
        for const, terms in rows:
            m = const.size
            if m == 0:
                continue
            data, ri, ci = [], [], []
            for bid, coeff in terms.items():
                blk = self.blocks[bid]
                nzr, nzc = np.nonzero(coeff.T)
                data.append(coeff.T[nzr, nzc])
                ri.append(nzr)
                ci.append(nzc + blk.offset)
            if data:
                A = sp.coo_matrix((np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))), shape=(m, n))
            else:
                A = sp.coo_matrix((m, n))
            mats.append(-sign * A)
            bs.append(sign * const)
        if not mats:
            return sp.csc_matrix((0, n)), np.zeros(0)
        return sp.vstack(mats).tocsc(), np.concatenate(bs)

    def compile(self) -> SdpProblem:
        n = self.n_vars
        cones: list[tuple[str, int]] = []
        As, bs = [], []
        # equality: const + Fx = 0  ->  b - A x = 0 with A = F, b = -const
        A, b = self._stack(self._eq, -1.0)
        if b.size:
            As.append(A)
            bs.append(b)
            cones.append(("zero", b.size))
        # inequality: const + Fx <= 0  ->  s = -(const + Fx) >= 0
        A, b = self._stack(self._le, -1.0)
        if b.size:
            As.append(A)
            bs.append(b)
            cones.append(("nonneg", b.size))
        for size, const, terms in self._psd:
            A, b = self._stack([(const, terms)], 1.0)
            As.append(A)
            bs.append(b)
            cones.append(("psd", size))
        c = np.zeros(n)
        offset = 0.0
        if self._objective is not None:
            obj = self._objective
            if obj.shape != (1, 1):
                raise ValueError("objective must be scalar")
            offset = float(obj.const.real[0, 0])
            for bid, coeff in obj.terms.items():
                blk = self.blocks[bid]
                c[blk.offset : blk.offset + blk.size] += coeff[:, 0, 0].real
        A = sp.vstack(As).tocsc() if As else sp.csc_matrix((0, n))
        b = np.concatenate(bs) if bs else np.zeros(0)
        return SdpProblem(c=c, A=A, b=b, cones=cones, offset=offset, sense=self._sense)

    def solve(self, dump: str | None = None, **settings: Any) -> ModelSolution:
        p = self.compile()
        if dump:
            p.dump(dump)
        return ModelSolution(self, p, solve(p, **settings))


@dataclass
class ModelSolution:
    model: Model
    problem: SdpProblem
    sol: SdpSolution

    @property
    def status(self) -> str:
        return self.sol.status

    @property
    def value(self) -> float:
        return self.sol.primal_value

    def __call__(self, expr: Affine | Any) -> np.ndarray:
        """Numerical value of an expression at the solution."""
        e = Affine.lift(expr)
        out = e.const.copy()
        for bid, coeff in e.terms.items():
            blk = self.model.blocks[bid]
            out = out + np.tensordot(self.sol.x[blk.offset : blk.offset + blk.size], coeff, axes=(0, 0))
        return out

    def scalar(self, expr: Affine) -> float:
        return float(self(expr).real[0, 0])
