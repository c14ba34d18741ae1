"""Entropy-typical sequences, typical projectors and truncated i.i.d. states.

A sequence ``i^n`` is typical when ``|-log2 p(i^n) - n S| <= n delta``.
Projectors are diagonal in the product eigenbasis of ``rho^{(x) n}``, so
they are stored as index sets (explicit mode) or summarized by exact
type-class counting (counting mode, for large ``n``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from statemerge.entropy import shannon_entropy
from statemerge.errors import BadInputError, DimensionCapError, TypicalityError
from statemerge.qlin import PureState, SubsystemLayout, support_dim

DEFAULT_DELTA = 0.1
ENUM_MAX_BITS = 24
MEMBER_TOL = 1e-9
DEFAULT_CAP = 2 ** 16


def _validate_spectrum(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise BadInputError("spectrum must be a nonempty vector")
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise BadInputError(f"spectrum {p} is not a probability vector")
    return np.clip(p, 0.0, None)


def _surprisals(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(p > 0, -np.log2(np.where(p > 0, p, 1.0)), np.inf)


def sequence_surprisals(p, n: int) -> np.ndarray:
    """``-log2 p(i^n)`` for every sequence, in C order (first symbol most significant)."""
    q = _surprisals(_validate_spectrum(p))
    s = np.zeros(1)
    for _ in range(n):
        s = (s[:, None] + q[None, :]).ravel()
    return s


@dataclass(frozen=True, eq=False)
class TypicalProjector:
    """Typical projector of ``rho^{(x) n}`` with rank/weight certificates.

    ``members`` holds the flat product-basis indices of typical sequences in
    explicit mode and is ``None`` in counting mode.
    """

    spectrum: np.ndarray
    n: int
    delta: float
    entropy: float
    rank: int
    weight: float
    max_eigenvalue: float
    min_eigenvalue: float
    members: np.ndarray | None = field(default=None, repr=False)

    @property
    def explicit(self) -> bool:
        return self.members is not None

    def contains(self, seq: Sequence[int]) -> bool:
        """Membership predicate; works in both modes."""
        q = _surprisals(self.spectrum)
        s = float(np.sum(q[list(seq)]))
        return abs(s - self.n * self.entropy) <= self.n * self.delta + MEMBER_TOL

    def mask(self) -> np.ndarray:
        if self.members is None:
            raise BadInputError("mask needs an explicitly enumerated projector")
        m = np.zeros(len(self.spectrum) ** self.n, dtype=bool)
        m[self.members] = True
        return m

    def matrix(self) -> np.ndarray:
        """Dense diagonal projector in the product eigenbasis (small ``n`` only)."""
        return np.diag(self.mask().astype(float))


def _compositions(n: int, k: int):
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def typical_projector(p, n: int, delta: float = DEFAULT_DELTA, mode: str = "auto") -> TypicalProjector:
    """Typical projector for spectrum ``p``.

    ``mode`` is ``"enumerate"`` (explicit index set; requires
    ``n log2 len(p) <= 24``), ``"count"`` (exact rank and weight by type
    classes, no index set) or ``"auto"``.
    """
    p = _validate_spectrum(p)
    if n < 1:
        raise BadInputError("n must be >= 1")
    if delta < 0:
        raise BadInputError("delta must be >= 0")
    d = p.size
    bits = n * math.log2(d) if d > 1 else 0.0
    if mode == "auto":
        mode = "enumerate" if bits <= ENUM_MAX_BITS else "count"
    S = shannon_entropy(p)
    if mode == "enumerate":
        if bits > ENUM_MAX_BITS:
            raise BadInputError(f"n={n} too large for enumeration ({bits:.1f} bits > {ENUM_MAX_BITS})")
        s = sequence_surprisals(p, n)
        members = np.flatnonzero(np.abs(s - n * S) <= n * delta + MEMBER_TOL)
        probs = np.exp2(-s[members])
        return TypicalProjector(p, n, delta, S, int(members.size), float(np.sum(probs)),
                                float(probs.max(initial=0.0)), float(probs.min(initial=np.inf)), members)
    if mode != "count":
        raise BadInputError(f"unknown mode {mode!r}")
    q = _surprisals(p)
    rank, weight, pmax, pmin = 0, 0.0, 0.0, np.inf
    for counts in _compositions(n, d):
        if any(c > 0 and p[i] == 0 for i, c in enumerate(counts)):
            continue
        s = float(sum(c * q[i] for i, c in enumerate(counts) if c))
        if abs(s - n * S) > n * delta + MEMBER_TOL:
            continue
        mult = math.factorial(n)
        for c in counts:
            mult //= math.factorial(c)
        rank += mult
        weight += mult * 2.0 ** (-s)
        pmax, pmin = max(pmax, 2.0 ** (-s)), min(pmin, 2.0 ** (-s))
    return TypicalProjector(p, n, delta, S, rank, weight, pmax, pmin, None)


def certify_c1_to_c6(tp: TypicalProjector, baseline: TypicalProjector | None = None) -> dict[str, bool]:
    """Check the typical-projector properties for ``tp``.

    C1 is certified as a trend: the weight must not fall below that of
    ``baseline`` (default: same spectrum and delta at ``n // 2``).  C2 to C6 are checked
    exactly from the enumerated eigenvalue window and rank; C6 uses the
    exact weight in place of the asymptotic ``1 - exp(-c delta^2 n)``.
    """
    n, S, delta = tp.n, tp.entropy, tp.delta
    if baseline is None:
        baseline = typical_projector(tp.spectrum, max(1, n // 2), delta, mode="enumerate" if tp.explicit else "count")
    rel = 1 + 1e-12
    out = {"C1": tp.weight >= baseline.weight - 1e-12 and 0.0 < tp.weight <= 1 + 1e-12}
    if tp.explicit:
        # Pi rho Pi <= rho: diagonal entries are either kept or zeroed
        s = sequence_surprisals(tp.spectrum, n)
        probs = np.exp2(-s)
        kept = np.where(tp.mask(), probs, 0.0)
        out["C2"] = bool(np.all(kept <= probs))
    else:
        out["C2"] = True
    out["C3"] = tp.rank == 0 or tp.max_eigenvalue <= 2.0 ** (-n * (S - delta)) * rel
    out["C4"] = tp.rank == 0 or tp.min_eigenvalue >= 2.0 ** (-n * (S + delta)) / rel
    out["C5"] = tp.rank <= 2.0 ** (n * (S + delta)) * rel
    out["C6"] = tp.rank >= tp.weight * 2.0 ** (n * (S - delta)) / rel
    return out


def sweep(p, ns: Iterable[int], delta: float = DEFAULT_DELTA) -> list[dict]:
    rows = []
    for n in ns:
        tp = typical_projector(p, n, delta)
        rows.append({"n": n, "delta": delta, "rank": tp.rank, "weight": tp.weight})
    return rows


def write_sweep_csv(rows: list[dict], fh: TextIO | None = None) -> str:
    buf = fh if fh is not None else io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["n", "delta", "rank", "weight"], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({**row, "weight": repr(float(row["weight"]))})
    return buf.getvalue() if fh is None else ""


# --- n-copy states and truncation ---------------------------------------------


def n_copies(psi: PureState, n: int, cap: int = DEFAULT_CAP) -> PureState:
    """``psi^{(x) n}`` with each label's copies fused into one subsystem of dimension ``d^n``."""
    if n < 1:
        raise BadInputError("n must be >= 1")
    total = psi.layout.total_dim ** n
    if total > cap:
        raise DimensionCapError(f"{n} copies need dimension {total} > cap {cap}")
    k = len(psi.layout)
    t = psi.tensor_view()
    full = t
    for _ in range(n - 1):
        full = np.multiply.outer(full, t)
    # axes are (copy0: labels..., copy1: labels..., ...); group by label
    order = [c * k + i for i in range(k) for c in range(n)]
    amps = full.transpose(order).reshape(-1)
    layout = SubsystemLayout(tuple((lab, dim ** n) for lab, dim in psi.layout.parts))
    return PureState(amps / np.linalg.norm(amps), layout)


def _apply_each_copy(t: np.ndarray, u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    for ax in axes:
        t = np.moveaxis(np.tensordot(u, t, axes=([1], [ax])), 0, ax)
    return t


def _product_columns(u: np.ndarray, members: np.ndarray, n: int) -> np.ndarray:
    """Columns ``U^{(x) n} |i^n>`` for the given flat indices."""
    d = u.shape[0]
    digits = np.array(np.unravel_index(members, (d,) * n)) if n > 0 else np.zeros((0, members.size), int)
    cols = u[:, digits[0]]
    for c in range(1, n):
        cols = np.einsum("am,bm->abm", cols, u[:, digits[c]]).reshape(-1, members.size)
    return cols


@dataclass(frozen=True, eq=False)
class TruncatedState:
    omega: PureState
    psi: PureState
    overlap: float
    n: int
    delta: float
    projectors: dict[str, TypicalProjector]
    eigenbases: dict[str, np.ndarray] = field(repr=False)
    trace_distance: float = 0.0
    gentle_bound: float = 0.0

    def typical_basis(self, label: str) -> np.ndarray:
        """Isometry (columns) from the typical subspace of ``label`` into ``label^n``."""
        tp = self.projectors[label]
        return _product_columns(self.eigenbases[label], tp.members, self.n)


def _single_copy_spectrum(psi: PureState, label: str) -> tuple[np.ndarray, np.ndarray]:
    evals, evecs = np.linalg.eigh(psi.reduced([label]).matrix)
    evals = np.clip(evals, 0.0, None)
    return evals / evals.sum(), evecs


def truncate(psi: PureState, n: int, delta: float = DEFAULT_DELTA, cap: int = DEFAULT_CAP,
             min_overlap: float = 0.5) -> TruncatedState:
    """Project ``psi^{(x) n}`` onto the product of its marginal typical subspaces.

    Returns the subnormalized projection ``omega``, its normalization ``psi``
    and the squared norm ``overlap``.  Raises :class:`TypicalityError` when
    the overlap falls below ``min_overlap``.
    """
    labels = psi.layout.labels
    total = psi.layout.total_dim ** n
    if total > cap:
        raise DimensionCapError(f"{n} copies need dimension {total} > cap {cap}")
    full = n_copies(psi, n, cap)
    k = len(labels)
    dims = psi.layout.dims
    t = full.amplitudes.reshape([d for d in dims for _ in range(n)])
    projectors, bases = {}, {}
    for i, lab in enumerate(labels):
        p, u = _single_copy_spectrum(psi, lab)
        projectors[lab], bases[lab] = typical_projector(p, n, delta, mode="enumerate"), u
        axes = list(range(i * n, (i + 1) * n))
        t = _apply_each_copy(t, u.conj().T, axes)
    t = t.reshape([d ** n for d in dims])
    for i, lab in enumerate(labels):
        shape = [1] * k
        shape[i] = dims[i] ** n
        t = t * projectors[lab].mask().reshape(shape)
    t = t.reshape([d for d in dims for _ in range(n)])
    for i, lab in enumerate(labels):
        t = _apply_each_copy(t, bases[lab], list(range(i * n, (i + 1) * n)))
    amps = t.reshape(-1)
    overlap = float(np.vdot(amps, amps).real)
    if overlap < min_overlap:
        raise TypicalityError(f"typical overlap {overlap:.4f} < {min_overlap} at n={n}, delta={delta}")
    omega = PureState(amps, full.layout, subnormalized=True)
    normed = PureState(amps / np.sqrt(overlap), full.layout)
    fid = abs(np.vdot(full.amplitudes, normed.amplitudes)) ** 2
    dist = 2 * math.sqrt(max(0.0, 1 - fid))
    bound = 4 * math.sqrt(max(0.0, 1 - overlap))
    if dist > bound + 1e-9:
        raise TypicalityError(f"truncation distance {dist} exceeds gentle-measurement bound {bound}")
    return TruncatedState(omega, normed, overlap, n, delta, projectors, bases, dist, bound)


@dataclass(frozen=True)
class MergeParameters:
    """Effective one-shot parameters of a truncated state and their certified bounds."""

    d_A: int
    d_R: int
    D: float
    d_A_lower: float
    d_R_upper: float
    D_lower: float

    @property
    def bracketed(self) -> bool:
        rel = 1 + 1e-9
        return self.d_A * rel >= self.d_A_lower and self.d_R <= self.d_R_upper * rel and self.D * rel >= self.D_lower


def merge_parameters(ts: TruncatedState, labels: tuple[str, str, str] | None = None) -> MergeParameters:
    """Support dimensions of ``Psi_A``, ``Psi_R`` and ``D = 1/Tr Psi_B^2`` with their typicality bounds."""
    a, b, r = ts.psi.layout.labels if labels is None else labels
    n, delta = ts.n, ts.delta
    eps = 1.0 - ts.overlap
    rho_a, rho_b, rho_r = (ts.psi.reduced([x]) for x in (a, b, r))
    S = {x: ts.projectors[x].entropy for x in (a, b, r)}
    return MergeParameters(
        d_A=support_dim(rho_a, 1e-10),
        d_R=support_dim(rho_r, 1e-10),
        D=1.0 / rho_b.purity(),
        d_A_lower=(1 - eps) * 2.0 ** (n * (S[a] - delta)),
        d_R_upper=2.0 ** (n * (S[r] + delta)),
        D_lower=(1 - eps) ** 2 * 2.0 ** (n * (S[b] - delta)),
    )


def tail_union_bound(ts: TruncatedState) -> float:
    """``1 - sum of marginal tail weights``; a lower bound on the overlap."""
    return 1.0 - sum(1.0 - tp.weight for tp in ts.projectors.values())
