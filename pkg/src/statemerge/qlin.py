"""Dense linear algebra over labeled multipartite Hilbert spaces.

Every state carries a :class:`SubsystemLayout`, an ordered list of
``(label, dim)`` pairs.  Vectors and matrices are stored in the standard
Kronecker ordering of that list, so ``partial_trace`` and friends are pure
reshape/transpose operations.

All randomized helpers take an explicit :class:`numpy.random.Generator`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from statemerge.errors import BadInputError, LayoutError

NORM_TOL = 1e-12
HERM_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
ISOMETRY_TOL = 1e-10

# eigenvalue checks above this size are skipped in constructors (cost)
_PSD_CHECK_MAX_DIM = 1024
FID_CUT = 1e-13


def _as_labels(labels: str | Iterable[str]) -> tuple[str, ...]:
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered named tensor factors ``((label, dim), ...)``."""

    parts: tuple[tuple[str, int], ...]

    def __post_init__(self):
        parts = tuple((str(lab), int(dim)) for lab, dim in self.parts)
        object.__setattr__(self, "parts", parts)
        labels = [lab for lab, _ in parts]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate subsystem labels in {labels}")
        for lab, dim in parts:
            if dim < 1:
                raise LayoutError(f"subsystem {lab!r} has dimension {dim} < 1")

    @classmethod
    def of(cls, *parts: tuple[str, int]) -> "SubsystemLayout":
        return cls(tuple(parts))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.parts)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.parts)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.parts else 1

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def __len__(self) -> int:
        return len(self.parts)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown subsystem label {label!r}; have {self.labels}") from None

    def dim_of(self, labels: str | Iterable[str]) -> int:
        return int(np.prod([self.parts[self.index(lab)][1] for lab in _as_labels(labels)], dtype=np.int64))

    def check_labels(self, labels: Iterable[str]) -> tuple[str, ...]:
        labels = _as_labels(labels)
        for lab in labels:
            self.index(lab)
        if len(set(labels)) != len(labels):
            raise LayoutError(f"repeated labels in {labels}")
        return labels

    def complement(self, labels: Iterable[str]) -> tuple[str, ...]:
        labels = set(self.check_labels(labels))
        return tuple(lab for lab in self.labels if lab not in labels)

    def select(self, labels: Iterable[str]) -> "SubsystemLayout":
        """Sub-layout with ``labels`` in the order given."""
        labels = self.check_labels(labels)
        return SubsystemLayout(tuple(self.parts[self.index(lab)] for lab in labels))

    def concat(self, other: "SubsystemLayout") -> "SubsystemLayout":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LayoutError(f"label collision: {sorted(clash)}")
        return SubsystemLayout(self.parts + other.parts)

    def rename(self, mapping: dict[str, str]) -> "SubsystemLayout":
        for lab in mapping:
            self.index(lab)
        return SubsystemLayout(tuple((mapping.get(lab, lab), dim) for lab, dim in self.parts))


def _layout(layout: SubsystemLayout | Sequence[tuple[str, int]]) -> SubsystemLayout:
    if isinstance(layout, SubsystemLayout):
        return layout
    return SubsystemLayout(tuple(layout))


@dataclass(frozen=True, eq=False)
class PureState:
    """State vector on a labeled space.

    ``subnormalized=True`` admits vectors with norm in ``(0, 1]``; this is
    how projected vectors such as a typicality-truncated state are carried.
    """

    amplitudes: np.ndarray
    layout: SubsystemLayout
    subnormalized: bool = False

    def __post_init__(self):
        layout = _layout(self.layout)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        amps.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amplitudes", amps)
        if amps.size != layout.total_dim:
            raise LayoutError(f"vector length {amps.size} != layout dimension {layout.total_dim}")
        norm = np.linalg.norm(amps)
        if self.subnormalized:
            if not 0.0 < norm <= 1.0 + NORM_TOL:
                raise BadInputError(f"subnormalized vector has norm {norm}")
        elif abs(norm - 1.0) > NORM_TOL:
            raise BadInputError(f"state vector has norm {norm}, expected 1")

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> "PureState":
        return PureState(self.amplitudes / np.sqrt(self.norm_sq), self.layout)

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def matrix(self, rows: Iterable[str]) -> np.ndarray:
        """Amplitudes reshaped to a ``(rows, rest)`` matrix."""
        rows = self.layout.check_labels(rows)
        rest = self.layout.complement(rows)
        order = [self.layout.index(lab) for lab in rows + rest]
        t = self.tensor_view().transpose(order) if self.layout.parts else self.tensor_view()
        return t.reshape(self.layout.dim_of(rows), self.layout.dim_of(rest))

    def dm(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()), self.layout,
                               subnormalized=self.subnormalized)

    def reduced(self, keep: Iterable[str]) -> "DensityOperator":
        """Marginal on ``keep`` (in the given order), without forming the full projector."""
        keep = self.layout.check_labels(keep)
        m = self.matrix(keep)
        return DensityOperator(m @ m.conj().T, self.layout.select(keep), subnormalized=self.subnormalized)

    def permute(self, labels: Sequence[str]) -> "PureState":
        labels = self.layout.check_labels(labels)
        if set(labels) != set(self.layout.labels):
            raise LayoutError("permute needs every label exactly once")
        order = [self.layout.index(lab) for lab in labels]
        amps = self.tensor_view().transpose(order).reshape(-1)
        return PureState(amps, self.layout.select(labels), self.subnormalized)

    def group(self, labels: Sequence[str], new_label: str) -> "PureState":
        """Fuse ``labels`` (in order) into one subsystem placed where the first one was."""
        labels = self.layout.check_labels(labels)
        first = min(self.layout.index(lab) for lab in labels)
        rest = [lab for lab in self.layout.labels if lab not in labels]
        before = [lab for lab in rest if self.layout.index(lab) < first]
        after = [lab for lab in rest if self.layout.index(lab) > first]
        st = self.permute(before + list(labels) + after)
        parts = (tuple(self.layout.select(before).parts) + ((new_label, self.layout.dim_of(labels)),)
                 + tuple(self.layout.select(after).parts))
        return PureState(st.amplitudes, SubsystemLayout(parts), self.subnormalized)

    def rename(self, mapping: dict[str, str]) -> "PureState":
        return PureState(self.amplitudes, self.layout.rename(mapping), self.subnormalized)

    def apply(self, op: np.ndarray, on: Sequence[str], out: SubsystemLayout | Sequence[tuple[str, int]] | None = None,
              subnormalized: bool | None = None) -> "PureState":
        """Apply a (possibly rectangular) operator to subsystems ``on``.

        The output factors replace ``on`` at the front of the layout,
        followed by the untouched subsystems in their original order.
        """
        on = self.layout.check_labels(on)
        out_layout = self.layout.select(on) if out is None else _layout(out)
        op = np.asarray(op, dtype=complex)
        if op.shape != (out_layout.total_dim, self.layout.dim_of(on)):
            raise LayoutError(f"operator shape {op.shape} does not map {on} to {out_layout.labels}")
        rest = self.layout.complement(on)
        new = op @ self.matrix(on)
        layout = out_layout.concat(self.layout.select(rest))
        if subnormalized is None:
            subnormalized = self.subnormalized
        return PureState(new.reshape(-1), layout, subnormalized)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Density matrix on a labeled space; ``subnormalized`` relaxes trace to ``<= 1``."""

    matrix: np.ndarray
    layout: SubsystemLayout
    subnormalized: bool = False

    def __post_init__(self):
        layout = _layout(self.layout)
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "layout", layout)
        if mat.shape != (layout.total_dim, layout.total_dim):
            raise LayoutError(f"matrix shape {mat.shape} != layout dimension {layout.total_dim}")
        if np.max(np.abs(mat - mat.conj().T), initial=0.0) > HERM_TOL:
            raise BadInputError("density operator is not Hermitian")
        mat = 0.5 * (mat + mat.conj().T)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        tr = float(np.trace(mat).real)
        if self.subnormalized:
            if tr > 1.0 + TRACE_TOL:
                raise BadInputError(f"subnormalized operator has trace {tr} > 1")
        elif abs(tr - 1.0) > TRACE_TOL:
            raise BadInputError(f"density operator has trace {tr}, expected 1")
        if layout.total_dim <= _PSD_CHECK_MAX_DIM:
            lo = np.linalg.eigvalsh(mat)[0]
            if lo < -PSD_TOL:
                raise BadInputError(f"density operator has eigenvalue {lo}")

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def reduced(self, keep: Iterable[str]) -> "DensityOperator":
        return partial_trace(self, keep)

    def permute(self, labels: Sequence[str]) -> "DensityOperator":
        labels = self.layout.check_labels(labels)
        if set(labels) != set(self.layout.labels):
            raise LayoutError("permute needs every label exactly once")
        k = len(self.layout)
        order = [self.layout.index(lab) for lab in labels]
        t = self.matrix.reshape(self.layout.dims * 2).transpose(order + [k + i for i in order])
        d = self.layout.total_dim
        return DensityOperator(t.reshape(d, d), self.layout.select(labels), self.subnormalized)

    def rename(self, mapping: dict[str, str]) -> "DensityOperator":
        return DensityOperator(self.matrix, self.layout.rename(mapping), self.subnormalized)


@dataclass(frozen=True, eq=False)
class Isometry:
    """Linear map ``V`` with ``V^dagger V = I`` from ``input_layout`` to ``output_layout``."""

    matrix: np.ndarray
    input_layout: SubsystemLayout
    output_layout: SubsystemLayout
    tol: float = field(default=ISOMETRY_TOL, repr=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        inp, out = _layout(self.input_layout), _layout(self.output_layout)
        object.__setattr__(self, "input_layout", inp)
        object.__setattr__(self, "output_layout", out)
        if mat.shape != (out.total_dim, inp.total_dim):
            raise LayoutError(f"isometry shape {mat.shape} != ({out.total_dim}, {inp.total_dim})")
        err = np.max(np.abs(mat.conj().T @ mat - np.eye(inp.total_dim)), initial=0.0)
        if err > self.tol:
            raise BadInputError(f"matrix is not an isometry (max |V'V - I| = {err:.2e})")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def apply(self, state: PureState) -> PureState:
        return state.apply(self.matrix, self.input_layout.labels, self.output_layout)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """CPTP map given by Kraus operators ``K_k`` with ``sum K_k^dagger K_k = I``."""

    kraus_ops: tuple[np.ndarray, ...]
    input_layout: SubsystemLayout
    output_layout: SubsystemLayout

    def __post_init__(self):
        inp, out = _layout(self.input_layout), _layout(self.output_layout)
        object.__setattr__(self, "input_layout", inp)
        object.__setattr__(self, "output_layout", out)
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise BadInputError("channel needs at least one Kraus operator")
        for k in ops:
            if k.shape != (out.total_dim, inp.total_dim):
                raise LayoutError(f"Kraus operator shape {k.shape} != ({out.total_dim}, {inp.total_dim})")
            k.setflags(write=False)
        total = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(total - np.eye(inp.total_dim))) > ISOMETRY_TOL:
            raise BadInputError("Kraus operators are not trace preserving")
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def num_kraus(self) -> int:
        return len(self.kraus_ops)

    def stinespring(self, env_label: str) -> Isometry:
        """Dilation ``V -> output (x) environment`` with environment dimension = number of Kraus operators."""
        out = self.output_layout.concat(SubsystemLayout.of((env_label, self.num_kraus)))
        stacked = np.stack(self.kraus_ops, axis=1)  # (d_out, k, d_in)
        return Isometry(stacked.reshape(-1, self.input_layout.total_dim), self.input_layout, out)

    def apply(self, rho: DensityOperator) -> DensityOperator:
        """Act on the subsystems of ``rho`` named by the input layout; outputs go first."""
        on = rho.layout.check_labels(self.input_layout.labels)
        rest = rho.layout.complement(on)
        rho = rho.permute(on + rest)
        d_rest = rho.layout.dim_of(rest) if rest else 1
        eye = np.eye(d_rest)
        mat = sum(np.kron(k, eye) @ rho.matrix @ np.kron(k, eye).conj().T for k in self.kraus_ops)
        layout = self.output_layout.concat(rho.layout.select(rest))
        return DensityOperator(mat, layout, rho.subnormalized)


# --- constructors -----------------------------------------------------------


def basis_state(layout: SubsystemLayout | Sequence[tuple[str, int]], indices: Sequence[int]) -> PureState:
    layout = _layout(layout)
    amps = np.zeros(layout.total_dim, dtype=complex)
    amps[np.ravel_multi_index(tuple(indices), layout.dims)] = 1.0
    return PureState(amps, layout)


def maximally_entangled(d: int, labels: tuple[str, str] = ("A", "B")) -> PureState:
    """``|Phi_d> = d^{-1/2} sum_i |ii>``."""
    amps = np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
    return PureState(amps, SubsystemLayout.of((labels[0], d), (labels[1], d)))


def ghz(labels: Sequence[str], d: int = 2) -> PureState:
    labels = tuple(labels)
    layout = SubsystemLayout(tuple((lab, d) for lab in labels))
    amps = np.zeros(layout.total_dim, dtype=complex)
    for i in range(d):
        amps[np.ravel_multi_index((i,) * len(labels), layout.dims)] = 1.0 / np.sqrt(d)
    return PureState(amps, layout)


def random_pure_state(layout: SubsystemLayout | Sequence[tuple[str, int]], rng: np.random.Generator) -> PureState:
    """Haar-random unit vector."""
    layout = _layout(layout)
    v = rng.standard_normal(layout.total_dim) + 1j * rng.standard_normal(layout.total_dim)
    return PureState(v / np.linalg.norm(v), layout)


def random_density(layout: SubsystemLayout | Sequence[tuple[str, int]], rng: np.random.Generator,
                   rank: int | None = None) -> DensityOperator:
    """Induced-measure random state: partial trace of a Haar vector with a ``rank``-dim ancilla."""
    layout = _layout(layout)
    d = layout.total_dim
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return DensityOperator(rho / np.trace(rho).real, layout)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed ``d x d`` unitary (Ginibre matrix, QR, phase-fixed ``R`` diagonal)."""
    if d < 1:
        raise BadInputError(f"unitary dimension must be >= 1, got {d}")
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


# --- combinators ----------------------------------------------------------------


def tensor(a, b):
    """Kronecker product of two states of the same kind with concatenated layouts."""
    if isinstance(a, PureState) and isinstance(b, PureState):
        layout = a.layout.concat(b.layout)
        return PureState(np.kron(a.amplitudes, b.amplitudes), layout, a.subnormalized or b.subnormalized)
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        layout = a.layout.concat(b.layout)
        return DensityOperator(np.kron(a.matrix, b.matrix), layout, a.subnormalized or b.subnormalized)
    raise BadInputError("tensor needs two PureStates or two DensityOperators")


def partial_trace(rho: DensityOperator | PureState, keep: str | Iterable[str]) -> DensityOperator:
    """Reduced operator on ``keep`` (kept in the given order)."""
    if isinstance(rho, PureState):
        return rho.reduced(keep)
    layout = rho.layout
    keep = layout.check_labels(keep)
    traced = layout.complement(keep)
    k = len(layout)
    ki = [layout.index(lab) for lab in keep]
    ti = [layout.index(lab) for lab in traced]
    t = rho.matrix.reshape(layout.dims * 2).transpose(ki + ti + [k + i for i in ki] + [k + i for i in ti])
    dk, dt = layout.dim_of(keep), layout.dim_of(traced)
    red = np.einsum("ijkj->ik", t.reshape(dk, dt, dk, dt))
    return DensityOperator(red, layout.select(keep), rho.subnormalized)


def purify(rho: DensityOperator, purifier_label: str) -> PureState:
    """Spectral purification ``sum_i sqrt(l_i) |e_i>|i>``; purifier has the full dimension of ``rho``."""
    if purifier_label in rho.layout:
        raise LayoutError(f"purifier label {purifier_label!r} already used")
    evals, evecs = np.linalg.eigh(rho.matrix)
    evals = np.clip(evals, 0.0, None)
    d = rho.layout.total_dim
    amps = (evecs * np.sqrt(evals)).reshape(-1)  # row index system, column index purifier
    layout = rho.layout.concat(SubsystemLayout.of((purifier_label, d)))
    return PureState(amps / np.linalg.norm(amps), layout)


# --- norms and fidelity ------------------------------------------------------


def _mat(x) -> np.ndarray:
    if isinstance(x, DensityOperator):
        return x.matrix
    if isinstance(x, PureState):
        return np.outer(x.amplitudes, x.amplitudes.conj())
    return np.asarray(x, dtype=complex)


def trace_norm(x) -> float:
    return float(np.sum(np.linalg.svd(_mat(x), compute_uv=False)))


def hs_norm(x) -> float:
    return float(np.linalg.norm(_mat(x)))


def trace_distance(a, b) -> float:
    """``||a - b||_1`` (no factor 1/2)."""
    ma, mb = _mat(a), _mat(b)
    return float(np.sum(np.abs(np.linalg.eigvalsh(ma - mb))))


def support_dim(x, tol: float = 1e-12) -> int:
    s = np.linalg.svd(_mat(x), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * max(1.0, s[0])))


def norm_dim_inequality(x, d: int | None = None, slack: float = 1e-9) -> bool:
    """``||X||_1^2 <= d ||X||_2^2``, with ``d`` defaulting to the support dimension of ``X``."""
    if d is None:
        d = support_dim(x)
    t1, t2 = trace_norm(x), hs_norm(x)
    return t1 ** 2 <= d * t2 ** 2 * (1 + slack) + slack


def _psd_sqrt(m: np.ndarray, cut: float = 0.0) -> np.ndarray:
    """Square root of a PSD matrix; eigenvalues at or below ``cut`` are set to zero."""
    evals, evecs = np.linalg.eigh(m)
    if evals[0] < -PSD_TOL:
        raise BadInputError(f"matrix has negative eigenvalue {evals[0]}")
    evals = np.where(evals > cut, evals, 0.0)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


def fidelity(rho, sigma) -> float:
    """Squared Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``."""
    if isinstance(rho, (DensityOperator, PureState)) and isinstance(sigma, (DensityOperator, PureState)):
        if rho.layout.dims != sigma.layout.dims:
            raise LayoutError("fidelity needs states on the same layout")
    if isinstance(rho, PureState) and isinstance(sigma, PureState):
        return float(min(1.0, abs(np.vdot(rho.amplitudes, sigma.amplitudes)) ** 2))
    if isinstance(rho, PureState):
        rho, sigma = sigma, rho
    if isinstance(sigma, PureState):
        v = sigma.amplitudes
        val = float(np.real(np.vdot(v, _mat(rho) @ v)))
        if val < -PSD_TOL:
            raise BadInputError("negative expectation in fidelity")
        return float(min(1.0, max(0.0, val)))
    # singular values of sqrt(rho) sqrt(sigma) avoid square-rooting eigenvalue noise
    root = np.sum(np.linalg.svd(_psd_sqrt(_mat(rho), FID_CUT) @ _psd_sqrt(_mat(sigma), FID_CUT),
                                compute_uv=False))
    return float(min(1.0, root ** 2))


def fuchs_van_de_graaf_check(rho, sigma, slack: float = 1e-9) -> bool:
    """``1 - sqrt(F) <= ||rho - sigma||_1 / 2 <= sqrt(1 - F)``."""
    f = fidelity(rho, sigma)
    half = 0.5 * trace_distance(rho, sigma)
    return 1 - np.sqrt(f) <= half + slack and half <= np.sqrt(max(0.0, 1 - f)) + slack


# --- Uhlmann decoder --------------------------------------------------------


@dataclass(frozen=True)
class UhlmannResult:
    isometry: Isometry
    fidelity: float


def uhlmann_decoder(actual: PureState, target: PureState, fixed: Iterable[str],
                    movable: tuple[Sequence[str], Sequence[str]] | None = None) -> UhlmannResult:
    """Isometry ``V`` on the movable part of ``actual`` maximizing ``|<target|(I (x) V)|actual>|^2``.

    ``fixed`` subsystems must coincide (same labels and dimensions) on both
    states.  ``movable`` optionally fixes the order of the remaining labels
    as ``(actual_labels, target_labels)``; by default the layout order is used.
    The maximum equals the fidelity of the two marginals on ``fixed``.
    """
    fixed = actual.layout.check_labels(fixed)
    target.layout.check_labels(fixed)
    if actual.layout.select(fixed).dims != target.layout.select(fixed).dims:
        raise LayoutError("fixed subsystems differ in dimension")
    if movable is None:
        mov_a, mov_b = actual.layout.complement(fixed), target.layout.complement(fixed)
    else:
        mov_a, mov_b = tuple(movable[0]), tuple(movable[1])
        if set(mov_a) != set(actual.layout.complement(fixed)) or set(mov_b) != set(target.layout.complement(fixed)):
            raise LayoutError("movable labels must partition the non-fixed subsystems")
    d_a, d_b = actual.layout.dim_of(mov_a), target.layout.dim_of(mov_b)
    if d_b < d_a:
        raise LayoutError(f"target movable dimension {d_b} < actual movable dimension {d_a}")
    ma = actual.matrix(fixed)  # (fixed, movable_actual)
    mb = target.matrix(fixed)
    if mov_a != actual.layout.complement(fixed):
        ma = actual.permute(fixed + mov_a).matrix(fixed)
    if mov_b != target.layout.complement(fixed):
        mb = target.permute(fixed + mov_b).matrix(fixed)
    v, s = _polar_isometry(ma, mb)
    iso = Isometry(v, actual.layout.select(mov_a), target.layout.select(mov_b), tol=1e-8)
    return UhlmannResult(iso, float(min(1.0, np.sum(s) ** 2)))


def _polar_isometry(ma: np.ndarray, mb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Isometry ``V`` maximizing ``|Tr(V Y)|`` for ``Y = ma^T conj(mb)``, and the singular values of ``Y``.

    ``Y`` is factored through a thin QR of ``mb^dagger`` so the SVD only
    touches a ``(d_a, f)`` core; directions of ``C^{d_a}`` beyond rank ``f``
    are sent to an orthonormal complement of ``range(conj(Q))``.
    """
    f, d_a = ma.shape
    d_b = mb.shape[1]
    q, r = np.linalg.qr(mb.conj().T)  # (d_b, k), (k, f), k = min(d_b, f)
    core = ma.T @ r.T  # Y = core @ q.T
    u, s, wh = np.linalg.svd(core, full_matrices=True)  # u (d_a, d_a), wh (k, k)
    images = q.conj() @ wh.conj().T  # conj(y_i) in the derivation, orthonormal columns
    k = images.shape[1]
    if k < d_a:
        images = np.concatenate([images, _orthogonal_completion(images, d_a - k)], axis=1)
    v = images[:, :d_a] @ u.conj().T
    return v, s


def _orthogonal_completion(cols: np.ndarray, m: int) -> np.ndarray:
    """``m`` orthonormal vectors orthogonal to the orthonormal columns ``cols``."""
    d = cols.shape[0]
    # basis vectors where cols has the least weight, projected and re-orthonormalized
    idx = np.sort(np.argsort(np.sum(np.abs(cols) ** 2, axis=1), kind="stable")[:m])
    x = cols[idx].conj().T  # cols^dagger e_idx, shape (k, m)
    gram = np.eye(m) - x.conj().T @ x
    evals, evecs = np.linalg.eigh(gram)
    if evals[0] > 0.25:
        g = -cols @ x
        g[idx, np.arange(m)] += 1.0
        return g @ (evecs / np.sqrt(evals)) @ evecs.conj().T
    g = np.random.default_rng(0).standard_normal((d, m)) + 0j
    g -= cols @ (cols.conj().T @ g)
    q, _ = np.linalg.qr(g)
    return q


def swap_and_projectors(d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Swap ``F|ij> = |ji>`` on ``C^d (x) C^d`` and the symmetric/antisymmetric projectors."""
    if d < 1:
        raise BadInputError("d must be >= 1")
    f = np.eye(d * d).reshape(d, d, d, d).transpose(0, 1, 3, 2).reshape(d * d, d * d)
    eye = np.eye(d * d)
    return f, (eye + f) / 2, (eye - f) / 2
