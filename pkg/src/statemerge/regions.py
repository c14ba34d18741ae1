"""Rate regions and the protocols built on merging.

Covers distributed compression, compression with side information, the
entanglement of assistance (min-cut value, covering experiment, recursive
and simultaneous helper measurements) and the quantum multiple-access
channel.  Rates are in qubits per copy and may be negative.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Sequence

import numpy as np

from statemerge.entropy import EntropyReport, subset_entropy
from statemerge.errors import BadInputError, DimensionCapError, LayoutError
from statemerge.merge import as_rng, build_instrument, post_measurement
from statemerge.qlin import (
    DensityOperator,
    Isometry,
    KrausChannel,
    PureState,
    SubsystemLayout,
    haar_unitary,
    support_dim,
    tensor,
    trace_distance,
)
from statemerge.typ import DEFAULT_CAP, n_copies, truncate

CORNER_TOL = 1e-9
NEAR_TIE = 1e-6
PURITY_TOL = 1e-9


# --- rate regions -------------------------------------------------------------


@dataclass(frozen=True)
class Inequality:
    """``sum_i coeffs[i] R_i  (sense)  bound`` with sense ``">="`` or ``"<="``."""

    coeffs: dict[str, float]
    bound: float
    sense: str = ">="

    def value(self, rates: dict[str, float]) -> float:
        return sum(c * rates[p] for p, c in self.coeffs.items())

    def satisfied(self, rates: dict[str, float], tol: float = CORNER_TOL) -> bool:
        v = self.value(rates)
        if self.sense == ">=":
            return v >= self.bound - tol
        return v <= self.bound + tol


@dataclass(frozen=True)
class Corner:
    rates: tuple[float, ...]
    ordering: tuple[str, ...]
    note: str = ""


@dataclass
class RateRegion:
    """Polyhedral rate region with its corner points.

    Negative rates are genuine values (entanglement gained or invested)
    and must not be clamped.
    """

    parties: tuple[str, ...]
    inequalities: list[Inequality] = field(default_factory=list)
    corners: list[Corner] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def rates_of(self, corner: Corner) -> dict[str, float]:
        return dict(zip(self.parties, corner.rates))

    def contains(self, rates: Sequence[float], tol: float = CORNER_TOL) -> bool:
        r = dict(zip(self.parties, rates))
        return all(ineq.satisfied(r, tol) for ineq in self.inequalities)

    def corners_valid(self, tol: float = CORNER_TOL) -> bool:
        return all(self.contains(c.rates, tol) for c in self.corners)

    def to_dict(self) -> dict:
        return {
            "parties": list(self.parties),
            "inequalities": [
                {"coeffs": dict(q.coeffs), "sense": q.sense, "bound": q.bound} for q in self.inequalities
            ],
            "corners": [
                {"rates": list(c.rates), "ordering": list(c.ordering), "note": c.note} for c in self.corners
            ],
            "notes": list(self.notes),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def polygon_csv(self) -> str:
        """Corner vertices of a 2-party region, sorted by the first rate."""
        if len(self.parties) != 2:
            raise BadInputError("polygon export is only defined for two parties")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"R_{self.parties[0]}", f"R_{self.parties[1]}", "ordering"])
        for c in sorted(self.corners, key=lambda c: c.rates):
            w.writerow([repr(c.rates[0]), repr(c.rates[1]), ">".join(c.ordering)])
        return buf.getvalue()


def _subsets(items: Sequence[str]):
    for k in range(1, len(items) + 1):
        yield from combinations(items, k)


def distributed_compression_region(rho: DensityOperator | PureState, parties: Sequence[str]) -> RateRegion:
    """``sum_{i in T} R_i >= S(T | parties \\ T)`` for every nonempty ``T``.

    The corner for an ordering gives the ``k``-th party the rate
    ``S(A_k | A_1 ... A_{k-1})``; all ``m!`` orderings are listed.
    """
    parties = rho.layout.check_labels(parties)
    ents = EntropyReport.of(rho.reduced(parties) if isinstance(rho, DensityOperator) else rho, parties)
    region = RateRegion(parties)
    for t in _subsets(parties):
        rest = tuple(p for p in parties if p not in t)
        region.inequalities.append(Inequality({p: 1.0 for p in t}, ents.conditional(t, rest), ">="))
    for order in permutations(parties):
        rates = {}
        for k, p in enumerate(order):
            rates[p] = ents.conditional([p], order[:k])
        region.corners.append(Corner(tuple(rates[p] for p in parties), order))
    return region


# --- side information -------------------------------------------------------------

_U, _V, _W, _E = "_U", "_V", "_W", "_E"


def _identity_channel(d: int) -> KrausChannel:
    return KrausChannel((np.eye(d),), [(_V, d)], [(_W, d)])


def side_info_rates(psi_ABR: PureState, T: Isometry | None = None, channel: KrausChannel | None = None,
                    labels: tuple[str, str, str] = ("A", "B", "R")) -> tuple[float, float]:
    """``(R_A, R_B) = (S(A|U), S(U) + S(W|AU))``.

    ``T`` splits Bob's system into ``U (x) V`` (its two output factors, in
    order); ``channel`` maps ``V`` to ``W`` and is dilated with an
    environment.  ``T=None`` keeps all of ``B`` in ``U``; ``channel=None``
    is the identity on ``V``.
    """
    a, b, r = labels
    psi = psi_ABR.permute([a, b, r])
    d_B = psi.layout.dim_of(b)
    if T is None:
        t_mat, d_U, d_V = np.eye(d_B), d_B, 1
    else:
        if T.input_layout.total_dim != d_B or len(T.output_layout) != 2:
            raise LayoutError("T must map Bob's space to two output factors U, V")
        t_mat = T.matrix
        d_U, d_V = T.output_layout.dims
    st = psi.apply(t_mat, [b], [(_U, d_U), (_V, d_V)])
    if channel is None:
        channel = _identity_channel(d_V)
    if channel.input_layout.total_dim != d_V:
        raise LayoutError(f"channel input dimension {channel.input_layout.total_dim} != dim V = {d_V}")
    d_W = channel.output_layout.total_dim
    dil = np.stack(channel.kraus_ops, axis=1).reshape(-1, d_V)
    st = st.apply(dil, [_V], [(_W, d_W), (_E, channel.num_kraus)])
    ents = EntropyReport.of(st, (a, _U, _W))
    r_a = ents.conditional([a], [_U])
    r_b = ents.S(_U) + ents.conditional([_W], [a, _U])
    return r_a, r_b


@dataclass
class SideInfoResult:
    R_A: float
    R_B: float
    objective: float
    source: str
    heuristic: bool = True
    evaluations: int = 0


def _givens_move(u: np.ndarray, rng: np.random.Generator, step: float) -> np.ndarray:
    """Rotate two random columns of ``u`` by a small complex Givens rotation."""
    d = u.shape[0]
    if d < 2:
        return u * np.exp(1j * step * rng.standard_normal())
    i, j = rng.choice(d, size=2, replace=False)
    th, ph = step * rng.standard_normal(), 2 * np.pi * rng.random()
    c, s = math.cos(th), math.sin(th) * np.exp(1j * ph)
    out = u.copy()
    out[:, i] = c * u[:, i] - s.conjugate() * u[:, j]
    out[:, j] = s * u[:, i] + c * u[:, j]
    return out


def side_info_search(psi_ABR: PureState, d_U: int, restarts: int = 4, rng=None, weight: float = 1.0,
                     steps: int = 60, step: float = 0.3,
                     labels: tuple[str, str, str] = ("A", "B", "R")) -> SideInfoResult:
    """Random-restart local search minimizing ``R_A + weight * R_B``.

    ``T`` is the first ``d_B`` columns of a unitary on ``U (x) V`` with
    ``d_V = d_B``; the channel on ``V`` is the first ``d_V`` columns of a
    unitary on ``W (x) E`` with ``d_W = d_E = d_V``.  The identity split
    and the two trivial-``U`` splits are always evaluated as baselines.
    The result is an upper bound only; no optimality is claimed.
    """
    a, b, r = labels
    rng = as_rng(rng)
    d_B = psi_ABR.layout.dim_of(b)
    s_a = subset_entropy(psi_ABR, [a])
    if d_B == 1:
        return SideInfoResult(s_a, 0.0, s_a, "trivial", heuristic=False, evaluations=0)

    best: SideInfoResult | None = None
    evals = 0

    def consider(ra, rb, source):
        nonlocal best, evals
        evals += 1
        obj = ra + weight * rb
        if best is None or obj < best.objective - 1e-12:
            best = SideInfoResult(ra, rb, obj, source)
        return obj

    consider(*side_info_rates(psi_ABR, None, None, labels), "baseline:identity")
    no_u = Isometry(np.eye(d_B), [(b, d_B)], [(_U, 1), (_V, d_B)])
    consider(*side_info_rates(psi_ABR, no_u, None, labels), "baseline:send-B")
    trash = KrausChannel(tuple(np.eye(d_B)[[k]] for k in range(d_B)), [(_V, d_B)], [(_W, 1)])
    consider(*side_info_rates(psi_ABR, no_u, trash, labels), "baseline:discard-B")

    d_V = d_B
    t_in, t_out = [(b, d_B)], [(_U, d_U), (_V, d_V)]
    c_in, c_out = [(_V, d_V)], [(_W, d_V)]

    def evaluate(tu, cu):
        t = Isometry(tu[:, :d_B], t_in, t_out, tol=1e-8)
        ops = cu[:, :d_V].reshape(d_V, d_V, d_V).transpose(1, 0, 2)
        ch = KrausChannel(tuple(ops), c_in, c_out)
        return side_info_rates(psi_ABR, t, ch, labels)

    for k, sub in enumerate(rng.spawn(restarts)):
        tu, cu = haar_unitary(d_U * d_V, sub), haar_unitary(d_V * d_V, sub)
        ra, rb = evaluate(tu, cu)
        cur = consider(ra, rb, f"search:{k}")
        for _ in range(steps):
            if sub.random() < 0.5:
                tn, cn = _givens_move(tu, sub, step), cu
            else:
                tn, cn = tu, _givens_move(cu, sub, step)
            ra, rb = evaluate(tn, cn)
            obj = consider(ra, rb, f"search:{k}")
            if obj < cur:
                tu, cu, cur = tn, cn, obj
    best.evaluations = evals
    return best


# --- entanglement of assistance -----------------------------------------------


@dataclass(frozen=True)
class CutValue:
    """Helpers ``T`` on A's side; ``value = min(S(A T), S(B T-bar))``."""

    T: tuple[str, ...]
    value: float
    s_at: float
    s_btbar: float


@dataclass
class MinCut:
    value: float
    cut: tuple[str, ...]
    cuts: list[CutValue]
    near_ties: list[tuple[str, ...]]


def _as_pure(psi) -> PureState:
    if isinstance(psi, PureState):
        return psi
    if isinstance(psi, DensityOperator):
        evals, evecs = np.linalg.eigh(psi.matrix)
        if evals[-1] < 1 - PURITY_TOL or abs(psi.purity() - 1.0) > PURITY_TOL:
            raise BadInputError("min-cut assistance needs a pure global state")
        return PureState(evecs[:, -1], psi.layout)
    raise BadInputError(f"unsupported state type {type(psi).__name__}")


def min_cut_assistance(psi, a: str, b: str) -> MinCut:
    """Minimum over helper subsets ``T`` of ``min(S(A T), S(B T-bar))``.

    Ties go to the lexicographically smallest ``T`` (helpers compared by
    their position in the layout); cuts within ``1e-6`` of the minimum are
    reported as near-ties.
    """
    psi = _as_pure(psi)
    psi.layout.check_labels([a, b])
    if a == b:
        raise LayoutError("the two parties must differ")
    helpers = tuple(lab for lab in psi.layout.labels if lab not in (a, b))
    subsets = [()] + list(_subsets(helpers))
    pos = {h: i for i, h in enumerate(helpers)}
    subsets.sort(key=lambda t: [pos[h] for h in t])
    cuts = []
    for t in subsets:
        tbar = tuple(h for h in helpers if h not in t)
        s1 = subset_entropy(psi, (a,) + t)
        s2 = subset_entropy(psi, (b,) + tbar)
        cuts.append(CutValue(t, min(s1, s2), s1, s2))
    best = min(cuts, key=lambda c: c.value)  # first minimum in sorted order
    ties = [c.T for c in cuts if c is not best and c.value - best.value <= NEAR_TIE]
    return MinCut(best.value, best.T, cuts, ties)


@dataclass
class CoveringResult:
    mean_error: float
    stderr: float
    bound: float
    trials: int
    d_A: int
    d_R: int
    D: float

    @property
    def holds(self) -> bool:
        return self.mean_error <= self.bound + 3 * self.stderr


def _mean_stderr(xs) -> tuple[float, float]:
    arr = np.asarray(xs, dtype=float)
    if arr.size > 1:
        return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))
    return float(arr.mean()), 0.0


def covering_experiment(psi_ABR: PureState, n: int = 1, trials: int = 20, rng=None, delta: float | None = None,
                        labels: tuple[str, str, str] = ("A", "B", "R"), cap: int = DEFAULT_CAP) -> CoveringResult:
    """Random rank-1 measurement on Alice; mean of ``sum_j p_j ||rho^j_R - rho_R||_1``.

    With ``delta`` the copies are first truncated to the typical subspace.
    The bound is ``2 sqrt(d_R / D) + 2 / d_A``.
    """
    a, b, r = labels
    rng = as_rng(rng)
    psi = psi_ABR.permute([a, b, r])
    if subset_entropy(psi, [r]) >= subset_entropy(psi, [b]):
        warnings.warn("S(R) >= S(B): the covering bound is not expected to be small", stacklevel=2)
    if delta is None:
        big = n_copies(psi, n, cap)
    else:
        big = truncate(psi, n, delta, cap).psi.normalized()
    d_A = big.layout.dim_of(a)
    rho_R = big.reduced([r])
    d_R = max(1, support_dim(rho_R, 1e-10))
    D = 1.0 / big.reduced([b]).purity()
    bound = 2 * math.sqrt(d_R / D) + 2 / d_A
    errs = []
    for sub in rng.spawn(trials):
        meas = post_measurement(big, build_instrument(d_A, 1, sub), a)
        err = 2.0 * meas.dropped_mass
        for o in meas.outcomes:
            err += o.probability * trace_distance(o.state.reduced([r]), rho_R)
        errs.append(err)
    m, se = _mean_stderr(errs)
    return CoveringResult(m, se, bound, trials, d_A, d_R, D)


@dataclass
class AssistanceResult:
    mean_entropy: float
    stderr: float
    per_copy: float
    min_cut: float
    n: int
    trials: int
    helper_order: tuple[str, ...]

    @property
    def within_min_cut(self) -> bool:
        """Entanglement monotonicity with a 3-sigma allowance."""
        return self.mean_entropy <= self.n * self.min_cut + 3 * self.stderr + 1e-9

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["helper_order"] = list(self.helper_order)
        d["within_min_cut"] = self.within_min_cut
        return d


def _measure_rows(psi: PureState, label: str, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, SubsystemLayout]:
    """Outcome vectors and probabilities of a basis measurement (rows of ``u``) on ``label``."""
    rest = psi.layout.complement([label])
    v = u @ psi.matrix([label])
    p = np.sum(np.abs(v) ** 2, axis=1)
    return v, p, psi.layout.select(rest)


def _avg_entropy(v: np.ndarray, p: np.ndarray, layout: SubsystemLayout, a: str) -> float:
    total = 0.0
    for vj, pj in zip(v, p):
        if pj < 1e-14:
            continue
        total += pj * subset_entropy(PureState(vj / math.sqrt(pj), layout), [a])
    return total


def _default_order(psi: PureState, helpers: Sequence[str]) -> tuple[str, ...]:
    ents = [(-subset_entropy(psi, [h]), i, h) for i, h in enumerate(helpers)]
    return tuple(h for _, _, h in sorted(ents, key=lambda e: (round(e[0], 12), e[1])))


def assistance_protocol(psi: PureState, a: str, b: str, helper_order: Sequence[str] | None = None, n: int = 1,
                        trials: int = 20, rng=None, cap: int = DEFAULT_CAP) -> AssistanceResult:
    """Helpers measure their ``n``-copy systems one after another in Haar-random bases.

    Each trial samples the outcomes of all helpers but the last and
    averages exactly over the last helper's outcomes; the reported value is
    the mean entropy of A's share.  Local decoding by A and B is left to the
    end and does not change that entropy.
    """
    psi = _as_pure(psi)
    helpers = tuple(lab for lab in psi.layout.labels if lab not in (a, b))
    order = _default_order(psi, helpers) if helper_order is None else tuple(helper_order)
    if sorted(order) != sorted(helpers):
        raise LayoutError(f"helper order {order} must list each helper {helpers} once")
    cut = min_cut_assistance(psi, a, b).value
    rng = as_rng(rng)
    big = n_copies(psi, n, cap)
    if not order:
        s = subset_entropy(big, [a])
        return AssistanceResult(s, 0.0, s / n, cut, n, 1, order)
    vals = []
    for sub in rng.spawn(trials):
        st = big
        for h in order[:-1]:
            v, p, layout = _measure_rows(st, h, haar_unitary(st.layout.dim_of(h), sub))
            j = sub.choice(len(p), p=p / p.sum())
            st = PureState(v[j] / math.sqrt(p[j]), layout)
        h = order[-1]
        v, p, layout = _measure_rows(st, h, haar_unitary(st.layout.dim_of(h), sub))
        vals.append(_avg_entropy(v, p, layout, a))
    m, se = _mean_stderr(vals)
    return AssistanceResult(m, se, m / n, cut, n, trials, order)


def simultaneous_assistance_experiment(psi: PureState, a: str, b: str, n: int = 1, trials: int = 10, rng=None,
                                       cap: int = DEFAULT_CAP) -> dict:
    """All helpers measure at once in independent Haar bases; exact average over joint outcomes.

    Exploratory: the per-copy gap to the min-cut value is reported without
    any pass/fail judgement.
    """
    psi = _as_pure(psi)
    helpers = tuple(lab for lab in psi.layout.labels if lab not in (a, b))
    cut = min_cut_assistance(psi, a, b).value
    rng = as_rng(rng)
    big = n_copies(psi, n, cap)
    vals = []
    for sub in rng.spawn(trials):
        st = big
        if helpers:
            st = st.permute(list(helpers) + [a, b])
            u = np.ones((1, 1), dtype=complex)
            for h in helpers:
                u = np.kron(u, haar_unitary(st.layout.dim_of(h), sub))
            v, p, layout = _measure_rows(st.group(list(helpers), "_H"), "_H", u)
            vals.append(_avg_entropy(v, p, layout, a))
        else:
            vals.append(subset_entropy(st, [a]))
    m, se = _mean_stderr(vals)
    return {
        "helpers": list(helpers), "n": n, "trials": trials, "mean_entropy": m, "stderr": se,
        "per_copy": m / n, "min_cut": cut, "gap": cut - m / n,
    }


# --- multiple-access channel ----------------------------------------------------


def mac_rates(channel: KrausChannel, psi_AAp: PureState, psi_BBp: PureState) -> RateRegion:
    """Coherent-information region of a two-sender channel ``A'B' -> C``.

    Each input state is ``(reference, channel input)`` in that order; the
    channel's input layout must name the two inputs.  Corners are
    ``(I(A>BC), I(B>C))`` and ``(I(A>C), I(B>AC))``.
    """
    (ra, ia), (rb, ib) = psi_AAp.layout.labels, psi_BBp.layout.labels
    if len(psi_AAp.layout) != 2 or len(psi_BBp.layout) != 2:
        raise LayoutError("each input must be a (reference, input) pair")
    if set(channel.input_layout.labels) != {ia, ib}:
        raise LayoutError(f"channel inputs {channel.input_layout.labels} != {(ia, ib)}")
    out = channel.output_layout.labels
    if set(out) & {ra, rb}:
        raise LayoutError("channel output labels collide with the references")
    total = psi_AAp.layout.total_dim * psi_BBp.layout.total_dim
    if total > DEFAULT_CAP:
        raise DimensionCapError(f"MAC state dimension {total} > cap {DEFAULT_CAP}")
    rho = channel.apply(tensor(psi_AAp, psi_BBp).dm())
    ents = EntropyReport.of(rho, (ra, rb) + out)

    def coh(x, y):
        return ents.coherent(x, y)

    c = tuple(out)
    i_a_bc, i_b_ac, i_ab_c = coh([ra], (rb,) + c), coh([rb], (ra,) + c), coh([ra, rb], c)
    i_a_c, i_b_c = coh([ra], c), coh([rb], c)
    region = RateRegion((ra, rb))
    region.inequalities = [
        Inequality({ra: 1.0}, i_a_bc, "<="),
        Inequality({rb: 1.0}, i_b_ac, "<="),
        Inequality({ra: 1.0, rb: 1.0}, i_ab_c, "<="),
    ]
    named = {"I(A>BC)": i_a_bc, "I(B>AC)": i_b_ac, "I(AB>C)": i_ab_c, "I(A>C)": i_a_c, "I(B>C)": i_b_c}
    for k, v in named.items():
        if v < 0:
            region.notes.append(f"{k} = {v:.6g} < 0: entanglement-investment rate")
    region.corners = [
        Corner((i_a_bc, i_b_c), (rb, ra), "B decoded first"),
        Corner((i_a_c, i_b_ac), (ra, rb), "A decoded first"),
    ]
    return region
