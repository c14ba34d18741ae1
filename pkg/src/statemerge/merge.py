"""Random-measurement state merging.

Alice measures her share with rank-``L`` partial isometries cut from one
Haar-random unitary, Bob undoes each outcome with an Uhlmann isometry, and
the run is booked against the quantum-error bound and the entanglement and
classical-communication ledgers.

Label conventions: the input state has subsystems Alice/Bob/reference
(default ``"A"``, ``"B"``, ``"R"``).  Alice's output register is ``"A1"``,
Bob's new registers are ``"B1"`` (entanglement) and ``"Bp"`` (the copy of
Alice's share).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from statemerge.entropy import EntropyReport, subset_entropy
from statemerge.errors import BadInputError, DimensionCapError, LayoutError
from statemerge.qlin import (
    PureState,
    SubsystemLayout,
    haar_unitary,
    maximally_entangled,
    support_dim,
    swap_and_projectors,
    tensor,
    trace_distance,
    uhlmann_decoder,
)
from statemerge.typ import n_copies, truncate

DEFAULT_CAP = 2 ** 16
DROP_PROB = 1e-14
A1, B1, BP = "A1", "B1", "Bp"


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _seed_of(rng) -> int | None:
    return int(rng) if isinstance(rng, (int, np.integer)) else None


# --- instrument ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Instrument:
    """``N = floor(d_A / L)`` rank-``L`` Kraus operators plus a rank ``L' = d_A - N L`` remainder.

    Element ``j`` (``1 <= j <= N``) is rows ``(j-1)L .. jL-1`` of the Haar
    unitary; the remainder is the last ``L'`` rows padded with zeros to
    ``L`` rows so that every outcome lands in the same ``L``-dim register.
    """

    unitary: np.ndarray
    L: int

    @property
    def d_A(self) -> int:
        return self.unitary.shape[0]

    @property
    def N(self) -> int:
        return self.d_A // self.L

    @property
    def L_rem(self) -> int:
        return self.d_A - self.N * self.L

    @property
    def num_outcomes(self) -> int:
        return self.N + (1 if self.L_rem else 0)

    def element(self, j: int) -> np.ndarray:
        """Kraus operator for outcome ``j``; ``j = 0`` is the remainder."""
        L = self.L
        if 1 <= j <= self.N:
            return self.unitary[(j - 1) * L: j * L]
        if j == 0 and self.L_rem:
            out = np.zeros((L, self.d_A), dtype=complex)
            out[: self.L_rem] = self.unitary[self.N * L:]
            return out
        raise BadInputError(f"instrument has no outcome {j}")

    def outcome_indices(self) -> list[int]:
        return list(range(1, self.N + 1)) + ([0] if self.L_rem else [])

    @property
    def elements(self) -> list[np.ndarray]:
        return [self.element(j) for j in self.outcome_indices()]

    def completeness_error(self) -> float:
        total = sum(p.conj().T @ p for p in self.elements)
        return float(np.max(np.abs(total - np.eye(self.d_A))))


def build_instrument(d_A: int, L: int, rng) -> Instrument:
    if not 1 <= L <= d_A:
        raise BadInputError(f"need 1 <= L <= d_A, got L={L}, d_A={d_A}")
    return Instrument(haar_unitary(d_A, as_rng(rng)), L)


# --- measurement and error functional ---------------------------------------------------


@dataclass
class MergeOutcome:
    index: int
    probability: float
    state: PureState  # normalized, layout (A1, rest...)
    fidelity: float | None = None


@dataclass
class Measurement:
    outcomes: list[MergeOutcome]
    dropped_mass: float = 0.0

    @property
    def total_probability(self) -> float:
        return sum(o.probability for o in self.outcomes) + self.dropped_mass


def post_measurement(psi: PureState, inst: Instrument, alice: str = "A") -> Measurement:
    """Apply every Kraus operator to ``alice``; outcomes below ``1e-14`` go to the dropped mass."""
    if alice not in psi.layout:
        raise LayoutError(f"state has no subsystem {alice!r}")
    if psi.layout.dim_of(alice) != inst.d_A:
        raise LayoutError("instrument dimension does not match Alice's subsystem")
    rest = psi.layout.complement([alice])
    m = psi.matrix([alice])
    out_layout = SubsystemLayout.of((A1, inst.L)).concat(psi.layout.select(rest))
    outcomes, dropped = [], 0.0
    for j in inst.outcome_indices():
        v = inst.element(j) @ m
        p = float(np.vdot(v, v).real)
        if p < DROP_PROB:
            dropped += p
            continue
        outcomes.append(MergeOutcome(j, p, PureState(v.reshape(-1) / math.sqrt(p), out_layout)))
    return Measurement(outcomes, dropped)


def quantum_error(outcomes: Measurement | Sequence[MergeOutcome], L: int, rho_R, dropped_mass: float = 0.0) -> float:
    """``sum_j p_j || rho^j_{A1 R} - tau_{A1} (x) rho_R ||_1`` with ``tau = I/L``.

    Dropped outcomes are charged the maximal trace distance 2.
    """
    if isinstance(outcomes, Measurement):
        dropped_mass = outcomes.dropped_mass
        outcomes = outcomes.outcomes
    ref = rho_R.layout.labels
    ideal = np.kron(np.eye(L) / L, rho_R.matrix)
    q = 2.0 * dropped_mass
    for o in outcomes:
        rho_j = o.state.reduced((A1,) + ref)
        q += o.probability * trace_distance(rho_j.matrix, ideal)
    return q


def qe_bound(L: float, d_A: float, d_R: float, D: float) -> float:
    """``2 sqrt(L d_R / D) + 2 L / d_A``."""
    if min(L, d_A, d_R, D) <= 0:
        raise BadInputError("qe_bound arguments must be positive")
    return 2 * math.sqrt(L * d_R / D) + 2 * L / d_A


def qe_scaling(n: int, S_A: float, S_B: float, S_AB: float, r: float) -> float:
    """The bound with ``d_R = 2^{n S(AB)}``, ``D = 2^{n S(B)}``, ``d_A = 2^{n S(A)}``, ``L = 2^{n r}``."""
    return 2.0 ** (0.5 * n * (S_AB - S_B + r) + 1) + 2.0 ** (n * (r - S_A) + 1)


# --- twirl --------------------------------------------------------------------


def twirl_coefficients(d_A: int, L: int) -> tuple[float, float]:
    if d_A < 2:
        raise BadInputError("twirl formula needs d_A >= 2")
    if not 1 <= L <= d_A:
        raise BadInputError(f"need 1 <= L <= d_A, got L={L}")
    alpha = (L / d_A) * (d_A - L) / (d_A ** 2 - 1)
    beta = (L / d_A) * (L * d_A - 1) / (d_A ** 2 - 1)
    return alpha, beta


def twirl_analytic(d_A: int, L: int) -> np.ndarray:
    """Haar average of ``(U (x) U)^dagger F_{A1 A1} (U (x) U)`` as ``alpha I + beta F``."""
    alpha, beta = twirl_coefficients(d_A, L)
    f, _, _ = swap_and_projectors(d_A)
    return alpha * np.eye(d_A ** 2) + beta * f


def twirl_monte_carlo(d_A: int, L: int, samples: int, rng) -> np.ndarray:
    twirl_coefficients(d_A, L)
    rng = as_rng(rng)
    f, _, _ = swap_and_projectors(d_A)
    q = np.diag([1.0] * L + [0.0] * (d_A - L))
    f_sub = np.kron(q, q) @ f @ np.kron(q, q)
    acc = np.zeros((d_A ** 2, d_A ** 2), dtype=complex)
    for _ in range(samples):
        u = haar_unitary(d_A, rng)
        uu = np.kron(u, u)
        acc += uu.conj().T @ f_sub @ uu
    return acc / samples


# --- random partial isometry average -------------------------------------------


@dataclass(frozen=True)
class AverageCheck:
    mc_mean: float
    stderr: float
    bound: float
    exact_mean: float
    samples: int

    @property
    def holds(self) -> bool:
        return self.mc_mean <= self.bound + 3 * self.stderr


def lemma3_average_check(rho_AR, L: int, samples: int, rng, alice: str = "A") -> AverageCheck:
    """Monte Carlo ``< || omega - (L/d) tau (x) rho_R ||_2^2 >`` against ``L^2 / (d^2 D)``.

    ``omega = (P (x) I) rho_AR (P (x) I)^dagger`` with ``P`` the first ``L``
    rows of a Haar unitary.  ``D`` is the inverse purity of the purifying
    system.  ``exact_mean`` is the closed-form average from the twirl.
    """
    from statemerge.qlin import purify

    if samples < 1:
        raise BadInputError("samples must be >= 1")
    rng = as_rng(rng)
    rho = rho_AR.permute([alice] + list(rho_AR.layout.complement([alice])))
    ref = rho.layout.complement([alice])
    d = rho.layout.dim_of(alice)
    d_R = rho.layout.dim_of(ref) if ref else 1
    rho_R = rho.reduced(ref).matrix if ref else np.ones((1, 1))
    purifier = purify(rho, "_P")
    D = 1.0 / purifier.reduced(["_P"]).purity()
    target = np.kron(np.eye(L), rho_R) / d
    m = rho.matrix.reshape(d, d_R, d, d_R)
    vals = np.empty(samples)
    for k in range(samples):
        p = haar_unitary(d, rng)[:L]
        omega = np.einsum("ia,arbs,jb->irjs", p, m, p.conj()).reshape(L * d_R, L * d_R)
        vals[k] = np.linalg.norm(omega - target) ** 2
    alpha, beta = twirl_coefficients(d, L) if d >= 2 else (0.0, 1.0)
    pur_R, pur_AR = float(np.real(np.vdot(rho_R, rho_R))), rho.purity()
    exact = alpha * pur_R + beta * pur_AR - L / d ** 2 * pur_R
    stderr = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return AverageCheck(float(vals.mean()), stderr, L ** 2 / (d ** 2 * D), float(exact), samples)


# --- decoding ------------------------------------------------------------------


def merge_target(psi: PureState, L: int, alice: str = "A") -> PureState:
    """``Phi_L`` on ``(A1, B1)`` tensored with ``psi`` with Alice's share renamed ``Bp``."""
    return tensor(maximally_entangled(L, (A1, B1)), psi.rename({alice: BP}))


def decode_outcomes(outcomes: Measurement | Sequence[MergeOutcome], L: int, target: PureState,
                    bob: str = "B", explicit: bool = True) -> list[float]:
    """Uhlmann-decode every outcome on Bob's side and record its fidelity with ``target``.

    Bob's isometry maps ``bob -> (B1, Bp, bob)``.  With ``explicit`` the
    decoded vector is formed and its overlap with the target computed
    directly; otherwise the Uhlmann optimum is used.
    """
    if isinstance(outcomes, Measurement):
        outcomes = outcomes.outcomes
    fids = []
    for o in outcomes:
        st = o.state
        fixed = tuple(lab for lab in st.layout.labels if lab != bob)
        mov_t = (B1, BP, bob)
        if set(target.layout.labels) != set(fixed) | set(mov_t):
            raise LayoutError(f"target labels {target.layout.labels} do not match outcome {st.layout.labels}")
        if target.layout.dim_of(mov_t) < st.layout.dim_of(bob):
            raise LayoutError("Bob's output space is smaller than his input space")
        res = uhlmann_decoder(st, target, fixed, movable=((bob,), mov_t))
        f = res.fidelity
        if explicit:
            decoded = res.isometry.apply(st).permute(target.layout.labels)
            f = float(min(1.0, abs(np.vdot(target.amplitudes, decoded.amplitudes)) ** 2))
        o.fidelity = f
        fids.append(f)
    return fids


# --- end-to-end runs ---------------------------------------------------------


@dataclass
class MergeReport:
    q_e: float
    q_e_bound: float
    mean_fidelity: float
    ebits_in: float
    ebits_out: float
    cbits: float
    trials: int
    seed: int | None
    q_e_stderr: float = 0.0
    fidelity_stderr: float = 0.0
    e_in: float = 0.0
    e_out: float = 0.0
    e_out_stderr: float = 0.0
    n: int = 1
    L: int = 1
    K: int = 1
    d_A: int = 1
    d_R: int = 1
    D: float = 1.0
    num_outcomes: int = 1
    typical_delta: float | None = None
    truncation_distance: float = 0.0
    trial_q_e: list[float] = field(default_factory=list)
    trial_fidelity: list[float] = field(default_factory=list)
    trial_e_out: list[float] = field(default_factory=list)

    def bound_chain(self, slack: float = 1e-6) -> dict[str, bool]:
        """Per-trial ``1 - F <= 2 sqrt(Q_e)`` and mean ``Q_e <= bound + 3 stderr``."""
        per_trial = all(1 - f <= 2 * math.sqrt(q) + slack for q, f in zip(self.trial_q_e, self.trial_fidelity))
        mean = 1 - self.mean_fidelity <= 2 * math.sqrt(self.q_e) + slack
        return {
            "infidelity_vs_qe": per_trial and mean,
            "qe_vs_bound": self.q_e <= self.q_e_bound + 3 * self.q_e_stderr,
        }

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _mean_stderr(xs: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(xs, dtype=float)
    if arr.size > 1:
        return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))
    return float(arr.mean()), 0.0


def prepare_merge_state(psi: PureState, n: int, K: int = 1, labels: tuple[str, str, str] = ("A", "B", "R"),
                        typical_delta: float | None = None, cap: int = DEFAULT_CAP) -> tuple[PureState, float]:
    """``psi^{(x) n}`` (optionally typicality-truncated, Alice restricted to her typical subspace)
    with ``Phi_K`` fused into Alice's and Bob's registers.

    Returns the state on ``(A, B, R)`` and the trace distance of the truncation.
    """
    a, b, r = labels
    psi = psi.permute([a, b, r])
    total = psi.layout.total_dim ** n * K ** 2
    if total > cap:
        raise DimensionCapError(f"merging needs dimension {total} > cap {cap}")
    dist = 0.0
    if typical_delta is None:
        big = n_copies(psi, n, cap)
    else:
        ts = truncate(psi, n, typical_delta, cap)
        basis = ts.typical_basis(a)
        big = ts.psi.apply(basis.conj().T, [a], [(a, basis.shape[1])])
        big = PureState(big.amplitudes / np.linalg.norm(big.amplitudes), big.layout).permute([a, b, r])
        dist = ts.trace_distance
    if K > 1:
        big = tensor(big, maximally_entangled(K, ("_A0", "_B0")))
        big = big.group([a, "_A0"], a).group([b, "_B0"], b)
    return big.permute([a, b, r]), dist


def run_merging(psi: PureState, n: int, L: int, K: int = 1, trials: int = 1, rng=None,
                labels: tuple[str, str, str] = ("A", "B", "R"), typical_delta: float | None = None,
                cap: int = DEFAULT_CAP, explicit: bool = True) -> MergeReport:
    """Merge ``psi^{(x) n}`` (plus ``Phi_K``) with random rank-``L`` instruments over ``trials`` draws.

    ``rng`` is an integer seed or a Generator; each trial uses its own
    spawned substream so results do not depend on evaluation order.
    """
    a, b, r = labels
    if n < 1 or K < 1 or trials < 1:
        raise BadInputError("n, K and trials must be >= 1")
    seed = _seed_of(rng)
    rng = as_rng(rng)
    state, dist = prepare_merge_state(psi, n, K, labels, typical_delta, cap)
    d_A = state.layout.dim_of(a)
    if L > d_A:
        raise BadInputError(f"L={L} exceeds Alice's dimension {d_A}")
    rho_B = state.reduced([b])
    rho_R = state.reduced([r])
    D = 1.0 / rho_B.purity()
    d_R = max(1, support_dim(rho_R, 1e-10))
    bound = qe_bound(L, d_A, d_R, D)
    target = merge_target(state, L, a)
    ents = EntropyReport.of(psi.permute([a, b, r]))
    e_in = n * ents.S(b) + math.log2(K)

    qs, fs, eouts = [], [], []
    num_outcomes = 0
    for sub in rng.spawn(trials):
        inst = build_instrument(d_A, L, sub)
        num_outcomes = inst.N + 1
        meas = post_measurement(state, inst, a)
        qs.append(quantum_error(meas, L, rho_R))
        fids = decode_outcomes(meas, L, target, b, explicit=explicit)
        fs.append(sum(o.probability * f for o, f in zip(meas.outcomes, fids)))
        # Bob's entanglement with Alice+R, unchanged by his local isometry
        eouts.append(sum(o.probability * subset_entropy(o.state, (A1, r)) for o in meas.outcomes))
    q_mean, q_se = _mean_stderr(qs)
    f_mean, f_se = _mean_stderr(fs)
    e_mean, e_se = _mean_stderr(eouts)
    return MergeReport(
        q_e=q_mean, q_e_bound=bound, mean_fidelity=f_mean, ebits_in=math.log2(K), ebits_out=math.log2(L),
        cbits=math.log2(num_outcomes), trials=trials, seed=seed, q_e_stderr=q_se, fidelity_stderr=f_se,
        e_in=e_in, e_out=e_mean, e_out_stderr=e_se, n=n, L=L, K=K, d_A=d_A, d_R=d_R, D=D,
        num_outcomes=num_outcomes, typical_delta=typical_delta, truncation_distance=dist,
        trial_q_e=qs, trial_fidelity=fs, trial_e_out=eouts,
    )


@dataclass(frozen=True)
class LedgerCheck:
    e_in: float
    e_out: float
    tolerance: float
    nominal_out: float

    @property
    def holds(self) -> bool:
        return self.e_out <= self.e_in + self.tolerance


def entanglement_ledger_check(report: MergeReport, psi: PureState, n: int | None = None,
                              labels: tuple[str, str, str] = ("A", "B", "R")) -> LedgerCheck:
    """Bob's average entanglement after the run must not exceed ``n S(B) + log K`` (+ ``0.05 n``).

    ``nominal_out = log L + n S(AB)`` is what a perfect run would hold.
    """
    a, b, r = labels
    n = report.n if n is None else n
    ents = EntropyReport.of(psi.permute([a, b, r]))
    e_in = n * ents.S(b) + math.log2(report.K)
    return LedgerCheck(e_in, report.e_out, 0.05 * n, math.log2(report.L) + n * ents.S(a, b))


def classical_cost_check(report: MergeReport, psi: PureState,
                         labels: tuple[str, str, str] = ("A", "B", "R")) -> tuple[float, float, str]:
    """Per-copy classical bits of the run next to ``I(A:R)``; the gap is reported, not judged."""
    a, b, r = labels
    ents = EntropyReport.of(psi.permute([a, b, r]))
    iar = ents.mutual([a], [r])
    rate = report.cbits / report.n
    note = f"cbits/n - I(A:R) = {rate - iar:+.4f} (optimality is asymptotic; no violation implied)"
    return rate, iar, note
