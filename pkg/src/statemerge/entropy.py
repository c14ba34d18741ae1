"""Entropies in bits and numerical checkers for the standard inequalities."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

import numpy as np

from statemerge.errors import BadInputError, LayoutError
from statemerge.qlin import (
    PSD_TOL,
    DensityOperator,
    PureState,
    _mat,
    trace_distance,
)

EIG_CLIP = 1e-12
CHECK_SLACK = 1e-9


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > EIG_CLIP]
    return float(-np.sum(p * np.log2(p)))


def entropy_of_spectrum(evals) -> float:
    evals = np.asarray(evals, dtype=float)
    return shannon_entropy(evals[evals > EIG_CLIP])


def von_neumann_entropy(rho, check_trace: bool = True) -> float:
    """``-sum l log2 l`` over eigenvalues above ``1e-12``."""
    m = _mat(rho)
    if check_trace and abs(np.trace(m).real - 1.0) > 1e-9:
        raise BadInputError(f"entropy needs a normalized state, trace = {np.trace(m).real}")
    return entropy_of_spectrum(np.linalg.eigvalsh(m))


def _labels(x) -> tuple[str, ...]:
    return (x,) if isinstance(x, str) else tuple(x)


def _check_disjoint(*groups: tuple[str, ...]) -> None:
    seen: set[str] = set()
    for g in groups:
        if seen & set(g):
            raise LayoutError(f"overlapping label sets {groups}")
        seen |= set(g)


def subset_entropy(state: DensityOperator | PureState, labels: Iterable[str]) -> float:
    """``S(labels)``; the empty set has entropy 0."""
    labels = _labels(labels)
    if not labels:
        return 0.0
    if isinstance(state, PureState):
        comp = state.layout.complement(labels)
        if not comp:
            return 0.0
        # the smaller side gives the same spectrum more cheaply
        if state.layout.dim_of(comp) < state.layout.dim_of(labels):
            labels = comp
        s = np.linalg.svd(state.matrix(labels), compute_uv=False)
        return entropy_of_spectrum(s ** 2)
    return von_neumann_entropy(state.reduced(labels))


def conditional_entropy(rho, a, b) -> float:
    """``S(A|B) = S(AB) - S(B)``."""
    a, b = _labels(a), _labels(b)
    _check_disjoint(a, b)
    return subset_entropy(rho, a + b) - subset_entropy(rho, b)


def mutual_information(rho, a, b) -> float:
    a, b = _labels(a), _labels(b)
    _check_disjoint(a, b)
    return subset_entropy(rho, a) + subset_entropy(rho, b) - subset_entropy(rho, a + b)


def coherent_information(rho, a, b) -> float:
    """``I(A>B) = S(B) - S(AB)``, computed as ``-S(A|B)``."""
    return -conditional_entropy(rho, a, b)


@dataclass
class EntropyReport:
    """Entropy of every subset of a state's subsystems."""

    labels: tuple[str, ...]
    entropies: dict[frozenset, float] = field(default_factory=dict)

    @classmethod
    def of(cls, state, labels: Iterable[str] | None = None) -> "EntropyReport":
        labels = state.layout.labels if labels is None else tuple(labels)
        rep = cls(labels)
        rep.entropies[frozenset()] = 0.0
        for k in range(1, len(labels) + 1):
            for sub in combinations(labels, k):
                rep.entropies[frozenset(sub)] = subset_entropy(state, sub)
        return rep

    def S(self, *labels: str) -> float:
        return self.entropies[frozenset(labels)]

    def conditional(self, a: Iterable[str], b: Iterable[str]) -> float:
        a, b = frozenset(_labels(a)), frozenset(_labels(b))
        return self.entropies[a | b] - self.entropies[b]

    def mutual(self, a: Iterable[str], b: Iterable[str]) -> float:
        a, b = frozenset(_labels(a)), frozenset(_labels(b))
        return self.entropies[a] + self.entropies[b] - self.entropies[a | b]

    def coherent(self, a: Iterable[str], b: Iterable[str]) -> float:
        return -self.conditional(a, b)


# --- inequality checkers ------------------------------------------------------


def eta(x: float) -> float:
    """Fannes modulus: ``x - x log2 x`` below ``1/e``, ``x + log2(e)/e`` above."""
    if x <= 0:
        return 0.0
    if x <= 1 / np.e:
        return x - x * np.log2(x)
    return x + np.log2(np.e) / np.e


def fannes_check(rho, sigma, slack: float = CHECK_SLACK) -> bool:
    """``|S(rho) - S(sigma)| <= eta(||rho - sigma||_1) log2 d``."""
    m = _mat(rho)
    d = m.shape[0]
    lhs = abs(von_neumann_entropy(rho) - von_neumann_entropy(sigma))
    return lhs <= eta(trace_distance(rho, sigma)) * np.log2(d) + slack


def gentle_measurement_check(rho, x, slack: float = CHECK_SLACK) -> bool:
    """``||sqrt(X) rho sqrt(X) - rho||_1 <= 2 sqrt(1 - Tr rho X)`` for ``0 <= X <= I``."""
    m, xm = _mat(rho), np.asarray(_mat(x))
    evals, evecs = np.linalg.eigh(0.5 * (xm + xm.conj().T))
    if evals[0] < -PSD_TOL or evals[-1] > 1 + PSD_TOL:
        raise BadInputError("gentle measurement needs 0 <= X <= I")
    sx = (evecs * np.sqrt(np.clip(evals, 0.0, 1.0))) @ evecs.conj().T
    lhs = trace_distance(sx @ m @ sx, m)
    eps = max(0.0, 1.0 - float(np.trace(m @ xm).real))
    return lhs <= 2 * np.sqrt(eps) + slack


def strong_subadditivity_check(rho, a, b, c, slack: float = CHECK_SLACK) -> bool:
    """``S(A|BC) <= S(A|B)``."""
    a, b, c = _labels(a), _labels(b), _labels(c)
    _check_disjoint(a, b, c)
    return conditional_entropy(rho, a, b + c) <= conditional_entropy(rho, a, b) + slack


def subadditivity_check(rho, a, b, slack: float = CHECK_SLACK) -> bool:
    a, b = _labels(a), _labels(b)
    _check_disjoint(a, b)
    return subset_entropy(rho, a + b) <= subset_entropy(rho, a) + subset_entropy(rho, b) + slack


def chain_rule_gap(rho, a1, a2, b) -> float:
    """``I(A1A2>B) - I(A2>B) - I(A1>BA2)``; zero up to rounding."""
    a1, a2, b = _labels(a1), _labels(a2), _labels(b)
    _check_disjoint(a1, a2, b)
    lhs = coherent_information(rho, a1 + a2, b)
    rhs = coherent_information(rho, a2, b) + coherent_information(rho, a1, b + a2)
    return lhs - rhs


def chain_rule_check(rho, a1, a2, b, tol: float = CHECK_SLACK) -> bool:
    return abs(chain_rule_gap(rho, a1, a2, b)) <= tol
