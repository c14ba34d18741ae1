"""Seeded invariant suites.

Each suite draws ``count`` random instances from its own substream of the
seed and counts how many violate the property at ``1e-9`` slack.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from statemerge.entropy import (
    chain_rule_check,
    fannes_check,
    gentle_measurement_check,
    strong_subadditivity_check,
    subset_entropy,
)
from statemerge.merge import twirl_analytic, twirl_monte_carlo
from statemerge.qlin import (
    KrausChannel,
    fuchs_van_de_graaf_check,
    haar_unitary,
    maximally_entangled,
    norm_dim_inequality,
    random_density,
    random_pure_state,
)
from statemerge.regions import distributed_compression_region, mac_rates, min_cut_assistance
from statemerge.typ import certify_c1_to_c6, typical_projector

SLACK = 1e-9


@dataclass(frozen=True)
class SuiteResult:
    name: str
    count: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {"name": self.name, "count": self.count, "violations": self.violations, "pass": self.passed}


def _dims(rng, k: int, lo: int = 2, hi: int = 3) -> list[tuple[str, int]]:
    return [(lab, int(rng.integers(lo, hi + 1))) for lab in "ABC"[:k]]


def _ssa(rng) -> bool:
    rho = random_density(_dims(rng, 3), rng, rank=int(rng.integers(1, 5)))
    return strong_subadditivity_check(rho, "A", "B", "C", SLACK)


def _fvdg(rng) -> bool:
    d = int(rng.integers(2, 6))
    lay = [("A", d)]
    return fuchs_van_de_graaf_check(random_density(lay, rng, rank=int(rng.integers(1, d + 1))),
                                    random_density(lay, rng, rank=int(rng.integers(1, d + 1))), SLACK)


def _fannes(rng) -> bool:
    d = int(rng.integers(2, 6))
    lay = [("A", d)]
    rho, sigma = random_density(lay, rng), random_density(lay, rng)
    # mix towards rho so that small distances are exercised too
    t = rng.random() ** 3
    return fannes_check(rho.matrix, (1 - t) * rho.matrix + t * sigma.matrix, SLACK)


def _gentle(rng) -> bool:
    d = int(rng.integers(2, 6))
    rho = random_density([("A", d)], rng, rank=int(rng.integers(1, d + 1)))
    u = haar_unitary(d, rng)
    x = (u * rng.random(d) ** 0.3) @ u.conj().T
    return gentle_measurement_check(rho, x, SLACK)


def _normdim(rng) -> bool:
    d = int(rng.integers(2, 7))
    r = int(rng.integers(1, d + 1))
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    h = g @ np.diag(rng.standard_normal(r)) @ g.conj().T
    return norm_dim_inequality(h, slack=SLACK)


def _chain(rng) -> bool:
    rho = random_density(_dims(rng, 3), rng, rank=int(rng.integers(1, 5)))
    return chain_rule_check(rho, "A", "B", "C", SLACK)


def _compression(rng) -> bool:
    psi = random_pure_state(_dims(rng, 3) + [("R", int(rng.integers(1, 4)))], rng)
    reg = distributed_compression_region(psi, ["A", "B", "C"])
    s_all = subset_entropy(psi, ["A", "B", "C"])
    sums_ok = all(abs(sum(c.rates) - s_all) <= SLACK for c in reg.corners)
    return reg.corners_valid(SLACK) and sums_ok and len(reg.corners) == 6


def _mincut(rng) -> bool:
    psi = random_pure_state([("A", 2), ("B", 2), ("C", 2), ("D", int(rng.integers(1, 3)))], rng)
    res = min_cut_assistance(psi, "A", "B")
    sym = all(abs(c.s_at - c.s_btbar) <= SLACK for c in res.cuts)
    return sym and res.value >= -SLACK


def _mac(rng) -> bool:
    d_out, k = int(rng.integers(2, 5)), 2
    while d_out * k < 4:
        k += 1
    v = haar_unitary(d_out * k, rng)[:, :4].reshape(d_out, k, 4)
    ch = KrausChannel(tuple(v[:, j, :] for j in range(k)), [("Ap", 2), ("Bp", 2)], [("C", d_out)])
    psi_a = random_pure_state([("A", 2), ("Ap", 2)], rng)
    psi_b = random_pure_state([("B", 2), ("Bp", 2)], rng)
    reg = mac_rates(ch, psi_a, psi_b)
    (c1, c2) = reg.corners
    # conditioning on the other sender can only help
    return (c1.rates[0] >= c2.rates[0] - SLACK and c2.rates[1] >= c1.rates[1] - SLACK
            and reg.corners_valid(SLACK))


def _typ(rng) -> bool:
    d = int(rng.integers(2, 4))
    p = rng.dirichlet(np.ones(d))
    n = int(rng.integers(4, 11 if d == 2 else 9))
    tp = typical_projector(p, n, float(rng.uniform(0.05, 0.3)), mode="enumerate")
    cert = certify_c1_to_c6(tp)
    return all(cert[k] for k in ("C2", "C3", "C4", "C5", "C6"))


SUITES: dict[str, Callable[[np.random.Generator], bool]] = {
    "ssa": _ssa,
    "fuchs_van_de_graaf": _fvdg,
    "fannes": _fannes,
    "gentle_measurement": _gentle,
    "norm_dimension": _normdim,
    "chain_rule": _chain,
    "compression_corners": _compression,
    "min_cut_symmetry": _mincut,
    "mac_conditioning": _mac,
    "typicality": _typ,
}


def run_suite(name: str, count: int, seed: int) -> SuiteResult:
    check = SUITES[name]
    idx = list(SUITES).index(name)
    rngs = np.random.default_rng([seed, idx]).spawn(count)
    return SuiteResult(name, count, sum(0 if check(r) else 1 for r in rngs))


def twirl_suite(seed: int, dims=(2, 3, 4), samples: int = 2000, tol: float = 0.02) -> list[dict]:
    """Entrywise gap between the Monte Carlo and closed-form twirl for every ``(d, L)``."""
    rows = []
    rng = np.random.default_rng([seed, len(SUITES)])
    for d in dims:
        for L in range(1, d + 1):
            sub = rng.spawn(1)[0]
            mc = twirl_monte_carlo(d, L, samples, sub)
            gap = float(np.max(np.abs(mc - twirl_analytic(d, L))))
            rows.append({"d": d, "L": L, "samples": samples, "max_gap": gap,
                         "trace": float(np.trace(mc).real), "pass": gap <= tol})
    return rows

