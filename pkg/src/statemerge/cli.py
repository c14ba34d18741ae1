"""Seeded command-line harness.

Every subcommand writes a single JSON or CSV document (to ``--out`` or
stdout) and exits with 0 on pass, 2 on a property violation, 3 when a
dimension cap is hit and 4 on bad input.  The default seed comes from the
``STATEMERGE_SEED`` environment variable (0 if unset).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from statemerge import __version__
from statemerge.errors import BadInputError, DimensionCapError, LayoutError, StateMergeError, TypicalityError
from statemerge.invariants import SUITES, run_suite, twirl_suite
from statemerge.merge import entanglement_ledger_check, prepare_merge_state, run_merging
from statemerge.qlin import (
    KrausChannel,
    PureState,
    basis_state,
    ghz,
    maximally_entangled,
    random_pure_state,
    support_dim,
    tensor,
)
from statemerge.regions import (
    assistance_protocol,
    distributed_compression_region,
    mac_rates,
    min_cut_assistance,
    simultaneous_assistance_experiment,
)
from statemerge.typ import certify_c1_to_c6, typical_projector

EXIT_OK, EXIT_VIOLATION, EXIT_RESOURCE, EXIT_BAD_INPUT = 0, 2, 3, 4
SEED_ENV = "STATEMERGE_SEED"
PRESETS = ("epr", "epr-ar", "product", "ghz3", "ghz4", "random", "pure-ab")


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2, which is reserved for property violations here
    def error(self, message):
        raise _ArgError(message)


# --- states --------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise BadInputError(f"expected comma-separated integers, got {text!r}") from None


def load_amplitude_file(path: str | Path) -> PureState:
    """JSON file ``{"parts": [[label, dim], ...], "amplitudes": [...]}``.

    Amplitudes are real numbers or ``[re, im]`` pairs; the vector is
    normalized on load.
    """
    try:
        data = json.loads(Path(path).read_text())
        parts = [(str(lab), int(d)) for lab, d in data["parts"]]
        amps = np.array([complex(a[0], a[1]) if isinstance(a, list) else complex(a) for a in data["amplitudes"]])
    except (OSError, ValueError, KeyError, TypeError, IndexError) as exc:
        raise BadInputError(f"cannot read amplitude file {path}: {exc}") from None
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise BadInputError("amplitude vector is zero")
    return PureState(amps / norm, parts)


def make_state(name: str, seed: int, dims: Sequence[int] | None = None) -> PureState:
    """Named preset on labels ``A, B, R`` (``ghz4`` uses ``A, B, C, R``)."""
    if name == "epr":
        return tensor(maximally_entangled(2, ("A", "B")), basis_state([("R", 1)], [0]))
    if name == "epr-ar":
        return tensor(maximally_entangled(2, ("A", "R")), basis_state([("B", 2)], [0])).permute(["A", "B", "R"])
    if name == "product":
        return basis_state([("A", 2), ("B", 2), ("R", 2)], [0, 0, 0])
    if name == "ghz3":
        return ghz(["A", "B", "R"])
    if name == "ghz4":
        return ghz(["A", "B", "C", "R"])
    rng = np.random.default_rng([seed, 0x5EED])
    if name == "random":
        d = list(dims) if dims else [2, 2, 2]
        if len(d) != 3:
            raise BadInputError("random preset needs three dimensions A,B,R")
        return random_pure_state(list(zip("ABR", d)), rng)
    if name == "pure-ab":
        d = list(dims) if dims else [2, 2]
        if len(d) != 2:
            raise BadInputError("pure-ab preset needs two dimensions A,B")
        return tensor(random_pure_state(list(zip("AB", d)), rng), basis_state([("R", 1)], [0]))
    if os.path.exists(name):
        return load_amplitude_file(name)
    raise BadInputError(f"unknown state {name!r}; presets are {', '.join(PRESETS)} or a JSON amplitude file")


# --- output -------------------------------------------------------------------------


def _scalar(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(str(_scalar(x)) for x in v)
    return "" if v is None else str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(rows[0]))
    for row in rows:
        w.writerow([_scalar(row[k]) for k in rows[0]])
    return buf.getvalue()


def _emit(args, payload: dict, rows: list[dict]) -> None:
    text = json.dumps(payload, indent=2) + "\n" if args.format == "json" else rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# --- subcommands -----------------------------------------------------------------


def cmd_merge(args) -> int:
    psi = make_state(args.state, args.seed, args.dims)
    labels = ("A", "B", "R")
    psi.layout.check_labels(labels)
    if args.L == "max":
        # largest rank Alice's prepared share can support
        state, _ = prepare_merge_state(psi, args.n, args.K, labels, args.delta, args.cap)
        L = max(1, support_dim(state.reduced(["A"]), 1e-10))
    else:
        try:
            L = int(args.L)
        except ValueError:
            raise BadInputError(f"--L must be an integer or 'max', got {args.L!r}") from None
    report = run_merging(psi, args.n, L, args.K, args.trials, args.seed, labels, args.delta, args.cap)
    chain = report.bound_chain()
    ledger = entanglement_ledger_check(report, psi)
    checks = {**chain, "entanglement_ledger": ledger.holds}
    payload = {"command": "merge", "state": args.state, **report.to_dict(), "checks": checks}
    summary = {k: v for k, v in report.to_dict().items() if not k.startswith("trial_")}
    _emit(args, payload, [{**summary, **checks}])
    return EXIT_OK if all(checks.values()) else EXIT_VIOLATION


def cmd_twirl(args) -> int:
    dims = args.dims or [2, 3, 4]
    if min(dims) < 2:
        raise BadInputError("twirl dimensions must be >= 2")
    rows = twirl_suite(args.seed, dims, args.samples, args.tol)
    _emit(args, {"command": "twirl", "seed": args.seed, "tolerance": args.tol, "rows": rows}, rows)
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_VIOLATION


def cmd_region(args) -> int:
    psi = make_state(args.state, args.seed, args.dims)
    parties = args.parties.split(",") if args.parties else [lab for lab in psi.layout.labels if lab != "R"]
    region = distributed_compression_region(psi, parties)
    ok = region.corners_valid()
    payload = {"command": "region", "state": args.state, **region.to_dict(), "corners_valid": ok}
    rows = [{**{f"R_{p}": r for p, r in zip(region.parties, c.rates)}, "ordering": ">".join(c.ordering)}
            for c in region.corners]
    _emit(args, payload, rows)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_assist(args) -> int:
    psi = make_state(args.state, args.seed, args.dims)
    order = args.order.split(",") if args.order else None
    cut = min_cut_assistance(psi, args.a, args.b)
    res = assistance_protocol(psi, args.a, args.b, order, args.n, args.trials, args.seed, args.cap)
    sim = simultaneous_assistance_experiment(psi, args.a, args.b, args.n, args.trials, args.seed, args.cap)
    payload = {
        "command": "assist", "state": args.state, "seed": args.seed,
        "min_cut": {"value": cut.value, "cut": list(cut.cut), "near_ties": [list(t) for t in cut.near_ties]},
        "sequential": res.to_dict(), "simultaneous": sim,
    }
    row = {"min_cut": cut.value, "cut": list(cut.cut), **{f"seq_{k}": v for k, v in res.to_dict().items()},
           "sim_per_copy": sim["per_copy"], "sim_gap": sim["gap"]}
    _emit(args, payload, [row])
    return EXIT_OK if res.within_min_cut else EXIT_VIOLATION


def make_channel(name: str) -> KrausChannel:
    inp, out = [("Ap", 2), ("Bp", 2)], [("C", 4)]
    if name == "identity":
        return KrausChannel((np.eye(4),), inp, out)
    if name == "constant":
        return KrausChannel(tuple(np.outer(np.eye(4)[0], np.eye(4)[k]) for k in range(4)), inp, out)
    if name == "dephase":
        return KrausChannel(tuple(np.diag(np.eye(4)[k]) for k in range(4)), inp, out)
    if name == "erase-b":
        # keeps A' and replaces B' by |0>
        ops = [np.kron(np.eye(2), np.outer([1, 0], np.eye(2)[k])) for k in range(2)]
        return KrausChannel(tuple(ops), inp, out)
    raise BadInputError(f"unknown channel {name!r}")


def cmd_mac(args) -> int:
    ch = make_channel(args.channel)
    region = mac_rates(ch, maximally_entangled(2, ("A", "Ap")), maximally_entangled(2, ("B", "Bp")))
    c1, c2 = region.corners
    ok = region.corners_valid() and c1.rates[0] >= c2.rates[0] - 1e-9 and c2.rates[1] >= c1.rates[1] - 1e-9
    payload = {"command": "mac", "channel": args.channel, **region.to_dict(), "checks_pass": ok}
    rows = [{"R_A": c.rates[0], "R_B": c.rates[1], "ordering": ">".join(c.ordering), "note": c.note}
            for c in region.corners]
    _emit(args, payload, rows)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_typ(args) -> int:
    try:
        p = [float(x) for x in args.p.split(",")]
    except ValueError:
        raise BadInputError(f"--p must be comma-separated floats, got {args.p!r}") from None
    tp = typical_projector(p, args.n, args.delta)
    cert = certify_c1_to_c6(tp)
    row = {"n": tp.n, "delta": tp.delta, "entropy": tp.entropy, "rank": tp.rank, "weight": tp.weight,
           "explicit": tp.explicit, **cert}
    _emit(args, {"command": "typ", "p": p, **row}, [row])
    return EXIT_OK if all(cert.values()) else EXIT_VIOLATION


def cmd_selftest(args) -> int:
    suites = [run_suite(name, args.count, args.seed).to_dict() for name in SUITES]
    twirl = twirl_suite(args.seed)
    suites.append({"name": "twirl", "count": len(twirl), "violations": sum(not r["pass"] for r in twirl),
                   "pass": all(r["pass"] for r in twirl)})
    ok = all(s["pass"] for s in suites)
    _emit(args, {"command": "selftest", "seed": args.seed, "count": args.count, "suites": suites, "pass": ok},
          suites)
    return EXIT_OK if ok else EXIT_VIOLATION


# --- parser ------------------------------------------------------------------------


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise BadInputError(f"{SEED_ENV}={raw!r} is not an integer") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"RNG seed (default ${SEED_ENV} or 0)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", default=None, help="output file (default stdout)")

    state = _Parser(add_help=False)
    state.add_argument("--state", default="epr", help=f"preset ({', '.join(PRESETS)}) or JSON amplitude file")
    state.add_argument("--dims", type=_int_list, default=None, help="dimensions for random presets")
    state.add_argument("--cap", type=int, default=2 ** 16, help="total dimension cap")

    parser = _Parser(prog="statemerge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"statemerge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("merge", parents=[common, state], help="random-measurement merging")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--L", default="1", help="outcome rank, or 'max' for the support rank of Alice's share")
    p.add_argument("--K", type=int, default=1, help="dimension of the extra maximally entangled pair")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--delta", type=float, default=None, help="typicality truncation (off by default)")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("twirl", parents=[common], help="Monte Carlo check of the twirl formula")
    p.add_argument("--dims", type=_int_list, default=None)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--tol", type=float, default=0.02)
    p.set_defaults(func=cmd_twirl)

    p = sub.add_parser("region", parents=[common, state], help="distributed compression region")
    p.add_argument("--parties", default=None, help="comma-separated labels (default: all but R)")
    p.set_defaults(func=cmd_region, state="pure-ab")

    p = sub.add_parser("assist", parents=[common, state], help="entanglement of assistance")
    p.add_argument("--a", default="A")
    p.add_argument("--b", default="B")
    p.add_argument("--order", default=None, help="comma-separated helper order")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_assist, state="ghz3")

    p = sub.add_parser("mac", parents=[common], help="multiple-access channel rates")
    p.add_argument("--channel", default="identity", choices=("identity", "constant", "dephase", "erase-b"))
    p.set_defaults(func=cmd_mac)

    p = sub.add_parser("typ", parents=[common], help="typical projector certificates")
    p.add_argument("--p", default="0.2,0.8", help="comma-separated spectrum")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--delta", type=float, default=0.1)
    p.set_defaults(func=cmd_typ)

    p = sub.add_parser("selftest", parents=[common], help="run every invariant suite")
    p.add_argument("--count", type=int, default=200, help="instances per suite")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.seed is None:
            args.seed = _default_seed()
        for name in ("trials", "n", "count", "samples"):
            if getattr(args, name, 1) < 1:
                raise BadInputError(f"--{name} must be >= 1")
        return args.func(args)
    except _ArgError as exc:
        print(f"statemerge: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except DimensionCapError as exc:
        print(f"statemerge: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (BadInputError, LayoutError, TypicalityError) as exc:
        print(f"statemerge: bad input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except StateMergeError as exc:
        print(f"statemerge: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
