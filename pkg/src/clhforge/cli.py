"""Command-line entry point.

Exit codes: 0 success / accept, 1 reject or violation, 2 malformed input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .algebra import DEFAULT_SEED
from .circuit import apply_circuit, build_circuit
from .errors import BudgetExceeded, ClhError, SchemaError, StructureError
from .generators import GeneratorSpec, generate
from .graph import DEFAULT_BUDGET as AUDIT_BUDGET, build_interaction_graph, local_expansion_error
from .isolation import run_isolation
from .model import energy_of_state, load_instance, save_instance, validate_instance
from .oracle import full_spectrum, integrality_check
from .report import make_oracle, pipeline
from .witness import load_witness, save_witness, verify_witness

EXIT_OK, EXIT_REJECT, EXIT_MALFORMED = 0, 1, 2


def _read_instance(path: str):
    return load_instance(Path(path).read_bytes())


def _emit(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if path:
        Path(path).write_text(text + "\n")


def cmd_validate(args) -> int:
    report = validate_instance(_read_instance(args.file))
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_OK if report.ok else EXIT_REJECT


def cmd_expansion(args) -> int:
    inst = _read_instance(args.file)
    k = args.k if args.k is not None else max(inst.locality, 1)
    report = local_expansion_error(build_interaction_graph(inst), k, args.budget)
    print(report.table())
    _emit(report.as_dict(), args.json)
    return EXIT_OK


def cmd_isolate(args) -> int:
    inst = _read_instance(args.file)
    run, ledger, witness = run_isolation(inst, make_oracle(args.oracle), args.seed, args.budget)
    Path(args.witness).write_bytes(save_witness(witness))
    lo, hi = run.interval
    print(f"iterations {run.T}  discarded {len(run.R_bad)}/{inst.m}  "
          f"eps {float(ledger.epsilon):.6f}  gamma {float(ledger.gamma):.6f}")
    print(f"E_kept {run.E_kept:.9f}  interval [{lo:.9f}, {hi:.9f}]")
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = _read_instance(args.file)
    witness = load_witness(Path(args.witness).read_bytes())
    result = verify_witness(inst, witness)
    if result.accepted:
        lo, hi = result.interval
        print(f"accept  interval [{lo:.9f}, {hi:.9f}]")
        return EXIT_OK
    where = "" if result.step is None else f" at step {result.step}"
    print(f"reject  check ({result.failed_check}){where}: {result.message}")
    return EXIT_REJECT


def _num(x: float, digits: int) -> str:
    # round first so round-off below the printed precision never shows as -0
    return f"{round(float(x), digits) + 0.0:.{digits}f}"


def cmd_oracle(args) -> int:
    inst = _read_instance(args.file)
    spec = full_spectrum(inst, args.budget)
    ok = integrality_check(spec, inst.m) if spec.complete else None
    print(f"lambda      {_num(spec.ground_energy, 9)}")
    deg = "n/a" if spec.ground_degeneracy is None else spec.ground_degeneracy
    print(f"degeneracy  {deg}")
    label = "lowest     " if spec.complete else "levels     "
    print(label + " " + " ".join(_num(x, 6) for x in spec.eigenvalues[:16]))
    print(f"integral    {ok if ok is not None else 'n/a (partial spectrum)'}")
    return EXIT_OK if ok in (True, None) else EXIT_REJECT


def cmd_circuit(args) -> int:
    inst = _read_instance(args.file)
    witness = load_witness(Path(args.witness).read_bytes())
    result = verify_witness(inst, witness)
    if not result.accepted:
        print(f"reject  check ({result.failed_check}): {result.message}")
        return EXIT_REJECT
    circ = build_circuit(result.run, witness)
    psi = apply_circuit(circ, inst, args.budget)
    summary = circ.as_dict()
    summary["energy"] = energy_of_state(inst, psi)
    summary["interval"] = list(result.interval)
    print(json.dumps(summary, indent=2))
    if args.state:
        np.save(args.state, psi)
    return EXIT_OK


def _gen_spec(args) -> GeneratorSpec:
    p: dict = {}
    if args.kind == "toric":
        p["L"] = args.L
    elif args.kind == "csp_embed":
        text = Path(args.clauses).read_text() if Path(args.clauses).exists() else args.clauses
        p["clauses"] = json.loads(text)
        p["dims"] = args.dims
    elif args.kind == "planted_sat":
        p.update(n=args.n, count=args.count, k=args.k, overlap_cap=args.overlap_cap)
    elif args.kind == "commuting_pauli":
        p.update(n=args.n, k=args.k, count=args.count)
    elif args.kind == "design_expander":
        p.update(n=args.n, k=args.k, degree=args.degree, overlap_cap=args.overlap_cap or 1,
                 mode=args.mode, dims=args.dims)
    return GeneratorSpec(args.kind, p, args.seed)


def cmd_gen(args) -> int:
    inst = generate(_gen_spec(args))
    Path(args.out).write_bytes(save_instance(inst))
    print(f"wrote {args.out}: n={inst.n} m={inst.m} k={inst.locality} d={inst.d}")
    return EXIT_OK


def cmd_report(args) -> int:
    inst = _read_instance(args.file)
    report, *_ = pipeline(inst, args.seed, args.oracle)
    print(report.table())
    _emit(report.as_dict(), args.json)
    ok = report.accepted and (report.bound_holds or not report.applicable)
    return EXIT_OK if ok else EXIT_REJECT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clhforge", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check commutation, projection and locality")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("expansion", help="audit local expansion of the interaction graph")
    p.add_argument("file")
    p.add_argument("--k", type=int)
    p.add_argument("--budget", type=int, default=AUDIT_BUDGET)
    p.add_argument("--json")
    p.set_defaults(func=cmd_expansion)

    p = sub.add_parser("isolate", help="run the isolation loop and write a witness")
    p.add_argument("file")
    p.add_argument("--witness", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--oracle", choices=["exact", "lowest"], default="exact")
    p.add_argument("--budget", type=int, default=AUDIT_BUDGET, help="expansion-audit subset budget")
    p.set_defaults(func=cmd_isolate)

    p = sub.add_parser("verify", help="verify a witness against an instance")
    p.add_argument("file")
    p.add_argument("witness")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="exact spectrum at desk scale")
    p.add_argument("file")
    p.add_argument("--budget", type=int, default=2**14)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("circuit", help="build the depth-2 circuit from a verified witness")
    p.add_argument("file")
    p.add_argument("witness")
    p.add_argument("--state", help="write the prepared state vector (.npy)")
    p.add_argument("--budget", type=int, default=2**14)
    p.set_defaults(func=cmd_circuit)

    p = sub.add_parser("gen", help="generate an instance")
    p.add_argument("kind", choices=["toric", "csp_embed", "planted_sat", "commuting_pauli", "design_expander"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--L", type=int, default=2)
    p.add_argument("--clauses", help="JSON list of [support, forbidden assignments] (text or file)")
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--overlap-cap", type=int, default=None)
    p.add_argument("--mode", choices=["diagonal", "rotated", "pauli"], default="diagonal")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("report", help="full pipeline with a run report")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--oracle", choices=["exact", "lowest"], default="exact")
    p.add_argument("--json")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SchemaError, StructureError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (ClhError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REJECT


if __name__ == "__main__":
    sys.exit(main())
