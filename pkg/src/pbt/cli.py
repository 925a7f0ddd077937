"""Command-line front end.

Exit codes: 0 ok, 2 validation, 3 resource cap, 4 convergence, 5 certificate failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import certificates, channel, core, linalg, sdp
from .errors import ConvergenceError, DomainError, ResourceError, ValidationError

SCHEMA = "pbt/1"
EXIT_OK, EXIT_VALIDATION, EXIT_RESOURCE, EXIT_CONVERGENCE, EXIT_CERTIFICATE = 0, 2, 3, 4, 5

METHOD_ALIASES = {"closed": "closed_form", "closed_form": "closed_form", "block": "block",
                  "blocks": "block", "dense": "dense", "sdp": "sdp", "choi": "choi"}
SWEEP_COLUMNS = ["N", "f_srm_closed", "f_srm_dense", "f_sdp", "f_classical_limit",
                 "asymptote_1_minus_1_over_2N"]


def resolve_tol(flag):
    if flag is not None:
        return flag
    env = os.environ.get("PBT_TOL")
    if env:
        try:
            return float(env)
        except ValueError:
            raise ValidationError(f"PBT_TOL={env!r} is not a number") from None
    return certificates.PSD_TOL


def _method(name: str) -> str:
    try:
        return METHOD_ALIASES[name]
    except KeyError:
        raise ValidationError(f"unknown method {name!r}; choose from {sorted(METHOD_ALIASES)}") from None


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from None


def load_matrix(path: str) -> np.ndarray:
    return linalg.matrix_from_json(_load_json(path))[0]


def load_program(path: str) -> channel.ProgramOperation:
    payload = _load_json(path)
    if not isinstance(payload, dict) or not isinstance(payload.get("kraus"), list):
        raise ValidationError(f"{path}: program file needs a 'kraus' list")
    ops = []
    for item in payload["kraus"]:
        try:
            re = np.array(item["re"], dtype=float)
            im = np.array(item.get("im", np.zeros_like(re)), dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}: malformed Kraus operator: {exc}") from None
        if re.ndim != 2 or re.shape[0] != re.shape[1] or im.shape != re.shape:
            raise ValidationError(f"{path}: Kraus operators must be square")
        ops.append(re + 1j * im)
    return channel.ProgramOperation(tuple(ops))


def fidelity_report(n: int, d: int, method: str, convention: str | None = None,
                    gap_tol: float | None = None, override: bool = False) -> core.FidelityReport:
    if method == "closed_form":
        if d != 2:
            raise DomainError("closed form is for qubits (d=2)")
        return core.fidelity_closed_form(n)
    if method == "block":
        if d != 2:
            raise DomainError("block method is for qubits (d=2)")
        return core.fidelity_blocks(n)
    if method == "dense":
        return core.fidelity_srm_dense(n, d, convention)
    if method == "choi":
        core.check_dense_cap(n, d)
        proc = channel.Processor.srm(n, d, convention)
        return channel.choi_fidelity(proc.resource, proc.povm, convention)
    if method == "sdp":
        return sdp.solve_primary(n, d, _options(gap_tol), override).report()
    raise ValidationError(f"unknown method {method!r}")


def _options(gap_tol):
    return sdp.SolverOptions() if gap_tol is None else sdp.SolverOptions(gap_tol=gap_tol)


def cmd_fidelity(args) -> dict:
    rep = fidelity_report(args.n, args.d, _method(args.method), args.convention, args.gap_tol,
                          args.override_size_cap)
    out = rep.to_json()
    bound = args.n / args.d ** 2
    out["F_upper_bound"] = bound
    out["within_bound"] = bool(rep.F <= bound + 1e-9)
    return out


def sweep_rows(n_max: int, d: int, methods, gap_tol=None) -> list:
    rows = []
    for n in range(1, n_max + 1):
        row = {"N": n, "f_srm_closed": None, "f_srm_dense": None, "f_sdp": None,
               "f_classical_limit": core.classical_limit(d),
               "asymptote_1_minus_1_over_2N": 1.0 - 1.0 / (2 * n)}
        if "closed_form" in methods and d == 2:
            row["f_srm_closed"] = core.fidelity_closed_form(n).f
        if "dense" in methods and d ** (n + 1) <= core.DENSE_DIM_CAP:
            row["f_srm_dense"] = core.fidelity_srm_dense(n, d).f
        if "sdp" in methods and d ** (n + 1) <= sdp.PRIMARY_DIM_CAP:
            row["f_sdp"] = sdp.solve_primary(n, d, _options(gap_tol)).report().f
        rows.append(row)
    return rows


def cmd_sweep(args) -> list:
    methods = {_method(m.strip()) for m in args.methods.split(",") if m.strip()}
    if args.n_max < 1:
        raise DomainError("--n-max must be at least 1")
    return sweep_rows(args.n_max, args.d, methods, args.gap_tol)


def cmd_certify(args) -> dict:
    tol = resolve_tol(args.tol)
    kinds = {"srm": ["srm"], "upper": ["upper"], "orthogonal": ["orthogonal"],
             "all": (["srm"] if args.d == 2 else []) + ["upper"]}[args.kind]
    reports = []
    for kind in kinds:
        if kind == "srm":
            if args.d != 2:
                raise DomainError("SRM certificate is for qubits (d=2)")
            reports.append(certificates.certify_srm_optimal(args.n, tol))
        elif kind == "upper":
            reports.append(certificates.certify_universal_upper(args.n, args.d, tol))
        else:
            reports.append(certificates.certify_orthogonal(args.n, args.d))
    out = {"certificates": [r.to_json() for r in reports],
           "passed": all(r.passed for r in reports), "F_upper_bound": args.n / args.d ** 2}
    return out


def cmd_sdp(args) -> dict:
    res = sdp.solve_primary(args.n, args.d, _options(args.gap_tol), args.override_size_cap)
    out = res.to_json(dump_matrices=args.dump_matrices)
    out["f"] = res.report().f
    return out


def cmd_simulate(args) -> dict:
    d = args.d
    if args.input:
        rho = load_matrix(args.input)
    else:
        rho = linalg.projector(linalg.ket(0, d))
    if rho.shape != (d, d):
        raise ValidationError(f"input matrix is {rho.shape[0]}x{rho.shape[1]}, expected {d}x{d}")
    linalg.check_hermitian(rho, 1e-9)
    program = load_program(args.program) if args.program else None
    core.check_dense_cap(args.n, d)
    proc = channel.Processor.srm(args.n, d, args.convention)
    outcomes, avg = proc.teleport(rho, program)
    F = channel.choi_fidelity(proc.resource, proc.povm).F
    return {"outcomes": [o.to_json() for o in outcomes], "average": linalg.matrix_to_json(avg),
            "F": F, "n": args.n, "d": d}


def cmd_spectrum(args) -> dict:
    return core.rho_spectrum(args.n).to_json()


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def render(payload, fmt: str) -> str:
    if fmt == "csv":
        rows = payload if isinstance(payload, list) else [payload]
        buf = io.StringIO()
        cols = SWEEP_COLUMNS if rows and "asymptote_1_minus_1_over_2N" in rows[0] else list(rows[0])
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) if not isinstance(row.get(c), (dict, list)) else json.dumps(row.get(c))
                             for c in cols])
        return buf.getvalue()
    if isinstance(payload, list):
        payload = {"rows": payload}
    payload = dict(payload, schema=SCHEMA)
    return json.dumps(payload, sort_keys=True) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pbt", description="Port-based teleportation workbench.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt="json"):
        sp.add_argument("--n", type=int, default=3, help="number of ports")
        sp.add_argument("--d", type=int, default=2, help="qudit dimension")
        sp.add_argument("--convention", choices=core.CONVENTIONS, default=None)
        sp.add_argument("--out", default=None, help="write output here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv"), default=fmt)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, default=None, help="PSD tolerance (overrides PBT_TOL)")
        sp.add_argument("--gap-tol", type=float, default=None)
        sp.add_argument("--override-size-cap", action="store_true")

    sp = sub.add_parser("fidelity", help="one fidelity value")
    common(sp)
    sp.add_argument("--method", default="closed")
    sp.set_defaults(func=cmd_fidelity)

    sp = sub.add_parser("sweep", help="fidelity table over N")
    common(sp, fmt="csv")
    sp.add_argument("--n-max", type=int, default=6)
    sp.add_argument("--methods", default="closed,dense")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("certify", help="optimality and bound certificates")
    common(sp)
    sp.add_argument("--kind", choices=("srm", "upper", "orthogonal", "all"), default="all")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("sdp", help="optimal fidelity over resources and measurements")
    common(sp)
    sp.add_argument("--dump-matrices", action="store_true")
    sp.set_defaults(func=cmd_sdp)

    sp = sub.add_parser("simulate", help="teleport an input through the SRM protocol")
    common(sp)
    sp.add_argument("--input", default=None, help="density matrix JSON (default |0><0|)")
    sp.add_argument("--program", default=None, help='JSON file {"kraus": [matrix, ...]}')
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("spectrum", help="exact spectrum of rho (qubits)")
    common(sp)
    sp.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        payload = args.func(args)
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    text = render(payload, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if isinstance(payload, dict) and payload.get("passed") is False:
        return EXIT_CERTIFICATE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
