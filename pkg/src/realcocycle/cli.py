"""
Command-line front end.

Every command reads a JSON file and writes a JSON report (to ``--out`` or
standard output).  Exit codes: 0 ok, 2 certificate failure, 3 malformed
input, 4 hypothesis failure (strict mode).  In diagnostic mode failed
inequalities are recorded in the report and the exit code stays 0.

Input files
-----------
case file
    ``{"cocycle": ..., "triples": [...], "params": {...}}`` as written by
    ``synth``.
matrix file
    ``{"matrix": {"re": [[...]], "im": [[...]]}}`` or a bare nested list.
    Optional keys: ``epsilon``, ``m``, ``gammas``.
spectrum file
    ``{"spectrum": [[re, im], ...], "omega": [...]}``, optionally with
    ``kappa``, ``tau``, ``multiplicities``; ``spectrum`` may also be a
    matrix record, whose eigenvalues are then used.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings

import numpy as np

from .certificates import Certificate
from .errors import (CertificateError, HypothesisError, MalformedInputError, ReductionError,
                     StarPropertyError)
from .harmonics import FrequencyVector
from .jordan import nilpotent_jnf
from .reduction import det_transport_check, full_pipeline, realify_step, residual_norm
from .resonance import analyze_classes, build_graph
from .serialization import dumps, matrix_from_dict, matrix_to_dict
from .spectral import adaptive_separation
from .synth import CaseFile, synth_case

__all__ = ["main", "build_parser", "synth_case", "EXIT_OK", "EXIT_CERTIFICATE", "EXIT_MALFORMED",
           "EXIT_HYPOTHESIS"]

EXIT_OK = 0
EXIT_CERTIFICATE = 2
EXIT_MALFORMED = 3
EXIT_HYPOTHESIS = 4

log = logging.getLogger("realcocycle")


class _Failed(Exception):
    """Strict-mode certificate failure carrying the report built so far."""

    def __init__(self, report):
        self.report = report


# --------------------------------------------------------------------------
# input helpers
# --------------------------------------------------------------------------

def _read_json(path):
    try:
        with open(path, encoding="utf-8") if path != "-" else sys.stdin as fh:
            return json.load(fh)
    except OSError as exc:
        raise MalformedInputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedInputError(f"{path} is not valid JSON: {exc}") from exc


def _read_case(path) -> CaseFile:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise MalformedInputError("case file must be a JSON object")
    return CaseFile.from_dict(data)


def _as_matrix(obj):
    if isinstance(obj, dict):
        return matrix_from_dict(obj)
    try:
        M = np.asarray(obj, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise MalformedInputError(f"bad matrix: {exc}") from exc
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.size == 0:
        raise MalformedInputError(f"matrix must be square and non-empty, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise MalformedInputError("matrix has non-finite entries")
    return M


def _read_matrix(path):
    data = _read_json(path)
    if isinstance(data, dict) and "matrix" in data:
        return _as_matrix(data["matrix"]), data
    if isinstance(data, dict) and "re" in data:
        return _as_matrix(data), {}
    return _as_matrix(data), {}


def _read_spectrum(path):
    data = _read_json(path)
    if not isinstance(data, dict) or "spectrum" not in data or "omega" not in data:
        raise MalformedInputError("spectrum file needs 'spectrum' and 'omega'")
    spec = data["spectrum"]
    try:
        if isinstance(spec, dict):
            vals = np.linalg.eigvals(matrix_from_dict(spec))
        else:
            arr = np.asarray(spec, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise MalformedInputError("spectrum must be a list of [re, im] pairs")
            vals = arr[:, 0] + 1j * arr[:, 1]
        omega = FrequencyVector(np.asarray(data["omega"], dtype=float),
                                float(data.get("kappa", 0.1)), float(data.get("tau", 1.5)))
    except MalformedInputError:
        raise
    except (TypeError, ValueError) as exc:
        raise MalformedInputError(f"bad spectrum file: {exc}") from exc
    return vals, omega, data.get("multiplicities")


def _cert_block(cert: Certificate, kind="certificate"):
    return [dict(x, kind=kind) for x in cert.to_list()]


def _settle(report, certs, mode):
    """Attach failures to the report; raise in strict mode."""
    failed = [x for c in certs for x in c.failures()]
    report["warnings"] = [f"{x.name}: {x.lhs:.3e} > {x.rhs:.3e}" for x in failed]
    report["passed"] = not failed
    if failed and mode == "strict":
        raise _Failed(report)
    return report


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_verify(args):
    case = _read_case(args.input)
    C = case.cocycle
    out, certs = [], []
    for j, T in enumerate(case.triples):
        res = residual_norm(C, T, args.grid)
        tr = det_transport_check(C, T, args.grid)
        cert = Certificate()
        cert.check("recorded-residual", res, 10 * max(T.residual_norm, 1e-300)
                   if math.isfinite(T.residual_norm) else math.inf,
                   note="recomputed residual <= 10 x recorded residual")
        cert.check("det-transport-identity", tr.identity_defect, 1e-8 * max(tr.scale, 1.0),
                   note="d det Z = Tr(A - B - F) det Z + Tr(R adj Z)")
        certs.append(cert)
        out.append({"triple": j, "residual": res, "recorded_residual": T.residual_norm,
                    "det_transport_defect": tr.max_defect, "det_identity_defect": tr.identity_defect,
                    "grid": tr.grid, "inequalities": _cert_block(cert)})
    return _settle({"command": "verify", "real_cocycle": C.real_flag, "triples": out}, certs, args.mode)


def cmd_jordan(args):
    M, meta = _read_matrix(args.input)
    eps = float(meta.get("epsilon", args.epsilon))
    res = nilpotent_jnf(M, eps, int(meta.get("m", 1)))
    report = {"command": "jordan", "J": matrix_to_dict(res.J), "S": matrix_to_dict(res.S),
              "S_inv": matrix_to_dict(res.S_inv), "F_residual": matrix_to_dict(res.F_residual),
              "log_bound_S": res.log_bound_S, "log_bound_F": res.log_bound_F, "k_used": res.k_used,
              "inequalities": _cert_block(res.certificate)}
    return _settle(report, [res.certificate], args.mode)


def cmd_separate(args):
    M, meta = _read_matrix(args.input)
    gammas = meta.get("gammas") or args.gammas
    if not gammas:
        raise MalformedInputError("separate needs gammas (file key 'gammas' or --gammas)")
    try:
        gammas = [float(g) for g in gammas]
    except (TypeError, ValueError) as exc:
        raise MalformedInputError(f"bad gammas: {exc}") from exc
    sep = adaptive_separation(M, gammas)
    dec = sep.decoupling
    report = {"command": "separate", "d0": sep.d0, "blocks": [list(b) for b in dec.blocks],
              "S": matrix_to_dict(sep.S), "S_inv": matrix_to_dict(sep.S_inv), "D": matrix_to_dict(sep.B),
              "log_bound_M": dec.log_bound_M, "residual": dec.residual,
              "inequalities": _cert_block(dec.certificate)
              + _cert_block(dec.diagnostics, "diagnostic")}
    return _settle(report, [dec.certificate], args.mode)


def cmd_resonances(args):
    vals, omega, mult = _read_spectrum(args.input)
    N = args.n_lattice if args.n_lattice is not None else 4
    rho = args.rho if args.rho is not None else 1e-6
    G = build_graph(vals, omega, N, rho, multiplicities=mult, certified=args.mode == "strict")
    try:
        rep = analyze_classes(G)
    except StarPropertyError as exc:
        report = {"command": "resonances", "graph": G.to_dict(), "error": str(exc)}
        if args.mode == "strict":
            raise HypothesisError("star-property") from exc
        report["passed"] = False
        return report
    report = {"command": "resonances", **rep.to_dict()}
    return _settle(report, [G.certificate, rep.certificate], args.mode)


def cmd_reduce(args):
    case = _read_case(args.input)
    params = case.pipeline_params(mode=args.mode, N=args.n_lattice, rho=args.rho)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        result = full_pipeline(case.cocycle, case.triples, params)
    report = {"command": "reduce", **result.to_dict(), "params": params.to_dict()}
    report["warnings"] = [str(w.message) for w in caught]
    certs = [r.certificate for r in result.reports]
    failed = [x for c in certs for x in c.failures()]
    report["passed"] = not failed
    if failed and args.mode == "strict":
        raise _Failed(report)
    return report


def cmd_realify(args):
    case = _read_case(args.input)
    out, certs = [], []
    for T in case.triples:
        R = realify_step(case.cocycle, T, mode=args.mode)
        certs.append(R.certificate)
        out.append({**R.to_dict(), "lambda": R.info["lambda"],
                    "inequalities": _cert_block(R.certificate)
                    + _cert_block(R.info["diagnostics"], "diagnostic")})
    return _settle({"command": "realify", "triples": out}, certs, args.mode)


def cmd_synth(args):
    case = synth_case(args.n, args.d, args.degree, args.gauge, args.seed, amplitude=args.amplitude)
    if args.mode:
        case.params["mode"] = args.mode
    if args.n_lattice is not None:
        case.params["N"] = args.n_lattice
    if args.rho is not None:
        case.params["rho"] = args.rho
    return case.to_dict()


COMMANDS = {"verify": cmd_verify, "jordan": cmd_jordan, "separate": cmd_separate,
            "resonances": cmd_resonances, "reduce": cmd_reduce, "realify": cmd_realify,
            "synth": cmd_synth}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=("strict", "diagnostic"), default="diagnostic")
    common.add_argument("--out", help="write the JSON report here instead of standard output")
    common.add_argument("--grid", type=int, default=None, help="grid points per dimension")
    common.add_argument("--n-lattice", type=int, default=None, dest="n_lattice",
                        help="lattice truncation N")
    common.add_argument("--rho", type=float, default=None, help="resonance radius rho")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="realcocycle", description=__doc__.split("\n\n")[0].strip())
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("verify", "reduce", "realify"):
        s = sub.add_parser(name, parents=[common], help=f"{name} a case file")
        s.add_argument("input")
    s = sub.add_parser("jordan", parents=[common], help="Jordan form of a nilpotent matrix")
    s.add_argument("input")
    s.add_argument("--epsilon", type=float, default=1e-3)
    s = sub.add_parser("separate", parents=[common], help="adaptive spectrum separation")
    s.add_argument("input")
    s.add_argument("--gammas", type=float, nargs="+")
    s = sub.add_parser("resonances", parents=[common], help="resonance graph and classes")
    s.add_argument("input")
    s = sub.add_parser("synth", parents=[common], help="synthetic case file")
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--degree", type=int, default=1)
    s.add_argument("--gauge", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--amplitude", type=float, default=0.02)
    return p


def _emit(report, path):
    text = dumps(report)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    func = COMMANDS[args.command]
    try:
        with warnings.catch_warnings():
            if args.mode == "diagnostic":
                warnings.simplefilter("ignore", RuntimeWarning)
            report = func(args)
    except _Failed as exc:
        _emit(exc.report, args.out)
        log.error("certificate failure: %s", "; ".join(exc.report.get("warnings", [])[:5]))
        return EXIT_CERTIFICATE
    except MalformedInputError as exc:
        log.error("malformed input: %s", exc)
        return EXIT_MALFORMED
    except HypothesisError as exc:
        log.error("%s", exc)
        _emit({"command": args.command, "passed": False, "hypothesis": exc.name,
               "step": exc.step, "lhs": exc.lhs, "rhs": exc.rhs}, args.out)
        return EXIT_HYPOTHESIS if args.mode == "strict" else EXIT_CERTIFICATE
    except CertificateError as exc:
        log.error("%s", exc)
        _emit({"command": args.command, "passed": False, "certificate": exc.name,
               "lhs": exc.lhs, "rhs": exc.rhs}, args.out)
        return EXIT_CERTIFICATE
    except ReductionError as exc:
        log.error("%s", exc)
        _emit({"command": args.command, "passed": False, "error": str(exc)}, args.out)
        return EXIT_CERTIFICATE
    _emit(report, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
