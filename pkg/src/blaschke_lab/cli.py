"""Command-line entry point: ``blaschke-lab <subcommand> [options]``.

Every run prints a JSON report with ``"schema": 1`` and the resolved
options.  Subcommands whose result is a JSON document also write the report
to ``--out``; the others write their CSV or grid file there.  Exit codes:
0 on success, 2 on invalid input, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io, welding
from .circle import spectrum
from .errors import BlaschkeError, NumericalError, ValidationError
from .grid import save_field
from .moduli import lambda1_d3, make_standard
from .spectra import attracting_polar, classify_case, dot_r_residual, index_terms, witness_table
from .uniformize import (
    MateConfig,
    RationalMap,
    coefficient_distance,
    index_sum_check,
    markers_from_blaschke,
    mate,
    rational_from_markers,
    to_polynomial,
)

JSON_OUT = {"index-check", "classify-degeneracy", "mate", "to-polynomial", "d3-sa-check", "markers-roundtrip"}


def _monomial(d: int):
    return make_standard(d, [0j] * (d - 1))


def _mate_cfg(a) -> MateConfig:
    return MateConfig(N=a.grid, L=a.box, M=a.circle_samples, extension=a.extension)


# -- subcommands -----------------------------------------------------------

def cmd_spectrum(a) -> dict:
    f = io.read_params(a.params)
    spec = spectrum(f, a.max_period)
    if a.out:
        io.write_spectrum_csv(a.out, spec)
    return {
        "cycles": len(spec.entries),
        "max_imag_residue": max((e.imag_residue for e in spec.entries), default=0.0),
        "min_multiplier": min((e.multiplier for e in spec.entries), default=None),
    }


def cmd_index_check(a) -> dict:
    f = io.read_params(a.params)
    lhs, rhs = index_terms(f, a.n)
    return {"residual": lhs - rhs, "lhs": lhs, "rhs": rhs}


def cmd_conjugacy(a) -> dict:
    left = io.read_params(a.left or a.params) if (a.left or a.params) else None
    if left is None:
        raise ValidationError("conjugacy needs --left (or --params)")
    right = io.read_params(a.right) if a.right else _monomial(left.d)
    h = welding.circle_conjugacy(left, right, M=a.circle_samples)
    if a.out:
        io.write_circle_csv(a.out, h)
    return {"M": h.M, "conjugacy_residual": welding.conjugacy_residual(left, right, h)}


def cmd_derivative(a) -> dict:
    path = io.read_path(a.path)
    rows = witness_table(path, a.t0, a.max_period, a.step)
    if a.out:
        io.write_witness_csv(a.out, a.t0, rows)
    return {
        "cycles": len(rows),
        "witness": max(abs(r.dlambda_dt) for r in rows),
        "max_fd_error": max(r.fd_error for r in rows),
    }


def cmd_classify(a) -> dict:
    path = io.read_path(a.path)
    p = attracting_polar(path, a.t0, a.step)
    n_max = max(8, a.max_period)
    res = [dot_r_residual(p, n) for n in range(1, n_max + 1)]
    return {
        "r": p.r,
        "theta": p.theta,
        "r_dot": p.r_dot,
        "theta_dot": p.theta_dot,
        "residuals": [v for v, _ in res],
        "conventional": any(c for _, c in res),
        "case": classify_case(p, n_max).value,
    }


def cmd_weld(a) -> dict:
    cfg = _mate_cfg(a)
    left = io.read_params(a.left)
    right = io.read_params(a.right) if a.right else left
    fields, resid = [], []
    for f in (left, right):
        h = welding.circle_conjugacy(f, _monomial(f.d), M=cfg.M)
        resid.append(welding.conjugacy_residual(f, _monomial(f.d), h))
        fields.append(welding.beltrami_of(welding.extend_qc(h, cfg.extension, cfg.solver.grid)))
    sb = welding.mated_beltrami(*fields)
    if a.out:
        save_field(a.out, sb.plane())
    return {"k": sb.k, "k_left": fields[0].k, "k_right": fields[1].k, "conjugacy_residuals": resid}


def cmd_mate(a) -> dict:
    left = io.read_params(a.left)
    right = io.read_params(a.right) if a.right else left
    F = mate(left, right, _mate_cfg(a))
    out = F.to_json()
    out["diagnostics"] = F.diagnostics
    out["index_sum_residuals"] = [index_sum_check(F, n) for n in (1, 2, 3)]
    out["multiplier_at_zero"] = F.multiplier_at_zero()
    out["multiplier_at_infinity"] = F.multiplier_at_infinity()
    return out


def cmd_to_polynomial(a) -> dict:
    f = io.read_params(a.params)
    return to_polynomial(f, _mate_cfg(a)).to_json()


def cmd_d3_sa_check(a) -> dict:
    axis = np.linspace(-0.9, 0.9, a.n)
    worst, dev = 0.0, []
    count = 0
    for x in axis:
        for y in axis:
            z = complex(x, y)
            if abs(z) > 0.9 + 1e-12:
                continue
            rep = lambda1_d3(z)
            worst = max(worst, abs(rep.numerical - rep.closed_form))
            dev.append(rep.deviation_from_printed)
            count += 1
    return {
        "points": count,
        "max_closed_form_error": worst,
        "printed_formula_deviation_min": min(dev),
        "printed_formula_deviation_max": max(dev),
    }


def cmd_markers_roundtrip(a) -> dict:
    rng = np.random.default_rng(a.seed)
    worst = 0.0
    for i in range(a.n):
        d = (2, 3, 4)[i % 3]
        r = 0.9 * np.sqrt(rng.uniform(size=d - 1))
        zeros = r * np.exp(2j * np.pi * rng.uniform(size=d - 1))
        f = make_standard(d, zeros)
        F = rational_from_markers(markers_from_blaschke(f))
        R = RationalMap.from_blaschke(f)
        worst = max(worst, coefficient_distance(F, R))
    return {"samples": a.n, "max_coefficient_error": worst}


# -- parser ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Usage errors become ValidationError so they are reported like others."""

    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="blaschke-lab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, *opts, **defaults):
        p = sub.add_parser(name)
        p.set_defaults(func=func)
        for o in opts:
            OPTIONS[o](p, defaults.get(o.lstrip("-").replace("-", "_")))
        p.add_argument("--out", default=None, help="output file")
        return p

    add("spectrum", cmd_spectrum, "--params", "--max-period", max_period=6)
    add("index-check", cmd_index_check, "--params", "--n", n=1)
    add("conjugacy", cmd_conjugacy, "--params", "--left", "--right", "--circle-samples")
    add("derivative", cmd_derivative, "--path", "--t0", "--step", "--max-period", max_period=6)
    add("classify-degeneracy", cmd_classify, "--path", "--t0", "--step", "--max-period", max_period=8)
    grid_opts = ("--left", "--right", "--grid", "--box", "--circle-samples", "--extension")
    add("weld", cmd_weld, *grid_opts)
    add("mate", cmd_mate, *grid_opts)
    add("to-polynomial", cmd_to_polynomial, "--params", "--grid", "--box", "--circle-samples", "--extension")
    add("d3-sa-check", cmd_d3_sa_check, "--n", n=21)
    add("markers-roundtrip", cmd_markers_roundtrip, "--n", "--seed", n=50)
    return ap


def _opt(flag, **kw):
    def adder(p, default):
        args = dict(kw)
        if default is not None:
            args["default"] = default
        p.add_argument(flag, **args)

    return adder


OPTIONS = {
    "--params": _opt("--params", help="parameter file {d, zeros}"),
    "--left": _opt("--left", help="parameter file of the left map"),
    "--right": _opt("--right", help="parameter file of the right map"),
    "--path": _opt("--path", required=True, help="path file {d, curves}"),
    "--max-period": _opt("--max-period", type=int, default=6),
    "--n": _opt("--n", type=int, default=1),
    "--t0": _opt("--t0", type=float, default=0.0),
    "--step": _opt("--step", type=float, default=1e-5),
    "--grid": _opt("--grid", type=int, default=512),
    "--box": _opt("--box", type=float, default=4.0),
    "--circle-samples": _opt("--circle-samples", type=int, default=welding.DEFAULT_M),
    "--extension": _opt("--extension", choices=["de", "ba"], default="de"),
    "--seed": _opt("--seed", type=int, default=0),
}

REQUIRED = {
    "spectrum": ("params",),
    "index-check": ("params",),
    "weld": ("left",),
    "mate": ("left",),
    "to-polynomial": ("params",),
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except ValidationError as exc:
        report = {"schema": io.SCHEMA, "command": None, "options": {"argv": list(argv or sys.argv[1:])},
                  "status": "invalid", "error": {"type": "UsageError", "message": str(exc)}}
        sys.stdout.write(io.dumps(report))
        return 2
    options = {k: v for k, v in sorted(vars(a).items()) if k not in ("func", "command")}
    report = {"schema": io.SCHEMA, "command": a.command, "options": options}
    code = 0
    try:
        for name in REQUIRED.get(a.command, ()):
            if getattr(a, name) is None:
                raise ValidationError(f"{a.command} needs --{name}")
        report["result"] = a.func(a)
        report["status"] = "ok"
    except ValidationError as exc:
        code = 2
        report["status"] = "invalid"
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
    except (NumericalError, BlaschkeError, np.linalg.LinAlgError) as exc:
        code = 3
        report["status"] = "failed"
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
    text = io.dumps(report)
    if a.out and a.command in JSON_OUT:
        with open(a.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return code


def main() -> None:
    sys.exit(dispatch())
