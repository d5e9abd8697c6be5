"""Command-line front end.

Exit codes: 0 success, 2 parse/usage failure, 3 invariant failure, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .algebra import (
    build_gellmann_basis,
    choi_min_eigenvalue,
    lie_product,
    random_hermitian,
    structure_constants,
    verify_lie_jordan,
)
from .errors import (
    AffinityError,
    AmbiguousSpectrumError,
    BlowUpError,
    CertificationError,
    DimensionError,
    GeoflowError,
    IntegrationError,
    InvariantError,
)
from .fields import (
    affinity_report,
    bracket,
    gkls_decomposition,
    gradient_field,
    hamiltonian_field,
    to_pauli_convention,
)
from .flow import (
    IntegratorConfig,
    channel,
    integrate,
    oracle_consistency,
    verify_semigroup,
)
from .io import (
    CONVENTION_NOTES,
    ModelParseError,
    ModelSpec,
    atomic_write,
    load_model,
    read_trajectory_csv,
    trajectory_csv,
)
from .plot import bloch_svg
from .stability import (
    LASALLE_TOL,
    fixed_points,
    lasalle_certify,
    purity_lie_derivative,
)
from .statespace import diagnostics, sample_state

EXIT_OK, EXIT_PARSE, EXIT_INVARIANT, EXIT_NUMERICAL = 0, 2, 3, 4


class UsageError(GeoflowError):
    pass


def thread_count() -> int:
    raw = os.environ.get("GEOFLOW_THREADS")
    if raw is None or raw == "":
        return max(1, os.cpu_count() or 1)
    try:
        val = int(raw)
    except ValueError:
        raise UsageError(f"GEOFLOW_THREADS must be a positive integer, got {raw!r}") from None
    if val < 1:
        raise UsageError(f"GEOFLOW_THREADS must be a positive integer, got {raw!r}")
    return val


def _parse_vector(text: str) -> np.ndarray:
    try:
        vals = [float(t) for t in text.replace(" ", "").split(",") if t != ""]
    except ValueError:
        raise UsageError(f"cannot parse --x0 {text!r}; expected comma-separated numbers") from None
    return np.array(vals)


def _emit(obj: dict, as_json: bool, text: str, out: str | None = None) -> None:
    payload = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if out:
        atomic_write(out, payload + "\n")
    print(payload if as_json else text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _context(spec: ModelSpec):
    basis = build_gellmann_basis(spec.n)
    return basis, structure_constants(basis)


def _field_external(f, spec: ModelSpec):
    return to_pauli_convention(f) if spec.convention == "pauli" else f


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _initial_points(args, spec: ModelSpec, basis) -> list[np.ndarray]:
    if args.x0:
        pts = []
        for text in args.x0:
            x = spec.to_internal(_parse_vector(text))
            if x.shape != (basis.m,):
                raise UsageError(f"--x0 needs {basis.m} coordinates for n={spec.n}, got {x.size}")
            pts.append(x)
    else:
        pts = [sample_state(spec.n, spec.n, args.seed, basis).x]
    for x in pts:
        if not diagnostics(x, basis).is_state:
            raise InvariantError("initial point is not a density matrix (negative eigenvalue)")
    return pts


def cmd_simulate(args) -> int:
    spec = load_model(args.model)
    basis, sc = _context(spec)
    if args.t_end <= 0 and not args.allow_negative:
        raise UsageError("--t-end must be positive (use --allow-negative for backward integration)")
    if args.dt <= 0:
        raise UsageError("--dt must be positive")
    gamma = gkls_decomposition(spec.model, basis, sc).total
    pts = _initial_points(args, spec, basis)
    nsteps = max(1, math.ceil(abs(args.t_end) / args.dt - 1e-9))
    save_every = args.save_every or max(1, nsteps // max(1, args.samples))
    cfg = IntegratorConfig(args.method, args.dt, save_every=save_every)

    def run(x):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return integrate(gamma, x, args.t_end, cfg)

    workers = min(thread_count(), len(pts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            trajs = list(ex.map(run, pts))
    else:
        trajs = [run(x) for x in pts]

    outputs = []
    for k, (x, traj) in enumerate(zip(pts, trajs)):
        text = trajectory_csv(traj, basis, spec)
        meta = {
            "command": "simulate",
            "version": __version__,
            "n": spec.n,
            "basis_convention": spec.convention,
            "convention_note": CONVENTION_NOTES[spec.convention],
            "model": spec.doc,
            "x0": spec.to_external(x).tolist(),
            "seed": args.seed,
            "t_end": args.t_end,
            "integrator": {k2: v for k2, v in traj.meta.items()},
            "rows": len(traj),
            "final": spec.to_external(traj.points[-1]).tolist(),
        }
        if args.out:
            path = Path(args.out)
            if len(pts) > 1:
                path = path.with_name(f"{path.stem}_{k}{path.suffix or '.csv'}")
            atomic_write(path, text)
            meta["csv"] = str(path)
            atomic_write(path.with_suffix(".json"), json.dumps(meta, indent=2, sort_keys=True,
                                                                default=_json_default) + "\n")
        elif not args.json:
            sys.stdout.write(text)
        outputs.append(meta)
    if args.json:
        print(json.dumps(outputs[0] if len(outputs) == 1 else outputs, indent=2, sort_keys=True,
                         default=_json_default))
    elif args.out:
        for meta in outputs:
            print(f"wrote {meta['csv']} ({meta['rows']} rows, convention {spec.convention})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------


def _field_dict(f) -> dict:
    rep = affinity_report(f)
    return {
        "constant": f.coeff0.tolist(),
        "linear": f.coeff1.tolist(),
        "quadratic_norm": rep.quadratic_norm,
        "cubic_norm": rep.cubic_norm,
        "affine": rep.is_affine,
    }


def _fmt_row(v) -> str:
    return "  ".join(f"{x: .6g}" for x in v)


def _field_text(name: str, f) -> str:
    rep = affinity_report(f)
    lines = [f"{name}:", f"  constant: {_fmt_row(f.coeff0)}", "  linear:"]
    lines += [f"    {_fmt_row(row)}" for row in f.coeff1]
    lines.append(f"  |quadratic| = {rep.quadratic_norm:.3e}")
    return "\n".join(lines)


def cmd_decompose(args) -> int:
    spec = load_model(args.model)
    basis, sc = _context(spec)
    dec = gkls_decomposition(spec.model, basis, sc)
    parts = {name: _field_external(f, spec) for name, f in
             (("X", dec.hamiltonian), ("Y", dec.gradient), ("Z", dec.kraus), ("Gamma", dec.total))}
    rep = affinity_report(dec.total)
    fp = fixed_points(dec.total)
    part = None if fp.empty else spec.to_external(fp.particular.x).tolist()
    report = {
        "command": "decompose",
        "n": spec.n,
        "basis_convention": spec.convention,
        "convention_note": CONVENTION_NOTES[spec.convention],
        "fields": {k: _field_dict(v) for k, v in parts.items()},
        "affinity": {"quadratic_norm": rep.quadratic_norm, "cubic_norm": rep.cubic_norm,
                     "is_affine": rep.is_affine},
        "fixed_points": {"particular": part, "null_basis": fp.null_basis.tolist(),
                         "dimension": fp.dimension, "residual": fp.residual},
    }
    text = [f"model {spec.name} (n={spec.n}, convention {spec.convention})"]
    text += [_field_text(k, v) for k, v in parts.items()]
    text.append(f"Gamma affine: {rep.is_affine} (quadratic {rep.quadratic_norm:.3e})")
    text.append(f"fixed points: particular {part}, null-space dimension {fp.dimension}")
    _emit(report, args.json, "\n".join(text), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# lasalle
# ---------------------------------------------------------------------------


def _raw_lasalle(spec: ModelSpec, args) -> dict:
    from .statespace import sample_states

    basis, sc = _context(spec)
    gamma = gkls_decomposition(spec.model, basis, sc).total
    xs = np.vstack([np.zeros((1, basis.m)), sample_states(spec.n, args.samples - 1, args.seed, basis)])
    lie = purity_lie_derivative(gamma, xs)
    worst = int(np.argmax(lie))
    if lie[worst] > LASALLE_TOL:
        raise CertificationError(f"purity Lie derivative {lie[worst]:.3e} > {LASALLE_TOL:g}",
                                 sample=xs[worst], value=float(lie[worst]))
    return {"kind": "raw-gkls", "n": spec.n, "certified": True, "samples": int(xs.shape[0]),
            "max_lie_derivative": float(lie.max()), "closed_form_max_deviation": None,
            "E": None, "s_infinity_classification": None}


def cmd_lasalle(args) -> int:
    spec = load_model(args.model)
    if spec.family is None:
        if not args.force:
            raise UsageError("model declares no semigroup family; pass --force to test the raw generator")
        body = _raw_lasalle(spec, args)
    else:
        body = lasalle_certify(spec.family, sample_count=args.samples, seed=args.seed,
                               horizon=args.horizon).to_dict()
    report = {"command": "lasalle", "basis_convention": spec.convention, **body}
    e = body.get("E") or {}
    text = "\n".join([
        f"model {spec.name}: family {body['kind']} (n={spec.n})",
        f"certified: {body['certified']} over {body['samples']} states",
        f"max purity Lie derivative: {body['max_lie_derivative']:.3e}",
        f"closed-form deviation: {body['closed_form_max_deviation']}",
        f"E: {e.get('text')}; commutant dimension {e.get('commutant_dimension')}, "
        f"per operator {e.get('operator_commutant_dimensions')}",
        f"S_inf classification: {body['s_infinity_classification']}",
    ])
    _emit(report, args.json, text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _commutation_suite(n: int, trials: int, seed) -> float:
    basis = build_gellmann_basis(n)
    sc = structure_constants(basis)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        a = random_hermitian(n, rng)
        b = random_hermitian(n, rng)
        a -= np.trace(a).real / n * np.eye(n)
        b -= np.trace(b).real / n * np.eye(n)
        ab = lie_product(a, b)
        Xa, Xb = hamiltonian_field(a, basis, sc), hamiltonian_field(b, basis, sc)
        Ya, Yb = gradient_field(a, basis, sc), gradient_field(b, basis, sc)
        worst = max(worst,
                    bracket(Xa, Xb).max_abs_diff(hamiltonian_field(ab, basis, sc)),
                    bracket(Xa, Yb).max_abs_diff(gradient_field(ab, basis, sc)),
                    bracket(Ya, Yb).max_abs_diff(-hamiltonian_field(ab, basis, sc)))
    return worst


def cmd_verify(args) -> int:
    spec = load_model(args.model)
    basis, sc = _context(spec)
    model = spec.model
    checks = []

    def record(name, passed, value, info=False):
        checks.append({"check": name, "passed": bool(passed), "value": value, "informational": info})

    rng = np.random.default_rng(args.seed)
    x0 = sample_state(spec.n, 1, rng, basis).x
    orc = oracle_consistency(model, x0, args.t_end, IntegratorConfig("rk4", args.dt), basis, sc)
    record("oracle_consistency", orc.passed(1e-6), orc.deviation)
    sg = verify_semigroup(model, 0.3, 0.7, seed=args.seed)
    record("semigroup_composition", sg.passed(), sg.composition_error)
    for tau in (0.1, 1.0, 10.0):
        m = choi_min_eigenvalue(channel(model, tau))
        record(f"choi_min_eigenvalue(tau={tau:g})", m >= -1e-10, m)
    lj = verify_lie_jordan(basis, trials=10, seed=args.seed)
    record("lie_jordan_identities", lj.passed, max(lj.leibniz_residual, lj.associator_residual))
    comm = _commutation_suite(spec.n, args.trials, args.seed)
    record("commutation_relations", comm < 1e-10, comm)
    neg = choi_min_eigenvalue(channel(model, -0.5))
    record("choi_min_eigenvalue(tau=-0.5)", True, neg, info=True)
    note = "not CP for tau<0" if neg < -1e-10 else "CP at tau=-0.5 (reversible dynamics)"

    failed = [c for c in checks if not c["passed"]]
    report = {"command": "verify", "n": spec.n, "basis_convention": spec.convention,
              "checks": checks, "negative_time": note, "passed": not failed}
    lines = [f"model {spec.name} (n={spec.n}, convention {spec.convention})"]
    for c in checks:
        tag = "info" if c["informational"] else ("PASS" if c["passed"] else "FAIL")
        lines.append(f"  [{tag}] {c['check']}: {c['value']:.3e}")
    lines.append(f"  negative time: {note}")
    _emit(report, args.json, "\n".join(lines), args.out)
    return EXIT_OK if not failed else EXIT_INVARIANT


# ---------------------------------------------------------------------------
# bloch-plot
# ---------------------------------------------------------------------------


def cmd_bloch_plot(args) -> int:
    try:
        table = read_trajectory_csv(args.trajectory)
    except OSError as exc:
        raise ModelParseError(f"cannot read trajectory: {exc}") from exc
    if table.points.shape[1] != 3:
        raise DimensionError(f"bloch-plot supports n = 2 only; trajectory has {table.points.shape[1]} coordinates")
    convention = args.convention
    if convention == "auto":
        sidecar = Path(args.trajectory).with_suffix(".json")
        convention = "orthonormal"
        if sidecar.exists():
            try:
                convention = json.loads(sidecar.read_text()).get("basis_convention", "orthonormal")
            except json.JSONDecodeError as exc:
                raise ModelParseError(f"sidecar {sidecar} is not JSON") from exc
    bloch = table.points * (np.sqrt(2.0) if convention == "orthonormal" else 1.0)
    svg = bloch_svg(bloch, title=f"{Path(args.trajectory).name} ({convention} input)")
    out = args.out or str(Path(args.trajectory).with_suffix(".svg"))
    atomic_write(out, svg)
    if args.json:
        print(json.dumps({"command": "bloch-plot", "out": out, "rows": int(bloch.shape[0]),
                          "basis_convention": convention}, sort_keys=True))
    else:
        print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="geoflow", description="Geometric GKLS dynamics in coherence coordinates.")
    p.add_argument("--version", action="version", version=f"geoflow {__version__} ({_kernels.BACKEND})")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, model=True):
        if model:
            sp.add_argument("--model", required=True, help="model JSON file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--json", action="store_true", help="print machine-readable JSON")
        sp.add_argument("--out", help="output path")

    s = sub.add_parser("simulate", help="integrate the GKLS field and write a trajectory CSV")
    common(s)
    s.add_argument("--x0", action="append",
                   help="initial coordinates, comma separated, in the model's convention (repeatable)")
    s.add_argument("--t-end", type=float, default=5.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--method", choices=("rk4", "rk45"), default="rk4")
    s.add_argument("--samples", type=int, default=500, help="approximate number of saved rows")
    s.add_argument("--save-every", type=int, default=0, help="explicit save stride (overrides --samples)")
    s.add_argument("--allow-negative", action="store_true", help="permit t_end < 0")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("decompose", help="print the X + Y + Z decomposition and fixed points")
    common(d)
    d.set_defaults(func=cmd_decompose)

    la = sub.add_parser("lasalle", help="certify purity as a LaSalle function and probe S_inf")
    common(la)
    la.add_argument("--samples", type=int, default=1000)
    la.add_argument("--horizon", type=float, default=5.0)
    la.add_argument("--force", action="store_true", help="allow models without a semigroup family")
    la.set_defaults(func=cmd_lasalle)

    v = sub.add_parser("verify", help="oracle, semigroup, Choi and commutation checks")
    common(v)
    v.add_argument("--t-end", type=float, default=5.0)
    v.add_argument("--dt", type=float, default=1e-3)
    v.add_argument("--trials", type=int, default=10)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bloch-plot", help="render a qubit trajectory CSV as SVG")
    b.add_argument("trajectory", help="trajectory CSV written by simulate")
    common(b, model=False)
    b.add_argument("--convention", choices=("auto", "orthonormal", "pauli"), default="auto")
    b.set_defaults(func=cmd_bloch_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ModelParseError, UsageError) as exc:
        print(f"geoflow: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CertificationError as exc:
        print(f"geoflow: certification failed: {exc}", file=sys.stderr)
        if exc.sample is not None:
            print(f"  offending sample: {np.asarray(exc.sample).tolist()}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InvariantError, DimensionError, AffinityError) as exc:
        print(f"geoflow: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (IntegrationError, BlowUpError, AmbiguousSpectrumError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"geoflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
