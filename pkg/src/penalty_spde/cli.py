"""Command-line entry point: run | sweep | audit | meshgen.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 audit flag.
Config files are JSON with a versioned "schema" field; unknown keys are
rejected so typos fail loudly instead of being ignored.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import ensemble as ens
from .errors import ConfigurationError, PenaltySpdeError, StepError
from .ioutils import write_csv, write_json, write_vtk_snapshot
from .mesh import generate_l_shape, generate_rect_mesh, load_msh, mesh_stats, save_mesh
from .noise import make_noise_model
from .schemes import LEDGER_HEADER, SchemeConfig, ledger_rows, run_path

SCHEMA_VERSION = 1

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_AUDIT = 0, 2, 3, 4


# -- registries -------------------------------------------------------------

def _forcing_zero(t, x, y):
    zero = np.zeros_like(x)
    return zero, zero


def _forcing_constant_x(t, x, y):
    return np.ones_like(x), np.zeros_like(x)


def _forcing_decaying_x(t, x, y):
    return np.exp(-t) * np.ones_like(x), np.zeros_like(x)


FORCINGS = {
    "zero": None,
    "constant_x": _forcing_constant_x,
    "decaying_x": _forcing_decaying_x,
}

INITIAL_VELOCITIES = {
    "zero": None,
    "shear": lambda x, y: (np.sin(np.pi * y), np.zeros_like(x)),
}

INITIAL_PRESSURES = {
    "zero": None,
    "linear_x": lambda x, y: x,
}


def _require_keys(obj, allowed, context):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigurationError(
            f"unknown key(s) {sorted(unknown)} in {context}; allowed: {sorted(allowed)}"
        )


def build_mesh(spec):
    _require_keys(spec, {"kind", "nx", "ny", "bounds", "side", "n", "path"}, "mesh")
    kind = spec.get("kind")
    if kind == "rect":
        return generate_rect_mesh(
            int(spec.get("nx", 8)),
            int(spec.get("ny", 8)),
            tuple(spec.get("bounds", (0.0, 0.0, 1.0, 1.0))),
        )
    if kind == "lshape":
        return generate_l_shape(float(spec.get("side", 5.0)), int(spec.get("n", 30)))
    if kind == "msh":
        return load_msh(spec["path"])
    raise ConfigurationError(f"unknown mesh kind {kind!r}")


def _resolve_scalar_or_recipe(value, h, exponent_key, delta, base=None):
    if isinstance(value, dict):
        _require_keys(value, {"recipe", "delta"}, "scheme recipe")
        d = float(value.get("delta", delta))
        if value.get("recipe") == "from-h":
            return h ** (2.0 + d)
        if value.get("recipe") == "from-eps":
            if base is None:
                raise ConfigurationError("k recipe from-eps needs eps resolved first")
            return base ** (1.0 + d)
        raise ConfigurationError(f"unknown recipe {value.get('recipe')!r}")
    return float(value)


def parse_config(path):
    """Load and validate a run-config JSON file; returns (mesh, SchemeConfig, raw)."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from None

    _require_keys(
        raw,
        {"schema", "mesh", "physics", "scheme", "noise", "solver", "outputs", "seeds"},
        "config root",
    )
    if raw.get("schema") != SCHEMA_VERSION:
        raise ConfigurationError(
            f"config schema must be {SCHEMA_VERSION}, got {raw.get('schema')!r}"
        )

    mesh = build_mesh(raw.get("mesh", {"kind": "rect"}))
    h = mesh_stats(mesh)["h_max"]

    phys = raw.get("physics", {})
    _require_keys(
        phys,
        {"nu", "T", "forcing", "boundary", "initial_velocity", "initial_pressure"},
        "physics",
    )
    nu = float(phys.get("nu", 1.0))
    T = float(phys.get("T", 1.0))
    forcing_id = phys.get("forcing", "zero")
    if forcing_id not in FORCINGS:
        raise ConfigurationError(f"unknown forcing id {forcing_id!r}")
    iv = phys.get("initial_velocity", "zero")
    ip = phys.get("initial_pressure", "zero")
    if iv not in INITIAL_VELOCITIES:
        raise ConfigurationError(f"unknown initial velocity id {iv!r}")
    if ip not in INITIAL_PRESSURES:
        raise ConfigurationError(f"unknown initial pressure id {ip!r}")

    boundary = None
    if phys.get("boundary"):
        boundary = {}
        for tag, val in phys["boundary"].items():
            vec = tuple(float(v) for v in val)

            def make(vec):
                return lambda x, y: vec

            key = tag if tag == "default" else int(tag)
            boundary[key] = make(vec)

    scheme = raw.get("scheme", {})
    _require_keys(scheme, {"kind", "eps", "k", "delta"}, "scheme")
    delta = float(scheme.get("delta", 0.1))
    eps = _resolve_scalar_or_recipe(scheme.get("eps", 1.0), h, "eps", delta)
    k = _resolve_scalar_or_recipe(scheme.get("k", 0.01), h, "k", delta, base=eps)

    noise_spec = raw.get("noise")
    noise_model = None
    if noise_spec:
        _require_keys(
            noise_spec,
            {"J", "lambda", "gamma", "amplitude", "domain_scale"},
            "noise",
        )
        noise_model = make_noise_model(
            J=int(noise_spec.get("J", 5)),
            lambda_kind=noise_spec.get("lambda", "inverse-square-sum"),
            domain_scale=float(noise_spec.get("domain_scale", 5.0)),
            gamma_kind=noise_spec.get("gamma", "additive"),
            amplitude=float(noise_spec.get("amplitude", 1.0)),
        )

    solver = raw.get("solver", {})
    _require_keys(
        solver, {"picard_max_iters", "picard_tol", "linear_tol"}, "solver"
    )

    config = SchemeConfig(
        nu=nu,
        eps=eps,
        k=k,
        T=T,
        scheme_kind=scheme.get("kind", "penalty-linear"),
        picard_max_iters=int(solver.get("picard_max_iters", 50)),
        picard_tol=float(solver.get("picard_tol", 1e-10)),
        linear_tol=float(solver.get("linear_tol", 1e-9)),
        forcing=FORCINGS[forcing_id],
        noise_model=noise_model,
        boundary_values=boundary,
        initial_velocity=INITIAL_VELOCITIES[iv],
        initial_pressure=INITIAL_PRESSURES[ip],
    )

    outputs = raw.get("outputs", {})
    _require_keys(outputs, {"directory", "snapshot_stride"}, "outputs")
    seeds = raw.get("seeds", {})
    _require_keys(seeds, {"base_seed"}, "seeds")
    meta = {
        "out_dir": outputs.get("directory", "out"),
        "snapshot_stride": int(outputs.get("snapshot_stride", 0)),
        "base_seed": int(seeds.get("base_seed", 0)),
    }
    return mesh, config, meta


# -- subcommands ------------------------------------------------------------

def cmd_run(args):
    mesh, config, meta = parse_config(args.config)
    out_dir = args.out or meta["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    seed = args.seed if args.seed is not None else meta["base_seed"]

    stride = meta["snapshot_stride"]
    snapshots = []

    def on_step(state):
        if stride and state.m % stride == 0:
            snapshots.append(state)

    traj = run_path(
        config, seed, 0, mesh=mesh, on_step=on_step if stride else None
    )
    write_csv(
        os.path.join(out_dir, "ledger.csv"), LEDGER_HEADER, ledger_rows(traj)
    )
    for state in snapshots:
        write_vtk_snapshot(
            os.path.join(out_dir, f"snapshot_{state.m:05d}.vtk"),
            mesh, state.V, state.P, title=f"t={state.t}",
        )
    print(f"ran {config.n_steps} steps (k={config.k:.6g}, k/eps={config.k_over_eps:.3g})")
    print(f"ledger written to {os.path.join(out_dir, 'ledger.csv')}")
    return EXIT_OK


def cmd_sweep(args):
    mesh, config, meta = parse_config(args.config)
    out_dir = args.out or meta["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    seed = args.seed if args.seed is not None else meta["base_seed"]

    if args.paper_fig3:
        eps_list = [config.eps / 5**j for j in range(5)]
    elif args.eps_list:
        eps_list = [float(v) for v in args.eps_list.split(",")]
    else:
        raise ConfigurationError("sweep needs --eps-list or --paper-fig3")

    result = ens.epsilon_sweep(
        mesh, config, eps_list, args.samples, seed,
        k_mode=args.k_mode, threads=args.threads,
    )
    rows = []
    for eps, k, st, ct in zip(
        result.eps_values, result.k_values, result.stats, result.c_tilde
    ):
        rows.append(
            [
                repr(eps),
                repr(st.mean_sq_error),
                repr(st.rms_error),
                repr(st.error_variance),
                repr(st.ci_halfwidth),
                repr(k),
                repr(k / eps),
                repr(ct),
            ]
        )
    write_csv(
        os.path.join(out_dir, "sweep.csv"),
        ["eps", "mean_sq_error", "rms_error", "error_variance",
         "ci_halfwidth", "k", "k_over_eps", "c_tilde"],
        rows,
    )
    mse = [s.mean_sq_error for s in result.stats]
    monotone = all(b < a for a, b in zip(mse, mse[1:]))
    write_json(
        os.path.join(out_dir, "sweep_summary.json"),
        {
            "schema": SCHEMA_VERSION,
            "eps": result.eps_values,
            "mean_sq_error": mse,
            "error_variance": [s.error_variance for s in result.stats],
            "slope": result.slope,
            "c_tilde": result.c_tilde,
            "h": result.h,
            "mode": result.mode,
            "monotone_decreasing": monotone,
        },
    )
    slope_txt = "n/a" if len(eps_list) < 2 else f"{result.slope:.3f}"
    print(f"fitted log-log slope: {slope_txt}")
    print(f"error column monotone decreasing: {monotone}")
    return EXIT_OK


def cmd_audit(args):
    mesh, config, meta = parse_config(args.config)
    out_dir = args.out or meta["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    seed = args.seed if args.seed is not None else meta["base_seed"]

    raw = json.load(open(args.config))
    mesh_spec = raw.get("mesh", {"kind": "rect"})
    meshes = []
    for level in range(args.levels):
        spec = dict(mesh_spec)
        if spec.get("kind") == "rect":
            spec["nx"] = int(spec.get("nx", 4)) * 2**level
            spec["ny"] = int(spec.get("ny", 4)) * 2**level
        elif spec.get("kind") == "lshape":
            spec["n"] = int(spec.get("n", 8)) * 2**level
        else:
            raise ConfigurationError("audit needs a generated (rect/lshape) mesh")
        meshes.append(build_mesh(spec))

    report = ens.stability_audit(meshes, config, args.samples, seed)
    write_json(os.path.join(out_dir, "audit.json"), {
        "schema": SCHEMA_VERSION, **report,
    })
    for lv in report["levels"]:
        print(
            f"h={lv['h']:.4g} eps={lv['eps']:.4g} k={lv['k']:.4g} "
            f"bracket={lv['bracket']:.6g}"
        )
    if report["blow_up_flagged"]:
        print("blow-up flagged: bracket grew by more than x2 between levels")
        return EXIT_AUDIT
    print("audit passed: bracket uniformly bounded across levels")
    return EXIT_OK


def cmd_meshgen(args):
    if args.kind == "rect":
        mesh = generate_rect_mesh(args.n, args.n)
    else:
        mesh = generate_l_shape(args.side, args.n)
    save_mesh(mesh, args.out_file)
    stats = mesh_stats(mesh)
    print(
        f"wrote {args.out_file}: {mesh.n_vertices} vertices, "
        f"{mesh.n_triangles} triangles, h_max={stats['h_max']:.6g}"
    )
    return EXIT_OK


def make_parser():
    parser = argparse.ArgumentParser(
        prog="penalty-spde",
        description="Stochastic Navier-Stokes penalty-scheme solver and studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="JSON run-config file")
        p.add_argument("--seed", type=int, default=None, help="override base seed")
        p.add_argument("--samples", type=int, default=100)
        p.add_argument(
            "--threads",
            type=int,
            default=int(os.environ.get("PENALTY_SPDE_THREADS", "1")),
        )
        p.add_argument("--out", default=None, help="output directory")

    p_run = sub.add_parser("run", help="single path run with ledger output")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="epsilon sweep against the saddle reference")
    common(p_sweep)
    p_sweep.add_argument("--eps-list", default=None, help="comma-separated, decreasing")
    p_sweep.add_argument(
        "--paper-fig3", action="store_true",
        help="use the eps/5^j, j=0..4 preset from the config's eps",
    )
    p_sweep.add_argument("--k-mode", choices=("fixed", "recipe"), default="fixed")
    p_sweep.set_defaults(func=cmd_sweep)

    p_audit = sub.add_parser("audit", help="energy-bracket stability audit")
    common(p_audit)
    p_audit.add_argument("--levels", type=int, default=3)
    p_audit.set_defaults(func=cmd_audit)

    p_mesh = sub.add_parser("meshgen", help="generate and dump a mesh")
    p_mesh.add_argument("kind", choices=("rect", "lshape"))
    p_mesh.add_argument("out_file")
    p_mesh.add_argument("--n", type=int, default=8)
    p_mesh.add_argument("--side", type=float, default=5.0)
    p_mesh.set_defaults(func=cmd_meshgen)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepError, PenaltySpdeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
