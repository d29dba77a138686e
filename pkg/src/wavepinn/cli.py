"""Command line front end: train / eval / oracle / compare / export.

WAVEPINN_THREADS caps the BLAS worker count; it must take effect before
numpy is imported, so all heavy imports happen inside main().
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def _cap_threads():
    n = os.environ.get("WAVEPINN_THREADS")
    if not n:
        return
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(var, n)


def _fail(kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")
    return 1


def _load_scenario(spec):
    """Accept either a config file path or a shipped preset id."""
    from . import presets
    from .config import load_config

    if os.path.exists(spec):
        return load_config(spec), None
    catalog = presets.list_presets()
    if spec in catalog:
        return presets.materialize(spec), catalog[spec]
    raise FileNotFoundError(f"no such config file or preset: {spec}")


def cmd_train(args):
    from . import trainer as tr
    from .config import build_problem

    cfg, _entry = _load_scenario(args.config)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    problem = build_problem(cfg)
    report = tr.Trainer(problem, out_dir=out).run(budget=args.iters)
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(
            {
                "final": report.final.as_dict(),
                "iterations": report.iterations,
                "wallclock": report.wallclock,
                "weights": report.weights,
                "checkpoint": report.checkpoint_path,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    # keep the scenario next to the checkpoint so eval can rebuild geometry
    if os.path.exists(args.config):
        import shutil

        shutil.copy(args.config, os.path.join(out, "scenario.json"))
    else:
        from . import presets

        with presets.preset_path(args.config).open() as src_fh:
            with open(os.path.join(out, "scenario.json"), "w") as dst:
                dst.write(src_fh.read())
    print(
        f"trained {report.iterations} iterations, total loss "
        f"{report.final.total:.6g}, checkpoint {report.checkpoint_path}"
    )
    return 0


def _grid_counts(spec, dim):
    counts = [int(c) for c in spec.split(",")]
    if len(counts) == 1:
        counts = counts * dim
    if len(counts) != dim:
        raise ValueError(f"--grid needs 1 or {dim} counts for a {dim}D scenario")
    return counts


def cmd_eval(args):
    import numpy as np

    from . import gridio, network as nn, oracle
    from .config import build_problem, load_config

    scenario = args.config or os.path.join(os.path.dirname(args.checkpoint), "scenario.json")
    cfg = load_config(scenario)
    problem = build_problem(cfg)
    nets, _it = nn.load_checkpoints(args.checkpoint)
    for role in problem.assembly.unique_networks():
        if role.name not in nets:
            raise KeyError(f"checkpoint is missing network {role.name!r}")
        nn.set_flat_parameters(role.net, nn.get_flat_parameters(nets[role.name]))
    counts = _grid_counts(args.grid, cfg.dimension)
    grid = oracle.make_grid(cfg.domain_lo, cfg.domain_hi, counts)
    vals = problem.assembly.total_values(grid.points())
    grid.values = np.asarray(vals).reshape(grid.values.shape)
    gridio.save_binary(args.out, grid)
    print(f"wrote {args.out} ({'x'.join(str(c) for c in counts)})")
    return 0


def cmd_oracle(args):
    from . import gridio, reference

    cfg, entry = _load_scenario(args.config)
    kind = args.kind or (entry.oracle if entry else "fd2d" if cfg.dimension == 2 else "fd1d")
    n = _grid_counts(args.grid, cfg.dimension) if args.grid else None
    grid = reference.reference_field(cfg, kind, n)
    gridio.save_binary(args.out, grid)
    print(f"wrote {args.out} (kind {kind})")
    return 0


def cmd_compare(args):
    from . import gridio, oracle

    a = gridio.load_binary(args.field_a)
    b = gridio.load_binary(args.field_b)
    mse = oracle.compare_fields(a, b)
    print(f"{mse:.12g}")
    return 0


def cmd_export(args):
    import numpy as np

    from . import gridio

    grid = gridio.load_binary(args.field)
    base = args.out or os.path.splitext(args.field)[0]
    if args.format == "csv":
        gridio.save_csv(base + ".csv", grid)
        print(f"wrote {base}.csv")
    elif args.format == "bin":
        gridio.save_binary(base + ".bin", grid)
        print(f"wrote {base}.bin")
    else:
        re_path, abs_path = gridio.save_heatmaps(base, grid)
        print(f"wrote {re_path} and {abs_path}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="wavepinn", description="Wave-field PINN toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a scenario (config path or preset id)")
    t.add_argument("config")
    t.add_argument("--out", default=None, help="output directory")
    t.add_argument("--iters", type=int, default=None, help="override iteration budget")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="sample a trained model on a grid")
    e.add_argument("checkpoint")
    e.add_argument("--grid", required=True, help="NX[,NY[,NZ]]")
    e.add_argument("--config", default=None, help="scenario config (default: alongside checkpoint)")
    e.add_argument("--out", default="field.bin")
    e.set_defaults(fn=cmd_eval)

    o = sub.add_parser("oracle", help="compute the scenario's reference field")
    o.add_argument("config")
    o.add_argument("--kind", choices=["analytic", "fd1d", "fd2d"], default=None)
    o.add_argument("--grid", default=None, help="NX[,NY]")
    o.add_argument("--out", default="oracle.bin")
    o.set_defaults(fn=cmd_oracle)

    c = sub.add_parser("compare", help="normalized MSE between two saved fields")
    c.add_argument("field_a")
    c.add_argument("field_b")
    c.set_defaults(fn=cmd_compare)

    x = sub.add_parser("export", help="convert a saved field to csv/bin/pgm")
    x.add_argument("field")
    x.add_argument("--format", choices=["csv", "bin", "pgm"], required=True)
    x.add_argument("--out", default=None, help="output path prefix")
    x.set_defaults(fn=cmd_export)
    return p


def main(argv=None):
    _cap_threads()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - single machine-parsable error line
        return _fail(type(exc).__name__, exc)


if __name__ == "__main__":
    sys.exit(main())
