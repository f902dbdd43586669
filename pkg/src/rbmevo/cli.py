"""Command-line interface: instance generation, experiment runs, validation.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import experiments, manifest as mf
from .evolution import RbmModel, RmModel
from .experiments import (
    derive_seed,
    enumerate_combos,
    run_ablation,
    run_completion_test,
    run_fitness_histogram,
    run_sweep,
    run_switch,
    run_trajectory,
    run_trend_table,
    write_run_csv,
)
from .sat import emit_dimacs, gen_uniform_ksat


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we reserve 2 for runtime
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rbmevo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-instance", help="generate a uniform random k-SAT instance")
    gen.add_argument("--n", type=int, required=True, help="number of variables")
    gen.add_argument("--k", type=int, default=3, help="literals per clause")
    gen.add_argument("--ratio", type=float, default=4.267, help="clause-to-variable ratio")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", type=Path, required=True, help="output DIMACS file")

    run = sub.add_parser("run", help="run the experiment described by a manifest")
    run.add_argument("--manifest", type=Path, required=True)
    run.add_argument("--out", type=Path, help="override the manifest output directory")
    run.add_argument("--seed", type=int, help="override the manifest master seed")
    run.add_argument("--jobs", type=int, help="override the manifest parallelism degree")

    val = sub.add_parser("validate", help="check a manifest without running it")
    val.add_argument("--manifest", type=Path, required=True)
    return parser


def cmd_gen_instance(args) -> int:
    rng = np.random.default_rng(args.seed)
    instance = gen_uniform_ksat(args.n, args.k, args.ratio, rng)
    comments = [
        "generator: uniform random k-SAT (distinct variables per clause, distinct clauses)",
        f"n={args.n} k={args.k} ratio={args.ratio!r} seed={args.seed}",
    ]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="\n") as fh:
        fh.write(emit_dimacs(instance, comments=comments))
    print(f"wrote {instance.num_clauses} clauses over {instance.num_variables} variables to {args.out}")
    return 0


def _load_manifest(args) -> mf.RunManifest:
    man = mf.load_manifest(args.manifest)
    if getattr(args, "seed", None) is not None:
        man.seed = args.seed
    if getattr(args, "jobs", None) is not None:
        man.jobs = args.jobs
    if getattr(args, "out", None) is not None:
        man.out = args.out
    return man


def _require_out(man: mf.RunManifest) -> Path:
    if man.out is None:
        raise mf.ManifestError("[run] out: an output directory is required (or pass --out)")
    man.out.mkdir(parents=True, exist_ok=True)
    return man.out


def cmd_run(args) -> int:
    man = _load_manifest(args)
    out = _require_out(man)
    kind = man.kind
    if kind == "trajectory":
        config = mf.build_trajectory_config(man)
        runs = man.runs if man.runs is not None else 1
        finals = []
        for i in range(runs):
            cfg = dataclasses.replace(config, seed=derive_seed(man.seed, i))
            arrays = run_trajectory(cfg)
            write_run_csv(out / f"run_{i}.csv", arrays)
            finals.append(arrays["mean_fitness"][-1])
        print(f"final mean fitness {np.mean(finals)!r} over {runs} run(s); CSVs in {out}")
    elif kind == "sweep":
        grid = mf.build_sweep_grid(man)
        report = run_sweep(grid, man.seed, out_dir=out, jobs=man.jobs)
        print(f"sweep finished: {len(report.rows)} runs, outputs in {out}")
    elif kind == "trend_table":
        table = run_trend_table(jobs=man.jobs, **mf.build_trend_args(man))
        path = out / "trend_table.csv"
        table.write_csv(path)
        print(f"trend table written to {path}")
    elif kind == "completion":
        cfg = mf.build_completion_config(man)
        result = run_completion_test(cfg, jobs=man.jobs)
        path = out / "completion.csv"
        result.write_csv(path)
        note = " (sampled with replacement)" if result.sampled_with_replacement else ""
        print(
            f"final inferred {result.inferred.mean[-1]!r} vs shuffled "
            f"{result.shuffled.mean[-1]!r}{note}; CSV in {path}"
        )
    elif kind == "ablation":
        cfg = mf.build_ablation_config(man)
        run_ablation(cfg, jobs=man.jobs, out_path=out / "ablation.csv")
        print(f"ablation curves written to {out / 'ablation.csv'}")
    elif kind == "switch":
        cfg = mf.build_switch_config(man)
        result = run_switch(cfg, jobs=man.jobs)
        path = out / "switch.csv"
        result.write_csv(path)
        print(f"final mean fitness {result.fitness.mean[-1]!r}; CSV in {path}")
    elif kind == "histogram":
        cfg = mf.build_histogram_config(man)
        result = run_fitness_histogram(cfg, jobs=man.jobs)
        path = out / "histograms.csv"
        result.write_csv(path)
        print(f"histograms written to {path}")
    else:  # pragma: no cover - load_manifest already rejects unknown kinds
        raise mf.ManifestError(f"[run] kind: unknown experiment kind {kind!r}")
    return 0


def _validate_model_section(man: mf.RunManifest, lines: list[str]) -> None:
    config = mf.build_trajectory_config(man)
    model = config.model
    if isinstance(model, (RbmModel, RmModel)):
        lines.append(
            f"model resolves to {model.survivors.resolve(config.population_size)} survivors"
        )


def cmd_validate(args) -> int:
    man = mf.load_manifest(args.manifest)
    lines: list[str] = [f"kind: {man.kind}", f"seed: {man.seed}"]
    exclusions = 0
    if man.kind == "sweep":
        grid = mf.build_sweep_grid(man)
        for n_max in grid.n_max_values:
            admissible, excluded = enumerate_combos(grid, n_max)
            lines.append(
                f"n_max={n_max}: {len(admissible)} admissible combination(s)"
            )
            for combo, reason in excluded:
                lines.append(f"excluded (n_max={n_max}) {combo.label()}: {reason}")
                exclusions += 1
    elif man.kind == "trajectory":
        _validate_model_section(man, lines)
    elif man.kind == "trend_table":
        targs = mf.build_trend_args(man)
        for spec in targs["survivor_specs"]:
            for N in targs["population_sizes"]:
                if mf_trend_blank(spec, N):
                    lines.append(f"blank cell: survivors={spec} N={N} (at most one survivor)")
    elif man.kind == "completion":
        cfg = mf.build_completion_config(man)
        survivors = round(cfg.population_size * cfg.survivor_percent / 100.0)
        if cfg.completion_count > survivors:
            lines.append(
                f"note: completion_count {cfg.completion_count} exceeds {survivors} survivors; "
                "sources will be sampled with replacement"
            )
    elif man.kind == "ablation":
        mf.build_ablation_config(man)
    elif man.kind == "switch":
        mf.build_switch_config(man)
    elif man.kind == "histogram":
        mf.build_histogram_config(man)
    for line in lines:
        print(line)
    print(f"{exclusions} exclusions")
    return 0


def mf_trend_blank(spec, N) -> bool:
    return experiments._trend_cell_blank(spec, N)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "gen-instance":
            return cmd_gen_instance(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "validate":
            return cmd_validate(args)
    except (mf.ManifestError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc!r}", file=sys.stderr)
        return 2
    return 0


def entrypoint() -> None:  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
