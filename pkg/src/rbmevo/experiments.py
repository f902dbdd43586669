"""Experiment drivers built on the generation loop.

Provides the parameter-sweep engine with admissibility rules, the
random-mutation trend table, the genome-completion test on parity
landscapes, weight/bias ablations, the selection-switch heterozygosity
study, and per-generation fitness histograms. Every driver runs seeded
replicates (optionally across processes), reports mean plus standard error
with the run count, and can persist CSV outputs.
"""

from __future__ import annotations

import csv
import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .evolution import (
    RBM_MIN_SURVIVORS,
    BrgModel,
    GenerationRecord,
    ModelConfig,
    Population,
    RbmModel,
    RmModel,
    SurvivorSpec,
    run_generation_loop,
)
from .rbm import ABLATIONS, RbmConfig
from .sat import FitnessFn, ParityFitness

__all__ = [
    "CurveStats",
    "derive_seed",
    "derive_rng",
    "aggregate_curves",
    "records_to_arrays",
    "run_trajectory",
    "run_trajectories",
    "write_run_csv",
    "read_run_csv",
    "SweepCombo",
    "SweepGrid",
    "SweepReport",
    "exclusion_reason",
    "enumerate_combos",
    "pick_best",
    "run_sweep",
    "TrendTable",
    "run_trend_table",
    "FitnessSwitch",
    "CompletionConfig",
    "CompletionResult",
    "run_completion_test",
    "AblationConfig",
    "run_ablation",
    "SwitchConfig",
    "SwitchResult",
    "run_switch",
    "fitness_histogram",
    "HistogramConfig",
    "HistogramResult",
    "run_fitness_histogram",
]

HISTOGRAM_BIN_WIDTH = 0.005


# ---------------------------------------------------------------------------
# Seeding, aggregation, trajectory plumbing
# ---------------------------------------------------------------------------

def derive_seed(master_seed: int, *key: int) -> int:
    """Stable per-job seed: a SeedSequence spawn key mixes the job index in."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    )


@dataclass
class CurveStats:
    """Per-generation mean and standard error over a set of runs."""

    mean: np.ndarray
    se: np.ndarray
    n_runs: int


def aggregate_curves(curves: Sequence[np.ndarray]) -> CurveStats:
    stack = np.vstack([np.asarray(c, dtype=np.float64) for c in curves])
    n = stack.shape[0]
    mean = stack.mean(axis=0)
    se = stack.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return CurveStats(mean, se, n)


def records_to_arrays(records: Sequence[GenerationRecord]) -> dict[str, np.ndarray]:
    return {
        "generation": np.array([r.generation for r in records], dtype=np.int64),
        "mean_fitness": np.array([r.mean_fitness for r in records]),
        "best_fitness": np.array([r.best_fitness for r in records]),
        "mean_heterozygosity": np.array([r.mean_heterozygosity for r in records]),
    }


def run_trajectory(config: ModelConfig) -> dict[str, np.ndarray]:
    return records_to_arrays(run_generation_loop(config))


def _run_jobs(fn: Callable, args_list: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args_list))


def run_trajectories(
    config: ModelConfig, runs: int, master_seed: int, jobs: int = 1
) -> list[dict[str, np.ndarray]]:
    """Replicated runs of one model configuration with derived per-run seeds."""
    configs = [
        dataclasses.replace(config, seed=derive_seed(master_seed, i)) for i in range(runs)
    ]
    return _run_jobs(run_trajectory, configs, jobs)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def write_run_csv(path: str | Path, arrays: dict[str, np.ndarray]) -> None:
    cols = ("generation", "mean_fitness", "best_fitness", "mean_heterozygosity")
    _write_csv(path, cols, zip(*(arrays[c] for c in cols)))


def read_run_csv(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    data = {name: np.array([float(r[i]) for r in rows]) for i, name in enumerate(header)}
    data["generation"] = data["generation"].astype(np.int64)
    return data


# ---------------------------------------------------------------------------
# Parameter sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepCombo:
    """One parameter combination of the sweep grid (RBM, RM, or BRG baseline)."""

    model: str  # "rbm" | "rm" | "brg"
    N: int
    survivors: SurvivorSpec | None = None
    mu: int | None = None
    hidden_mult: int | None = None
    iterations: int | None = None
    eta: float | None = None
    batch: int | None = None

    def label(self) -> str:
        parts = [self.model, f"N{self.N}"]
        if self.survivors is not None:
            parts.append(f"S{self.survivors}".replace("%", "pct"))
        if self.mu is not None:
            parts.append(f"mu{self.mu}")
        if self.hidden_mult is not None:
            parts.append(f"H{self.hidden_mult}x")
        if self.iterations is not None:
            parts.append(f"T{self.iterations}")
        if self.eta is not None:
            parts.append(f"eta{self.eta:g}")
        if self.batch is not None:
            parts.append(f"B{self.batch}")
        return "_".join(parts)


@dataclass
class SweepGrid:
    """Axes of a sweep: shared instances and per-model parameter lists.

    ``n_max_values`` restricts which population sizes participate in a given
    panel; every admissible combination of the remaining axes is run.
    """

    instances: list[tuple[str, FitnessFn]]
    n_max_values: Sequence[int]
    rbm_n: Sequence[int] = (100, 1000, 10000)
    rbm_survivors: Sequence[SurvivorSpec] = (
        SurvivorSpec.top_percent(5),
        SurvivorSpec.top_percent(10),
        SurvivorSpec.top_percent(50),
    )
    rbm_hidden_mult: Sequence[int] = (1, 2)
    rbm_iterations: Sequence[int] = (20, 100)
    rbm_eta: Sequence[float] = (1e-5, 1e-4, 1e-3, 1e-2, 5e-2)
    rbm_batch: Sequence[int] = (10, 100, 1000)
    rm_n: Sequence[int] = (2, 10, 100, 1000, 10000)
    rm_survivors: Sequence[SurvivorSpec] = (
        SurvivorSpec.top_count(1),
        SurvivorSpec.top_percent(1),
        SurvivorSpec.top_percent(5),
        SurvivorSpec.top_percent(10),
        SurvivorSpec.top_percent(50),
    )
    rm_mu: Sequence[int] = (1, 2, 3, 4, 5)
    models: Sequence[str] = ("rbm", "rm", "brg")
    checkpoints: Sequence[int] = (50, 100, 500)
    generations: int | None = None
    replicates: int = 1

    def resolved_generations(self) -> int:
        return self.generations if self.generations is not None else max(self.checkpoints)


def exclusion_reason(combo: SweepCombo, n_max: int) -> str | None:
    """Why a combination must not run, or None if it is admissible."""
    if combo.N > n_max:
        return f"population {combo.N} exceeds N_max {n_max}"
    if combo.model == "rm":
        if combo.survivors.raw_count(combo.N) < 1:
            return "fewer than 1 survivor"
    elif combo.model == "rbm":
        s = max(1, combo.survivors.raw_count(combo.N))
        if s < RBM_MIN_SURVIVORS:
            return f"RBM survivors {s} < {RBM_MIN_SURVIVORS}"
        if combo.batch >= combo.N:
            return f"batch size {combo.batch} not smaller than population {combo.N}"
        if combo.batch > s:
            return f"batch size {combo.batch} exceeds survivor count {s}"
    return None


def enumerate_combos(
    grid: SweepGrid, n_max: int
) -> tuple[list[SweepCombo], list[tuple[SweepCombo, str]]]:
    """All grid combinations split into (admissible, excluded-with-reason)."""
    combos: list[SweepCombo] = []
    if "rbm" in grid.models:
        for N in grid.rbm_n:
            for surv in grid.rbm_survivors:
                for mult in grid.rbm_hidden_mult:
                    for T in grid.rbm_iterations:
                        for eta in grid.rbm_eta:
                            for B in grid.rbm_batch:
                                combos.append(
                                    SweepCombo(
                                        "rbm", N, surv, hidden_mult=mult,
                                        iterations=T, eta=eta, batch=B,
                                    )
                                )
    if "rm" in grid.models:
        for N in grid.rm_n:
            for surv in grid.rm_survivors:
                for mu in grid.rm_mu:
                    combos.append(SweepCombo("rm", N, surv, mu=mu))
    admissible, excluded = [], []
    for combo in combos:
        reason = exclusion_reason(combo, n_max)
        if reason is None:
            admissible.append(combo)
        else:
            excluded.append((combo, reason))
    if "brg" in grid.models:
        admissible.append(SweepCombo("brg", n_max))
    return admissible, excluded


def _combo_model(combo: SweepCombo, n: int):
    if combo.model == "rm":
        return RmModel(mu=combo.mu, survivors=combo.survivors)
    if combo.model == "rbm":
        cfg = RbmConfig(
            num_hidden=combo.hidden_mult * n,
            learning_rate=combo.eta,
            iterations=combo.iterations,
            batch_size=combo.batch,
        )
        return RbmModel(rbm=cfg, survivors=combo.survivors)
    return BrgModel()


def _sweep_job(args) -> tuple[dict[str, np.ndarray], float]:
    fitness, combo, generations, seed = args
    config = ModelConfig(
        model=_combo_model(combo, fitness.n),
        population_size=combo.N,
        fitness=fitness,
        generations=generations,
        seed=seed,
    )
    t0 = time.perf_counter()
    arrays = run_trajectory(config)
    return arrays, time.perf_counter() - t0


def pick_best(
    candidates: Sequence[tuple[SweepCombo, float]], rng: np.random.Generator
) -> SweepCombo:
    """Combination with the highest value; exact ties drawn uniformly at random."""
    best_value = max(v for _, v in candidates)
    tied = [c for c, v in candidates if v == best_value]
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(0, len(tied)))]


@dataclass
class SweepReport:
    grid: SweepGrid
    rows: list[dict]
    curves: dict[tuple[str, int, SweepCombo], np.ndarray]
    best: dict[tuple[str, int, str, int], tuple[SweepCombo, float]]
    excluded: dict[int, list[tuple[SweepCombo, str]]]
    brg_best: dict[tuple[str, int], np.ndarray]

    def best_curve(self, instance: str, n_max: int, model: str, checkpoint: int) -> np.ndarray:
        combo, _ = self.best[(instance, n_max, model, checkpoint)]
        return self.curves[(instance, n_max, combo)]


def run_sweep(
    grid: SweepGrid,
    master_seed: int,
    out_dir: str | Path | None = None,
    jobs: int = 1,
) -> SweepReport:
    """Run every admissible combination and report the best per model/checkpoint.

    When ``out_dir`` is given, one CSV per run is written under ``runs/`` and
    reused on re-entry, so an interrupted sweep resumes without recomputation;
    excluded combinations are listed in ``exclusions.txt``.
    """
    generations = grid.resolved_generations()
    if max(grid.checkpoints) > generations:
        raise ValueError("checkpoints exceed the number of generations")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "runs").mkdir(parents=True, exist_ok=True)

    jobs_list = []  # (instance_name, n_max, combo, replicate, seed)
    excluded: dict[int, list[tuple[SweepCombo, str]]] = {}
    job_index = 0
    for inst_idx, (name, fitness) in enumerate(grid.instances):
        for nm_idx, n_max in enumerate(grid.n_max_values):
            admissible, dropped = enumerate_combos(grid, n_max)
            excluded.setdefault(int(n_max), dropped)
            for combo in admissible:
                for rep in range(grid.replicates):
                    seed = derive_seed(master_seed, job_index)
                    jobs_list.append((name, fitness, int(n_max), combo, rep, seed))
                    job_index += 1
    if not any(
        c.model in ("rbm", "rm") for _, _, _, c, _, _ in jobs_list
    ):
        raise ValueError("sweep grid admits no RBM or RM combination")

    def job_path(name: str, n_max: int, combo: SweepCombo, rep: int) -> Path:
        return out / "runs" / f"{name}_nmax{n_max}_{combo.label()}_r{rep}.csv"

    pending, results = [], {}
    for name, fitness, n_max, combo, rep, seed in jobs_list:
        key = (name, n_max, combo, rep)
        if out is not None:
            p = job_path(name, n_max, combo, rep)
            if p.exists():
                arrays = read_run_csv(p)
                if arrays["generation"].size == generations + 1:
                    results[key] = (arrays, 0.0, seed)
                    continue
        pending.append((key, (fitness, combo, generations, seed)))

    outputs = _run_jobs(_sweep_job, [args for _, args in pending], jobs)
    for (key, args), (arrays, runtime) in zip(pending, outputs):
        results[key] = (arrays, runtime, args[3])
        if out is not None:
            write_run_csv(job_path(key[0], key[1], key[2], key[3]), arrays)

    rows = []
    curve_acc: dict[tuple[str, int, SweepCombo], list[np.ndarray]] = {}
    brg_acc: dict[tuple[str, int], list[np.ndarray]] = {}
    for name, fitness, n_max, combo, rep, seed in jobs_list:
        arrays, runtime, _ = results[(name, n_max, combo, rep)]
        curve_acc.setdefault((name, n_max, combo), []).append(arrays["mean_fitness"])
        if combo.model == "brg":
            brg_acc.setdefault((name, n_max), []).append(arrays["best_fitness"])
        row = {
            "instance": name,
            "n_max": n_max,
            "model": combo.model,
            "N": combo.N,
            "survivors": str(combo.survivors) if combo.survivors else "",
            "mu": combo.mu if combo.mu is not None else "",
            "hidden": combo.hidden_mult * fitness.n if combo.hidden_mult else "",
            "iterations": combo.iterations if combo.iterations is not None else "",
            "eta": combo.eta if combo.eta is not None else "",
            "batch": combo.batch if combo.batch is not None else "",
            "seed": seed,
            "runtime_seconds": runtime,
        }
        for cp in grid.checkpoints:
            row[f"mean_fitness_at_{cp}"] = arrays["mean_fitness"][cp]
        rows.append(row)

    curves = {k: np.vstack(v).mean(axis=0) for k, v in curve_acc.items()}
    best: dict[tuple[str, int, str, int], tuple[SweepCombo, float]] = {}
    for name, _ in grid.instances:
        for n_max in grid.n_max_values:
            for model in grid.models:
                if model == "brg":
                    continue
                for cp_idx, cp in enumerate(grid.checkpoints):
                    cands = [
                        (combo, curves[(name, int(n_max), combo)][cp])
                        for (nm, nmax, combo) in curves
                        if nm == name and nmax == int(n_max) and combo.model == model
                    ]
                    if not cands:
                        continue
                    tie_rng = derive_rng(master_seed, 10_000 + cp_idx)
                    winner = pick_best(cands, tie_rng)
                    best[(name, int(n_max), model, cp)] = (
                        winner,
                        curves[(name, int(n_max), winner)][cp],
                    )

    brg_best = {k: np.vstack(v).mean(axis=0) for k, v in brg_acc.items()}
    report = SweepReport(grid, rows, curves, best, excluded, brg_best)
    if out is not None:
        _write_sweep_outputs(report, out)
    return report


def _write_sweep_outputs(report: SweepReport, out: Path) -> None:
    if report.rows:
        header = list(report.rows[0].keys())
        _write_csv(out / "sweep.csv", header, ([r[h] for h in header] for r in report.rows))
    best_rows = [
        [name, n_max, model, cp, combo.label(), value]
        for (name, n_max, model, cp), (combo, value) in sorted(
            report.best.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2], kv[0][3])
        )
    ]
    _write_csv(
        out / "best.csv",
        ["instance", "n_max", "model", "checkpoint", "combination", "mean_fitness"],
        best_rows,
    )
    with open(out / "exclusions.txt", "w", newline="\n") as fh:
        total = 0
        for n_max in sorted(report.excluded):
            for combo, reason in report.excluded[n_max]:
                fh.write(f"n_max={n_max} {combo.label()}: {reason}\n")
                total += 1
        fh.write(f"{total} exclusions\n")


# ---------------------------------------------------------------------------
# Random-mutation trend table
# ---------------------------------------------------------------------------

@dataclass
class TrendTable:
    """Mean fitness at the final generation for a grid of RM parameters.

    Percent rows whose survivor count rounds to one or zero are blank: a
    single survivor duplicates the absolute-count row and zero survivors
    cannot run.
    """

    population_sizes: tuple[int, ...]
    survivor_specs: tuple[SurvivorSpec, ...]
    mu_values: tuple[int, ...]
    values: dict[tuple[str, int, int], float | None]
    runs: int

    def cell(self, spec: SurvivorSpec | str, mu: int, N: int) -> float | None:
        label = str(spec)
        return self.values[(label, mu, N)]

    def write_csv(self, path: str | Path) -> None:
        header = ["survivors", "mu"] + [f"N{N}" for N in self.population_sizes]
        rows = []
        for spec in self.survivor_specs:
            for mu in self.mu_values:
                row = [str(spec), mu]
                for N in self.population_sizes:
                    v = self.values[(str(spec), mu, N)]
                    row.append("" if v is None else v)
                rows.append(row)
        _write_csv(path, header, rows)


def _trend_cell_blank(spec: SurvivorSpec, N: int) -> bool:
    return spec.kind == "percent" and spec.raw_count(N) <= 1


def _trend_job(args) -> float:
    fitness, spec, mu, N, generations, seed = args
    config = ModelConfig(
        model=RmModel(mu=mu, survivors=spec),
        population_size=N,
        fitness=fitness,
        generations=generations,
        seed=seed,
    )
    return float(run_trajectory(config)["mean_fitness"][-1])


def run_trend_table(
    fitness: FitnessFn,
    population_sizes: Sequence[int] = (2, 10, 100, 1000, 10000),
    survivor_specs: Sequence[SurvivorSpec] = (
        SurvivorSpec.top_count(1),
        SurvivorSpec.top_percent(1),
        SurvivorSpec.top_percent(5),
        SurvivorSpec.top_percent(10),
        SurvivorSpec.top_percent(50),
    ),
    mu_values: Sequence[int] = (1, 2, 3, 4, 5),
    generations: int = 500,
    runs: int = 1,
    master_seed: int = 0,
    jobs: int = 1,
) -> TrendTable:
    """Mean fitness at the final generation across the RM parameter grid."""
    cells = []
    args_list = []
    idx = 0
    for spec in survivor_specs:
        for mu in mu_values:
            for N in population_sizes:
                if _trend_cell_blank(spec, N):
                    continue
                for rep in range(runs):
                    args_list.append(
                        (fitness, spec, mu, N, generations, derive_seed(master_seed, idx))
                    )
                    cells.append((str(spec), mu, N))
                    idx += 1
    outputs = _run_jobs(_trend_job, args_list, jobs)
    acc: dict[tuple[str, int, int], list[float]] = {}
    for key, value in zip(cells, outputs):
        acc.setdefault(key, []).append(value)
    values: dict[tuple[str, int, int], float | None] = {}
    for spec in survivor_specs:
        for mu in mu_values:
            for N in population_sizes:
                key = (str(spec), mu, N)
                values[key] = (
                    None if _trend_cell_blank(spec, N) else float(np.mean(acc[key]))
                )
    return TrendTable(
        tuple(population_sizes), tuple(survivor_specs), tuple(mu_values), values, runs
    )


# ---------------------------------------------------------------------------
# Genome completion test
# ---------------------------------------------------------------------------

class FitnessSwitch(FitnessFn):
    """Fitness schedule that swaps landscapes at a fixed generation."""

    def __init__(self, before: FitnessFn, after: FitnessFn, switch_generation: int | None):
        if before.n != after.n:
            raise ValueError("switched landscapes must share the genome length")
        self.before = before
        self.after = after
        self.switch_generation = switch_generation
        self.n = before.n

    def for_generation(self, generation: int) -> FitnessFn:
        if self.switch_generation is not None and generation >= self.switch_generation:
            return self.after
        return self.before

    def many(self, genomes: np.ndarray) -> np.ndarray:
        return self.before.many(genomes)


@dataclass
class CompletionConfig:
    """Genome-completion study on an even-parity landscape."""

    parity_n: int = 3
    population_size: int = 10_000
    generations: int = 30
    runs: int = 100
    completion_count: int = 100
    clamp_length: int | None = None  # default: all but the last position
    learning_rate: float = 0.1
    batch_size: int = 10
    iterations: int = 20
    hidden: int | None = None  # default: genome length
    survivor_percent: float = 50.0
    symmetric_pairs: bool = False
    master_seed: int = 0

    def __post_init__(self):
        if not 2 <= self.parity_n <= 5:
            raise ValueError("parity_n must be between 2 and 5")
        clamp = self.clamp_length if self.clamp_length is not None else self.parity_n - 1
        if not 1 <= clamp <= self.parity_n:
            raise ValueError("clamp_length must be in [1, n]")
        if self.completion_count < 2:
            raise ValueError("completion_count must be >= 2")


@dataclass
class CompletionResult:
    generations: np.ndarray  # generations 1..G (no model exists at generation 0)
    inferred: CurveStats
    shuffled: CurveStats
    sampled_with_replacement: bool
    shuffled_per_generation: int

    def write_csv(self, path: str | Path) -> None:
        header = [
            "generation",
            "inferred_mean_fitness", "inferred_se",
            "shuffled_mean_fitness", "shuffled_se",
            "runs", "sampled_with_replacement",
        ]
        rows = [
            [g, self.inferred.mean[i], self.inferred.se[i],
             self.shuffled.mean[i], self.shuffled.se[i],
             self.inferred.n_runs, int(self.sampled_with_replacement)]
            for i, g in enumerate(self.generations)
        ]
        _write_csv(path, header, rows)


def _completion_job(args) -> tuple[np.ndarray, np.ndarray, bool]:
    cfg, seed = args
    n = cfg.parity_n
    fitness = ParityFitness(n)
    clamp_len = cfg.clamp_length if cfg.clamp_length is not None else n - 1
    positions = np.arange(clamp_len)
    free = np.setdiff1d(np.arange(n), positions)
    model_config = ModelConfig(
        model=RbmModel(
            rbm=RbmConfig(
                num_hidden=cfg.hidden if cfg.hidden is not None else n,
                learning_rate=cfg.learning_rate,
                iterations=cfg.iterations,
                batch_size=cfg.batch_size,
            ),
            survivors=SurvivorSpec.top_percent(cfg.survivor_percent),
        ),
        population_size=cfg.population_size,
        fitness=fitness,
        generations=cfg.generations,
        seed=seed,
    )
    # Separate stream so the trajectory is identical with or without the test.
    comp_rng = derive_rng(seed, 1)
    inferred, shuffled = [], []
    flagged = False

    def hook(gen: int, pop: Population, ctx: dict) -> None:
        nonlocal flagged
        if "rbm" not in ctx:
            return
        survivors, rbm = ctx["survivors"], ctx["rbm"]
        count = cfg.completion_count
        if count <= survivors.shape[0]:
            idx = comp_rng.choice(survivors.shape[0], size=count, replace=False)
        else:
            idx = comp_rng.choice(survivors.shape[0], size=count, replace=True)
            flagged = True
        known = survivors[idx][:, positions]
        completed = rbm.complete_many(
            positions, known, gibbs_steps=cfg.iterations, rng=comp_rng
        )
        inferred.append(fitness.many(completed).mean())
        ii, jj = np.triu_indices(count, k=1)
        shuf = completed[ii].copy()
        if free.size:
            shuf[:, free] = completed[jj][:, free]
        values = fitness.many(shuf)
        if cfg.symmetric_pairs:
            other = completed[jj].copy()
            if free.size:
                other[:, free] = completed[ii][:, free]
            values = np.concatenate([values, fitness.many(other)])
        shuffled.append(values.mean())

    run_generation_loop(model_config, hooks=hook)
    return np.array(inferred), np.array(shuffled), flagged


def run_completion_test(cfg: CompletionConfig, jobs: int = 1) -> CompletionResult:
    """Per-generation mean fitness of RBM-completed genomes vs cross-shuffled ones."""
    args = [(cfg, derive_seed(cfg.master_seed, i)) for i in range(cfg.runs)]
    outputs = _run_jobs(_completion_job, args, jobs)
    inferred = aggregate_curves([o[0] for o in outputs])
    shuffled = aggregate_curves([o[1] for o in outputs])
    flagged = any(o[2] for o in outputs)
    pairs = cfg.completion_count * (cfg.completion_count - 1) // 2
    if cfg.symmetric_pairs:
        pairs *= 2
    return CompletionResult(
        np.arange(1, cfg.generations + 1), inferred, shuffled, flagged, pairs
    )


# ---------------------------------------------------------------------------
# Weight/bias ablations
# ---------------------------------------------------------------------------

@dataclass
class AblationConfig:
    fitness: FitnessFn
    population_sizes: Sequence[int] = (100, 1000, 10000)
    modes: Sequence[str] = ABLATIONS
    learning_rate: float = 0.01
    batch_size: int = 10
    iterations: int = 20
    hidden: int | None = None  # default: genome length
    survivor_percent: float = 50.0
    generations: int = 100
    runs: int = 100
    master_seed: int = 0


def _ablation_job(args) -> np.ndarray:
    cfg, N, mode, seed = args
    config = ModelConfig(
        model=RbmModel(
            rbm=RbmConfig(
                num_hidden=cfg.hidden if cfg.hidden is not None else cfg.fitness.n,
                learning_rate=cfg.learning_rate,
                iterations=cfg.iterations,
                batch_size=cfg.batch_size,
                ablation=mode,
            ),
            survivors=SurvivorSpec.top_percent(cfg.survivor_percent),
        ),
        population_size=N,
        fitness=cfg.fitness,
        generations=cfg.generations,
        seed=seed,
    )
    return run_trajectory(config)["mean_fitness"]


def run_ablation(
    cfg: AblationConfig, jobs: int = 1, out_path: str | Path | None = None
) -> dict[tuple[int, str], CurveStats]:
    """Mean-fitness curves for full, weights-only, and biases-only models."""
    args_list, keys = [], []
    idx = 0
    for N in cfg.population_sizes:
        for mode in cfg.modes:
            for rep in range(cfg.runs):
                args_list.append((cfg, N, mode, derive_seed(cfg.master_seed, idx)))
                keys.append((N, mode))
                idx += 1
    outputs = _run_jobs(_ablation_job, args_list, jobs)
    acc: dict[tuple[int, str], list[np.ndarray]] = {}
    for key, curve in zip(keys, outputs):
        acc.setdefault(key, []).append(curve)
    result = {key: aggregate_curves(curves) for key, curves in acc.items()}
    if out_path is not None:
        rows = []
        for (N, mode), stats in result.items():
            for g in range(stats.mean.size):
                rows.append([N, mode, g, stats.mean[g], stats.se[g], stats.n_runs])
        _write_csv(
            out_path,
            ["N", "mode", "generation", "mean_fitness", "se", "runs"],
            rows,
        )
    return result


# ---------------------------------------------------------------------------
# Selection-switch heterozygosity study
# ---------------------------------------------------------------------------

@dataclass
class SwitchConfig:
    """Track produced variation when the selective landscape changes mid-run."""

    fitness_a: FitnessFn
    fitness_b: FitnessFn
    switch_generation: int | None = 30
    population_size: int = 100
    generations: int = 100
    runs: int = 100
    learning_rate: float = 0.1
    batch_size: int = 10
    iterations: int = 20
    hidden: int | None = None
    survivor_percent: float = 50.0
    master_seed: int = 0

    def __post_init__(self):
        if self.fitness_a.n != self.fitness_b.n:
            raise ValueError("both landscapes must share the genome length")


@dataclass
class SwitchResult:
    fitness: CurveStats
    heterozygosity: CurveStats

    def write_csv(self, path: str | Path) -> None:
        header = [
            "generation", "mean_fitness", "fitness_se",
            "mean_heterozygosity", "heterozygosity_se", "runs",
        ]
        rows = [
            [g, self.fitness.mean[g], self.fitness.se[g],
             self.heterozygosity.mean[g], self.heterozygosity.se[g],
             self.fitness.n_runs]
            for g in range(self.fitness.mean.size)
        ]
        _write_csv(path, header, rows)


def _switch_job(args) -> tuple[np.ndarray, np.ndarray]:
    cfg, seed = args
    fitness = FitnessSwitch(cfg.fitness_a, cfg.fitness_b, cfg.switch_generation)
    config = ModelConfig(
        model=RbmModel(
            rbm=RbmConfig(
                num_hidden=cfg.hidden if cfg.hidden is not None else fitness.n,
                learning_rate=cfg.learning_rate,
                iterations=cfg.iterations,
                batch_size=cfg.batch_size,
            ),
            survivors=SurvivorSpec.top_percent(cfg.survivor_percent),
        ),
        population_size=cfg.population_size,
        fitness=fitness,
        generations=cfg.generations,
        seed=seed,
    )
    arrays = run_trajectory(config)
    return arrays["mean_fitness"], arrays["mean_heterozygosity"]


def run_switch(cfg: SwitchConfig, jobs: int = 1) -> SwitchResult:
    args = [(cfg, derive_seed(cfg.master_seed, i)) for i in range(cfg.runs)]
    outputs = _run_jobs(_switch_job, args, jobs)
    return SwitchResult(
        aggregate_curves([o[0] for o in outputs]),
        aggregate_curves([o[1] for o in outputs]),
    )


# ---------------------------------------------------------------------------
# Fitness histograms
# ---------------------------------------------------------------------------

def fitness_histogram(
    values: np.ndarray, population_size: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-width histogram over [0, 1]; densities are counts / population size.

    Returns (bin_lower, density) with bins of width 0.005; the final bin is
    closed so a fitness of exactly 1.0 is counted.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size and (v.min() < 0.0 or v.max() > 1.0):
        raise ValueError("fitness values must lie in [0, 1]")
    nbins = round(1.0 / HISTOGRAM_BIN_WIDTH)
    edges = np.arange(nbins + 1) * HISTOGRAM_BIN_WIDTH
    counts, _ = np.histogram(v, bins=edges)
    denom = population_size if population_size is not None else v.size
    return edges[:-1], counts / denom


@dataclass
class HistogramConfig:
    fitness: FitnessFn
    population_size: int = 1000
    generations: int = 100
    runs: int = 1
    learning_rate: float = 0.01
    batch_size: int = 10
    iterations: int = 20
    hidden: int | None = None
    survivor_percent: float = 50.0
    master_seed: int = 0


@dataclass
class HistogramResult:
    bin_lower: np.ndarray
    densities: np.ndarray  # (generations + 1, bins), averaged over runs
    fitness: CurveStats

    def write_csv(self, path: str | Path) -> None:
        rows = []
        for g in range(self.densities.shape[0]):
            for b in range(self.bin_lower.size):
                if self.densities[g, b] > 0.0:
                    rows.append([self.bin_lower[b], self.densities[g, b], g])
        _write_csv(path, ["bin_lower", "density", "generation"], rows)


def _histogram_job(args) -> tuple[np.ndarray, np.ndarray]:
    cfg, seed = args
    config = ModelConfig(
        model=RbmModel(
            rbm=RbmConfig(
                num_hidden=cfg.hidden if cfg.hidden is not None else cfg.fitness.n,
                learning_rate=cfg.learning_rate,
                iterations=cfg.iterations,
                batch_size=cfg.batch_size,
            ),
            survivors=SurvivorSpec.top_percent(cfg.survivor_percent),
        ),
        population_size=cfg.population_size,
        fitness=cfg.fitness,
        generations=cfg.generations,
        seed=seed,
    )
    hists = []
    means = []

    def hook(gen: int, pop: Population, ctx: dict) -> None:
        _, density = fitness_histogram(pop.fitnesses, pop.size)
        hists.append(density)
        means.append(pop.fitnesses.mean())

    run_generation_loop(config, hooks=hook)
    return np.vstack(hists), np.array(means)


def run_fitness_histogram(cfg: HistogramConfig, jobs: int = 1) -> HistogramResult:
    """Per-generation fitness distributions of an RBM-driven run."""
    args = [(cfg, derive_seed(cfg.master_seed, i)) for i in range(cfg.runs)]
    outputs = _run_jobs(_histogram_job, args, jobs)
    densities = np.mean([o[0] for o in outputs], axis=0)
    fitness = aggregate_curves([o[1] for o in outputs])
    nbins = round(1.0 / HISTOGRAM_BIN_WIDTH)
    bin_lower = np.arange(nbins) * HISTOGRAM_BIN_WIDTH
    return HistogramResult(bin_lower, densities, fitness)
