"""Plain-text experiment manifests.

A manifest is an INI-style file: section headers, one ``key = value`` per
line, lists comma-separated. The [run] section names the experiment kind and
the master seed; the remaining sections configure the fitness landscape and
the experiment itself. Paths are resolved relative to the manifest file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evolution import BrgModel, ModelConfig, RbmModel, RmModel, SurvivorSpec
from .experiments import (
    AblationConfig,
    CompletionConfig,
    HistogramConfig,
    SweepGrid,
    SwitchConfig,
)
from .rbm import ABLATIONS, RbmConfig
from .sat import FitnessFn, MaxSatFitness, ParityFitness, gen_uniform_ksat, parse_dimacs

__all__ = ["ManifestError", "RunManifest", "load_manifest", "KINDS"]

KINDS = (
    "trajectory",
    "sweep",
    "trend_table",
    "completion",
    "ablation",
    "switch",
    "histogram",
)


class ManifestError(ValueError):
    """Invalid manifest; the message names the offending section/key."""


@dataclass
class RunManifest:
    path: Path
    kind: str
    seed: int
    out: Path | None
    jobs: int
    generations: int | None
    runs: int | None
    sections: dict[str, dict[str, str]]

    def section(self, name: str) -> dict[str, str]:
        return self.sections.get(name, {})

    def get(self, section: str, key: str, default: str | None = None) -> str | None:
        return self.section(section).get(key, default)

    def require(self, section: str, key: str) -> str:
        value = self.get(section, key)
        if value is None:
            raise ManifestError(f"[{section}] {key}: required key is missing")
        return value

    def _convert(self, section: str, key: str, raw: str, conv):
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"[{section}] {key}: {exc}") from None

    def get_int(self, section: str, key: str, default: int | None = None) -> int | None:
        raw = self.get(section, key)
        return default if raw is None else self._convert(section, key, raw, int)

    def get_float(self, section: str, key: str, default: float | None = None) -> float | None:
        raw = self.get(section, key)
        return default if raw is None else self._convert(section, key, raw, float)

    def get_bool(self, section: str, key: str, default: bool = False) -> bool:
        raw = self.get(section, key)
        if raw is None:
            return default
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ManifestError(f"[{section}] {key}: not a boolean: {raw!r}")

    def get_list(self, section: str, key: str, conv, default=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        items = [t.strip() for t in raw.split(",") if t.strip()]
        return [self._convert(section, key, t, conv) for t in items]

    def resolve_path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.path.parent / p


def load_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep keys case-sensitive
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc}") from exc
    except configparser.Error as exc:
        raise ManifestError(f"malformed manifest: {exc}") from exc
    sections = {name: dict(parser[name]) for name in parser.sections()}
    man = RunManifest(
        path=path, kind="", seed=0, out=None, jobs=1,
        generations=None, runs=None, sections=sections,
    )
    kind = man.require("run", "kind")
    if kind not in KINDS:
        raise ManifestError(f"[run] kind: unknown experiment kind {kind!r}")
    man.kind = kind
    seed = man.get_int("run", "seed")
    if seed is None:
        raise ManifestError("[run] seed: an explicit seed is required")
    man.seed = seed
    out = man.get("run", "out")
    man.out = man.resolve_path(out) if out is not None else None
    man.jobs = man.get_int("run", "jobs", 1)
    man.generations = man.get_int("run", "generations")
    man.runs = man.get_int("run", "runs")
    return man


# ---------------------------------------------------------------------------
# Builders: manifest sections -> experiment objects
# ---------------------------------------------------------------------------

def build_fitness(man: RunManifest, section: str = "fitness") -> FitnessFn:
    kind = man.require(section, "kind")
    if kind == "parity":
        n = man.get_int(section, "n")
        if n is None:
            raise ManifestError(f"[{section}] n: parity landscape needs a size")
        return ParityFitness(n)
    if kind != "maxsat":
        raise ManifestError(f"[{section}] kind: unknown fitness kind {kind!r}")
    instance = man.get(section, "instance")
    if instance is not None:
        return MaxSatFitness(load_instance(man, section, "instance"))
    for key in ("n", "k", "ratio", "instance_seed"):
        if man.get(section, key) is None:
            raise ManifestError(
                f"[{section}] {key}: required for a generated instance "
                "(or give an 'instance' path)"
            )
    rng = np.random.default_rng(man.get_int(section, "instance_seed"))
    return MaxSatFitness(
        gen_uniform_ksat(
            man.get_int(section, "n"),
            man.get_int(section, "k"),
            man.get_float(section, "ratio"),
            rng,
        )
    )


def load_instance(man: RunManifest, section: str, key: str):
    path = man.resolve_path(man.require(section, key))
    if not path.exists():
        raise ManifestError(f"[{section}] {key}: no such file: {path}")
    with open(path) as fh:
        return parse_dimacs(fh)


def _hidden_units(man: RunManifest, section: str, n: int, default: str = "1x") -> int:
    raw = man.get(section, "hidden", default)
    if raw.endswith("x"):
        return int(raw[:-1]) * n
    return int(raw)


def _survivors(man: RunManifest, section: str, default: str | None = None) -> SurvivorSpec:
    raw = man.get(section, "survivors", default)
    if raw is None:
        raise ManifestError(f"[{section}] survivors: required key is missing")
    try:
        return SurvivorSpec.parse(raw)
    except ValueError as exc:
        raise ManifestError(f"[{section}] survivors: {exc}") from None


def build_trajectory_config(man: RunManifest) -> ModelConfig:
    fitness = build_fitness(man)
    section = "model"
    mtype = man.require(section, "type")
    population = man.get_int(section, "population_size")
    if population is None:
        raise ManifestError("[model] population_size: required key is missing")
    if mtype == "rm":
        model = RmModel(
            mu=man.get_int(section, "mu", 1),
            survivors=_survivors(man, section),
        )
    elif mtype == "rbm":
        eta = man.get_float(section, "eta")
        if eta is None:
            raise ManifestError("[model] eta: required for an RBM model")
        cfg = RbmConfig(
            num_hidden=_hidden_units(man, section, fitness.n),
            learning_rate=eta,
            iterations=man.get_int(section, "iterations", 20),
            batch_size=man.get_int(section, "batch", 10),
            gibbs_steps=man.get_int(section, "gibbs_steps"),
        )
        model = RbmModel(
            rbm=cfg,
            survivors=_survivors(man, section),
            persistence=man.get(section, "persistence", "fresh"),
        )
    elif mtype == "brg":
        model = BrgModel()
    else:
        raise ManifestError(f"[model] type: unknown model {mtype!r}")
    generations = man.generations
    if generations is None:
        raise ManifestError("[run] generations: required for a trajectory run")
    try:
        config = ModelConfig(
            model=model,
            population_size=population,
            fitness=fitness,
            generations=generations,
            seed=man.seed,
        )
        config.validate()
    except ValueError as exc:
        raise ManifestError(f"[model]: {exc}") from None
    return config


def build_sweep_grid(man: RunManifest) -> SweepGrid:
    section = "sweep"
    inst_paths = man.get_list(section, "instances", str)
    instances: list[tuple[str, FitnessFn]] = []
    if inst_paths:
        for p in inst_paths:
            path = man.resolve_path(p)
            if not path.exists():
                raise ManifestError(f"[sweep] instances: no such file: {path}")
            with open(path) as fh:
                instances.append((Path(p).stem, MaxSatFitness(parse_dimacs(fh))))
    else:
        instances.append(("fitness", build_fitness(man)))
    n_max = man.get_list(section, "n_max", int)
    if not n_max:
        raise ManifestError("[sweep] n_max: at least one maximum population size is required")
    defaults = SweepGrid(instances=instances, n_max_values=n_max)
    surv = lambda raw: SurvivorSpec.parse(raw)
    grid = SweepGrid(
        instances=instances,
        n_max_values=n_max,
        rbm_n=man.get_list(section, "rbm_n", int, list(defaults.rbm_n)),
        rbm_survivors=man.get_list(section, "rbm_survivors", surv, list(defaults.rbm_survivors)),
        rbm_hidden_mult=man.get_list(
            section, "rbm_hidden", lambda s: int(s.rstrip("x")), list(defaults.rbm_hidden_mult)
        ),
        rbm_iterations=man.get_list(section, "rbm_iterations", int, list(defaults.rbm_iterations)),
        rbm_eta=man.get_list(section, "rbm_eta", float, list(defaults.rbm_eta)),
        rbm_batch=man.get_list(section, "rbm_batch", int, list(defaults.rbm_batch)),
        rm_n=man.get_list(section, "rm_n", int, list(defaults.rm_n)),
        rm_survivors=man.get_list(section, "rm_survivors", surv, list(defaults.rm_survivors)),
        rm_mu=man.get_list(section, "rm_mu", int, list(defaults.rm_mu)),
        models=man.get_list(section, "models", str, list(defaults.models)),
        checkpoints=man.get_list(section, "checkpoints", int, list(defaults.checkpoints)),
        generations=man.generations,
        replicates=man.runs if man.runs is not None else 1,
    )
    for model in grid.models:
        if model not in ("rbm", "rm", "brg"):
            raise ManifestError(f"[sweep] models: unknown model {model!r}")
    return grid


def build_completion_config(man: RunManifest) -> CompletionConfig:
    section = "completion"
    try:
        return CompletionConfig(
            parity_n=man.get_int(section, "parity_n", 3),
            population_size=man.get_int(section, "population_size", 10_000),
            generations=man.generations if man.generations is not None else 30,
            runs=man.runs if man.runs is not None else 100,
            completion_count=man.get_int(section, "count", 100),
            clamp_length=man.get_int(section, "clamp_length"),
            learning_rate=man.get_float(section, "eta", 0.1),
            batch_size=man.get_int(section, "batch", 10),
            iterations=man.get_int(section, "iterations", 20),
            hidden=man.get_int(section, "hidden"),
            survivor_percent=man.get_float(section, "survivor_percent", 50.0),
            symmetric_pairs=man.get_bool(section, "symmetric_pairs", False),
            master_seed=man.seed,
        )
    except ValueError as exc:
        raise ManifestError(f"[completion]: {exc}") from None


def build_ablation_config(man: RunManifest) -> AblationConfig:
    section = "ablation"
    modes = man.get_list(section, "modes", str, list(ABLATIONS))
    for mode in modes:
        if mode not in ABLATIONS:
            raise ManifestError(f"[ablation] modes: unknown mode {mode!r}")
    fitness = build_fitness(man)
    return AblationConfig(
        fitness=fitness,
        population_sizes=man.get_list(section, "population_sizes", int, [100, 1000, 10000]),
        modes=modes,
        learning_rate=man.get_float(section, "eta", 0.01),
        batch_size=man.get_int(section, "batch", 10),
        iterations=man.get_int(section, "iterations", 20),
        hidden=man.get_int(section, "hidden"),
        survivor_percent=man.get_float(section, "survivor_percent", 50.0),
        generations=man.generations if man.generations is not None else 100,
        runs=man.runs if man.runs is not None else 100,
        master_seed=man.seed,
    )


def build_switch_config(man: RunManifest) -> SwitchConfig:
    section = "switch"
    fitness_a = MaxSatFitness(load_instance(man, section, "instance_a"))
    fitness_b = MaxSatFitness(load_instance(man, section, "instance_b"))
    switch_gen = man.get_int(section, "generation")
    try:
        return SwitchConfig(
            fitness_a=fitness_a,
            fitness_b=fitness_b,
            switch_generation=switch_gen if switch_gen else None,
            population_size=man.get_int(section, "population_size", 100),
            generations=man.generations if man.generations is not None else 100,
            runs=man.runs if man.runs is not None else 100,
            learning_rate=man.get_float(section, "eta", 0.1),
            batch_size=man.get_int(section, "batch", 10),
            iterations=man.get_int(section, "iterations", 20),
            hidden=man.get_int(section, "hidden"),
            survivor_percent=man.get_float(section, "survivor_percent", 50.0),
            master_seed=man.seed,
        )
    except ValueError as exc:
        raise ManifestError(f"[switch]: {exc}") from None


def build_histogram_config(man: RunManifest) -> HistogramConfig:
    section = "histogram"
    return HistogramConfig(
        fitness=build_fitness(man),
        population_size=man.get_int(section, "population_size", 1000),
        generations=man.generations if man.generations is not None else 100,
        runs=man.runs if man.runs is not None else 1,
        learning_rate=man.get_float(section, "eta", 0.01),
        batch_size=man.get_int(section, "batch", 10),
        iterations=man.get_int(section, "iterations", 20),
        hidden=man.get_int(section, "hidden"),
        survivor_percent=man.get_float(section, "survivor_percent", 50.0),
        master_seed=man.seed,
    )


def build_trend_args(man: RunManifest) -> dict:
    section = "trend"
    surv = lambda raw: SurvivorSpec.parse(raw)
    return {
        "fitness": build_fitness(man),
        "population_sizes": man.get_list(
            section, "population_sizes", int, [2, 10, 100, 1000, 10000]
        ),
        "survivor_specs": man.get_list(
            section, "survivors", surv,
            [SurvivorSpec.top_count(1), SurvivorSpec.top_percent(1),
             SurvivorSpec.top_percent(5), SurvivorSpec.top_percent(10),
             SurvivorSpec.top_percent(50)],
        ),
        "mu_values": man.get_list(section, "mu", int, [1, 2, 3, 4, 5]),
        "generations": man.generations if man.generations is not None else 500,
        "runs": man.runs if man.runs is not None else 1,
        "master_seed": man.seed,
    }
