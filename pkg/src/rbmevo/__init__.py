"""Population-based optimization on MAX-SAT and parity landscapes.

Compares an estimation-of-distribution evolutionary model, in which a
restricted Boltzmann machine is trained on the survivors of each generation
and sampled to produce the next one, against random-mutation and pure
random-guessing baselines.
"""

from .evolution import (
    BrgModel,
    GenerationRecord,
    ModelConfig,
    Population,
    RbmModel,
    RmModel,
    SurvivorSpec,
    init_population,
    mean_expected_heterozygosity,
    run_generation_loop,
    select_top,
    step_rbm,
    step_rm,
)
from .rbm import Rbm, RbmConfig, sample_layer
from .sat import (
    CnfInstance,
    DimacsParseError,
    FitnessFn,
    Literal,
    MaxSatFitness,
    ParityFitness,
    emit_dimacs,
    eval_maxsat,
    eval_parity,
    gen_uniform_ksat,
    parse_dimacs,
)

__version__ = "0.1.0"

__all__ = [
    "BrgModel",
    "CnfInstance",
    "DimacsParseError",
    "FitnessFn",
    "GenerationRecord",
    "Literal",
    "MaxSatFitness",
    "ModelConfig",
    "ParityFitness",
    "Population",
    "Rbm",
    "RbmConfig",
    "RbmModel",
    "RmModel",
    "SurvivorSpec",
    "emit_dimacs",
    "eval_maxsat",
    "eval_parity",
    "gen_uniform_ksat",
    "init_population",
    "mean_expected_heterozygosity",
    "parse_dimacs",
    "run_generation_loop",
    "sample_layer",
    "select_top",
    "step_rbm",
    "step_rm",
]
