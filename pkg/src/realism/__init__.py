"""Realism scores from randomness deficiency over finite model mixtures.

Every log quantity in the library is in nats; the ``critic`` CLI converts
to bits on request.
"""

from .bench import RocResult, Scenario, roc, run_scenario
from .complexity import Codec, code_length, compress, compression_deficiency, decompress
from .continuous import (
    GaussianMixtureDensity,
    deterministic_flow_step,
    langevin_chain,
    langevin_step,
    realism_descent,
    typicality_gradient,
)
from .critic import (
    CriticReport,
    batched_critic,
    mdl_critic,
    np_test,
    sequential_critic,
    universal_critic,
)
from .divergence import f_div_bound, kl_exact, mmd2, optimal_critic, sandwich_verify, tv_exact
from .mixture import Mixture, default_zoo, log_mix_prob, posterior, prior_from_description_bits
from .models import (
    AlphabetError,
    ConstantSymbol,
    IIDCategorical,
    MarkovChain,
    MemorizedDataset,
    Model,
    PeriodicPattern,
    Sequence,
    UnsupportedModelError,
    Uniform,
    bernoulli,
)
from .typicality import enumerate_typical_set, strong_typicality_distance, weak_typicality

__version__ = "0.1.0"

__all__ = [
    "AlphabetError",
    "UnsupportedModelError",
    "Sequence",
    "Model",
    "IIDCategorical",
    "Uniform",
    "ConstantSymbol",
    "MarkovChain",
    "PeriodicPattern",
    "MemorizedDataset",
    "bernoulli",
    "Mixture",
    "default_zoo",
    "prior_from_description_bits",
    "log_mix_prob",
    "posterior",
    "CriticReport",
    "universal_critic",
    "batched_critic",
    "sequential_critic",
    "mdl_critic",
    "np_test",
    "weak_typicality",
    "strong_typicality_distance",
    "enumerate_typical_set",
    "Codec",
    "compress",
    "decompress",
    "code_length",
    "compression_deficiency",
    "kl_exact",
    "tv_exact",
    "f_div_bound",
    "optimal_critic",
    "mmd2",
    "sandwich_verify",
    "GaussianMixtureDensity",
    "langevin_step",
    "langevin_chain",
    "deterministic_flow_step",
    "typicality_gradient",
    "realism_descent",
    "Scenario",
    "RocResult",
    "roc",
    "run_scenario",
]
