"""Channel modeling with mixture density networks.

Simulates Nakagami fading and log-normal shadowing channels, fits a deep
mixture density network to (distance, received power) samples, and scores
the fit with kernel-density overlap metrics.  Ships a CLI (`chanmdn`) for
dataset generation, training, transfer learning, evaluation and plotting.
"""

__version__ = "0.1.0"

from .channels import (  # noqa: F401
    LogNormalConfig,
    NakagamiConfig,
    NoiseConfig,
    ScenarioConfig,
    analytic_moments,
    builtin_scenario,
)
from .dataset import Dataset, generate_dataset, read_dataset, write_dataset  # noqa: F401
from .mdn import Architecture, NetworkWeights, init_weights, mixture_at  # noqa: F401
from .metrics import EvalReport, KdeConfig, evaluate, overlapped_area  # noqa: F401
from .model_io import ModelMeta, load_model, save_model  # noqa: F401
from .pipeline import SplitSpec, scale, split  # noqa: F401
from .training import TrainConfig, train_experiment, transfer_train  # noqa: F401
