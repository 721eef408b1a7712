"""graphar: autoregressive modelling and prediction for sequences of
attributed graphs.

The package provides the graph data model with an exact edit distance and
Fréchet statistics, two synthetic graph-generating processes, four
statistical baseline predictors, a trainable neural graph-autoregressive
model, and an experiment harness with a CLI.
"""

from .distance import (
    Correspondence,
    DistanceParams,
    frechet_mean_bruteforce,
    frechet_mean_closed_form,
    frechet_variation,
    ged,
)
from .delaunay import delaunay_adjacency
from .errors import CapabilityError, DatasetFormatError, NumericalError
from .generators import (
    NoiseSpec,
    PmldsConfig,
    RotationalConfig,
    generate_sequence,
    pmlds_step,
    random_orthogonal,
    random_pmlds_config,
    random_rotational_config,
    rotation_omega,
    rotational_step,
)
from .graphs import AttributedGraph, GraphSequence
from .baselines import (
    VarModel,
    load_var_model,
    predict_mart,
    predict_mean,
    predict_move,
    save_var_model,
    var_fit,
    var_predict,
)
from .dataset import export_sequence_csv, load_sequence, save_sequence
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    run_experiment,
    sweep,
)
from .neural import (
    NgarConfig,
    NgarModel,
    adam_step,
    load_model,
    ngar_backward,
    ngar_forward,
    ngar_loss,
    ngar_predict,
    save_model,
    train,
)

__version__ = "0.1.0"
