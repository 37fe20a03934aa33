"""Single-layer hypergraph collaborative network, deterministic SGD, and
empirical verification of its uniform-stability generalization bounds."""

from .bounds import (
    BoundInputs,
    gap_bound,
    gap_perturbation_bound,
    kappa,
    kappa0,
    lemma1_constant,
    lemma2_constant,
)
from .data_io import (
    LabeledHypergraphDataset,
    build_cocitation,
    export_csv,
    load_dataset,
    read_csv,
    save_dataset,
    synth_planted,
)
from .experiments import (
    EpochTrace,
    ExperimentConfig,
    GapRecord,
    SplitSpec,
    StabilityReport,
    epoch_trace_experiment,
    gap_experiment,
    make_split,
    normalization_comparison,
    perturb,
    stability_trial,
    training_set,
    vertex_context_for,
)
from .features import FeatureMatrix, column_normalize, spectral_norm_dense
from .hypergraph import (
    DegreeVectors,
    Hypergraph,
    NormalizedIncidence,
    Scale,
    degrees,
    from_edge_lists,
    spectral_norm,
)
from .model import (
    EdgeContext,
    Theta,
    VertexContext,
    build_edge_context,
    build_vertex_context,
    forward_edge,
    forward_vertex,
    grad_edge,
    grad_vertex,
    preactivation_edge,
    preactivation_vertex,
)
from .regularity import (
    Activation,
    ClippedBce,
    Elu,
    Loss,
    RegularityConstants,
    Sigmoid,
    SmoothedRelu,
    Squared,
    Tanh,
    activation_from_name,
    loss_from_name,
    regularity_constants,
)
from .trainer import (
    Randomization,
    Sample,
    SgdConfig,
    TrainingSet,
    derive_seed,
    draw_randomization,
    init_params,
    paired_train,
    sgd_train,
)

__version__ = "0.1.0"
