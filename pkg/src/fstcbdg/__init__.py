"""Lightweight unsupervised federated learning over frozen encoder features.

A linear softmax head is initialized from class-prototype text features,
refined on each client by self-training against moving-average soft
pseudo-labels plus class-balanced synthetic features drawn around the
prototypes, and combined on the server by parameter averaging.
"""

from fstcbdg._kernels import BACKEND as kernel_backend
from fstcbdg.balance import ClassCounts, SynthBatch, budgets, equal_budgets, sample
from fstcbdg.errors import ConfigError, FormatError, NumericError, ShapeError
from fstcbdg.federation import (
    ClientState,
    RoundMetrics,
    ServerState,
    TrainConfig,
    aggregate,
    evaluate_accuracy,
    local_update,
    local_update_supervised,
    run_centralized_probe,
    run_centralized_selftrain,
    run_federated,
    run_supervised_fedavg,
    sample_participants,
    server_prepare,
)
from fstcbdg.model import (
    LinearModel,
    LossValue,
    OptimizerState,
    forward,
    gradients,
    init_from_prototypes,
    loss_self_train,
    loss_synth,
    sgd_step,
)
from fstcbdg.partition import PartitionMap, partition_iid, partition_lda, partition_sharding
from fstcbdg.pseudo import (
    EntropyReport,
    SoftLabelTable,
    entropy_report,
    hard_labels,
    init_table,
    update_table,
    zero_shot_probs,
)
from fstcbdg.synthworld import (
    SynthWorldConfig,
    class_centers,
    make_dataset,
    make_prototypes,
    make_world,
)

__version__ = "0.1.0"
