from .layers import (
    dense_backward,
    dense_forward,
    gated_pool_backward,
    gated_pool_forward,
    gcn_backward,
    gcn_forward,
    lstm_forward,
    lstm_layer_backward,
    lstm_layer_forward,
    normalize_adjacency,
    relu,
    sigmoid,
)
from .model import (
    NgarConfig,
    NgarModel,
    backward_batch,
    decode_heads,
    forward_batch,
    load_model,
    loss_terms,
    ngar_backward,
    ngar_forward,
    ngar_loss,
    ngar_predict,
    save_model,
)
from .training import TrainingHistory, adam_step, train
