from tensor_nn.matrix import Matrix, as_matrix, as_vector, check_rows
from tensor_nn.dense_net import DenseNet, Layer, NetGradients, forward, backward
from tensor_nn.adam import AdamOptimizer, AdamState, adam_step
from tensor_nn.gumbel import GumbelSoftmaxHead, gumbel_softmax_head
from tensor_nn.checkpoint import load_network, save_network

__all__ = [
    "Matrix", "as_matrix", "as_vector", "check_rows",
    "DenseNet", "Layer", "NetGradients", "forward", "backward",
    "AdamOptimizer", "AdamState", "adam_step",
    "GumbelSoftmaxHead", "gumbel_softmax_head",
    "load_network", "save_network",
]
