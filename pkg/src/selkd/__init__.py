"""Selective knowledge distillation toolkit for parallel-decoding translation.

Train a small CTC evaluator on distilled targets, score every raw
translation by how closely the evaluator reproduces it, and train a
student on a per-update mix that keeps high-scoring raw targets and
replaces the rest with their distilled versions under a rising
threshold. Alignment-based complexity metrics quantify what the
selection did to the data.
"""

__version__ = "0.1.0"
