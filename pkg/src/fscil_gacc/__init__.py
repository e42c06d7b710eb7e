"""Generalized-accuracy evaluation and feature-rectification simulation for FSCIL."""
from .corner import CornerSpec, corner_matrix, generate
from .metrics import (
    GaccCurve,
    MetricReport,
    aacc_overall,
    aacc_session,
    compare,
    evaluate,
    forgetting_block,
    gacc_alpha,
    gacc_auc,
    gacc_curve,
    gacc_overall,
    hacc,
    lacc,
    novel_only,
    tacc_overall,
    tacc_session,
)
from .task_matrix import AccuracyMatrix, TaskLayout, emit_matrix, parse_matrix, read_matrix

__version__ = "0.1.0"
