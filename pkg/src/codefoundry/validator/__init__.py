#!/usr/bin/env python3
"""
CodeFoundry - Validator Module
Four-stage validation pipeline (Security, Syntax, Execution, Accuracy),
golden datasets, first-pass statistics and the seeded fault matrix.
"""

from .faults import (
    FAULT_STAGES,
    FaultMatrixReport,
    MatrixRecord,
    SeededFault,
    run_fault_matrix,
    seed_fault,
)
from .report import (
    STAGE_ORDER,
    Finding,
    FirstPassRecord,
    GoldenCase,
    StageOutcome,
    StageReport,
    ValidationReport,
    ValidationStage,
    first_pass_rates,
    load_golden,
    parse_golden,
)
from .stages import (
    DEFAULT_ACCURACY_THRESHOLD,
    PipelineConfig,
    run_accuracy,
    run_execution,
    run_pipeline,
    run_security,
    run_syntax,
    scan_code_texts,
)

__all__ = [
    "DEFAULT_ACCURACY_THRESHOLD",
    "FAULT_STAGES",
    "FaultMatrixReport",
    "Finding",
    "FirstPassRecord",
    "GoldenCase",
    "MatrixRecord",
    "PipelineConfig",
    "STAGE_ORDER",
    "SeededFault",
    "StageOutcome",
    "StageReport",
    "ValidationReport",
    "ValidationStage",
    "first_pass_rates",
    "load_golden",
    "parse_golden",
    "run_accuracy",
    "run_execution",
    "run_fault_matrix",
    "run_pipeline",
    "run_security",
    "run_syntax",
    "scan_code_texts",
    "seed_fault",
]
