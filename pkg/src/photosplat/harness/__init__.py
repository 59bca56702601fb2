from .baseline import make_sparse_baseline
from .compare import CompareConfig, ComparisonResult, TraceRecord, TrainingTrace, run_comparison
from .dataset import LoadedDataset, load_dataset, write_dataset
from .outputs import parse_trace_csv, write_outputs
from .reference import REPLICA_REFERENCE, reference_summary_lines
from .synthetic import SceneConfig, SyntheticScene, generate_synthetic_scene

__all__ = [
    "CompareConfig",
    "ComparisonResult",
    "LoadedDataset",
    "REPLICA_REFERENCE",
    "SceneConfig",
    "SyntheticScene",
    "TraceRecord",
    "TrainingTrace",
    "generate_synthetic_scene",
    "load_dataset",
    "make_sparse_baseline",
    "parse_trace_csv",
    "reference_summary_lines",
    "run_comparison",
    "write_dataset",
    "write_outputs",
]
