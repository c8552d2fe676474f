from .manifest import GENERATORS, DatasetManifest, GlitchClass, Record, require_both_classes, split_manifest
from .metrics import UNDEFINED, Metrics, Verdict, compute_metrics, evaluate, tally

__all__ = [
    "GENERATORS",
    "UNDEFINED",
    "DatasetManifest",
    "GlitchClass",
    "Metrics",
    "Record",
    "Verdict",
    "compute_metrics",
    "evaluate",
    "require_both_classes",
    "split_manifest",
    "tally",
]
