"""Entity-marker embedding export from a pretrained encoder."""

from .data import InstanceRecord, RelationRecord, read_dataset, read_relation_info
from .export import ExportConfig, ExportOutcome, MarkedEncoder, export_store, marked_words
from .store import StoreWriter

__all__ = [
    "ExportConfig",
    "ExportOutcome",
    "InstanceRecord",
    "MarkedEncoder",
    "RelationRecord",
    "StoreWriter",
    "export_store",
    "marked_words",
    "read_dataset",
    "read_relation_info",
]
