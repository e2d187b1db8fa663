"""
格点数据流水线：网格、MGRID 容器、划分、标准化、批次、合成数据
"""

from mjollnir.core.data.grid import GridSample, GridSpec, calendar_days
from mjollnir.core.data.mgrid import GridDataset, MgridWriter, load_dataset, read_header, write_dataset
from mjollnir.core.data.normalization import NormStats, compute_anomaly_threshold, compute_norm_stats
from mjollnir.core.data.dataset import Batch, BatchLoader, DatasetSplits, batch_indices, make_batch, split_by_year
from mjollnir.core.data.synthetic import SYNTHETIC_CHANNELS, generate_synthetic_dataset

__all__ = [
    "GridSample",
    "GridSpec",
    "GridDataset",
    "MgridWriter",
    "load_dataset",
    "read_header",
    "write_dataset",
    "NormStats",
    "compute_anomaly_threshold",
    "compute_norm_stats",
    "Batch",
    "BatchLoader",
    "DatasetSplits",
    "batch_indices",
    "make_batch",
    "split_by_year",
    "SYNTHETIC_CHANNELS",
    "calendar_days",
    "generate_synthetic_dataset",
]
