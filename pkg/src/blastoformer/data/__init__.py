from .cases import emit_case
from .dataset import (Dataset, NormStats, Sample, denormalize, fit_norm, generate_dataset,
                      log_transform, make_sample, normalize, split_sizes, unlog)
from .io import (load_dataset, read_field, read_sample, save_dataset, write_field,
                 write_sample)
from .oracle import oracle_pressure
from .probes import parse_probe_file, probe_locations, write_probe_file

__all__ = [
    "emit_case", "Dataset", "NormStats", "Sample", "denormalize", "fit_norm",
    "generate_dataset", "log_transform", "make_sample", "normalize", "split_sizes", "unlog",
    "load_dataset", "read_field", "read_sample", "save_dataset", "write_field", "write_sample",
    "oracle_pressure", "parse_probe_file", "probe_locations", "write_probe_file",
]
