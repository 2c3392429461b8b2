from data.schema import ColumnBlock, ColumnSpec, Schema
from data.dataset import Dataset, encode_frame, load_csv, split, write_csv
from data.synthetic import (
    toy_classification,
    toy_regression,
    toy_regression_mean,
    toy_regression_split,
)
