from src.sources.csv_reader import read_csv_split, read_labeled_csv, split_dataset
from src.sources.repository import make_dataset
from src.sources.synthetic import GENERATORS, blobs, generate_split, spirals, xor

__all__ = [
    "GENERATORS",
    "blobs",
    "generate_split",
    "make_dataset",
    "read_csv_split",
    "read_labeled_csv",
    "spirals",
    "split_dataset",
    "xor",
]
