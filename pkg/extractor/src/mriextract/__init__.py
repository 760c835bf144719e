"""Transfer-learning front end: MRI slices to binary feature tables.

A 50-layer residual network pretrained on ImageNet, truncated before its
global pooling and classification layers, maps each 224x224 slice to a
flattened 7x7x2048 activation block (100,352 values). Tables are written
in the feature-table format the classification pipeline consumes.
"""

__version__ = "0.1.0"

from .backbone import FEATURE_DIM, ExtractorError, extract, extract_batch, load_backbone
from .preprocess import IMAGE_SIZE, preprocess
from .table import ExtractorConfig, build_feature_table, read_demographics
