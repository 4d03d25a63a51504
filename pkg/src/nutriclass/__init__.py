"""Child malnutrition staging and classification toolkit.

Survey ingestion and Z-score staging, PCA, entropy decision trees, random
forests, RBF SVMs trained by SMO, an Adam-trained MLP, classification
metrics and Pearson risk-factor tables, all on numpy.
"""
from ._backend import BACKEND
from .errors import DomainError, NumericError, NutriclassError, ReportVersionError, SchemaError

__version__ = "0.1.0"

__all__ = ["BACKEND", "DomainError", "NumericError", "NutriclassError", "ReportVersionError",
           "SchemaError", "__version__"]
