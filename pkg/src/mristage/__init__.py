"""Stage classification from MRI-derived feature tables.

Feature vectors plus sex/age demographics feed a class-weight-balanced
RBF-kernel SVM, evaluated under leave-one-out and repeated hold-out
protocols with per-class metrics and learning curves.
"""

__version__ = "0.1.0"

from .data import (
    ClassWeights,
    DataError,
    Dataset,
    FeatureRecord,
    Standardizer,
    apply_standardizer,
    class_weights,
    concat_demographics,
    fit_standardizer,
    load_csv_dataset,
    load_dataset,
    loo_folds,
    nested_subsets,
    stratified_split,
    write_dataset,
)
from .svm import (
    BinarySvmModel,
    KernelParams,
    SvmError,
    TrainConfig,
    dual_objective,
    rbf_kernel,
    smo_train,
)
from .multiclass import (
    HyperParams,
    MulticlassModel,
    load_bundle,
    predict,
    predict_batch,
    save_bundle,
    train_multiclass,
)
from .metrics import (
    BinaryConfusion,
    ClassMetrics,
    MetricsReport,
    build_report,
    compute_metrics,
    macro_average,
    per_class_confusions,
    render_report,
)
from .harness import (
    CurvePoint,
    EvaluationReport,
    SearchSpace,
    learning_curve,
    random_search,
    run_learning_curve,
    run_loo,
    run_repeated_holdout,
)
