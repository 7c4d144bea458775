"""radfuse: chest X-ray classification by feature fusion.

Handcrafted radiomic descriptors (308 per image) are fused with
kernel-PCA-reduced deep CNN features and classified by a one-vs-all
linear SVM.
"""

from .classifier import (
    CLASSES,
    SvmModel,
    SvmTrainConfig,
    standardize_apply,
    standardize_fit,
    svm_decision,
    svm_fit,
    svm_predict,
)
from .deepfeat import (
    KpcaModel,
    OnnxProvider,
    PrecomputedProvider,
    deep_features,
    kpca_fit,
    kpca_transform,
)
from .evalmetrics import (
    EvalReport,
    confidence_interval,
    confusion_matrix,
    covid_rates,
    evaluate,
    macro_metrics,
)
from .featurefile import FeatureFile, read_rff1, write_rff1
from .handcrafted import (
    FEATURE_GROUPS,
    HANDCRAFTED_LENGTH,
    extract_groups,
    extract_handcrafted,
    fft_features,
    glcm_features,
    glcm_matrix,
    gldm_features,
    gldm_histogram,
    lbp_features,
    texture_features,
    wavelet_features,
)
from .pipeline import (
    DatasetRecord,
    PipelineModel,
    SplitSpec,
    build_feature_table,
    ingest,
    load_model,
    predict,
    save_model,
    split,
    train_pipeline,
)
from .preprocess import (
    ClaheConfig,
    PreprocessConfig,
    clahe,
    load_image,
    preprocess_image,
    resize_bilinear,
    to_grayscale,
    to_model_input,
)
from .stats import N_STATS, STAT_NAMES, compute_stats

__version__ = "0.1.0"
