"""No-reference light field image quality assessment.

The pipeline: load a light field (`lfio`), convert views to CIELAB
(`colorspace`), stack them along four angular orientations (`viewstack`),
reduce each stack to angular principal components (`tucker`), summarize
spatial statistics of the leading component (`pcsc`) and the similarity
curve of the stack against it (`tavi`), pool orientations and regress to
quality scores (`pipeline`, `regress`). `synth` generates labeled
synthetic benchmarks and `cli` exposes the whole flow as subcommands.
"""

from .colorspace import LabImage, srgb_to_cielab, srgb_to_lab_array
from .lfio import (
    DatasetManifest,
    LightField,
    LightFieldError,
    ManifestEntry,
    ManifestError,
    load_lightfield,
    load_manifest,
    save_manifest,
    write_lightfield,
)
from .pcsc import AggdParams, DctEntropyFeatures, MggdParams, MscnField, dct_entropy, fit_aggd, fit_mggd, mscn, pcsc_features
from .pipeline import (
    FEATURE_COLUMNS,
    FEATURE_SIZE,
    OrientationFeatures,
    extract_orientation_features,
    select_columns,
    stack_features,
)
from .regress import (
    EvalSummary,
    LogisticParams,
    PooledFeatures,
    QualityModel,
    cross_validate,
    load_model,
    logistic_apply,
    logistic_fit,
    metrics,
    pool,
    read_features_csv,
    save_model,
    svr_predict,
    svr_train,
    write_features_csv,
)
from .synth import DistortionSpec, SynthSpec, build_dataset, distort, generate
from .tavi import CoocFeatures, QuadFit, SsCurve, cooc_features, fit_quadratic, ss_curve, ssim, tavi_features
from .tucker import (
    ComponentStack,
    TuckerFactors,
    angular_components,
    first_principal_component,
    fold,
    mode_product,
    tucker_als,
    unfold,
)
from .viewstack import ORIENTATIONS, ViewStack, build_stacks, filter_usable

__version__ = "0.1.0"

__all__ = [
    "AggdParams",
    "ComponentStack",
    "CoocFeatures",
    "DatasetManifest",
    "DctEntropyFeatures",
    "DistortionSpec",
    "EvalSummary",
    "FEATURE_COLUMNS",
    "FEATURE_SIZE",
    "LabImage",
    "LightField",
    "LightFieldError",
    "LogisticParams",
    "ManifestEntry",
    "ManifestError",
    "MggdParams",
    "MscnField",
    "ORIENTATIONS",
    "OrientationFeatures",
    "PooledFeatures",
    "QuadFit",
    "QualityModel",
    "SsCurve",
    "SynthSpec",
    "TuckerFactors",
    "ViewStack",
    "angular_components",
    "build_dataset",
    "build_stacks",
    "cooc_features",
    "cross_validate",
    "dct_entropy",
    "distort",
    "extract_orientation_features",
    "filter_usable",
    "first_principal_component",
    "fit_aggd",
    "fit_mggd",
    "fit_quadratic",
    "fold",
    "generate",
    "load_lightfield",
    "load_manifest",
    "load_model",
    "logistic_apply",
    "logistic_fit",
    "metrics",
    "mode_product",
    "mscn",
    "pcsc_features",
    "pool",
    "read_features_csv",
    "save_manifest",
    "save_model",
    "select_columns",
    "srgb_to_cielab",
    "srgb_to_lab_array",
    "ss_curve",
    "ssim",
    "stack_features",
    "svr_predict",
    "svr_train",
    "tavi_features",
    "tucker_als",
    "unfold",
    "write_features_csv",
    "write_lightfield",
]
