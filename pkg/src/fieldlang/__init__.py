"""fieldlang: feature extraction, token compression, structured description
generation, and benchmark scoring for 2D velocity-pressure fields."""

from .core import (
    CLOCKWISE,
    COUNTERCLOCKWISE,
    FLOW_CLASSES,
    BadMagicError,
    CsvFormatError,
    DimensionMismatchError,
    FieldLangError,
    FieldSnapshot,
    FluidProperties,
    GridSpec,
    GroundTruth,
    NonFiniteValueError,
    TruncatedPayloadError,
    Violation,
    VortexDescriptor,
    export_csv,
    import_csv,
    load_case,
    load_field,
    save_case,
    save_field,
    validate,
)
from .features import (
    AnalysisReport,
    DetectionParams,
    FlowClassResult,
    KeyPoint,
    analyze,
    classify_flow,
    detect_vortices,
    key_points,
    q_criterion,
    reynolds_number,
    vorticity,
)
from .synth import (
    LambOseenSpec,
    SynthCase,
    gen_cavity_proxy,
    gen_channel,
    gen_lamb_oseen,
    gen_taylor_green,
    gen_uniform,
    iter_suite,
    write_suite,
)
from .codec import (
    Codebook,
    CompressionStats,
    NormMeta,
    RgbFieldImage,
    TokenSequence,
    compression_stats,
    decode,
    encode,
    extract_patches,
    from_rgb,
    load_codebook,
    save_codebook,
    to_rgb,
    train_codebook,
)
from .langgen import (
    PolisherClient,
    Question,
    emit_training_record,
    parse_training_record,
    polish,
    question_bank,
    render_answer,
)
from .bench import (
    BenchReport,
    ManifestEntry,
    emit_report,
    eval_categorize,
    eval_field_analysis,
    eval_reynolds,
    eval_vortices,
    run_benchmark,
)

__version__ = "0.1.0"
