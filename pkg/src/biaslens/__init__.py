"""biaslens: quantify gender bias in text corpora and word embeddings.

The pipeline: acquire documents (Guardian API client or local files),
tokenize into a corpus, slice by year/source, train CBOW embeddings, and
measure six bias axes -- presence, modifier ratio, premodified terms,
androcentric generics, binomial ordering, and embedding associations
against thematic lexicons.
"""

__version__ = "0.1.0"

from .acquisition import (
    IngestManifest,
    LoadStats,
    RawDocument,
    fetch_guardian,
    load_jsonl,
    load_plaintext_dir,
    strip_tags,
    write_jsonl,
)
from .audit import (
    AuditConfig,
    AuditReport,
    canonical_report_json,
    emit_plot_data,
    run_audit,
    validate,
)
from .corpus import (
    Corpus,
    CorpusView,
    DocumentMeta,
    SwapTable,
    TokenizeConfig,
    TokenSequence,
    build_corpus,
    default_swap_table,
    gender_swap,
    load_corpus,
    save_corpus,
    slice_corpus,
    tokenize,
)
from .embedding import (
    EmbeddingModel,
    TrainConfig,
    Vocabulary,
    build_vocab,
    cbow_step,
    cosine,
    export_text_vectors,
    load_model,
    neighbors,
    save_model,
    train_cbow,
)
from .errors import BiasLensError, CredentialError, FormatError, OutOfVocabularyError
from .lexicon import (
    DEFAULT_BINOMIAL_PAIRS,
    DEFAULT_GENERICS_PAIRS,
    GenericsPairTable,
    Lexicon,
    association_anchor_lexicons,
    builtin_classifier_lexicons,
    builtin_gender_lexicons,
    builtin_gender_noun_lexicons,
    expand,
    load_inquirer,
    load_lexicon,
    save_lexicon,
)
from .metrics import (
    AssociationResult,
    BinomialResult,
    GenderAssociation,
    GenericsResult,
    PremodResult,
    PresenceResult,
    association,
    binomial_order,
    generics_trend,
    modifier_ratio,
    paired_association,
    premodified,
    presence,
    token_counts,
)
