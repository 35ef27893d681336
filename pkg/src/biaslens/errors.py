"""Exception types shared across the toolkit."""


class BiasLensError(Exception):
    """Base class for all biaslens errors."""


class CredentialError(BiasLensError):
    """The remote API rejected our credentials (HTTP 401/403)."""


class FormatError(BiasLensError):
    """A file (corpus, model, lexicon, config) is malformed or truncated."""


class OutOfVocabularyError(BiasLensError, KeyError):
    """A queried word is not present in the embedding vocabulary."""

    def __init__(self, word: str):
        super().__init__(f"word not in vocabulary: {word!r}")
        self.word = word
