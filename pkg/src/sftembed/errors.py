"""Exception hierarchy.

Every error carries a short machine tag (used in reports and CLI output) and
the process exit code the CLI maps it to:
0 success, 2 parse error, 3 precondition error, 4 corruption, 5 internal.
"""


class EmbeddingError(Exception):
    tag = "internal"
    exit_code = 5

    def __init__(self, message: str = "", **details):
        super().__init__(message)
        self.details = details
        self.stage = details.pop("stage", None)

    def __str__(self):
        msg = super().__str__()
        prefix = f"[{self.stage}] " if self.stage else ""
        return f"{prefix}{self.tag}: {msg}"


class ParseError(EmbeddingError, ValueError):
    tag = "parse"
    exit_code = 2


class InputError(EmbeddingError, ValueError):
    tag = "input"
    exit_code = 3


class PreconditionError(EmbeddingError, ValueError):
    tag = "precondition"
    exit_code = 3


class NoConnectorError(PreconditionError):
    tag = "no-connector"


class MarkerNotFoundError(PreconditionError):
    tag = "marker-not-found"

    @property
    def best_entropy(self):
        return self.details.get("best_entropy")


class NoMarkerAnchorError(PreconditionError):
    tag = "no-marker-anchor"


class WindowsCollideError(PreconditionError):
    tag = "windows-collide"


class BoundaryError(PreconditionError):
    tag = "boundary"

    @property
    def index(self):
        return self.details.get("index")


class EntropyOverflowError(PreconditionError):
    tag = "entropy-overflow"

    @property
    def needed(self):
        return self.details.get("needed")

    @property
    def available(self):
        return self.details.get("available")


class GranularityError(PreconditionError):
    tag = "granularity"


class EntropyGapError(PreconditionError):
    tag = "entropy-gap"


class DictionaryMissError(PreconditionError):
    tag = "dictionary-miss"


class CorruptionError(EmbeddingError):
    tag = "corruption"
    exit_code = 4

    @property
    def offset(self):
        return self.details.get("offset")


class AmbiguousDensityError(CorruptionError):
    tag = "ambiguous-density"


class PsiMismatchError(EmbeddingError):
    tag = "psi-mismatch"
    exit_code = 4


class LayoutError(EmbeddingError):
    tag = "layout"
    exit_code = 5
