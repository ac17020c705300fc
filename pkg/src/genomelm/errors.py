"""Exception types shared across the toolkit."""


class GenomeLmError(Exception):
    """Base class for all toolkit errors."""


# --- sequences ---------------------------------------------------------------

class InvalidSymbol(GenomeLmError):
    def __init__(self, position, symbol):
        self.position = position
        self.symbol = symbol
        super().__init__(f"invalid symbol {symbol!r} at position {position}")


class AmbiguousBase(GenomeLmError):
    def __init__(self, position):
        self.position = position
        super().__init__(f"ambiguous base 'N' at position {position}")


# --- tokenization ------------------------------------------------------------

class ContainsAmbiguousBase(GenomeLmError):
    pass


class SpecialTokenInStream(GenomeLmError):
    def __init__(self, token_id):
        self.token_id = token_id
        super().__init__(f"special token id {token_id} in nucleotide token stream")


class OffsetOutOfRange(GenomeLmError):
    pass


class EmptyCorpus(GenomeLmError):
    pass


# --- ingestion ---------------------------------------------------------------

class MalformedLocation(GenomeLmError):
    def __init__(self, line):
        self.line = line
        super().__init__(f"malformed feature location: {line!r}")


class MissingOrigin(GenomeLmError):
    pass


class BadRow(GenomeLmError):
    def __init__(self, line_no, reason):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"bad row at line {line_no}: {reason}")


class UnknownSequenceId(GenomeLmError):
    pass


class InsufficientData(GenomeLmError):
    def __init__(self, group, needed, available):
        self.group = group
        self.needed = needed
        self.available = available
        super().__init__(
            f"insufficient data for {group}: need {needed}, have {available}"
        )


# --- language models ---------------------------------------------------------

class BadSmoothing(GenomeLmError):
    pass


class UnknownTokenId(GenomeLmError):
    pass


class PeerUnavailable(GenomeLmError):
    pass


class ProtocolViolation(GenomeLmError):
    def __init__(self, detail):
        self.detail = detail
        super().__init__(f"bridge protocol violation: {detail}")


class BridgeTimeout(GenomeLmError):
    pass


# --- sampling / recovery -----------------------------------------------------

class ContextOverflow(GenomeLmError):
    pass


class UnknownPrefixToken(GenomeLmError):
    pass


class ReferenceTooShort(GenomeLmError):
    pass


class VocabularyMismatch(GenomeLmError):
    pass


# --- variant scoring ---------------------------------------------------------

class RefMismatch(GenomeLmError):
    def __init__(self, pos, expected, found):
        self.pos = pos
        self.expected = expected
        self.found = found
        super().__init__(
            f"reference mismatch at {pos}: variant says {expected!r}, genome has {found!r}"
        )


class DegenerateLabels(GenomeLmError):
    pass


# --- design ------------------------------------------------------------------

class TooFewSamples(GenomeLmError):
    pass


class SingularSystem(GenomeLmError):
    pass


class PoolTooSmall(GenomeLmError):
    pass


# --- analytics ---------------------------------------------------------------

class EmptyInput(GenomeLmError):
    pass


class ConstantInput(GenomeLmError):
    pass


class SequenceTooShort(GenomeLmError):
    pass


class DegenerateCovariance(GenomeLmError):
    pass


class SingleCluster(GenomeLmError):
    pass
