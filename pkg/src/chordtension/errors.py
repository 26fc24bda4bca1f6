"""Exception hierarchy shared across the toolkit."""


class ChordTensionError(Exception):
    """Base class for all toolkit errors."""


# --- score ingestion ---

class NoKernSpine(ChordTensionError):
    pass


class UnsupportedToken(ChordTensionError):
    def __init__(self, message, line_no):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MalformedDuration(ChordTensionError):
    def __init__(self, message, line_no):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MalformedRecord(ChordTensionError):
    pass


class NegativeDuration(ChordTensionError):
    pass


class EmptyInput(ChordTensionError):
    pass


# --- vocabulary / corpus ---

class EmptyCorpus(ChordTensionError):
    pass


# --- embedding ---

class EmptyTrainingData(ChordTensionError):
    pass


class IdOutOfRange(ChordTensionError):
    pass


class VocabMismatch(ChordTensionError):
    """Model loaded against a vocabulary with a different digest."""


# --- tension ---

class NoPrecedingContext(ChordTensionError):
    pass


class SequenceTooShort(ChordTensionError):
    pass


# --- stats ---

class TooFewSamples(ChordTensionError):
    pass


class TooFewGroups(ChordTensionError):
    pass


# --- experiments ---

class TooFewPieces(ChordTensionError):
    pass


class UnknownPiece(ChordTensionError):
    pass


class IndexOutOfRange(ChordTensionError):
    pass
