"""Exception types raised across the package."""


class TrainTrackError(Exception):
    """Base class for every error raised by this package."""


class UnknownLetter(TrainTrackError, ValueError):
    pass


class EmptyGeneratorSet(TrainTrackError, ValueError):
    pass


class NotInjective(TrainTrackError):
    """An endomorphism visibly fails to be injective."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ZeroMatrix(TrainTrackError, ValueError):
    pass


class NotIrreducible(TrainTrackError):
    """The transition matrix is reducible; ``witness`` is an invariant edge set."""

    def __init__(self, message, witness=None, state=None):
        super().__init__(message)
        self.witness = witness
        self.state = state


class NotAVertexImage(TrainTrackError, ValueError):
    pass


class IllegalFoldRequest(TrainTrackError, ValueError):
    pass


class NotValenceOne(TrainTrackError, ValueError):
    pass


class NotValenceTwo(TrainTrackError, ValueError):
    pass


class NotOneGate(TrainTrackError, ValueError):
    pass


class BudgetExhausted(TrainTrackError):
    """The move budget ran out; ``state`` can be passed back to resume."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class CollapsedEdgeImage(TrainTrackError, ValueError):
    pass


class NonExpanding(TrainTrackError):
    pass


class PowerBudgetExhausted(TrainTrackError):
    pass


class ZeroLength(TrainTrackError, ValueError):
    pass


class LegalCycleInParabolic(TrainTrackError):
    def __init__(self, message, loop=None):
        super().__init__(message)
        self.loop = loop


class HorizonExceeded(TrainTrackError):
    pass


class NotTypePreserving(TrainTrackError, ValueError):
    pass


class DepthExhausted(TrainTrackError):
    def __init__(self, message, chain=None):
        super().__init__(message)
        self.chain = chain


class TrivialElement(TrainTrackError, ValueError):
    pass


class NoCriticalConstant(TrainTrackError):
    pass


class GroupIsZ(TrainTrackError, ValueError):
    pass


class SchemaError(TrainTrackError, ValueError):
    pass
