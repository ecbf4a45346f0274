"""Exception hierarchy shared across the pipeline.

Every error carries the name of the module that raised it so the CLI can
report ``<module>.<ErrorName>`` in its machine-readable failure output.
"""


class SeaflowError(Exception):
    module = "seaflow"

    def to_dict(self):
        return {"error": type(self).__name__, "module": self.module, "message": str(self)}


# geo
class MissingPair(SeaflowError, KeyError):
    module = "geo"

    def __str__(self):
        return Exception.__str__(self)


# shipnet
class UnknownPort(SeaflowError):
    module = "shipnet"


class SelfLoop(SeaflowError):
    module = "shipnet"


class NoConvergence(SeaflowError):
    module = "shipnet"


class DegenerateRange(SeaflowError):
    module = "shipnet"


class InsufficientPseudo(SeaflowError):
    module = "shipnet"


# linkpred
class SingleClass(SeaflowError):
    module = "linkpred"


class NonFiniteFeature(SeaflowError):
    module = "linkpred"


class TooFewRows(SeaflowError):
    module = "linkpred"


class EmptyInput(SeaflowError):
    module = "linkpred"


# tensorcore
class ShapeMismatch(SeaflowError, ValueError):
    module = "tensorcore"


class NonScalarLoss(SeaflowError, ValueError):
    module = "tensorcore"


# gravity
class UnknownRegion(SeaflowError):
    module = "gravity"


class EmptySampleSet(SeaflowError):
    module = "gravity"


class TooFewSamples(SeaflowError):
    module = "gravity"


# evalkit
class EmptyComparison(SeaflowError):
    module = "evalkit"


# bwra
class EmptyFlows(SeaflowError):
    module = "bwra"


class DegenerateDistribution(SeaflowError):
    module = "bwra"


# io / pipeline
class SchemaMismatch(SeaflowError):
    module = "pipeline"

    def __init__(self, message, path=None, line=None, column=None):
        super().__init__(message)
        self.path = path
        self.line = line
        self.column = column

    def to_dict(self):
        d = super().to_dict()
        d.update(path=self.path, line=self.line, column=self.column)
        return d


class BadNumber(SchemaMismatch):
    pass


class BadParams(SeaflowError, ValueError):
    module = "pipeline"
