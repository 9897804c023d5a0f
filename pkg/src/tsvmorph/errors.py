"""Exception types shared across the pipeline."""


class TsvMorphError(Exception):
    """Base class for all data/validation errors raised by tsvmorph."""


# surface raw format
class BadMagic(TsvMorphError):
    pass


class TruncatedPayload(TsvMorphError):
    pass


class NonFiniteSample(TsvMorphError):
    pass


class ZeroPitch(TsvMorphError):
    pass


# synthetic generator
class InvalidParams(TsvMorphError):
    pass


class LabelCountMismatch(TsvMorphError):
    pass


# cropper
class ImageTooSmall(TsvMorphError):
    pass


class BoxTooLarge(TsvMorphError):
    pass


# augmentation
class WrongSize(TsvMorphError):
    pass


class UnlabeledRecord(TsvMorphError):
    pass


# engine
class KernelLargerThanInput(TsvMorphError):
    pass


class WindowLargerThanInput(TsvMorphError):
    pass


class SingletonBatchInTrainMode(TsvMorphError):
    pass


class NoForwardCache(TsvMorphError):
    pass


class ShapeMismatch(TsvMorphError):
    pass


class ShapeUnderflow(TsvMorphError):
    pass


# training harness
class OverlappingSplits(TsvMorphError):
    pass


class EmptyClass(TsvMorphError):
    pass
