"""Exception types shared across the pipeline."""


class CimonError(Exception):
    """Base class for every error raised by this package."""


class MalformedHeader(CimonError):
    """File magic, version, or structural header field is invalid."""


class ShapeMismatch(CimonError):
    """Array or file payload does not have the promised shape."""


class NonFiniteValue(CimonError):
    """A NaN or infinity appeared where finite data is required."""

    def __init__(self, row, view=None):
        self.row = row
        self.view = view
        where = f"view {view}, " if view is not None else ""
        super().__init__(f"non-finite value in {where}row {row}")


class ZeroRow(CimonError):
    """An all-zero feature row (cosine distance undefined)."""

    def __init__(self, row, view=None):
        self.row = row
        self.view = view
        where = f"view {view}, " if view is not None else ""
        super().__init__(f"all-zero feature vector in {where}row {row}")


class DegenerateAugmentation(CimonError):
    """Augmentation could not produce a non-zero row within the retry budget."""

    def __init__(self, row):
        self.row = row
        super().__init__(f"row {row} stayed all-zero after 16 augmentation retries")


class InsufficientPairs(CimonError):
    """Too few pairwise distances to fit the distance distribution."""


class EigenFailure(CimonError):
    """The symmetric eigensolver did not converge."""


class NonFiniteActivation(CimonError):
    """Network forward pass produced NaN or infinity."""


class CacheMismatch(CimonError):
    """Backward called with a cache that does not match the model or gradient."""


class BatchTooSmall(CimonError):
    """Contrastive loss needs at least two items per batch."""


class ZeroCodeRow(CimonError):
    """A relaxed code row is all-zero, so its cosine direction is undefined."""

    def __init__(self, row, view=None):
        self.row = row
        self.view = view
        where = f"view {view}, " if view is not None else ""
        super().__init__(f"all-zero relaxed code in {where}row {row}")


class IndexOutOfRange(CimonError):
    """A batch index does not address the precomputed semantic matrices."""


class NonFiniteLoss(CimonError):
    """Training loss became NaN or infinity."""

    def __init__(self, epoch, batch):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")


class CodeLengthMismatch(CimonError):
    """Query and database codes have different bit lengths."""


class EmptyDatabase(CimonError):
    """Retrieval evaluation needs a non-empty database."""


class GridOutOfRange(CimonError):
    """A top-N grid value exceeds the database size."""
