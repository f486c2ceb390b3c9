"""Certificate-locked image classifiers.

A locked model behaves like its baseline only on inputs stamped with a
secret pixel motif (the certificate) and deliberately mispredicts on clean
inputs. The lock is installed purely through training data: half of the
training set is stamped and keeps its labels, the other half stays clean
but has its labels corrupted by an interference strategy.
"""

from locknet.errors import (
    ConfigError,
    FormatError,
    LocknetError,
    ShapeError,
    TrainingDiverged,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "FormatError",
    "LocknetError",
    "ShapeError",
    "TrainingDiverged",
    "__version__",
]
