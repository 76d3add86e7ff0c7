import numpy as np

from frbsplit.exceptions import DimensionError, ValidationError


def as_vector(x, dim: int | None = None, name: str = "x") -> np.ndarray:
    """
    Coerce x to a 1-D float64 array.
    Raises:
        DimensionError: x is not 1-D or its length differs from dim
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(
            f"{name} must be a 1-D vector", params={"shape": arr.shape}
        )
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(
            f"{name} has length {arr.shape[0]}, expected {dim}",
            params={name: arr.shape[0], "dim": dim},
        )
    return arr


def validate_positive(name: str, value: float) -> float:
    """
    Raises:
        ValidationError
    """
    if not value > 0:
        raise ValidationError(f"{name} must be positive", params={name: value})
    return float(value)
