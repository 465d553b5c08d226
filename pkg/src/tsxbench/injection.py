"""Ground-truth masks, class-dependent shifts and min-max normalisation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateSeparation, InvalidShape, MaskInfeasible
from .seeding import make_rng


class LocationMode(str, Enum):
    FIXED = "Fixed"
    MOVING = "Moving"
    POSITIONAL = "Positional"


class SizeClass(str, Enum):
    NORMAL = "Normal"
    SMALL = "Small"
    RARE_TIME = "RareTime"
    RARE_FEATURE = "RareFeature"


class FeatureKind(str, Enum):
    MIDDLE = "Middle"
    SMALL_MIDDLE = "SmallMiddle"
    MOVING_MIDDLE = "MovingMiddle"
    MOVING_SMALL = "MovingSmall"
    RARE_TIME = "RareTime"
    RARE_FEATURE = "RareFeature"
    MOVING_RARE_TIME = "MovingRareTime"
    MOVING_RARE_FEATURE = "MovingRareFeature"
    POSITIONAL_TIME = "PositionalTime"
    POSITIONAL_FEATURE = "PositionalFeature"

    def __str__(self) -> str:
        return self.value


_LAYOUT = {
    FeatureKind.MIDDLE: (LocationMode.FIXED, SizeClass.NORMAL),
    FeatureKind.SMALL_MIDDLE: (LocationMode.FIXED, SizeClass.SMALL),
    FeatureKind.MOVING_MIDDLE: (LocationMode.MOVING, SizeClass.NORMAL),
    FeatureKind.MOVING_SMALL: (LocationMode.MOVING, SizeClass.SMALL),
    FeatureKind.RARE_TIME: (LocationMode.FIXED, SizeClass.RARE_TIME),
    FeatureKind.RARE_FEATURE: (LocationMode.FIXED, SizeClass.RARE_FEATURE),
    FeatureKind.MOVING_RARE_TIME: (LocationMode.MOVING, SizeClass.RARE_TIME),
    FeatureKind.MOVING_RARE_FEATURE: (LocationMode.MOVING, SizeClass.RARE_FEATURE),
    FeatureKind.POSITIONAL_TIME: (LocationMode.POSITIONAL, SizeClass.NORMAL),
    FeatureKind.POSITIONAL_FEATURE: (LocationMode.POSITIONAL, SizeClass.NORMAL),
}

# feature-axis kinds have no feature axis to work on when N == 1
_UNIVARIATE_FALLBACK = {
    FeatureKind.RARE_FEATURE: FeatureKind.RARE_TIME,
    FeatureKind.MOVING_RARE_FEATURE: FeatureKind.MOVING_RARE_TIME,
    FeatureKind.POSITIONAL_FEATURE: FeatureKind.POSITIONAL_TIME,
}


@dataclass(frozen=True)
class MaskSpec:
    kind: FeatureKind

    def __post_init__(self):
        object.__setattr__(self, "kind", FeatureKind(self.kind))

    @property
    def location_mode(self) -> LocationMode:
        return _LAYOUT[self.kind][0]

    @property
    def size_class(self) -> SizeClass:
        return _LAYOUT[self.kind][1]

    @property
    def positional_axis(self) -> int | None:
        if self.kind is FeatureKind.POSITIONAL_TIME:
            return 1
        if self.kind is FeatureKind.POSITIONAL_FEATURE:
            return 0
        return None

    def effective(self, n_features: int) -> "MaskSpec":
        if n_features == 1 and self.kind in _UNIVARIATE_FALLBACK:
            return MaskSpec(_UNIVARIATE_FALLBACK[self.kind])
        return self


@dataclass
class LabeledInstance:
    series: np.ndarray
    label: int
    mask: np.ndarray | None


@dataclass
class NormalizationParams:
    minimum: np.ndarray
    maximum: np.ndarray

    @property
    def span(self) -> np.ndarray:
        return self.maximum - self.minimum

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        span = self.span[:, None]
        constant = span == 0
        out = (x - self.minimum[:, None]) / np.where(constant, 1.0, span)
        return np.where(constant, 0.5, out)

    def invert(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        span = self.span[:, None]
        return np.where(span == 0, self.minimum[:, None], z * span + self.minimum[:, None])

    def to_dict(self) -> dict:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationParams":
        return cls(np.asarray(data["min"], dtype=np.float64), np.asarray(data["max"], dtype=np.float64))


def normal_extent(dim: int) -> int:
    """Box side strictly above 30% of ``dim``."""
    return min(dim, math.ceil(0.3 * dim) + 1)


def below_fraction(dim: float, fraction: float) -> int:
    """Largest integer strictly below ``fraction * dim``."""
    return max(0, math.ceil(fraction * dim) - 1)


def small_extents(n_features: int, t_steps: int) -> tuple[int, int]:
    if n_features == 1:
        return 1, max(1, below_fraction(t_steps, 0.10))
    root = math.sqrt(0.10)
    return max(1, below_fraction(n_features, root)), max(1, below_fraction(t_steps, root))


def _extents(spec: MaskSpec, n_features: int, t_steps: int) -> tuple[int, int]:
    size = spec.size_class
    if size is SizeClass.NORMAL:
        fe, te = normal_extent(n_features), normal_extent(t_steps)
        if spec.positional_axis == 0:
            fe = min(fe, n_features // 2)
        elif spec.positional_axis == 1:
            te = min(te, t_steps // 2)
    elif size is SizeClass.SMALL:
        fe, te = small_extents(n_features, t_steps)
        if fe * te >= 0.10 * n_features * t_steps:
            fe = te = 0
    elif size is SizeClass.RARE_TIME:
        fe, te = normal_extent(n_features), below_fraction(t_steps, 0.05)
    else:
        fe, te = below_fraction(n_features, 0.05), normal_extent(t_steps)
    if fe < 1 or te < 1:
        raise MaskInfeasible(
            f"{spec.kind.value} cannot be placed on shape ({n_features}, {t_steps})"
        )
    return fe, te


def build_mask(
    spec: MaskSpec,
    shape: tuple[int, int],
    instance_seed: int = 0,
    label: int | None = None,
) -> np.ndarray:
    """Boolean (N, T) mask of the informative cells for one instance.

    Fixed kinds ignore ``instance_seed``.  Moving kinds draw the box offset
    from it.  Positional kinds need ``label``: class 1 places the box in the
    first half of the positional axis and class 0 in the second half.
    """
    n_features, t_steps = map(int, shape)
    if n_features < 1 or t_steps < 1:
        raise InvalidShape(f"invalid shape {shape}")
    spec = MaskSpec(spec.kind if isinstance(spec, MaskSpec) else spec).effective(n_features)
    fe, te = _extents(spec, n_features, t_steps)

    mode = spec.location_mode
    if mode is LocationMode.FIXED:
        f0, t0 = (n_features - fe) // 2, (t_steps - te) // 2
    elif mode is LocationMode.MOVING:
        rng = make_rng(instance_seed, "mask-offset")
        f0 = int(rng.integers(0, n_features - fe + 1))
        t0 = int(rng.integers(0, t_steps - te + 1))
    else:
        if label not in (0, 1):
            raise MaskInfeasible(f"{spec.kind.value} needs a class label to place its box")
        f0, t0 = (n_features - fe) // 2, (t_steps - te) // 2
        axis = spec.positional_axis
        dim, extent = (n_features, fe) if axis == 0 else (t_steps, te)
        half = dim // 2
        start = (half - extent) // 2 if label == 1 else dim - half + (half - extent) // 2
        if axis == 0:
            f0 = start
        else:
            t0 = start

    mask = np.zeros((n_features, t_steps), dtype=bool)
    mask[f0:f0 + fe, t0:t0 + te] = True
    return mask


def inject_label(
    series: np.ndarray,
    mask: np.ndarray,
    label: int,
    constant: float = 1.0,
    additive: bool = False,
) -> LabeledInstance:
    """Shift the masked cells by ``+constant`` (class 1) or ``-constant`` (class 0).

    With ``additive=True`` both classes receive ``+constant``; positional kinds
    use this because the box location already carries the label.
    """
    if not constant > 0:
        raise DegenerateSeparation(f"injection constant must be > 0, got {constant}")
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise MaskInfeasible("empty ground-truth mask")
    series = np.asarray(series, dtype=np.float64)
    if mask.shape != series.shape:
        raise InvalidShape(f"mask {mask.shape} does not match series {series.shape}")
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    sign = 1.0 if (label == 1 or additive) else -1.0
    shifted = series.copy()
    shifted[mask] += sign * constant
    return LabeledInstance(shifted, int(label), mask)


def fit_normalization(x_train: np.ndarray) -> NormalizationParams:
    """Per-feature min/max over all training instances and time steps."""
    x_train = np.asarray(x_train, dtype=np.float64)
    if x_train.ndim != 3 or x_train.shape[0] == 0:
        raise InvalidShape("training data must be a nonempty (n, N, T) array")
    return NormalizationParams(x_train.min(axis=(0, 2)), x_train.max(axis=(0, 2)))


def normalize(
    train: list[LabeledInstance], test: list[LabeledInstance]
) -> tuple[list[LabeledInstance], list[LabeledInstance], NormalizationParams]:
    if not train:
        raise InvalidShape("normalisation needs a nonempty training split")
    params = fit_normalization(np.stack([inst.series for inst in train]))

    def _apply(items):
        return [LabeledInstance(params.apply(i.series), i.label, i.mask) for i in items]

    return _apply(train), _apply(test), params
