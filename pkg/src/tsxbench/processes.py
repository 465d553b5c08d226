"""Seeded generators for the six base time-series processes.

Each process is split into two pure steps: :func:`draw_innovations` pulls the
random streams from a Philox generator, and :func:`simulate` turns those
streams into the observed series.  Keeping the two apart lets callers replay a
recurrence from the exact innovations that produced a sample.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidShape, NonStationaryParameter
from .seeding import derive_seed, make_rng


class ProcessKind(str, Enum):
    GAUSSIAN = "Gaussian"
    HARMONIC = "Harmonic"
    PSEUDO_PERIODIC = "PseudoPeriodic"
    AUTOREGRESSIVE = "Autoregressive"
    CONTINUOUS_AUTOREGRESSIVE = "ContinuousAutoregressive"
    NARMA = "Narma"

    def __str__(self) -> str:
        return self.value


RECURRENT = frozenset(
    {ProcessKind.AUTOREGRESSIVE, ProcessKind.CONTINUOUS_AUTOREGRESSIVE, ProcessKind.NARMA}
)

# a stable NARMA path stays well below this; divergent draws overflow quickly
NARMA_BOUND = 10.0
NARMA_MAX_ATTEMPTS = 1000


@dataclass(frozen=True)
class ProcessParams:
    phi: float = 0.9
    sigma: float = 0.1
    harmonic_frequency: float = 2.0
    amplitude_mean: float = 0.0
    amplitude_std: float = 0.5
    frequency_mean: float = 2.0
    frequency_std: float = 0.01
    narma_order: int = 10
    narma_u_high: float = 0.5
    burn_in: int = 100

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ProcessParams":
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass(frozen=True)
class GenerationSpec:
    process_kind: ProcessKind
    params: ProcessParams = field(default_factory=ProcessParams)
    seed: int = 0
    t_steps: int = 50
    n_features: int = 1

    def __post_init__(self):
        object.__setattr__(self, "process_kind", ProcessKind(self.process_kind))
        validate(self)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_features, self.t_steps)

    def with_seed(self, seed: int) -> "GenerationSpec":
        return dataclasses.replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return {
            "process": self.process_kind.value,
            "params": self.params.to_dict(),
            "seed": int(self.seed),
            "t_steps": self.t_steps,
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationSpec":
        return cls(
            process_kind=ProcessKind(data["process"]),
            params=ProcessParams.from_dict(data.get("params", {})),
            seed=int(data.get("seed", 0)),
            t_steps=int(data["t_steps"]),
            n_features=int(data["n_features"]),
        )


def validate(spec: GenerationSpec) -> None:
    if spec.t_steps < 1 or spec.n_features < 1:
        raise InvalidShape(
            f"t_steps and n_features must be positive, got {spec.t_steps}, {spec.n_features}"
        )
    kind = spec.process_kind
    if kind in (ProcessKind.AUTOREGRESSIVE, ProcessKind.CONTINUOUS_AUTOREGRESSIVE):
        if not abs(spec.params.phi) < 1:
            raise NonStationaryParameter(f"|phi| must be < 1, got {spec.params.phi}")
    if kind is ProcessKind.NARMA and spec.params.narma_order < 1:
        raise InvalidShape("narma_order must be >= 1")
    if spec.params.burn_in < 0:
        raise InvalidShape("burn_in must be >= 0")


def time_grid(t_steps: int) -> np.ndarray:
    """Sampling instants of the periodic processes: ``t_steps`` points on [0, 1)."""
    return np.arange(t_steps) / t_steps


def _length(spec: GenerationSpec) -> int:
    if spec.process_kind in RECURRENT:
        return spec.params.burn_in + spec.t_steps
    return spec.t_steps


def _draw(spec: GenerationSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    p = spec.params
    shape = (spec.n_features, _length(spec))
    kind = spec.process_kind
    streams = {"noise": rng.standard_normal(shape)}
    if kind is ProcessKind.PSEUDO_PERIODIC:
        streams["amplitude"] = rng.normal(p.amplitude_mean, p.amplitude_std, shape)
        streams["frequency"] = rng.normal(p.frequency_mean, p.frequency_std, shape)
    elif kind is ProcessKind.CONTINUOUS_AUTOREGRESSIVE:
        streams["aux_noise"] = rng.standard_normal(shape)
    elif kind is ProcessKind.NARMA:
        streams["u"] = rng.uniform(0.0, p.narma_u_high, shape)
    return streams


def narma_latent(u: np.ndarray, params: ProcessParams) -> np.ndarray:
    """Noise-free NARMA recurrence driven by ``u`` (shape ``(..., L)``)."""
    n = params.narma_order
    y = np.zeros_like(u)
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, u.shape[-1]):
            lo = max(0, t - n)
            window = y[..., lo:t].sum(axis=-1)
            drive = u[..., t - (n - 1)] * u[..., t] if t >= n - 1 else 0.0
            y[..., t] = 0.3 * y[..., t - 1] + 0.05 * y[..., t - 1] * window + 1.5 * drive + 0.1
    return y


def _narma_ok(latent: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(latent)) and np.max(np.abs(latent)) <= NARMA_BOUND)


def draw_innovations(spec: GenerationSpec) -> dict[str, np.ndarray]:
    """Random streams consumed by :func:`simulate` for ``spec``.

    For NARMA the driving input is redrawn (with a derived seed) until the
    latent recurrence stays bounded, so the returned streams always simulate
    to a finite path.
    """
    validate(spec)
    if spec.process_kind is not ProcessKind.NARMA:
        return _draw(spec, make_rng(spec.seed))
    for attempt in range(NARMA_MAX_ATTEMPTS):
        seed = spec.seed if attempt == 0 else derive_seed(spec.seed, "narma-retry", attempt)
        streams = _draw(spec, make_rng(seed))
        if _narma_ok(narma_latent(streams["u"], spec.params)):
            return streams
    raise RuntimeError("NARMA recurrence diverged for every retry")  # pragma: no cover


def simulate(spec: GenerationSpec, streams: dict[str, np.ndarray]) -> np.ndarray:
    """Deterministic transform of the innovation streams into an (N, T) series."""
    p = spec.params
    kind = spec.process_kind
    eps = streams["noise"]
    T = spec.t_steps

    if kind is ProcessKind.GAUSSIAN:
        out = eps
    elif kind is ProcessKind.HARMONIC:
        out = np.sin(2 * np.pi * p.harmonic_frequency * time_grid(T)) + eps
    elif kind is ProcessKind.PSEUDO_PERIODIC:
        phase = 2 * np.pi * streams["frequency"] * time_grid(T)
        out = streams["amplitude"] * np.sin(phase) + eps
    elif kind is ProcessKind.AUTOREGRESSIVE:
        out = lfilter([1.0], [1.0, -p.phi], eps, axis=-1)
    elif kind is ProcessKind.CONTINUOUS_AUTOREGRESSIVE:
        drive = eps + p.sigma * (1 - p.phi) ** 2 * streams["aux_noise"]
        out = lfilter([1.0], [1.0, -p.phi], drive, axis=-1)
    elif kind is ProcessKind.NARMA:
        out = narma_latent(streams["u"], p) + eps
    else:  # pragma: no cover
        raise ValueError(kind)
    return np.ascontiguousarray(out[..., -T:], dtype=np.float64)


def generate_base(spec: GenerationSpec) -> np.ndarray:
    """Draw one (n_features, t_steps) realisation of ``spec``'s process.

    Channels are independent; identical specs give bit-identical output.
    """
    return simulate(spec, draw_innovations(spec))


def sample_reference(spec: GenerationSpec, shape: tuple[int, int], seed: int) -> np.ndarray:
    """Uninformative draw from the generating process (no label constant).

    The result is on the raw scale; datasets normalise it with their own
    parameters before using it as a baseline.
    """
    if tuple(shape) != spec.shape:
        raise InvalidShape(f"reference shape {tuple(shape)} does not match spec {spec.shape}")
    return generate_base(spec.with_seed(derive_seed(seed, "reference")))
