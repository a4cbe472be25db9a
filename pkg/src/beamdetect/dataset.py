"""Random damage scenarios, FEM-generated training samples, scaling and CSV I/O."""

import csv
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, FormatError, InvalidConfig
from .fem import BeamSpec, solve_static


class InputKind(str, Enum):
    DISPLACEMENT = "displacement"
    STRAIN = "strain"


@dataclass(frozen=True)
class DamageScenario:
    factors: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.factors, dtype=float)
        if f.ndim != 1 or f.size == 0:
            raise DimensionMismatch("factors must be a non-empty 1-D vector")
        if np.any(f <= 0) or np.any(f > 1):
            raise ValueError("stiffness reduction factors must lie in (0, 1]")
        object.__setattr__(self, "factors", f)

    @classmethod
    def undamaged(cls, n_elements):
        return cls(np.ones(n_elements))

    def damaged_elements(self):
        return [i + 1 for i, ee in enumerate(self.factors) if ee < 1.0]


@dataclass(frozen=True)
class SamplerConfig:
    """``max_damaged_elements=None`` means no cap beyond the element count."""

    p_element_damaged: float = 0.3
    ee_floor: float = 0.2
    max_damaged_elements: int | None = None

    def __post_init__(self):
        if not 0 < self.ee_floor < 1:
            raise InvalidConfig(f"ee_floor must be in (0, 1), got {self.ee_floor}")
        if not 0 <= self.p_element_damaged <= 1:
            raise InvalidConfig(
                f"p_element_damaged must be in [0, 1], got {self.p_element_damaged}")
        if self.max_damaged_elements is not None and self.max_damaged_elements < 0:
            raise InvalidConfig("max_damaged_elements must be nonnegative")


def sample_scenario(rng, n_elements, cfg=SamplerConfig()):
    """Mark each element damaged with probability ``p_element_damaged``.

    If more elements are marked than ``max_damaged_elements``, a random subset
    of that size is kept. Damaged elements get ``ee ~ U[ee_floor, 1)``.
    """
    damaged = np.flatnonzero(rng.random(n_elements) < cfg.p_element_damaged)
    cap = n_elements if cfg.max_damaged_elements is None else cfg.max_damaged_elements
    if damaged.size > cap:
        damaged = np.sort(rng.choice(damaged, size=cap, replace=False))
    factors = np.ones(n_elements)
    factors[damaged] = rng.uniform(cfg.ee_floor, 1.0, size=damaged.size)
    return DamageScenario(factors)


@dataclass(frozen=True)
class Sample:
    input: np.ndarray
    target: np.ndarray


@dataclass
class Dataset:
    input_kind: InputKind
    samples: list
    spec: BeamSpec = field(default_factory=BeamSpec)

    def __post_init__(self):
        self.input_kind = InputKind(self.input_kind)
        if not self.samples:
            raise ValueError("dataset needs at least one sample")
        ni, nt = self.samples[0].input.shape, self.samples[0].target.shape
        for i, s in enumerate(self.samples):
            if s.input.shape != ni or s.target.shape != nt:
                raise DimensionMismatch(f"sample {i} has inconsistent dimensions")

    def __len__(self):
        return len(self.samples)

    @property
    def inputs(self):
        return np.array([s.input for s in self.samples])

    @property
    def targets(self):
        return np.array([s.target for s in self.samples])


def response_vector(response, input_kind):
    if InputKind(input_kind) is InputKind.STRAIN:
        return response.strains
    return response.displacements_m


def sample_rng(seed, index):
    """Independent stream for sample ``index``, regardless of execution order."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def make_sample(spec, scenario, input_kind):
    response = solve_static(spec, scenario)
    return Sample(response_vector(response, input_kind).copy(), scenario.factors.copy())


def generate_dataset(spec, n_samples, input_kind, seed, cfg=SamplerConfig(), workers=1):
    """Sample 0 is always the undamaged beam; sample ``i`` uses stream ``(seed, i)``."""
    if n_samples < 1:
        raise InvalidConfig(f"n_samples must be >= 1, got {n_samples}")
    input_kind = InputKind(input_kind)

    def build(i):
        if i == 0:
            scenario = DamageScenario.undamaged(spec.n_elements)
        else:
            scenario = sample_scenario(sample_rng(seed, i), spec.n_elements, cfg)
        return make_sample(spec, scenario, input_kind)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(build, range(n_samples)))
    else:
        samples = [build(i) for i in range(n_samples)]
    return Dataset(input_kind, samples, spec)


def split_dataset(ds, test_fraction, seed):
    """Seeded shuffle-split into ``(train, test)``; the baseline stays in train."""
    if not 0 <= test_fraction < 1:
        raise InvalidConfig(f"test_fraction must be in [0, 1), got {test_fraction}")
    rest = np.random.default_rng(seed).permutation(np.arange(1, len(ds)))
    n_test = int(round(test_fraction * len(ds)))
    test_idx = sorted(rest[:n_test])
    train_idx = [0] + sorted(rest[n_test:])
    train = Dataset(ds.input_kind, [ds.samples[i] for i in train_idx], ds.spec)
    if not test_idx:
        return train, None
    return train, Dataset(ds.input_kind, [ds.samples[i] for i in test_idx], ds.spec)


@dataclass(frozen=True)
class NormalizationParams:
    input_min: np.ndarray
    input_max: np.ndarray
    target_min: np.ndarray
    target_max: np.ndarray


def fit_normalization(ds):
    x, t = ds.inputs, ds.targets
    return NormalizationParams(x.min(axis=0), x.max(axis=0), t.min(axis=0), t.max(axis=0))


# a feature whose span is below this fraction of the largest input magnitude
# is roundoff around a constant (e.g. free-end strain) and maps to 0
CONSTANT_RTOL = 1e-9


def constant_features(params):
    lo, hi = params.input_min, params.input_max
    scale = max(np.max(np.abs(lo)), np.max(np.abs(hi)))
    return (hi - lo) <= CONSTANT_RTOL * scale


def normalize(vec, params, feature_class="input"):
    """Map inputs per feature onto [-1, 1]; targets pass through unchanged.

    Constant features map to 0.
    """
    vec = np.asarray(vec, dtype=float)
    if feature_class == "target":
        return vec.copy()
    lo, hi = params.input_min, params.input_max
    span = hi - lo
    const = constant_features(params)
    safe = np.where(const, 1.0, span)
    out = 2.0 * (vec - lo) / safe - 1.0
    return np.where(const, 0.0, out)


def denormalize(vec, params, feature_class="input"):
    vec = np.asarray(vec, dtype=float)
    if feature_class == "target":
        return vec.copy()
    lo, hi = params.input_min, params.input_max
    return np.where(constant_features(params), lo, lo + (vec + 1.0) * 0.5 * (hi - lo))


def normalized_arrays(ds, params):
    """``(X, T)`` arrays ready for training."""
    return normalize(ds.inputs, params), ds.targets


HEADER_RE = re.compile(
    r"^# beamdetect-dataset v1, input_kind=(\w+), n_elements=(\d+), n_samples=(\d+)$")


def _fmt(x):
    return repr(float(x))


def save_dataset(ds, path):
    """Write the dataset as CSV: a versioned header comment, a column-name row,
    then one row per sample (inputs followed by targets)."""
    n_in = ds.samples[0].input.size
    n_el = ds.samples[0].target.size
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# beamdetect-dataset v1, input_kind={ds.input_kind.value}, "
                 f"n_elements={n_el}, n_samples={len(ds)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"in_{i + 1}" for i in range(n_in)]
                        + [f"ee_{e + 1}" for e in range(n_el)])
        for s in ds.samples:
            writer.writerow([_fmt(v) for v in s.input] + [_fmt(v) for v in s.target])


def load_dataset(path, spec=None):
    """Read a file written by ``save_dataset``.

    The beam spec is not stored in the file; pass it if the caller needs more
    than the default reference beam.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise FormatError("missing header", line=1)
    m = HEADER_RE.match(lines[0].strip())
    if m is None:
        raise FormatError("missing header", line=1)
    try:
        input_kind = InputKind(m.group(1))
    except ValueError:
        raise FormatError(f"unknown input_kind {m.group(1)!r}", line=1) from None
    n_el, n_samples = int(m.group(2)), int(m.group(3))
    if len(lines) < 2:
        raise FormatError("missing column row", line=2)
    columns = next(csv.reader([lines[1]]))
    n_targets = sum(c.startswith("ee_") for c in columns)
    n_in = sum(c.startswith("in_") for c in columns)
    if n_targets != n_el or n_in + n_targets != len(columns):
        raise FormatError(f"column row does not match n_elements={n_el}", line=2)
    samples = []
    for lineno, row in enumerate(csv.reader(lines[2:]), start=3):
        if not row:
            continue
        if len(row) != len(columns):
            raise FormatError(
                f"row has {len(row)} fields, expected {n_in} inputs + {n_el} targets",
                line=lineno)
        try:
            values = np.array([float(v) for v in row])
        except ValueError as exc:
            raise FormatError(str(exc), line=lineno) from None
        samples.append(Sample(values[:n_in], values[n_in:]))
    if len(samples) != n_samples:
        raise FormatError(f"header declares {n_samples} samples, found {len(samples)}")
    if not samples:
        raise FormatError("dataset has no samples")
    if spec is None:
        spec = BeamSpec(n_elements=n_el)
    return Dataset(input_kind, samples, spec)
