"""Experiment configuration, the eight reference training variations, and runners."""

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import (Dataset, InputKind, SamplerConfig, fit_normalization,
                      generate_dataset, normalized_arrays)
from .errors import DimensionMismatch, InvalidConfig
from .fem import BeamSpec
from .lm import TrainConfig, train
from .network import NetworkArchitecture, init_weights

# code -> (input kind, hidden layer sizes, beta)
VARIATIONS = {
    "nndVar1": (InputKind.DISPLACEMENT, (8, 16, 8), 1.0),
    "nndVar2": (InputKind.DISPLACEMENT, (8, 16, 8), 2.0),
    "nndVar3": (InputKind.DISPLACEMENT, (16, 8), 1.0),
    "nndVar4": (InputKind.DISPLACEMENT, (16, 8), 2.0),
    "nnsVar1": (InputKind.STRAIN, (8, 16, 8), 1.0),
    "nnsVar2": (InputKind.STRAIN, (8, 16, 8), 2.0),
    "nnsVar3": (InputKind.STRAIN, (16, 8), 1.0),
    "nnsVar4": (InputKind.STRAIN, (16, 8), 2.0),
}

BEAM_KEYS = ("length_m", "width_m", "height_m", "youngs_modulus_pa", "n_elements",
             "load_newton", "load_node", "support")
SAMPLER_KEYS = ("p_element_damaged", "ee_floor", "max_damaged_elements")


@dataclass(frozen=True)
class ExperimentConfig:
    beam: BeamSpec = BeamSpec()
    input_kind: InputKind = InputKind.STRAIN
    hidden_sizes: tuple = (16, 8)
    beta: float = 2.0
    error_goal: float = 1e-5
    max_epochs: int = 1000
    mu_init: float = 0.01
    n_samples: int = 1000
    seed: int = 0
    variation_code: str = ""
    sampler: SamplerConfig = SamplerConfig()
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "input_kind", InputKind(self.input_kind))
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.n_samples < 1:
            raise InvalidConfig(f"n_samples must be >= 1, got {self.n_samples}")
        self.train_config()
        self.architecture()

    def architecture(self):
        n = self.beam.n_elements
        return NetworkArchitecture(n + 1, self.hidden_sizes, n)

    def train_config(self):
        return TrainConfig(mu_init=self.mu_init, beta=self.beta, error_goal=self.error_goal,
                           max_epochs=self.max_epochs, seed=self.seed)

    def with_variation(self, code):
        try:
            kind, hidden, beta = VARIATIONS[code]
        except KeyError:
            raise InvalidConfig(
                f"unknown variation {code!r}; known: {', '.join(VARIATIONS)}") from None
        return dataclasses.replace(self, input_kind=kind, hidden_sizes=hidden, beta=beta,
                                   variation_code=code)


def _parse_value(key, raw):
    raw = raw.strip()
    if key in ("hidden_sizes",):
        return tuple(int(v) for v in raw.replace(",", " ").split())
    if key in ("n_elements", "max_epochs", "n_samples", "seed", "workers"):
        return int(raw)
    if key in ("load_node", "max_damaged_elements"):
        return None if raw.lower() in ("", "none") else int(raw)
    if key in ("support", "input_kind", "variation_code", "variation"):
        return raw
    return float(raw)


def parse_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"config line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = _parse_value(key, raw)
        except ValueError:
            raise InvalidConfig(f"config line {lineno}: bad value for {key!r}: {raw!r}") from None
    return values


def build_config(values):
    """ExperimentConfig from a flat mapping; a ``variation`` key applies a preset first."""
    known = set(BEAM_KEYS) | set(SAMPLER_KEYS) | {f.name for f in dataclasses.fields(ExperimentConfig)} \
        | {"variation"}
    unknown = sorted(set(values) - known - {"beam", "sampler"})
    if unknown:
        raise InvalidConfig(f"unknown config keys: {', '.join(unknown)}")
    beam = BeamSpec(**{k: values[k] for k in BEAM_KEYS if k in values})
    sampler = SamplerConfig(**{k: values[k] for k in SAMPLER_KEYS if k in values})
    top = {k: values[k] for k in values
           if k not in BEAM_KEYS and k not in SAMPLER_KEYS and k != "variation"}
    cfg = ExperimentConfig(beam=beam, sampler=sampler)
    if values.get("variation"):
        cfg = cfg.with_variation(values["variation"])
    return dataclasses.replace(cfg, **top)


def load_config(path):
    return build_config(parse_config_text(Path(path).read_text()))


def make_dataset(cfg):
    return generate_dataset(cfg.beam, cfg.n_samples, cfg.input_kind, cfg.seed,
                            cfg.sampler, workers=cfg.workers)


def check_dataset(cfg, ds):
    arch = cfg.architecture()
    if ds.input_kind is not cfg.input_kind:
        raise DimensionMismatch(
            f"dataset holds {ds.input_kind.value} inputs, config asks for {cfg.input_kind.value}")
    if ds.samples[0].input.size != arch.input_size or ds.samples[0].target.size != arch.output_size:
        raise DimensionMismatch(
            f"dataset dims {ds.samples[0].input.size}->{ds.samples[0].target.size} "
            f"do not match network {arch.layer_sizes}")


def run_training(cfg, ds: Dataset | None = None, callback=None):
    """Generate (if needed), normalize and train. Returns ``(net, params, log)``.

    Weights are initialized from ``cfg.seed`` so a run is fully reproducible.
    """
    if ds is None:
        ds = make_dataset(cfg)
    check_dataset(cfg, ds)
    params = fit_normalization(ds)
    x, t = normalized_arrays(ds, params)
    net = init_weights(cfg.architecture(), np.random.default_rng(cfg.seed))
    net, tlog = train(net, x, t, cfg.train_config(), callback=callback)
    return net, params, tlog
