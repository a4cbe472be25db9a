"""Levenberg-Marquardt training of a NetworkWeights instance on full batches."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidConfig, SingularMatrix
from .linalg import solve_damped
from .network import NetworkWeights, jacobian, network_mse

log = logging.getLogger(__name__)


class StopReason(str, Enum):
    ERROR_GOAL = "ErrorGoalReached"
    MAX_EPOCHS = "MaxEpochs"
    MU_OVERFLOW = "MuOverflow"
    STAGNATED = "Stagnated"


@dataclass(frozen=True)
class TrainConfig:
    mu_init: float = 0.01
    beta: float = 2.0
    error_goal: float = 1e-5
    max_epochs: int = 1000
    mu_max: float = 1e10
    max_inner_retries: int = 20
    # consecutive stagnated epochs (beta == 1 only) before giving up
    max_stagnant_epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.beta >= 1:
            raise InvalidConfig(f"beta must be >= 1, got {self.beta}")
        if not self.mu_init > 0:
            raise InvalidConfig(f"mu_init must be > 0, got {self.mu_init}")
        if not self.error_goal > 0:
            raise InvalidConfig(f"error_goal must be > 0, got {self.error_goal}")
        if int(self.max_epochs) != self.max_epochs or self.max_epochs < 1:
            raise InvalidConfig(f"max_epochs must be an integer >= 1, got {self.max_epochs}")
        if self.max_inner_retries < 1 or self.max_stagnant_epochs < 1:
            raise InvalidConfig("retry and stagnation limits must be >= 1")
        if not self.mu_max > self.mu_init:
            raise InvalidConfig("mu_max must exceed mu_init")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mse: float
    mu: float  # damping carried into the next epoch
    accepted: bool
    retries: int  # rejected trial steps before acceptance or giving up


@dataclass
class TrainLog:
    initial_mse: float
    mu_init: float
    records: list = field(default_factory=list)
    stop_reason: StopReason | None = None
    final_weights: NetworkWeights | None = None

    @property
    def epochs(self):
        return len(self.records)

    @property
    def final_mse(self):
        return self.records[-1].mse if self.records else self.initial_mse

    def mse_history(self):
        return np.array([r.mse for r in self.records])


def lm_step(j, e, mu):
    """Solve ``(J^T J + mu I) dw = J^T e``; the caller applies ``w - dw``."""
    if not mu > 0:
        raise InvalidConfig(f"damping must be > 0, got {mu}")
    j = np.asarray(j, dtype=float)
    e = np.asarray(e, dtype=float)
    return solve_damped(j.T @ j, mu, j.T @ e)


def train(net, inputs, targets, cfg=TrainConfig(), callback=None):
    """Marquardt loop.

    Per epoch: compute the Jacobian at ``w`` and try ``w - dw``. A lower MSE
    is accepted and ``mu`` divided by ``beta``; otherwise ``mu`` is
    multiplied by ``beta`` and the damped system re-solved with the same
    Jacobian. With ``beta == 1`` the retry can never change the step, so
    after ``max_inner_retries`` rejections the epoch is logged as stagnated.

    Returns ``(final_weights, TrainLog)``.
    """
    arch = net.arch
    w = net.flatten()

    def mse_at(params):
        return network_mse(NetworkWeights.unflatten(arch, params), inputs, targets)

    mse = mse_at(w)
    mu = cfg.mu_init
    tlog = TrainLog(initial_mse=mse, mu_init=mu)
    stagnant = 0

    if mse <= cfg.error_goal:
        tlog.stop_reason = StopReason.ERROR_GOAL
    for epoch in range(1, cfg.max_epochs + 1):
        if tlog.stop_reason is not None:
            break
        J, e = jacobian(NetworkWeights.unflatten(arch, w), inputs, targets)
        jtj, g = J.T @ J, J.T @ e
        retries, solved_mu, dw = 0, None, None
        accepted = False
        while True:
            if mu != solved_mu:
                try:
                    dw = solve_damped(jtj, mu, g)
                except SingularMatrix:
                    dw = None
                solved_mu = mu
            trial = np.inf if dw is None else mse_at(w - dw)
            if trial < mse:
                accepted = True
                w, mse = w - dw, trial
                mu = mu / cfg.beta
                break
            retries += 1
            if cfg.beta > 1:
                mu = mu * cfg.beta
                if mu > cfg.mu_max:
                    tlog.stop_reason = StopReason.MU_OVERFLOW
                    break
            elif retries >= cfg.max_inner_retries:
                break
        tlog.records.append(EpochRecord(epoch, mse, mu, accepted, retries))
        if callback is not None:
            callback(tlog.records[-1])
        stagnant = 0 if accepted else stagnant + 1
        if accepted and mse <= cfg.error_goal:
            tlog.stop_reason = StopReason.ERROR_GOAL
        elif stagnant >= cfg.max_stagnant_epochs:
            tlog.stop_reason = StopReason.STAGNATED
    if tlog.stop_reason is None:
        tlog.stop_reason = StopReason.MAX_EPOCHS
    log.debug("training stopped: %s after %d epochs, mse=%.6g",
              tlog.stop_reason.value, tlog.epochs, mse)
    final = NetworkWeights.unflatten(arch, w)
    tlog.final_weights = final
    return final, tlog


def save_log(tlog, path, meta=None):
    """CSV with ``epoch,mse,mu,accepted`` and a trailing ``# stop_reason`` comment.

    Row 0 holds the initial MSE and damping. ``meta`` key/value pairs (for
    example ``variation`` and ``input_kind``) are appended to the footer.
    """
    lines = ["epoch,mse,mu,accepted", f"0,{tlog.initial_mse!r},{tlog.mu_init!r},1"]
    for r in tlog.records:
        lines.append(f"{r.epoch},{r.mse!r},{r.mu!r},{int(r.accepted)}")
    footer = f"# stop_reason={tlog.stop_reason.value}, epochs={tlog.epochs}"
    for key, value in (meta or {}).items():
        footer += f", {key}={value}"
    lines.append(footer)
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class LoadedLog:
    path: Path
    epochs: np.ndarray
    mse: np.ndarray
    mu: np.ndarray
    accepted: np.ndarray
    stop_reason: StopReason
    total_epochs: int
    meta: dict

    @property
    def final_mse(self):
        return float(self.mse[-1])


def load_log(path):
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != "epoch,mse,mu,accepted":
        raise FormatError(f"{path}: missing 'epoch,mse,mu,accepted' header", line=1)
    rows, footer = [], None
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            footer = (lineno, line)
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"{path}: expected 4 fields", line=lineno)
        try:
            rows.append((int(parts[0]), float(parts[1]), float(parts[2]), int(parts[3])))
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}", line=lineno) from None
    if not rows:
        raise FormatError(f"{path}: no epoch rows")
    if footer is None:
        raise FormatError(f"{path}: missing stop_reason footer")
    try:
        fields = dict(kv.strip().split("=", 1) for kv in footer[1].lstrip("# ").split(","))
        stop = StopReason(fields.pop("stop_reason"))
        total = int(fields.pop("epochs"))
    except (ValueError, KeyError):
        raise FormatError(f"{path}: malformed footer", line=footer[0]) from None
    arr = np.array(rows, dtype=float)
    return LoadedLog(path, arr[:, 0].astype(int), arr[:, 1], arr[:, 2],
                     arr[:, 3].astype(bool), stop, total, fields)
