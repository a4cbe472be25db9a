"""Turn a measured response into per-element damage estimates."""

from dataclasses import dataclass

import numpy as np

from .dataset import normalize
from .errors import DimensionMismatch
from .network import predict

DEFAULT_THRESHOLD = 0.95


@dataclass(frozen=True)
class DetectionReport:
    predicted_factors: np.ndarray
    damaged_elements: list  # 1-based
    severities: list
    threshold: float

    def to_dict(self):
        return {
            "predicted_factors": [float(v) for v in self.predicted_factors],
            "damaged_elements": list(self.damaged_elements),
            "severities": [float(v) for v in self.severities],
            "threshold": self.threshold,
        }


def report_from_factors(raw_factors, threshold=DEFAULT_THRESHOLD):
    """Clamp to [0, 1] and flag elements with ``ee < threshold``."""
    ee = np.clip(np.asarray(raw_factors, dtype=float), 0.0, 1.0)
    flagged = [int(i) + 1 for i in np.flatnonzero(ee < threshold)]
    return DetectionReport(ee, flagged, [float(1.0 - ee[i - 1]) for i in flagged], threshold)


def detect(net, params, response, threshold=DEFAULT_THRESHOLD):
    response = np.asarray(response, dtype=float)
    if response.shape != (net.arch.input_size,):
        raise DimensionMismatch(
            f"response has {response.size} values, network expects {net.arch.input_size}")
    return report_from_factors(predict(net, normalize(response, params)), threshold)
