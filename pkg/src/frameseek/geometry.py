"""Keypoint geometry quantization.

Each indexed keypoint stores its geometry in 7 bytes: normalized x and y in
16 bits each, orientation in 8 bits over [-pi, pi), and log2-scale in 8 bits
over [-2, 8] (clamped). Dequantization returns the bin midpoint, so every
field round-trips within one quantization step.
"""

import math
from dataclasses import dataclass

import numpy as np

THETA_LO = -math.pi
THETA_RANGE = 2.0 * math.pi
LOG_SCALE_LO = -2.0
LOG_SCALE_RANGE = 10.0


def wrap_angle(theta):
    """Wrap an angle (scalar or array) into [-pi, pi)."""
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class FrameGeometry:
    """Pixel frame of reference for coordinate normalization.

    The descriptor files carry keypoints in pixels but no frame dimensions,
    so the engine is told the nominal frame size explicitly.
    """

    width: float = 1280.0
    height: float = 720.0

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def quantize_xy(self, x, y):
        qx = np.clip(np.floor(np.asarray(x, dtype=np.float64) / self.width * 65536.0), 0, 65535)
        qy = np.clip(np.floor(np.asarray(y, dtype=np.float64) / self.height * 65536.0), 0, 65535)
        return qx.astype(np.uint16), qy.astype(np.uint16)

    def dequantize_xy(self, qx, qy):
        x = (np.asarray(qx, dtype=np.float64) + 0.5) / 65536.0 * self.width
        y = (np.asarray(qy, dtype=np.float64) + 0.5) / 65536.0 * self.height
        return x, y


def quantize_theta(theta):
    t = wrap_angle(np.asarray(theta, dtype=np.float64))
    q = np.clip(np.floor((t - THETA_LO) / THETA_RANGE * 256.0), 0, 255)
    return q.astype(np.uint8)


def dequantize_theta(q):
    return THETA_LO + (np.asarray(q, dtype=np.float64) + 0.5) * (THETA_RANGE / 256.0)


def quantize_log_scale(log_scale):
    s = np.clip(np.asarray(log_scale, dtype=np.float64), LOG_SCALE_LO, LOG_SCALE_LO + LOG_SCALE_RANGE)
    q = np.clip(np.floor((s - LOG_SCALE_LO) / LOG_SCALE_RANGE * 256.0), 0, 255)
    return q.astype(np.uint8)


def dequantize_log_scale(q):
    return LOG_SCALE_LO + (np.asarray(q, dtype=np.float64) + 0.5) * (LOG_SCALE_RANGE / 256.0)
