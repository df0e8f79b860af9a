"""H&E stain deconvolution, concentration perturbation, and RGB reconstruction.

Stains mix linearly in optical-density space (Beer-Lambert, base-10 log), so
an RGB pixel deconvolves into per-stain concentrations by least squares
against the two stain vectors. The color augmentation perturbs those
concentrations with one uniform affine draw per image and reconstructs, which
shifts global stain strength without destroying tissue structure. The default
stain vectors are the classical Ruifrok H&E pair; real scanners can load
their own via a config file.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

_RUIFROK_H = (0.650, 0.704, 0.286)
_RUIFROK_E = (0.072, 0.990, 0.105)


@dataclass(frozen=True)
class StainModel:
    """Two unit stain vectors in OD space plus the background intensity I0."""

    h_vector: tuple[float, float, float]
    e_vector: tuple[float, float, float]
    background: float = 255.0
    od_epsilon: float = 1e-6

    def __post_init__(self):
        for name, vec in (("h_vector", self.h_vector), ("e_vector", self.e_vector)):
            arr = np.asarray(vec, dtype=float)
            if arr.shape != (3,) or np.any(arr < 0):
                raise ValidationError(
                    "invalid-stain-vector", f"{name} must be 3 non-negative components"
                )
            if abs(np.linalg.norm(arr) - 1.0) > 1e-6:
                raise ValidationError("invalid-stain-vector", f"{name} must have unit norm")
        cross = np.cross(np.asarray(self.h_vector), np.asarray(self.e_vector))
        if np.linalg.norm(cross) < 1e-8:
            raise ValidationError(
                "singular-stain-matrix", "stain vectors are parallel; cannot deconvolve"
            )
        if not self.background > 0:
            raise ValidationError("invalid-config", f"background must be > 0, got {self.background}")
        if not self.od_epsilon > 0:
            raise ValidationError("invalid-config", f"od_epsilon must be > 0, got {self.od_epsilon}")

    @classmethod
    def from_vectors(cls, h, e, background: float = 255.0, od_epsilon: float = 1e-6) -> "StainModel":
        """Build a model from unnormalized stain vectors."""
        hn = np.asarray(h, dtype=float)
        en = np.asarray(e, dtype=float)
        return cls(
            h_vector=tuple(hn / np.linalg.norm(hn)),
            e_vector=tuple(en / np.linalg.norm(en)),
            background=background,
            od_epsilon=od_epsilon,
        )

    @classmethod
    def ruifrok_he(cls, background: float = 255.0) -> "StainModel":
        return cls.from_vectors(_RUIFROK_H, _RUIFROK_E, background=background)

    def stain_matrix(self) -> np.ndarray:
        """3x2 matrix whose columns are the H and E OD vectors."""
        return np.stack([self.h_vector, self.e_vector], axis=1)


DEFAULT_STAIN_MODEL = StainModel.ruifrok_he()


@dataclass(frozen=True)
class PerturbConfig:
    """One uniform affine perturbation per stain: c' = max(0, alpha*c + beta)."""

    alpha_range: tuple[float, float] = (0.95, 1.05)
    beta_range: tuple[float, float] = (-0.05, 0.05)
    seed: int = 0

    def __post_init__(self):
        if self.alpha_range[0] > self.alpha_range[1]:
            raise ValidationError("invalid-config", f"bad alpha_range {self.alpha_range}")
        if self.beta_range[0] > self.beta_range[1]:
            raise ValidationError("invalid-config", f"bad beta_range {self.beta_range}")


@dataclass(frozen=True)
class ConcentrationMap:
    """Per-pixel H and E concentrations in OD units, clamped non-negative."""

    c_h: np.ndarray
    c_e: np.ndarray

    def __post_init__(self):
        if self.c_h.shape != self.c_e.shape or self.c_h.ndim != 2:
            raise ValidationError(
                "invalid-concentration-map",
                f"c_h {self.c_h.shape} and c_e {self.c_e.shape} must be equal 2-D shapes",
            )

    @property
    def height(self) -> int:
        return self.c_h.shape[0]

    @property
    def width(self) -> int:
        return self.c_h.shape[1]


def rgb_to_od(rgb: np.ndarray, background: float = 255.0, od_epsilon: float = 1e-6) -> np.ndarray:
    """Optical density -log10(I / I0) per channel, clamped to stay finite.

    Accepts any (..., 3) array of intensities in [0, I0]; zeros are clamped
    at ``od_epsilon * I0`` so black pixels map to a large finite OD.
    """
    arr = np.asarray(rgb, dtype=float)
    floor = od_epsilon * background
    return -np.log10(np.maximum(arr, floor) / background)


def od_to_rgb(od: np.ndarray, background: float = 255.0) -> np.ndarray:
    """Continuous inverse of ``rgb_to_od`` (no quantization)."""
    return background * np.power(10.0, -np.asarray(od, dtype=float))


def deconvolve(image: np.ndarray, model: StainModel = DEFAULT_STAIN_MODEL) -> ConcentrationMap:
    """Solve od = c_h * H + c_e * E per pixel in least squares.

    ``image`` is an (H, W, 3) raster, uint8 or float, in [0, I0]. Negative
    solutions (off-plane noise) are clamped to zero.
    """
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError("invalid-image", f"expected (H, W, 3) raster, got {arr.shape}")
    od = rgb_to_od(arr, model.background, model.od_epsilon)
    pinv = np.linalg.pinv(model.stain_matrix())  # 2x3, computed once per call
    conc = od.reshape(-1, 3) @ pinv.T
    conc = np.maximum(conc, 0.0).reshape(arr.shape[0], arr.shape[1], 2)
    return ConcentrationMap(c_h=conc[..., 0], c_e=conc[..., 1])


def perturb(conc: ConcentrationMap, cfg: PerturbConfig) -> ConcentrationMap:
    """Apply one seeded uniform draw (alpha_h, beta_h, alpha_e, beta_e) to the
    whole image; concentrations are clamped at zero."""
    rng = np.random.default_rng(cfg.seed)
    alpha_h = rng.uniform(*cfg.alpha_range)
    beta_h = rng.uniform(*cfg.beta_range)
    alpha_e = rng.uniform(*cfg.alpha_range)
    beta_e = rng.uniform(*cfg.beta_range)
    return ConcentrationMap(
        c_h=np.maximum(alpha_h * conc.c_h + beta_h, 0.0),
        c_e=np.maximum(alpha_e * conc.c_e + beta_e, 0.0),
    )


def reconstruct(conc: ConcentrationMap, model: StainModel = DEFAULT_STAIN_MODEL) -> np.ndarray:
    """Mix concentrations back through the stain matrix into a quantized raster.

    Returns uint8 when I0 <= 255, else uint16.
    """
    stacked = np.stack([conc.c_h, conc.c_e], axis=-1)
    od = stacked @ model.stain_matrix().T
    intensity = np.clip(np.rint(od_to_rgb(od, model.background)), 0, model.background)
    return intensity.astype(np.uint8 if model.background <= 255 else np.uint16)


def augment_rgb(
    image: np.ndarray,
    cfg: PerturbConfig,
    model: StainModel = DEFAULT_STAIN_MODEL,
) -> np.ndarray:
    """Full color augmentation: deconvolve, perturb concentrations, reconstruct."""
    return reconstruct(perturb(deconvolve(image, model), cfg), model)
