"""Test problems: blur and prolate operators, noise, images and video frames."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.linalg import toeplitz

from . import netpbm, t3d
from .tcore import as_tensor3, dft_mode3, fro_norm, idft_mode3

__all__ = [
    "BlurSpec",
    "NoiseSpec",
    "ProblemInstance",
    "blur_matrix",
    "blur_tensor",
    "prolate_matrix",
    "prolate_slices",
    "load_matrix_fixture",
    "baart_fixture",
    "example_operator",
    "make_instance",
    "image_to_slice",
    "tensor_to_image",
    "load_frames",
    "save_frames",
    "data_path",
]


@dataclass(frozen=True)
class BlurSpec:
    """Gaussian blur: matrix order ``n_size``, width ``sigma`` and ``band``."""

    n_size: int
    sigma: float = 3.0
    band: int = 9

    def __post_init__(self):
        if self.n_size < 1:
            raise ValueError("n_size must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 1 <= self.band <= self.n_size:
            raise ValueError(f"band must lie in [1, n_size={self.n_size}], got {self.band}")


@dataclass(frozen=True)
class NoiseSpec:
    level: float
    seed: int = 0

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("noise level must be nonnegative")


@dataclass
class ProblemInstance:
    a: np.ndarray
    b: np.ndarray
    b_true: np.ndarray
    x_true: np.ndarray
    deltas: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def delta(self):
        """Frobenius norm of the whole noise tensor."""
        return float(np.sqrt(np.sum(self.deltas**2)))


def data_path(name):
    """Path of a bundled data file."""
    return Path(str(resources.files("tpreg") / "data" / name))


def blur_matrix(spec):
    """Symmetric banded Toeplitz Gaussian ``toeplitz(z) / (sigma*sqrt(2*pi))``."""
    z = np.zeros(spec.n_size)
    z[: spec.band] = np.exp(-(np.arange(spec.band) ** 2) / (2.0 * spec.sigma**2))
    return toeplitz(z) / (spec.sigma * np.sqrt(2.0 * np.pi))


def _kron_slices(coef, inner):
    return np.asarray(coef)[None, None, :] * np.asarray(inner)[:, :, None]


def _symmetric_tube(coef):
    """Real tube whose DFT is ``|DFT(coef)|``.

    The result is symmetric (``c[i] = c[n - i]``) with a real nonnegative
    spectrum of the same magnitude as the input's.
    """
    return np.fft.ifft(np.abs(np.fft.fft(coef))).real


def blur_tensor(spec, symmetric=False):
    """``N x N x N`` blur tensor with frontal slice ``i`` equal to ``A[i, 0] * A``.

    With ``symmetric=True`` the tube ``A[:, 0]`` is replaced by the real
    tube whose spectrum is the modulus of its spectrum. Every spectral slice
    is then a nonnegative multiple of ``A``, so the tensor is t-symmetric and
    has the same t-singular values as the plain blur tensor.
    """
    a = blur_matrix(spec)
    coef = a[:, 0]
    if symmetric:
        coef = _symmetric_tube(coef)
    return _kron_slices(coef, a)


def prolate_matrix(n, w):
    """Symmetric Toeplitz prolate matrix: ``a_0 = 2w``, ``a_k = sin(2 pi w k)/(pi k)``."""
    if not 0 < w < 0.5:
        raise ValueError(f"w must lie in (0, 0.5), got {w}")
    k = np.arange(1, n)
    col = np.empty(n)
    col[0] = 2.0 * w
    col[1:] = np.sin(2.0 * np.pi * w * k) / (np.pi * k)
    return toeplitz(col)


def prolate_slices(n, w, inner):
    """Tensor with frontal slice ``i`` equal to ``P[i, 0] * inner``, ``P`` the prolate matrix."""
    inner = np.asarray(inner, dtype=float)
    if inner.ndim != 2 or inner.shape[0] != inner.shape[1]:
        raise ValueError(f"inner must be a square matrix, got shape {inner.shape}")
    return _kron_slices(prolate_matrix(n, w)[:, 0], inner)


def load_matrix_fixture(path):
    """Matrix stored in a T3D1 container with a single frontal slice."""
    a = t3d.load(path)
    if a.shape[2] != 1:
        raise t3d.T3DFormatError(f"matrix fixture must have n = 1, header says n = {a.shape[2]}", 20)
    return a[:, :, 0]


def baart_fixture():
    """The bundled 100 x 100 baart matrix."""
    return load_matrix_fixture(data_path("baart100.t3d"))


def example_operator(w=0.46):
    """Prolate-by-baart operator of order 100 (slice ``i`` is ``P[i, 0] * baart``)."""
    inner = baart_fixture()
    return prolate_slices(inner.shape[0], w, inner)


def make_instance(a, x_true, noise, tag="custom", params=None):
    """Noisy data ``b = a * x_true + E`` with ``||E||_F = level * ||a * x_true||_F``.

    ``E`` is a scaled standard Gaussian draw from ``default_rng(noise.seed)``.
    """
    a = as_tensor3(a, "a")
    x_true = as_tensor3(x_true, "x_true")
    if a.shape[1] != x_true.shape[0] or a.shape[2] != x_true.shape[2]:
        raise ValueError(f"x_true shape {x_true.shape} incompatible with operator {a.shape}")
    b_true = idft_mode3(dft_mode3(a) @ dft_mode3(x_true))
    nb = fro_norm(b_true)
    if noise.level > 0:
        if nb == 0.0:
            raise ValueError("b_true is zero; relative noise level undefined")
        e0 = np.random.default_rng(noise.seed).standard_normal(b_true.shape)
        e = noise.level * (e0 / fro_norm(e0)) * nb
        b = b_true + e
        deltas = np.sqrt(np.sum(e**2, axis=(0, 2)))
    else:
        b = b_true.copy()
        deltas = np.zeros(b_true.shape[1])
    prov = {"generator": tag, "params": dict(params or {}), "noise_level": noise.level, "seed": noise.seed}
    return ProblemInstance(a, b, b_true, x_true, deltas, prov)


def _pad_square(img):
    h, w = img.shape[:2]
    s = max(h, w)
    if h == w:
        return img
    out = np.zeros((s, s) + img.shape[2:], dtype=img.dtype)
    out[:h, :w] = img
    return out


def image_to_slice(path):
    """Read a graymap or pixmap into an ``N x p x N`` tensor with values in [0, 1].

    Pixel ``(r, c)`` of channel ``j`` becomes entry ``(r, j, c)``; gray
    images give ``p = 1`` and color images ``p = 3``. Non-square images are
    zero-padded at the bottom or right to a square.
    """
    pix, maxval = netpbm.read(path)
    img = _pad_square(pix.astype(float) / maxval)
    if img.ndim == 2:
        img = img[:, :, None]
    return np.ascontiguousarray(img.transpose(0, 2, 1))


def tensor_to_image(x, path, maxval=255, plain=False):
    """Inverse of :func:`image_to_slice`: clamp to [0, 1], quantize, write."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[1] not in (1, 3):
        raise ValueError(f"expected an N x 1 x N or N x 3 x N tensor, got shape {x.shape}")
    img = np.rint(np.clip(x, 0.0, 1.0) * maxval).astype(np.int64).transpose(0, 2, 1)
    if img.shape[2] == 1:
        img = img[:, :, 0]
    netpbm.write(path, img, maxval, plain)


_FRAME = re.compile(r"frame_(\d{4})\.pgm$")


def load_frames(directory):
    """Video frames ``frame_%04d.pgm`` in index order as an ``N x p x N`` tensor."""
    directory = Path(directory)
    names = sorted((int(m.group(1)), p) for p in directory.iterdir() if (m := _FRAME.match(p.name)))
    if not names:
        raise ValueError(f"no frame_%04d.pgm files in {directory}")
    slices = [image_to_slice(p) for _, p in names]
    shapes = {s.shape for s in slices}
    if len(shapes) != 1:
        raise ValueError(f"frames differ in size: {sorted(shapes)}")
    return np.concatenate(slices, axis=1)


def save_frames(x, directory, maxval=255):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for j in range(x.shape[1]):
        tensor_to_image(x[:, j : j + 1, :], directory / f"frame_{j:04d}.pgm", maxval)
