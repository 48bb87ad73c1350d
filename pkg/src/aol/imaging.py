"""Image-side machinery: patch extraction and overlap averaging, the
finite-difference and overcomplete Haar reference operators, patch-wise
denoising and the evaluation metrics."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import CoverageGap, DimensionMismatch
from .learning import LearnConfig, _drs
from .operators import AnalysisOperator

PSNR_IDENTICAL = math.inf


@dataclass(frozen=True)
class GrayImage:
    """Grayscale image, nominal [0, 255] range, not clamped internally."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=float)
        if pixels.ndim != 2 or not np.all(np.isfinite(pixels)):
            raise DimensionMismatch("image must be a finite 2-d array")
        object.__setattr__(self, "pixels", pixels)

    @property
    def shape(self):
        return self.pixels.shape


@dataclass(frozen=True)
class PatchSet:
    """Vectorised p x p patches (column-major within the patch) plus the
    bookkeeping needed to put them back: top-left offsets, removed means
    and whether the set densely covers the source image."""

    patch_size: int
    signals: np.ndarray  # p*p x l
    offsets: np.ndarray  # l x 2 (row, col)
    means: np.ndarray  # l, zeros when means were not removed
    image_shape: tuple
    dense: bool
    mean_removed: bool


def extract_patches(img, p, count=None, mean_remove=True, seed=0):
    """Vectorise patches; ``count=None`` enumerates every overlapping
    offset in raster order, otherwise ``count`` offsets are sampled
    uniformly."""
    pixels = img.pixels
    h, w = pixels.shape
    if p > min(h, w):
        raise DimensionMismatch(f"patch size {p} exceeds image {pixels.shape}")
    if count is None:
        offsets = np.array(
            [(r, c) for r in range(h - p + 1) for c in range(w - p + 1)]
        )
        dense = True
    else:
        rng = np.random.default_rng(seed)
        rows = rng.integers(0, h - p + 1, size=count)
        cols = rng.integers(0, w - p + 1, size=count)
        offsets = np.column_stack([rows, cols])
        dense = False
    l = len(offsets)
    signals = np.empty((p * p, l))
    for j, (r, c) in enumerate(offsets):
        signals[:, j] = pixels[r : r + p, c : c + p].reshape(-1, order="F")
    if mean_remove:
        means = signals.mean(axis=0)
        signals = signals - means
    else:
        means = np.zeros(l)
    return PatchSet(
        patch_size=p,
        signals=signals,
        offsets=offsets,
        means=means,
        image_shape=(h, w),
        dense=dense,
        mean_removed=mean_remove,
    )


def fd_operator(p):
    """First differences of the p x p grid: one +1/-1 row per horizontally
    or vertically adjacent pixel pair (no wraparound), 2p(p-1) rows.  Not
    a tight frame and flagged as such."""
    if p < 2:
        raise DimensionMismatch("need p >= 2")
    n = p * p
    rows = []

    def flat(r, c):
        return c * p + r

    for r in range(p):
        for c in range(p - 1):  # horizontal neighbours
            row = np.zeros(n)
            row[flat(r, c)] = 1.0
            row[flat(r, c + 1)] = -1.0
            rows.append(row)
    for r in range(p - 1):
        for c in range(p):  # vertical neighbours
            row = np.zeros(n)
            row[flat(r, c)] = 1.0
            row[flat(r + 1, c)] = -1.0
            rows.append(row)
    entries = np.array(rows)
    return AnalysisOperator(entries, math.sqrt(2.0), tight=False)


def _haar_1d(p):
    """Orthonormal 1-d Haar transform matrix (rows are basis vectors)."""
    if p & (p - 1) or p < 1:
        raise DimensionMismatch("need p a power of 2")
    H = np.array([[1.0]])
    while H.shape[0] < p:
        m = H.shape[0]
        top = np.kron(H, [1.0, 1.0])
        bottom = np.kron(np.eye(m), [1.0, -1.0])
        H = np.vstack([top, bottom]) / math.sqrt(2.0)
    return H


def haar_operator(p):
    """Two-times overcomplete Haar: the separable orthonormal 2-d Haar
    basis plus a cyclically shifted copy, stacked and scaled by 1/sqrt(2)
    so the stack is a uniformly normalised tight frame."""
    H = _haar_1d(p)
    shift = np.roll(np.eye(p), 1, axis=1)  # cyclic one-sample shift
    first = np.kron(H, H)
    second = np.kron(H @ shift, H @ shift)
    entries = np.vstack([first, second]) / math.sqrt(2.0)
    return AnalysisOperator(entries, 1.0 / math.sqrt(2.0))


def denoise_patches(patches, op, lam, gamma, iters=100, eps=1e-4):
    """Per-patch cosparse recovery from the noisy patches; removed means
    are added back so the result is ready for overlap averaging."""
    if op.n != patches.patch_size ** 2:
        raise DimensionMismatch(
            f"operator expects n={op.n}, patches have {patches.patch_size ** 2}"
        )
    cfg = LearnConfig(lam=lam, gamma=gamma, eps=eps, k_max_drs=iters)
    Y = patches.signals
    spectral = not op.tight or op.frame_residual() > 1e-4
    X, _, _, _ = _drs(Y, op, Y.copy(), cfg, spectral=spectral)
    return PatchSet(
        patch_size=patches.patch_size,
        signals=X + patches.means,
        offsets=patches.offsets,
        means=np.zeros_like(patches.means),
        image_shape=patches.image_shape,
        dense=patches.dense,
        mean_removed=False,
    )


def reconstruct_overlap(patches, img_shape=None):
    """Average the patch estimates pixel-wise over a dense cover."""
    if img_shape is None:
        img_shape = patches.image_shape
    h, w = img_shape
    p = patches.patch_size
    acc = np.zeros((h, w))
    cover = np.zeros((h, w))
    signals = patches.signals + (patches.means if patches.mean_removed else 0.0)
    for j, (r, c) in enumerate(patches.offsets):
        acc[r : r + p, c : c + p] += signals[:, j].reshape((p, p), order="F")
        cover[r : r + p, c : c + p] += 1.0
    if np.any(cover == 0):
        raise CoverageGap("some pixels are covered by no patch")
    return GrayImage(acc / cover)


def psnr(ref, test, peak=255.0):
    """10 log10(peak^2 / MSE) in dB; identical images report infinity."""
    if ref.shape != test.shape:
        raise DimensionMismatch(f"shapes differ: {ref.shape} vs {test.shape}")
    mse = float(np.mean((ref.pixels - test.pixels) ** 2))
    if mse == 0.0:
        return PSNR_IDENTICAL
    return 10.0 * math.log10(peak * peak / mse)


def cosparsity(op, x, zero_tol=0.01):
    """Number of analysis coefficients with magnitude at most ``zero_tol``."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != op.n:
        raise DimensionMismatch(f"operator expects n={op.n}, got {x.shape}")
    return int(np.count_nonzero(np.abs(op.entries @ x) <= zero_tol))


def row_recovery_rate(learned, reference, threshold=math.sqrt(0.001)):
    """Fraction of reference rows matched (up to sign, one-to-one,
    closest-first) by a learned row within the threshold."""
    if learned.entries.shape != reference.entries.shape:
        raise DimensionMismatch("operators must have the same shape")
    L = learned.entries
    R = reference.entries
    a = L.shape[0]
    # sign-invariant pairwise distances
    diff = np.linalg.norm(L[:, None, :] - R[None, :, :], axis=2)
    summ = np.linalg.norm(L[:, None, :] + R[None, :, :], axis=2)
    dist = np.minimum(diff, summ)
    order = np.argsort(dist, axis=None)
    used_l = np.zeros(a, dtype=bool)
    used_r = np.zeros(a, dtype=bool)
    recovered = 0
    for flat in order:
        i, j = divmod(int(flat), a)
        if dist[i, j] > threshold:
            break
        if used_l[i] or used_r[j]:
            continue
        used_l[i] = used_r[j] = True
        recovered += 1
    return recovered / a


_SHEPP_LOGAN_ELLIPSES = [
    # (intensity, semi-axis x, semi-axis y, x0, y0, angle degrees)
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
]


def shepp_logan(size=512):
    """Piecewise-constant head phantom (high-contrast variant), scaled to
    [0, 255]."""
    coords = np.linspace(-1.0, 1.0, size)
    x, y = np.meshgrid(coords, -coords)
    img = np.zeros((size, size))
    for value, ax, ay, x0, y0, angle in _SHEPP_LOGAN_ELLIPSES:
        theta = math.radians(angle)
        ct, st = math.cos(theta), math.sin(theta)
        xr = (x - x0) * ct + (y - y0) * st
        yr = -(x - x0) * st + (y - y0) * ct
        img[(xr / ax) ** 2 + (yr / ay) ** 2 <= 1.0] += value
    return GrayImage(np.clip(img, 0.0, 1.0) * 255.0)
