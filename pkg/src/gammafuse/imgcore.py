"""Image containers, 8-bit sRGB codecs and patch statistics.

Images are plain ``numpy`` arrays: an *image* is ``(H, W, 3)`` float64 in
``[0, 1]`` with channels in R, G, B order, and a *plane* is ``(H, W)``.
"""

import io

import numpy as np
from PIL import Image, UnidentifiedImageError

__all__ = [
    "ImageDecodeError",
    "check_image",
    "check_plane",
    "decode_srgb8",
    "encode_srgb8",
    "read_image",
    "write_image",
    "luminance",
    "box_mean",
    "box_var",
    "resize_bilinear",
    "bilinear_resample",
]

_LUMA_709 = np.array([0.2126, 0.7152, 0.0722])


class ImageDecodeError(ValueError):
    """Raised when encoded bytes cannot be turned into an image.

    The message starts with the failing stage (``open`` when the container
    format is not recognised, ``decode`` when pixel data is corrupt).
    """

    def __init__(self, stage, detail):
        self.stage = stage
        super().__init__(f"{stage}: {detail}")


def check_image(img, name="img"):
    """Validate and convert an RGB image to a float64 ``(H, W, 3)`` array.

    ``uint8`` input is scaled by 1/255. Float input must already lie in
    ``[0, 1]``.
    """
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got {arr.shape}")
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    if not np.issubdtype(arr.dtype, np.floating):
        raise TypeError(f"{name} must be uint8 or floating point, got {arr.dtype}")
    arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_plane(p, name="p"):
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def decode_srgb8(data):
    """Decode PNG or JPEG bytes into a float image.

    Alpha is dropped and grayscale is replicated to three channels.
    """
    try:
        pil = Image.open(io.BytesIO(data))
    except UnidentifiedImageError as exc:
        raise ImageDecodeError("open", "unrecognised image format") from exc
    if pil.format not in ("PNG", "JPEG"):
        raise ImageDecodeError("open", f"unsupported format {pil.format!r}")
    try:
        pil.load()
        rgb = pil.convert("RGB")
    except (OSError, ValueError, SyntaxError) as exc:
        raise ImageDecodeError("decode", f"{pil.format} pixel data: {exc}") from exc
    return np.asarray(rgb, dtype=np.uint8).astype(np.float64) / 255.0


def to_uint8(img):
    """Quantize with round-half-up and clamp to ``[0, 255]``."""
    q = np.floor(np.asarray(img, dtype=np.float64) * 255.0 + 0.5)
    return np.clip(q, 0, 255).astype(np.uint8)


def encode_srgb8(img):
    """Encode a float image as 8-bit RGB PNG bytes."""
    img = check_image(img)
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def read_image(path):
    with open(path, "rb") as fh:
        return decode_srgb8(fh.read())


def write_image(path, img):
    with open(path, "wb") as fh:
        fh.write(encode_srgb8(img))


def luminance(img, mode="mean"):
    """Per-pixel intensity plane.

    ``mode="mean"`` is the arithmetic channel mean (R+G+B)/3;
    ``mode="rec709"`` uses Rec.709 luma weights.
    """
    img = np.asarray(img, dtype=np.float64)
    if mode == "mean":
        return img.mean(axis=2)
    if mode == "rec709":
        return img @ _LUMA_709
    raise ValueError(f"unknown intensity mode {mode!r}")


def _check_window(k):
    if int(k) != k or k < 1 or k % 2 == 0:
        raise ValueError(f"window size must be an odd integer >= 1, got {k}")
    return int(k)


def _window_sum(p, k):
    # Edge-replicated padding, then separable running sums: every output
    # pixel sums exactly k*k samples.
    r = k // 2
    padded = np.pad(p, r, mode="edge")
    c = np.cumsum(padded, axis=0)
    c = np.concatenate([np.zeros((1, c.shape[1])), c], axis=0)
    rows = c[k:] - c[:-k]
    c = np.cumsum(rows, axis=1)
    c = np.concatenate([np.zeros((c.shape[0], 1)), c], axis=1)
    return c[:, k:] - c[:, :-k]


def box_mean(p, k):
    """Mean over the ``k x k`` window centred on each pixel (edge replication)."""
    k = _check_window(k)
    p = check_plane(p)
    if k == 1:
        return p.copy()
    return _window_sum(p, k) / (k * k)


def box_var(p, k):
    """Population variance over the ``k x k`` window centred on each pixel."""
    k = _check_window(k)
    p = check_plane(p)
    if k == 1:
        return np.zeros_like(p)
    # Centre on the global mean first to limit cancellation in E[x^2]-E[x]^2.
    q = p - p.mean()
    m = _window_sum(q, k) / (k * k)
    m2 = _window_sum(q * q, k) / (k * k)
    return np.maximum(m2 - m * m, 0.0)


def _axis_weights(n_in, n_out):
    # Pixel-centre aligned source coordinates, clamped to the valid range.
    x = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    x = np.clip(x, 0.0, n_in - 1)
    lo = np.floor(x).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, x - lo


def bilinear_resample(arr, h, w):
    """Bilinear resize of a 2-D or 3-D array along its first two axes."""
    arr = np.asarray(arr, dtype=np.float64)
    if h < 1 or w < 1:
        raise ValueError(f"target size must be positive, got {h}x{w}")
    if arr.shape[:2] == (h, w):
        return arr.copy()
    y0, y1, fy = _axis_weights(arr.shape[0], h)
    x0, x1, fx = _axis_weights(arr.shape[1], w)
    if arr.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = arr[y0][:, x0] * (1 - fx) + arr[y0][:, x1] * fx
    bot = arr[y1][:, x0] * (1 - fx) + arr[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def resize_bilinear(img, w, h):
    """Resize an image to ``w x h`` pixels; output stays in ``[0, 1]``."""
    return np.clip(bilinear_resample(img, h, w), 0.0, 1.0)
