"""8-bit RGB PNG in and out; arrays are (3, H, W) float64 in [0, 1]."""
import numpy as np
from PIL import Image


def read_png(path):
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def to_uint8(img):
    """[0, 1] -> [0, 255], clamped, rounding half up."""
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_png(path, img):
    arr = to_uint8(np.asarray(img)).transpose(1, 2, 0)
    Image.fromarray(np.ascontiguousarray(arr)).save(path, format="PNG")


def resize_to_multiple(img, multiple=8):
    """Nearest-neighbour resize so both sides are multiples of ``multiple``.

    Returns (image, resized?).
    """
    _, h, w = img.shape
    nh = max(multiple, int(round(h / multiple)) * multiple)
    nw = max(multiple, int(round(w / multiple)) * multiple)
    if (nh, nw) == (h, w):
        return img, False
    rows = np.minimum((np.arange(nh) + 0.5) * h / nh, h - 1).astype(int)
    cols = np.minimum((np.arange(nw) + 0.5) * w / nw, w - 1).astype(int)
    return img[:, rows][:, :, cols], True
