"""Regenerate the bundled test images from scikit-image's sample data.

All sources are CC0 or public domain (see README). Images are downscaled with
anti-aliasing and stored as 8-bit PNG.
"""
import os

import numpy as np
from skimage import data, transform, io, color

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "data")


def square_crop(img, frac=1.0, cy=0.5, cx=0.5):
    h, w = img.shape[:2]
    s = int(min(h, w) * frac)
    y0 = int(np.clip(cy * h - s / 2, 0, h - s))
    x0 = int(np.clip(cx * w - s / 2, 0, w - s))
    return img[y0:y0 + s, x0:x0 + s]


def save(img, size, path):
    if img.ndim == 3 and img.shape[2] == 4:
        img = img[..., :3]
    out = transform.resize(img, (size, size), anti_aliasing=True, preserve_range=True)
    io.imsave(path, np.clip(np.round(out), 0, 255).astype(np.uint8), check_contrast=False)


save(square_crop(data.astronaut(), 0.6, 0.35, 0.45), 128, os.path.join(OUT, "train", "astronaut.png"))
save(square_crop(data.camera(), 0.8, 0.45, 0.5), 120, os.path.join(OUT, "eval", "camera.png"))
save(square_crop(data.chelsea(), 0.9, 0.5, 0.5), 120, os.path.join(OUT, "eval", "chelsea.png"))
save(square_crop(data.coffee(), 0.9, 0.5, 0.5), 120, os.path.join(OUT, "eval", "coffee.png"))
save(square_crop(data.coins(), 0.7, 0.5, 0.5), 120, os.path.join(OUT, "eval", "coins.png"))
save(square_crop(data.rocket(), 0.8, 0.5, 0.5), 120, os.path.join(OUT, "eval", "rocket.png"))
