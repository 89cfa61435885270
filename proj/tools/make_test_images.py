"""Regenerate the bundled 256x256 test images from scikit-image's sample data.

astronaut: NASA, public domain. coffee and chelsea: CC0 (see skimage.data docs).
"""
import pathlib

import numpy as np
from PIL import Image
from skimage import data

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"


def square_crop(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    s = min(h, w)
    y0, x0 = (h - s) // 2, (w - s) // 2
    return img[y0:y0 + s, x0:x0 + s]


def main() -> None:
    OUT.mkdir(exist_ok=True)
    for name in ("astronaut", "coffee", "chelsea"):
        img = square_crop(getattr(data, name)())
        Image.fromarray(img).resize((256, 256), Image.LANCZOS).save(OUT / f"{name}.png")


if __name__ == "__main__":
    main()
