"""
Per-mapping datasets: the same V^L inputs for every mapping, labels read off the mapping's code digits.
"""
import functools
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Tuple

import numpy as np
from PIL import Image, ImageDraw

from .common.errors import InputCollision, InvalidSize, ShapeMismatch
from .mapping_core import AttributeSpace, Mapping

PROJECTION_DIM = 16
IMAGE_SIZE = 32
MIN_IMAGE_SIZE = 8
SHAPE_FRACTION = 0.6

# SeedSequence stream used for W, separate from the network init stream
PROJECTION_STREAM = 1

COLORS = {0: (0, 0, 255), 1: (255, 0, 0)}  # blue, red
BOX, CIRCLE = 0, 1


class Encoding(str, Enum):
    OHT2 = "oht2"
    OHT3 = "oht3"
    IMAGE = "image"


@dataclass(frozen=True)
class ProjectionMatrix:
    """Fixed random matrix shared by every mapping of one experiment."""
    rows: int
    cols: int
    entries: np.ndarray


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    encoding: Encoding
    mapping_id: int

    @property
    def items(self) -> Iterator[Tuple[np.ndarray, Tuple[int, ...]]]:
        for x, y in zip(self.inputs, self.labels):
            yield x, tuple(int(v) for v in y)


def make_projection(rows: int, cols: int, seed: int) -> ProjectionMatrix:
    rng = np.random.default_rng([seed, PROJECTION_STREAM])
    entries = rng.standard_normal((rows, cols))
    entries.setflags(write=False)
    return ProjectionMatrix(rows=rows, cols=cols, entries=entries)


def one_hot_layout(space: AttributeSpace, object_index: int, redundant: bool) -> np.ndarray:
    """
    Per-attribute one-hot blocks with value v at position V-1-v (blue = 01, red = 10);
    the redundant layout appends one always-zero slot per attribute (blue = 010).
    """
    V = space.values_per_attribute
    width = V + 1 if redundant else V
    vec = np.zeros(space.num_attributes * width)
    for a, v in enumerate(space.attributes_of(object_index)):
        vec[a * width + (V - 1 - v)] = 1.0
    return vec


def _project(layout: np.ndarray, W: ProjectionMatrix) -> np.ndarray:
    if layout.size != W.rows:
        raise ShapeMismatch(f"projection has {W.rows} rows, layout needs {layout.size}")
    return layout @ W.entries


def encode_oht2(object_index: int, W: ProjectionMatrix, space: Optional[AttributeSpace] = None) -> np.ndarray:
    space = space or AttributeSpace.toy256()
    return _project(one_hot_layout(space, object_index, redundant=False), W)


def encode_oht3(object_index: int, W: ProjectionMatrix, space: Optional[AttributeSpace] = None) -> np.ndarray:
    space = space or AttributeSpace.toy256()
    return _project(one_hot_layout(space, object_index, redundant=True), W)


def render_image(object_index: int, size: int = IMAGE_SIZE) -> np.ndarray:
    """
    Black size x size RGB raster with a centred blue/red box or disc, flattened HWC in [0, 1].
    Box side is 60% of the image; the disc has the box's area.
    """
    if size < MIN_IMAGE_SIZE:
        raise InvalidSize(f"image size must be at least {MIN_IMAGE_SIZE}, got {size}")
    if not 0 <= object_index < 4:
        raise ShapeMismatch(f"images exist only for the four colour/shape objects, got {object_index}")
    color, shape = divmod(object_index, 2)

    img = Image.new("RGB", (size, size), (0, 0, 0))
    draw = ImageDraw.Draw(img)
    side = round(SHAPE_FRACTION * size)
    if shape == BOX:
        extent = side
        offset = (size - extent) // 2
        draw.rectangle([offset, offset, offset + extent - 1, offset + extent - 1], fill=COLORS[color])
    else:
        extent = round(side * 2 / np.sqrt(np.pi))
        offset = (size - extent) // 2
        draw.ellipse([offset, offset, offset + extent - 1, offset + extent - 1], fill=COLORS[color])
    return np.asarray(img, dtype=np.float64).reshape(-1) / 255.0


def _check_distinct(inputs: np.ndarray):
    if np.unique(inputs, axis=0).shape[0] != inputs.shape[0]:
        raise InputCollision("two objects received identical input vectors")


@functools.lru_cache(maxsize=16)
def encode_objects(space: AttributeSpace, encoding: Encoding, seed: int,
                   projection_dim: int = PROJECTION_DIM, image_size: int = IMAGE_SIZE) -> np.ndarray:
    """Input matrix (objects x features); depends only on the objects, never on a mapping."""
    encoding = Encoding(encoding)
    n = space.num_objects
    if encoding is Encoding.IMAGE:
        if space.num_attributes != 2 or space.values_per_attribute != 2:
            raise ShapeMismatch("image inputs exist only for the two-colour, two-shape space")
        inputs = np.stack([render_image(i, image_size) for i in range(n)])
    else:
        redundant = encoding is Encoding.OHT3
        rows = space.num_attributes * (space.values_per_attribute + (1 if redundant else 0))
        W = make_projection(rows, projection_dim, seed)
        inputs = np.stack([_project(one_hot_layout(space, i, redundant), W) for i in range(n)])
    _check_distinct(inputs)
    inputs.setflags(write=False)
    return inputs


def labels_for(mapping: Mapping) -> np.ndarray:
    """labels[i, k] is code digit k assigned to object i."""
    return np.array([mapping.code_digits(i) for i in range(mapping.space.num_objects)], dtype=np.int64)


def build_dataset(mapping: Mapping, encoding: Encoding, seed: int,
                  projection_dim: int = PROJECTION_DIM, image_size: int = IMAGE_SIZE) -> Dataset:
    inputs = encode_objects(mapping.space, Encoding(encoding), seed, projection_dim, image_size)
    return Dataset(inputs=inputs, labels=labels_for(mapping), encoding=Encoding(encoding), mapping_id=mapping.mapping_id)
