import numpy as np
import pytest

from compbias.common.errors import InputCollision, InvalidSize, ShapeMismatch
from compbias.datagen import (
    Encoding,
    ProjectionMatrix,
    build_dataset,
    encode_objects,
    encode_oht2,
    encode_oht3,
    labels_for,
    make_projection,
    one_hot_layout,
    render_image,
    _check_distinct,
)
from compbias.mapping_core import AttributeSpace, Mapping, enumerate_mappings

TOY = AttributeSpace.toy256()
BLUE_BOX, BLUE_CIRCLE, RED_BOX, RED_CIRCLE = range(4)


def identity_projection(rows):
    return ProjectionMatrix(rows=rows, cols=rows, entries=np.eye(rows))


def test_oht2_layout():
    W = identity_projection(4)
    np.testing.assert_array_equal(encode_oht2(BLUE_BOX, W), [0, 1, 0, 1])
    np.testing.assert_array_equal(encode_oht2(RED_CIRCLE, W), [1, 0, 1, 0])


def test_oht2_projection():
    W = make_projection(4, 16, seed=0)
    expected = np.array([0, 1, 0, 1]) @ W.entries
    np.testing.assert_allclose(encode_oht2(BLUE_BOX, W), expected, rtol=0, atol=0)


def test_oht3_layout():
    W = identity_projection(6)
    np.testing.assert_array_equal(encode_oht3(BLUE_BOX, W), [0, 1, 0, 0, 1, 0])
    np.testing.assert_array_equal(encode_oht3(RED_CIRCLE, W), [1, 0, 0, 1, 0, 0])


def test_oht3_redundant_slots_stay_off():
    for index in range(4):
        layout = one_hot_layout(TOY, index, redundant=True)
        assert layout[2] == 0 and layout[5] == 0
        assert layout.sum() == 2


def test_projection_shape_is_checked():
    with pytest.raises(ShapeMismatch):
        encode_oht3(BLUE_BOX, make_projection(4, 16, seed=0))


def test_projection_is_seeded_and_read_only():
    a, b = make_projection(4, 16, 3), make_projection(4, 16, 3)
    np.testing.assert_array_equal(a.entries, b.entries)
    assert not np.array_equal(a.entries, make_projection(4, 16, 4).entries)
    with pytest.raises(ValueError):
        a.entries[0, 0] = 1.0


def test_render_blue_box():
    img = render_image(BLUE_BOX, 32)
    assert img.shape == (32 * 32 * 3,)
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert np.all(img[0::3] == 0.0)
    assert img[2::3].sum() > 0


def test_render_red_circle_centre():
    img = render_image(RED_CIRCLE, 32).reshape(32, 32, 3)
    np.testing.assert_array_equal(img[16, 16], [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(img[0, 0], [0.0, 0.0, 0.0])


@pytest.mark.parametrize("size", [16, 32, 64])
def test_shapes_are_area_matched(size):
    for box, circle in ((BLUE_BOX, BLUE_CIRCLE), (RED_BOX, RED_CIRCLE)):
        lit_box = np.count_nonzero(render_image(box, size).reshape(size, size, 3).sum(axis=2))
        lit_circle = np.count_nonzero(render_image(circle, size).reshape(size, size, 3).sum(axis=2))
        assert abs(lit_box - lit_circle) <= 0.15 * lit_box


def test_render_errors():
    with pytest.raises(InvalidSize):
        render_image(BLUE_BOX, 4)
    with pytest.raises(ShapeMismatch):
        render_image(4, 32)


def test_identity_mapping_labels():
    mapping = Mapping.from_id(TOY, 27)
    assert mapping.table == (0, 1, 2, 3)
    data = build_dataset(mapping, Encoding.OHT2, seed=0)
    assert data.labels.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    assert data.mapping_id == 27
    items = list(data.items)
    assert len(items) == 4
    assert items[3][1] == (1, 1)


def test_degenerate_labels():
    data = build_dataset(Mapping(table=(2, 2, 2, 2), space=TOY), Encoding.OHT3, seed=0)
    assert data.labels.tolist() == [[1, 0]] * 4


@pytest.mark.parametrize("encoding", list(Encoding))
def test_inputs_do_not_depend_on_the_mapping(encoding):
    first = build_dataset(Mapping(table=(0, 1, 2, 3), space=TOY), encoding, seed=7, image_size=16)
    second = build_dataset(Mapping(table=(3, 3, 0, 1), space=TOY), encoding, seed=7, image_size=16)
    np.testing.assert_array_equal(first.inputs, second.inputs)
    assert first.labels.tolist() != second.labels.tolist()
    assert len(np.unique(first.inputs, axis=0)) == 4


def test_labels_equal_code_bits_for_every_mapping():
    for mapping in enumerate_mappings(TOY):
        labels = labels_for(mapping)
        for index in range(4):
            assert "".join(str(b) for b in labels[index]) == mapping.code_string(index)


def test_collision_is_reported():
    # an all-zero projection sends every object to the origin
    space = AttributeSpace.generic(2, 3)
    W = ProjectionMatrix(rows=6, cols=4, entries=np.zeros((6, 4)))
    layouts = np.stack([one_hot_layout(space, i, redundant=False) for i in range(space.num_objects)])
    with pytest.raises(InputCollision):
        _check_distinct(layouts @ W.entries)


def test_image_inputs_need_toy_space():
    with pytest.raises(ShapeMismatch):
        encode_objects(AttributeSpace.generic(2, 3), Encoding.IMAGE, 0)
