import hashlib
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tensorseal.container import (
    ChunkPlan,
    DEFAULT_CHUNK_LENGTH,
    FORMAT_VERSION,
    HEADER_LEN,
    LayerTensor,
    MAGIC,
    ModelContainer,
    assemble_chunks,
    default_role,
    load_container,
    plan_chunks,
    reshape_to_2d,
    save_container,
    shape_to_nd,
    validate_chunk_length,
)
from tensorseal.errors import (
    EmptyTensor,
    FormatError,
    InvalidChunkLength,
    ShapeMismatch,
    UnsupportedVersion,
)


def test_layer_tensor_validation():
    with pytest.raises(ShapeMismatch):
        LayerTensor("t", (2, 3), "float64", np.zeros(5))
    with pytest.raises(EmptyTensor):
        LayerTensor("t", (0, 3), "float64", np.zeros(0))
    with pytest.raises(ShapeMismatch):
        LayerTensor("t", (2, 2, 2, 2, 2), "float64", np.zeros(32))
    with pytest.raises(ShapeMismatch):
        LayerTensor("t", (4,), "int32", np.zeros(4))
    with pytest.raises(ShapeMismatch):
        LayerTensor("t", (4,), "float64", np.array([1.0, np.nan, 0.0, 2.0]))
    with pytest.raises(ShapeMismatch):
        LayerTensor("t", (4,), "float64", np.zeros(4), "decorative")


def test_duplicate_layer_names_rejected():
    a = LayerTensor("same", (4,), "float64", np.zeros(4))
    b = LayerTensor("same", (4,), "float64", np.ones(4))
    with pytest.raises(ShapeMismatch):
        ModelContainer(layers=[a, b])


def test_reshape_collapses_leading_dims():
    layer = LayerTensor("t", (2, 2, 2, 2), "float64", np.arange(16.0))
    mat = reshape_to_2d(layer)
    assert mat.shape == (8, 2)
    # row-major flat order is untouched
    assert np.array_equal(mat.reshape(-1), np.arange(16.0))


def test_reshape_rank1_becomes_row():
    layer = LayerTensor("t", (7,), "float64", np.arange(7.0))
    assert reshape_to_2d(layer).shape == (1, 7)


def test_reshape_rank4_rows():
    layer = LayerTensor("t", (3, 3, 4, 8), "float32", np.zeros(288, np.float32))
    assert reshape_to_2d(layer).shape == (36, 8)


@given(shape=st.lists(st.integers(1, 6), min_size=1, max_size=4))
def test_reshape_roundtrip(shape):
    shape = tuple(shape)
    n = int(np.prod(shape))
    layer = LayerTensor("t", shape, "float64", np.arange(n, dtype=float))
    back = shape_to_nd(reshape_to_2d(layer), shape, name="t")
    assert back.shape == shape
    assert np.array_equal(back.data, layer.data)


def test_shape_to_nd_wrong_element_count():
    with pytest.raises(ShapeMismatch):
        shape_to_nd(np.zeros((2, 3)), (7,))


def test_chunk_length_rules():
    validate_chunk_length(32)
    validate_chunk_length(8192)
    validate_chunk_length(11968)
    for bad in (0, -32, 31, 33, 100, 12032, 8191):
        with pytest.raises(InvalidChunkLength):
            validate_chunk_length(bad)


def test_plan_chunks_exact_fit():
    layer = LayerTensor("t", (8192,), "float64", np.arange(8192.0))
    plan, chunks = plan_chunks(layer, 8192)
    assert (plan.chunk_count, plan.padded_tail, plan.full_chunks) == (1, 0, 1)
    assert chunks.shape == (1, 8192)


def test_plan_chunks_padded_tail():
    layer = LayerTensor("t", (10000,), "float64", np.arange(10000.0))
    plan, chunks = plan_chunks(layer, 8192)
    assert (plan.chunk_count, plan.padded_tail, plan.full_chunks) == (2, 6384, 1)
    assert np.all(chunks[1, 10000 - 8192:] == 0.0)
    assert np.array_equal(assemble_chunks(plan, chunks), layer.data)


@given(n=st.integers(1, 4000), chunk=st.sampled_from([32, 64, 96, 128, 1024]))
@settings(max_examples=40)
def test_plan_assemble_roundtrip(n, chunk):
    layer = LayerTensor("t", (n,), "float64", np.random.default_rng(n).normal(size=n))
    plan, chunks = plan_chunks(layer, chunk)
    assert plan.chunk_count == -(-n // chunk)
    assert np.array_equal(assemble_chunks(plan, chunks), layer.data)


def test_assemble_rejects_wrong_shape():
    plan = ChunkPlan("t", 32, 2, 0, 64)
    with pytest.raises(ShapeMismatch):
        assemble_chunks(plan, np.zeros((3, 32)))


def test_default_role():
    assert default_role(10) == "excluded"
    assert default_role(8192) == "hidden"
    assert default_role(100000, is_output=True) == "output"


def test_save_load_roundtrip(model, tmp_path):
    path = tmp_path / "model.tseal"
    save_container(model, path)
    loaded = load_container(path)
    assert [t.name for t in loaded.layers] == [t.name for t in model.layers]
    assert loaded.class_map == model.class_map
    assert loaded.metadata == model.metadata
    for orig, back in zip(model.layers, loaded.layers):
        assert back.shape == orig.shape
        assert back.dtype == orig.dtype
        assert back.role_tag == orig.role_tag
        # loading never mutates scalars: byte-level digests agree
        assert (hashlib.sha256(back.data.tobytes()).digest()
                == hashlib.sha256(orig.data.tobytes()).digest())


def test_save_leaves_no_temp_files(model, tmp_path):
    path = tmp_path / "model.tseal"
    save_container(model, path)
    save_container(model, path)  # overwrite in place is atomic
    assert sorted(p.name for p in tmp_path.iterdir()) == ["model.tseal"]


def test_load_rejects_bad_magic(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(b"NOTMAGIC" + b"\x00" * 40)
    with pytest.raises(FormatError) as err:
        load_container(p)
    assert err.value.offset == 0


def test_load_rejects_short_file(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(MAGIC)
    with pytest.raises(FormatError):
        load_container(p)


def test_load_rejects_future_version(model, tmp_path):
    p = tmp_path / "model.tseal"
    save_container(model, p)
    raw = bytearray(p.read_bytes())
    raw[8:12] = (FORMAT_VERSION + 1).to_bytes(4, "little")
    p.write_bytes(bytes(raw))
    with pytest.raises(UnsupportedVersion):
        load_container(p)


def test_load_rejects_garbage_manifest(model, tmp_path):
    p = tmp_path / "model.tseal"
    save_container(model, p)
    raw = bytearray(p.read_bytes())
    raw[HEADER_LEN] = 0xFF  # first manifest byte: no longer valid JSON
    p.write_bytes(bytes(raw))
    with pytest.raises(FormatError) as err:
        load_container(p)
    assert err.value.offset == HEADER_LEN


def test_load_rejects_truncated_data(model, tmp_path):
    p = tmp_path / "model.tseal"
    save_container(model, p)
    raw = p.read_bytes()
    p.write_bytes(raw[: len(raw) - 64])
    with pytest.raises(FormatError):
        load_container(p)


def test_load_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_container(tmp_path / "nope.tseal")


def test_container_copy_is_deep(model):
    dup = model.copy()
    dup.layers[0].data[0] += 1.0
    dup.class_map[0] = "mutated"
    dup.metadata["owner"] = "mallory"
    assert model.layers[0].data[0] != dup.layers[0].data[0]
    assert model.class_map[0] != "mutated"
    assert model.metadata["owner"] == "alice"


def test_default_chunk_length_constant():
    assert DEFAULT_CHUNK_LENGTH == 8192
    validate_chunk_length(DEFAULT_CHUNK_LENGTH)
