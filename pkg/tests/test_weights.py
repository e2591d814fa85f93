import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures import random_vgg, write_manifest
from salicon.errors import FormatError, ShapeError, TransplantError
from salicon.netgraph import build_miniature_spec, build_salicon_spec
from salicon.weights import (
    VGG16_CONV_LAYERS,
    WeightStore,
    decode,
    encode,
    import_raw,
    load,
    save,
    transplant_vgg,
)


def test_empty_store_is_eight_bytes(tmp_path):
    path = tmp_path / "empty.ntw"
    save(WeightStore(), path)
    assert path.read_bytes() == b"NTW1\x00\x00\x00\x00"
    assert len(load(path)) == 0


def test_single_entry_byte_layout():
    buf = encode(WeightStore({"w": np.ones((1, 1, 1, 1))}))
    assert len(buf) == 8 + 2 + 1 + 16 + 4
    assert buf.hex() == (
        "4e545731" "01000000"  # magic, count
        "0100" "77"  # name length, "w"
        "01000000" "01000000" "01000000" "01000000"
        "0000803f"  # 1.0f
    )


def test_layout_is_row_major_little_endian():
    arr = np.arange(6, dtype=np.float32).reshape(1, 2, 1, 3)
    buf = encode(WeightStore({"ab": arr}))
    assert struct.unpack("<2I", buf[12:20]) == (1, 2)
    assert struct.unpack("<6f", buf[-24:]) == tuple(range(6))


def test_bias_vectors_stored_as_rank4():
    store = WeightStore({"b": np.array([1.0, 2.0])})
    assert store["b"].shape == (1, 1, 1, 2)
    with pytest.raises(ShapeError):
        WeightStore({"m": np.zeros((2, 2))})


def test_order_and_metadata_do_not_affect_equality():
    a = WeightStore({"x": np.zeros((1, 1, 1, 1)), "y": np.ones((1, 1, 1, 1))})
    b = WeightStore({"x": np.zeros((1, 1, 1, 1)), "y": np.ones((1, 1, 1, 1))}, {"note": "other"})
    c = WeightStore({"y": np.ones((1, 1, 1, 1)), "x": np.zeros((1, 1, 1, 1))})
    assert a == b
    assert a != c
    neg = WeightStore({"x": -np.zeros((1, 1, 1, 1)), "y": np.ones((1, 1, 1, 1))})
    assert a != neg  # bit-exact, so -0.0 differs from 0.0


def _one_entry():
    return bytearray(encode(WeightStore({"w": np.ones((1, 1, 1, 1))})))


@pytest.mark.parametrize("mutate,match,offset", [
    (lambda b: b.__setitem__(slice(0, 4), b"NTW2"), "bad magic", 0),
    (lambda b: b.__delitem__(slice(29, None)), "truncated", 27),
    (lambda b: b.__delitem__(slice(6, None)), "truncated", 4),
    (lambda b: b.extend(b"\x00"), "trailing", 31),
    (lambda b: b.__setitem__(slice(11, 15), b"\x00\x00\x00\x00"), "zero dimension", 11),
    (lambda b: b.__setitem__(10, 0xFF), "UTF-8", 10),
])
def test_format_errors_report_offsets(mutate, match, offset):
    buf = _one_entry()
    mutate(buf)
    with pytest.raises(FormatError, match=match) as info:
        decode(bytes(buf))
    assert info.value.offset == offset
    assert f"offset {offset}" in str(info.value)


def test_duplicate_names_rejected():
    entry = _one_entry()[8:]
    buf = b"NTW1" + struct.pack("<I", 2) + bytes(entry) + bytes(entry)
    with pytest.raises(FormatError, match="duplicate"):
        decode(buf)


def test_load_missing_file(tmp_path):
    with pytest.raises(OSError):
        load(tmp_path / "nope.ntw")


names = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=12)
dims = st.tuples(*[st.integers(1, 3)] * 4)


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(names, dims, max_size=5), st.integers(0, 2**32 - 1))
def test_roundtrip_property(entries, seed):
    rng = np.random.default_rng(seed)
    store = WeightStore({n: rng.standard_normal(d) for n, d in entries.items()})
    assert decode(encode(store)) == store


def test_special_values_roundtrip():
    arr = np.array([np.nan, np.inf, -np.inf, -0.0, 1e-45, 3.4e38], np.float32).reshape(1, 1, 2, 3)
    out = decode(encode(WeightStore({"s": arr})))
    assert out["s"].tobytes() == arr.tobytes()


def test_save_is_atomic_replace(tmp_path):
    path = tmp_path / "w.ntw"
    save(WeightStore({"a": np.ones((1, 1, 1, 1))}), path)
    save(WeightStore({"b": np.ones((1, 1, 1, 2))}), path)
    assert load(path).names() == ["b"]
    assert [p.name for p in tmp_path.iterdir()] == ["w.ntw"]


# -- raw import ------------------------------------------------------------------


def test_import_minimal_manifest(tmp_path):
    (tmp_path / "a.bin").write_bytes(np.array([1.5, -2.0], "<f4").tobytes())
    (tmp_path / "m.txt").write_text("# comment\n\nconv1_1.bias 1 1 1 2 a.bin\n")
    store = import_raw(tmp_path / "m.txt")
    assert store.names() == ["conv1_1.bias"]
    assert store["conv1_1.bias"].ravel().tolist() == [1.5, -2.0]


@pytest.mark.parametrize("line,payload,match", [
    ("x 1 1 1 2 a.bin", 4, "holds 4 bytes"),
    ("x 1 1 2 a.bin", 8, "expected"),
    ("x 1 1 1 q a.bin", 8, "non-integer"),
    ("x 1 0 1 2 a.bin", 8, "zero dimension"),
    ("x 1 1 1 2 missing.bin", 8, "cannot read"),
])
def test_import_errors(tmp_path, line, payload, match):
    (tmp_path / "a.bin").write_bytes(b"\x00" * payload)
    (tmp_path / "m.txt").write_text(line + "\n")
    with pytest.raises(FormatError, match=match):
        import_raw(tmp_path / "m.txt")


def test_import_duplicate(tmp_path):
    (tmp_path / "a.bin").write_bytes(b"\x00" * 4)
    (tmp_path / "m.txt").write_text("x 1 1 1 1 a.bin\nx 1 1 1 1 a.bin\n")
    with pytest.raises(FormatError, match="duplicate"):
        import_raw(tmp_path / "m.txt")


def test_full_manifest_feeds_transplant(tmp_path):
    vgg = random_vgg(0, fc=True)
    imported = import_raw(write_manifest(vgg, tmp_path))
    assert imported == vgg
    assert len(transplant_vgg(imported, build_salicon_spec("inference"))) == 54


# -- transplant ------------------------------------------------------------------


@pytest.fixture(scope="module")
def vgg():
    return random_vgg(1, fc=True)


def test_transplant_canonical(vgg):
    spec = build_salicon_spec("inference")
    store = transplant_vgg(vgg, spec, rng_seed=5)
    assert len(store) == 54 == 2 * 2 * len(VGG16_CONV_LAYERS) + 2
    assert "fc6.weights" not in store
    for name in VGG16_CONV_LAYERS:
        for suffix in (".weights", ".bias"):
            assert store[name + suffix].tobytes() == store["sec_" + name + suffix].tobytes()
            assert store[name + suffix].tobytes() == vgg[name + suffix].tobytes()
    w = store["saliency_map.weights"]
    assert w.shape == (1, 1024, 1, 1)
    assert abs(float(w.std()) - 0.01) < 0.002
    assert store["saliency_map.bias"].ravel().tolist() == [0.0]


def test_transplant_seed_determinism(vgg):
    spec = build_salicon_spec("inference")
    a = transplant_vgg(vgg, spec, rng_seed=3)
    assert a == transplant_vgg(vgg, spec, rng_seed=3)
    assert a != transplant_vgg(vgg, spec, rng_seed=4)
    assert encode(a) == encode(transplant_vgg(vgg, spec, rng_seed=3))


def test_transplant_custom_init(vgg):
    store = transplant_vgg(vgg, build_salicon_spec("inference"), gaussian_std=0.0, bias_const=0.25)
    assert not store["saliency_map.weights"].any()
    assert store["saliency_map.bias"].ravel().tolist() == [0.25]


def test_transplant_missing_layer(vgg):
    partial = WeightStore({k: v for k, v in vgg.items() if not k.startswith("conv4_2")})
    with pytest.raises(TransplantError, match="conv4_2"):
        transplant_vgg(partial, build_salicon_spec("inference"))


def test_transplant_shape_mismatch(vgg):
    bad = vgg.copy()
    bad["conv1_1.weights"] = np.zeros((64, 3, 5, 5))
    with pytest.raises(ShapeError, match="conv1_1"):
        transplant_vgg(bad, build_salicon_spec("inference"))


def test_transplant_miniature():
    from salicon.netgraph import MINI_BLOCKS

    spec = build_miniature_spec("training")
    store = transplant_vgg(random_vgg(0, MINI_BLOCKS), spec)
    assert len(store) == 2 * 2 * 2 + 2
    expected = {f"{layer}.{kind}" for layer in spec.param_shapes() for kind in ("weights", "bias")}
    assert set(store.names()) == expected
