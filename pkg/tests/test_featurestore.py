import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cropshot.boxes import BoundingBox
from cropshot.errors import (
    BadMagicError,
    DimensionMismatchError,
    FeatureNotFoundError,
    TruncatedCacheError,
    ValidationError,
)
from cropshot.featurestore import (
    FULL,
    CropRequest,
    FeatureStore,
    canonical_key,
    key_for_crop,
    read_crop_manifest,
    read_store,
    write_crop_manifest,
    write_store,
)

# hand-assembled cache: d=2, records ("a", FULL, [1.5, -2.25]) and
# ("b", box(1,2,3,4), [0.0, 7.0])
GOLDEN = (
    b"FSCACHE1"
    + struct.pack("<II", 2, 2)
    + struct.pack("<H", 1) + b"a" + bytes([0]) + struct.pack("<2f", 1.5, -2.25)
    + struct.pack("<H", 1) + b"b" + bytes([1])
    + struct.pack("<4I", 1, 2, 3, 4) + struct.pack("<2f", 0.0, 7.0)
)


class TestFeatureKey:
    def test_full_keys_equal(self):
        assert canonical_key("img7", FULL) == canonical_key("img7", FULL)

    def test_box_field_inequality(self):
        a = canonical_key("img7", BoundingBox(1, 2, 3, 4))
        b = canonical_key("img7", BoundingBox(1, 2, 3, 5))
        assert a != b

    def test_malformed_box(self):
        with pytest.raises(ValidationError):
            BoundingBox(3, 2, 1, 4)

    def test_empty_id_rejected(self):
        with pytest.raises(ValidationError):
            canonical_key("", FULL)

    def test_key_for_crop_folds_full_image(self):
        key = key_for_crop("x", BoundingBox(0, 0, 20, 10), 20, 10)
        assert key == canonical_key("x", FULL)
        assert key_for_crop("x", None, 20, 10) == canonical_key("x", FULL)
        assert key_for_crop("x", BoundingBox(0, 0, 19, 10), 20, 10).crop is not None


class TestStore:
    def test_put_get_float32_canonical(self):
        # put rounds to the cache's storage dtype, so an in-memory store
        # and a file round trip hand back identical values
        store = FeatureStore(dimension=3)
        store.put(canonical_key("a"), np.array([1.1, 2.2, 3.3]))
        got = store.get(canonical_key("a"))
        assert got.dtype == np.float32
        np.testing.assert_array_equal(got, np.array([1.1, 2.2, 3.3], dtype=np.float32))

    def test_dimension_mismatch(self):
        store = FeatureStore(dimension=3)
        with pytest.raises(DimensionMismatchError):
            store.put(canonical_key("a"), np.zeros(4))

    def test_non_finite_rejected(self):
        store = FeatureStore(dimension=2)
        with pytest.raises(ValidationError):
            store.put(canonical_key("a"), np.array([1.0, np.nan]))

    def test_absent_key_distinct_error(self):
        store = FeatureStore(dimension=2)
        with pytest.raises(FeatureNotFoundError) as err:
            store.get(canonical_key("nope"))
        assert not isinstance(err.value, OSError)
        assert isinstance(err.value, KeyError)

    def test_missing_listing(self):
        store = FeatureStore(dimension=2)
        store.put(canonical_key("a"), np.zeros(2))
        keys = [canonical_key("a"), canonical_key("b")]
        assert store.missing(keys) == [canonical_key("b")]


class TestCodec:
    def test_golden_bytes(self, tmp_path):
        store = FeatureStore(dimension=2)
        store.put(canonical_key("a", FULL), np.array([1.5, -2.25]))
        store.put(canonical_key("b", BoundingBox(1, 2, 3, 4)), np.array([0.0, 7.0]))
        path = tmp_path / "c.fscache"
        write_store(store, path)
        assert path.read_bytes() == GOLDEN

    def test_golden_read(self, tmp_path):
        path = tmp_path / "c.fscache"
        path.write_bytes(GOLDEN)
        store = read_store(path)
        assert len(store) == 2
        np.testing.assert_array_equal(store.get(canonical_key("a")), [1.5, -2.25])
        key = canonical_key("b", BoundingBox(1, 2, 3, 4))
        np.testing.assert_array_equal(store.get(key), [0.0, 7.0])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "c.fscache"
        path.write_bytes(b"NOTMAGIC" + GOLDEN[8:])
        with pytest.raises(BadMagicError):
            read_store(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "c.fscache"
        path.write_bytes(GOLDEN[:-3])
        with pytest.raises(TruncatedCacheError):
            read_store(path)

    def test_trailing_garbage(self, tmp_path):
        path = tmp_path / "c.fscache"
        path.write_bytes(GOLDEN + b"\x00")
        with pytest.raises(TruncatedCacheError):
            read_store(path)

    @given(
        dim=st.integers(1, 6),
        entries=st.lists(
            st.tuples(
                st.text(min_size=1, max_size=20).filter(lambda s: s.strip()),
                st.booleans(),
            ),
            min_size=0,
            max_size=8,
            unique_by=lambda t: t,
        ),
        pyrandom=st.randoms(use_true_random=False),
    )
    @settings(max_examples=60, deadline=None)
    def test_round_trip_property(self, dim, entries, pyrandom, tmp_path_factory):
        store = FeatureStore(dimension=dim)
        for ident, with_box in entries:
            crop = FULL
            if with_box:
                x0 = pyrandom.randrange(0, 50)
                y0 = pyrandom.randrange(0, 50)
                crop = BoundingBox(
                    x0, y0, x0 + pyrandom.randrange(1, 50), y0 + pyrandom.randrange(1, 50)
                )
            vec = np.array([pyrandom.uniform(-1e6, 1e6) for _ in range(dim)])
            key = canonical_key(ident, crop)
            if key in store:
                continue
            store.put(key, vec)
        path = tmp_path_factory.mktemp("codec") / "s.fscache"
        write_store(store, path)
        loaded = read_store(path)
        assert loaded.dimension == store.dimension
        assert sorted(map(str, loaded.keys())) == sorted(map(str, store.keys()))
        for key in store.keys():
            np.testing.assert_array_equal(loaded.get(key), store.get(key))

    def test_round_trip_bit_exact_values(self, tmp_path):
        # values chosen to exercise float32 edge encodings
        vals = np.array([np.float32(np.pi), -0.0, np.finfo(np.float32).tiny, 3e38])
        store = FeatureStore(dimension=4)
        store.put(canonical_key("edge"), vals)
        write_store(store, tmp_path / "s.fscache")
        loaded = read_store(tmp_path / "s.fscache")
        a = loaded.get(canonical_key("edge")).astype(np.float32)
        b = store.get(canonical_key("edge")).astype(np.float32)
        assert a.tobytes() == b.tobytes()


class TestCropManifest:
    def test_round_trip(self, tmp_path):
        requests = [
            CropRequest("a", FULL, "support"),
            CropRequest("a", BoundingBox(1, 2, 3, 4), "support"),
            CropRequest("b", BoundingBox(0, 0, 9, 9), "test"),
        ]
        path = tmp_path / "crops.ndjson"
        assert write_crop_manifest(requests, path) == 3
        loaded = read_crop_manifest(path)
        assert loaded == requests

    def test_full_is_literal_string(self, tmp_path):
        path = tmp_path / "crops.ndjson"
        write_crop_manifest([CropRequest("a", FULL, "support")], path)
        line = path.read_text().strip()
        assert '"crop": "full"' in line
