import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mondet.errors import (
    BadMagic,
    InvalidDims,
    InvalidManifestRow,
    ManifestError,
    MissingManifestFile,
    MissingTensorFile,
    NonFiniteValues,
    PayloadSizeMismatch,
    TensorFormatError,
    UnknownLabel,
    UnknownRole,
    UnsupportedDtype,
    UnsupportedVersion,
)
from mondet.tensorio import (
    DatasetManifest,
    FeatureTensor,
    HEADER,
    ManifestEntry,
    format_real_ceiling,
    read_manifest,
    read_tensor,
    write_manifest,
    write_tensor,
)


def make_file_bytes(h, w, c, values):
    """File image built straight from the format definition."""
    header = b"MONT" + struct.pack("<I", 1) + struct.pack("<III", h, w, c) + struct.pack("<I", 1)
    return header + b"".join(struct.pack("<f", v) for v in values)


class TestTensorFile:
    def test_read_known_bytes(self, tmp_path):
        path = tmp_path / "a.mnt"
        path.write_bytes(make_file_bytes(1, 1, 3, [0.0, 3.0, 4.0]))
        t = read_tensor(path)
        assert t.dims == (1, 1, 3)
        assert np.array_equal(t.values.ravel(), np.array([0.0, 3.0, 4.0], dtype=np.float32))

    def test_single_value_file_size(self, tmp_path):
        # 24-byte header (magic + version + three dims + dtype) plus one float32
        path = tmp_path / "one.mnt"
        write_tensor(FeatureTensor(np.full((1, 1, 1), 2.5)), path)
        assert path.stat().st_size == 28
        assert path.read_bytes() == make_file_bytes(1, 1, 1, [2.5])

    @settings(max_examples=40, deadline=None)
    @given(
        data=arrays(
            dtype=np.float32,
            shape=st.tuples(
                st.integers(1, 4), st.integers(1, 4), st.integers(1, 5)
            ),
            elements=st.floats(width=32, allow_nan=False, allow_infinity=False),
        )
    )
    def test_round_trip_bit_exact(self, tmp_path_factory, data):
        path = tmp_path_factory.mktemp("rt") / "t.mnt"
        t = FeatureTensor(data)
        write_tensor(t, path)
        back = read_tensor(path)
        assert back.dims == t.dims
        assert np.array_equal(back.values, t.values)

    def test_write_deterministic(self, tmp_path, rng):
        t = FeatureTensor(rng.normal(size=(3, 2, 4)))
        write_tensor(t, tmp_path / "a.mnt")
        write_tensor(t, tmp_path / "b.mnt")
        assert (tmp_path / "a.mnt").read_bytes() == (tmp_path / "b.mnt").read_bytes()

    def test_nan_rejected_before_writing(self):
        values = np.zeros((1, 1, 2))
        values[0, 0, 1] = np.nan
        with pytest.raises(NonFiniteValues):
            FeatureTensor(values)

    def test_infinity_rejected(self):
        with pytest.raises(NonFiniteValues):
            FeatureTensor(np.full((1, 1, 1), np.inf))

    def test_payload_size_mismatch(self, tmp_path):
        path = tmp_path / "short.mnt"
        path.write_bytes(make_file_bytes(2, 2, 2, [0.0] * 7))
        with pytest.raises(PayloadSizeMismatch):
            read_tensor(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingTensorFile):
            read_tensor(tmp_path / "nope.mnt")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.mnt"
        path.write_bytes(b"XONT" + make_file_bytes(1, 1, 1, [0.0])[4:])
        with pytest.raises(BadMagic):
            read_tensor(path)

    def test_unsupported_version(self, tmp_path):
        blob = bytearray(make_file_bytes(1, 1, 1, [0.0]))
        blob[4] = 9
        path = tmp_path / "v9.mnt"
        path.write_bytes(bytes(blob))
        with pytest.raises(UnsupportedVersion):
            read_tensor(path)

    def test_unsupported_dtype(self, tmp_path):
        blob = bytearray(make_file_bytes(1, 1, 1, [0.0]))
        blob[20] = 2
        path = tmp_path / "d2.mnt"
        path.write_bytes(bytes(blob))
        with pytest.raises(UnsupportedDtype):
            read_tensor(path)

    def test_zero_dim_rejected(self, tmp_path):
        path = tmp_path / "z.mnt"
        path.write_bytes(make_file_bytes(1, 0, 1, []))
        with pytest.raises(InvalidDims):
            read_tensor(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "trunc.mnt"
        path.write_bytes(b"MONT\x01\x00")
        with pytest.raises(TensorFormatError):
            read_tensor(path)

    def test_nonfinite_payload_detected(self, tmp_path):
        path = tmp_path / "nan.mnt"
        path.write_bytes(make_file_bytes(1, 1, 1, [float("nan")]))
        with pytest.raises(NonFiniteValues):
            read_tensor(path)

    def test_every_header_byte_corruption_detected(self, tmp_path, rng):
        """Flipping any header byte must raise, never return a wrong tensor."""
        path = tmp_path / "good.mnt"
        write_tensor(FeatureTensor(rng.normal(size=(2, 3, 4))), path)
        original = path.read_bytes()
        for offset in range(HEADER.size):
            corrupted = bytearray(original)
            corrupted[offset] ^= 0xFF
            path.write_bytes(bytes(corrupted))
            with pytest.raises(TensorFormatError):
                read_tensor(path)


class TestManifest:
    def write(self, tmp_path, rows, header="path,label,role"):
        path = tmp_path / "manifest.csv"
        path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
        return path

    def test_three_rows_in_order(self, tmp_path):
        path = self.write(
            tmp_path,
            [
                "a.mnt,normal,mon-build",
                "b.mnt,normal,mon-build",
                "c.mnt,anomalous,evaluate",
            ],
        )
        m = read_manifest(path)
        assert [e.path for e in m.entries] == ["a.mnt", "b.mnt", "c.mnt"]
        assert len(m.mon_build) == 2
        assert len(m.evaluate) == 1
        assert m.directory == tmp_path
        assert m.resolve(m.entries[0]) == tmp_path / "a.mnt"

    def test_mon_build_must_be_normal(self, tmp_path):
        path = self.write(tmp_path, ["img7.mnt,anomalous,mon-build"])
        with pytest.raises(InvalidManifestRow):
            read_manifest(path)

    def test_calibrate_role_must_be_normal(self, tmp_path):
        path = self.write(tmp_path, ["x.mnt,anomalous,calibrate"])
        with pytest.raises(InvalidManifestRow):
            read_manifest(path)

    def test_unknown_label(self, tmp_path):
        path = self.write(tmp_path, ["a.mnt,odd,evaluate"])
        with pytest.raises(UnknownLabel):
            read_manifest(path)

    def test_unknown_role(self, tmp_path):
        path = self.write(tmp_path, ["a.mnt,normal,train"])
        with pytest.raises(UnknownRole):
            read_manifest(path)

    def test_header_only_is_valid_and_empty(self, tmp_path):
        m = read_manifest(self.write(tmp_path, []))
        assert m.entries == ()

    def test_bad_header(self, tmp_path):
        path = self.write(tmp_path, [], header="file,cls,split")
        with pytest.raises(ManifestError):
            read_manifest(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingManifestFile):
            read_manifest(tmp_path / "none.csv")

    @settings(max_examples=25, deadline=None)
    @given(perm=st.permutations(list(range(6))))
    def test_order_preserved_for_any_permutation(self, tmp_path_factory, perm):
        rows = [
            ("a.mnt", "normal", "mon-build"),
            ("b.mnt", "normal", "mon-build"),
            ("c.mnt", "normal", "evaluate"),
            ("d.mnt", "anomalous", "evaluate"),
            ("e.mnt", "anomalous", "evaluate"),
            ("f.mnt", "normal", "calibrate"),
        ]
        shuffled = [rows[i] for i in perm]
        path = tmp_path_factory.mktemp("perm") / "m.csv"
        path.write_text(
            "\n".join(["path,label,role"] + [",".join(r) for r in shuffled]) + "\n",
            encoding="utf-8",
        )
        m = read_manifest(path)
        assert [(e.path, e.label, e.role) for e in m.entries] == shuffled

    def test_write_read_round_trip(self, tmp_path):
        manifest = DatasetManifest(
            entries=(
                ManifestEntry("x.mnt", "normal", "mon-build"),
                ManifestEntry("y.mnt", "anomalous", "evaluate"),
            ),
            directory=tmp_path,
        )
        write_manifest(manifest, tmp_path / "m.csv")
        back = read_manifest(tmp_path / "m.csv")
        assert back.entries == manifest.entries


class TestCeilingFormat:
    @settings(max_examples=200, deadline=None)
    @given(x=st.floats(min_value=0.0, max_value=1e12, allow_nan=False))
    def test_never_parses_below_input(self, x):
        s = format_real_ceiling(x)
        assert float(s) >= x
        # stays within one unit in the 9th significant digit
        assert float(s) - x <= max(abs(x), 1e-300) * 1e-8 + 1e-300

    def test_zero(self):
        assert format_real_ceiling(0.0) == "0"
