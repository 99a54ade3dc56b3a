import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from kinlaw import io
from kinlaw.errors import FormatError


@settings(max_examples=25, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=1, max_dims=3,
                                                max_side=6),
                  elements=st.floats(allow_nan=False, width=64)))
def test_round_trip_bit_exact(tmp_path_factory, table):
    path = tmp_path_factory.mktemp("io") / "t.bin"
    io.write_field(path, table)
    back = io.read_field(path)
    assert back.shape == table.shape
    assert back.tobytes() == np.ascontiguousarray(table).tobytes()


def test_truncated_file(tmp_path):
    path = tmp_path / "t.bin"
    io.write_field(path, np.arange(10.0), ["x"])
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(FormatError):
        io.read_field(path)


def test_axis_mismatch_names_axis(tmp_path):
    path = tmp_path / "t.bin"
    io.write_field(path, np.zeros((3, 4)), ["w", "z"])
    with pytest.raises(FormatError, match="'z'"):
        io.read_field(path, expect={"z": 5})


def test_manifest_records_versions(tmp_path):
    io.write_manifest(tmp_path, {"config": {"nx": 4}})
    man = io.read_manifest(tmp_path)
    assert man["config"] == {"nx": 4}
    assert {"numpy", "scipy", "kinlaw"} <= set(man["versions"])
