import numpy as np
import pytest

from ccds_converter.example import encode_example
from ccds_converter.tensors import encode_tensor
from ccds_converter.tfrecord import write_records


def make_archive(
    path,
    n=5,
    b=4,
    w=8,
    seed=0,
    csi_field="csi",
    position_field="pos-tachy",
    time_field="time",
    position_as_float_list=False,
    time_offset=1.7e9,
):
    """Synthetic archive shaped like the public CSI measurement records:
    each record holds a (B, W, 2) float32 csi tensor, a 3-component float64
    position and a scalar float64 timestamp, all as serialized tensors."""
    rng = np.random.default_rng(seed)
    records = []
    truth = []
    for i in range(n):
        csi = rng.normal(size=(b, w, 2)).astype(np.float32)
        pos = rng.uniform(-5, 5, size=3)
        t = time_offset + i * 0.05
        features = {
            csi_field: encode_tensor(csi),
            time_field: encode_tensor(np.float64(t).reshape(())),
        }
        if position_as_float_list:
            features[position_field] = pos.astype(np.float32)
        else:
            features[position_field] = encode_tensor(pos)
        records.append(encode_example(features))
        truth.append((csi, pos, t))
    write_records(path, records)
    return truth


@pytest.fixture
def rng():
    return np.random.default_rng(7)
