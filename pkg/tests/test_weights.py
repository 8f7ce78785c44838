import struct

import numpy as np
import pytest

from pantext import weights as W
from pantext.errors import WeightsError

CFG = W.NetConfig(channels=4)


@pytest.fixture(scope="module")
def small():
    return W.init_weights(CFG, seed=123)


def _records(data):
    """Minimal independent PANW reader: name -> array."""
    assert data[:4] == b"PANW"
    pos, out = 6, {}
    while pos < len(data):
        (n,) = struct.unpack_from("<H", data, pos)
        name = data[pos + 2:pos + 2 + n].decode()
        pos += 2 + n
        rank = data[pos]
        dims = struct.unpack_from(f"<{rank}I", data, pos + 1)
        pos += 1 + 4 * rank
        count = int(np.prod(dims))
        out[name] = np.frombuffer(data[pos:pos + 8 * count], "<f8").reshape(dims)
        pos += 8 * count
    return out


class TestInit:
    def test_table_covers_all_layers(self, small):
        assert set(small.params) == set(W.layer_table(CFG))

    def test_shapes_and_biases(self, small):
        for name, (o, i, k, d) in W.layer_table(CFG).items():
            p = small[name]
            assert p.weight.shape == (o, i, k, k) and p.dilation == d
            assert np.all(p.bias == 0)

    def test_gaussian_std(self):
        w = W.init_weights(W.NetConfig(), seed=0)
        allw = np.concatenate([p.weight.ravel() for p in w.params.values()])
        assert abs(allw.std() - 0.01) < 2e-4 and abs(allw.mean()) < 2e-4

    def test_seeded(self):
        a, b = W.init_weights(CFG, seed=5), W.init_weights(CFG, seed=5)
        c = W.init_weights(CFG, seed=6)
        assert W.dumps(a) == W.dumps(b) != W.dumps(c)

    def test_dilations(self, small):
        assert [small[f"fpa.dil{r}"].dilation for r in (3, 6, 12)] == [3, 6, 12]
        assert small["fpa.dil12"].padding == 12

    def test_missing_layer(self, small):
        with pytest.raises(WeightsError):
            small["nope"]

    def test_replace_validates(self, small):
        with pytest.raises(WeightsError):
            small.replace("head.cls", weight=np.zeros((3, 8, 1, 1)))


class TestFormat:
    def test_roundtrip(self, small):
        back = W.loads(W.dumps(small))
        assert back.config == CFG and back.seed == 123
        for name in W.layer_table(CFG):
            np.testing.assert_array_equal(back[name].weight, small[name].weight)
            np.testing.assert_array_equal(back[name].bias, small[name].bias)

    def test_layout(self, small):
        data = W.dumps(small)
        assert data[:4] == b"PANW" and struct.unpack_from("<H", data, 4) == (1,)
        recs = _records(data)
        assert recs["meta.config"].tolist() == [4, 0, 6]
        np.testing.assert_array_equal(recs["base.conv1.weight"], small["base.conv1"].weight)
        assert recs["head.quad.bias"].shape == (8,)

    def test_large_seed(self):
        w = W.init_weights(CFG, seed=2 ** 40 + 17)
        assert W.loads(W.dumps(w)).seed == 2 ** 40 + 17

    def test_file_roundtrip(self, small, tmp_path):
        p = tmp_path / "w.panw"
        W.save(small, p)
        assert W.dumps(W.load(p)) == W.dumps(small)

    def test_bad_magic(self):
        with pytest.raises(WeightsError, match="magic"):
            W.loads(b"NOPE\x01\x00")

    def test_bad_version(self, small):
        data = bytearray(W.dumps(small))
        data[4] = 9
        with pytest.raises(WeightsError, match="version"):
            W.loads(bytes(data))

    def test_truncated(self, small):
        data = W.dumps(small)
        for cut in (5, 100, len(data) - 3):
            with pytest.raises(WeightsError):
                W.loads(data[:cut])

    def test_missing_record(self, small):
        data = W.dumps(small)
        name = b"head.mask_out.bias"
        cut = data.index(struct.pack("<H", len(name)) + name)
        with pytest.raises(WeightsError, match="head.mask_out"):
            W.loads(data[:cut])

    def test_wrong_shape(self, small):
        params = dict(small.params)
        bad = W.ModelWeights(CFG, params, 0)
        bad.params["head.cls"] = W._conv(np.zeros((2, 3, 1, 1)), np.zeros(2), 1)
        with pytest.raises(WeightsError, match="head.cls"):
            W.loads(W.dumps(bad))

    def test_unknown_record(self, small):
        extra = W._record("bogus", np.zeros(2))
        with pytest.raises(WeightsError, match="bogus"):
            W.loads(W.dumps(small) + extra)
