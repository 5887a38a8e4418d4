import numpy as np
import pytest

from bilex.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from bilex.training import ModelState, TrainConfig


def make_state(seed=0):
    cfg = TrainConfig(code_dim=6, disc_hidden=8, seed=seed)
    return ModelState.init(5, cfg, np.random.default_rng(seed)), cfg


class TestRoundTrip:
    def test_parameters_bit_exact(self, tmp_path):
        state, cfg = make_state()
        path = tmp_path / "m.ckpt"
        rng_state = np.random.default_rng(3).bit_generator.state
        save_checkpoint(path, state, cfg, epoch=4, rng_state=rng_state,
                        meta={"note": "x"})
        loaded, cfg2, epoch, rng2, meta = load_checkpoint(path)
        assert cfg2 == cfg
        assert epoch == 4
        assert rng2 == rng_state
        assert meta == {"note": "x"}
        for k, v in state.param_blocks().items():
            np.testing.assert_array_equal(v, loaded.param_blocks()[k])

    def test_repeated_save_byte_identical(self, tmp_path):
        state, cfg = make_state()
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(p1, state, cfg, epoch=1)
        save_checkpoint(p2, state, cfg, epoch=1)
        assert p1.read_bytes() == p2.read_bytes()

    def test_lang_tags_survive(self, tmp_path):
        state, cfg = make_state()
        state.ae_src.lang_tag = "en"
        state.ae_tgt.lang_tag = "es"
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, state, cfg)
        loaded, *_ = load_checkpoint(path)
        assert loaded.ae_src.lang_tag == "en"
        assert loaded.ae_tgt.lang_tag == "es"

    def test_loaded_state_usable(self, tmp_path):
        state, cfg = make_state()
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, state, cfg)
        loaded, *_ = load_checkpoint(path)
        x = np.random.default_rng(1).standard_normal((3, 5))
        np.testing.assert_array_equal(loaded.ae_src.encode(x),
                                      state.ae_src.encode(x))
        probs = loaded.disc_src.forward(loaded.ae_src.encode(x))[0]
        assert ((probs > 0) & (probs < 1)).all()


class TestFormat:
    def test_magic_prefix(self, tmp_path):
        state, cfg = make_state()
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, state, cfg)
        assert path.read_bytes()[:8] == MAGIC

    def test_rejects_non_checkpoint(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(ValueError):
            load_checkpoint(path)

    def test_rejects_unknown_version(self, tmp_path):
        import json
        import struct
        state, cfg = make_state()
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, state, cfg)
        raw = path.read_bytes()
        hlen = struct.unpack("<Q", raw[8:16])[0]
        header = json.loads(raw[16:16 + hlen])
        header["format_version"] = 99
        payload = json.dumps(header, sort_keys=True).encode()
        path.write_bytes(MAGIC + struct.pack("<Q", len(payload)) + payload
                         + raw[16 + hlen:])
        with pytest.raises(ValueError):
            load_checkpoint(path)

    def test_truncated_block_detected(self, tmp_path):
        state, cfg = make_state()
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, state, cfg)
        raw = path.read_bytes()
        path.write_bytes(raw[:-16])
        with pytest.raises(ValueError):
            load_checkpoint(path)
