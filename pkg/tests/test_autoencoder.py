import numpy as np
import pytest

from bilex.autoencoder import (Autoencoder, pretrain, reconstruction_loss,
                               reconstruction_loss_grads)
from bilex.embeddings import EmbeddingMatrix, unit_rows
from bilex.nn import LinearMap

from gradcheck import central_diff, rel_error


def make_ae(enc, dec):
    return Autoencoder(LinearMap(np.asarray(enc, float)),
                       LinearMap(np.asarray(dec, float)))


class TestEncodeDecode:
    def test_identity_encoder(self):
        ae = make_ae(np.eye(3), np.eye(3))
        x = np.random.default_rng(0).standard_normal((4, 3))
        np.testing.assert_array_equal(ae.encode(x), x)

    def test_scaled_encoder(self):
        ae = make_ae(2 * np.eye(2), np.eye(2))
        np.testing.assert_allclose(ae.encode(np.array([[1.0, -1.0]])),
                                   [[2.0, -2.0]])

    def test_empty_batch(self):
        ae = make_ae(np.eye(2), np.eye(2))
        assert ae.encode(np.empty((0, 2))).shape == (0, 2)

    def test_inverse_pair_round_trips(self):
        rng = np.random.default_rng(1)
        enc = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        ae = make_ae(enc, np.linalg.inv(enc))
        x = rng.standard_normal((5, 3))
        np.testing.assert_allclose(ae.decode(ae.encode(x)), x, atol=1e-10)

    def test_zero_decoder(self):
        ae = make_ae(np.eye(2), np.zeros((2, 2)))
        out = ae.decode(np.ones((3, 2)))
        np.testing.assert_array_equal(out, np.zeros((3, 2)))

    def test_column_decoder_hand_value(self):
        # d=2, c=1: decoder [[1],[1]] maps code (3) to (3, 3)
        ae = Autoencoder(LinearMap(np.array([[1.0, 0.0]])),
                         LinearMap(np.array([[1.0], [1.0]])))
        np.testing.assert_allclose(ae.decode(np.array([[3.0]])), [[3.0, 3.0]])

    def test_linearity(self):
        rng = np.random.default_rng(2)
        ae = Autoencoder.init(4, 6, rng)
        x, y = rng.standard_normal((2, 1, 4))
        lhs = ae.encode(2.0 * x - 0.5 * y)
        rhs = 2.0 * ae.encode(x) - 0.5 * ae.encode(y)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_mismatched_shapes_rejected(self):
        with pytest.raises(ValueError):
            make_ae(np.ones((3, 2)), np.ones((3, 2)))


class TestReconstructionLoss:
    def test_perfect_autoencoder(self):
        ae = make_ae(np.eye(3), np.eye(3))
        x = np.random.default_rng(0).standard_normal((4, 3))
        assert reconstruction_loss(ae, x) == pytest.approx(0.0)

    def test_zero_weights_unit_rows(self):
        ae = make_ae(np.zeros((3, 3)), np.zeros((3, 3)))
        x = unit_rows(np.random.default_rng(0).standard_normal((6, 3)))
        assert reconstruction_loss(ae, x) == pytest.approx(1.0)

    def test_hand_value(self):
        ae = make_ae(np.eye(2), 2 * np.eye(2))
        assert reconstruction_loss(ae, np.array([[1.0, 0.0]])) == pytest.approx(1.0)

    def test_empty_batch_errors(self):
        ae = make_ae(np.eye(2), np.eye(2))
        with pytest.raises(ValueError):
            reconstruction_loss(ae, np.empty((0, 2)))

    def test_grads_match_fd(self):
        rng = np.random.default_rng(3)
        ae = Autoencoder.init(4, 3, rng)
        x = rng.standard_normal((5, 4))
        _, g_enc, g_dec = reconstruction_loss_grads(ae, x)
        fd_enc = central_diff(lambda: reconstruction_loss(ae, x),
                              ae.encoder.weight)
        fd_dec = central_diff(lambda: reconstruction_loss(ae, x),
                              ae.decoder.weight)
        assert rel_error(g_enc, fd_enc) < 1e-6
        assert rel_error(g_dec, fd_dec) < 1e-6


def random_unit_embedding(n, d, seed):
    rng = np.random.default_rng(seed)
    return EmbeddingMatrix(tuple(f"w{i}" for i in range(n)),
                           unit_rows(rng.standard_normal((n, d))))


class TestPretrain:
    def test_square_code_reaches_near_zero(self):
        emb = random_unit_embedding(500, 6, seed=0)
        ae = Autoencoder.init(6, 6, np.random.default_rng(1))
        pretrain(ae, emb, epochs=200, seed=2)
        assert ae.pretrain_losses[-1] < 1e-3

    def test_zero_epochs_rejected(self):
        emb = random_unit_embedding(10, 4, seed=0)
        ae = Autoencoder.init(4, 4, np.random.default_rng(1))
        with pytest.raises(ValueError):
            pretrain(ae, emb, epochs=0)

    def test_seeded_determinism_bitwise(self):
        emb = random_unit_embedding(64, 5, seed=0)
        results = []
        for _ in range(2):
            ae = Autoencoder.init(5, 7, np.random.default_rng(1))
            pretrain(ae, emb, epochs=3, seed=9)
            results.append((ae.encoder.weight.copy(), ae.decoder.weight.copy()))
        np.testing.assert_array_equal(results[0][0], results[1][0])
        np.testing.assert_array_equal(results[0][1], results[1][1])

    def test_loss_descends_without_big_regressions(self):
        emb = random_unit_embedding(300, 8, seed=4)
        ae = Autoencoder.init(8, 10, np.random.default_rng(5))
        pretrain(ae, emb, epochs=30, seed=6)
        losses = ae.pretrain_losses
        assert all(b <= 1.10 * a for a, b in zip(losses, losses[1:]))
        assert losses[-1] < losses[0]

    def test_overcomplete_reaches_threshold(self):
        emb = random_unit_embedding(400, 5, seed=7)
        ae = Autoencoder.init(5, 8, np.random.default_rng(8))
        pretrain(ae, emb, epochs=60, seed=9)
        assert ae.pretrain_losses[-1] < 1e-3

    def test_dim_mismatch(self):
        emb = random_unit_embedding(10, 4, seed=0)
        ae = Autoencoder.init(5, 5, np.random.default_rng(1))
        with pytest.raises(ValueError):
            pretrain(ae, emb, epochs=1)
