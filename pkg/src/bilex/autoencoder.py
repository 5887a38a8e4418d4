"""Per-language linear autoencoder and its monolingual pretraining.

The encoder projects d-dimensional embeddings to c-dimensional codes and
the decoder maps codes back; both are bias-free linear maps.  Pretraining
minimizes the mean squared reconstruction error with SGD over shuffled
minibatches, which for c >= d can reach (numerically) zero loss.
"""

from __future__ import annotations

import logging

import numpy as np

from .embeddings import EmbeddingMatrix
from .errors import TrainingDiverged
from .nn import LinearMap, SgdOptimizer, linear_backward, linear_forward

logger = logging.getLogger(__name__)


class Autoencoder:
    """Linear encoder (c x d) / decoder (d x c) pair for one language."""

    def __init__(self, encoder: LinearMap, decoder: LinearMap, lang_tag: str = ""):
        if encoder.in_dim != decoder.out_dim or encoder.out_dim != decoder.in_dim:
            raise ValueError(
                f"encoder ({encoder.out_dim}, {encoder.in_dim}) and decoder "
                f"({decoder.out_dim}, {decoder.in_dim}) shapes do not pair up")
        self.encoder = encoder
        self.decoder = decoder
        self.lang_tag = lang_tag
        self.pretrain_losses: list[float] = []

    @property
    def emb_dim(self) -> int:
        return self.encoder.in_dim

    @property
    def code_dim(self) -> int:
        return self.encoder.out_dim

    @classmethod
    def init(cls, emb_dim: int, code_dim: int, rng: np.random.Generator,
             lang_tag: str = "") -> "Autoencoder":
        # Both directions drawn uniform in [-1/sqrt(d), 1/sqrt(d)] so the
        # initial codes stay at the scale of the (unit-norm) inputs.
        scale = 1.0 / np.sqrt(emb_dim)
        enc = LinearMap.uniform_init(code_dim, emb_dim, rng, scale=scale)
        dec = LinearMap.uniform_init(emb_dim, code_dim, rng, scale=scale)
        return cls(enc, dec, lang_tag)

    def copy(self) -> "Autoencoder":
        dup = Autoencoder(self.encoder.copy(), self.decoder.copy(), self.lang_tag)
        dup.pretrain_losses = list(self.pretrain_losses)
        return dup

    def encode(self, batch: np.ndarray) -> np.ndarray:
        return linear_forward(self.encoder, batch)

    def decode(self, codes: np.ndarray) -> np.ndarray:
        return linear_forward(self.decoder, codes)


def reconstruction_loss(ae: Autoencoder, batch: np.ndarray) -> float:
    """Mean over the batch of the squared L2 reconstruction error."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.shape[0] == 0:
        raise ValueError("empty batch")
    resid = ae.decode(ae.encode(batch)) - batch
    return float(np.sum(resid * resid) / batch.shape[0])


def reconstruction_loss_grads(ae: Autoencoder, batch: np.ndarray):
    """Loss value plus gradients (d_encoder, d_decoder)."""
    batch = np.asarray(batch, dtype=np.float64)
    b = batch.shape[0]
    if b == 0:
        raise ValueError("empty batch")
    codes = ae.encode(batch)
    recon = ae.decode(codes)
    resid = recon - batch
    loss = float(np.sum(resid * resid) / b)
    d_recon = 2.0 * resid / b
    d_codes, g_dec, _ = linear_backward(ae.decoder, codes, d_recon)
    _, g_enc, _ = linear_backward(ae.encoder, batch, d_codes)
    return loss, g_enc, g_dec


def pretrain(ae: Autoencoder, emb: EmbeddingMatrix, epochs: int,
             batch_size: int = 32, lr: float = 0.1, lr_decay: float = 0.98,
             seed: int = 0) -> Autoencoder:
    """SGD-pretrain the autoencoder on one language's embeddings, in place.

    Runs `epochs` shuffled passes over the vocabulary; the per-epoch mean
    loss history is recorded on the instance.  A non-finite loss aborts.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if emb.dim != ae.emb_dim:
        raise ValueError(f"embedding dim {emb.dim} != autoencoder dim {ae.emb_dim}")
    rng = np.random.default_rng(seed)
    opt = SgdOptimizer(lr, lr_decay)
    data = emb.vectors
    ae.pretrain_losses = []
    for epoch in range(epochs):
        order = rng.permutation(len(emb))
        total, seen = 0.0, 0
        for start in range(0, len(order), batch_size):
            batch = data[order[start:start + batch_size]]
            loss, g_enc, g_dec = reconstruction_loss_grads(ae, batch)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"autoencoder {ae.lang_tag!r} diverged at epoch {epoch}")
            opt.step([ae.encoder.weight, ae.decoder.weight], [g_enc, g_dec])
            total += loss * batch.shape[0]
            seen += batch.shape[0]
        mean_loss = total / seen
        if ae.pretrain_losses and mean_loss > 1.10 * ae.pretrain_losses[-1]:
            logger.warning("autoencoder %r: epoch %d mean loss rose >10%% "
                           "(%.3g -> %.3g)", ae.lang_tag, epoch,
                           ae.pretrain_losses[-1], mean_loss)
        ae.pretrain_losses.append(mean_loss)
        opt.decay_lr()
    logger.info("autoencoder %r: final pretraining loss %.3g",
                ae.lang_tag, ae.pretrain_losses[-1])
    return ae
