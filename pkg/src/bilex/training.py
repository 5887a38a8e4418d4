"""Adversarial alignment of two code spaces with cycle and reconstruction
constraints.

The game has three kinds of players per direction: a discriminator that
classifies whether a code came from its language's encoder or from the
other language's mapper; the mapper, trained to fool that discriminator;
and the encoder on the discriminator's own side, trained (optionally) to
make its codes look mapped.  Two further updates regularize the mappers:
a cycle constraint (map there and back, stay put, unsquared L2) and a
post-cycle reconstruction constraint (decode the round-tripped code back
to the original embedding, squared L2).  After each mapper update the
weights are pulled toward the orthogonal manifold with the update
W <- (1+beta) W - beta (W W^T) W.

Each iteration runs the critic loop (n_critics discriminator updates per
side on fresh batches), then the generator/cycle/reconstruction updates
for source-to-target, then the mirror image for target-to-source.  After
every epoch an unsupervised validation criterion (mean cosine between
frequent mapped codes and their retrieved neighbors) decides whether the
current state becomes the checkpointed best.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .autoencoder import Autoencoder
from .embeddings import EmbeddingMatrix, unit_rows
from .errors import TrainingDiverged
from .nn import (DiscriminatorNet, LinearMap, SgdOptimizer, bce_smoothed,
                 bce_smoothed_grad)
from .retrieval import CslsIndex, CslsParams

logger = logging.getLogger(__name__)

DIRECTIONS = ("src2tgt", "tgt2src")


@dataclass
class TrainConfig:
    """Every knob of the adversarial training stage.

    Defaults follow the reference hyperparameters: cycle weight 5,
    reconstruction weight 1, smoothing 0.2, five critic updates, SGD with
    lr 0.1 decayed by 0.98 per epoch, batch 32, code dimension 350,
    orthogonalization strength 0.01.  The discriminator width is
    configurable so desk-scale runs and gradient checks stay cheap.
    """

    code_dim: int = 350
    lambda_cyc: float = 5.0
    lambda_rec: float = 1.0
    smoothing: float = 0.2
    smooth_generator: bool = False
    n_critics: int = 5
    n_epochs: int = 5
    iters_per_epoch: int | None = None
    batch_size: int = 32
    lr: float = 0.1
    lr_decay: float = 0.98
    beta_ortho: float = 0.01
    disc_hidden: int = 2048
    disc_dropout: float = 0.1
    leaky_slope: float = 0.2
    disc_vocab_top: int = 75_000
    valid_vocab_top: int = 10_000
    csls_k: int = 10
    pretrain_epochs: int = 5
    seed: int = 0
    # Ablation switches: encoder-as-adversary, reconstruction, cycle.
    enc_adv: bool = True
    recon: bool = True
    cycle: bool = True

    def __post_init__(self):
        if self.lambda_cyc < 0 or self.lambda_rec < 0:
            raise ValueError("loss weights must be >= 0")
        if not 0.0 <= self.smoothing < 0.5:
            raise ValueError("smoothing must lie in [0, 0.5)")
        if self.n_critics < 1:
            raise ValueError("n_critics must be >= 1")
        if not 0.0 < self.beta_ortho < 1.0:
            raise ValueError("beta_ortho must lie in (0, 1)")
        if self.n_epochs < 0 or self.batch_size < 1 or self.code_dim < 1:
            raise ValueError("bad epoch/batch/code_dim value")
        if self.iters_per_epoch is not None and self.iters_per_epoch < 1:
            raise ValueError("iters_per_epoch must be >= 1 when given")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


@dataclass
class ValidationRecord:
    """Per-epoch validation outcome plus the epoch's mean loss components."""

    epoch: int
    criterion: float
    is_best: bool
    losses: dict = field(default_factory=dict)


class ModelState:
    """All learnable parameters of the aligner.

    Two autoencoders, the two cross-lingual mappers between the code
    spaces, and the two discriminators.
    """

    def __init__(self, ae_src: Autoencoder, ae_tgt: Autoencoder,
                 to_tgt: LinearMap, to_src: LinearMap,
                 disc_src: DiscriminatorNet, disc_tgt: DiscriminatorNet):
        c = ae_src.code_dim
        if not (ae_tgt.code_dim == c == to_tgt.in_dim == to_tgt.out_dim
                == to_src.in_dim == to_src.out_dim == disc_src.code_dim
                == disc_tgt.code_dim):
            raise ValueError("inconsistent code dimensions across components")
        self.ae_src = ae_src
        self.ae_tgt = ae_tgt
        self.to_tgt = to_tgt
        self.to_src = to_src
        self.disc_src = disc_src
        self.disc_tgt = disc_tgt

    # refine() swaps mappers by assignment; keep the old names meaningful.
    @property
    def mapper_g(self) -> LinearMap:
        return self.to_tgt

    @property
    def mapper_f(self) -> LinearMap:
        return self.to_src

    @property
    def code_dim(self) -> int:
        return self.ae_src.code_dim

    @classmethod
    def init(cls, emb_dim: int, cfg: TrainConfig,
             rng: np.random.Generator) -> "ModelState":
        ae_src = Autoencoder.init(emb_dim, cfg.code_dim, rng, "src")
        ae_tgt = Autoencoder.init(emb_dim, cfg.code_dim, rng, "tgt")
        # Mappers start at the identity: orthogonal, and a sensible first
        # guess when both code spaces are pretrained on similar data.
        to_tgt = LinearMap(np.eye(cfg.code_dim))
        to_src = LinearMap(np.eye(cfg.code_dim))
        disc_src = DiscriminatorNet(cfg.code_dim, cfg.disc_hidden,
                                    cfg.leaky_slope, cfg.disc_dropout, rng)
        disc_tgt = DiscriminatorNet(cfg.code_dim, cfg.disc_hidden,
                                    cfg.leaky_slope, cfg.disc_dropout, rng)
        return cls(ae_src, ae_tgt, to_tgt, to_src, disc_src, disc_tgt)

    def copy(self) -> "ModelState":
        return ModelState(self.ae_src.copy(), self.ae_tgt.copy(),
                          self.to_tgt.copy(), self.to_src.copy(),
                          self.disc_src.copy(), self.disc_tgt.copy())

    def param_blocks(self) -> dict[str, np.ndarray]:
        """Named view of every parameter array (checkpoint/checksum order)."""
        blocks = {
            "ae_src.encoder.weight": self.ae_src.encoder.weight,
            "ae_src.decoder.weight": self.ae_src.decoder.weight,
            "ae_tgt.encoder.weight": self.ae_tgt.encoder.weight,
            "ae_tgt.decoder.weight": self.ae_tgt.decoder.weight,
            "to_tgt.weight": self.to_tgt.weight,
            "to_src.weight": self.to_src.weight,
        }
        for tag, disc in (("disc_src", self.disc_src), ("disc_tgt", self.disc_tgt)):
            for i, layer in enumerate((disc.layer1, disc.layer2, disc.layer3), 1):
                blocks[f"{tag}.layer{i}.weight"] = layer.weight
                blocks[f"{tag}.layer{i}.bias"] = layer.bias
        return blocks

    def all_finite(self) -> bool:
        return all(np.isfinite(b).all() for b in self.param_blocks().values())

    def checksums(self) -> dict[str, float]:
        """Cheap per-block fingerprints for parameter-isolation assertions."""
        return {k: float(v.sum()) for k, v in self.param_blocks().items()}


def _mapper(state: ModelState, direction: str) -> LinearMap:
    return state.to_tgt if direction == "src2tgt" else state.to_src


def _back_mapper(state: ModelState, direction: str) -> LinearMap:
    return state.to_src if direction == "src2tgt" else state.to_tgt


def _disc(state: ModelState, side: str) -> DiscriminatorNet:
    if side not in ("src", "tgt"):
        raise ValueError(f"side must be 'src' or 'tgt', got {side!r}")
    return state.disc_src if side == "src" else state.disc_tgt


# --------------------------------------------------------------------------
# Loss graphs: each returns the scalar loss, and the *_grads variant also
# returns analytic gradients for exactly the parameters that step updates.
# --------------------------------------------------------------------------

def discriminator_loss(state: ModelState, side: str, real_codes, mapped_codes,
                       s: float, training: bool = False, rng=None) -> float:
    """Classification loss of one discriminator: real codes scored toward
    1-s, mapped codes toward s."""
    disc = _disc(state, side)
    p_real = disc.forward(real_codes, training, rng)[0]
    p_fake = disc.forward(mapped_codes, training, rng)[0]
    return bce_smoothed(p_real, True, s) + bce_smoothed(p_fake, False, s)


def _discriminator_grads(disc: DiscriminatorNet, real_codes, mapped_codes,
                         s: float, rng) -> tuple[float, list[np.ndarray]]:
    p_real, cache_r = disc.forward(real_codes, training=True, rng=rng)
    p_fake, cache_f = disc.forward(mapped_codes, training=True, rng=rng)
    loss = bce_smoothed(p_real, True, s) + bce_smoothed(p_fake, False, s)
    _, g_real = disc.backward(cache_r, bce_smoothed_grad(p_real, True, s))
    _, g_fake = disc.backward(cache_f, bce_smoothed_grad(p_fake, False, s))
    return loss, [a + b for a, b in zip(g_real, g_fake)]


def generator_adv_loss(state: ModelState, direction: str, mapped_codes,
                       real_codes, s: float, training: bool = False,
                       rng=None) -> float:
    """Generator-side adversarial loss against the direction's frozen
    discriminator: mapped codes pushed toward 1-s, encoded codes toward s."""
    side = "tgt" if direction == "src2tgt" else "src"
    disc = _disc(state, side)
    p_mapped = disc.forward(mapped_codes, training, rng)[0]
    p_real = disc.forward(real_codes, training, rng)[0]
    return bce_smoothed(p_mapped, True, s) + bce_smoothed(p_real, False, s)


def _generator_adv_grads(disc: DiscriminatorNet, mapper: LinearMap,
                         adv_encoder: LinearMap, src_codes: np.ndarray,
                         adv_batch: np.ndarray, s: float, rng,
                         include_encoder: bool, mapped_mask=None,
                         real_mask=None):
    """Gradients of the adversarial loss for (mapper, adversarial encoder).

    src_codes are treated as constants (the feeding encoder is not a player
    in this step); adv_batch holds the raw embeddings whose encoding forms
    the 'real' side, so the encoder gradient can flow.  The optional masks
    pin the discriminator's dropout pattern for gradient checking.
    """
    mapped = src_codes @ mapper.weight.T
    p_mapped, cache_m = disc.forward(mapped, training=True, rng=rng,
                                     mask=mapped_mask)
    loss = bce_smoothed(p_mapped, True, s)
    d_mapped, _ = disc.backward(cache_m, bce_smoothed_grad(p_mapped, True, s))
    g_mapper = d_mapped.T @ src_codes

    real_codes = adv_batch @ adv_encoder.weight.T
    p_real, cache_r = disc.forward(real_codes, training=True, rng=rng,
                                   mask=real_mask)
    loss += bce_smoothed(p_real, False, s)
    if include_encoder:
        d_real, _ = disc.backward(cache_r, bce_smoothed_grad(p_real, False, s))
        g_encoder = d_real.T @ adv_batch
    else:
        g_encoder = np.zeros_like(adv_encoder.weight)
    return loss, g_mapper, g_encoder


def cycle_loss(state: ModelState, codes: np.ndarray, direction: str) -> float:
    """Mean unsquared L2 distance between codes and their round trip."""
    fwd, bwd = _mapper(state, direction), _back_mapper(state, direction)
    codes = np.asarray(codes, dtype=np.float64)
    if codes.shape[0] == 0:
        raise ValueError("empty batch")
    round_trip = (codes @ fwd.weight.T) @ bwd.weight.T
    return float(np.mean(np.linalg.norm(codes - round_trip, axis=1)))


def _cycle_grads(fwd: LinearMap, bwd: LinearMap, codes: np.ndarray):
    b = codes.shape[0]
    if b == 0:
        raise ValueError("empty batch")
    u = codes @ fwd.weight.T
    v = u @ bwd.weight.T
    resid = codes - v
    norms = np.linalg.norm(resid, axis=1)
    loss = float(norms.mean())
    d_v = -resid / (b * np.maximum(norms, 1e-12))[:, None]
    g_bwd = d_v.T @ u
    d_u = d_v @ bwd.weight
    g_fwd = d_u.T @ codes
    return loss, g_fwd, g_bwd


def post_cycle_reconstruction_loss(state: ModelState, batch: np.ndarray,
                                   direction: str) -> float:
    """Mean squared L2 error decoding the round-tripped code back to the
    original embedding, on the direction's source side."""
    ae = state.ae_src if direction == "src2tgt" else state.ae_tgt
    fwd, bwd = _mapper(state, direction), _back_mapper(state, direction)
    batch = np.asarray(batch, dtype=np.float64)
    if batch.shape[0] == 0:
        raise ValueError("empty batch")
    codes = ae.encode(batch)
    recon = ae.decode((codes @ fwd.weight.T) @ bwd.weight.T)
    resid = batch - recon
    return float(np.sum(resid * resid) / batch.shape[0])


def _post_cycle_grads(ae: Autoencoder, fwd: LinearMap, bwd: LinearMap,
                      batch: np.ndarray):
    b = batch.shape[0]
    if b == 0:
        raise ValueError("empty batch")
    z = batch @ ae.encoder.weight.T
    u = z @ fwd.weight.T
    v = u @ bwd.weight.T
    recon = v @ ae.decoder.weight.T
    resid = recon - batch
    loss = float(np.sum(resid * resid) / b)
    d_recon = 2.0 * resid / b
    g_dec = d_recon.T @ v
    d_v = d_recon @ ae.decoder.weight
    g_bwd = d_v.T @ u
    d_u = d_v @ bwd.weight
    g_fwd = d_u.T @ z
    d_z = d_u @ fwd.weight
    g_enc = d_z.T @ batch
    return loss, g_fwd, g_bwd, g_enc, g_dec


def direction_total_loss(state: ModelState, src_batch, tgt_batch,
                         direction: str, cfg: TrainConfig) -> tuple[float, dict]:
    """Weighted single-direction objective: adv + l_cyc*cycle + l_rec*recon.

    Evaluated with dropout off; returns (total, parts).
    """
    ae_from = state.ae_src if direction == "src2tgt" else state.ae_tgt
    ae_to = state.ae_tgt if direction == "src2tgt" else state.ae_src
    codes = ae_from.encode(src_batch)
    mapped = codes @ _mapper(state, direction).weight.T
    real = ae_to.encode(tgt_batch)
    s_gen = cfg.smoothing if cfg.smooth_generator else 0.0
    parts = {
        "adv": generator_adv_loss(state, direction, mapped, real, s_gen),
        "cyc": cycle_loss(state, codes, direction),
        "rec": post_cycle_reconstruction_loss(state, src_batch, direction),
    }
    total = parts["adv"] + cfg.lambda_cyc * parts["cyc"] + cfg.lambda_rec * parts["rec"]
    return total, parts


def total_objective(state: ModelState, src_batch, tgt_batch,
                    cfg: TrainConfig) -> float:
    """Sum of both directions' weighted objectives."""
    fwd, _ = direction_total_loss(state, src_batch, tgt_batch, "src2tgt", cfg)
    bwd, _ = direction_total_loss(state, tgt_batch, src_batch, "tgt2src", cfg)
    return fwd + bwd


def orthogonalize(mapper: LinearMap, beta: float) -> LinearMap:
    """One pull toward the orthogonal manifold:
    W <- (1+beta) W - beta (W W^T) W, in place."""
    w = mapper.weight
    if w.shape[0] != w.shape[1]:
        raise ValueError("orthogonalize needs a square map")
    w[...] = (1.0 + beta) * w - beta * (w @ w.T) @ w
    return mapper


def validation_criterion(state: ModelState, src_emb: EmbeddingMatrix,
                         tgt_emb: EmbeddingMatrix, cfg: TrainConfig) -> float:
    """Unsupervised model-selection score.

    Maps the most frequent source words into the target code space,
    retrieves each one's CSLS-nearest target code, and returns the mean
    cosine similarity of these pseudo-translation pairs.
    """
    top = cfg.valid_vocab_top
    if len(src_emb) < top:
        logger.warning("validation vocab %d smaller than %d; using all",
                       len(src_emb), top)
        top = len(src_emb)
    codes = state.ae_src.encode(src_emb.vectors[:top])
    mapped = codes @ state.to_tgt.weight.T
    tgt_codes = state.ae_tgt.encode(tgt_emb.vectors)
    index = CslsIndex(mapped, tgt_codes, CslsParams(cfg.csls_k), mode="csls")
    neighbors = index.nearest()
    mapped_u = unit_rows(mapped)
    tgt_u = index.tgt[neighbors]
    return float(np.mean(np.sum(mapped_u * tgt_u, axis=1)))


# --------------------------------------------------------------------------
# Training loop
# --------------------------------------------------------------------------

class _LossMeter:
    def __init__(self):
        self.totals: dict[str, float] = {}
        self.counts: dict[str, int] = {}

    def add(self, name: str, value: float):
        self.totals[name] = self.totals.get(name, 0.0) + value
        self.counts[name] = self.counts.get(name, 0) + 1

    def means(self) -> dict[str, float]:
        return {k: self.totals[k] / self.counts[k] for k in self.totals}


def _check_finite(name: str, value: float, best_state, history):
    if not math.isfinite(value):
        raise TrainingDiverged(f"non-finite {name} loss ({value})",
                               best_state=best_state, history=history)


def train(state: ModelState, src_emb: EmbeddingMatrix,
          tgt_emb: EmbeddingMatrix, cfg: TrainConfig,
          rng: np.random.Generator | None = None):
    """Run the adversarial game and return (best_state, history).

    The state is updated in place epoch by epoch; the returned best state
    is a deep copy taken whenever the validation criterion strictly
    improves.  n_epochs=0 performs a single validation pass and returns a
    copy of the unmodified state.  A non-finite loss raises
    TrainingDiverged carrying the best state seen so far.
    """
    if src_emb.dim != state.ae_src.emb_dim or tgt_emb.dim != state.ae_tgt.emb_dim:
        raise ValueError("embedding dims do not match the model")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    top_src = min(cfg.disc_vocab_top, len(src_emb))
    top_tgt = min(cfg.disc_vocab_top, len(tgt_emb))
    iters = cfg.iters_per_epoch
    if iters is None:
        iters = max(1, math.ceil(max(top_src, top_tgt) / cfg.batch_size))

    history: list[ValidationRecord] = []
    if cfg.n_epochs == 0:
        crit = validation_criterion(state, src_emb, tgt_emb, cfg)
        history.append(ValidationRecord(0, crit, True, {}))
        return state.copy(), history

    opt = SgdOptimizer(cfg.lr, cfg.lr_decay)
    s_gen = cfg.smoothing if cfg.smooth_generator else 0.0
    best_state = state.copy()
    best_crit = -np.inf
    src_vecs, tgt_vecs = src_emb.vectors, tgt_emb.vectors

    def sample(vecs, top):
        return vecs[rng.integers(0, top, size=cfg.batch_size)]

    for epoch in range(1, cfg.n_epochs + 1):
        meter = _LossMeter()
        for _ in range(iters):
            # Critic updates: both discriminators, fresh batches each time.
            for _ in range(cfg.n_critics):
                bx = sample(src_vecs, top_src)
                by = sample(tgt_vecs, top_tgt)
                zx = state.ae_src.encode(bx)
                zy = state.ae_tgt.encode(by)
                for disc, real, fake in (
                        (state.disc_src, zx, zy @ state.to_src.weight.T),
                        (state.disc_tgt, zy, zx @ state.to_tgt.weight.T)):
                    loss, grads = _discriminator_grads(disc, real, fake,
                                                       cfg.smoothing, rng)
                    _check_finite("discriminator", loss, best_state, history)
                    opt.step(disc.params(), grads)
                    meter.add("disc", loss)

            # Generator passes, one per direction.
            for direction in DIRECTIONS:
                if direction == "src2tgt":
                    batch_from = sample(src_vecs, top_src)
                    batch_to = sample(tgt_vecs, top_tgt)
                    ae_from, ae_to = state.ae_src, state.ae_tgt
                    disc = state.disc_tgt
                else:
                    batch_from = sample(tgt_vecs, top_tgt)
                    batch_to = sample(src_vecs, top_src)
                    ae_from, ae_to = state.ae_tgt, state.ae_src
                    disc = state.disc_src
                fwd = _mapper(state, direction)
                bwd = _back_mapper(state, direction)

                # Adversarial update of the mapper and (optionally) the
                # destination-side encoder, against a frozen discriminator.
                codes = ae_from.encode(batch_from)
                loss, g_map, g_enc = _generator_adv_grads(
                    disc, fwd, ae_to.encoder, codes, batch_to, s_gen, rng,
                    include_encoder=cfg.enc_adv)
                _check_finite("adversarial", loss, best_state, history)
                if cfg.enc_adv:
                    opt.step([fwd.weight, ae_to.encoder.weight], [g_map, g_enc])
                else:
                    opt.step([fwd.weight], [g_map])
                meter.add("adv", loss)

                # Cycle-consistency update of both mappers.
                if cfg.cycle:
                    codes = ae_from.encode(batch_from)
                    loss, g_fwd, g_bwd = _cycle_grads(fwd, bwd, codes)
                    _check_finite("cycle", loss, best_state, history)
                    opt.step([fwd.weight, bwd.weight], [g_fwd, g_bwd],
                             scale=cfg.lambda_cyc)
                    meter.add("cyc", loss)

                # Post-cycle reconstruction update of both mappers and the
                # departure-side autoencoder.
                if cfg.recon:
                    loss, g_fwd, g_bwd, g_enc, g_dec = _post_cycle_grads(
                        ae_from, fwd, bwd, batch_from)
                    _check_finite("reconstruction", loss, best_state, history)
                    opt.step([fwd.weight, bwd.weight, ae_from.encoder.weight,
                              ae_from.decoder.weight],
                             [g_fwd, g_bwd, g_enc, g_dec],
                             scale=cfg.lambda_rec)
                    meter.add("rec", loss)

                orthogonalize(state.to_tgt, cfg.beta_ortho)
                orthogonalize(state.to_src, cfg.beta_ortho)

        if not state.all_finite():
            raise TrainingDiverged(f"non-finite parameters after epoch {epoch}",
                                   best_state=best_state, history=history)

        crit = validation_criterion(state, src_emb, tgt_emb, cfg)
        is_best = crit > best_crit
        if is_best:
            best_crit = crit
            best_state = state.copy()
        history.append(ValidationRecord(epoch, crit, is_best, meter.means()))
        logger.info("epoch %d: %s criterion=%.4f%s", epoch,
                    " ".join(f"{k}={v:.4f}" for k, v in meter.means().items()),
                    crit, " *best*" if is_best else "")
        opt.decay_lr()

    return best_state, history
