"""Unsupervised bilingual lexicon induction.

Learns a word-translation mapping between two languages from monolingual
embeddings alone: linear autoencoders project each language into a latent
code space, adversarial training with cycle-consistency and reconstruction
constraints aligns the two code spaces, iterative Procrustes refinement
sharpens the mapping, and CSLS retrieval induces the dictionary.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .autoencoder import Autoencoder, pretrain, reconstruction_loss
from .checkpoint import load_checkpoint, save_checkpoint
from .dictionaries import Dictionary, write_dictionary
from .embeddings import (EmbeddingMatrix, SynthSpec, load_embeddings,
                         normalize, synth_pair, write_embeddings)
from .errors import EmbeddingFormatError, EmptyDictionaryError, TrainingDiverged
from .evaluation import EvalReport, load_gold, precision_at_k, translate
from .nn import DiscriminatorNet, LinearMap, SgdOptimizer, bce_smoothed
from .retrieval import (CslsIndex, CslsParams, build_dictionary, csls_scores,
                        procrustes, refine)
from .training import (ModelState, TrainConfig, ValidationRecord,
                       cycle_loss, discriminator_loss, generator_adv_loss,
                       orthogonalize, post_cycle_reconstruction_loss, train,
                       validation_criterion)

__version__ = "0.1.0"

__all__ = [
    "Autoencoder", "CslsIndex", "CslsParams", "Dictionary",
    "DiscriminatorNet", "EmbeddingMatrix", "EmbeddingFormatError",
    "EmptyDictionaryError", "EvalReport", "KERNEL_BACKEND", "LinearMap",
    "ModelState", "SgdOptimizer", "SynthSpec", "TrainConfig",
    "TrainingDiverged", "ValidationRecord", "bce_smoothed",
    "build_dictionary", "csls_scores", "cycle_loss", "discriminator_loss",
    "generator_adv_loss", "load_checkpoint", "load_embeddings", "load_gold",
    "normalize", "orthogonalize", "post_cycle_reconstruction_loss",
    "precision_at_k", "pretrain", "procrustes", "reconstruction_loss",
    "refine", "save_checkpoint", "synth_pair", "train", "translate",
    "validation_criterion", "write_dictionary", "write_embeddings",
]
