"""Command-line pipeline: synth -> pretrain -> train -> refine -> eval.

Every artifact-producing command writes exactly one JSON manifest next to
its outputs (config snapshot, input digests, seed, timestamps, output
paths), so runs are auditable and reproducible from the manifest alone.

Config precedence: built-in defaults, then --config JSON file, then
explicit command-line flags.

Exit codes: 0 success, 2 usage, 3 I/O or format, 4 numerical divergence,
5 empty-result conditions.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from . import evaluation, retrieval, training
from .autoencoder import pretrain
from .dictionaries import write_dictionary
from .embeddings import (DEFAULT_MAX_VOCAB, NORMALIZE_MODES, SynthSpec,
                         load_embeddings, normalize, synth_pair,
                         write_embeddings)
from .errors import EmbeddingFormatError, EmptyDictionaryError, TrainingDiverged
from .retrieval import CslsParams, procrustes
from .training import ModelState, TrainConfig

logger = logging.getLogger("bilex")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DIVERGED = 4
EXIT_EMPTY = 5

ABLATIONS = ("no-enc-adv", "no-recon", "no-cycle")

# TrainConfig fields settable from the command line / config file.
_CFG_FLAGS = {
    "epochs": "n_epochs",
    "lambda_cyc": "lambda_cyc",
    "lambda_rec": "lambda_rec",
    "smoothing": "smoothing",
    "smooth_generator": "smooth_generator",
    "n_critics": "n_critics",
    "iters_per_epoch": "iters_per_epoch",
    "batch_size": "batch_size",
    "lr": "lr",
    "lr_decay": "lr_decay",
    "beta_ortho": "beta_ortho",
    "code_dim": "code_dim",
    "disc_hidden": "disc_hidden",
    "disc_dropout": "disc_dropout",
    "leaky_slope": "leaky_slope",
    "disc_vocab_top": "disc_vocab_top",
    "valid_vocab_top": "valid_vocab_top",
    "csls_k": "csls_k",
    "pretrain_epochs": "pretrain_epochs",
    "seed": "seed",
}


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_path, command: str, args: argparse.Namespace,
                    cfg: TrainConfig | None, inputs: list, outputs: list,
                    started: float, extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "seed": getattr(args, "seed", None),
        "config": cfg.to_dict() if cfg is not None else None,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "started_unix": started,
        "finished_unix": time.time(),
    }
    if extra:
        manifest.update(extra)
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _build_config(args: argparse.Namespace,
                  base: TrainConfig | None = None) -> TrainConfig:
    """defaults < checkpoint/base config < --config file < explicit flags."""
    values = (base.to_dict() if base is not None else TrainConfig().to_dict())
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(values)
        if unknown:
            raise EmbeddingFormatError(
                f"{args.config}: unknown config keys {sorted(unknown)}")
        values.update(file_cfg)
    for flag, field in _CFG_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[field] = v
    for abl in getattr(args, "ablation", None) or []:
        values[abl.replace("no-", "").replace("-", "_")] = False
    return TrainConfig.from_dict(values)


def _load_pair(args, max_vocab: int | None = None):
    max_vocab = max_vocab or args.max_vocab
    src = load_embeddings(args.src_emb, max_vocab, args.src)
    tgt = load_embeddings(args.tgt_emb, max_vocab, args.tgt)
    src = normalize(src, args.normalize)
    tgt = normalize(tgt, args.normalize)
    return src, tgt


def _write_train_log(path, history, cfg: TrainConfig) -> None:
    cols = ["epoch", "disc", "adv"]
    if cfg.cycle:
        cols.append("cyc")
    if cfg.recon:
        cols.append("rec")
    cols += ["criterion", "best"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + "\t".join(cols) + "\n")
        for rec in history:
            if rec.epoch < 1:
                continue
            row = [str(rec.epoch)]
            for name in cols[1:-2]:
                row.append(f"{rec.losses.get(name, float('nan')):.6f}")
            row.append(f"{rec.criterion:.6f}")
            row.append("1" if rec.is_best else "0")
            fh.write("\t".join(row) + "\n")


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_synth(args) -> int:
    started = time.time()
    spec = SynthSpec(args.n, args.dim, args.noise, args.seed)
    src, tgt, gold, rotation = synth_pair(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    src_path, tgt_path = out / "src.vec", out / "tgt.vec"
    gold_path = out / "gold.tsv"
    write_embeddings(src_path, src)
    write_embeddings(tgt_path, tgt)
    write_dictionary(gold_path, gold, src, tgt)

    if args.self_test:
        pairs = np.arange(len(src))
        w = procrustes(src.vectors[pairs], tgt.vectors[pairs]).weight
        err = float(np.linalg.norm(w.T - rotation))
        print(f"self-test: rotation recovery error {err:.2e}")
        if args.noise == 0 and err >= 1e-6:
            print("self-test FAILED", file=sys.stderr)
            return 1
    _write_manifest(out / "synth", "synth", args, None, [],
                    [src_path, tgt_path, gold_path], started,
                    extra={"spec": {"n": args.n, "d": args.dim,
                                    "noise_sigma": args.noise,
                                    "seed": args.seed}})
    print(f"wrote {src_path}, {tgt_path}, {gold_path}")
    return EXIT_OK


def cmd_pretrain(args) -> int:
    started = time.time()
    cfg = _build_config(args)
    src, tgt = _load_pair(args)
    if src.dim != tgt.dim:
        raise EmbeddingFormatError(
            f"embedding dims differ: {src.dim} vs {tgt.dim}")
    rng = np.random.default_rng(cfg.seed)
    state = ModelState.init(src.dim, cfg, rng)
    state.ae_src.lang_tag = src.lang_tag or "src"
    state.ae_tgt.lang_tag = tgt.lang_tag or "tgt"
    seed_src, seed_tgt = np.random.SeedSequence(cfg.seed).generate_state(2)
    pretrain(state.ae_src, src, cfg.pretrain_epochs, cfg.batch_size,
             cfg.lr, cfg.lr_decay, seed=int(seed_src))
    pretrain(state.ae_tgt, tgt, cfg.pretrain_epochs, cfg.batch_size,
             cfg.lr, cfg.lr_decay, seed=int(seed_tgt))
    meta = {"src_emb": _sha256(args.src_emb), "tgt_emb": _sha256(args.tgt_emb),
            "normalize": args.normalize, "max_vocab": args.max_vocab,
            "stage": "pretrained",
            "pretrain_loss_src": state.ae_src.pretrain_losses[-1],
            "pretrain_loss_tgt": state.ae_tgt.pretrain_losses[-1]}
    ckpt_io.save_checkpoint(args.out, state, cfg, epoch=0, meta=meta)
    _write_manifest(args.out, "pretrain", args, cfg,
                    [args.src_emb, args.tgt_emb], [args.out], started)
    print(f"pretrained autoencoders -> {args.out} "
          f"(loss src {meta['pretrain_loss_src']:.3g}, "
          f"tgt {meta['pretrain_loss_tgt']:.3g})")
    return EXIT_OK


def _check_inputs_match(meta: dict, args) -> None:
    for key, path in (("src_emb", args.src_emb), ("tgt_emb", args.tgt_emb)):
        if key in meta and meta[key] != _sha256(path):
            logger.warning("%s digest differs from the one recorded in the "
                           "checkpoint; results may not be comparable", path)


def cmd_train(args) -> int:
    started = time.time()
    state, base_cfg, _, _, meta = ckpt_io.load_checkpoint(args.ckpt)
    cfg = _build_config(args, base=base_cfg)
    src, tgt = _load_pair(args, meta.get("max_vocab"))
    _check_inputs_match(meta, args)
    rng = np.random.default_rng(cfg.seed + 1)  # offset from pretraining seed

    log_path = Path(str(args.out) + ".log")
    try:
        best_state, history = training.train(state, src, tgt, cfg, rng)
    except TrainingDiverged as exc:
        logger.error("training diverged: %s", exc)
        if exc.best_state is not None:
            meta = dict(meta, stage="diverged", error=str(exc))
            ckpt_io.save_checkpoint(args.out, exc.best_state, cfg, meta=meta)
            _write_train_log(log_path, exc.history, cfg)
            logger.error("last-good checkpoint written to %s", args.out)
        return EXIT_DIVERGED

    best = max((r for r in history if r.is_best), key=lambda r: r.epoch,
               default=None)
    meta = dict(meta, stage="trained",
                best_epoch=best.epoch if best else 0,
                best_criterion=best.criterion if best else None)
    ckpt_io.save_checkpoint(args.out, best_state, cfg,
                            epoch=best.epoch if best else 0,
                            rng_state=rng.bit_generator.state, meta=meta)
    _write_train_log(log_path, history, cfg)
    _write_manifest(args.out, "train", args, cfg,
                    [args.src_emb, args.tgt_emb, args.ckpt],
                    [args.out, log_path], started,
                    extra={"best_epoch": meta["best_epoch"],
                           "best_criterion": meta["best_criterion"]})
    if best:
        print(f"best epoch {best.epoch} criterion {best.criterion:.4f} "
              f"-> {args.out}")
    else:
        print(f"validation-only pass -> {args.out} "
              f"(criterion {history[0].criterion:.4f})")
    return EXIT_OK


def cmd_refine(args) -> int:
    started = time.time()
    state, cfg, epoch, rng_state, meta = ckpt_io.load_checkpoint(args.ckpt)
    if args.csls_k is not None:
        cfg = TrainConfig.from_dict(dict(cfg.to_dict(), csls_k=args.csls_k))
    src, tgt = _load_pair(args, meta.get("max_vocab"))
    _check_inputs_match(meta, args)
    refined, sizes = retrieval.refine(
        state, src, tgt, args.iters, CslsParams(cfg.csls_k), args.dict_top_n)
    aborted = len(sizes) < args.iters
    meta = dict(meta, stage="refined", refine_iters=len(sizes),
                refine_dict_sizes=sizes)
    ckpt_io.save_checkpoint(args.out, refined, cfg, epoch=epoch,
                            rng_state=rng_state, meta=meta)
    _write_manifest(args.out, "refine", args, cfg,
                    [args.src_emb, args.tgt_emb, args.ckpt], [args.out],
                    started, extra={"dict_sizes": sizes})
    print(f"refinement dictionaries: {sizes} -> {args.out}")
    if aborted and args.iters > 0:
        logger.error("refinement stopped early (empty induced dictionary)")
        return EXIT_EMPTY
    return EXIT_OK


def cmd_eval(args) -> int:
    started = time.time()
    state, cfg, _, _, meta = ckpt_io.load_checkpoint(args.ckpt)
    src, tgt = _load_pair(args, meta.get("max_vocab"))
    _check_inputs_match(meta, args)
    gold, n_skipped = evaluation.load_gold(args.gold, src, tgt)
    k = args.csls_k if args.csls_k is not None else cfg.csls_k
    report = evaluation.precision_at_k(state, src, tgt, gold,
                                       mode=args.mode,
                                       params=CslsParams(k),
                                       n_skipped_oov=n_skipped)
    if args.json:
        print(report.to_json())
    else:
        print(report.table())
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
        _write_manifest(args.out, "eval", args, cfg,
                        [args.src_emb, args.tgt_emb, args.ckpt, args.gold],
                        [args.out], started)
    return EXIT_OK


def cmd_translate(args) -> int:
    state, cfg, _, _, meta = ckpt_io.load_checkpoint(args.ckpt)
    src, tgt = _load_pair(args, meta.get("max_vocab"))
    k = args.csls_k if args.csls_k is not None else cfg.csls_k
    try:
        ranked = evaluation.translate(state, src, tgt, args.word, args.topk,
                                      args.mode, CslsParams(k))
    except KeyError as exc:
        logger.error("%s", exc)
        return EXIT_EMPTY
    for word, score in ranked:
        print(f"{word}\t{score:.4f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------

def _add_emb_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--src-emb", required=True, help="source .vec file")
    p.add_argument("--tgt-emb", required=True, help="target .vec file")
    p.add_argument("--src", default="src", help="source language tag")
    p.add_argument("--tgt", default="tgt", help="target language tag")
    p.add_argument("--max-vocab", type=int, default=DEFAULT_MAX_VOCAB)
    p.add_argument("--normalize", choices=NORMALIZE_MODES, default="unit")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lambda-cyc", type=float)
    p.add_argument("--lambda-rec", type=float)
    p.add_argument("--smoothing", type=float)
    p.add_argument("--smooth-generator", action="store_const", const=True)
    p.add_argument("--n-critics", type=int)
    p.add_argument("--iters-per-epoch", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-decay", type=float)
    p.add_argument("--beta-ortho", type=float)
    p.add_argument("--code-dim", type=int)
    p.add_argument("--disc-hidden", type=int)
    p.add_argument("--disc-dropout", type=float)
    p.add_argument("--leaky-slope", type=float)
    p.add_argument("--disc-vocab-top", type=int)
    p.add_argument("--valid-vocab-top", type=int)
    p.add_argument("--csls-k", type=int)
    p.add_argument("--pretrain-epochs", type=int)
    p.add_argument("--ablation", action="append", choices=ABLATIONS,
                   help="disable a model component (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bilex",
        description="Unsupervised word translation via an adversarial "
                    "autoencoder over latent code spaces.")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark pair")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n", type=int, default=3000)
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--self-test", action="store_true",
                   help="verify the generator against the rotation oracle")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="pretrain the two autoencoders")
    _add_emb_args(p)
    _add_config_args(p)
    p.add_argument("--out", required=True, help="output checkpoint")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="adversarial training stage")
    _add_emb_args(p)
    _add_config_args(p)
    p.add_argument("--ckpt", required=True, help="pretrained checkpoint")
    p.add_argument("--out", required=True, help="best-model checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("refine", help="iterative Procrustes refinement")
    _add_emb_args(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--csls-k", type=int)
    p.add_argument("--dict-top-n", type=int, default=retrieval.DEFAULT_DICT_TOP_N)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", help="precision@k against a gold dictionary")
    _add_emb_args(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--mode", choices=retrieval.RETRIEVAL_MODES, default="csls")
    p.add_argument("--csls-k", type=int)
    p.add_argument("--json", action="store_true", help="emit JSON only")
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("translate", help="look up translations for one word")
    _add_emb_args(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("--topk", type=int, default=10)
    p.add_argument("--mode", choices=retrieval.RETRIEVAL_MODES, default="csls")
    p.add_argument("--csls-k", type=int)
    p.set_defaults(func=cmd_translate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, EmbeddingFormatError) as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except TrainingDiverged as exc:
        logger.error("%s", exc)
        return EXIT_DIVERGED
    except EmptyDictionaryError as exc:
        logger.error("%s", exc)
        return EXIT_EMPTY


if __name__ == "__main__":
    sys.exit(main())
