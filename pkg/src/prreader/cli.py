"""Command-line entry point: ``prreader <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np

from .advgen import GenConfig, default_kb, synthesize_corpus, synthetic_embeddings
from .corpus import dump_corpus, load_corpus
from .embedding import EmbeddingTable
from .evalrep import (MODES, ablation, ablation_table, cross_eval, cross_eval_table, evaluate,
                      explain_all)
from .kb import load_kb, save_kb
from .lingfeat import make_pairs
from .train import (TrainConfig, embeddings_from_ref, gradient_check, init_omega, load_checkpoint,
                    pretrain, save_checkpoint, train_loop)

log = logging.getLogger("prreader")

SUBCOMMANDS = ("gen-corpus", "extract-pairs", "pretrain", "train", "eval", "cross-eval",
               "ablation", "explain", "gradcheck")
GRADCHECK_TOL = 1e-4

# flag dest -> TrainConfig field
_CONFIG_FLAGS = {"seed": "seed", "beta": "beta", "c": "C", "max_span_len": "max_span_len"}
_PATH_KEYS = ("corpus", "test_corpus", "kb_dir", "embeddings", "checkpoint", "out")


class UsageError(Exception):
    pass


def _add_shared(p):
    p.add_argument("--config", help="JSON file with snake_case keys")
    p.add_argument("--corpus")
    p.add_argument("--test-corpus", help="held-out corpus (cross-eval, ablation)")
    p.add_argument("--kb-dir")
    p.add_argument("--embeddings")
    p.add_argument("--checkpoint")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("tsv", "md"))
    p.add_argument("--constraints", help="comma-separated subset of entity,lexical,predicate "
                                         "(empty string disables all)")
    p.add_argument("--beta", type=float)
    p.add_argument("--c", type=float, help="regularization strength C")
    p.add_argument("--max-span-len", type=int)
    p.add_argument("--epochs", type=int, help="sets both pretraining and joint epochs")
    p.add_argument("--answerable-only", action="store_true", default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prreader", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        _add_shared(p)
        if name == "gen-corpus":
            p.add_argument("--n-train", type=int)
            p.add_argument("--n-test", type=int)
            p.add_argument("--sea-frac", type=float)
            p.add_argument("--sda-frac", type=float)
            p.add_argument("--embed-dim", type=int)
        if name in ("eval", "explain"):
            p.add_argument("--mode", choices=MODES)
        if name == "explain":
            p.add_argument("--limit", type=int)
        if name == "gradcheck":
            p.add_argument("--n-seeds", type=int, default=1)
    return parser


def resolve(args) -> dict:
    """Merge defaults < config file < flags into one flat dict."""
    opts = {}
    if args.config:
        try:
            opts.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command"):
            opts[k] = v
    if isinstance(opts.get("constraints"), str):
        opts["constraints"] = [c for c in opts["constraints"].split(",") if c]
    return opts


def train_config(opts) -> TrainConfig:
    names = {f.name for f in fields(TrainConfig)}
    kw = {k: v for k, v in opts.items() if k in names}
    for flag, name in _CONFIG_FLAGS.items():
        if flag in opts:
            kw[name] = opts[flag]
    if "epochs" in opts:
        kw["epochs_pretrain"] = kw["epochs_joint"] = opts["epochs"]
    if "constraints" in opts:
        kw["enabled_constraints"] = tuple(opts["constraints"])
    try:
        return TrainConfig.from_dict(kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _need(opts, *keys, read=True):
    missing = [k for k in keys if not opts.get(k)]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))
    for k in keys:
        if read and k in _PATH_KEYS and k != "out" and not Path(opts[k]).exists():
            raise UsageError(f"--{k.replace('_', '-')}: {opts[k]} does not exist")


def _write(opts, text, default_name=None):
    out = opts.get("out")
    if out:
        path = Path(out)
        if path.is_dir() and default_name:
            path = path / default_name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _embeddings(opts, config):
    if opts.get("embeddings"):
        _need(opts, "embeddings")
        return EmbeddingTable.load(opts["embeddings"], oov_seed=config.seed)
    return EmbeddingTable(config.embed_dim, oov_seed=config.seed)


def _kb(opts):
    if opts.get("kb_dir"):
        _need(opts, "kb_dir")
    return load_kb(opts["kb_dir"]) if opts.get("kb_dir") else default_kb()


# -- subcommands --------------------------------------------------------------------------------

def cmd_gen_corpus(opts):
    _need(opts, "out")
    names = {f.name for f in fields(GenConfig)}
    aliases = {"sea_frac": "sea_fraction", "sda_frac": "sda_fraction"}
    kw = {aliases.get(k, k): v for k, v in opts.items() if aliases.get(k, k) in names}
    cfg = GenConfig(**kw)
    kb = default_kb()
    train, test = synthesize_corpus(cfg, kb)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    dump_corpus(train, out / "train.jsonl")
    dump_corpus(test, out / "test.jsonl")
    save_kb(kb, out / "kb")
    synthetic_embeddings(cfg, opts.get("embed_dim", TrainConfig.embed_dim)).save(out / "vectors.txt")
    print(f"wrote {len(train)} train / {len(test)} test examples to {out}")


def cmd_extract_pairs(opts):
    _need(opts, "corpus")
    kb = _kb(opts)
    lines = []
    for e in load_corpus(opts["corpus"]):
        for k, s in enumerate(e.sentences):
            for p in make_pairs(e.question, e.sentence_tokens(k), kb, s.start):
                lines.append(json.dumps({
                    "example": e.id, "sentence": k, "kind": p.kind, "x": p.x.text,
                    "x_span": p.x.span.to_list(), "y": p.y.text, "y_span": p.y.span.to_list(),
                    "mu": p.mu}, sort_keys=True))
    _write(opts, "".join(line + "\n" for line in lines), "pairs.jsonl")


def cmd_pretrain(opts):
    _need(opts, "corpus")
    _need(opts, "checkpoint", read=False)
    config = train_config(opts)
    emb = _embeddings(opts, config)
    theta = pretrain(load_corpus(opts["corpus"]), config, emb)
    omega = init_omega(config, emb.dim, np.random.default_rng([config.seed, 3]))
    save_checkpoint(opts["checkpoint"], config, theta, omega, emb)


def cmd_train(opts):
    _need(opts, "corpus")
    _need(opts, "checkpoint", read=False)
    config = train_config(opts)
    emb = _embeddings(opts, config)
    res = train_loop(load_corpus(opts["corpus"]), _kb(opts), config, emb)
    save_checkpoint(opts["checkpoint"], config, res.theta, res.omega, emb)
    _write(opts, res.log.to_tsv(), "train_log.tsv")


def _from_checkpoint(opts):
    _need(opts, "corpus", "checkpoint")
    config, theta, omega, ref = load_checkpoint(opts["checkpoint"])
    overrides = {k: v for k, v in opts.items() if k in ("constraints", "beta", "c", "max_span_len")}
    if overrides:
        merged = asdict(config)
        merged.update(overrides)
        config = train_config(merged)
    if "c" in opts:
        omega = replace(omega, C=float(opts["c"]))
    emb = _embeddings(opts, config) if opts.get("embeddings") else embeddings_from_ref(ref, config)
    return config, theta, omega, emb


def cmd_eval(opts):
    config, theta, omega, emb = _from_checkpoint(opts)
    mode = opts.get("mode", "regularized_q" if config.constrained else "base_p")
    report = evaluate(theta, omega, load_corpus(opts["corpus"]), _kb(opts), config, emb, mode,
                      bool(opts.get("answerable_only")))
    _write(opts, report.format(opts.get("format", "tsv")), "report.tsv")


def _train_test(opts):
    _need(opts, "corpus")
    train = load_corpus(opts["corpus"])
    if opts.get("test_corpus"):
        _need(opts, "test_corpus")
        test = load_corpus(opts["test_corpus"])
    else:
        test = train
    return train, test


def cmd_cross_eval(opts):
    train, test = _train_test(opts)
    config = train_config(opts)
    if not config.constrained:
        raise UsageError("cross-eval compares against PR and needs at least one constraint")
    results = cross_eval([("original", "sda"), ("original", "sea")], [("sea",), ("sda",)],
                         train, test, _kb(opts), config, _embeddings(opts, config),
                         bool(opts.get("answerable_only")))
    _write(opts, cross_eval_table(results, opts.get("format", "tsv")), "cross_eval.tsv")


def cmd_ablation(opts):
    train, test = _train_test(opts)
    config = train_config(opts)
    rows = ablation(train, test, _kb(opts), config, _embeddings(opts, config),
                    bool(opts.get("answerable_only")))
    _write(opts, ablation_table(rows, opts.get("format", "tsv")), "ablation.tsv")


def cmd_explain(opts):
    config, theta, omega, emb = _from_checkpoint(opts)
    corpus = load_corpus(opts["corpus"])
    if opts.get("limit"):
        corpus = corpus[:opts["limit"]]
    records = explain_all(theta, omega, corpus, _kb(opts), config, emb)
    _write(opts, "".join(r.to_json() + "\n" for r in records), "explanations.jsonl")


def cmd_gradcheck(opts):
    seed = opts.get("seed", 0)
    worst = {}
    for s in range(seed, seed + opts.get("n_seeds", 1)):
        for k, v in gradient_check(s).items():
            worst[k] = max(worst.get(k, 0.0), v)
    text = "".join(f"{k}\t{v:.3e}\n" for k, v in worst.items())
    ok = max(worst.values()) < GRADCHECK_TOL
    text += f"max\t{max(worst.values()):.3e}\t{'ok' if ok else 'FAIL'}\n"
    _write(opts, text, "gradcheck.tsv")
    return 0 if ok else 1


COMMANDS = {
    "gen-corpus": cmd_gen_corpus, "extract-pairs": cmd_extract_pairs, "pretrain": cmd_pretrain,
    "train": cmd_train, "eval": cmd_eval, "cross-eval": cmd_cross_eval, "ablation": cmd_ablation,
    "explain": cmd_explain, "gradcheck": cmd_gradcheck,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts) or 0
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"prreader {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        log.debug("failure", exc_info=True)
        print(f"prreader {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
