"""Command-line entry point: ``ctrlmusic <command> ...``.

Failures print one line, ``error: <command>: <message>``, to stderr and
exit 1. Usage errors exit 2.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .codec import Variant, check_sequence, decode, encode, read_token_file, write_token_file
from .config import dump_config, load_config, parse_overrides
from .dataset import (
    Subset,
    corpus_stats,
    filter_subset,
    load_corpus,
    load_corpus_report,
    read_song,
    split,
    write_song,
)
from .generation import (
    GenerationCondition,
    SamplingConfig,
    adheres,
    decode_generated,
    generate_batch,
)
from .metrics import evaluate_songs
from .neural import load_checkpoint, save_checkpoint
from .neural.training import LOG_HEADER
from .score import default_tables
from .synthetic import toy_corpus
from .vocab import EOS

logger = logging.getLogger("ctrlmusic")


class CommandError(Exception):
    pass


def _song_files(inputs: Sequence[str]) -> list[Path]:
    files: list[Path] = []
    for raw in inputs:
        p = Path(raw)
        if p.is_dir():
            files += sorted(p.glob("*.json"))
        elif p.exists():
            files.append(p)
        else:
            raise CommandError(f"{raw}: no such file or directory")
    if not files:
        raise CommandError("no input songs")
    return files


def _parse_ids(text: str | None, names: Sequence[str], what: str) -> tuple[int, ...]:
    if not text:
        return ()
    out = []
    for item in text.split(","):
        item = item.strip()
        if item.isdigit():
            out.append(int(item))
        elif item.lower() in names:
            out.append(list(names).index(item.lower()))
        else:
            raise CommandError(f"unknown {what} {item!r}")
    return tuple(out)


def _run_config(args) -> dict:
    return load_config(getattr(args, "config", None), parse_overrides(getattr(args, "set", None) or []))


def _prepare_out(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# commands ------------------------------------------------------------------


def cmd_encode(args) -> None:
    variant = Variant.parse(args.variant)
    vocab = variant.vocab()
    seqs = [vocab.ids_of(encode(read_song(f), variant)) for f in _song_files(args.inputs)]
    if args.out:
        write_token_file(args.out, vocab, seqs)
    else:
        sys.stdout.write(f"#vocab {vocab.fingerprint}\n")
        for s in seqs:
            sys.stdout.write(" ".join(map(str, s)) + "\n")


def cmd_decode(args) -> None:
    variant = Variant.parse(args.variant)
    vocab = variant.vocab()
    out = _prepare_out(args.out)
    for i, ids in enumerate(read_token_file(args.inp, vocab)):
        song = decode(vocab.events_of(ids), variant, strict=not args.lenient)
        write_song(out / f"song-{i:04d}.json", song)


def cmd_vocab(args) -> None:
    sys.stdout.write(Variant.parse(args.variant).vocab().to_text())


def cmd_stats(args) -> None:
    tables = default_tables()
    corpus = filter_subset(load_corpus(args.corpus), Subset(args.subset))
    genres, instruments = corpus_stats(corpus)
    lines = [f"# subset {args.subset}: {len(corpus)} songs", "# genre\tsongs"]
    lines += [f"{tables.genres[g]}\t{c}" for g, c in genres]
    lines += ["# instrument\ttracks"]
    lines += [f"{tables.instruments[p]}\t{c}" for p, c in instruments]
    sys.stdout.write("\n".join(lines) + "\n")


def cmd_split(args) -> None:
    corpus = load_corpus(args.corpus)
    out = _prepare_out(args.out)
    for name, part in zip(("train", "valid", "test"), split(corpus, args.seed)):
        (out / f"{name}.txt").write_text("".join(f"{e.id}\n" for e in part))
        print(f"{name}\t{len(part)}")


def _train_outputs(out: Path, cfg: dict):
    (out / "config.cfg").write_text(dump_config(cfg))
    log_path = out / "train_log.tsv"
    log_path.write_text(LOG_HEADER + "\n")

    def on_log(row) -> None:
        with log_path.open("a") as fh:
            fh.write(row.tsv() + "\n")
        print(row.tsv(), flush=True)

    return on_log


def cmd_pretrain(args) -> None:
    from .pipeline import pretrain

    cfg = _run_config(args)
    if args.steps is not None:
        cfg["pretrain_steps"] = args.steps
    out = _prepare_out(args.out)
    corpus = load_corpus(args.corpus)
    ckpt, _ = pretrain(corpus, cfg, cfg["pretrain_steps"], args.seed, _train_outputs(out, cfg))
    save_checkpoint(ckpt, out / "model.ckpt")
    (out / "vocab.txt").write_text(Variant.UNCOND.vocab().to_text())


def cmd_finetune(args) -> None:
    from .pipeline import finetune

    cfg = _run_config(args)
    if args.steps is not None:
        cfg["finetune_steps"] = args.steps
    variant = Variant.parse(args.variant)
    if variant is Variant.UNCOND:
        raise CommandError("finetune needs a conditioned variant (mmt-i, mmt-g or mmt-gi)")
    out = _prepare_out(args.out)
    pretrained = load_checkpoint(args.from_)
    corpus = load_corpus(args.corpus)
    ckpt, _ = finetune(pretrained, corpus, variant, cfg, cfg["finetune_steps"], args.seed, _train_outputs(out, cfg))
    save_checkpoint(ckpt, out / "model.ckpt")
    (out / "vocab.txt").write_text(variant.vocab().to_text())


def cmd_generate(args) -> None:
    if args.n < 1:
        raise CommandError("--n must be at least 1")
    tables = default_tables()
    cfg = _run_config(args)
    ckpt = load_checkpoint(args.from_)
    variant = Variant.parse(args.variant or ckpt.variant)
    if variant.value != ckpt.variant:
        raise CommandError(f"checkpoint was trained for {ckpt.variant}, not {variant.value}")
    vocab = variant.vocab()
    enforce = cfg["enforce_condition"] and not args.no_enforce
    cond = GenerationCondition(
        variant,
        tags=_parse_ids(args.tags, tables.genres, "genre"),
        programs=_parse_ids(args.programs, tables.instruments, "instrument"),
        enforce_condition=enforce,
    )
    sampling = SamplingConfig(cfg["temperature"], cfg["top_k"], cfg["max_tokens"], args.seed)
    cfg["enforce_condition"] = enforce
    out = _prepare_out(args.out)
    (out / "config.cfg").write_text(dump_config(cfg))

    seqs = generate_batch(ckpt, vocab, cond, sampling, args.n)
    write_token_file(out / "tokens.txt", vocab, seqs)
    adherent = complete = 0
    for i, ids in enumerate(seqs):
        events = vocab.events_of(ids)
        if events[-1] == EOS:
            check_sequence(events, variant)
            complete += 1
        song = decode_generated(ids, vocab, variant)
        adherent += adheres(song, cond)
        write_song(out / f"song-{i:04d}.json", song)
    n = len(seqs)
    summary = f"samples\t{n}\ncomplete\t{complete}\nadherence\t{adherent / n:.4f}\n"
    (out / "summary.tsv").write_text(summary)
    sys.stdout.write(summary)


def cmd_evaluate(args) -> None:
    corpus, report = load_corpus_report(args.inp)
    results = evaluate_songs([e.song for e in corpus])
    rows = []
    for name, rep in results.items():
        if rep is None:
            rows.append((name, "nan", "nan", "0"))
        else:
            rows.append((name, f"{rep.mean:.6f}", f"{rep.ci95:.6f}", str(rep.n)))
    if args.format == "tsv":
        lines = ["metric\tmean\tci95\tn"] + ["\t".join(r) for r in rows]
    else:
        lines = [f"{'metric':<22}{'mean':>12}{'ci95':>12}{'n':>6}"]
        lines += [f"{m:<22}{mean:>12}{ci:>12}{n:>6}" for m, mean, ci, n in rows]
    sys.stdout.write("\n".join(lines) + "\n")


def cmd_toy(args) -> None:
    out = _prepare_out(args.out)
    for i, song in enumerate(toy_corpus(args.n, args.seed)):
        write_song(out / f"toy-{i:05d}.json", song)


# parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    variants = [v.value for v in Variant]
    p = argparse.ArgumentParser(prog="ctrlmusic", description="Controllable symbolic music toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def config_flags(sp) -> None:
        sp.add_argument("--config", help="config file or preset name (desk, paper)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    sp = sub.add_parser("encode", help="songs -> token file")
    sp.add_argument("--variant", required=True, choices=variants)
    sp.add_argument("--out", help="token file (default: stdout)")
    sp.add_argument("inputs", nargs="+", help="song JSON files or directories")
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("decode", help="token file -> songs")
    sp.add_argument("--variant", required=True, choices=variants)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--lenient", action="store_true", help="accept truncated sequences")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("vocab", help="print a variant's vocabulary")
    sp.add_argument("--variant", required=True, choices=variants)
    sp.set_defaults(func=cmd_vocab)

    sp = sub.add_parser("stats", help="genre and instrument frequency tables")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--subset", default="full", choices=[s.value for s in Subset])
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("split", help="write train/valid/test id lists")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("pretrain", help="train the unconditional model")
    config_flags(sp)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_pretrain)

    sp = sub.add_parser("finetune", help="extend a pretrained model with control tokens")
    config_flags(sp)
    sp.add_argument("--from", dest="from_", required=True, metavar="CKPT")
    sp.add_argument("--variant", required=True, choices=variants[1:])
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_finetune)

    sp = sub.add_parser("generate", help="sample songs under a condition")
    config_flags(sp)
    sp.add_argument("--from", dest="from_", required=True, metavar="CKPT")
    sp.add_argument("--variant", choices=variants, help="defaults to the checkpoint's variant")
    sp.add_argument("--tags", help="comma-separated genre ids or names")
    sp.add_argument("--programs", help="comma-separated instrument ids or names")
    sp.add_argument("--n", type=int, default=50)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--no-enforce", action="store_true", help="do not mask instruments to the condition")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("evaluate", help="objective metrics over a song directory")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--format", choices=["text", "tsv"], default="text")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("toy", help="write a synthetic toy corpus")
    sp.add_argument("--n", type=int, default=64)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_toy)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        args.func(args)
    except (CommandError, ValueError, OSError, RuntimeError, KeyError) as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {args.command}: {msg}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
