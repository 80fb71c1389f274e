"""Command-line entry point.

Every command takes an optional ``--config`` file in INI layout (sections
``[train]``, ``[ambiguity]``, ``[model]``) whose keys mirror the command-line
flags; flags given explicitly override the file. Logs start with the fully
resolved configuration so that a run can be reproduced from its log alone.
"""

from __future__ import annotations

import configparser
import functools
import io
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Optional

import click

from .ambiguity import (
    AmbiguityConfig,
    ArcSetError,
    read_arc_sets,
    union_arc_sets,
    write_arc_sets,
)
from .evaluation import EvaluationError, score, treebank_leakage
from .model import DEFAULT_DIM, FeatureSpace, ParserModel
from .synthetic import ADJ_AFTER, POSTPOSITIONAL, SOURCE_LIKE, TARGET_LIKE, generate
from .trainer import (
    AA_CUTOFF,
    PROFILES,
    TrainConfig,
    TrainingError,
    direct_transfer,
    fine_tune_on_arc_sets,
    label_inventory,
    parse,
    self_train,
    source_arc_set,
    split_treebank,
    subsample_treebank,
    train_supervised,
)
from .treebank import ConlluError, TreeError, punct_by_deprel, punct_by_upos, read_conllu, write_conllu

CONFIG_KEYS = {
    "train": {f.name for f in fields(TrainConfig)} | {"profile"},
    "ambiguity": {"sigma", "include_one_best"},
    "model": {"dim"},
}

GRAMMARS = {g.name: g for g in (SOURCE_LIKE, TARGET_LIKE, ADJ_AFTER, POSTPOSITIONAL)}

_EXPECTED_ERRORS = (ConlluError, TreeError, ArcSetError, TrainingError, EvaluationError, ValueError, OSError)


def load_config(path: Optional[str]) -> dict[str, dict[str, str]]:
    """Read an INI config, rejecting unknown sections and keys."""
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    out: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in CONFIG_KEYS:
            raise click.UsageError(f"{path}: unknown config section [{section}]")
        unknown = set(parser[section]) - CONFIG_KEYS[section]
        if unknown:
            raise click.UsageError(f"{path}: unknown keys in [{section}]: {', '.join(sorted(unknown))}")
        out[section] = dict(parser[section])
    return out


def _coerce(kind, text: str):
    if kind is bool or kind == "bool":
        lowered = text.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise click.UsageError(f"not a boolean: {text!r}")
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    if kind in ("Optional[int]",):
        return None if text.strip().lower() in ("", "none") else int(text)
    return text


_TRAIN_TYPES = {
    "epochs": int,
    "learning_rate": float,
    "l2": float,
    "sigma": float,
    "length_cutoff": "Optional[int]",
    "projective": bool,
    "batch_size": int,
    "seed": int,
    "optimizer": str,
}


def resolve_train_config(file_cfg: dict, overrides: dict) -> TrainConfig:
    section = dict(file_cfg.get("train", {}))
    profile = overrides.pop("profile", None) or section.pop("profile", None)
    section.pop("profile", None)
    base = PROFILES[profile] if profile else TrainConfig()
    values = {k: _coerce(_TRAIN_TYPES[k], v) for k, v in section.items()}
    if "sigma" in file_cfg.get("ambiguity", {}):
        values["sigma"] = float(file_cfg["ambiguity"]["sigma"])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return replace(base, **values)


def _train_options(func):
    opts = [
        click.option("--profile", type=click.Choice(sorted(PROFILES)), default=None, help="Named hyperparameter profile."),
        click.option("--epochs", type=int, default=None),
        click.option("--learning-rate", "learning_rate", type=float, default=None),
        click.option("--l2", type=float, default=None, help="L2 coefficient towards the initial parameters."),
        click.option("--length-cutoff", "length_cutoff", type=int, default=None),
        click.option("--batch-size", "batch_size", type=int, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--optimizer", type=click.Choice(["adam", "sgd"]), default=None),
        click.option("--projective/--non-projective", default=None),
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None),
    ]
    for opt in reversed(opts):
        func = opt(func)
    return func


def _pop_train_overrides(kwargs: dict) -> dict:
    keys = ["profile", "epochs", "learning_rate", "l2", "length_cutoff", "batch_size", "seed", "optimizer", "projective"]
    return {k: kwargs.pop(k) for k in keys}


def _read(path: str):
    with open(path, encoding="utf-8") as fh:
        return read_conllu(fh)


def _write(path: str, items) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_conllu(items, fh)


def _config_header(command: str, config: TrainConfig, extra: dict) -> str:
    lines = [f"# command={command}"]
    for key, value in sorted({**asdict(config), **extra}.items()):
        lines.append(f"# {key}={value}")
    return "\n".join(lines) + "\n"


def _labeled(items, path: str):
    missing = [s.id for s, tree in items if tree is None]
    if missing:
        raise click.ClickException(f"{path}: sentence {missing[0]} has no HEAD annotation")
    return items


def _evaluate_on(model: ParserModel, dev_path: str, projective: bool):
    dev = _labeled(_read(dev_path), dev_path)
    pred = direct_transfer(model, [s for s, _ in dev], projective)
    return score(dev, pred)


@click.group()
def main():
    """Cross-lingual transfer of arc-factored dependency parsers."""


def _run(func):
    """Turn expected failures into a one-line diagnostic and exit code 1."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except click.ClickException:
            raise
        except _EXPECTED_ERRORS as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}") from None

    return wrapper


@main.command("train-source")
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Model file to write.")
@click.option("--dev", "dev_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--dim", type=int, default=None, help=f"Feature hashing dimension (default {DEFAULT_DIM}).")
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None)
@_train_options
@_run
def train_source(train_path, out_path, dev_path, dim, log_path, config_path, **kwargs):
    """Train a source parser on a labelled CoNLL-U treebank."""
    file_cfg = load_config(config_path)
    config = resolve_train_config(file_cfg, _pop_train_overrides(kwargs))
    dim = dim or int(file_cfg.get("model", {}).get("dim", DEFAULT_DIM))
    data = _labeled(_read(train_path), train_path)
    model = ParserModel(FeatureSpace(dim), label_inventory(data))
    log = io.StringIO()
    log.write(_config_header("train-source", config, {"dim": dim, "train": train_path}))
    model = train_supervised(model, data, config, log)
    model.save(out_path)
    if dev_path:
        report = _evaluate_on(model, dev_path, config.projective)
        log.write(f"# dev uas={report.uas:.6f} las={report.las:.6f}\n")
        click.echo(f"dev UAS {100 * report.uas:.2f} LAS {100 * report.las:.2f}")
    _emit_log(log, log_path)


def _emit_log(log: io.StringIO, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(log.getvalue(), encoding="utf-8")


@main.command("infer-source")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--arcsets", "arcsets_path", type=click.Path(dir_okay=False), required=True)
@click.option("--parses", "parses_path", type=click.Path(dir_okay=False), required=True)
@click.option("--sigma", type=float, default=None)
@click.option("--projective/--non-projective", default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None)
@_run
def infer_source(model_path, input_path, arcsets_path, parses_path, sigma, projective, config_path, log_path):
    """Write candidate arc sets and 1-best parses of a source parser."""
    file_cfg = load_config(config_path)
    amb = file_cfg.get("ambiguity", {})
    if sigma is None:
        sigma = float(amb.get("sigma", AmbiguityConfig().sigma))
    include = _coerce(bool, amb.get("include_one_best", "true"))
    if projective is None:
        projective = _coerce(bool, file_cfg.get("train", {}).get("projective", "false"))
    config = AmbiguityConfig(sigma, include)
    model = ParserModel.load(model_path)
    sentences = [s for s, _ in _read(input_path)]
    arc_sets, parses = [], []
    n_heads = n_deps = 0
    for sentence in sentences:
        arc_set, tree = source_arc_set(model, sentence, config, projective)
        arc_sets.append((sentence.id, arc_set))
        parses.append((sentence, tree))
        n_heads += arc_set.size()
        n_deps += len(sentence)
    with open(arcsets_path, "w", encoding="utf-8") as fh:
        write_arc_sets(arc_sets, fh)
    _write(parses_path, parses)
    log = io.StringIO()
    log.write(f"# command=infer-source\n# sigma={sigma}\n# include_one_best={include}\n# projective={projective}\n")
    log.write(f"sentences\t{len(sentences)}\nmean_heads_per_dependent\t{n_heads / max(n_deps, 1):.6f}\n")
    _emit_log(log, log_path)
    click.echo(f"{len(sentences)} sentences, {n_heads / max(n_deps, 1):.3f} candidate heads per token")


@main.command("transfer")
@click.option("--mode", type=click.Choice(["dt", "st", "aast", "aaet"]), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True, help="Main source model.")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True, help="Unlabelled target sentences.")
@click.option("--arcsets", "arcset_paths", type=click.Path(exists=True, dir_okay=False), multiple=True,
              help="Arc-set files of additional sources (aaet).")
@click.option("--sigma", type=float, default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--dev", "dev_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None)
@_train_options
@_run
def transfer(mode, model_path, input_path, arcset_paths, sigma, out_path, dev_path, log_path, config_path, **kwargs):
    """Adapt a source parser to unlabelled target text."""
    file_cfg = load_config(config_path)
    overrides = _pop_train_overrides(kwargs)
    overrides["sigma"] = sigma
    config = resolve_train_config(file_cfg, overrides)
    if arcset_paths and mode != "aaet":
        raise click.UsageError("--arcsets is only used with --mode aaet")
    source = ParserModel.load(model_path)
    sentences = [s for s, _ in _read(input_path)]
    log = io.StringIO()
    log.write(_config_header("transfer", config, {"mode": mode, "model": model_path, "input": input_path,
                                                 "arcsets": ",".join(arcset_paths)}))
    if mode == "dt":
        model = source
    elif mode == "st":
        model = self_train(source, sentences, config, log)
    else:
        cutoff = config.cutoff(AA_CUTOFF)
        kept = [s for s in sentences if len(s) <= cutoff]
        if not kept:
            raise TrainingError(f"all sentences are longer than the cutoff ({cutoff})")
        extra = [dict(_read_arc_file(p)) for p in arcset_paths]
        amb = AmbiguityConfig(config.sigma)
        arc_sets = []
        for sentence in kept:
            own, tree = source_arc_set(source, sentence, amb, config.projective)
            sets = [own]
            for path, table in zip(arcset_paths, extra):
                if sentence.id not in table:
                    raise ArcSetError(f"{path}: no arc set for sentence {sentence.id}")
                sets.append(table[sentence.id])
            arc_sets.append((union_arc_sets(sets), tree))
        model = fine_tune_on_arc_sets(source, kept, arc_sets, config, log)
    model.save(out_path)
    if dev_path:
        report = _evaluate_on(model, dev_path, config.projective)
        log.write(f"# dev uas={report.uas:.6f} las={report.las:.6f}\n")
        click.echo(f"dev UAS {100 * report.uas:.2f} LAS {100 * report.las:.2f}")
    _emit_log(log, log_path)


def _read_arc_file(path: str):
    with open(path, encoding="utf-8") as fh:
        return read_arc_sets(fh)


@main.command("parse")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--projective/--non-projective", default=False)
@_run
def parse_cmd(model_path, input_path, out_path, projective):
    """Parse CoNLL-U sentences with a model (1-best trees)."""
    model = ParserModel.load(model_path)
    sentences = [s for s, _ in _read(input_path)]
    _write(out_path, [(s, parse(model, s, projective)) for s in sentences])


_PUNCT = {"upos": punct_by_upos, "deprel": punct_by_deprel, "none": None}


@main.command("evaluate")
@click.option("--gold", "gold_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--pred", "pred_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--punct", type=click.Choice(sorted(_PUNCT)), default="upos", show_default=True,
              help="How punctuation tokens are recognised and excluded.")
@click.option("--out-prefix", type=click.Path(dir_okay=False), default=None,
              help="Write <prefix>.tsv and <prefix>.kv reports.")
@_run
def evaluate(gold_path, pred_path, punct, out_prefix):
    """Score predicted trees against gold: UAS, LAS and per-label counts."""
    gold = _labeled(_read(gold_path), gold_path)
    pred = _labeled(_read(pred_path), pred_path)
    if len(gold) != len(pred):
        raise EvaluationError(f"{len(gold)} gold sentences but {len(pred)} predicted")
    for (gs, _), (ps, _) in zip(gold, pred):
        if len(gs) != len(ps):
            raise EvaluationError(f"sentence {gs.id}: gold and prediction differ in length")
    report = score(gold, [t for _, t in pred], _PUNCT[punct])
    if out_prefix:
        Path(out_prefix + ".tsv").write_text(report.to_tsv(), encoding="utf-8")
        Path(out_prefix + ".kv").write_text(report.to_kv(), encoding="utf-8")
    click.echo(f"UAS {100 * report.uas:.2f} LAS {100 * report.las:.2f} ({report.tokens} tokens)")


@main.command("leakage")
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--test", "test_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--unordered", is_flag=True, help="Match trees up to unordered isomorphism.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@_run
def leakage(train_path, test_path, unordered, out_path):
    """Fraction of test trees structurally identical to a training tree."""
    train = [t for _, t in _labeled(_read(train_path), train_path)]
    test = [t for _, t in _labeled(_read(test_path), test_path)]
    value = treebank_leakage(train, test, ordered=not unordered)
    if out_path:
        Path(out_path).write_text(f"leakage={value:.6f}\n", encoding="utf-8")
    click.echo(f"leakage {value:.6f}")


@main.command("subsample")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Output file; with --parts, a prefix for <prefix>.<k>.conllu.")
@click.option("--fraction", type=float, default=None)
@click.option("--count", type=int, default=None)
@click.option("--parts", type=int, default=None, help="Split into this many disjoint parts instead.")
@click.option("--seed", type=int, default=0, show_default=True)
@_run
def subsample(input_path, out_path, fraction, count, parts, seed):
    """Random sub-sample or disjoint split of a treebank."""
    chosen = [x for x in (fraction, count, parts) if x is not None]
    if len(chosen) != 1:
        raise click.UsageError("give exactly one of --fraction, --count, --parts")
    data = _read(input_path)
    if parts is not None:
        for k, piece in enumerate(split_treebank(data, parts, seed), start=1):
            _write(f"{out_path}.{k}.conllu", piece)
        return
    _write(out_path, subsample_treebank(data, count if count is not None else fraction, seed))


@main.command("synth")
@click.option("--grammar", type=click.Choice(sorted(GRAMMARS)), required=True)
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@_run
def synth(grammar, n, seed, out_path):
    """Generate a synthetic gold treebank from a toy grammar."""
    _write(out_path, generate(GRAMMARS[grammar], n, seed))


if __name__ == "__main__":
    main()
