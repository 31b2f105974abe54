"""``acpl`` command line: generate | train | ablate.

Exit codes: 0 success, 1 usage/config, 2 data, 3 training/numeric.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from ._accel import backend_name
from .baselines import run_supervised
from .data import SyntheticSpec, generate_synthetic, holdout_split, load_csv, split_pools, write_csv
from .errors import AcplError, ConfigError
from .trainer import (GRIDS, AcplConfig, make_learner, run_ablation, run_acpl, write_comparison,
                      write_run)

log = logging.getLogger("acpl")

SPLIT_KEYS = {"label_fraction": float, "stratified": bool, "test_fraction": float,
              "test_seed": int}
SPLIT_DEFAULTS = {"label_fraction": 0.05, "stratified": True, "test_fraction": 0.2,
                  "test_seed": 0}


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def read_config(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _parse_bool(key, text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"config key {key!r}: expected a boolean, got {text!r}")


def resolve_config(args):
    """Merge defaults < config file < --set < dedicated flags. Returns the
    algorithm config and the data-split settings."""
    values = read_config(args.config) if args.config else {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    split = dict(SPLIT_DEFAULTS)
    for key, typ in SPLIT_KEYS.items():
        if key in values:
            raw = values.pop(key)
            try:
                split[key] = _parse_bool(key, raw) if typ is bool else typ(raw)
            except ValueError:
                raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None
    if getattr(args, "label_fraction", None) is not None:
        split["label_fraction"] = args.label_fraction
    if getattr(args, "seed", None) is not None:
        values["seed"] = str(args.seed)
        values.setdefault("train_seed", str(args.seed))
        values.setdefault("pseudo_seed", str(args.seed))
    cfg = AcplConfig.from_flat(values)
    return cfg, split


def _config_hash(flat: dict) -> str:
    return hashlib.sha256(json.dumps(flat, sort_keys=True).encode("utf-8")).hexdigest()


def write_manifest(out_dir: Path, command, flat_config, seeds, inputs):
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config_hash": _config_hash(flat_config),
        "seeds": list(seeds),
        "inputs": {k: str(v) for k, v in inputs.items() if v is not None},
        "output_dir": str(out_dir),
        "tool_version": __version__,
        "backend": backend_name(),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                                           encoding="utf-8")
    return manifest


def _load_data(args, split):
    data = load_csv(args.data)
    if args.test_data:
        return data, load_csv(args.test_data)
    return holdout_split(data, split["test_fraction"], split["test_seed"])


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_generate(args):
    spec_path = Path(args.spec)
    if not spec_path.is_file():
        raise UsageError(f"spec file not found: {spec_path}")
    spec = SyntheticSpec.from_json(spec_path)
    ds = generate_synthetic(spec, args.seed)
    write_csv(ds, args.out)
    log.info("wrote %d rows to %s", len(ds), args.out)
    return 0


def cmd_train(args):
    cfg, split = resolve_config(args)
    out = Path(args.out)
    flat = {**cfg.to_flat(), **split}
    write_manifest(out, "train", flat, [cfg.seed],
                   {"data": args.data, "test_data": args.test_data, "config": args.config})
    train, test = _load_data(args, split)
    pools = split_pools(train, split["label_fraction"], split["stratified"], cfg.seed)
    learner = make_learner(pools, cfg)
    if args.supervised:
        result = run_supervised(pools, learner, cfg, test)
    else:
        result = run_acpl(pools, learner, cfg, test)
    write_run(out, cfg, result, extra_config=split)
    m = result.metrics or {}
    log.info("done: %d stages (%s), macro AUC %s", len(result.records), result.stop_reason,
             m.get("macro_auc"))
    return 0


def load_grid(name_or_path):
    if name_or_path in GRIDS:
        return [dict(d) for d in GRIDS[name_or_path]]
    path = Path(name_or_path)
    if not path.is_file():
        raise UsageError(f"--grid must be one of {sorted(GRIDS)} or a grid file")
    axes = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"grid line {line!r}: expected key = v1, v2, ...")
        key, vals = line.split("=", 1)
        axes.append((key.strip(), [v.strip() for v in vals.split(",") if v.strip()]))
    if not axes:
        raise ConfigError("grid file defines no axes")
    grid = [{}]
    for key, vals in axes:
        grid = [{**g, key: v} for g in grid for v in vals]
    return grid


def _parse_seeds(text):
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--seeds must be comma-separated integers, got {text!r}") from None
    if not seeds:
        raise UsageError("--seeds is empty")
    return seeds


def cmd_ablate(args):
    seeds = _parse_seeds(args.seeds)
    args.seed = None
    cfg, split = resolve_config(args)
    grid = load_grid(args.grid)
    for delta in grid:
        cfg.replace(**delta)  # validate every variant before running anything
    out = Path(args.out)
    write_manifest(out, "ablate", {**cfg.to_flat(), **split, "grid": grid}, seeds,
                   {"data": args.data, "test_data": args.test_data, "config": args.config,
                    "grid": args.grid})
    train, test = _load_data(args, split)
    rows = run_ablation(train, test, cfg, grid, seeds, split["label_fraction"],
                        split["stratified"], out_dir=out, workers=args.workers)
    write_comparison(rows, out / "comparison.csv")
    for r in rows:
        log.info("%-40s AUC %.4f +- %.4f", r["variant"], r["mean_auc"], r["std_auc"])
    return 0


def build_parser():
    p = _Parser(prog="acpl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"acpl {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    g.add_argument("--spec", required=True, help="JSON synthetic-data spec")
    g.add_argument("--out", required=True, help="output CSV path")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    def common(sp):
        sp.add_argument("--data", required=True, help="training CSV")
        sp.add_argument("--test-data", help="held-out CSV (default: stratified hold-out)")
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
        sp.add_argument("--label-fraction", type=float)
        sp.add_argument("--out", required=True, help="output directory")

    t = sub.add_parser("train", help="run the staged pseudo-labelling loop once")
    common(t)
    t.add_argument("--seed", type=int)
    t.add_argument("--supervised", action="store_true", help="warm-up only baseline")
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("ablate", help="run a grid of variants over several seeds")
    common(a)
    a.add_argument("--grid", required=True, help=f"one of {sorted(GRIDS)} or a grid file")
    a.add_argument("--seeds", required=True, help="comma-separated seeds, e.g. 0,1,2")
    a.add_argument("--workers", type=int, help="parallel processes (env ACPL_WORKERS)")
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except AcplError as exc:
        print(f"acpl {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"acpl {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
