"""Command-line entry point: ``fairmio {audit,check,train,evaluate,synth}``.

Settings come from command-line flags, then an optional ``--config`` file of
``key = value`` lines, then built-in defaults, in that order of precedence.

Exit codes: 0 success, 2 configuration or I/O error, 3 time limit hit before
any answer, 4 training ended without a fairness certificate.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .auditor import (
    DETECT_TIME_LIMIT,
    ORACLE_TIME_LIMIT,
    audit_conjunction_bnb,
    audit_conjunction_milp,
    audit_linear_milp,
    check_gamma,
    logistic_warm_start,
    make_objective,
)
from .dataset import build_dataset, ingest_csv, load_schema, split
from .errors import FairMioError
from .metrics import Measure
from .milp import Status
from .subgroups import describe
from .synth import generate
from .trainer import (
    DEFAULT_GAMMA,
    DEFAULT_MAX_CUTS,
    MASTER_TIME_LIMIT,
    TrainConfig,
    TrainStatus,
    evaluate,
    model_from_json,
    train,
)

log = logging.getLogger("fairmio")

EXIT_OK, EXIT_CONFIG, EXIT_TIMEOUT, EXIT_UNPROVEN = 0, 2, 3, 4

DEFAULTS = {
    "data": None,
    "schema": None,
    "measure": None,
    "subgroups": "conj",
    "gamma": None,
    "time_limit": None,
    "oracle_time_limit": ORACLE_TIME_LIMIT,
    "model": "linear",
    "clauses": 1,
    "sparsity": 0.0,
    "seed": None,
    "solver": "builtin",
    "out": None,
    "method": "bnb",
    "model_file": None,
    "oracle": "same",
    "max_cuts": DEFAULT_MAX_CUTS,
    "test_fraction": 0.0,
    "exclude_protected": False,
    "negations": False,
    "n": 400,
    "sd": 0.3,
    "cards": "3,3",
    "noise_features": 1,
    "measurement_bias": 0.0,
    "timings": False,
}

_BOOL = {"exclude_protected", "negations", "timings"}
_INT = {"clauses", "seed", "max_cuts", "n", "noise_features"}
_FLOAT = {"gamma", "time_limit", "oracle_time_limit", "sparsity", "test_fraction", "sd", "measurement_bias"}


class ConfigError(Exception):
    pass


def _coerce(key: str, value):
    if value is None:
        return None
    try:
        if key in _BOOL:
            if isinstance(value, bool):
                return value
            if str(value).lower() in ("1", "true", "yes", "on"):
                return True
            if str(value).lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if key in _INT:
            return int(value)
        if key in _FLOAT:
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairmio", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        S = argparse.SUPPRESS
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--data", default=S, help="CSV dataset")
        p.add_argument("--schema", default=S, help="schema sidecar (JSON or 'name = kind role' lines)")
        p.add_argument("--seed", type=int, default=S)
        p.add_argument("--solver", default=S, help="builtin or external:<command>")
        p.add_argument("--out", default=S, help="output path (default: stdout)")
        p.add_argument("--time-limit", type=float, default=S)
        p.add_argument("--oracle-time-limit", type=float, default=S)
        p.add_argument("--exclude-protected", action="store_const", const=True, default=S,
                       help="keep protected columns out of the classifier features")
        p.add_argument("--timings", action="store_const", const=True, default=S,
                       help="include wall-clock timings (output is then not byte-reproducible)")
        p.add_argument("-v", "--verbose", action="store_true")

    def auditing(p):
        S = argparse.SUPPRESS
        p.add_argument("--measure", choices=["sd", "spsf", "fpsf"], default=S)
        p.add_argument("--subgroups", choices=["conj", "linear"], default=S)
        p.add_argument("--gamma", type=float, default=S)
        p.add_argument("--method", choices=["bnb", "milp"], default=S,
                       help="conjunction search: specialized branch-and-bound or MILP")
        p.add_argument("--model-file", default=S,
                       help="audit this trained model's predictions instead of the labels")

    p = sub.add_parser("audit", help="find the most unfair subgroup")
    common(p)
    auditing(p)
    p = sub.add_parser("check", help="decide whether every subgroup is within gamma")
    common(p)
    auditing(p)

    S = argparse.SUPPRESS
    p = sub.add_parser("train", help="train a fair classifier")
    common(p)
    p.add_argument("--measure", choices=["sd", "spsf", "fpsf"], default=S, help="cut kind")
    p.add_argument("--subgroups", choices=["conj", "linear"], default=S)
    p.add_argument("--gamma", type=float, default=S)
    p.add_argument("--model", choices=["linear", "dnf"], default=S)
    p.add_argument("--clauses", type=int, default=S)
    p.add_argument("--sparsity", type=float, default=S)
    p.add_argument("--negations", action="store_const", const=True, default=S)
    p.add_argument("--oracle", choices=["same", "sd-proxy"], default=S)
    p.add_argument("--max-cuts", type=int, default=S)
    p.add_argument("--test-fraction", type=float, default=S)

    p = sub.add_parser("evaluate", help="score a trained model")
    common(p)
    p.add_argument("--model-file", default=S)

    p = sub.add_parser("synth", help="write a planted-bias CSV with its schema")
    common(p)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--sd", type=float, default=S, help="planted discrepancy of the intersection")
    p.add_argument("--cards", default=S, help="value counts of the two protected attributes, e.g. 3,3")
    p.add_argument("--noise-features", type=int, default=S)
    p.add_argument("--measurement-bias", type=float, default=S)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key, value in vars(args).items():
        if key in DEFAULTS:
            cfg[key] = value
    cfg = {k: _coerce(k, v) for k, v in cfg.items()}
    cfg["command"] = args.command
    if cfg["gamma"] is not None and cfg["gamma"] < 0:
        raise ConfigError("gamma must be >= 0")
    return cfg


# --- helpers --------------------------------------------------------------

def _require(cfg: dict, *keys) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ConfigError(f"{cfg['command']} needs --{', --'.join(k.replace('_', '-') for k in missing)}")


def load_data(cfg: dict):
    _require(cfg, "data", "schema")
    meta, rules = load_schema(cfg["schema"])
    raw = ingest_csv(cfg["data"], meta)
    return build_dataset(raw, rules, protected_in_features=not cfg["exclude_protected"])


def _strip_timings(obj, keep: bool):
    if keep:
        return obj
    if isinstance(obj, dict):
        return {k: _strip_timings(v, keep) for k, v in obj.items() if k not in ("elapsed_s", "timings")}
    if isinstance(obj, list):
        return [_strip_timings(v, keep) for v in obj]
    return obj


def _clean(obj):
    """JSON-safe copy: NaN/inf become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def emit(cfg: dict, payload: dict, path=None) -> None:
    text = json.dumps(_clean(_strip_timings(payload, cfg["timings"])), indent=2, sort_keys=True,
                      ensure_ascii=False) + "\n"
    path = path or cfg["out"]
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _predictions(cfg: dict, ds):
    if cfg["model_file"] is None:
        return ds.labels.astype(np.uint8), "labels"
    obj = json.loads(Path(cfg["model_file"]).read_text(encoding="utf-8"))
    spec = model_from_json(obj["model"] if "model" in obj and "kind" not in obj else obj)
    return spec.predict(ds.features), "model"


# --- commands -------------------------------------------------------------

def cmd_audit(cfg: dict) -> int:
    if cfg["gamma"] is not None:
        return cmd_check(cfg)
    ds = load_data(cfg)
    yhat, source = _predictions(cfg, ds)
    kind = Measure.parse(cfg["measure"] or "sd")
    limit = cfg["time_limit"] if cfg["time_limit"] is not None else DETECT_TIME_LIMIT
    obj = make_objective(ds, yhat, kind)
    if cfg["subgroups"] == "linear":
        warm = logistic_warm_start(ds, yhat == 1, yhat == 0, obj.weights)
        res = audit_linear_milp(ds, yhat, obj, warm, limit)
    elif cfg["method"] == "milp":
        res = audit_conjunction_milp(ds, yhat, obj, limit)
    else:
        res = audit_conjunction_bnb(ds, yhat, obj, limit)
    payload = {"command": "audit", "measure": kind.value, "subgroups": cfg["subgroups"],
               "outcome": source, "rows": ds.total_weight, "result": res.to_json(ds),
               "description": describe(res.subgroup, ds) if res.found else None}
    emit(cfg, payload)
    if not res.found and res.status is Status.TIME_LIMIT:
        return EXIT_TIMEOUT
    return EXIT_OK


def cmd_check(cfg: dict) -> int:
    _require(cfg, "gamma")
    ds = load_data(cfg)
    yhat, source = _predictions(cfg, ds)
    kind = Measure.parse(cfg["measure"] or "spsf")
    limit = cfg["time_limit"] if cfg["time_limit"] is not None else ORACLE_TIME_LIMIT
    res = check_gamma(ds, yhat, kind, cfg["gamma"],
                      "linear" if cfg["subgroups"] == "linear" else "conjunction", limit,
                      method=cfg["method"])
    payload = {"command": "check", "measure": kind.value, "subgroups": cfg["subgroups"],
               "gamma": cfg["gamma"], "outcome": source, **res.to_json(ds),
               "description": describe(res.witness, ds) if res.witness is not None else None}
    emit(cfg, payload)
    return EXIT_TIMEOUT if res.satisfied is None else EXIT_OK


def _plot_path(cfg: dict):
    if cfg["out"] is None:
        return None
    out = Path(cfg["out"])
    return out.with_name(out.stem + ".iterations.csv")


def cmd_train(cfg: dict) -> int:
    ds = load_data(cfg)
    kind = Measure.parse(cfg["measure"] or "fpsf")
    if kind is Measure.SD:
        raise ConfigError("training cuts must be spsf or fpsf (use --oracle sd-proxy for SD audits)")
    test = None
    if cfg["test_fraction"]:
        _require(cfg, "seed")
        ds, test = split(ds, cfg["test_fraction"], cfg["seed"])
    tc = TrainConfig(model=cfg["model"], clauses=cfg["clauses"], sigma=cfg["sparsity"], cut_kind=kind.value,
                     oracle_kind=cfg["oracle"],
                     subgroup_class="linear" if cfg["subgroups"] == "linear" else "conjunction",
                     gamma=DEFAULT_GAMMA if cfg["gamma"] is None else cfg["gamma"],
                     master_time_limit=cfg["time_limit"] if cfg["time_limit"] is not None else MASTER_TIME_LIMIT,
                     oracle_time_limit=cfg["oracle_time_limit"], max_cuts=cfg["max_cuts"],
                     negations=cfg["negations"], solver=cfg["solver"])
    tc.validate()
    result = train(ds, tc)
    if result.model is None:
        emit(cfg, {"command": "train", "status": result.status.value, "model": None,
                   "iterations": result.iterations})
        return EXIT_TIMEOUT
    payload = {"command": "train", "config": {k: v for k, v in vars(tc).items()}, **result.to_json(ds, test)}
    emit(cfg, payload)
    plot = _plot_path(cfg)
    if plot is not None:
        with open(plot, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "accuracy", "violation", "cuts"])
            for h in result.history:
                w.writerow([h["iteration"], repr(h["accuracy"]), repr(h["violation"]), h["cuts"]])
    if result.status is TrainStatus.FAIR_UNPROVEN:
        return EXIT_UNPROVEN
    return EXIT_OK


def cmd_evaluate(cfg: dict) -> int:
    _require(cfg, "model_file")
    ds = load_data(cfg)
    obj = json.loads(Path(cfg["model_file"]).read_text(encoding="utf-8"))
    spec = model_from_json(obj["model"] if "model" in obj and "kind" not in obj else obj)
    limit = cfg["time_limit"] if cfg["time_limit"] is not None else ORACLE_TIME_LIMIT
    emit(cfg, {"command": "evaluate", "model": spec.to_json(), "description": spec.describe(),
               "metrics": evaluate(spec, ds, limit)})
    return EXIT_OK


def cmd_synth(cfg: dict) -> int:
    _require(cfg, "seed", "out")
    try:
        cards = tuple(int(c) for c in str(cfg["cards"]).split(","))
    except ValueError:
        raise ConfigError(f"bad --cards {cfg['cards']!r}") from None
    if len(cards) != 2:
        raise ConfigError("--cards takes exactly two value counts")
    data = generate(cfg["n"], cfg["sd"], cfg["seed"], cards, cfg["noise_features"],
                    measurement_bias=cfg["measurement_bias"])
    out = Path(cfg["out"])
    out.write_text(data.to_csv(), encoding="utf-8")
    out.with_suffix(".schema").write_text(data.schema_text(), encoding="utf-8")
    planted = {"planted": data.planted_literals(), "planted_sd": data.planted_sd, "h": data.h,
               "n": data.n, "seed": cfg["seed"], "cards": list(cards)}
    emit(cfg, planted, out.with_suffix(".planted.json"))
    return EXIT_OK


COMMANDS = {"audit": cmd_audit, "check": cmd_check, "train": cmd_train, "evaluate": cmd_evaluate,
            "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, FairMioError, ValueError, KeyError, OSError) as exc:
        print(f"fairmio {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
