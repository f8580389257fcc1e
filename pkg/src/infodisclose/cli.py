"""Command-line entry point.

    infodisclose simulate --config run.json [--out DIR] [--threads N] [--format csv|json]
    infodisclose sweep    --config sweep.json [--paired-tapes]
    infodisclose graph    --config run.json [--dot] [--summary] [--collapse] [--reduce]
    infodisclose check    --config behavior.json [--fuzz N]

Exit codes: 0 success, 1 behavior not compliant, 2 invalid configuration,
3 runtime contract error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import jsonschema

from . import __version__
from .analysis import CSV_HEADER, fit_exponent, gap_instance, paired_difference, run_policy, summarize
from .behavior import KINDS, BehaviorConfig, check_assumption_compliance
from .core import BanditInstance
from .engine import herding_indicator
from .errors import ConfigError, ContractError
from .graph import export_dot
from .presets import POLICY_TYPES, PolicySpec

log = logging.getLogger("infodisclose")

OUT_ENV = "INFODISCLOSE_OUT"
THREADS_ENV = "INFODISCLOSE_THREADS"

_POLICY = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": list(POLICY_TYPES)},
        "params": {"type": "object"},
        "name": {"type": "string"},
    },
    "additionalProperties": False,
}

_BEHAVIOR = {
    "type": "object",
    "properties": {
        "kind": {"enum": list(KINDS)},
        "n_est": {"type": "integer", "minimum": 1},
        "c_est": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1 / 3},
        "unseen_estimate": {"type": "number", "minimum": 0, "maximum": 1},
        "band_fraction": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "projection_mode": {"type": "boolean"},
        "beta_params": {"type": "array"},
        "small_sample": {"enum": ["empirical", "unseen", "upper", "lower"]},
        "seed": {"type": "integer"},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["policy", "instance"],
    "properties": {
        "policy": _POLICY,
        "baseline": _POLICY,
        "instance": {
            "type": "object",
            "required": ["horizon"],
            "properties": {
                "means": {"type": "array", "items": {"type": "number"}, "minItems": 2},
                "delta": {"type": "number", "minimum": 0},
                "horizon": {"type": "integer", "minimum": 1},
                "num_arms": {"type": "integer", "minimum": 2},
                "strict_model": {"type": "boolean"},
            },
            "oneOf": [{"required": ["means"]}, {"required": ["delta"]}],
            "additionalProperties": False,
        },
        "behavior": _BEHAVIOR,
        "seeds": {
            "type": "object",
            "properties": {"base": {"type": "integer"}, "reps": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "outputs": {
            "type": "object",
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json", "dot"]}},
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "properties": {
                "T_grid": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "delta_grid": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            },
            "oneOf": [{"required": ["T_grid"]}, {"required": ["delta_grid"]}],
            "additionalProperties": False,
        },
        "herd_tail": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    },
    "additionalProperties": False,
}


class SchemaError(Exception):
    pass


def load_config(path, schema=SCHEMA) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise SchemaError(f"{path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        msgs = []
        for e in errors:
            field = "/".join(str(p) for p in e.absolute_path) or "<root>"
            msgs.append(f"{path}: field '{field}': {e.message}")
        raise SchemaError("\n".join(msgs))
    return cfg


def config_digest(cfg: dict) -> str:
    body = {k: v for k, v in cfg.items() if k != "outputs"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


def _instance(cfg: dict, horizon=None, delta=None) -> BanditInstance:
    spec = cfg["instance"]
    strict = spec.get("strict_model", True)
    T = horizon or spec["horizon"]
    if delta is not None:
        return gap_instance(delta, T, strict)
    if "means" in spec:
        return BanditInstance.from_json({**spec, "horizon": T}, strict)
    return gap_instance(spec["delta"], T, strict)


def _behavior(cfg: dict) -> BehaviorConfig:
    return BehaviorConfig.from_json(cfg.get("behavior", {}))


def _policy(obj: dict) -> PolicySpec:
    return PolicySpec(obj["type"], obj.get("params", {}), obj.get("name"))


def _seeds(cfg: dict) -> list:
    s = cfg.get("seeds", {})
    base = s.get("base", 0)
    return list(range(base, base + s.get("reps", 1)))


def _out_dir(args, cfg) -> str:
    d = os.environ.get(OUT_ENV) or args.out or cfg.get("outputs", {}).get("dir") or "."
    os.makedirs(d, exist_ok=True)
    return d


def _threads(args) -> int:
    if args.threads:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    return int(env) if env else (os.cpu_count() or 1)


def _formats(args, cfg, default=("csv", "json")) -> tuple:
    if args.format:
        return (args.format,)
    return tuple(cfg.get("outputs", {}).get("formats", default))


def _write(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(r[h]) if isinstance(r[h], float) else r[h] for h in header])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _job(job):
    policy, instance, behavior, seed, tail = job
    tr = run_policy(policy, instance, behavior, seed)
    out = tr.summary(tail)
    out["policy"] = policy.label
    return out


def _map(jobs, threads):
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_job, jobs))
    return [_job(j) for j in jobs]


# -- commands --------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    inst, beh, pol = _instance(cfg), _behavior(cfg), _policy(cfg["policy"])
    tail = cfg.get("herd_tail", 0.25)
    runs = _map([(pol, inst, beh, s, tail) for s in _seeds(cfg)], _threads(args))
    out, digest = _out_dir(args, cfg), config_digest(cfg)
    fmts = _formats(args, cfg)
    if "json" in fmts:
        _write(os.path.join(out, "summaries.json"),
               _json({"tool_version": __version__, "config_digest": digest,
                      "instance_digest": inst.digest, "runs": runs}))
    if "csv" in fmts:
        rows = [{**r, "delta": inst.gap} for r in runs]
        _write(os.path.join(out, "runs.csv"), _csv(rows, CSV_HEADER))
    _write_manifest(out, digest, "simulate")
    for r in runs:
        print(json.dumps(r, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if "sweep" not in cfg:
        raise SchemaError(f"{args.config}: field 'sweep': required for the sweep command")
    beh, pol = _behavior(cfg), _policy(cfg["policy"])
    base = _policy(cfg.get("baseline", {"type": "full_disclosure"}))
    seeds, tail, threads = _seeds(cfg), cfg.get("herd_tail", 0.25), _threads(args)
    sweep = cfg["sweep"]
    key = "T" if "T_grid" in sweep else "delta"
    grid = sweep.get("T_grid") or sweep.get("delta_grid")
    if key == "T" and list(grid) != sorted(grid):
        raise SchemaError(f"{args.config}: field 'sweep/T_grid': must be sorted")
    instances = [_instance(cfg, horizon=T) for T in grid] if key == "T" else \
        [_instance(cfg, delta=d) for d in grid]
    rows = []
    for x, inst in zip(grid, instances):
        runs = _map([(pol, inst, beh, s, tail) for s in seeds], threads)
        if args.paired_tapes:
            bruns = _map([(base, inst, beh, s, tail) for s in seeds], threads)
        for i, r in enumerate(runs):
            row = {"policy": pol.label, "T": inst.horizon, "delta": x if key == "delta" else inst.gap,
                   "seed": r["seed"], "regret": r["regret"]}
            if args.paired_tapes:
                row["baseline_regret"] = bruns[i]["regret"]
                row["regret_diff"] = r["regret"] - bruns[i]["regret"]
            rows.append(row)
    summary = summarize(rows, key)
    fit = None
    if key == "T":
        try:
            f = fit_exponent(summary)
            fit = {"slope": f.slope, "intercept": f.intercept, "residual": f.residual,
                   "excluded_T": f.excluded}
        except ConfigError as exc:
            log.warning("no exponent fit: %s", exc)
    result = {"tool_version": __version__, "config_digest": config_digest(cfg), "policy": pol.label,
              "sweep": key, "summary": summary, "exponent": fit["slope"] if fit else None, "fit": fit}
    if args.paired_tapes:
        result["baseline"] = base.label
        result["paired"] = []
        for x in grid:
            sel = [r for r in rows if r[key] == x]
            d = paired_difference([r["regret"] for r in sel], [r["baseline_regret"] for r in sel])
            result["paired"].append({key: x, "mean_diff": d.mean, "se": d.se})
    out = _out_dir(args, cfg)
    header = CSV_HEADER + (("baseline_regret", "regret_diff") if args.paired_tapes else ())
    fmts = _formats(args, cfg)
    if "csv" in fmts:
        _write(os.path.join(out, "sweep.csv"), _csv(rows, header))
    if "json" in fmts:
        _write(os.path.join(out, "sweep.json"), _json(result))
    _write_manifest(out, result["config_digest"], "sweep")
    print(json.dumps({"exponent": result["exponent"], "summary": summary}, sort_keys=True))
    return 0


def cmd_graph(args) -> int:
    cfg = load_config(args.config)
    inst, beh, pol = _instance(cfg), _behavior(cfg), _policy(cfg["policy"])
    g = pol.graph(inst.horizon, inst.num_arms, beh.n_est)
    out = _out_dir(args, cfg)
    want_dot = args.dot or args.format == "dot"
    want_summary = args.summary or not want_dot
    if want_dot:
        _write(os.path.join(out, "graph.dot"), export_dot(g, args.collapse, args.reduce))
    if want_summary:
        _write(os.path.join(out, "graph_summary.json"),
               _json({**g.summary(), "tool_version": __version__, "config_digest": config_digest(cfg)}))
    _write_manifest(out, config_digest(cfg), "graph")
    print(g.summary_json())
    return 0


def cmd_check(args) -> int:
    raw = load_config(args.config, {"type": "object"})
    obj = raw.get("behavior", raw)
    try:
        jsonschema.validate(obj, _BEHAVIOR)
    except jsonschema.ValidationError as exc:
        field = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{args.config}: field '{field}': {exc.message}") from None
    beh = BehaviorConfig.from_json(obj)
    rep = check_assumption_compliance(beh, args.fuzz, n_max=args.n_max)
    body = {**rep.to_json(), "tool_version": __version__}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write(os.path.join(args.out, "compliance.json"), _json(body))
    print(_json(body), end="")
    if not rep.compliant:
        ns = rep.offending_n
        print(f"non-compliant: {len(rep.violations)} violations"
              + (f"; band fails at n = {ns[0]}..{ns[-1]}" if ns else ""), file=sys.stderr)
        return 1
    return 0


def _write_manifest(out, digest, command):
    _write(os.path.join(out, "manifest.json"),
           _json({"tool_version": __version__, "config_digest": digest, "command": command}))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="infodisclose", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--threads", type=int, metavar="N")
        sp.add_argument("--format", choices=["csv", "json", "dot"])
        sp.add_argument("--paired-tapes", action="store_true")
        return sp

    common(sub.add_parser("simulate", help="run one policy for every seed")).set_defaults(func=cmd_simulate)
    common(sub.add_parser("sweep", help="regret over a T or gap grid")).set_defaults(func=cmd_sweep)
    g = common(sub.add_parser("graph", help="export the info-graph"))
    g.add_argument("--dot", action="store_true")
    g.add_argument("--summary", action="store_true")
    g.add_argument("--collapse", action="store_true", help="one node per structural group")
    g.add_argument("--reduce", action="store_true", help="transitive reduction")
    g.set_defaults(func=cmd_graph)
    c = common(sub.add_parser("check", help="fuzz a behavior config against the confidence band"))
    c.add_argument("--fuzz", type=int, default=10_000)
    c.add_argument("--n-max", type=int, default=100_000)
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SchemaError, ConfigError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) else str(exc)
        print(f"error: {'missing field ' if isinstance(exc, KeyError) else ''}{msg}", file=sys.stderr)
        return 2
    except (ContractError, IndexError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
