"""Experiment orchestration CLI.

Subcommands: ``pointset``, ``transport``, ``converge``, ``lais``.  Each takes
a single JSON config file validated against a versioned schema before any
computation; unknown keys are rejected.  Exit codes: 0 success, 2 config
error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from datetime import datetime, timezone
from importlib import resources

import numpy as np

from . import errors as err
from .lais import (
    LaisConfig,
    build_proposal,
    demo_multimodal_target,
    dm_lais,
    target_from_spec,
    tqmc_lais,
    upper_layer,
)
from .mixtures import (
    MixtureSpec,
    demo_three_component,
    mixture_moments,
    random_mixture,
    spec_digest,
    spec_from_dict,
)
from .pointsets import (
    SparseGridLevel,
    WeightedPointSet,
    halton,
    mc_points,
    read_pointset_csv,
    smolyak_grid,
    uniform_to_normal,
    write_pointset_csv,
)
from .quadrature import (
    convergence_study,
    fit_rate,
    records_to_csv,
    records_to_jsonl,
)
from .transport import (
    TransportConfig,
    componentwise_transport,
    transport_point,
    transport_set,
)

_NUMERIC_ERRORS = (
    err.NonPositiveDensityError,
    err.StiffnessError,
    err.UnresolvedReferenceError,
    err.DegenerateWeightsError,
    err.InsufficientBudgetError,
    err.InsufficientDataError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


class ConfigError(Exception):
    pass


def _load_schema_registry():
    import referencing
    from referencing.jsonschema import DRAFT202012

    resmods = resources.files("mixtransport") / "schemas"
    registry = referencing.Registry()
    schemas = {}
    for entry in resmods.iterdir():
        if entry.name.endswith(".json"):
            doc = json.loads(entry.read_text())
            schemas[entry.name] = doc
            registry = registry.with_resource(
                entry.name, referencing.Resource(doc, DRAFT202012)
            )
    return schemas, registry


def _validate_config(doc: dict, schema_file: str) -> None:
    import jsonschema

    schemas, registry = _load_schema_registry()
    validator = jsonschema.Draft202012Validator(schemas[schema_file],
                                                registry=registry)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        locs = "; ".join(
            f"{'/'.join(str(p) for p in e.path) or '<root>'}: {e.message}"
            for e in errors[:3]
        )
        raise ConfigError(f"config does not match {schema_file}: {locs}")


def _load_config(path: str, expected_schema: str, schema_file: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema") != expected_schema:
        raise ConfigError(
            f"config must declare \"schema\": \"{expected_schema}\""
        )
    _validate_config(doc, schema_file)
    return doc


def _build_mixture(doc: dict) -> MixtureSpec:
    keys = set(doc)
    if "builtin" in keys:
        if keys - {"builtin"}:
            raise ConfigError("builtin mixture takes no other keys")
        if doc["builtin"] == "three-component":
            return demo_three_component()
        return demo_multimodal_target()
    if "random" in keys:
        if keys - {"random"}:
            raise ConfigError("random mixture takes no other keys")
        r = doc["random"]
        return random_mixture(r["d"], r["J"], r["seed"])
    if not {"weights", "shifts", "scales"} <= keys:
        raise ConfigError("inline mixture needs weights, shifts and scales")
    return spec_from_dict(doc)


def _build_points(gen: dict, seed_override=None, normal_default=False):
    kind = gen["kind"]
    comments = [f"generator: {kind}"]
    if kind == "halton":
        if "n" not in gen:
            raise ConfigError("halton generator needs n")
        skip = gen.get("skip", 1000)
        leap = gen.get("leap", 100)
        scramble = gen.get("scramble", False)
        to_normal = gen.get("map_to_normal", normal_default)
        u = halton(gen["d"], gen["n"], skip=skip, leap=leap, scramble=scramble)
        pts = uniform_to_normal(u) if to_normal else u
        comments += [f"skip: {skip}", f"leap: {leap}",
                     f"map_to_normal: {to_normal}"]
        n = gen["n"]
        return WeightedPointSet(pts, np.full(n, 1.0 / n), "qmc-halton"), comments
    if kind == "sparse-grid":
        if "level" not in gen:
            raise ConfigError("sparse-grid generator needs level")
        comments += [f"level: {gen['level']}"]
        return smolyak_grid(SparseGridLevel(gen["level"], gen["d"])), comments
    seed = seed_override if seed_override is not None else gen.get("seed", 0)
    if "n" not in gen:
        raise ConfigError("mc generator needs n")
    comments += [f"seed: {seed}"]
    return mc_points(gen["d"], gen["n"], seed), comments


def _timestamp_comments(reproducible: bool):
    if reproducible:
        return []
    return [f"generated: {datetime.now(timezone.utc).isoformat()}"]


def _transport_cfg(doc: dict | None) -> TransportConfig:
    return TransportConfig.from_dict(doc) if doc else TransportConfig()


# -- subcommands -----------------------------------------------------------------


def cmd_pointset(args) -> int:
    cfg = _load_config(args.config, "pointset/v1", "pointset.v1.json")
    pts, comments = _build_points(cfg["generator"], seed_override=args.seed)
    out = args.out or cfg["out"]
    write_pointset_csv(pts, out, _timestamp_comments(args.reproducible) + comments)
    print(f"wrote {pts.n} points (d={pts.d}) to {out}")
    return 0


def cmd_transport(args) -> int:
    cfg = _load_config(args.config, "transport/v1", "transport.v1.json")
    spec = _build_mixture(cfg["mixture"])
    pts_doc = cfg["points"]
    if ("file" in pts_doc) == ("generator" in pts_doc):
        raise ConfigError("points must give exactly one of file or generator")
    if "file" in pts_doc:
        pts = read_pointset_csv(pts_doc["file"])
        comments = [f"source: {pts_doc['file']}"]
    else:
        pts, comments = _build_points(pts_doc["generator"],
                                      seed_override=args.seed,
                                      normal_default=True)
    tcfg = _transport_cfg(cfg.get("transport"))
    t_end = cfg.get("t_end", 1.0)
    out_path = args.out or cfg["out"]
    if cfg.get("componentwise", False):
        out = componentwise_transport(spec, pts)
    else:
        out = transport_set(spec, tcfg, pts, t_end=t_end, threads=args.threads)
    comments = _timestamp_comments(args.reproducible) + comments + [
        f"mixture: {spec_digest(spec)}", f"t_end: {t_end}"]
    write_pointset_csv(out, out_path, comments)
    if cfg.get("trajectory_out"):
        with open(cfg["trajectory_out"], "w", newline="") as fh:
            fh.write("n,t," + ",".join(f"x{i+1}" for i in range(spec.d)) + "\n")
            for i, x0 in enumerate(pts.points):
                _, traj = transport_point(spec, tcfg, x0, t_end=t_end,
                                          record_trajectory=True)
                for t, x in traj:
                    fh.write(f"{i},{t:.17g}," +
                             ",".join(f"{v:.17g}" for v in x) + "\n")
    print(f"transported {out.n} points to {out_path}")
    return 0


def _jsonl_path(csv_path: str) -> str:
    return (csv_path[:-4] if csv_path.endswith(".csv") else csv_path) + ".jsonl"


def cmd_converge(args) -> int:
    cfg = _load_config(args.config, "converge/v1", "converge.v1.json")
    spec = _build_mixture(cfg["mixture"])
    tcfg = _transport_cfg(cfg.get("transport"))
    out_records = args.out or cfg["out_records"]
    all_records = []
    failure = None
    for method in cfg["methods"]:
        try:
            all_records += convergence_study(
                spec, [method], cfg["integrands"], cfg["n_grid"], cfg["seeds"],
                transport_cfg=tcfg, skip=cfg.get("skip", 1000),
                leap=cfg.get("leap", 100), threads=args.threads,
                cache=cfg.get("reference_cache"),
            )
        except _NUMERIC_ERRORS as exc:
            failure = exc
            break
    if args.reproducible:
        for r in all_records:
            r.wall_time = 0.0
    records_to_csv(all_records, out_records)
    records_to_jsonl(all_records, _jsonl_path(out_records))
    summary = {"mixture": spec_digest(spec), "n_records": len(all_records),
               "slopes": {}}
    for method in cfg["methods"]:
        for fid in cfg["integrands"]:
            rows = [r for r in all_records
                    if r.method == method and r.integrand == fid]
            key = f"{method}:{fid}"
            try:
                summary["slopes"][key] = fit_rate(rows)
            except err.InsufficientDataError as exc:
                summary["slopes"][key] = {"insufficient-data": str(exc)}
    if failure is not None:
        summary["aborted"] = f"{type(failure).__name__}: {failure}"
    with open(cfg["out_summary"], "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    if failure is not None:
        print(f"converge aborted after flushing partial results: {failure}",
              file=sys.stderr)
        return 3
    print(f"wrote {len(all_records)} records to {out_records}")
    return 0


def cmd_lais(args) -> int:
    cfg = _load_config(args.config, "lais/v1", "lais.v1.json")
    target_spec = _build_mixture(cfg["target"])
    truth = mixture_moments(target_spec).mean
    target = target_from_spec(target_spec)
    base_doc = dict(cfg.get("lais", {}))
    if args.seed is not None:
        base_doc["seed"] = args.seed
    base = LaisConfig(**base_doc)
    tcfg = _transport_cfg(cfg.get("transport"))
    dm_seeds = cfg.get("dm_seeds", 5)
    d = target_spec.d
    out_path = args.out or cfg["out"]
    rows = []
    last = {}
    for sweep in cfg["sweeps"]:
        vary, values = sweep["vary"], sweep["values"]
        if vary == "M":
            centers, _ = upper_layer(target, d, base)
        for v in values:
            if vary == "M":
                lcfg = dataclasses.replace(base, samples_per_component=v)
                sweep_centers = centers
            else:
                lcfg = dataclasses.replace(base, steps=v)
                sweep_centers, _ = upper_layer(target, d, lcfg)
            t0 = time.perf_counter()
            errs = []
            res_dm = None
            for i in range(dm_seeds):
                res_dm = dm_lais(target, d, lcfg, lambda X: X,
                                 lower_seed=base.seed + 1001 + i,
                                 centers=sweep_centers)
                errs.append(float(np.linalg.norm(res_dm.estimate - truth)))
            dm_err = math.sqrt(float(np.mean(np.square(errs))))
            dm_time = time.perf_counter() - t0
            rows.append((vary, "dm-lais", v, res_dm.n_total, dm_err,
                         res_dm.ess, dm_time))
            t0 = time.perf_counter()
            res_tq = tqmc_lais(target, d, lcfg, lambda X: X,
                               transport_cfg=tcfg, centers=sweep_centers,
                               threads=args.threads)
            tq_err = float(np.linalg.norm(res_tq.estimate - truth))
            rows.append((vary, "tqmc-lais", v, res_tq.n_total, tq_err,
                         res_tq.ess, time.perf_counter() - t0))
            last = {
                "dm-lais": {"estimate": list(map(float, np.atleast_1d(res_dm.estimate))),
                            "ess": res_dm.ess, "n_total": res_dm.n_total},
                "tqmc-lais": {"estimate": list(map(float, np.atleast_1d(res_tq.estimate))),
                              "ess": res_tq.ess, "n_total": res_tq.n_total},
            }
    with open(out_path, "w", newline="") as fh:
        fh.write("sweep,method,varied,n_total,abs_error,ess,wall_time\n")
        for vary, method, v, n_total, e, ess, wt in rows:
            if args.reproducible:
                wt = 0.0
            fh.write(f"{vary},{method},{v},{n_total},{e:.17g},{ess:.6g},"
                     f"{wt:.6g}\n")
    if cfg.get("out_summary"):
        summary = {"target": spec_digest(target_spec), "results": last,
                   "slopes": {}}
        for vary in {r[0] for r in rows}:
            for method in ("dm-lais", "tqmc-lais"):
                pts = [(r[3], r[4]) for r in rows
                       if r[0] == vary and r[1] == method and r[4] > 0]
                if len(pts) >= 2:
                    xs = np.log([p[0] for p in pts])
                    ys = np.log([p[1] for p in pts])
                    summary["slopes"][f"{vary}:{method}"] = float(
                        np.polyfit(xs, ys, 1)[0])
        with open(cfg["out_summary"], "w") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)
            fh.write("\n")
    print(f"wrote {len(rows)} rows to {out_path}")
    return 0


# -- entry point -----------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mixtransport",
        description="Transport-based quadrature experiments for mixtures",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in (("pointset", cmd_pointset), ("transport", cmd_transport),
                     ("converge", cmd_converge), ("lais", cmd_lais)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", default=None, help="override primary output path")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config's seed")
        sp.add_argument("--reproducible", action="store_true",
                        help="omit timestamps and wall times from outputs")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker pool bound for transport/study cells")
        sp.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (err.InvalidInputError, err.UnsupportedOperationError,
            err.UnsupportedDimensionError, err.DomainError, err.EmptyGridError,
            err.DimensionMismatchError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
