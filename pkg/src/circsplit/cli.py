"""Command-line front end: partitions, sweeps, lower-bound and moment checks.

Every JSON report embeds a manifest (command, parameters, seed, version,
outputs); ``verify`` re-runs the command from that manifest and re-derives
each ratio from the embedded signing.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from .ap_partition import AlgoConfig, APGenerators, partition_ap, signing_ratio
from .errors import CircSplitError, InvalidSpec, RestartCapExceeded
from .lacunary import (
    anticoncentration_threshold,
    exhaustive_min_max,
    gen_lacunary,
    lower_bound_threshold,
    moment_closed_form,
    moment_quadrature,
    moment_spec,
    standard_gap,
    sign_classes,
    skmax_sampled,
    validity_bound,
)
from .products import ProductSigning, ProductSpec, partition_product, product_spectral_ratio
from .spectral import (
    canonical_circulant,
    edge_effective_resistances,
    er_degree_lower_bound,
    spectral_ratio,
)

SCHEMA = 1
SEED_ENV = "CIRC_SPLIT_SEED"
VERIFY_TOL = 1e-12
EXIT_MISMATCH, EXIT_INVALID, EXIT_RESTART = 1, 2, 3


# ---------------------------------------------------------------- serialization

def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(to_json(v, indent, _level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, Fraction):
        return json.dumps(str(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        cells = [format(float(v), ".17g") if isinstance(v, (float, np.floating)) else str(v) for v in row]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def resolve_seed(flag: int | None) -> int:
    """--seed wins, then $CIRC_SPLIT_SEED, then 0."""
    if flag is not None:
        seed = flag
    else:
        env = os.environ.get(SEED_ENV)
        seed = int(env) if env not in (None, "") else 0
    if not 0 <= seed < 2**64:
        raise InvalidSpec(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def next_prime_above(m: int) -> int:
    p = m + 1
    while not is_prime(p):
        p += 1
    return p


def sweep_modulus(rule: str, k: int, a: int, b: int) -> int:
    if rule == "prime20":
        return next_prime_above(20 * k * b + a * k)
    if rule == "4k+1":
        return 4 * k + 1
    raise InvalidSpec(f"unknown n rule {rule!r}")


# ---------------------------------------------------------------- report builders

def _config(k: int, params: dict) -> AlgoConfig:
    cfg = AlgoConfig.desk(k)
    if params.get("restart_cap") is not None:
        cfg = dataclasses.replace(cfg, restart_cap=int(params["restart_cap"]))
    return cfg


def build_partition(params: dict, seed: int) -> dict:
    spec = APGenerators(int(params["a"]), int(params["b"]), int(params["k"]), int(params["n"]))
    res = partition_ap(spec, _config(spec.k, params), np.random.default_rng(seed),
                       mode=params.get("mode"), grid_oversample=int(params.get("oversample", 32)))
    return {
        "generators": spec.residues,
        "signing": [int(v) for v in res.signing],
        "conditions": res.conditions.to_dict(),
        "spectral": res.spectral.to_dict(),
        "ratio": res.spectral.bound,
    }


def build_er(params: dict, seed: int) -> dict:
    g = canonical_circulant(int(params["n"]), list(params["gens"]))
    er = edge_effective_resistances(g)
    return {
        "gens": list(g.gens),
        "er": {str(a): v for a, v in er.items()},
        "max_er": max(er.values()),
        "degree_lower_bound": er_degree_lower_bound(g.n, g.degree),
    }


def build_moments(params: dict, seed: int) -> dict:
    K, p = int(params["K"]), int(params["p"])
    fam = gen_lacunary(K, float(p))
    x = np.random.default_rng(seed).choice([-1, 1], K)
    exact = moment_closed_form(K, p)
    return {
        "family": list(fam.gens),
        "validity_bound": validity_bound(fam),
        "closed_form_applies": moment_spec(fam, p).applies,
        "signing": [int(v) for v in x],
        "closed_form": exact,
        "closed_form_float": float(exact),
        "quadrature": moment_quadrature(fam, x, p, float(params.get("quad_tol", 1e-10))),
    }


def build_lowerbound(params: dict, seed: int) -> dict:
    K = int(params["K"])
    gap = standard_gap(K) if params["gap_mode"] == "standard" else float(params["gap_mode"])
    fam = gen_lacunary(K, gap)
    xs = sign_classes(K)
    if len(xs) > 1 << 19:
        raise InvalidSpec("too many sign classes for the sampled sweep")
    best, frac = skmax_sampled(fam, xs, int(params["samples"]), np.random.default_rng(seed))
    worst = int(np.argmin(frac))
    out = {
        "family": list(fam.gens),
        "gap": gap,
        "threshold": anticoncentration_threshold(K),
        "required_fraction": 1.0 / (4 * K),
        "min_exceed_fraction": float(frac[worst]),
        "worst_class": [int(v) for v in xs[worst]],
        "min_max_abs": float(best.min()),
    }
    out["passes"] = out["min_exceed_fraction"] >= out["required_fraction"]
    if params.get("minmax"):
        mm = exhaustive_min_max(fam, 64, lower_bound_threshold(K), full=False)
        out["min_max"] = mm.min_max
        out["min_max_witness"] = [int(v) for v in mm.witness]
        out["min_max_threshold"] = lower_bound_threshold(K)
    return out


def build_product(params: dict, seed: int) -> dict:
    spec = ProductSpec(params["kind"], int(params["n"]), tuple(params["ks"]))
    signing, report = partition_product(spec, lambda k: _config(k, params), np.random.default_rng(seed))
    return {
        "kind": spec.kind,
        "per_factor": [[int(v) for v in y] for y in signing.per_factor],
        "spectral": report.to_dict(),
        "ratio": report.max_ratio,
    }


def sweep_rows(params: dict) -> tuple[list[str], list[list]]:
    header = ["k", "n", "seed", "ratio", "ratio_times_sqrt_k", "lambda_max", "moment_max",
              "random_baseline_ratio"]
    a, b = int(params.get("a", 0)), int(params.get("b", 1))
    rows = []
    for k in params["k_list"]:
        n = sweep_modulus(params["n_rule"], k, a, b)
        spec = APGenerators(a, b, k, n)
        for seed in params["seeds"]:
            res = partition_ap(spec, _config(k, params), np.random.default_rng(seed), mode=params.get("mode"))
            ratio = res.spectral.bound
            y = np.random.default_rng(seed).choice([-1, 1], k)
            base = signing_ratio(spec, y, params.get("mode")).bound
            rows.append([k, n, seed, ratio, ratio * math.sqrt(k), res.conditions.lambda_max,
                         res.conditions.moment_max, base])
    return header, rows


BUILDERS = {
    "partition": build_partition,
    "er": build_er,
    "moments": build_moments,
    "lowerbound": build_lowerbound,
    "product": build_product,
}


def make_report(command: str, params: dict, seed: int, out: str | None) -> dict:
    return {
        "schema": SCHEMA,
        "manifest": {
            "command": command,
            "parameters": params,
            "seed": seed,
            "tool_version": __version__,
            "outputs": [out or "-"],
        },
        "result": BUILDERS[command](params, seed),
    }


# ---------------------------------------------------------------- verification

def _numeric_mismatches(a, b, path: str = "") -> list[str]:
    bad = []
    if isinstance(a, dict) and isinstance(b, dict):
        for key in sorted(set(a) | set(b)):
            if key == "wall_time_s":
                continue
            if key not in a or key not in b:
                bad.append(f"{path}/{key}: missing")
            else:
                bad += _numeric_mismatches(a[key], b[key], f"{path}/{key}")
    elif isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return [f"{path}: length {len(a)} != {len(b)}"]
        for i, (u, v) in enumerate(zip(a, b)):
            bad += _numeric_mismatches(u, v, f"{path}[{i}]")
    elif isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool):
        if not (abs(float(a) - float(b)) <= VERIFY_TOL or (math.isnan(a) and math.isnan(b))):
            bad.append(f"{path}: {a!r} != {b!r}")
    elif a != b:
        bad.append(f"{path}: {a!r} != {b!r}")
    return bad


def rederive_ratio(report: dict) -> float | None:
    """Ratio recomputed from the embedded signing alone (no algorithm rerun)."""
    cmd = report["manifest"]["command"]
    params, result = report["manifest"]["parameters"], report["result"]
    if cmd == "partition":
        spec = APGenerators(int(params["a"]), int(params["b"]), int(params["k"]), int(params["n"]))
        mode = result["spectral"]["mode"]
        rep = spectral_ratio(spec.graph(), spec.to_graph_order(np.array(result["signing"])), mode,
                             int(params.get("oversample", 32)))
        return rep.bound
    if cmd == "product":
        spec = ProductSpec(params["kind"], int(params["n"]), tuple(params["ks"]))
        signing = ProductSigning(tuple(np.array(y) for y in result["per_factor"]))
        return product_spectral_ratio(spec, signing).max_ratio
    return None


def verify_report(report: dict) -> list[str]:
    if report.get("schema") != SCHEMA:
        return [f"unsupported schema {report.get('schema')!r}"]
    m = report["manifest"]
    problems = []
    direct = rederive_ratio(report)
    if direct is not None and abs(direct - float(report["result"]["ratio"])) > VERIFY_TOL:
        problems.append(f"/result/ratio: embedded {report['result']['ratio']!r}, re-derived {direct!r}")
    fresh = json.loads(to_json(BUILDERS[m["command"]](m["parameters"], int(m["seed"]))))
    problems += _numeric_mismatches(report["result"], fresh, "/result")
    return problems


# ---------------------------------------------------------------- argparse

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (default ${SEED_ENV} or 0)")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--mode", choices=("exact", "grid"), default=None,
                   help="spectral verification mode (default: exact unless n > 1e6·k)")
    p.add_argument("--oversample", type=int, default=32, help="grid points per unit of max generator")
    p.add_argument("--quad-tol", type=float, default=1e-10)
    p.add_argument("--restart-cap", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="circsplit", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="sign the progression ±(a + s·b) mod n")
    for name in ("a", "b", "k", "n"):
        p.add_argument(f"--{name}", type=int, required=True)
    p.add_argument("--no-timing", action="store_true", help="omit wall time (byte-reproducible output)")
    _common(p)

    p = sub.add_parser("sweep", help="CSV of ratios over k and seeds")
    p.add_argument("--k-list", type=_int_list, required=True)
    p.add_argument("--n-rule", choices=("prime20", "4k+1"), default="prime20")
    p.add_argument("--seeds", type=_int_list, default=None, help="comma-separated seeds (default: --seed)")
    p.add_argument("--a", type=int, default=0)
    p.add_argument("--b", type=int, default=1)
    _common(p)

    p = sub.add_parser("lowerbound", help="anti-concentration check over all sign classes")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--gap-mode", default="standard", help="'standard' (4·log6 K) or a numeric gap")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--minmax", action="store_true", help="also run the exhaustive min-max search")
    _common(p)

    p = sub.add_parser("moments", help="closed-form vs quadrature p-th moment")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    _common(p)

    p = sub.add_parser("er", help="edge effective resistances of X(Z_n, ±gens)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gens", type=_int_list, required=True)
    _common(p)

    p = sub.add_parser("product", help="partition a Cartesian or tensor product")
    p.add_argument("--kind", choices=("cartesian", "tensor"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ks", type=_int_list, required=True)
    _common(p)

    p = sub.add_parser("verify", help="re-derive a JSON report from its manifest")
    p.add_argument("report")
    return ap


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _params(args: argparse.Namespace) -> dict:
    skip = {"command", "seed", "out", "no_timing"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            with open(args.report) as fh:
                report = json.load(fh)
            problems = verify_report(report)
            for line in problems:
                print(line, file=sys.stderr)
            print("ok" if not problems else f"{len(problems)} mismatch(es)")
            return EXIT_MISMATCH if problems else 0
        seed = resolve_seed(args.seed)
        params = _params(args)
        if args.command == "sweep":
            params["seeds"] = params["seeds"] if params["seeds"] is not None else [seed]
            header, rows = sweep_rows(params)
            _emit(csv_text(header, rows), args.out)
            return 0
        t0 = time.perf_counter()
        report = make_report(args.command, params, seed, args.out)
        if args.command == "partition" and not args.no_timing:
            report["wall_time_s"] = time.perf_counter() - t0
        _emit(to_json(report) + "\n", args.out)
        return 0
    except RestartCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESTART
    except (CircSplitError, ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
