"""Command-line entry point: ``kdesign <verb> [flags]``.

Exit status: 0 when every internal check passes, 2 when a check fails,
3 when the configuration is invalid.
"""

from __future__ import annotations

import argparse
import re
import sys

from . import io
from .errors import ConfigError, KDesignError, SampleBoundViolation
from .hamiltonians import ModelKind, ModelSpec
from .leakage import log_grid
from .recipes import ExperimentConfig, Recipe, run

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 2, 3

BASE_DEFAULTS = {
    "model": "gue", "dim": 64, "sites": None, "J": 1.0, "h": 0.0, "protocol": "2sp",
    "k": "1", "T": None, "t_grid": None, "samples": 10_000, "oracle_samples": None,
    "draws": 1, "seed": 0, "threads": None, "out": None, "p": 2, "dim_3sp": 100,
    "gamma": 0.1,
}

VERB_DEFAULTS = {
    "fp-vs-k": {"k": "1-4"},
    "error-vs-t": {"k": "2", "t_grid": "1e1:1e6"},
    "theorems": {"k": "1-6"},
    "weingarten": {"dim": 8, "samples": 100_000},
    "epsilon": {"dim": 100, "t_grid": "1e1:1e6"},
    "oracle-triangle": {"dim": 12, "k": "1,2", "samples": 100_000},
}

HELP = {
    "fp-vs-k": "frame potential per order k (perfect filter unless --T is given)",
    "error-vs-t": "finite-T error curve, power-law slope, and T*",
    "theorems": "closed-form frame-potential table for k = 1..max(--k)",
    "weingarten": "Weingarten table at (--p, --dim) and Haar monomial checks",
    "epsilon": "leakage weight eps_H(T) on a T grid",
    "oracle-triangle": "permutation sum vs phase ensemble vs long-T Monte Carlo",
}


def parse_k(text) -> tuple[int, ...]:
    """'3', '1,2,4', '1-4' or '1..4'."""
    if isinstance(text, int):
        return (text,)
    if isinstance(text, (list, tuple)):
        return tuple(int(k) for k in text)
    out = []
    for part in str(text).split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)\s*(?:-|\.\.)\s*(\d+)", part)
        try:
            if m:
                out.extend(range(int(m.group(1)), int(m.group(2)) + 1))
            elif part:
                out.append(int(part))
        except ValueError:
            raise ConfigError(f"bad --k value {text!r}") from None
    if not out:
        raise ConfigError(f"bad --k value {text!r}")
    return tuple(out)


def parse_grid(text) -> tuple[float, ...]:
    """'lo:hi' (8 points per decade), 'lo:hi:per_decade', or a comma list."""
    if isinstance(text, (list, tuple)):
        return tuple(float(t) for t in text)
    text = str(text)
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            per_decade = int(parts[2]) if len(parts) == 3 else 8
            return tuple(log_grid(parts[0], parts[1], per_decade).tolist())
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"bad --t-grid value {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--model", choices=[m.value for m in ModelKind])
    g.add_argument("--dim", type=int, help="D for gue / flat")
    g.add_argument("--sites", type=int, help="N for csyk / rspin (D = binomial(N, N/2))")
    g.add_argument("--J", type=float, help="coupling scale (csyk, rspin)")
    g.add_argument("--h", type=float, help="longitudinal field scale (rspin)")
    g = common.add_argument_group("experiment")
    g.add_argument("--protocol", choices=["2sp", "3sp"])
    g.add_argument("--k", help="orders, e.g. 2, 1,3 or 1-4")
    g.add_argument("--T", type=float, help="time window (omit for the perfect filter)")
    g.add_argument("--t-grid", dest="t_grid", help="lo:hi[:per_decade] or comma list")
    g.add_argument("--samples", type=int)
    g.add_argument("--oracle-samples", dest="oracle_samples", type=int,
                   help="samples for the perfect-filter oracle (default: --samples)")
    g.add_argument("--draws", type=int, help="independent Hamiltonian draws to average")
    g.add_argument("--seed", type=int)
    g.add_argument("--p", type=int, help="Weingarten order")
    g.add_argument("--dim-3sp", dest="dim_3sp", type=int,
                   help="D of the 3SP k=1 triangle (0 skips it)")
    g.add_argument("--gamma", type=float, help="T* threshold")
    g = common.add_argument_group("run")
    g.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    g.add_argument("--out", help="CSV path; the JSON report goes next to it")
    g.add_argument("--config", help="JSON file of flag values; explicit flags win")

    parser = argparse.ArgumentParser(
        prog="kdesign",
        description="Frame potentials of quenched temporal ensembles.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERB_DEFAULTS:
        sub.add_parser(verb, parents=[common], help=HELP[verb], description=HELP[verb])
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the verb defaults, then --config, then explicit flags."""
    values = dict(BASE_DEFAULTS)
    values.update(VERB_DEFAULTS[args.verb])
    if args.config:
        for key, value in io.load_config(args.config).items():
            key = key.replace("-", "_")
            if key not in BASE_DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = value
    for key in BASE_DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def to_config(verb: str, v: dict) -> ExperimentConfig:
    kind = ModelKind(str(v["model"]).lower())
    if kind in (ModelKind.CSYK, ModelKind.RSPIN):
        if v["sites"] is None:
            raise ConfigError(f"--model {kind.value} needs --sites")
        size = v["sites"]
    else:
        size = v["dim"]
    spec = ModelSpec(kind, int(size), float(v["J"]), float(v["h"]), int(v["seed"]))
    return ExperimentConfig(
        recipe=Recipe(verb), model=spec, protocol=v["protocol"], k_list=parse_k(v["k"]),
        T=None if v["T"] is None else float(v["T"]),
        T_grid=None if v["t_grid"] is None else parse_grid(v["t_grid"]),
        samples=int(v["samples"]),
        oracle_samples=None if v["oracle_samples"] is None else int(v["oracle_samples"]),
        draws=int(v["draws"]), seed=int(v["seed"]),
        threads=None if v["threads"] is None else int(v["threads"]),
        p=int(v["p"]), dim_3sp=int(v["dim_3sp"]), gamma=float(v["gamma"]), out=v["out"],
    ).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = to_config(args.verb, resolve(args))
    except (KDesignError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg)
    except (SampleBoundViolation, AssertionError) as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        io.write_json({"passed": False, "error": str(exc)}, io.summary_path(cfg.out))
        return EXIT_FAIL
    except KDesignError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    io.write_csv(result.rows, result.columns, cfg.out)
    report = result.report()
    report["config"] = {"verb": args.verb, "model": cfg.model.to_dict() if cfg.model else None,
                        "protocol": cfg.protocol.value, "k": list(cfg.k_list), "T": cfg.T,
                        "samples": cfg.samples, "seed": cfg.seed, "draws": cfg.draws}
    path = io.summary_path(cfg.out)
    if path:
        io.write_json(report, path)
    else:
        print(io.dumps(report), file=sys.stderr)
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    for check in result.checks:
        if not check.passed:
            print(f"FAIL {check.name}: {check.detail}", file=sys.stderr)
    n_fail = sum(not c.passed for c in result.checks)
    print(f"{len(result.checks) - n_fail}/{len(result.checks)} checks passed", file=sys.stderr)
    return EXIT_OK if result.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
