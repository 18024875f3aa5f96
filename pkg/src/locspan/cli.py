"""Experiment harness over the spanner pipelines.

Subcommands: ``generate`` writes instance files, ``run`` executes one
algorithm with verification, ``verify`` re-checks a saved result from
its own header, ``sweep`` runs a parameter grid into a CSV table plus
static SVG plots.  Every output file embeds the resolved configuration
and package version, so any run is replayable from its header alone.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import statistics
import sys
import time
from dataclasses import dataclass, fields, replace
from itertools import product

from . import __version__
from .graph import (
    GraphError,
    QudgInstance,
    SpannerGraph,
    load_instance,
    random_instance,
    save_instance,
)
from .pipelines import PipelineError, los, los_params, plos, plos_params
from .simulator import SimulationError, distributed_los, distributed_plos
from .verify import (
    VerifyError,
    max_degree,
    planarity_check,
    stretch_factor,
    weight_ratio,
)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_IO = 3

ALGORITHMS = ("los", "plos", "distributed-los", "distributed-plos")

# worst-case detour of the planar route: triangulation stretch times the
# degree-bounding detour
TRIANGULATION_STRETCH = 2.4184
DEGREE_STRETCH = 1.0 + math.pi / 2.0
REL_TOL = 1e-9

CSV_COLUMNS = [
    "algorithm",
    "mode",
    "n",
    "side",
    "alpha",
    "policy",
    "band_p",
    "beta",
    "delta",
    "eps",
    "seed",
    "nodes",
    "edges",
    "stretch",
    "max_degree",
    "weight_ratio",
    "planar",
    "rounds",
    "max_payload",
    "elapsed_s",
    "error",
]

# fields fixed by an instance file; the rest choose what to run on it
INSTANCE_FIELDS = ("n", "side", "alpha", "policy", "band_p", "seed")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Resolved parameters for one generate/run invocation."""

    n: int = 50
    side: float = 2.0
    alpha: float = 1.0
    policy: str = "none"
    band_p: float = 0.5
    beta: float | None = None
    delta: float | None = None
    eps: float = 0.5
    mode: str = "representative"
    seed: int = 0
    algorithm: str = "los"

    def resolved(self) -> "RunConfig":
        # beta defaults to 0.6*alpha, delta to beta/8
        beta = 0.6 * self.alpha if self.beta is None else self.beta
        delta = beta / 8.0 if self.delta is None else self.delta
        return replace(self, beta=beta, delta=delta)

    def validate(self) -> "RunConfig":
        cfg = self.resolved()
        if cfg.n < 1:
            raise ConfigError(f"n must be at least 1, got {cfg.n}")
        if cfg.side <= 0:
            raise ConfigError(f"side must be positive, got {cfg.side}")
        if not 0 < cfg.alpha <= 1:
            raise ConfigError(f"alpha must be in (0, 1], got {cfg.alpha}")
        if cfg.policy not in ("none", "all", "random"):
            raise ConfigError(f"unknown adversary policy {cfg.policy!r}")
        if not 0 <= cfg.band_p <= 1:
            raise ConfigError(f"band_p must be in [0, 1], got {cfg.band_p}")
        if cfg.mode not in ("representative", "literal"):
            raise ConfigError(f"unknown mode {cfg.mode!r}")
        if cfg.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {cfg.algorithm!r}")
        try:
            if cfg.algorithm in ("los", "distributed-los"):
                los_params(cfg.alpha, cfg.beta, cfg.delta, cfg.eps, cfg.mode)
            else:
                plos_params(cfg.beta, cfg.delta, cfg.eps, cfg.mode)
        except PipelineError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg


_PARSE = {
    "n": int,
    "side": float,
    "alpha": float,
    "policy": str,
    "band_p": float,
    "beta": float,
    "delta": float,
    "eps": float,
    "mode": str,
    "seed": int,
    "algorithm": str,
}


def read_config_file(path: str) -> dict:
    """Plain key=value lines; blank lines and '#' comments are skipped."""
    out: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(raw, 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {text!r}")
        key, _, value = text.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _PARSE:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _PARSE[key](value)
        except ValueError as exc:
            raise ConfigError(
                f"{path}:{lineno}: bad value for {key}: {value!r}"
            ) from exc
    return out


def merged_options(args: argparse.Namespace) -> dict:
    """Config file values with explicit flags layered on top."""
    data: dict = {}
    if getattr(args, "config", None):
        data.update(read_config_file(args.config))
    for name in _PARSE:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    return data


def build_config(args: argparse.Namespace) -> RunConfig:
    try:
        return RunConfig(**merged_options(args)).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _asdata(cfg: RunConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def output_dir(args: argparse.Namespace) -> str:
    out = getattr(args, "out", None) or os.environ.get("LOCSPAN_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def config_header(cfg: RunConfig) -> list[str]:
    pairs = " ".join(f"{f.name}={getattr(cfg, f.name)}" for f in fields(cfg))
    return [f"# locspan {__version__}", f"# config {pairs}"]


def parse_embedded_config(path: str) -> RunConfig:
    """Rebuild the RunConfig from a result or instance file header."""
    data: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith("# config "):
                for item in line[len("# config "):].split():
                    key, _, value = item.partition("=")
                    if key in _PARSE and value != "None":
                        data[key] = _PARSE[key](value)
    if not data:
        raise ConfigError(f"{path}: no '# config' header line")
    return RunConfig(**data).validate()


def _instance_of(cfg: RunConfig, require_connected: bool) -> QudgInstance:
    return random_instance(
        cfg.n,
        cfg.side,
        cfg.alpha,
        cfg.policy,
        seed=cfg.seed,
        band_p=cfg.band_p,
        require_connected=require_connected,
    )


def _dispatch(cfg: RunConfig, inst: QudgInstance):
    """Run cfg.algorithm on inst; returns (graph, rounds, max_payload)."""
    eps, beta, delta = cfg.eps, cfg.beta, cfg.delta
    if cfg.algorithm == "los":
        return los(inst, eps, beta, delta, cfg.mode), None, None
    if cfg.algorithm == "plos":
        return plos(inst, eps, beta, delta, cfg.mode), None, None
    if cfg.algorithm == "distributed-los":
        g, trace = distributed_los(inst, eps, beta, delta, cfg.mode)
    else:
        g, trace = distributed_plos(inst, eps, beta, delta, cfg.mode)
    return g, trace.rounds_elapsed, trace.max_payload_entries


def _measure(cfg: RunConfig, inst: QudgInstance, g: SpannerGraph) -> dict:
    planar = None
    if cfg.algorithm in ("plos", "distributed-plos"):
        planar = planarity_check(g)[0]
    return {
        "nodes": inst.n,
        "edges": len(g.edges),
        "stretch": stretch_factor(g, SpannerGraph.full(inst)),
        "max_degree": max_degree(g),
        "weight_ratio": weight_ratio(g),
        "planar": planar,
    }


def _check_result(cfg: RunConfig, metrics: dict, equal_ref: bool | None) -> list[str]:
    """Names of failed checks, empty when the run is good."""
    failures: list[str] = []
    if cfg.algorithm in ("los", "distributed-los"):
        bound = (1.0 + cfg.eps) * (1.0 + REL_TOL)
    else:
        bound = (
            TRIANGULATION_STRETCH
            * (1.0 + cfg.eps)
            * DEGREE_STRETCH
            * (1.0 + REL_TOL)
        )
        if metrics["planar"] is not True:
            failures.append("planarity")
    if metrics["stretch"] > bound:
        failures.append(f"stretch bound ({metrics['stretch']:.6f} > {bound:.6f})")
    if equal_ref is False:
        failures.append("distributed result differs from reference")
    return failures


def _reference_equal(cfg: RunConfig, inst: QudgInstance, g: SpannerGraph) -> bool:
    make = los if cfg.algorithm == "distributed-los" else plos
    ref = make(inst, cfg.eps, cfg.beta, cfg.delta, cfg.mode)
    return dict(g.edges) == dict(ref.edges) and g.tags == ref.tags


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    inst = _instance_of(cfg, require_connected=not args.allow_disconnected)
    path = args.instance or os.path.join(
        output_dir(args), f"qudg-n{cfg.n}-seed{cfg.seed}.txt"
    )
    tmp = f"{path}.body.{os.getpid()}"
    save_instance(inst, tmp)
    with open(tmp, "r", encoding="utf-8") as fh:
        body = fh.read()
    os.remove(tmp)
    write_atomic(path, "\n".join(config_header(cfg)) + "\n" + body)
    print(f"wrote {path}: nodes {inst.n} edges {len(inst.edges)}")
    return EXIT_OK


def _run_config_for(args: argparse.Namespace, inst: QudgInstance) -> RunConfig:
    """Instance facts from the file header, run choices from flags.

    An explicit flag that contradicts a fact of the instance file is an
    error rather than a silent override.
    """
    overrides = merged_options(args)
    try:
        facts = {
            k: v
            for k, v in _asdata(parse_embedded_config(args.instance)).items()
            if k in INSTANCE_FIELDS
        }
    except ConfigError:
        # headerless instance file: only n and alpha are knowable
        facts = {"n": inst.n, "alpha": inst.alpha}
    for key, value in facts.items():
        if key in overrides and overrides[key] != value:
            raise ConfigError(
                f"{key}={overrides[key]} conflicts with instance {key}={value}"
            )
    try:
        return RunConfig(**{**overrides, **facts}).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_run(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    cfg = _run_config_for(args, inst)
    t0 = time.perf_counter()
    g, rounds, max_payload = _dispatch(cfg, inst)
    elapsed = time.perf_counter() - t0
    metrics = _measure(cfg, inst, g)
    metrics["rounds"] = rounds
    metrics["max_payload"] = max_payload
    metrics["elapsed_s"] = round(elapsed, 3)

    equal_ref = None
    if cfg.algorithm.startswith("distributed-") and not args.skip_verify:
        equal_ref = _reference_equal(cfg, inst, g)
    failures = [] if args.skip_verify else _check_result(cfg, metrics, equal_ref)

    path = args.result or os.path.join(
        output_dir(args), f"{cfg.algorithm}-n{cfg.n}-seed{cfg.seed}.edges"
    )
    lines = config_header(cfg)
    for key in ("nodes", "edges", "stretch", "max_degree", "weight_ratio",
                "planar", "rounds", "max_payload", "elapsed_s"):
        lines.append(f"# metric {key} {metrics[key]}")
    for (u, v), d in sorted(g.edges.items()):
        lines.append(f"{u} {v} {d!r} {g.tags.get((u, v), '-')}")
    write_atomic(path, "\n".join(lines) + "\n")

    print(f"wrote {path}: edges {metrics['edges']} stretch "
          f"{metrics['stretch']:.6f} max_degree {metrics['max_degree']} "
          f"weight_ratio {metrics['weight_ratio']:.6f}")
    if rounds is not None:
        print(f"rounds {rounds} max_payload {max_payload}")
    for name in failures:
        print(f"verification failed: {name}", file=sys.stderr)
    return EXIT_VERIFY if failures else EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    cfg = parse_embedded_config(args.result)
    if inst.alpha != cfg.alpha:
        raise ConfigError(
            f"result header alpha {cfg.alpha} does not match instance "
            f"alpha {inst.alpha}"
        )
    g = SpannerGraph(inst)
    failures: list[str] = []
    with open(args.result, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 4:
                raise ConfigError(f"{args.result}:{lineno}: bad edge line {text!r}")
            u, v, d = int(parts[0]), int(parts[1]), float(parts[2])
            try:
                g.add_edge(u, v, tag=parts[3])
            except GraphError:
                failures.append(f"edge ({u}, {v}) not present in the instance")
                continue
            pair = (u, v) if u < v else (v, u)
            if not math.isclose(g.edges[pair], d, rel_tol=1e-12):
                failures.append(f"edge ({u}, {v}) length mismatch")
    if not failures:
        metrics = _measure(cfg, inst, g)
        equal_ref = None
        if cfg.algorithm.startswith("distributed-"):
            equal_ref = _reference_equal(cfg, inst, g)
        failures = _check_result(cfg, metrics, equal_ref)
    for name in failures:
        print(f"verification failed: {name}", file=sys.stderr)
    if failures:
        return EXIT_VERIFY
    print(f"{args.result}: ok ({len(g.edges)} edges)")
    return EXIT_OK


def _parse_values(text: str, kind) -> list:
    return [kind(tok) for tok in text.split(",") if tok.strip()]


def _parse_seeds(text: str) -> list[int]:
    """A count, a comma list, or a lo:hi half-open range."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        lo, _, hi = text.partition(":")
        return list(range(int(lo), int(hi)))
    if "," in text:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    return list(range(int(text)))


def _sweep_row(cfg: RunConfig) -> dict:
    row = {key: "" for key in CSV_COLUMNS}
    row.update(_asdata(cfg))
    row["error"] = ""
    try:
        t0 = time.perf_counter()
        inst = _instance_of(
            cfg, require_connected=cfg.algorithm in ("los", "distributed-los")
        )
        g, rounds, max_payload = _dispatch(cfg, inst)
        metrics = _measure(cfg, inst, g)
        row.update(metrics)
        row["rounds"] = rounds
        row["max_payload"] = max_payload
        row["elapsed_s"] = round(time.perf_counter() - t0, 3)
        bad = _check_result(cfg, metrics, None)
        if bad:
            row["error"] = "; ".join(bad)
    except (GraphError, PipelineError, SimulationError, VerifyError) as exc:
        row["error"] = str(exc).splitlines()[0][:200]
    return row


def _mean_series(rows: list[dict], x_key: str, y_key: str) -> tuple[list, list]:
    buckets: dict = {}
    for r in rows:
        if r[y_key] == "" or r[y_key] is None:
            continue
        buckets.setdefault(r[x_key], []).append(float(r[y_key]))
    xs = sorted(buckets)
    return xs, [statistics.fmean(buckets[x]) for x in xs]


def _sweep_figures(rows: list[dict], out: str, prefix: str) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ok = [r for r in rows if not r["error"]]
    written: list[str] = []

    def one(name, data, x_key, y_key, group_keys, xlabel, ylabel):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for gv in sorted({tuple(r[k] for k in group_keys) for r in data}):
            sub = [r for r in data if tuple(r[k] for k in group_keys) == gv]
            xs, ys = _mean_series(sub, x_key, y_key)
            if not xs:
                continue
            label = " ".join(f"{k}={v}" for k, v in zip(group_keys, gv))
            ax.plot(xs, ys, marker="o", label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if data:
            ax.legend(fontsize=7)
        fig.tight_layout()
        path = os.path.join(out, f"{prefix}-{name}.svg")
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    one("weight-ratio", ok, "n", "weight_ratio", ("algorithm", "eps"),
        "n", "weight ratio")
    one("stretch", ok, "eps", "stretch", ("algorithm", "n"), "eps", "stretch")
    one("rounds", [r for r in ok if r["rounds"] not in ("", None)],
        "n", "rounds", ("algorithm",), "n", "rounds")
    return written


def cmd_sweep(args: argparse.Namespace) -> int:
    base = build_config(args)
    algorithms = (
        [a.strip() for a in args.algorithms.split(",") if a.strip()]
        if args.algorithms is not None
        else [base.algorithm]
    )
    for algo in algorithms:
        if algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {algo!r}")
    n_values = (
        _parse_values(args.n_list, int) if args.n_list is not None else [base.n]
    )
    eps_values = (
        _parse_values(args.eps_list, float)
        if args.eps_list is not None
        else [base.eps]
    )
    seeds = _parse_seeds(args.seeds) if args.seeds is not None else [base.seed]

    out = output_dir(args)
    csv_path = os.path.join(out, f"{args.prefix}.csv")
    combos = list(product(algorithms, n_values, eps_values, seeds))
    if not combos:
        print("warning: empty sweep, nothing to run", file=sys.stderr)
        write_atomic(csv_path, ",".join(CSV_COLUMNS) + "\n")
        print(f"wrote {csv_path}: 0 rows")
        return EXIT_OK

    rows = []
    for algo, n, eps, seed in combos:
        cfg = replace(base, algorithm=algo, n=n, eps=eps, seed=seed).validate()
        rows.append(_sweep_row(cfg))

    sink = io.StringIO()
    writer = csv.DictWriter(sink, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row[k] is None else row[k]) for k in CSV_COLUMNS})
    write_atomic(csv_path, sink.getvalue())

    figures = _sweep_figures(rows, out, args.prefix)
    errors = sum(1 for r in rows if r["error"])
    print(f"wrote {csv_path}: {len(rows)} rows ({errors} with errors)")
    for path in figures:
        print(f"wrote {path}")
    return EXIT_OK


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key=value file; explicit flags override it")
    p.add_argument("--n", type=int, help="node count")
    p.add_argument("--side", type=float, help="square area side length")
    p.add_argument("--alpha", type=float, help="mandatory connection radius")
    p.add_argument("--policy", choices=("none", "all", "random"),
                   help="adversary band policy")
    p.add_argument("--band-p", dest="band_p", type=float,
                   help="acceptance probability for policy=random")
    p.add_argument("--beta", type=float, help="grid cell size (default 0.6*alpha)")
    p.add_argument("--delta", type=float, help="grid offset step (default beta/8)")
    p.add_argument("--eps", type=float, help="stretch slack")
    p.add_argument("--mode", choices=("representative", "literal"),
                   help="parameter derivation mode")
    p.add_argument("--seed", type=int, help="instance seed")
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--out", help="output directory (default $LOCSPAN_OUT or .)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locspan", description=__doc__.splitlines()[0]
    )
    parser.add_argument("--version", action="version",
                        version=f"locspan {__version__}")
    sub = parser.add_subparsers(dest="command")
    parent = _config_parent()

    g = sub.add_parser("generate", parents=[parent],
                       help="write a random instance file")
    g.add_argument("instance", nargs="?", help="output path")
    g.add_argument("--allow-disconnected", action="store_true")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", parents=[parent],
                       help="run one algorithm on an instance file")
    r.add_argument("instance", help="instance file from generate")
    r.add_argument("--result", help="output path for the edge list")
    r.add_argument("--skip-verify", action="store_true",
                   help="skip result verification")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", parents=[parent],
                       help="re-check a result file against its instance")
    v.add_argument("instance", help="instance file")
    v.add_argument("result", help="result file from run")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", parents=[parent],
                       help="run a parameter grid, write CSV and SVG plots")
    s.add_argument("--algorithms", help="comma list (default: --algorithm)")
    s.add_argument("--n-list", dest="n_list", help="comma list of node counts")
    s.add_argument("--eps-list", dest="eps_list", help="comma list of eps values")
    s.add_argument("--seeds", help="count, comma list, or lo:hi range")
    s.add_argument("--prefix", default="sweep", help="output file prefix")
    s.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GraphError, PipelineError, SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerifyError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
