"""Command-line entry point: ``anomedge generate|perturb|detect|sweep|heatmap``.

Every option can also come from a ``key = value`` config file given with
``--config``; command-line flags take precedence over the file. Each command
writes a ``manifest.cfg`` in the same format holding the fully resolved
options, so ``anomedge <command> --config manifest.cfg --out DIR`` re-issues
the run. Outputs are byte-identical across reruns unless ``--timing`` is set.

Errors print one line ``anomedge: error[CODE]: message`` to stderr and exit
with the code's status.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io as _stdio
import itertools
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .als import AlsParams, SolverDivergedError, solve_als
from .datagen import (
    AttributedScenarioBuilder,
    SbmConfig,
    SbmScenarioBuilder,
    Scenario,
    build_attributed_scenario,
    build_sbm_scenario,
    community_labels,
)
from .evaluation import (
    AlsDetector,
    BaselineDetector,
    RandomDetector,
    RecoveryDetector,
    TrialFailedError,
    TrialRecord,
    extract_candidates,
    hit_at_10,
    mrr,
    random_ranking,
    records_to_jsonl,
    sweep,
    topology_error,
)
from .graph import GraphData, GraphValidationError, adjacency_from_laplacian
from .recovery import RecoveryParams, solve_graphical_lasso, solve_recovery

OUTPUT_DIR_ENV = "ANOMEDGE_OUTPUT_DIR"
MANIFEST = "manifest.cfg"
SOLVERS = ("als", "recovery", "baseline", "random")

EXIT_CODES = {
    "USAGE_ERROR": 2,
    "CONFIG_ERROR": 3,
    "PARSE_ERROR": 4,
    "IO_ERROR": 5,
    "DATA_ERROR": 6,
    "SOLVER_ERROR": 7,
    "INTERNAL_ERROR": 1,
}

# marks solver options left for the chosen solver to default
_UNSET = type("Unset", (), {"__repr__": lambda self: "<unset>"})()


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code

    @property
    def exit_status(self) -> int:
        return EXIT_CODES[self.code]


# value codecs ---------------------------------------------------------------


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _optional(conv):
    def parse(s: str):
        return None if s.strip().lower() == "none" else conv(s)

    return parse


def _path(s: str) -> str:
    return str(Path(s).expanduser().resolve())


def _choice(*options):
    def parse(s: str) -> str:
        v = s.strip()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return v

    return parse


def _encode(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return io.fmt_float(v)
    return str(v)


@dataclasses.dataclass(frozen=True)
class Opt:
    name: str
    parse: object
    default: object = None
    help: str = ""
    required: bool = False


def _field_opts(cls, skip=()) -> list[Opt]:
    out = []
    for f in dataclasses.fields(cls):
        if f.name in skip:
            continue
        d = f.default
        ann = str(f.type)
        if "bool" in ann:
            conv = _parse_bool
        elif "int" in ann:
            conv = int
        else:
            conv = float
        if "None" in ann:
            conv = _optional(conv)
        out.append(Opt(f.name, conv, d, f"{cls.__name__}.{f.name}"))
    return out


def _merge_opts(*groups) -> list[Opt]:
    seen = {}
    for g in groups:
        for o in g:
            seen.setdefault(o.name, o)
    return list(seen.values())


SBM_OPTS = [o for o in _field_opts(SbmConfig) if o.name != "seed"] + [
    Opt("k", int, 10, "number of injected anomalies"),
    Opt("seed", int, 0, "master seed"),
]
# shared names (lam, mu, max_iters) default to the chosen solver's own default
SOLVER_OPTS = [
    dataclasses.replace(o, default=_UNSET)
    for o in _merge_opts(_field_opts(AlsParams, skip=("seed",)), _field_opts(RecoveryParams))
]

COMMANDS: dict[str, list[Opt]] = {
    "generate": SBM_OPTS,
    "perturb": [
        Opt("graph", _path, required=True, help="edge list of the clean graph"),
        Opt("features", _path, required=True, help="feature CSV"),
        Opt("k", int, 10, "number of injected anomalies"),
        Opt("seed", int, 0, "injection seed"),
    ],
    "detect": [
        Opt("graph", _path, required=True, help="edge list of the (perturbed) graph"),
        Opt("features", _path, required=True, help="feature CSV"),
        Opt("truth", _optional(_path), None, "ground-truth edge list; enables metrics"),
        Opt("solver", _choice(*SOLVERS), "als", "als | recovery | baseline | random"),
        Opt("seed", int, 0, "ALS initialization / random permutation seed"),
        Opt("convention", _choice("hits", "truth"), "hits", "MRR denominator"),
        Opt("timing", _parse_bool, False, "record wall-clock runtime (breaks byte-identity)"),
    ]
    + SOLVER_OPTS,
    "sweep": [
        Opt("grid", _path, required=True, help="grid file, one [solver] section per method"),
        Opt("family", _choice("sbm", "attributed"), "sbm", "scenario family"),
        Opt("graph", _optional(_path), None, "attributed family: clean edge list"),
        Opt("features", _optional(_path), None, "attributed family: feature CSV"),
        Opt("n_trials", int, 10, "trials per grid point"),
        Opt("master_seed", int, 0, "master seed for trial substreams"),
        Opt("n_jobs", int, 1, "worker processes"),
        Opt("convention", _choice("hits", "truth"), "hits", "MRR denominator"),
        Opt("timing", _parse_bool, False, "record wall-clock runtime (breaks byte-identity)"),
    ]
    + [o for o in SBM_OPTS if o.name != "seed"],
    "heatmap": [
        Opt("original", _path, required=True, help="reference edge list"),
        Opt("estimate", _path, required=True, help="estimated edge list"),
        Opt("features", _optional(_path), None, "feature CSV; adds a graphical-lasso baseline"),
        Opt("beta", float, 0.1, "graphical-lasso sparsity weight"),
        Opt("glasso_rho", float, 1.0, "graphical-lasso ADMM penalty"),
        Opt("threshold", float, 0.5, "edge threshold for the F1 score"),
    ],
}

DESCRIPTIONS = {
    "generate": "sample an SBM scenario and write graph, features, truth and manifest",
    "perturb": "inject anomalies into a user-supplied attributed graph",
    "detect": "rank candidate anomalous edges with one solver",
    "sweep": "grid search over solver parameters on a scenario family",
    "heatmap": "export adjacency heatmaps and topology errors",
}


# argument handling ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("USAGE_ERROR", message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="anomedge", description="anomalous edge detection on attributed graphs")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    for name, opts in COMMANDS.items():
        sp = sub.add_parser(name, help=DESCRIPTIONS[name], description=DESCRIPTIONS[name])
        sp.add_argument("--config", help="key = value file; flags override it")
        sp.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
        for o in opts:
            flag = "--" + o.name.replace("_", "-")
            if o.required:
                default_txt = "required"
            elif o.default is _UNSET:
                default_txt = "solver default"
            else:
                default_txt = f"default {_encode(o.default)}"
            sp.add_argument(flag, dest=o.name, default=argparse.SUPPRESS, help=f"{o.help} ({default_txt})")
    return p


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; an optional leading ``[section]`` header is tolerated."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError("IO_ERROR", f"cannot read config {path}: {exc.strerror}") from None
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",))
    cp.optionxform = str
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise CliError("PARSE_ERROR", f"{path}: {exc}".replace("\n", " ")) from None
    values = {}
    for section in cp.sections():
        values.update(cp[section])
    return {k.replace("-", "_"): v for k, v in values.items()}


def resolve(command: str, ns: argparse.Namespace) -> dict:
    opts = {o.name: o for o in COMMANDS[command]}
    raw = {}
    if getattr(ns, "config", None):
        cfg = read_config(ns.config)
        cfg_cmd = cfg.pop("command", command)
        if cfg_cmd != command:
            raise CliError("CONFIG_ERROR", f"config is for '{cfg_cmd}', not '{command}'")
        unknown = sorted(set(cfg) - set(opts))
        if unknown:
            raise CliError("CONFIG_ERROR", f"unknown config key(s) for {command}: {', '.join(unknown)}")
        raw.update(cfg)
    for name in opts:
        if name in vars(ns):
            raw[name] = getattr(ns, name)
    resolved = {}
    for name, o in opts.items():
        if name in raw:
            try:
                resolved[name] = o.parse(raw[name])
            except ValueError as exc:
                raise CliError("CONFIG_ERROR", f"bad value for {name}: {exc}") from None
        elif o.required:
            raise CliError("USAGE_ERROR", f"missing required option --{name.replace('_', '-')}")
        else:
            resolved[name] = o.default
    return resolved


def output_dir(ns) -> Path:
    out = Path(ns.out or os.environ.get(OUTPUT_DIR_ENV) or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError("IO_ERROR", f"cannot create output directory {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise CliError("IO_ERROR", f"output directory {out} is not writable")
    return out


def write_manifest(out: Path, command: str, values: dict) -> None:
    lines = [f"command = {command}"] + [f"{k} = {_encode(v)}" for k, v in values.items()]
    (out / MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")


# commands ---------------------------------------------------------------------


def _sbm_config(v: dict, seed: int = 0) -> SbmConfig:
    return SbmConfig(
        n_communities=v["n_communities"], n_nodes=v["n_nodes"], p_in=v["p_in"],
        p_out=v["p_out"], n_features=v["n_features"], seed=seed,
    )


def _write_scenario(out: Path, sc: Scenario) -> None:
    io.write_edge_list(out / "clean.tsv", sc.clean_graph)
    io.write_edge_list(out / "perturbed.tsv", sc.graph)
    io.write_features(out / "features.csv", sc.features)
    io.write_truth(out / "truth.tsv", sc.truth)


def cmd_generate(v: dict, out: Path) -> dict:
    cfg = _sbm_config(v, v["seed"])
    sc = build_sbm_scenario(cfg, v["k"], v["seed"])
    _write_scenario(out, sc)
    return v


def cmd_perturb(v: dict, out: Path) -> dict:
    g = io.read_edge_list(v["graph"])
    X = io.read_features(v["features"])
    sc = build_attributed_scenario(g, X, v["k"], v["seed"])
    _write_scenario(out, sc)
    return v


def load_scenario(directory) -> Scenario:
    """Reload the files written by ``generate`` or ``perturb``."""
    d = Path(directory)
    clean = io.read_edge_list(d / "clean.tsv")
    graph = io.read_edge_list(d / "perturbed.tsv")
    X = io.read_features(d / "features.csv")
    truth = io.read_truth(d / "truth.tsv", graph.n_nodes)
    labels = None
    manifest = d / MANIFEST
    if manifest.exists():
        m = read_config(manifest)
        if m.get("command") == "generate":
            labels = community_labels(int(m["n_nodes"]), int(m["n_communities"]))
    return Scenario(graph=graph, clean_graph=clean, features=X, truth=truth, labels=labels)


def _solver_params(solver: str, v: dict):
    """Build the parameter object for ``solver`` from the options it owns."""
    if solver == "random":
        return None
    cls = RecoveryParams if solver == "recovery" else AlsParams
    names = {f.name for f in dataclasses.fields(cls)} - {"seed"}
    kwargs = {k: v[k] for k in names if v.get(k, _UNSET) is not _UNSET}
    return cls(**kwargs)


def _param_items(params) -> dict:
    if params is None:
        return {}
    return {f.name: getattr(params, f.name) for f in dataclasses.fields(params) if f.name != "seed"}


def cmd_detect(v: dict, out: Path) -> dict:
    g = io.read_edge_list(v["graph"])
    X = io.read_features(v["features"])
    try:
        X.check_pairs_with(g)
    except GraphValidationError as exc:
        raise CliError("DATA_ERROR", f"{v['features']}: {exc}") from None
    truth = io.read_truth(v["truth"], g.n_nodes) if v["truth"] else None
    solver = v["solver"]
    params = _solver_params(solver, v)

    t0 = time.perf_counter()
    if solver == "random":
        ranked = random_ranking(g, v["seed"])
    elif solver == "recovery":
        res = solve_recovery(g.laplacian, X.data, params)
        ranked = extract_candidates(res.S, source=solver)
        A_rec = adjacency_from_laplacian(res.R, tol=1e-6)
        io.write_edge_list(out / "recovered_adjacency.tsv", GraphData(A_rec))
    else:
        p = dataclasses.replace(params, seed=v["seed"])
        if solver == "baseline":
            p = dataclasses.replace(p, gamma=0.0)
        res = solve_als(g.laplacian, X.data, p)
        ranked = extract_candidates(res.S, source=solver)
    dt = time.perf_counter() - t0

    io.write_candidates(out / "candidates.tsv", ranked)
    if truth:
        rec = TrialRecord(
            solver=solver, grid_point="detect", seed=v["seed"],
            h_at_10=hit_at_10(ranked, truth), mrr=mrr(ranked, truth, v["convention"]),
            n_candidates=len(ranked), runtime_seconds=dt if v["timing"] else None,
        )
        agg = {"solver": solver, "grid_point": "detect", "n_trials": 1, "h_at_10": rec.h_at_10,
               "mrr": rec.mrr, "aggregate": True}
        (out / "metrics.jsonl").write_text(records_to_jsonl([rec], agg), encoding="utf-8")
        print(f"{solver}: H@10={rec.h_at_10:.1f} MRR={rec.mrr:.1f} candidates={len(ranked)}")
    else:
        if truth is not None:
            print("truth file is empty; metrics skipped", file=sys.stderr)
        print(f"{solver}: candidates={len(ranked)}")

    resolved = {k: v[k] for k in ("graph", "features", "truth", "solver", "seed", "convention", "timing")}
    resolved.update(_param_items(params))
    if solver == "baseline":
        resolved["gamma"] = 0.0
    return resolved


def read_grid(path) -> list[tuple[str, str, dict]]:
    """Grid file: one ``[solver]`` (or ``[solver:tag]``) section per method, comma-separated axes."""
    cfg = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",))
    cfg.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cfg.read_file(fh)
    except OSError as exc:
        raise CliError("IO_ERROR", f"cannot read grid {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise CliError("PARSE_ERROR", f"{path}: {exc}".replace("\n", " ")) from None
    if not cfg.sections():
        raise CliError("CONFIG_ERROR", f"{path}: grid has no [solver] sections")
    solver_opts = {o.name: o for o in SOLVER_OPTS}
    points = []
    for section in cfg.sections():
        solver = section.split(":", 1)[0].strip()
        if solver not in SOLVERS:
            raise CliError("CONFIG_ERROR", f"{path}: unknown solver section [{section}]")
        axes = []
        for key, raw in cfg[section].items():
            key = key.replace("-", "_")
            if key not in solver_opts:
                raise CliError("CONFIG_ERROR", f"{path}: [{section}] unknown parameter {key}")
            vals = [s for s in (x.strip() for x in raw.split(",")) if s]
            if not vals:
                raise CliError("CONFIG_ERROR", f"{path}: [{section}] axis {key} is empty")
            try:
                axes.append((key, [solver_opts[key].parse(x) for x in vals]))
            except ValueError as exc:
                raise CliError("CONFIG_ERROR", f"{path}: [{section}] {key}: {exc}") from None
        combos = itertools.product(*[vals for _, vals in axes]) if axes else [()]
        for idx, combo in enumerate(combos):
            points.append((f"{section}#{idx}", solver, dict(zip([k for k, _ in axes], combo))))
    return points


def _detector(solver: str, params: dict):
    if solver == "random":
        return RandomDetector()
    if solver == "recovery":
        return RecoveryDetector(RecoveryParams(**params))
    if solver == "baseline":
        return BaselineDetector(AlsParams(**params))
    return AlsDetector(AlsParams(**params))


def cmd_sweep(v: dict, out: Path) -> dict:
    points = read_grid(v["grid"])
    try:
        grid = [(pid, _detector(solver, params)) for pid, solver, params in points]
    except (TypeError, ValueError) as exc:
        raise CliError("CONFIG_ERROR", f"{v['grid']}: {exc}") from None
    if v["family"] == "sbm":
        builder = SbmScenarioBuilder(_sbm_config(v), v["k"])
    else:
        if not (v["graph"] and v["features"]):
            raise CliError("USAGE_ERROR", "attributed family needs --graph and --features")
        g = io.read_edge_list(v["graph"])
        X = io.read_features(v["features"])
        builder = AttributedScenarioBuilder(g, X, v["k"])

    res = sweep(grid, builder, v["n_trials"], v["master_seed"], v["convention"], v["n_jobs"], v["timing"])

    lines = []
    table = _stdio.StringIO()
    w = csv.writer(table, lineterminator="\n")
    w.writerow(["point_id", "solver", "params", "h_at_10_mean", "h_at_10_std", "mrr_mean", "mrr_std"])
    for (pid, solver, params), row in zip(points, res.rows):
        s = row.summary
        w.writerow([pid, solver, ";".join(f"{k}={_encode(x)}" for k, x in params.items()),
                    io.fmt_float(s.hit_at_10_mean), io.fmt_float(s.hit_at_10_std),
                    io.fmt_float(s.mrr_mean), io.fmt_float(s.mrr_std)])
        lines.append(records_to_jsonl(s.records, s.aggregate()))
    (out / "sweep.csv").write_text(table.getvalue(), encoding="utf-8")
    (out / "metrics.jsonl").write_text("".join(lines), encoding="utf-8")

    best = _stdio.StringIO()
    bw = csv.writer(best, lineterminator="\n")
    bw.writerow(["metric", "solver", "point_id", "value"])
    by_solver = {}
    for (pid, solver, _), row in zip(points, res.rows):
        by_solver.setdefault(solver, []).append(row)
    for metric, key in (("h_at_10", "hit_at_10_mean"), ("mrr", "mrr_mean")):
        top = res.best(metric)
        bw.writerow([metric, "*", top.point_id, io.fmt_float(getattr(top.summary, key))])
        for solver, rows in by_solver.items():
            b = type(res)(rows).best(metric)
            bw.writerow([metric, solver, b.point_id, io.fmt_float(getattr(b.summary, key))])
    (out / "best.csv").write_text(best.getvalue(), encoding="utf-8")
    print(best.getvalue(), end="")
    return v


def glasso_adjacency(X, beta: float, rho: float) -> np.ndarray:
    """Adjacency read off a graphical-lasso precision estimate: negated off-diagonals, clipped at 0."""
    theta = solve_graphical_lasso(X, beta, rho=rho).sparse_theta
    A = np.maximum(0.0, -(theta + theta.T) / 2.0)
    np.fill_diagonal(A, 0.0)
    return A


def cmd_heatmap(v: dict, out: Path) -> dict:
    A_true = io.read_edge_list(v["original"]).adjacency
    A_est = io.read_edge_list(v["estimate"]).adjacency
    if A_est.shape != A_true.shape:
        raise CliError("DATA_ERROR", f"size mismatch: original {A_true.shape[0]} nodes, estimate {A_est.shape[0]}")
    mats = {"original": A_true, "estimate": A_est}
    if v["features"]:
        X = io.read_features(v["features"])
        if X.n_nodes != A_true.shape[0]:
            raise CliError("DATA_ERROR", f"features have {X.n_nodes} rows, graph has {A_true.shape[0]} nodes")
        mats["glasso"] = glasso_adjacency(X.data, v["beta"], v["glasso_rho"])
    records = []
    for name, M in mats.items():
        io.write_matrix_csv(out / f"{name}.csv", M)
        io.write_pgm(out / f"{name}.pgm", M)
        if name != "original":
            err = topology_error(M, A_true, v["threshold"])
            records.append(json.dumps({"name": name, "threshold": v["threshold"], **err}, sort_keys=True))
            print(f"{name}: frobenius_error={err['frobenius_error']:.4f} edge_f1={err['edge_f1']:.4f}")
    (out / "topology.jsonl").write_text("\n".join(records) + "\n", encoding="utf-8")
    return v


HANDLERS = {
    "generate": cmd_generate,
    "perturb": cmd_perturb,
    "detect": cmd_detect,
    "sweep": cmd_sweep,
    "heatmap": cmd_heatmap,
}


def _classify(exc: BaseException) -> CliError:
    if isinstance(exc, CliError):
        return exc
    if isinstance(exc, io.FormatError):
        return CliError("PARSE_ERROR", str(exc))
    if isinstance(exc, GraphValidationError):
        return CliError("DATA_ERROR", str(exc))
    if isinstance(exc, (SolverDivergedError, TrialFailedError)):
        return CliError("SOLVER_ERROR", str(exc))
    if isinstance(exc, OSError):
        return CliError("IO_ERROR", f"{exc.filename or ''}: {exc.strerror or exc}".lstrip(": "))
    if isinstance(exc, (ValueError, TypeError)):
        return CliError("CONFIG_ERROR", str(exc))
    return CliError("INTERNAL_ERROR", f"{type(exc).__name__}: {exc}")


def main(argv=None) -> int:
    try:
        parser = build_parser()
        ns = parser.parse_args(argv)
        if ns.command is None:
            parser.print_help()
            return EXIT_CODES["USAGE_ERROR"]
        values = resolve(ns.command, ns)
        # validate every parameter bundle before touching the filesystem
        if ns.command in ("generate", "sweep"):
            _sbm_config(values)
        if ns.command == "detect":
            _solver_params(values["solver"], values)
        out = output_dir(ns)
        resolved = HANDLERS[ns.command](values, out)
        write_manifest(out, ns.command, resolved)
        return 0
    except Exception as exc:  # noqa: BLE001 - every failure becomes a coded one-line message
        err = _classify(exc)
        msg = " ".join(str(err).split())
        print(f"anomedge: error[{err.code}]: {msg}", file=sys.stderr)
        return err.exit_status


if __name__ == "__main__":
    sys.exit(main())
