"""Command-line scenario runner.

Config files are INI-style::

    [scenario]
    scenario = custom
    trials = 20
    iterations = 1500
    seed = 3
    dimension = 3
    graph = my_graph.txt        ; optional, Laplacian rows
    events = 0@200              ; agent@iteration, comma separated

    [variant heavy-ball]
    form = factored
    left = accelerated(zeta=0.1, k_i=1.1)
    optimizer = first_order(alpha=0.1, beta=0.8, gamma=0)
    right = pi(k_p=1, k_i=0.5, zeta=0.95)

    [variant plain]
    form = general
    optimizer = gradient(0.25)
    estimator = series(p, p)
"""

from __future__ import annotations

import argparse
import ast
import configparser
import logging
import sys
from pathlib import Path

from . import blocks as bl
from . import engine as en
from . import scenarios as sc
from .graph import GraphError, load_graph

log = logging.getLogger("distlab")

ESTIMATORS = {
    "p": bl.p_estimator,
    "accelerated": bl.accelerated_estimator,
    "pi": bl.pi_estimator,
    "series": bl.series_estimator,
}
OPTIMIZERS = {
    "gradient": bl.gradient_method,
    "first_order": bl.general_first_order,
    "general_first_order": bl.general_first_order,
}
OVERRIDABLE = {"scenario", "trials", "iterations", "seed"}


class ConfigError(ValueError):
    pass


def _literal(node, field):
    try:
        value = ast.literal_eval(node)
    except ValueError:
        raise ConfigError(f"{field}: arguments must be numeric literals or nested estimators") from None
    if not isinstance(value, (int, float)):
        raise ConfigError(f"{field}: argument {value!r} is not a number")
    return value


def _build(node, table, field):
    if isinstance(node, ast.Name):
        node = ast.Call(func=node, args=[], keywords=[])
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
        raise ConfigError(f"{field}: expected a call such as gradient(alpha=0.25)")
    name = node.func.id.lower()
    if name not in table:
        raise ConfigError(f"{field}: unknown kind {name!r}; choose from {', '.join(sorted(table))}")
    nested = table is ESTIMATORS and name == "series"
    conv = (lambda n: _build(n, ESTIMATORS, field)) if nested else (lambda n: _literal(n, field))
    args = [conv(a) for a in node.args]
    kwargs = {kw.arg: conv(kw.value) for kw in node.keywords}
    try:
        return table[name](*args, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{field}: {exc}") from None


def parse_estimator(text: str, field: str = "estimator") -> bl.EstimatorSpec:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise ConfigError(f"{field}: cannot parse {text!r}") from None
    return _build(tree.body, ESTIMATORS, field)


def parse_optimizer(text: str, field: str = "optimizer") -> bl.OptimizerSpec:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise ConfigError(f"{field}: cannot parse {text!r}") from None
    return _build(tree.body, OPTIMIZERS, field)


def parse_events(text: str) -> list[en.NetworkEvent]:
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            agent, it = item.split("@")
            out.append(en.NetworkEvent(int(it), int(agent)))
        except ValueError:
            raise ConfigError(f"events: {item!r} is not of the form agent@iteration") from None
    return out


def _int(section, key, default):
    try:
        return section.getint(key, fallback=default)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {section.get(key)!r}") from None


def _variant(name: str, sec) -> sc.Variant:
    form = sec.get("form", "").strip().lower()
    try:
        if form == "general":
            return sc.Variant(name, en.General(
                parse_optimizer(sec["optimizer"], f"{name}.optimizer"),
                parse_estimator(sec["estimator"], f"{name}.estimator"),
            ))
        if form == "factored":
            return sc.Variant(name, en.Factored(
                parse_estimator(sec["left"], f"{name}.left"),
                parse_optimizer(sec["optimizer"], f"{name}.optimizer"),
                parse_estimator(sec["right"], f"{name}.right"),
            ))
    except KeyError as exc:
        raise ConfigError(f"{name}.{exc.args[0]}: required for form {form!r}") from None
    raise ConfigError(f"{name}.form: expected 'general' or 'factored', got {form!r}")


def load_config(path: str | Path, scenario: str | None = None) -> sc.ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    top = parser["scenario"] if parser.has_section("scenario") else parser[parser.default_section]
    name = scenario or top.get("scenario", "custom")
    variant_sections = [s for s in parser.sections() if s.startswith("variant")]

    if name in sc.PRESETS:
        extra = (set(top) - OVERRIDABLE) | set(variant_sections)
        if extra:
            raise ConfigError(
                f"{', '.join(sorted(extra))}: preset {name} only accepts trials, iterations and seed"
            )
        return sc.preset(name, _int(top, "trials", None), _int(top, "iterations", None), _int(top, "seed", 0))
    if name != "custom":
        raise ConfigError(f"scenario: unknown scenario {name!r}")

    cfg = sc.ScenarioConfig(
        "custom",
        trials=_int(top, "trials", sc.DEFAULT_TRIALS),
        iterations=_int(top, "iterations", 1000),
        seed=_int(top, "seed", 0),
        dimension=_int(top, "dimension", sc.DIMENSION),
        events=parse_events(top.get("events", "")),
        variants=[_variant(s.split(None, 1)[1] if " " in s else s, parser[s]) for s in variant_sections],
    )
    if "graph" in top:
        gpath = Path(top["graph"])
        if not gpath.is_absolute():
            gpath = Path(path).parent / gpath
        cfg.graph = load_graph(gpath)
    return cfg


def make_config(args) -> sc.ScenarioConfig:
    if args.config:
        cfg = load_config(args.config, args.scenario)
    elif args.scenario in sc.PRESETS:
        cfg = sc.preset(args.scenario)
    else:
        raise ConfigError("config: the custom scenario needs --config FILE")
    if args.scenario and cfg.scenario != args.scenario:
        raise ConfigError(f"scenario: --scenario {args.scenario} disagrees with config ({cfg.scenario})")
    if args.trials is not None:
        cfg.trials = args.trials
    if args.iters is not None:
        cfg.iterations = args.iters
    if args.seed is not None:
        cfg.seed = args.seed
    if args.graph_file:
        if cfg.scenario != "custom":
            raise ConfigError("graph-file: presets run on their fixed graph; use the custom scenario")
        cfg.graph = load_graph(args.graph_file)
    cfg.validate()
    return cfg


def summarize(result: sc.ScenarioResult, tol: float = 1e-8) -> str:
    lines = [f"{'variant':<14}{'trials':>8}{'final mean error':>20}{'iters to ' + format(tol, 'g'):>18}"]
    for m in result.means:
        k = m.first_below(tol)
        lines.append(
            f"{m.meta['variant']:<14}{result.config.trials:>8}{m.e_total[-1]:>20.3e}{'-' if k is None else k:>18}"
        )
    return "\n".join(lines)


def run(args) -> int:
    cfg = make_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %s: %d trials x %d iterations, %d variants",
             cfg.scenario, cfg.trials, cfg.iterations, len(cfg.variants))
    result = sc.run_scenario(cfg, workers=args.workers)
    rows = sc.result_rows(result)
    want_csv = args.csv or not args.plot
    if want_csv:
        path = out / f"{cfg.scenario}.csv"
        sc.emit_csv(rows, path)
        log.info("wrote %s", path)
    if args.plot:
        from .plotting import emit_plot

        path = out / f"{cfg.scenario}.svg"
        emit_plot(rows, path, metrics=cfg.metrics, title=cfg.scenario)
        log.info("wrote %s", path)
    print(summarize(result))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="distlab", description="Distributed optimization experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a preset or custom scenario")
    r.add_argument("--scenario", choices=[*sc.PRESETS, "custom"])
    r.add_argument("--config", help="INI scenario file")
    r.add_argument("--trials", type=int)
    r.add_argument("--iters", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="out", help="output directory (default: out)")
    r.add_argument("--graph-file", help="Laplacian matrix, whitespace-separated rows (custom only)")
    r.add_argument("--csv", action="store_true", help="write <out>/<scenario>.csv")
    r.add_argument("--plot", action="store_true", help="write <out>/<scenario>.svg")
    r.add_argument("--workers", type=int, default=1, help="parallel trial processes")
    r.add_argument("-v", "--verbose", action="store_true")
    r.set_defaults(func=run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.scenario is None and args.config is None:
        print("distlab: error: give --scenario or --config", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, GraphError, en.AlgorithmError, ValueError) as exc:
        print(f"distlab: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"distlab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
