"""Command-line entry point.

Option values come from, in increasing priority: built-in defaults, the
JSON document given by ``--config``, ``GF_<OPTION>`` environment variables
(``GF_SEED``, ``GF_N_MAX``, ...) and explicit flags.

Exit codes: 0 success, 1 a verification criterion failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

from .errors import GrabForestError
from .forest import PlanarTree, ReproductionLaw, parse_law, parse_tree_text
from .grab import ArmVector, draw_conditioned_arms, replica_record, simulate_shape, simulate_terminal
from .rng import make_rng, rng_metadata

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_law_spec(text: str, mode: str = "float") -> ReproductionLaw:
    """``"v:p,..."`` to a validated law; ``mode="rational"`` keeps exact fractions."""
    return parse_law(text, exact=(mode == "rational"))


def parse_tree_spec(text: str) -> PlanarTree:
    return parse_tree_text(text)


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    if isinstance(text, int):
        return [text]
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _int(text) -> int:
    return int(text)


def _float(text) -> float:
    return float(text)


def _str(text) -> str:
    return str(text)


def _flag(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).lower() in ("1", "true", "yes", "on")


# name -> (converter, default, help)
COMMON = {
    "mode": (_str, "float", "arithmetic for the law: float or rational"),
    "out": (_str, None, "output path (stdout when omitted)"),
    "format": (_str, "jsonl", "output format: jsonl or csv"),
    "threads": (_int, 1, "worker processes for replicas (1 = serial)"),
}
RANDOM = {"seed": (_int, None, "64-bit seed (required)"), "reps": (_int, None, "replicas")}

SUBCOMMANDS = {
    "simulate": (
        "run the grabbing system and emit one record per replica",
        {**RANDOM, "arms": (_int_list, None, "arm counts, e.g. 2,0,0"), "mu": (_str, None, "law for random arms"),
         "n": (_int, None, "particles when arms are drawn from --mu"), "full": (_flag, False, "keep labels")},
    ),
    "verify-lemma1": (
        "exact terminal law vs the uniform law on Phi(arms)",
        {"arms": (_int_list, None, "arm counts; omit to check every small vector"),
         "n_max": (_int, 5, "largest n when checking all vectors"),
         "sum_max": (_int, 4, "largest arm total when checking all vectors")},
    ),
    "verify-theorem1": (
        "conditioned i.i.d. arms give the conditioned GW forest",
        {"mu": (_str, None, "law"), "n_max": (_int, 6, "largest n for the exact check"),
         "k": (_int, None, "trees for the Monte Carlo check"), "n": (_int, None, "size for the Monte Carlo check"),
         "seed": (_int, None, "seed (Monte Carlo check only)"), "reps": (_int, 0, "Monte Carlo replicas")},
    ),
    "theorem2": (
        "mean squared deviation of the empirical tree measure",
        {**RANDOM, "mu": (_str, None, "law"), "tree": (_str, "(0)", "tree t"),
         "n": (_int_list, None, "sizes, e.g. 50,200,800"), "threshold": (_float, None, "bound at the largest n")},
    ),
    "pairfact": (
        "joint law of the two leftmost trees vs the product of GW masses",
        {**RANDOM, "mu": (_str, None, "law"), "tree": (_str, "(0)", "first tree"),
         "tree2": (_str, None, "second tree (default: same as --tree)"), "n": (_int_list, None, "sizes")},
    ),
    "kemperman": (
        "first-passage probabilities: formula, killed walk and enumeration",
        {"mu": (_str, None, "law"), "n_max": (_int, 40, "largest n"),
         "normalizer_max": (_int, 10, "largest n for forest enumeration")},
    ),
    "dwass": (
        "tree sizes of a free GW forest vs i.i.d. first-passage times",
        {**RANDOM, "mu": (_str, None, "law"), "k": (_int, 3, "trees"), "cap": (_int, 10**5, "walk budget per tree")},
    ),
    "ratio": (
        "exact ratio P(S_n <= n - ell) / P(S_n <= n)",
        {"mu": (_str, None, "critical aperiodic law"), "n": (_int_list, None, "sizes"), "ell": (_int, 5, "shift"),
         "tol": (_float, 0.1, "bound on |ratio - 1| at the largest n")},
    ),
    "tilt": (
        "exponential tilt to a target mean",
        {"mu": (_str, None, "law"), "target": (_float, None, "target mean")},
    ),
    "sizebias": (
        "size-biased law and the Molloy-Reed sum",
        {"mu": (_str, None, "law")},
    ),
    "configcmp": (
        "configuration-model cluster of a uniform arm vs two joined GW(nu) trees",
        {**RANDOM, "mu": (_str, None, "law"), "n": (_int, 10**5, "vertices per graph"),
         "arms_per_graph": (_int, None, "arms sampled from each graph"), "tol": (_float, 0.02, "TV bound")},
    ),
    "supercrit": (
        "law of k(n) given k(n) >= 1 for a supercritical law",
        {**RANDOM, "mu": (_str, None, "supercritical law"), "n": (_int_list, None, "sizes"),
         "c": (_float, 0.3, "tilted check: target k(n)/n")},
    ),
}
RANDOMIZED = {"simulate", "theorem2", "pairfact", "dwass", "configcmp", "supercrit"}
REQUIRED = {
    "simulate": (),
    "verify-theorem1": ("mu",),
    "theorem2": ("mu", "n", "reps"),
    "pairfact": ("mu", "n", "reps"),
    "kemperman": ("mu",),
    "dwass": ("mu", "reps"),
    "ratio": ("mu", "n"),
    "tilt": ("mu", "target"),
    "sizebias": ("mu",),
    "configcmp": ("mu", "reps"),
    "supercrit": ("mu", "n", "reps"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grabforest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, (help_text, options) in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON document of option values")
        for key, (_, default, text) in {**options, **COMMON}.items():
            flag = "--" + key.replace("_", "-")
            if key == "full":
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None, help=text)
            else:
                shown = f" (default {default})" if default is not None else ""
                p.add_argument(flag, dest=key, default=None, help=text + shown)
    return parser


def resolve_config(command: str, flags: dict, environ=None) -> dict:
    """Merge defaults, ``--config`` file, ``GF_*`` variables and flags; convert types."""
    environ = os.environ if environ is None else environ
    options = {**SUBCOMMANDS[command][1], **COMMON}
    values = {key: default for key, (_, default, _) in options.items()}
    path = flags.get("config") or environ.get("GF_CONFIG")
    if path:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        unknown = sorted(set(doc) - set(options))
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
        values.update(doc)
    for key in options:
        env = environ.get("GF_" + key.upper())
        if env is not None:
            values[key] = env
    for key, value in flags.items():
        if key in options and value is not None:
            values[key] = value
    out = {}
    for key, value in values.items():
        conv = options[key][0]
        try:
            out[key] = None if value is None else conv(value)
        except (TypeError, ValueError):
            raise UsageError(f"bad value for --{key.replace('_', '-')}: {value!r}") from None
    if out["mode"] not in ("float", "rational"):
        raise UsageError("--mode must be float or rational")
    if out["format"] not in ("jsonl", "csv"):
        raise UsageError("--format must be jsonl or csv")
    if out["threads"] < 1:
        raise UsageError("--threads must be at least 1")
    needs_seed = command in RANDOMIZED or (command == "verify-theorem1" and out.get("reps"))
    if needs_seed and out.get("seed") is None:
        raise UsageError(f"{command} is randomized: --seed is required")
    if out.get("seed") is not None and not 0 <= out["seed"] < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    for key in REQUIRED.get(command, ()):
        if out.get(key) is None:
            raise UsageError(f"{command} needs --{key.replace('_', '-')}")
    return out


# ---------------------------------------------------------------------------
# output


def _emit(text: str, cfg: dict) -> None:
    if cfg["out"]:
        path = Path(cfg["out"])
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        sys.stdout.write(text)


def _embedded(cfg: dict) -> dict:
    # the output location is not part of what was computed
    return {key: value for key, value in cfg.items() if key != "out"}


def _emit_report(report, cfg: dict, command: str) -> None:
    report.parameters = {**report.parameters, "config": _embedded(cfg), "command": command}
    if cfg["out"]:
        report.write(cfg["out"], cfg["format"])
    elif cfg["format"] == "csv":
        sys.stdout.write(_csv_header(cfg, report.metadata) + report.to_csv())
    else:
        sys.stdout.write(report.to_json())
    if cfg["out"] and cfg["format"] == "csv":
        path = Path(cfg["out"])
        path.write_text(_csv_header(cfg, report.metadata) + path.read_text())
    for line in report.summary_lines():
        print(line, file=sys.stderr)


def _csv_header(cfg: dict, metadata: dict) -> str:
    return "# " + json.dumps({"config": _embedded(cfg), "metadata": metadata}, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def _law(cfg, mode=None) -> ReproductionLaw:
    return parse_law_spec(cfg["mu"], mode or cfg["mode"])


def cmd_simulate(cfg) -> int:
    if cfg["arms"] is None and (cfg["mu"] is None or cfg["n"] is None):
        raise UsageError("simulate needs --arms, or --mu with --n")
    law = _law(cfg) if cfg["arms"] is None else None
    fixed = ArmVector(tuple(cfg["arms"])) if cfg["arms"] is not None else None
    reps = cfg["reps"] or 1
    records, timings = [], []
    for stream in range(reps):
        rng = make_rng(cfg["seed"], stream)
        arms = fixed if fixed is not None else draw_conditioned_arms(law, cfg["n"], rng)[0]
        start = time.perf_counter_ns()
        result = simulate_terminal(arms, rng) if cfg["full"] else simulate_shape(arms, rng)
        elapsed = time.perf_counter_ns() - start
        record = replica_record(arms, result, cfg["seed"], stream, elapsed)
        timings.append({"stream": stream, "elapsed_ns": record.pop("elapsed_ns")})
        records.append(record)
    header = {"config": _embedded(cfg), "rng": rng_metadata(cfg["seed"]), "command": "simulate"}
    if cfg["format"] == "csv":
        buf = io.StringIO()
        cols = ["seed", "stream", "n", "k", "arms_digest", "shape"]
        if cfg["full"]:
            cols += ["vertex_labels", "edge_labels"]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for r in records:
            writer.writerow([" ".join(map(str, r[c])) if isinstance(r[c], list) else r[c] for c in cols])
        text = "# " + json.dumps(header, sort_keys=True) + "\n" + buf.getvalue()
    else:
        lines = [json.dumps(header, sort_keys=True)] + [json.dumps(r, separators=(",", ":")) for r in records]
        text = "\n".join(lines) + "\n"
    _emit(text, cfg)
    if cfg["out"]:
        meta = Path(cfg["out"]).with_suffix("")
        Path(f"{meta}.meta.jsonl").write_text("".join(json.dumps(t) + "\n" for t in timings))
    print(f"simulate: {reps} replica(s)", file=sys.stderr)
    return EXIT_OK


def cmd_verify_lemma1(cfg) -> int:
    from .harness import lemma1_all, lemma1_check

    if cfg["arms"] is not None:
        report = lemma1_check(ArmVector(tuple(cfg["arms"])))
    else:
        report = lemma1_all(cfg["n_max"], cfg["sum_max"])
    _emit_report(report, cfg, "verify-lemma1")
    if cfg["arms"] is not None and report.passed:
        print(f"uniform over {report.value('states')} states, exact", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_verify_theorem1(cfg) -> int:
    from .harness import theorem1_exact, theorem1_experiment

    law = _law(cfg, "rational")
    report = theorem1_exact(law, cfg["n_max"])
    if cfg["reps"]:
        if cfg["k"] is None or cfg["n"] is None:
            raise UsageError("the Monte Carlo check needs --k and --n")
        mc = theorem1_experiment(law, cfg["k"], cfg["n"], cfg["reps"], cfg["seed"], cfg["threads"])
        report.rows.extend(mc.rows)
        report.criteria.update({f"monte_carlo_{k}": v for k, v in mc.criteria.items()})
        report.metadata = mc.metadata
        report.details["monte_carlo"] = mc.details
    _emit_report(report, cfg, "verify-theorem1")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_theorem2(cfg) -> int:
    from .harness import theorem2_experiment

    report = theorem2_experiment(
        _law(cfg), parse_tree_spec(cfg["tree"]), cfg["n"], cfg["reps"], cfg["seed"], cfg["threads"],
        threshold=cfg["threshold"],
    )
    _emit_report(report, cfg, "theorem2")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_pairfact(cfg) -> int:
    from .harness import pair_factorization_experiment

    t1 = parse_tree_spec(cfg["tree"])
    t2 = parse_tree_spec(cfg["tree2"]) if cfg["tree2"] else t1
    report = pair_factorization_experiment(_law(cfg), t1, t2, cfg["n"], cfg["reps"], cfg["seed"], cfg["threads"])
    _emit_report(report, cfg, "pairfact")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_kemperman(cfg) -> int:
    from .harness import kemperman_check

    report = kemperman_check(_law(cfg), cfg["n_max"], cfg["normalizer_max"])
    _emit_report(report, cfg, "kemperman")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_dwass(cfg) -> int:
    from .harness import dwass_experiment

    report = dwass_experiment(_law(cfg), cfg["k"], cfg["reps"], cfg["seed"], cfg["cap"], threads=cfg["threads"])
    _emit_report(report, cfg, "dwass")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_ratio(cfg) -> int:
    from .harness import ratio_limit_check

    report = ratio_limit_check(_law(cfg), cfg["n"], cfg["ell"], cfg["tol"])
    _emit_report(report, cfg, "ratio")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_tilt(cfg) -> int:
    from .harness import tilt_check

    report = tilt_check(_law(cfg), cfg["target"])
    _emit_report(report, cfg, "tilt")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_sizebias(cfg) -> int:
    from .harness import sizebias_check

    report = sizebias_check(_law(cfg))
    _emit_report(report, cfg, "sizebias")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_configcmp(cfg) -> int:
    from .harness import config_model_cluster_experiment

    report = config_model_cluster_experiment(
        _law(cfg), cfg["n"], cfg["reps"], cfg["seed"], cfg["arms_per_graph"], tol=cfg["tol"], threads=cfg["threads"]
    )
    _emit_report(report, cfg, "configcmp")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_supercrit(cfg) -> int:
    from .harness import supercritical_k_experiment

    report = supercritical_k_experiment(_law(cfg), cfg["n"], cfg["reps"], cfg["seed"], cfg["c"], threads=cfg["threads"])
    _emit_report(report, cfg, "supercrit")
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {
    "simulate": cmd_simulate,
    "verify-lemma1": cmd_verify_lemma1,
    "verify-theorem1": cmd_verify_theorem1,
    "theorem2": cmd_theorem2,
    "pairfact": cmd_pairfact,
    "kemperman": cmd_kemperman,
    "dwass": cmd_dwass,
    "ratio": cmd_ratio,
    "tilt": cmd_tilt,
    "sizebias": cmd_sizebias,
    "configcmp": cmd_configcmp,
    "supercrit": cmd_supercrit,
}


def run(command: str, cfg: dict) -> int:
    return COMMANDS[command](cfg)


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("missing command; choose one of " + ", ".join(SUBCOMMANDS))
        cfg = resolve_config(args.command, vars(args), environ)
        return run(args.command, cfg)
    except UsageError as exc:
        print(f"grabforest: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GrabForestError as exc:
        print(f"grabforest: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
