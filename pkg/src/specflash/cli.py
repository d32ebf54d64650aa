"""Command-line front end: build, search, sweep, and bench workflows.

All knobs live in a JSON config file with strict unknown-key rejection;
command-line flags override individual values.  Exit codes: 0 success,
1 usage/config error, 2 capacity/data error.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

from .array_model import (
    ArrayGeometry,
    CapacityError,
    CostParams,
    cost_report,
    count_reads_dual_bound,
    count_reads_mlc_baseline,
    map_library,
    read_speedup,
)
from .fileio import atomic_write_text
from .hdc import HdcParams
from .matching import MatchConfig, NoiseModel
from .packing import pack_bit_rows
from .pipeline import (
    Library,
    build_library,
    evaluate,
    load_library,
    save_library,
    search,
    search_reports_to_csv,
    search_reports_to_json,
    sweep,
    sweep_grid,
    sweep_rows_to_csv,
    sweep_rows_to_heatmap_json,
    SweepRow,
)
from .spectra import (
    EmptySpectrumError,
    MgfParseError,
    PreprocessConfig,
    dump_binned_json,
    load_binned_json,
    parse_mgf,
    preprocess,
)
from .synth import SynthConfig, make_query_spectra, make_reference_spectra

__all__ = ["main", "entrypoint", "ConfigError", "DEFAULT_CONFIG"]


class ConfigError(ValueError):
    """Bad configuration or usage; maps to exit code 1."""


DEFAULT_CONFIG: dict = {
    "hdc": {"dimension": 8192, "seed": 1},
    "preprocess": {
        "mz_min": 101.0,
        "mz_max": 1500.0,
        "bin_width": 1.0005079,
        "max_peaks": 50,
        "min_intensity_frac": 0.01,
        "intensity_levels": 64,
    },
    "match": {"alpha_pos": 1.5, "alpha_neg": 1.5, "m": 1, "pf": 3, "noise": None},
    "geometry": {"wordlines": 512, "bitlines": 4096, "blocks": 128, "planes": 2},
    "cost": {"t_read_ns": 1000.0, "e_read_pj": 1.0, "z_scale_k": 4.0},
    "paths": {"library": None, "queries": None, "out": None},
    "k": 10,
    "threads": 1,
    "keep_raw": True,
    "synth": {
        "library_size": 1000,
        "num_queries": 50,
        "num_bins": 1400,
        "num_levels": 64,
        "min_peaks": 30,
        "max_peaks": 50,
        "drop_rate": 0.15,
        "add_rate": 0.10,
        "level_jitter": 0.30,
        "data_seed": 1,
    },
    "sweep": {"alphas": [0.5, 1.5, 2.5], "ms": [1, 2, 4, 8, 16], "ns": [2, 3, 4], "trials": 1},
}

_NOISE_SCHEMA = {"sigma_vt": 0.2, "memory_window": 6.5, "seed": 0}


def _merge_section(base: dict, update: dict, path: str, explicit: set[str]) -> None:
    for key, value in update.items():
        dotted = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {dotted}")
        if key == "noise":
            if value is not None:
                if not isinstance(value, dict):
                    raise ConfigError(f"{dotted} must be an object or null")
                merged = dict(_NOISE_SCHEMA)
                for nk, nv in value.items():
                    if nk not in merged:
                        raise ConfigError(f"unknown config key: {dotted}.{nk}")
                    merged[nk] = nv
                base[key] = merged
            else:
                base[key] = None
            explicit.add(dotted)
        elif isinstance(base[key], dict) and base[key] is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"{dotted} must be an object")
            _merge_section(base[key], value, dotted, explicit)
        else:
            base[key] = value
            explicit.add(dotted)


def load_config(path: str | None) -> tuple[dict, set[str]]:
    """Defaults overlaid with the config file; returns (config, explicit keys)."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    explicit: set[str] = set()
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        _merge_section(config, user, "", explicit)
    return config, explicit


def _parse_kv(text: str, what: str) -> dict:
    """Parse 'a=1,b=2.5' (or space-separated) into a dict with JSON-typed values."""
    out = {}
    for item in text.replace(",", " ").split():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--{what}: expected key=value, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _apply_flags(config: dict, explicit: set[str], args: argparse.Namespace) -> None:
    if args.seed is not None:
        config["hdc"]["seed"] = args.seed
        config["synth"]["data_seed"] = args.seed
        explicit.update({"hdc.seed", "synth.data_seed"})
    if args.threads is not None:
        config["threads"] = args.threads
        explicit.add("threads")
    if args.k is not None:
        config["k"] = args.k
        explicit.add("k")
    if args.alpha is not None:
        config["match"]["alpha_pos"] = args.alpha
        config["match"]["alpha_neg"] = args.alpha
        explicit.update({"match.alpha_pos", "match.alpha_neg"})
    if args.m is not None:
        config["match"]["m"] = args.m
        explicit.add("match.m")
    if args.pf is not None:
        config["match"]["pf"] = args.pf
        explicit.add("match.pf")
    if args.noise is not None:
        kv = _parse_kv(args.noise, "noise")
        rename = {"sigma": "sigma_vt", "mw": "memory_window", "seed": "seed"}
        noise = dict(_NOISE_SCHEMA)
        for key, value in kv.items():
            if key not in rename:
                raise ConfigError(f"--noise: unknown key {key!r} (use sigma, mw, seed)")
            noise[rename[key]] = value
        config["match"]["noise"] = noise
        explicit.add("match.noise")
    if args.synth is not None:
        kv = _parse_kv(args.synth, "synth") if args.synth else {}
        for key, value in kv.items():
            if key not in config["synth"]:
                raise ConfigError(f"--synth: unknown key {key!r}")
            config["synth"][key] = value
            explicit.add(f"synth.{key}")
    if args.out is not None:
        config["paths"]["out"] = args.out
        explicit.add("paths.out")


def _build_objects(config: dict):
    """Construct and cross-validate the dataclass views of a config."""
    try:
        pre = PreprocessConfig(**config["preprocess"])
        geometry = ArrayGeometry(
            wordlines=config["geometry"]["wordlines"],
            bitlines_per_block=config["geometry"]["bitlines"],
            blocks_per_plane=config["geometry"]["blocks"],
            planes=config["geometry"]["planes"],
        )
        cost = CostParams(
            t_read=config["cost"]["t_read_ns"] * 1e-9,
            e_read=config["cost"]["e_read_pj"] * 1e-12,
            z_scale=config["cost"]["z_scale_k"],
        )
        noise_cfg = config["match"]["noise"]
        noise = NoiseModel(**noise_cfg) if noise_cfg is not None else None
        synth = SynthConfig(
            **{k: v for k, v in config["synth"].items() if k != "data_seed"}
        )
        if config["k"] < 1 or config["threads"] < 1:
            raise ValueError("k and threads must be >= 1")
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return pre, geometry, cost, noise, synth


def _match_config(config: dict, noise: NoiseModel | None, n: int | None = None) -> MatchConfig:
    try:
        return MatchConfig(
            alpha_pos=config["match"]["alpha_pos"],
            alpha_neg=config["match"]["alpha_neg"],
            m=config["match"]["m"],
            n=config["match"]["pf"] if n is None else n,
            noise=noise,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _require_out(config: dict) -> Path:
    out = config["paths"]["out"]
    if not out:
        raise ConfigError("an output path is required (--out PATH or paths.out)")
    return Path(out)


def _load_queries(path: str, pre: PreprocessConfig, lib: Library):
    """Query spectra from a binned-JSON dump or an MGF file."""
    if str(path).endswith(".json"):
        binned = load_binned_json(path)
    else:
        binned = []
        for s in parse_mgf(path):
            try:
                binned.append(preprocess(s, pre))
            except EmptySpectrumError as exc:
                print(f"skipping {s.id!r}: {exc}", file=sys.stderr)
        if binned and pre.num_bins != lib.params.num_ids:
            raise ValueError(
                f"preprocess config yields {pre.num_bins} bins but the library "
                f"encodes {lib.params.num_ids}"
            )
    if not binned:
        raise ValueError(f"no usable query spectra in {path}")
    return binned


def _check_library_params(config: dict, explicit: set[str], lib: Library) -> None:
    """Explicitly-set hdc/pf values must match the library being searched."""
    if "hdc.dimension" in explicit and config["hdc"]["dimension"] != lib.params.dimension:
        raise ValueError(
            f"dimension mismatch: config requests {config['hdc']['dimension']}, "
            f"library was built with {lib.params.dimension}"
        )
    if "hdc.seed" in explicit and config["hdc"]["seed"] != lib.params.seed:
        raise ValueError(
            f"seed mismatch: config requests {config['hdc']['seed']}, "
            f"library was built with {lib.params.seed}"
        )
    if "match.pf" in explicit and config["match"]["pf"] != lib.pack_n:
        raise ValueError(
            f"packing mismatch: config requests pf={config['match']['pf']}, "
            f"library is packed at n={lib.pack_n}"
        )


# ---------------------------------------------------------------- commands

def cmd_build(config: dict, explicit: set[str], args: argparse.Namespace) -> int:
    pre, geometry, _, _, synth = _build_objects(config)
    out = _require_out(config)
    n = config["match"]["pf"]

    use_synth = args.synth is not None or args.mgf is None
    if use_synth:
        data_seed = config["synth"]["data_seed"]
        refs = make_reference_spectra(synth, data_seed)
        queries = make_query_spectra(refs, synth, data_seed) if synth.num_queries else []
        num_bins, num_levels = synth.num_bins, synth.num_levels
    else:
        refs = []
        for s in parse_mgf(args.mgf):
            try:
                refs.append(preprocess(s, pre))
            except EmptySpectrumError as exc:
                print(f"skipping {s.id!r}: {exc}", file=sys.stderr)
        if not refs:
            raise ValueError(f"no usable spectra in {args.mgf}")
        queries = []
        num_bins, num_levels = pre.num_bins, pre.intensity_levels

    try:
        params = HdcParams(
            dimension=config["hdc"]["dimension"],
            num_ids=num_bins,
            num_levels=num_levels,
            seed=config["hdc"]["seed"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    lib = build_library(refs, params, n, keep_raw=config["keep_raw"])
    layout = map_library(lib.references, geometry)
    paths = save_library(lib, out)
    if queries:
        qpath = out.with_name(out.name + ".queries.json")
        dump_binned_json(queries, qpath)
        paths["queries"] = qpath
    if args.dump_binned:
        dump_binned_json(refs, args.dump_binned)

    strings_used = lib.size * layout.folds_per_hv
    print(f"library: {lib.size} references")
    print(f"dimension: {params.dimension}  packing: n={n}  levels/row: {lib.levels.shape[1]}")
    print(f"folds per hypervector: {layout.folds_per_hv}")
    print(f"strings used: {strings_used} of {geometry.total_strings}")
    for kind, p in paths.items():
        print(f"wrote {kind}: {p}")
    return 0


def cmd_search(config: dict, explicit: set[str], args: argparse.Namespace) -> int:
    pre, _, _, noise, _ = _build_objects(config)
    out = _require_out(config)

    lib_path = args.library or config["paths"]["library"]
    query_path = args.queries or config["paths"]["queries"]
    if not lib_path or not query_path:
        raise ConfigError("search needs a library base path and a query file")

    lib = load_library(lib_path)
    _check_library_params(config, explicit, lib)
    queries = _load_queries(query_path, pre, lib)
    cfg = _match_config(config, noise, n=lib.pack_n)
    if args.oracle and lib.raw_rows is None:
        raise ValueError("--oracle needs a library built with raw hypervectors")

    reports = [
        search(q, lib, cfg, config["k"], threads=config["threads"], with_oracle=args.oracle)
        for q in queries
    ]
    atomic_write_text(out.with_name(out.name + ".csv"), search_reports_to_csv(reports, oracle=args.oracle))
    atomic_write_text(out.with_name(out.name + ".json"), search_reports_to_json(reports))

    agree = sum(r.ranked[0][0] == r.oracle_ranked[0][0] for r in reports) if args.oracle else None
    print(f"searched {len(reports)} queries against {lib.size} references (k={config['k']})")
    if agree is not None:
        print(f"oracle top-1 agreement: {agree}/{len(reports)}")
    print(f"wrote {out.with_name(out.name + '.csv')}")
    print(f"wrote {out.with_name(out.name + '.json')}")
    return 0


def cmd_sweep(config: dict, explicit: set[str], args: argparse.Namespace) -> int:
    pre, _, _, noise, synth = _build_objects(config)
    out = _require_out(config)
    grid = config["sweep"]
    alphas = [args.alpha] if args.alpha is not None else grid["alphas"]
    ms = [args.m] if args.m is not None else grid["ms"]
    ns = [args.pf] if args.pf is not None else grid["ns"]
    if not alphas or not ms or not ns:
        raise ConfigError("sweep grid must not be empty")

    lib_path = args.library or config["paths"]["library"]
    if lib_path and args.synth is None:
        # real-data sweep: rebuild packings from the library's raw rows
        lib = load_library(lib_path)
        _check_library_params(config, explicit, lib)
        if lib.raw_rows is None:
            raise ValueError("sweep needs a library built with raw hypervectors")
        query_path = args.queries or config["paths"]["queries"]
        if not query_path:
            raise ConfigError("sweep over a library needs a query file")
        queries = _load_queries(query_path, pre, lib)
        refs_binned = None
        summaries = _sweep_library(lib, queries, alphas, ms, ns, config, noise)
        rows = _rows_from_summaries(summaries, alphas, ms, ns, lib.params, lib.size)
    else:
        try:
            params = HdcParams(
                dimension=config["hdc"]["dimension"],
                num_ids=synth.num_bins,
                num_levels=synth.num_levels,
                seed=config["hdc"]["seed"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        rows = sweep(
            alphas,
            ms,
            ns,
            params,
            synth,
            config["k"],
            trials=grid["trials"],
            seed=config["synth"]["data_seed"],
            noise=noise,
            threads=config["threads"],
        )

    atomic_write_text(out.with_name(out.name + ".csv"), sweep_rows_to_csv(rows))
    atomic_write_text(out.with_name(out.name + ".heatmap.json"), sweep_rows_to_heatmap_json(rows))
    print(f"sweep: {len(rows)} grid points "
          f"({len(alphas)} alphas x {len(ms)} m values x {len(ns)} packing factors)")
    print(f"wrote {out.with_name(out.name + '.csv')}")
    print(f"wrote {out.with_name(out.name + '.heatmap.json')}")
    return 0


def _sweep_library(lib, queries, alphas, ms, ns, config, noise):
    summaries = []
    for n in ns:
        levels = pack_bit_rows(lib.raw_rows, lib.params.dimension, n)
        repacked = Library(lib.params, n, lib.ids, levels, lib.raw_rows)
        for alpha in alphas:
            for m in ms:
                cfg = MatchConfig(alpha_pos=alpha, alpha_neg=alpha, m=m, n=n, noise=noise)
                summaries.append(
                    evaluate(queries, repacked, cfg, config["k"], threads=config["threads"])
                )
    return summaries


def _rows_from_summaries(summaries, alphas, ms, ns, params, lib_size):
    rows = []
    idx = 0
    for n in ns:
        for alpha in alphas:
            for m in ms:
                s = summaries[idx]
                idx += 1
                dual = count_reads_dual_bound(params.dimension, n, m)
                mlc = count_reads_mlc_baseline(params.dimension, n)
                rows.append(
                    SweepRow(
                        alpha=alpha,
                        m=m,
                        n=n,
                        trials=1,
                        queries_per_trial=s.total_queries,
                        recall_at_1=s.recall_at_1,
                        recall_at_k=s.recall_at_k,
                        identifications=float(s.identification_count),
                        reads_per_query=dual.sensing_reads * lib_size,
                        mlc_reads_per_query=mlc.sensing_reads * lib_size,
                        read_ratio=mlc.sensing_reads / dual.sensing_reads,
                        speedup_formula=read_speedup(m, n),
                    )
                )
    return rows


def cmd_bench(config: dict, explicit: set[str], args: argparse.Namespace) -> int:
    _, geometry, cost, _, synth = _build_objects(config)
    dim = config["hdc"]["dimension"]
    n = config["match"]["pf"]
    m = config["match"]["m"]
    refs = synth.library_size

    dual = count_reads_dual_bound(dim, n, m)
    mlc = count_reads_mlc_baseline(dim, n)
    ratio = mlc.sensing_reads / dual.sensing_reads
    formula = read_speedup(m, n)
    cells = -(-dim // n)
    folds = -(-cells // geometry.wordlines)
    parallel = max(1, geometry.total_strings // folds)
    latency, energy = cost_report(dual, cost, refs, parallel)
    mlc_latency, mlc_energy = cost_report(mlc, cost, refs, parallel)

    print(f"dimension {dim}, packing n={n}, subset m={m}, references {refs}")
    print(f"dual-bound reads/reference: {dual.sensing_reads} "
          f"(wordline activations {dual.wordline_activations})")
    print(f"MLC row-by-row reads/reference: {mlc.sensing_reads}")
    print(f"measured read ratio: {ratio:.4f}")
    print(f"formula speedup m*(2^n-1)/2: {formula:.4f}")
    if cells % m != 0:
        print("note: m does not divide the packed length; "
              "measured ratio deviates from the formula")
    if formula < 1.0:
        print("warning: dual-bound is slower than an SLC single-read at this (m, n)")
    print(f"latency estimate: dual-bound {latency:.6e} s vs MLC {mlc_latency:.6e} s "
          f"({parallel} parallel strings)")
    print(f"energy estimate: dual-bound {energy:.6e} J vs MLC {mlc_energy:.6e} J")
    if config["paths"]["out"]:
        out = _require_out(config)
        payload = {
            "dimension": dim,
            "n": n,
            "m": m,
            "references": refs,
            "dual_bound_reads_per_reference": dual.sensing_reads,
            "mlc_reads_per_reference": mlc.sensing_reads,
            "measured_read_ratio": ratio,
            "speedup_formula": formula,
            "latency_s": latency,
            "mlc_latency_s": mlc_latency,
            "energy_j": energy,
            "mlc_energy_j": mlc_energy,
            "parallel_strings": parallel,
            "z_scale_k": cost.z_scale,
        }
        atomic_write_text(out.with_name(out.name + ".json"), json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"wrote {out.with_name(out.name + '.json')}")
    return 0


# ------------------------------------------------------------------ parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON config file")
    p.add_argument("--seed", type=int, help="encoding and synthetic-data seed")
    p.add_argument("--threads", type=int, help="worker threads for scoring")
    p.add_argument("--k", type=int, help="top-k list size")
    p.add_argument("--alpha", type=float, help="tolerance margin (sets alpha_pos and alpha_neg)")
    p.add_argument("--m", type=int, help="packed dimensions compared per subset")
    p.add_argument("--pf", type=int, help="packing factor n")
    p.add_argument("--noise", metavar="KV", help="noise model, e.g. sigma=0.2,mw=6.5,seed=7")
    p.add_argument("--oracle", action="store_true", help="add exact-Hamming oracle output")
    p.add_argument("--synth", metavar="KV", nargs="?", const="",
                   help="use synthetic data; optional overrides, e.g. library_size=1000")
    p.add_argument("--out", metavar="PATH", help="output base path")
    p.add_argument("--dump-config", action="store_true",
                   help="print the merged config as JSON and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specflash",
                     description="Spectral library search in simulated multi-level NAND strings")
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", help="encode spectra into a packed library")
    p_build.add_argument("mgf", nargs="?", help="MGF file (omit to use synthetic data)")
    p_build.add_argument("--dump-binned", metavar="PATH",
                         help="also dump binned reference spectra as JSON")

    p_search = sub.add_parser("search", help="run queries against a library")
    p_search.add_argument("library", nargs="?", help="library base path")
    p_search.add_argument("queries", nargs="?", help="query file (.mgf or binned .json)")

    p_sweep = sub.add_parser("sweep", help="grid sweep over alpha, m, and packing factor")
    p_sweep.add_argument("library", nargs="?", help="library base path (omit for synthetic)")
    p_sweep.add_argument("queries", nargs="?", help="query file for a library sweep")

    sub.add_parser("bench", help="read-count and cost report")

    for p in (p_build, p_search, p_sweep, sub.choices["bench"]):
        _add_common_flags(p)
    return parser


_COMMANDS = {"build": cmd_build, "search": cmd_search, "sweep": cmd_sweep, "bench": cmd_bench}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        config, explicit = load_config(args.config)
        _apply_flags(config, explicit, args)
        if args.dump_config:
            print(json.dumps(config, indent=2, sort_keys=True))
            return 0
        if not hasattr(args, "mgf"):
            args.mgf = None
        if not hasattr(args, "library"):
            args.library = None
        if not hasattr(args, "queries"):
            args.queries = None
        if not hasattr(args, "dump_binned"):
            args.dump_binned = None
        return _COMMANDS[args.command](config, explicit, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CapacityError, MgfParseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
