"""Pipeline driver: each analysis stage is a subcommand.

Every run takes a JSON config (flags override it), writes its artifacts
into the output directory, and records a manifest with parameter values
and SHA-256 hashes of inputs and artifacts. Identical config and seed
produce byte-identical manifests. Exit codes: 0 success, 1 validation
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import cross_validate_stability, elbow_scan, kmeans_fit
from .ingest import DatasetError, VARIABLES, load_dataset
from .matprof import matrix_profile, top_discord, top_motif
from .resample import (
    SegmentSet,
    build_regular_series,
    extract_day_segments,
    extract_week_segments,
    longest_run,
)
from .stats import (
    DegenerateScaleError,
    fidelity_check,
    heatmap_grid,
    scale_segments,
    zscore,
)
from .svgplot import write_heatmap, write_paired_chart, write_panel_grid
from .synth import Archetype, DEFAULT_ARCHETYPES, GapWindow, SynthSpec, THREE_ARCHETYPES, generate
from .warp import WarpConfig

SUBCOMMANDS = (
    "ingest", "resample", "validate", "heatmap", "mp",
    "cluster", "elbow", "crossval", "synth",
)

_SCHEMA_KEYS = {"timestamp", "iob", "cob", "bg"}
_ALLOWED: dict = {
    "input": {"path", "schema", "source_id"},
    "frequency": None,
    "qualify_variable": None,
    "scaling": {"kind", "scope"},
    "mp": {"m", "exclusion_radius", "variable"},
    "cluster": {
        "k", "k_range", "variables", "band_radius", "band_sweep", "seed",
        "n_init", "max_iter", "tol", "barycenter_max_iter",
    },
    "crossval": {"n_folds", "threshold"},
    "validate": {"variables", "groupings"},
    "synth": {
        "seed", "days", "start_date", "interval_minutes", "archetypes",
        "archetype_labels", "noise_std", "weekday_effect", "seasonal_drift",
        "time_jitter_minutes", "gap_windows", "utc_offsets",
        "omit_offset_stride", "motif_week_starts", "discord_week_start",
    },
    "out_dir": None,
}


class UsageError(ValueError):
    pass


def _check_keys(config: dict) -> None:
    for key, value in config.items():
        if key not in _ALLOWED:
            raise UsageError(f"unknown config key {key!r}")
        allowed = _ALLOWED[key]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise UsageError(f"config key {key!r} must be an object")
        for sub in value:
            if sub not in allowed:
                raise UsageError(f"unknown config key {key}.{sub}")
    schema = config.get("input", {}).get("schema", {})
    for sub in schema:
        if sub not in _SCHEMA_KEYS:
            raise UsageError(f"unknown config key input.schema.{sub}")


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        config = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from None
    if not isinstance(config, dict):
        raise UsageError("config must be a JSON object")
    _check_keys(config)
    return config


def _apply_overrides(config: dict, args: argparse.Namespace) -> dict:
    if args.out is not None:
        config["out_dir"] = args.out
    if args.seed is not None:
        config.setdefault("cluster", {})["seed"] = args.seed
        config.setdefault("synth", {})["seed"] = args.seed
    if args.k is not None:
        config.setdefault("cluster", {})["k"] = args.k
    if args.m is not None:
        config.setdefault("mp", {})["m"] = args.m
    if args.frequency is not None:
        config["frequency"] = args.frequency
    if args.n_folds is not None:
        config.setdefault("crossval", {})["n_folds"] = args.n_folds
    if args.band_radius is not None:
        config.setdefault("cluster", {})["band_radius"] = args.band_radius
    if args.variables is not None:
        names = [v.strip() for v in args.variables.split(",") if v.strip()]
        config.setdefault("cluster", {})["variables"] = names
    return config


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> Path:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def _write_manifest(
    out_dir: Path, subcommand: str, parameters: dict,
    inputs: list[Path], artifacts: list[Path],
) -> Path:
    manifest = {
        "tool": "aidmine",
        "version": __version__,
        "subcommand": subcommand,
        "parameters": parameters,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "artifacts": {p.name: _sha256(p) for p in artifacts},
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    }
    return _write_json(out_dir / "manifest.json", manifest)


def _effective(config: dict) -> dict:
    # The manifest must not depend on where artifacts land.
    return {k: v for k, v in config.items() if k != "out_dir"}


def _input_series(config: dict):
    inp = config.get("input")
    if not inp or "path" not in inp:
        raise UsageError("config needs input.path for this subcommand")
    schema = inp.get("schema") or {"timestamp": "timestamp", "iob": "iob", "cob": "cob", "bg": "bg"}
    return load_dataset(inp["path"], schema, source_id=inp.get("source_id"))


def _regular(config: dict, frequency: str | None = None) -> tuple:
    series, report = _input_series(config)
    freq = frequency or config.get("frequency", "hourly")
    qualify = config.get("qualify_variable", "bg")
    return series, report, build_regular_series(series, freq, qualify_variable=qualify)


def _segments(config: dict) -> tuple:
    freq = config.get("frequency", "hourly")
    series, report, regular = _regular(config)
    if freq == "hourly":
        segments = extract_day_segments(regular)
    else:
        segments = extract_week_segments(regular)
    if len(segments) == 0:
        raise UsageError("no qualified segments available for clustering")
    return series, regular, segments


def _segment_rows(segments: SegmentSet) -> tuple[list[str], list[dict]]:
    length = segments.segment_length
    fields = ["date", "month", "weekday", "variable"] + [f"c{i}" for i in range(length)]
    rows = []
    for var in segments.variables:
        block = segments.data[var]
        for i, tag in enumerate(segments.tags):
            row = {"date": tag.date, "month": tag.month, "weekday": tag.weekday, "variable": var}
            row.update({f"c{j}": block[i, j] for j in range(length)})
            rows.append(row)
    return fields, rows


def _warp_config(cluster_cfg: dict) -> WarpConfig:
    return WarpConfig(band_radius=cluster_cfg.get("band_radius"))


def _synth_spec(config: dict) -> SynthSpec:
    cfg = dict(config.get("synth") or {})
    arch = cfg.pop("archetypes", None)
    if arch is None or arch == "two":
        archetypes = DEFAULT_ARCHETYPES
    elif arch == "three":
        archetypes = THREE_ARCHETYPES
    else:
        archetypes = tuple(Archetype(**a) for a in arch)
    gaps = tuple(GapWindow(**g) for g in cfg.pop("gap_windows", ()))
    offsets = tuple((int(a), int(b)) for a, b in cfg.pop("utc_offsets", ((0, 0),)))
    labels = cfg.pop("archetype_labels", None)
    motif = cfg.pop("motif_week_starts", None)
    return SynthSpec(
        archetypes=archetypes,
        gap_windows=gaps,
        utc_offsets=offsets,
        archetype_labels=tuple(labels) if labels is not None else None,
        motif_week_starts=tuple(motif) if motif is not None else None,
        **cfg,
    )


def _cmd_synth(config: dict, out_dir: Path) -> tuple[int, list[Path], list[Path]]:
    spec = _synth_spec(config)
    result = generate(spec, out_dir / "synthetic.csv", out_dir / "ground_truth.json")
    return 0, [], [result.csv_path, result.truth_path]


def _cmd_ingest(config: dict, out_dir: Path) -> tuple[int, list[Path], list[Path]]:
    series, report = _input_series(config)
    rows = [
        {
            "timestamp": inst.isoformat(),
            **{
                v: ("" if np.isnan(series.values[v][i]) else series.values[v][i])
                for v in VARIABLES
            },
        }
        for i, inst in enumerate(series.instants())
    ]
    uniform = _write_csv(out_dir / "uniform.csv", ["timestamp", *VARIABLES], rows)
    rep = _write_json(out_dir / "load_report.json", report.to_dict())
    return 0, [Path(report.path)], [uniform, rep]


def _cmd_resample(config: dict, out_dir: Path) -> tuple[int, list[Path], list[Path]]:
    freq = config.get("frequency", "hourly")
    series, report, regular = _regular(config)
    bins_csv = _write_csv(
        out_dir / f"regular_{freq}.csv",
        ["variable", "bin_start", "mean", "min", "max", "std", "count"],
        regular.to_rows(),
    )
    bins_json = _write_json(out_dir / f"regular_{freq}.json", regular.to_dict())
    segments = extract_day_segments(regular) if freq == "hourly" else extract_week_segments(regular)
    fields, rows = _segment_rows(segments)
    seg_csv = _write_csv(out_dir / f"segments_{segments.kind}.csv", fields, rows)
    seg_json = _write_json(out_dir / f"segments_{segments.kind}.json", segments.to_dict())
    summary = _write_json(
        out_dir / "resample_summary.json",
        {
            "frequency": freq,
            "qualified_days": [str(d) for d in np.datetime_as_string(
                regular.qualified_days.astype("datetime64[us]"), unit="D"
            )] if len(regular.qualified_days) else [],
            "excluded_bin_count": int(len(regular.excluded_bins)),
            "segments": len(segments),
            "segments_skipped_incomplete": segments.skipped_incomplete,
            "load_report": report.to_dict(),
        },
    )
    return 0, [Path(report.path)], [bins_csv, bins_json, seg_csv, seg_json, summary]


def _cmd_validate(config: dict, out_dir: Path) -> tuple[int, list[Path], list[Path]]:
    vcfg = config.get("validate") or {}
    variables = vcfg.get("variables", list(VARIABLES))
    groupings = vcfg.get("groupings", ["hour", "weekday", "month", "year"])
    series, report, regular = _regular(config, frequency="hourly")
    results = {}
    passed = True
    for var in variables:
        rep = fidelity_check(series, regular, var, groupings=groupings)
        results[var] = rep.to_dict()
        passed = passed and rep.passed
    artifact = _write_json(
        out_dir / "fidelity_report.json", {"passed": passed, "variables": results}
    )
    if not passed:
        print("validation failed: group-mean ordering changed by resampling", file=sys.stderr)
    return (0 if passed else 1), [Path(report.path)], [artifact]


def _cmd_heatmap(config: dict, out_dir: Path) -> tuple[int, list[Path], list[Path]]:
    series, report, regular = _regular(config, frequency="daily")
    artifacts = []
    months = [str(m) for m in range(1, 13)]
    weekdays = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]
    for var in regular.variables():
        grid = heatmap_grid(regular, var)
        artifacts.append(
            _write_csv(
                out_dir / f"heatmap_{var}.csv",
                ["weekday", "month", "value", "count"],
                grid.to_rows(),
            )
        )
        artifacts.append(
            write_heatmap(
                out_dir / f"heatmap_{var}.svg", grid.cells, weekdays, months,
                f"{var} daily means by weekday and month",
            )
        )
    return 0, [Path(report.path)], artifacts


def _cmd_mp(config: dict, out_dir: Path) -> tuple[int, list[Path], list[Path]]:
    mp_cfg = config.get("mp") or {}
    m = int(mp_cfg.get("m", 7))
    variable = mp_cfg.get("variable", "iob")
    series, report, regular = _regular(config, frequency="daily")
    run = longest_run(regular)
    vb = run.bins.get(variable)
    if vb is None or len(vb) == 0:
        raise UsageError(f"no qualified daily data for variable {variable!r}")
    try:
        values, _ = zscore(vb.mean)
    except DegenerateScaleError:
        print("validation failed: constant series, matrix profile is meaningless", file=sys.stderr)
        return 1, [Path(report.path)], []
    result = matrix_profile(values, m, mp_cfg.get("exclusion_radius"))
    motif = top_motif(result)
    discord = top_discord(result)
    rows = [
        {"position": i, "profile": result.profile[i], "neighbor": int(result.indices[i])}
        for i in range(len(result))
    ]
    prof_csv = _write_csv(out_dir / f"matrix_profile_{variable}.csv", ["position", "profile", "neighbor"], rows)
    summary = _write_json(
        out_dir / f"mp_summary_{variable}.json",
        {
            "variable": variable,
            "m": m,
            "exclusion_radius": result.exclusion_radius,
            "series_length": int(len(vb)),
            "profile_length": len(result),
            "top_motif": {"index_a": motif.index_a, "index_b": motif.index_b, "distance": motif.distance},
            "top_discord": {"index": discord.index, "distance": discord.distance},
            "run_start": str(np.datetime_as_string(run.qualified_days[:1].astype("datetime64[us]"), unit="D")[0]),
        },
    )
    svg = write_paired_chart(
        out_dir / f"matrix_profile_{variable}.svg",
        {variable: values},
        {"profile": result.profile},
        f"{variable} daily means (z-scored), longest run of {len(vb)} days",
        f"matrix profile, m={m}",
    )
    return 0, [Path(report.path)], [prof_csv, summary, svg]


def _cluster_inputs(config: dict):
    ccfg = dict(config.get("cluster") or {})
    series, regular, segments = _segments(config)
    scaling = config.get("scaling") or {}
    scaled, params = scale_segments(
        segments, kind=scaling.get("kind", "minmax"), scope=scaling.get("scope", "global")
    )
    variables = tuple(ccfg.get("variables", scaled.variables))
    return ccfg, scaled, variables


def _cmd_cluster(config: dict, out_dir: Path) -> tuple[int, list[Path], list[Path]]:
    ccfg, scaled, variables = _cluster_inputs(config)
    model = kmeans_fit(
        scaled,
        int(ccfg.get("k", 2)),
        variables=variables,
        config=_warp_config(ccfg),
        seed=int(ccfg.get("seed", 0)),
        n_init=int(ccfg.get("n_init", 5)),
        max_iter=int(ccfg.get("max_iter", 50)),
        tol=float(ccfg.get("tol", 1e-6)),
        barycenter_max_iter=int(ccfg.get("barycenter_max_iter", 10)),
    )
    artifacts = [
        _write_json(
            out_dir / "cluster_model.json",
            {**model.to_dict(), "segment_dates": [t.date for t in scaled.tags]},
        )
    ]
    bary_rows = []
    for c, bary in enumerate(model.barycenters):
        for vi, var in enumerate(variables):
            row = {"cluster": c, "variable": var}
            row.update({f"c{j}": bary[vi, j] for j in range(bary.shape[1])})
            bary_rows.append(row)
    length = model.barycenters[0].shape[1]
    artifacts.append(
        _write_csv(
            out_dir / "barycenters.csv",
            ["cluster", "variable"] + [f"c{j}" for j in range(length)],
            bary_rows,
        )
    )
    for c, bary in enumerate(model.barycenters):
        members = int(np.count_nonzero(model.assignments == c))
        artifacts.append(
            write_panel_grid(
                out_dir / f"barycenter_cluster{c}.svg",
                [(
                    f"cluster {c} ({members} segments)",
                    {var: bary[vi] for vi, var in enumerate(variables)},
                )],
                columns=1,
            )
        )
    # The useful band radius is data-dependent, so a sweep reports
    # silhouette per radius instead of fixing one.
    sweep = ccfg.get("band_sweep")
    if sweep:
        rows = []
        for radius in sweep:
            swept = kmeans_fit(
                scaled,
                int(ccfg.get("k", 2)),
                variables=variables,
                config=WarpConfig(band_radius=radius),
                seed=int(ccfg.get("seed", 0)),
                n_init=int(ccfg.get("n_init", 5)),
                max_iter=int(ccfg.get("max_iter", 50)),
                tol=float(ccfg.get("tol", 1e-6)),
                barycenter_max_iter=int(ccfg.get("barycenter_max_iter", 10)),
            )
            rows.append(
                {
                    "band_radius": "" if radius is None else radius,
                    "inertia": swept.inertia,
                    "silhouette": swept.silhouette,
                }
            )
        artifacts.append(
            _write_csv(out_dir / "band_sweep.csv", ["band_radius", "inertia", "silhouette"], rows)
        )
    inp = Path(config["input"]["path"])
    return 0, [inp], artifacts


def _cmd_elbow(config: dict, out_dir: Path) -> tuple[int, list[Path], list[Path]]:
    ccfg, scaled, variables = _cluster_inputs(config)
    k_range = ccfg.get("k_range", [1, 2, 3, 4, 5, 6])
    if isinstance(k_range, list) and len(k_range) == 2 and k_range[0] + 1 < k_range[1]:
        ks = list(range(int(k_range[0]), int(k_range[1]) + 1))
    else:
        ks = [int(k) for k in k_range]
    ks = [k for k in ks if 1 <= k <= len(scaled)]
    result = elbow_scan(
        scaled.to_matrix(variables),
        ks,
        config=_warp_config(ccfg),
        seed=int(ccfg.get("seed", 0)),
        n_init=int(ccfg.get("n_init", 5)),
        barycenter_max_iter=int(ccfg.get("barycenter_max_iter", 10)),
    )
    table = _write_csv(out_dir / "elbow.csv", ["k", "inertia", "silhouette"], result.to_rows())
    summary = _write_json(out_dir / "elbow_summary.json", {"knee": result.knee, "points": result.to_rows()})
    inp = Path(config["input"]["path"])
    return 0, [inp], [table, summary]


def _cmd_crossval(config: dict, out_dir: Path) -> tuple[int, list[Path], list[Path]]:
    ccfg, scaled, variables = _cluster_inputs(config)
    xcfg = config.get("crossval") or {}
    report = cross_validate_stability(
        scaled.to_matrix(variables),
        int(ccfg.get("k", 2)),
        config=_warp_config(ccfg),
        n_folds=int(xcfg.get("n_folds", 11)),
        seed=int(ccfg.get("seed", 0)),
        threshold=float(xcfg.get("threshold", 0.5)),
        n_init=int(ccfg.get("n_init", 5)),
        barycenter_max_iter=int(ccfg.get("barycenter_max_iter", 10)),
    )
    artifact = _write_json(out_dir / "stability_report.json", report.to_dict())
    if not report.stable:
        print(
            f"validation failed: clustering unstable (ratio {report.max_ratio:.3f} "
            f">= {report.threshold})",
            file=sys.stderr,
        )
    inp = Path(config["input"]["path"])
    return (0 if report.stable else 1), [inp], [artifact]


_HANDLERS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "resample": _cmd_resample,
    "validate": _cmd_validate,
    "heatmap": _cmd_heatmap,
    "mp": _cmd_mp,
    "cluster": _cmd_cluster,
    "elbow": _cmd_elbow,
    "crossval": _cmd_crossval,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aidmine",
        description="Temporal pattern mining for automated insulin delivery logs",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--m", type=int, default=None)
        p.add_argument("--frequency", choices=["hourly", "daily"], default=None)
        p.add_argument("--n-folds", type=int, default=None)
        p.add_argument("--band-radius", type=int, default=None)
        p.add_argument("--variables", default=None, help="comma-separated variable names")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _apply_overrides(_load_config(args.config), args)
        out_dir = Path(config.get("out_dir", "out"))
        out_dir.mkdir(parents=True, exist_ok=True)
        code, inputs, artifacts = _HANDLERS[args.subcommand](config, out_dir)
        _write_manifest(out_dir, args.subcommand, _effective(config), inputs, artifacts)
        return code
    except (UsageError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
