"""`distb` command line: run scenarios, compare modes, sweep node counts,
re-fit calibration, validate ledger exports, and print the embedded tables.

Exit codes: 0 success, 1 config error, 2 simulation error, 3 integrity
failure, 4 I/O or parse error. Metric files are staged and moved into the
output directory only after every file rendered, so a failed invocation
leaves no partial output.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path

from . import blockchain as bc
from .calibration import load_reference_tables
from .config import ScenarioConfig, parse_config
from .errors import ConfigError, DistbError, StorageIntegrityError
from .sdn import flow_table_to_dict
from .simulator import (
    bundle_from_raw,
    measure_bandwidth_under_attack,
    measure_cpu_flooding,
    measure_gas,
    measure_response_time,
    measure_throughput,
    recalibrate,
    run_raw,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SIM = 2
EXIT_INTEGRITY = 3
EXIT_IO = 4

CSV_HEADERS = {
    "throughput.csv": "nodes,distb_kbps,baseline_kbps",
    "bandwidth.csv": "arrival_rate_kps,distb_mbps,baseline_mbps",
    "response.csv": "file_mb,distb_ms,core_ms",
    "gas.csv": "tx_count,gas",
    "cpu.csv": "time_s,cpu_pct",
}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".6g")


def render_csv(name: str, rows) -> str:
    lines = [CSV_HEADERS[name]]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def bundle_to_csvs(bundle) -> dict[str, str]:
    """Render one scenario bundle into the metric CSV schemas.

    A single run covers one mode, so the other mode's column stays empty;
    the full two-column files come from the sweep batteries.
    """
    is_distb = bundle.mode == "distb"

    def split(value):
        return (value, None) if is_distb else (None, value)

    thr = [(n,) + split(v) for n, v in sorted(bundle.throughput_series.items())]
    bw = [(r,) + split(v) for r, v in sorted(bundle.bandwidth_series.items())]
    resp = [(s,) + split(v) for s, v in sorted(bundle.response_series.items())]
    gas = sorted(bundle.gas_series.items())
    cpu = list(bundle.cpu_series)
    return {
        "throughput.csv": render_csv("throughput.csv", thr),
        "bandwidth.csv": render_csv("bandwidth.csv", bw),
        "response.csv": render_csv("response.csv", resp),
        "gas.csv": render_csv("gas.csv", gas),
        "cpu.csv": render_csv("cpu.csv", cpu),
    }


def _apply_env_seed(cfg: ScenarioConfig) -> ScenarioConfig:
    env = os.environ.get("DISTB_SEED")
    if env is None:
        return cfg
    try:
        return cfg.with_(seed=int(env))
    except ValueError as exc:
        raise ConfigError(f"DISTB_SEED must be an integer (got {env!r})") from exc


def _load_config(path: str | None) -> ScenarioConfig:
    cfg = parse_config(path) if path else ScenarioConfig()
    return _apply_env_seed(cfg)


def _write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    """Stage everything, then move into place; no partial output on failure."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".distb-staging-", dir=out_dir))
    try:
        for name, text in files.items():
            (staging / name).write_text(text)
        for name in files:
            os.replace(staging / name, out_dir / name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def _battery_files(cfg: ScenarioConfig) -> tuple[dict[str, str], dict]:
    thr = measure_throughput(cfg)
    bw = measure_bandwidth_under_attack(cfg)
    resp = measure_response_time(cfg)
    gas = measure_gas(cfg)
    cpu = measure_cpu_flooding(cfg)
    files = {
        "throughput.csv": render_csv("throughput.csv", thr),
        "bandwidth.csv": render_csv("bandwidth.csv", bw),
        "response.csv": render_csv("response.csv", resp),
        "gas.csv": render_csv("gas.csv", gas),
        "cpu.csv": render_csv("cpu.csv", cpu),
    }
    series = {"throughput": thr, "bandwidth": bw, "response": resp, "gas": gas, "cpu": cpu}
    return files, series


def _manifest(cfg: ScenarioConfig, bundle, extra: dict | None = None) -> str:
    doc = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "calibration": cfg.resolved_calibration().to_dict(),
        "counters": {k: bundle.counters[k] for k in sorted(bundle.counters)},
        "terminated_early": bundle.terminated_early,
        "raw": {k: bundle.raw[k] for k in sorted(bundle.raw)},
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _flow_tables_json(raw) -> str:
    doc = {
        "controllers": [
            {
                "id": c.id,
                "blocked": sorted(c.blocked),
                "flow_table": flow_table_to_dict(c.flow_table),
            }
            for c in raw.controllers
        ],
        "gateways": [
            {"id": i, "flow_table": flow_table_to_dict(t)} for i, t in enumerate(raw.gateway_tables)
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    raw = run_raw(cfg)
    bundle = bundle_from_raw(cfg, raw)
    files, _ = _battery_files(cfg)
    files["manifest.json"] = _manifest(cfg, bundle)
    files["ledger.ndjson"] = bc.export_ledger(raw.ledger)
    files["flow_tables.json"] = _flow_tables_json(raw)
    _write_outputs(Path(args.out), files)
    print(f"wrote {len(files)} files to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load_config(args.config)
    raw_distb = run_raw(cfg.with_(mode="distb"))
    raw_base = run_raw(cfg.with_(mode="of-baseline"))
    bundle_distb = bundle_from_raw(cfg.with_(mode="distb"), raw_distb)
    bundle_base = bundle_from_raw(cfg.with_(mode="of-baseline"), raw_base)
    files, series = _battery_files(cfg)

    resp = series["response"]
    reduction = [(core - d) / core * 100.0 for _, d, core in resp]
    bw = series["bandwidth"]
    distb_col = [r[1] for r in bw]
    base_col = [r[2] for r in bw]
    main_distb_mbps = bundle_distb.raw["benign_mbps"]
    main_base_mbps = bundle_base.raw["benign_mbps"]
    delta_pct = (
        abs(main_distb_mbps - main_base_mbps) / main_base_mbps * 100.0 if main_base_mbps else 0.0
    )
    summary = {
        "response_reduction_pct_avg": sum(reduction) / len(reduction),
        "bandwidth_drop_pct": {
            "distb": (distb_col[0] - distb_col[-1]) / distb_col[0] * 100.0,
            "baseline": (base_col[0] - base_col[-1]) / base_col[0] * 100.0,
        },
        "main_bandwidth_delta_pct": delta_pct,
        "throughput_ratio": {
            str(n): (d / b if b else None) for n, d, b in series["throughput"]
        },
    }
    files["summary.json"] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    files["manifest.json"] = _manifest(
        cfg,
        bundle_distb,
        extra={"baseline_counters": {k: bundle_base.counters[k] for k in sorted(bundle_base.counters)}},
    )
    files["ledger.ndjson"] = bc.export_ledger(raw_distb.ledger)
    files["flow_tables.json"] = _flow_tables_json(raw_distb)
    _write_outputs(Path(args.out), files)
    print(f"wrote {len(files)} files to {args.out}")
    return EXIT_OK


def _parse_nodes_spec(spec: str) -> list[int]:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError("--nodes expects start:stop:step or a comma list")
        start, stop, step = (int(p) for p in parts)
        if step <= 0 or start < 1 or stop < start:
            raise ConfigError(f"bad --nodes range {spec!r}")
        return list(range(start, stop + 1, step))
    counts = [int(p) for p in spec.split(",") if p]
    if not counts or any(c < 1 for c in counts):
        raise ConfigError(f"bad --nodes list {spec!r}")
    return counts


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    counts = _parse_nodes_spec(args.nodes)
    rows = measure_throughput(cfg, node_counts=counts)
    files = {
        "throughput.csv": render_csv("throughput.csv", rows),
        "manifest.json": json.dumps(
            {"config": cfg.to_dict(), "seed": cfg.seed, "node_counts": counts},
            indent=2,
            sort_keys=True,
        )
        + "\n",
    }
    _write_outputs(Path(args.out), files)
    print(f"wrote {len(files)} files to {args.out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    calib = recalibrate()
    tables = load_reference_tables()
    doc = calib.to_dict()

    gas_t = tables["gas"]
    gas_err = max(
        abs(bc.gas_for(int(n), calib.gas_base, calib.gas_per_tx) - g) / g
        for n, g in zip(gas_t["tx_count"], gas_t["gas"])
    )
    resp_t = tables["response_ms"]
    resp_err = 0.0
    for mode in ("distb", "core"):
        for s, y in zip(resp_t["file_mb"], resp_t[mode]):
            resp_err = max(resp_err, abs(calib.response_ms(mode, float(s)) - y) / y)
    print(f"gas: base={calib.gas_base:.3f} per_tx={calib.gas_per_tx:.3f} max_rel_err={gas_err:.4f}")
    for mode in ("distb", "core"):
        fit = calib.response[mode]
        print(f"response[{mode}]: alpha={fit['alpha']:.3f} beta={fit['beta']:.3f}")
    print(f"response max_rel_err={resp_err:.4f}")
    print(f"cpu: base={calib.cpu_base_pct} kappa={calib.cpu_kappa:.4f} smoothing={calib.cpu_smoothing}")
    out = Path(args.out)
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_validate_chain(args) -> int:
    try:
        text = Path(args.ledger).read_text()
        if not text.strip():
            raise ValueError("empty ledger file")
        ledger = bc.load_ledger(text)
    except OSError:
        raise
    except Exception as exc:
        print(f"cannot parse ledger: {exc}", file=sys.stderr)
        return EXIT_IO
    ok, bad_index = bc.validate_chain(ledger)
    if ok:
        print(f"chain valid ({len(ledger.blocks)} blocks)")
        return EXIT_OK
    print(f"chain INVALID at block {bad_index}")
    return EXIT_INTEGRITY


def cmd_tables(args) -> int:
    print(json.dumps(load_reference_tables(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="distb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the scenario and emit metric CSVs")
    p_run.add_argument("-c", "--config", default=None, help="JSON config file (defaults apply)")
    p_run.add_argument("-o", "--out", required=True, help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run both modes and emit a comparison summary")
    p_cmp.add_argument("-c", "--config", default=None)
    p_cmp.add_argument("-o", "--out", required=True)
    p_cmp.set_defaults(func=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="throughput sweep over node counts")
    p_sweep.add_argument("--nodes", required=True, help="start:stop:step or comma list")
    p_sweep.add_argument("-c", "--config", default=None)
    p_sweep.add_argument("-o", "--out", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_cal = sub.add_parser("calibrate", help="re-fit calibration from the embedded tables")
    p_cal.add_argument("-o", "--out", default="calibration.json")
    p_cal.set_defaults(func=cmd_calibrate)

    p_val = sub.add_parser("validate-chain", help="check a ledger export")
    p_val.add_argument("ledger")
    p_val.set_defaults(func=cmd_validate_chain)

    p_tab = sub.add_parser("tables", help="print the embedded reference tables")
    p_tab.set_defaults(func=cmd_tables)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StorageIntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except DistbError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
