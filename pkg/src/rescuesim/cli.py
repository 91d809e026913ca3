"""Command-line front door.

    rescuesim consensus  [--config F] [--seed N] [--out D] [--set key=value ...]
    rescuesim offload    ...
    rescuesim learn      [--scheme dqn|qlearn|greedy] [--slots N]
    rescuesim se-verify  [--samples N]
    rescuesim sweep      --param {pb,block_size,chi,data_size,psi,z} --values a,b,c [--schemes ...]
    rescuesim report     PATH

Exit codes: 0 success, 1 configuration error, 2 invariant violation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import game
from .consensus.committee import ConfigError
from .consensus.tally import InvariantViolation
from .sim import experiments, metrics
from .sim.config import DEFAULTS, load_config, load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2
SWEEP_PARAMS = ("pb", "block_size", "chi", "data_size", "psi", "z")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("RESCUESIM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"RESCUESIM_SEED={env!r} is not an integer") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse value list {text!r}") from None


def _game_params(cfg: dict) -> game.GameParams:
    g = cfg["game"]
    return game.GameParams(**{k: g[k] for k in ("rho", "varpi", "lambda_p", "lambda_c", "lambda_e", "psi", "alpha",
                                                 "x_max", "y_max")})


def _changed(cfg: dict, ref: dict) -> dict:
    """Only the entries of cfg that differ from ref, keeping the nesting."""
    out = {}
    for k, v in cfg.items():
        if isinstance(v, dict) and isinstance(ref.get(k), dict) and k != "deltas":
            sub = _changed(v, ref[k])
            if sub:
                out[k] = sub
        elif ref.get(k) != v:
            out[k] = v
    return out


def _prepare(args) -> tuple[dict, int, Path]:
    seed = _seed(args)
    cfg = load_config(args.config, args.set)
    cfg["seeds"]["master"] = seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, seed, out


def cmd_consensus(args) -> int:
    cfg, seed, out = _prepare(args)
    sc = load_scenario(cfg, seed=seed)
    metrics.write_json(out / "effective_config.json", sc.config)
    from .sim.engine import Simulation
    sim = Simulation(sc)
    m = sim.run()
    metrics.export_metrics(m, out, args.format)
    if sc.consensus["trace"]:
        sim.write_trace(out / "trace.jsonl")
    s = m.summary()
    print(f"heights {s['heights']}  mean rounds {s['mean_rounds']:.3f}  throughput {s['throughput_tps']:.1f} tx/s  "
          f"latency {s['mean_latency']:.3f} s  evidence {s['evidence']}")
    return EXIT_OK


def cmd_offload(args) -> int:
    cfg, seed, out = _prepare(args)
    metrics.write_json(out / "effective_config.json", cfg)
    rows = experiments.offload_sweep(seed=seed, base=cfg)
    metrics.write_rows(out / "offload.csv", metrics.OFFLOAD_COLUMNS, rows)
    for r in rows:
        print(f"chi {r['density']:.3f}  D {r['data_bits'] / 1e6:.0f} Mbit  delay {r['delay_vfc']:.3f} s "
              f"(no VFC {r['delay_ecv']:.3f})  saved {r['saved_energy']:.3f} J")
    return EXIT_OK


def cmd_learn(args) -> int:
    from .learning.dynamic import run_dynamic_game
    cfg, seed, out = _prepare(args)
    learn = cfg["learning"]
    if args.scheme:
        learn["scheme"] = args.scheme
    if args.slots:
        learn["slots"] = args.slots
    metrics.write_json(out / "effective_config.json", cfg)
    p = _game_params(cfg)
    tr = run_dynamic_game(p, learn, learn["scheme"], seed=seed, vehicles=int(learn["vehicles"]),
                          vehicle_state=learn["vehicle_state"], checkpoint_dir=out / "checkpoints",
                          checkpoint_every=int(learn["checkpoint_every"]))
    tr.write_csv(out / "learning.csv")
    eq = game.equilibrium(p)
    tail = int(learn["tail"])
    x, y = tr.tail_mean(tail)
    dev = tr.deviation(eq, tail)
    summary = {"scheme": learn["scheme"], "seed": seed, "slots": len(tr.uav_reward), "x_mean": x, "y_mean": y,
               "x_greedy_mean": float(tr.x_greedy[-tail:].mean()), "y_greedy_mean": float(tr.y_greedy[-tail:].mean()),
               "equilibrium": {"x": eq.x, "y": eq.y}, "deviation": list(dev), "notes": tr.notes}
    metrics.write_json(out / "learning_summary.json", summary)
    print(f"{learn['scheme']}: last {tail} slots mean x {x:.3f} y {y:.3f}; equilibrium x {eq.x:.3f} y {eq.y:.3f}; "
          f"deviation {dev[0]:.3f} / {dev[1]:.3f}")
    return EXIT_OK


def cmd_se_verify(args) -> int:
    cfg, seed, out = _prepare(args)
    metrics.write_json(out / "effective_config.json", cfg)
    g = cfg["game"]
    base = _game_params(cfg)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5E]))
    rows, bad = [], 0
    for _ in range(args.samples):
        p = base.with_(psi=float(rng.uniform(*g["psi_range"])), alpha=float(rng.uniform(*g["alpha_range"])))
        r = game.grid_oracle(p, args.grid, args.grid)
        eq = game.equilibrium(p)
        ok = r.leader_gap <= r.resolution and r.follower_cell_error <= 1.0
        bad += not ok
        rows.append({"psi": p.psi, "alpha": p.alpha, "x": eq.x, "y": eq.y, "grid_y": r.y_hat,
                     "leader_gap": r.leader_gap, "resolution": r.resolution,
                     "follower_cell_error": r.follower_cell_error, "ok": ok})
    cols = ("psi", "alpha", "x", "y", "grid_y", "leader_gap", "resolution", "follower_cell_error", "ok")
    metrics.write_rows(out / "se_verify.csv", cols, rows)
    gaps = [r["leader_gap"] for r in rows]
    cells = [r["follower_cell_error"] for r in rows]
    print(f"{'samples':>10} {'passed':>8} {'max gap':>10} {'bound':>8} {'max cell err':>13}")
    print(f"{len(rows):>10} {len(rows) - bad:>8} {max(gaps, default=0):>10.4f} "
          f"{min((r['resolution'] for r in rows), default=0):>8.3f} {max(cells, default=0):>13.3f}")
    if bad:
        print(f"{bad} draw(s) violate the oracle bound", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, seed, out = _prepare(args)
    metrics.write_json(out / "effective_config.json", cfg)
    values = _floats(args.values)
    # sweeps start from their own setups; only what the user changed is layered on top
    user = _changed(cfg, DEFAULTS)
    user.pop("seeds", None)
    schemes = tuple(s for s in args.schemes.split(",") if s) if args.schemes else None
    seeds = range(seed, seed + args.seeds)
    if args.param == "pb":
        rows = experiments.rounds_vs_pb(values, schemes or ("proposal", "art", "naive"), seeds, base=user)
        cols = metrics.PB_COLUMNS
    elif args.param == "block_size":
        rows = experiments.block_size_sweep([int(v) for v in values], seed, base=user)
        cols = metrics.BLOCK_COLUMNS
    elif args.param == "chi":
        rows = experiments.offload_sweep(densities=values, seed=seed, base=user)
        cols = metrics.OFFLOAD_COLUMNS
    elif args.param == "data_size":
        rows = experiments.offload_sweep(data_sizes=values, seed=seed, base=user)
        cols = metrics.OFFLOAD_COLUMNS
    elif args.param == "psi":
        rows = experiments.psi_sweep(values, base=cfg)
        cols = metrics.PSI_COLUMNS
    else:
        rows = experiments.energy_vs_z([int(v) for v in values], schemes or ("proposal", "naive"), seed, base=user)
        cols = metrics.ENERGY_COLUMNS
    path = metrics.write_rows(out / f"sweep_{args.param}.csv", cols, rows)
    print(f"{len(rows)} rows -> {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.path)
    if not path.exists():
        raise ConfigError(f"nothing to report at {path}")
    if path.is_dir():
        found = False
        for name in ("summary.json", "learning_summary.json"):
            if (path / name).is_file():
                found = True
                print(f"== {name}")
                for k, v in json.loads((path / name).read_text()).items():
                    print(f"{k}: {v}")
        for csv_path in sorted(path.glob("*.csv")):
            found = True
            print(f"== {csv_path.name}: {len(metrics.read_rows(csv_path))} rows")
        if not found:
            raise ConfigError(f"no run outputs found in {path}")
        return EXIT_OK
    if path.suffix == ".jsonl":
        kinds: dict = {}
        with path.open() as fh:
            for line in fh:
                ev = json.loads(line)
                kinds[ev.get("ev", "?")] = kinds.get(ev.get("ev", "?"), 0) + 1
        for k, v in sorted(kinds.items()):
            print(f"{k}: {v}")
        return EXIT_OK
    rows = metrics.read_rows(path)
    print(f"{path.name}: {len(rows)} rows")
    if rows:
        for col in rows[0]:
            try:
                vals = np.array([float(r[col]) for r in rows])
            except ValueError:
                continue
            print(f"  {col}: mean {vals.mean():.6g} min {vals.min():.6g} max {vals.max():.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rescuesim", description="RescueChain simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--seed", type=int, help="master seed (default: $RESCUESIM_SEED or 0)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted config override, repeatable")
        return p

    p = common(sub.add_parser("consensus", help="run a consensus scenario"))
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(fn=cmd_consensus)
    common(sub.add_parser("offload", help="static-equilibrium offloading, VFC versus ECVs")).set_defaults(fn=cmd_offload)
    p = common(sub.add_parser("learn", help="repeated pricing game with learning agents"))
    p.add_argument("--scheme", choices=("dqn", "qlearn", "greedy"))
    p.add_argument("--slots", type=int)
    p.set_defaults(fn=cmd_learn)
    p = common(sub.add_parser("se-verify", help="closed-form equilibrium versus brute-force grid"))
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--grid", type=int, default=1000)
    p.set_defaults(fn=cmd_se_verify)
    p = common(sub.add_parser("sweep", help="vary one parameter and write a figure-family CSV"))
    p.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--schemes", help="comma-separated consensus schemes")
    p.add_argument("--seeds", type=int, default=1, help="number of seeds, starting at --seed")
    p.set_defaults(fn=cmd_sweep)
    p = sub.add_parser("report", help="summarize a run directory, CSV or trace")
    p.add_argument("path")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
