"""Command-line orchestration: calc, trace, wave run, probe, verify-commutant,
report, and the end-to-end pipeline.

Exit codes: 0 success, 1 assertion/verdict failure, 2 configuration error.
Every pipeline run writes a manifest with the config hash, per-stage output
checksums, and wall-clock times; deterministic stages reproduce identical
checksums on identical configs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .escape import run_commutant_check
from .metric import PhasePoint
from .orders import (
    FlowoutCompositionError,
    PairOrder,
    Side,
    bootstrap_schedule,
    bounded_diag_flowout,
    bounded_gu,
    bounded_one_sided,
    compose_au,
    compose_flowout,
    elliptic_window,
    embed_lambda0,
    hyperbolic_window,
    include_filter,
    mult_bounded_range,
    mult_decompose,
    psdo_shift,
    reverse_pair,
    verify_constraint_chain,
)
from .probe import decay_fit, default_oracle_scan, gain_report, window_plan
from .tracer import gbb_trace
from .wave import run as wave_run


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# calc batch queries


def _po(args):
    return PairOrder(Fraction(args[0]), Fraction(args[1]), int(args[2]))


def _fmt_pair(o: PairOrder) -> str:
    return "(%s, %s; k=%d)" % (o.p, o.l, o.k)


def _fmt_decomp(dec) -> str:
    parts = ["%s/%s %s" % (t.pair[0].value, t.pair[1].value, _fmt_pair(t.order)) for t in dec.paired]
    parts += ["pure %s I^%s" % (t.tag.value, t.order) for t in dec.pure]
    return " + ".join(parts)


def _side(token: str) -> Side:
    return Side.LEFT if token.lower().startswith("l") else Side.RIGHT


def run_calc_query(op: str, args: list):
    """Evaluate one batch query; returns (result, witness) strings."""
    F = Fraction
    if op == "include_filter":
        a, b = _po(args[:3]), _po(args[3:6])
        res = include_filter(a, b)
        wit = "p1<=p2:%s;p1+l1<=p2+l2:%s" % (a.p <= b.p, a.p + a.l <= b.p + b.l)
        return str(res), wit
    if op == "embed_lambda0":
        return _fmt_pair(embed_lambda0(F(args[0]), int(args[1]))), ""
    if op == "reverse_pair":
        return _fmt_decomp(reverse_pair(_po(args[:3]), F(args[3]))), ""
    if op == "compose_au":
        return _fmt_pair(compose_au(_po(args[:3]), _po(args[3:6]))), ""
    if op == "compose_flowout":
        try:
            return _fmt_pair(compose_flowout(_po(args[:3]), _po(args[3:6]))), ""
        except FlowoutCompositionError as err:
            return "error", "l+l'>=0; fallback available via shift > %s" % (err.a.l + err.b.l)
    if op == "bounded_gu":
        o = _po(args[:3])
        m_src, m_dst = F(args[3]), F(args[4])
        gap = m_src - m_dst
        res = bounded_gu(o, m_src, m_dst)
        wit = "p+k/2<=gap:%s;p+l<=gap:%s" % (o.p + F(o.k, 2) <= gap, o.p + o.l <= gap)
        return str(res), wit
    if op == "bounded_diag_flowout":
        o = _po(args[:3])
        m_src, m_dst = F(args[3]), F(args[4])
        gap = m_src - m_dst
        res = bounded_diag_flowout(o, m_src, m_dst)
        wit = "p<=gap:%s;p+l<gap-k/2:%s" % (o.p <= gap, o.p + o.l < gap - F(o.k, 2))
        return str(res), wit
    if op == "bounded_one_sided":
        o = _po(args[:3])
        n, m, m_src = int(args[3]), F(args[4]), F(args[5])
        side = _side(args[6])
        res = bounded_one_sided(o, n, m, m_src, side)
        first = o.p + o.l < m + m_src - F(o.k, 2)
        second = o.p < (m if side is Side.LEFT else m_src) - F(n, 2)
        return str(res), "p+l<m+m'-k/2:%s;p<%s-n/2:%s" % (
            first, "m" if side is Side.LEFT else "m'", second)
    if op == "psdo_shift":
        return _fmt_pair(psdo_shift(_po(args[:3]), F(args[3]), _side(args[4]))), ""
    if op == "mult_decompose":
        return _fmt_decomp(mult_decompose(F(args[0]), F(args[1]), int(args[2]), int(args[3]))), ""
    if op == "mult_bounded_range":
        w = mult_bounded_range(F(args[0]), int(args[1]))
        return "admissible=%s window=(%s,%s)" % (w.admissible, w.lo, w.hi), "s0>k:%s" % w.admissible
    if op == "elliptic_window":
        w = elliptic_window(F(args[0]), F(args[1]), int(args[2]))
        return "admissible=%s window=(%s,%s)" % (w.admissible, w.lo, w.hi), ""
    if op == "hyperbolic_window":
        w = hyperbolic_window(F(args[0]), F(args[1]), int(args[2]))
        return (
            "admissible=%s theorem=(%s,%s) derived_lo=%s"
            % (w.admissible, w.theorem.lo, w.theorem.hi, w.derived_lo),
            "k+1+2eps0<s0:%s" % w.admissible,
        )
    if op == "verify_constraint_chain":
        rep = verify_constraint_chain(F(args[0]), F(args[1]), F(args[2]), int(args[3]), int(args[4]))
        return (
            "prelim=%s reduced=%s reduction=%s" % (rep.prelim, rep.reduced, rep.reduction),
            "prelim==reduced:%s;reduced=>reduction:%s;second_auto:%s"
            % (rep.prelim_matches_reduced, rep.reduced_implies_reduction, rep.second_automatic),
        )
    if op == "bootstrap_schedule":
        sched = bootstrap_schedule(F(args[0]), F(args[1]))
        return "[" + ", ".join(str(s) for s in sched) + "]", "length=%d" % len(sched)
    raise ValueError("unknown calc operation %r" % op)


def calc_batch(in_path: Path, out_path: Path) -> int:
    rows = []
    with open(in_path) as fh:
        for i, line in enumerate(fh):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            op, args = tokens[0], tokens[1:]
            try:
                result, witness = run_calc_query(op, args)
            except Exception as err:  # report, keep batch going
                result, witness = "error", str(err)
            rows.append((i + 1, op, " ".join(args), result, witness))
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["query_id", "operation", "inputs", "result", "witness_inequalities"])
        w.writerows(rows)
    return len(rows)


# ---------------------------------------------------------------------------
# stages


def stage_calc(cfg: ExperimentConfig, out: Path) -> dict:
    win = hyperbolic_window(cfg.s0, cfg.eps0, cfg.k)
    chain = verify_constraint_chain(cfg.s0, cfg.eps0, cfg.s, cfg.k, cfg.n)
    gate_ok = win.admissible and win.theorem.contains(cfg.s)
    result = {
        "admissible": win.admissible,
        "theorem_window": [str(win.theorem.lo), str(win.theorem.hi)],
        "derived_lo": str(win.derived_lo),
        "s": str(cfg.s),
        "s_in_window": win.theorem.contains(cfg.s),
        "gate_ok": gate_ok,
        "prelim": list(chain.prelim),
        "reduced": list(chain.reduced),
        "reduction": list(chain.reduction),
    }
    if not win.admissible:
        result["violated"] = "k+1+2*eps0 < s0"
    elif not result["s_in_window"]:
        result["violated"] = "-k/2 < s < s0-eps0-1-k/2"
    out.write_text(json.dumps(result, indent=2))
    return result


def stage_trace(cfg: ExperimentConfig, out_csv: Path, out_events: Path):
    metric = cfg.build_metric()
    c0 = float(metric.speed(np.asarray([cfg.trace_x0]))[0])
    q0 = PhasePoint(
        [cfg.trace_x0, 0.0], [-cfg.trace_direction * 1.0, c0]
    )
    paths = gbb_trace(metric, q0, t_span=cfg.trace_t_span, policy=cfg.trace_policy)
    with open(out_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "leg", "param", "x", "t", "xi", "tau", "p_residual"])
        for ip, p in enumerate(paths):
            for il, leg in enumerate(p.legs):
                for s in leg[:: max(1, len(leg) // 400)]:
                    q = PhasePoint(s.q[:2], s.q[2:])
                    w.writerow(
                        [ip, il, "%.9g" % s.t]
                        + ["%.12g" % v for v in s.q]
                        + ["%.3e" % metric.dual_hamiltonian(q)]
                    )
    events = [
        {
            "path": ip,
            "time": ev.time,
            "point": list(map(float, ev.point)),
            "kind": ev.kind.value,
            "incoming": list(map(float, ev.incoming)),
            "outgoing": None if ev.outgoing is None else list(map(float, ev.outgoing)),
        }
        for ip, p in enumerate(paths)
        for ev in p.events
    ]
    out_events.write_text(json.dumps(events, indent=2))
    return paths


def stage_wave(cfg: ExperimentConfig, out_npz: Path):
    scenario = cfg.build_scenario()
    fld = wave_run(scenario)
    np.savez_compressed(
        out_npz,
        u=fld.u.astype(np.float32),
        ts=fld.ts,
        xs=fld.xs,
        c=fld.c,
        energy=fld.energy,
        dt=fld.dt,
        max_trust_freq=fld.max_trust_freq,
        scenario_hash=fld.scenario_hash,
    )
    return fld, scenario


def stage_probe(cfg: ExperimentConfig, fld, scenario, paths, out_json: Path, out_csv: Path):
    windows = window_plan(scenario, paths)
    oracle = None
    if cfg.probe["oracle"] and cfg.metric_kind == "conormal":
        band = decay_fit(fld, windows[0]).band
        oracle = default_oracle_scan(cfg.build_metric(), band)
    rep = gain_report(
        fld,
        windows,
        s0=float(cfg.s0),
        eps0=float(cfg.eps0),
        k=cfg.k,
        oracle=oracle,
        transmit_tol=cfg.probe["transmit_tol"],
        oracle_tol=cfg.probe["oracle_tol"],
        gain_floor=cfg.probe["gain_floor"],
        margin=cfg.probe["margin"],
    )
    out_json.write_text(json.dumps(rep.asdict(), indent=2))
    with open(out_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window", "band_center", "band_mean", "fit"])
        for label, fit in rep.fits.items():
            scale = np.exp(np.mean(np.log(np.maximum(fit.band_means, 1e-300))))
            for c, mval in zip(fit.band_centers, fit.band_means):
                fitted = scale * (c / np.exp(np.mean(np.log(fit.band_centers)))) ** (
                    -fit.r_hat
                )
                w.writerow([label, "%.6g" % c, "%.6g" % mval, "%.6g" % fitted])
    return rep


def stage_commutant(cfg: ExperimentConfig, out_json: Path) -> dict:
    c = cfg.commutant
    rep = run_commutant_check(
        c["frame"],
        delta=c["delta"],
        eps=c["eps"],
        beta=c["beta"],
        F=c["F"],
        c0=c["c0"],
        alpha=c["alpha"],
        C0=c["C0"],
        dim=c["dim"],
        grid=c["grid"],
        seed=cfg.seed,
    )
    out_json.write_text(json.dumps(rep, indent=2))
    return rep


def run_pipeline(cfg: ExperimentConfig) -> tuple[int, dict]:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "name": cfg.name,
        "config_hash": cfg.config_hash(),
        "code_version": __version__,
        "stages": {},
    }

    def record(stage, paths, t0):
        entry = {"seconds": round(time.time() - t0, 3), "outputs": {}}
        for p in paths:
            entry["outputs"][p.name] = _sha256_file(p)
        manifest["stages"][stage] = entry

    t0 = time.time()
    calc_path = out / "calc.json"
    gate = stage_calc(cfg, calc_path)
    record("calc", [calc_path], t0)
    if not gate["gate_ok"]:
        manifest["refused"] = gate.get("violated", "inadmissible")
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
        print(
            "pipeline refused: admissibility gate failed (%s) for s0=%s eps0=%s s=%s k=%d"
            % (manifest["refused"], cfg.s0, cfg.eps0, cfg.s, cfg.k)
        )
        return 2, manifest

    t0 = time.time()
    trace_csv, events_json = out / "trace.csv", out / "events.json"
    paths = stage_trace(cfg, trace_csv, events_json)
    record("trace", [trace_csv, events_json], t0)

    t0 = time.time()
    wave_npz = out / "field.npz"
    fld, scenario = stage_wave(cfg, wave_npz)
    record("wave", [wave_npz], t0)

    t0 = time.time()
    probe_json, probe_csv = out / "probe.json", out / "probe_bands.csv"
    rep = stage_probe(cfg, fld, scenario, paths, probe_json, probe_csv)
    record("probe", [probe_json, probe_csv], t0)

    t0 = time.time()
    comm_json = out / "commutant.json"
    comm = stage_commutant(cfg, comm_json)
    record("verify-commutant", [comm_json], t0)

    manifest["verdict"] = rep.verdict
    manifest["commutant_ok"] = bool(
        comm["positivity_passed"] and not comm["violations"]
    )
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    ok = rep.verdict == "pass" and manifest["commutant_ok"]
    return (0 if ok else 1), manifest


def cmd_report(out_dir: Path) -> int:
    manifest_path = out_dir / "manifest.json"
    if not manifest_path.exists():
        print("no manifest at %s" % manifest_path, file=sys.stderr)
        return 2
    manifest = json.loads(manifest_path.read_text())
    print("experiment: %s  (config %s, code %s)" % (
        manifest.get("name"), manifest.get("config_hash"), manifest.get("code_version")))
    for stage, entry in manifest.get("stages", {}).items():
        print("  %-18s %6.2fs  %s" % (
            stage, entry["seconds"], " ".join("%s=%s" % kv for kv in entry["outputs"].items())))
    if "refused" in manifest:
        print("refused: %s" % manifest["refused"])
        return 2
    probe_path = out_dir / "probe.json"
    if probe_path.exists():
        rep = json.loads(probe_path.read_text())
        for label, fit in rep["fits"].items():
            print("  %-12s r=%.3f +- %.3f  (s proxy %.3f)" % (
                label, fit["r_hat"], fit["stderr"], fit["r_hat"] - 0.5))
        if rep.get("oracle_exponent") is not None:
            print("  oracle exponent %.3f, mismatch %.3f" % (
                rep["oracle_exponent"], rep["oracle_mismatch"]))
        print("  verdict: %s" % rep["verdict"])
        return 0 if rep["verdict"] == "pass" else 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wavediff", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_calc = sub.add_parser("calc", help="exact order-calculus queries")
    p_calc.add_argument("--batch", type=Path, help="query file, one operation per line")
    p_calc.add_argument("--out", type=Path, default=Path("calc_results.csv"))
    p_calc.add_argument("--config", type=Path, help="evaluate the config's admissibility gate")

    p_trace = sub.add_parser("trace", help="trace broken bicharacteristics")
    p_trace.add_argument("--config", type=Path, required=True)

    p_wave = sub.add_parser("wave", help="wave solver")
    wave_sub = p_wave.add_subparsers(dest="wave_command", required=True)
    p_wave_run = wave_sub.add_parser("run", help="run the configured scenario")
    p_wave_run.add_argument("--config", type=Path, required=True)

    p_probe = sub.add_parser("probe", help="regularity probe on a stored field")
    p_probe.add_argument("--config", type=Path, required=True)

    p_comm = sub.add_parser("verify-commutant", help="escape-function checks")
    p_comm.add_argument("--config", type=Path, required=True)

    p_rep = sub.add_parser("report", help="summarize a pipeline output directory")
    p_rep.add_argument("out_dir", type=Path)

    p_pipe = sub.add_parser("pipeline", help="run all stages in order")
    p_pipe.add_argument("--config", type=Path, required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "calc":
            if args.batch:
                n = calc_batch(args.batch, args.out)
                print("evaluated %d queries -> %s" % (n, args.out))
                return 0
            if args.config:
                cfg = load_config(args.config)
                cfg.out_dir.mkdir(parents=True, exist_ok=True)
                gate = stage_calc(cfg, cfg.out_dir / "calc.json")
                print(json.dumps(gate, indent=2))
                return 0 if gate["gate_ok"] else 1
            print("calc needs --batch or --config", file=sys.stderr)
            return 2
        if args.command == "trace":
            cfg = load_config(args.config)
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            stage_trace(cfg, cfg.out_dir / "trace.csv", cfg.out_dir / "events.json")
            print("trace written to %s" % cfg.out_dir)
            return 0
        if args.command == "wave":
            cfg = load_config(args.config)
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            stage_wave(cfg, cfg.out_dir / "field.npz")
            print("field written to %s" % (cfg.out_dir / "field.npz"))
            return 0
        if args.command == "probe":
            cfg = load_config(args.config)
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            metric = cfg.build_metric()
            c0 = float(metric.speed(np.asarray([cfg.trace_x0]))[0])
            q0 = PhasePoint([cfg.trace_x0, 0.0], [-1.0, c0])
            paths = gbb_trace(metric, q0, t_span=cfg.trace_t_span, policy="tree")
            scenario = cfg.build_scenario()
            fld = wave_run(scenario)
            rep = stage_probe(
                cfg, fld, scenario, paths, cfg.out_dir / "probe.json",
                cfg.out_dir / "probe_bands.csv",
            )
            print("verdict: %s" % rep.verdict)
            return 0 if rep.verdict == "pass" else 1
        if args.command == "verify-commutant":
            cfg = load_config(args.config)
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            rep = stage_commutant(cfg, cfg.out_dir / "commutant.json")
            print(json.dumps({k: rep[k] for k in (
                "min_margin", "residual_max_relative", "F_threshold", "positivity_passed")}, indent=2))
            ok = rep["positivity_passed"] and not rep["violations"]
            return 0 if ok else 1
        if args.command == "report":
            return cmd_report(args.out_dir)
        if args.command == "pipeline":
            cfg = load_config(args.config)
            code, manifest = run_pipeline(cfg)
            print(json.dumps({k: manifest[k] for k in manifest if k != "stages"}, indent=2))
            return code
    except ConfigError as err:
        print("configuration error: %s" % err, file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
