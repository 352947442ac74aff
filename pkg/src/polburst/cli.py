"""Command-line front end: one verb per figure family, CSV + JSON out.

Exit status: 0 ok, 1 simulation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .atoms import MHZ_PER_GAUSS, SchemeKind, to_mhz
from .config import (
    MANIFEST_CONVERSIONS,
    SCHEMA_VERSION,
    VERBS,
    ConfigError,
    freq,
    load_json,
    make_cavity,
    make_scheme,
    manifest_units,
    resolve,
    sweep_points,
)
from .lindblad import IntegrationError, InvariantViolation
from .optimize import OptimProblem, maximize, optimize_pumping, optimize_stirap
from .protocols import (
    BURST_PRESETS,
    PumpingConfig,
    StirapConfig,
    coherence_phase,
    eta2,
    pumping_initial_states,
    run_burst,
    run_optical_pumping,
    run_stirap_reprep,
    run_vstirap,
    vstirap_pulse,
)
from .pulses import envelope_csv

log = logging.getLogger("polburst")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def rows_to_csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _out_freq(cfg: dict, w: float) -> float:
    return w if cfg.get("scheme") == "ideal" else to_mhz(w)


def _suffix(cfg: dict, kind: str) -> str:
    if cfg.get("scheme") == "ideal":
        return "_gamma" if kind == "f" else "_inv_gamma"
    return "_mhz" if kind == "f" else "_us"


# ----------------------------------------------------------------------------
# per-point workers (module level so they pickle)


def _vstirap_point(cfg: dict, point: dict) -> dict:
    scheme = make_scheme(cfg)
    cavity = make_cavity(cfg, scheme, point)
    pulse_cfg = {**cfg["pulse"], **{k: point[k] for k in ("T", "omega", "detuning") if k in point}}
    T = float(pulse_cfg["T"])
    rho0 = scheme.g2
    if "mF" in point:
        rho0 = scheme.ground(scheme.initial_ground_F, point["mF"])
    opt = cfg.get("optimize")
    result = {"evaluations": 1, "flags": ""}
    if opt and "omega" not in point:
        bounds = opt["bounds"]
        dims = [("omega", bounds["omega"])]
        if "detuning" in bounds:
            dims.append(("detuning", bounds["detuning"]))
        base_det = freq(cfg, pulse_cfg.get("detuning", 0.0))

        def objective(p):
            det = p[1] if len(p) > 1 else base_det
            return run_vstirap(scheme, cavity, vstirap_pulse(scheme, p[0], T, det), rho0,
                               rtol=1e-7, atol=1e-9).p_H

        seeds = opt.get("seeds", 6)
        if isinstance(seeds, int):
            seeds = [seeds] + [3] * (len(dims) - 1)
        res = maximize(OptimProblem(objective, [[freq(cfg, b) for b in d] for _, d in dims], seeds,
                                    int(opt.get("budget", 60))))
        omega = float(res.best_params[0])
        det = float(res.best_params[1]) if len(dims) > 1 else base_det
        result = {"evaluations": res.evaluations, "flags": ";".join(res.flags)}
    else:
        omega = freq(cfg, pulse_cfg["omega"])
        det = freq(cfg, pulse_cfg.get("detuning", 0.0))
    cyc = run_vstirap(scheme, cavity, vstirap_pulse(scheme, omega, T, det), rho0, keep_trajectory=True)
    row = {
        "g": _out_freq(cfg, cavity.transition_coupling(scheme)),
        "kappa": _out_freq(cfg, cavity.kappa),
        "T": T,
        "omega": _out_freq(cfg, omega),
        "detuning": _out_freq(cfg, det),
        "p_H": cyc.p_H,
        "p_pi": cyc.p_pi,
        "purity": cyc.purity,
        "cooperativity": cavity.cooperativity(scheme),
        "eta2": eta2(scheme, cyc.trajectory.final_rho),
        "max_trace_drift": cyc.trajectory.max_trace_drift,
        **result,
    }
    if "mF" in point:
        row["mF"] = point["mF"]
    C = row["cooperativity"]
    row["ceiling"] = 2 * C / (2 * C + 1)
    return row


def _stirap_cfg(cfg: dict, point: dict) -> StirapConfig:
    s = {**cfg["stirap"], **{k: point[k] for k in ("T", "omega", "n", "a") if k in point}}
    return StirapConfig(freq(cfg, s["omega"]), float(s["T"]), int(s["n"]), float(s["a"]))


def _reprep_point(cfg: dict, point: dict) -> dict:
    scheme = make_scheme(cfg)
    st = _stirap_cfg(cfg, point)
    res = run_stirap_reprep(scheme, st)
    return {"T": st.T, "omega": _out_freq(cfg, st.omega_max), "n": st.n, "a": st.a,
            "efficiency": res.target_population}


def _pumping_cfg(cfg: dict) -> PumpingConfig:
    p = cfg["pumping"]
    return PumpingConfig(*(freq(cfg, p[k]) for k in ("delta1", "delta2", "omega1", "omega2")))


def _pumping_run(cfg: dict, label: str):
    scheme = make_scheme(cfg)
    rho0 = pumping_initial_states(scheme)[label]
    return run_optical_pumping(scheme, _pumping_cfg(cfg), rho0, float(cfg["duration"]), dt=float(cfg["dt"]))


def _bfield_point(cfg: dict, point: dict) -> dict:
    if "gauss" in point:
        split_cfg = point["gauss"] * MHZ_PER_GAUSS
    else:
        split_cfg = point.get("splitting", 0.0)
    scheme = make_scheme(cfg, split_cfg)
    cavity = make_cavity(cfg, scheme)
    pulse = vstirap_pulse(scheme, freq(cfg, cfg["pulse"]["omega"]), float(cfg["pulse"]["T"]),
                          freq(cfg, cfg["pulse"].get("detuning", 0.0)))
    cyc = run_vstirap(scheme, cavity, pulse)
    ph = coherence_phase(scheme, cyc.post_rho)
    return {"splitting": float(split_cfg), "gauss": float(split_cfg) / MHZ_PER_GAUSS, "phase_rad": ph.phase,
            "coherence": ph.magnitude, "p_H": cyc.p_H, "p_pi": cyc.p_pi}


# ----------------------------------------------------------------------------


class Output:
    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.files: list[str] = []

    def write(self, name: str, text: str) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / name).write_text(text)
        self.files.append(name)


def _map(jobs: int, fn, items: list):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))  # ordered by input index
    return [fn(i) for i in items]


def run_scenario(cfg: dict, out_dir: Path, jobs: int = 1) -> dict:
    """Run one resolved config; returns the manifest (also written to ``out_dir``)."""
    verb = cfg["verb"]
    out = Output(out_dir)
    f, t = _suffix(cfg, "f"), _suffix(cfg, "t")
    extra: dict = {}

    if verb in ("ideal-vstirap-sweep", "rb-vstirap-sweep"):
        points = sweep_points(cfg)
        rows = _map(jobs, partial(_vstirap_point, cfg), points)
        cols = (["mF"] if "mF" in rows[0] else []) + [
            "g", "kappa", "T", "omega", "detuning", "p_H", "p_pi", "purity", "cooperativity", "ceiling", "eta2",
            "evaluations"]
        units = {"g": f, "kappa": f, "omega": f, "detuning": f, "T": t}
        out.write(f"{verb}.csv", _unit_csv(cols, rows, units))
        extra["points"] = [{k: r[k] for k in ("omega", "detuning", "p_H", "evaluations", "flags")} for r in rows]
        extra["max_trace_drift"] = max(r["max_trace_drift"] for r in rows)

    elif verb in ("ideal-reprep-sweep", "rb-reprep"):
        points = sweep_points(cfg)
        rows = _map(jobs, partial(_reprep_point, cfg), points)
        out.write(f"{verb}.csv", _unit_csv(["T", "omega", "n", "a", "efficiency"], rows, {"T": t, "omega": f}))
        st = _stirap_cfg(cfg, {})
        text = envelope_csv(st.pair())
        if cfg.get("scheme") == "ideal":
            text = text.replace("t_us,omega_s_mhz,omega_p_mhz", "t_inv_gamma,omega_s_x2pi_gamma,omega_p_x2pi_gamma")
        out.write("envelopes.csv", text)

    elif verb == "rb-pumping":
        labels = ["phi_pi", "mixed_F1", "mixed_F2"]
        traces = _map(jobs, partial(_pumping_run, cfg), labels)
        rows = [{"t": tt, **{lab: tr.population[i] for lab, tr in zip(labels, traces)}}
                for i, tt in enumerate(traces[0].times)]
        out.write("rb-pumping.csv", _unit_csv(["t", *labels], rows, {"t": "_us"}))
        extra["threshold_95_us"] = {lab: tr.threshold_time(0.95) for lab, tr in zip(labels, traces)}

    elif verb == "rb-burst":
        b = cfg["burst"]
        preset = "incoherent" if b["mode"] == "incoherent" else f"coherent-{b.get('rate', '2mhz')}"
        report = run_burst(int(b["n"]), BURST_PRESETS[preset])
        d = report.to_dict()
        rows = []
        for i, cyc in enumerate(report.per_cycle):
            pops = report.ground_after_cycle[i]
            rows.append({"n": i + 1, "p_H": cyc.p_H, "p_pi": cyc.p_pi, "cumulative_eff": d["cumulative_eff"][i],
                         "coincidence_rate_hz": d["coincidence_rate_hz"][i],
                         "reprep_efficiency": report.reprep_efficiency[i],
                         **{f"pop_F2_m{m:+d}": pops[(2, m)] for m in range(-2, 3)}})
        cols = list(rows[0])
        out.write("rb-burst.csv", rows_to_csv(cols, rows))
        d["preset"] = preset
        out.write("burst.json", json.dumps(d, indent=2, sort_keys=True) + "\n")

    elif verb == "bfield-scan":
        points = sweep_points(cfg)
        rows = _map(jobs, partial(_bfield_point, cfg), points)
        ph = np.array([r["phase_rad"] for r in rows])
        ok = np.isfinite(ph)
        if ok.any():
            ph[ok] = np.unwrap(ph[ok])
        for r, p in zip(rows, ph):
            r["phase_rad"] = float(p)
        out.write("bfield-scan.csv", _unit_csv(["splitting", "gauss", "phase_rad", "coherence", "p_H", "p_pi"],
                                               rows, {"splitting": "_mhz", "gauss": "_G"}, rename={"gauss": "field"}))

    elif verb == "optimize":
        res = _optimize(cfg, jobs)
        out.write("optimize.json", json.dumps(res, indent=2, sort_keys=True) + "\n")
        hist_cols = res["parameters"] + ["value"]
        rows = [dict(zip(hist_cols, [*p, v])) for p, v in res["history"]]
        out.write("optimize-history.csv", rows_to_csv(hist_cols, rows))
        extra["best"] = {k: res[k] for k in ("best_params", "best_value", "evaluations", "flags")}

    manifest = {
        "tool": "polburst",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "verb": verb,
        "config": cfg,
        "units": manifest_units(cfg),
        "conversions": MANIFEST_CONVERSIONS,
        "files": list(out.files),
        **extra,
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    out.write("manifest.json", json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    return manifest


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _unit_csv(cols, rows, units: dict, rename: dict | None = None) -> str:
    rename = rename or {}
    header = [f"{rename.get(c, c)}{units.get(c, '')}" for c in cols]
    body = rows_to_csv(cols, rows).split("\n", 1)[1]
    return ",".join(header) + "\n" + body


def _optimize(cfg: dict, jobs: int) -> dict:
    scheme = make_scheme(cfg)
    opt = cfg["optimize"]
    bounds = opt.get("bounds", {})
    target = cfg["target"]
    seeds = opt.get("seeds", 4)
    budget = int(opt.get("budget", 60))
    executor = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        if target == "stirap":
            T = float(cfg["stirap"]["T"])
            b = [bounds.get("a", [6.0, 16.0]), [freq(cfg, x) for x in bounds.get("omega", [20.0, 80.0])]]
            res = optimize_stirap(scheme, T, b, n_values=opt.get("n_values", (4, 5, 6, 7, 8)), seeds=seeds,
                                  budget=budget, executor=executor)
            names, scale = ["n", "a", "omega"], [1.0, 1.0, _out_freq(cfg, 1.0)]
        elif target == "vstirap":
            cavity = make_cavity(cfg, scheme)
            T = float(cfg["pulse"]["T"])
            b = [[freq(cfg, x) for x in bounds["omega"]], [freq(cfg, x) for x in bounds.get("detuning", [0, 0])]]
            res = maximize(OptimProblem(
                partial(_vstirap_objective, cfg, T), b, seeds, budget), executor)
            names, scale = ["omega", "detuning"], [_out_freq(cfg, 1.0)] * 2
        else:
            T = float(cfg.get("duration", 2.5))
            keys = ["delta1", "delta2", "omega1", "omega2"]
            b = [[freq(cfg, x) for x in bounds[k]] for k in keys]
            rho0 = pumping_initial_states(scheme)[cfg.get("initial_state", "mixed_F1")]
            res = optimize_pumping(scheme, T, b, rho0, seeds=seeds, budget=budget, executor=executor)
            names, scale = keys, [_out_freq(cfg, 1.0)] * 4
    finally:
        if executor is not None:
            executor.shutdown()
    d = res.to_dict()
    d["parameters"] = names
    d["best_params"] = [x * s for x, s in zip(d["best_params"], scale)]
    d["history"] = [[[x * s for x, s in zip(p, scale)], v] for p, v in d["history"]]
    return d


def _vstirap_objective(cfg: dict, T: float, p) -> float:
    scheme = make_scheme(cfg)
    cavity = make_cavity(cfg, scheme)
    return run_vstirap(scheme, cavity, vstirap_pulse(scheme, p[0], T, p[1]), rtol=1e-7, atol=1e-9).p_H


# ----------------------------------------------------------------------------


def _parse_set(items: list[str]) -> dict:
    out: dict = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(item, "expected key=value")
        key, raw = item.split("=", 1)
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polburst", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"polburst {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON scenario config")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
    common.add_argument("--scheme", choices=[k.value for k in SchemeKind])
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweep points")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        sp = sub.add_parser(verb, parents=[common])
        if verb == "rb-burst":
            sp.add_argument("--mode", choices=["coherent", "incoherent"])
            sp.add_argument("--n", type=int)
            sp.add_argument("--rate", choices=["1mhz", "2mhz"])
        if verb == "optimize":
            sp.add_argument("--target", choices=["vstirap", "stirap", "pumping"])
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs", "must be at least 1")
        user = load_json(args.config.read_text()) if args.config else {}
        overrides = _parse_set(args.set)
        if args.scheme:
            overrides["scheme"] = args.scheme
        if args.verb == "rb-burst":
            burst = {k: v for k, v in (("mode", args.mode), ("n", args.n), ("rate", args.rate)) if v is not None}
            if burst:
                overrides["burst"] = burst
        if args.verb == "optimize" and args.target:
            overrides["target"] = args.target
        cfg = resolve(args.verb, _merge(user, overrides))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        manifest = run_scenario(cfg, args.out, args.jobs)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (IntegrationError, InvariantViolation, ArithmeticError, RuntimeError, ValueError, KeyError) as err:
        print(f"simulation failed: {err}", file=sys.stderr)
        return 1
    print(f"wrote {', '.join(manifest['files'])} to {args.out}")
    return 0


def _merge(a: dict, b: dict) -> dict:
    from .config import deep_merge

    return deep_merge(a, b)


if __name__ == "__main__":
    sys.exit(main())
