"""Command-line entry point: config parsing, dispatch, CSV emission.

Configs are flat ``key = value`` files with '#' comments; command-line
flags override file values. Every CSV starts with '#'-prefixed metadata
lines recording the effective configuration and is byte-identical
across repeated runs (floats printed with 17 significant digits).

Subcommands:
    kernel-check                  moment table and kernel shapes
    single {run,dns,effective}    one-spin solvers
    chain {run,dns}               chain solvers (run also emits DNS companions)
    convergence {tail,upscaling,amplitude,full}   sweep experiments
"""

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import experiments as exps
from .experiments import format_float
from .fields import FIELD_BUILDERS, make_field
from .hmm_chain import ChainConfig, chain_run, macro_average, macro_average_state
from .hmm_single import HmmConfig, run_hmm
from .kernels import build_kernel
from .reference import DnsConfig, dns_chain, dns_single, effective_solve


class ConfigError(ValueError):
    pass


_FLOAT_KEYS = {"eps", "tau", "macro_dt", "micro_dt", "beta", "gamma", "T", "dx",
               "J", "dns_dt", "macro_fp_tol"}
_INT_KEYS = {"kernel_p", "kernel_q", "N", "L", "r", "ell", "threads",
             "macro_fp_max_iter"}
_VEC_KEYS = {"h", "m0"}
_STR_KEYS = {"field", "out"}
_KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS | _VEC_KEYS | _STR_KEYS

_DEFAULTS = {
    "eps": 0.01, "beta": 1.0, "gamma": 1.0, "T": 2 * np.pi,
    "kernel_p": 5, "kernel_q": 4, "field": "circular",
    "m0": (1.0, 0.0, 0.0), "out": "out", "threads": 1,
    "N": 100, "L": 10, "r": 5, "ell": 5, "dx": 0.01, "J": 1.0,
    "macro_fp_tol": 1e-10, "macro_fp_max_iter": 50,
}


def _convert(key, raw, where):
    try:
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_KEYS:
            return int(raw)
        if key in _VEC_KEYS:
            parts = [float(p) for p in raw.split(",")]
            if len(parts) != 3:
                raise ValueError("expected three comma-separated components")
            return tuple(parts)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from exc


def parse_config(path, flags):
    """Merge a key = value file (optional) with flag overrides.

    Unknown keys and malformed lines are errors carrying the line number;
    cross-field invariants are validated later by the config dataclasses.
    """
    cfg = dict(_DEFAULTS)
    if path is not None:
        text = Path(path).read_text()
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            cfg[key] = _convert(key, raw, f"{path}:{lineno}")
    for key, val in flags.items():
        if val is None:
            continue
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"flag --{key} is not a config key")
        cfg[key] = _convert(key, val, f"--{key}") if isinstance(val, str) else val
    return cfg


def _field_from(cfg):
    return make_field(cfg["field"], h=cfg.get("h"))


def _hmm_config(cfg):
    eps = cfg["eps"]
    tau = cfg.get("tau") or 5 * eps
    macro_dt = cfg.get("macro_dt") or cfg["T"] / 20
    micro_dt = cfg.get("micro_dt") or eps / 100
    return HmmConfig(
        eps=eps, tau=tau, macro_dt=macro_dt, micro_dt=micro_dt,
        beta=cfg["beta"], gamma=cfg["gamma"], T=cfg["T"],
        kernel=build_kernel(cfg["kernel_p"], cfg["kernel_q"]),
        field=_field_from(cfg), m0=np.array(cfg["m0"]),
        macro_fp_tol=cfg["macro_fp_tol"],
        macro_fp_max_iter=cfg["macro_fp_max_iter"])


def _config_header(cfg, extra=None):
    lines = []
    items = dict(cfg)
    items.update(extra or {})
    for key in sorted(items):
        val = items[key]
        if isinstance(val, float):
            val = format_float(val)
        elif isinstance(val, tuple):
            val = ",".join(format_float(v) for v in val)
        lines.append(f"# {key} = {val}")
    return "\n".join(lines) + "\n"


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _out_dir(cfg):
    return Path(cfg["out"])


# --- subcommands -------------------------------------------------------------

DEFAULT_KERNEL_SET = ((1, -1), (1, 0), (1, 7), (5, 4))


def cmd_kernel_check(cfg, pairs=DEFAULT_KERNEL_SET, tau=0.1):
    out = _out_dir(cfg)
    lines = ["pair,p,q,r,moment"]
    for (p, q) in pairs:
        k = build_kernel(p, q)
        for r in range(p + 2):
            lines.append(f"(p={p}|q={q}),{p},{q},{r},{format_float(k.moment(r))}")
    text = f"# experiment = kernel_moments\n{_config_header({})}" + "\n".join(lines) + "\n"
    _write(out / "kernel_moments.csv", text)

    ts = np.linspace(-0.6 * tau, 0.6 * tau, 481)
    cols = {f"K_p{p}_q{q}": build_kernel(p, q).scaled(tau, ts) for (p, q) in pairs}
    rows = ["t," + ",".join(cols)]
    for i, t in enumerate(ts):
        rows.append(",".join([format_float(t)] + [format_float(cols[c][i]) for c in cols]))
    text = (f"# experiment = kernel_shape\n# tau = {format_float(tau)}\n"
            + "\n".join(rows) + "\n")
    _write(out / "kernel_shape.csv", text)
    print(f"kernel moment and shape tables written to {out}/")
    return 0


def cmd_single_run(cfg):
    hmm = run_hmm(_hmm_config(cfg))
    rows = ["time,Mx,My,Mz,flux_x,flux_y,flux_z,iters"]
    for i, t in enumerate(hmm.times):
        flux = hmm.fluxes[i - 1] if i > 0 else np.zeros(3)
        iters = hmm.iters[i - 1] if i > 0 else 0
        rows.append(",".join([format_float(t)]
                             + [format_float(v) for v in hmm.states[i]]
                             + [format_float(v) for v in flux] + [str(iters)]))
    text = "# experiment = single_run\n" + _config_header(cfg) + "\n".join(rows) + "\n"
    path = _write(_out_dir(cfg) / "single_run.csv", text)
    print(f"macro trajectory written to {path} (rhs evals: {hmm.rhs_evals})")
    return 0


def _trajectory_csv(name, cfg, traj):
    rows = ["time,mx,my,mz"]
    for i, t in enumerate(traj.times):
        rows.append(",".join([format_float(t)]
                             + [format_float(v) for v in traj.states[i]]))
    return f"# experiment = {name}\n" + _config_header(cfg) + "\n".join(rows) + "\n"


def cmd_single_dns(cfg):
    eps = cfg["eps"]
    dt = cfg.get("dns_dt")
    if dt is None:
        n = int(np.ceil(cfg["T"] / (eps / 20)))
        dt = cfg["T"] / n
    dns = dns_single(DnsConfig(eps=eps, beta=cfg["beta"], gamma=cfg["gamma"],
                               T=cfg["T"], dt=dt, field=_field_from(cfg),
                               m0=np.array(cfg["m0"])))
    path = _write(_out_dir(cfg) / "single_dns.csv",
                  _trajectory_csv("single_dns", cfg, dns))
    print(f"resolved trajectory written to {path} (rhs evals: {dns.rhs_evals})")
    return 0


def cmd_single_effective(cfg):
    dt = cfg.get("dns_dt") or (cfg.get("macro_dt") or cfg["T"] / 20) / 100
    n = round(cfg["T"] / dt)
    dt = cfg["T"] / n
    eff = effective_solve(_field_from(cfg), np.array(cfg["m0"]), cfg["T"], dt,
                          cfg["beta"], cfg["gamma"])
    path = _write(_out_dir(cfg) / "single_effective.csv",
                  _trajectory_csv("single_effective", cfg, eff))
    print(f"averaged-equation trajectory written to {path}")
    return 0


def cmd_chain_run(cfg):
    res = exps.exp_chain(T=cfg.get("T_chain", 1.5), J=cfg["J"],
                         eps=cfg["eps"], macro_fp_tol=cfg["macro_fp_tol"])
    out = _out_dir(cfg)
    for k in range(len(res.snapshot_times)):
        _write(out / f"chain_snapshot_{k}.csv", res.snapshot_csv(k))
    print(f"{len(res.snapshot_times)} chain snapshots written to {out}/ "
          f"(hmm rhs evals: {res.hmm.rhs_evals})")
    return 0


def cmd_chain_dns(cfg):
    ccfg = exps.chain_config_55(T=1.5, eps=cfg["eps"], J=cfg["J"])
    dns = dns_chain(ccfg, ccfg.eps / 20)
    rows = ["i,x,mx,my,mz"]
    x = ccfg.positions()
    final = dns.states[-1]
    for i in range(ccfg.N):
        rows.append(",".join([str(i), format_float(x[i])]
                             + [format_float(v) for v in final[i]]))
    text = "# experiment = chain_dns_final\n" + _config_header(cfg) + "\n".join(rows) + "\n"
    path = _write(_out_dir(cfg) / "chain_dns.csv", text)
    print(f"resolved chain final state written to {path}")
    return 0


def cmd_convergence(cfg, which):
    out = _out_dir(cfg)
    threads = max(1, cfg["threads"])
    written = []
    if which == "tail":
        table = exps.exp_tail()
        table.write(_ensure(out / "tail.csv"))
        written.append(out / "tail.csv")
    elif which == "upscaling":
        jobs = [("tied", None), ("fixed", 0.1), ("fixed", 0.2)]
        with ThreadPoolExecutor(max_workers=threads) as ex:
            tables = list(ex.map(lambda j: exps.exp_upscaling(j[0], tau=j[1]), jobs))
        for table in tables:
            path = _ensure(out / f"{table.name}.csv")
            table.write(path)
            written.append(path)
    elif which == "amplitude":
        trace, table = exps.exp_amplitude()
        rows = ["n,time,amplitude"]
        for i, t in enumerate(trace.times):
            rows.append(f"{i},{format_float(t)},{format_float(trace.amplitudes()[i])}")
        _write(out / "amplitude_trace.csv",
               "# experiment = amplitude_trace\n" + "\n".join(rows) + "\n")
        table.write(_ensure(out / "amplitude_sweep.csv"))
        written += [out / "amplitude_trace.csv", out / "amplitude_sweep.csv"]
    elif which == "full":
        res = exps.exp_full_solution(cfg["field"], cfg["gamma"])
        path = _ensure(out / f"full_{cfg['field']}_gamma{cfg['gamma']:g}.csv")
        res.write(path)
        written.append(path)
    else:
        raise ConfigError(f"unknown convergence experiment {which!r}")
    for p in written:
        print(f"wrote {p}")
    return 0


def _ensure(path):
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def build_parser():
    parser = argparse.ArgumentParser(
        prog="llhmm",
        description="Multiscale solvers for spin dynamics under high-frequency fields")
    parser.add_argument("--config", help="key = value config file")
    for key in sorted(_FLOAT_KEYS):
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float)
    for key in sorted(_INT_KEYS):
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int)
    for key in sorted(_VEC_KEYS):
        parser.add_argument(f"--{key}", dest=key, type=str)
    parser.add_argument("--field", dest="field", choices=sorted(FIELD_BUILDERS))
    parser.add_argument("--out", dest="out", type=str)

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("kernel-check")
    p_single = sub.add_parser("single")
    p_single.add_argument("what", choices=["run", "dns", "effective"])
    p_chain = sub.add_parser("chain")
    p_chain.add_argument("what", choices=["run", "dns"])
    p_conv = sub.add_parser("convergence")
    p_conv.add_argument("what", choices=["tail", "upscaling", "amplitude", "full"])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    flag_keys = _KNOWN_KEYS - {"h", "m0"}
    flags = {k: getattr(args, k, None) for k in flag_keys}
    for key in _VEC_KEYS:
        flags[key] = getattr(args, key, None)
    try:
        cfg = parse_config(args.config, flags)
        if args.command == "kernel-check":
            return cmd_kernel_check(cfg)
        if args.command == "single":
            return {"run": cmd_single_run, "dns": cmd_single_dns,
                    "effective": cmd_single_effective}[args.what](cfg)
        if args.command == "chain":
            return {"run": cmd_chain_run, "dns": cmd_chain_dns}[args.what](cfg)
        if args.command == "convergence":
            return cmd_convergence(cfg, args.what)
        parser.error(f"unknown command {args.command!r}")
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
