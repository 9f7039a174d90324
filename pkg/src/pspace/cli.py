"""Command-line front end: ``pspace <command> [--config FILE] [--preset NAME]``."""
import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import _accel
from .config import PRESETS, load_config
from .eigensolver import (
    FORMAT_VERSION,
    _read_container,
    _write_container,
    build_eigenset,
    config_hash,
    count_nodes,
    export_levels_text,
    level_table,
    load_eigenset,
    rms_deviation,
    save_eigenset,
)
from .errors import ConfigError, FormatError, PSpaceError, StaleCache, UnsupportedConfiguration
from .propagator import PropagationState, Wavepacket, propagate, step_count
from .pulse import pulse_table
from .specfun import hydrogen_chi_exact
from .spectra import (
    ati_spectrum,
    ionization_probability,
    pad,
    project_out_bound,
    write_ati,
    write_pad,
)

log = logging.getLogger("pspace")

_MAGIC_WAVE = b"PSPWAVE\0"


# ---------------------------------------------------------------- helpers

def _outdir(cfg, args):
    d = Path(args.output_dir or cfg["output"]["dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _expected_hash(cfg, l_max=None):
    return config_hash(cfg.grid().descriptor(), cfg.model(),
                       cfg.l_max if l_max is None else l_max, cfg.rule())


def _load_matching_eigenset(cfg, outdir):
    path = cfg.cache_path(outdir)
    if not path.exists():
        raise StaleCache(f"eigenset cache {path} not found; run 'pspace solve' first")
    es = load_eigenset(path)
    if es.content_hash() != _expected_hash(cfg):
        raise StaleCache(f"eigenset cache {path} does not match the configuration")
    return es


def save_wavepacket(path, coeffs, state, eigenset_hash, pulse):
    header = {
        "kind": "wavepacket",
        "eigenset_hash": eigenset_hash,
        "step": int(state.step),
        "n_steps": int(state.n_steps),
        "dt": float(state.dt),
        "merged": bool(state.merged),
        "l_max": int(coeffs.shape[0] - 1),
        "pulse": {k: getattr(pulse, k) for k in ("peak_field", "omega", "duration", "cep",
                                                 "envelope")},
    }
    _write_container(path, _MAGIC_WAVE, header, [("coeffs", coeffs)])


def load_wavepacket(path):
    header, arrays = _read_container(path, _MAGIC_WAVE)
    if "coeffs" not in arrays:
        raise FormatError(f"{path}: missing coefficients")
    state = PropagationState(arrays["coeffs"].astype(complex), header["step"],
                             header["n_steps"], header["dt"], header["merged"])
    return header, state


def _solve(cfg, l_max=None):
    grid = cfg.grid()
    model = cfg.model()
    l_max = cfg.l_max if l_max is None else l_max

    def progress(l, lev):
        log.info("l=%d solved: %d bound states, E0=%.12f", l, lev.bound_count, lev.energies[0])

    return build_eigenset(grid, model, l_max, cfg.rule(), progress=progress)


# ---------------------------------------------------------------- commands

def cmd_solve(cfg, args):
    out = _outdir(cfg, args)
    t0 = time.perf_counter()
    es = _solve(cfg)
    elapsed = time.perf_counter() - t0
    cache = cfg.cache_path(out)
    save_eigenset(es, cache)
    levels = cfg.output_path("levels", out)
    export_levels_text(es, levels)
    print(f"# eigenset: N={es.grid.n_points} p_max={es.grid.p_max} l_max={es.l_max} "
          f"({elapsed:.1f} s, backend={_accel.backend_name()})")
    for l, n, E, err in level_table(es):
        tail = "" if err is None else f"   |dE| = {err:.3e}"
        print(f"l={l} n={n}  E = {E:.12f}{tail}")
    print(f"# wrote {cache} and {levels}")
    return 0


def validation_tables(es, n_levels=4):
    """(dE, dchi) arrays of shape (l_max+1, n_levels) against exact hydrogen."""
    if not es.model.is_hydrogenic:
        raise UnsupportedConfiguration("validation needs a pure Coulomb potential")
    Z = es.model.Z
    dE = np.zeros((es.l_max + 1, n_levels))
    dchi = np.zeros_like(dE)
    nodes = np.zeros((es.l_max + 1, n_levels), dtype=int)
    for lev in es.levels:
        for k in range(n_levels):
            n = lev.l + 1 + k
            dE[lev.l, k] = abs(lev.energy(n) + Z * Z / (2.0 * n * n))
            exact = hydrogen_chi_exact(n, lev.l, es.grid, Z)
            dchi[lev.l, k] = rms_deviation(lev, n, exact)
            nodes[lev.l, k] = count_nodes(lev.state(n))
    return dE, dchi, nodes


def format_validation(es, dE, dchi):
    N = es.grid.n_points
    lines = [f"# hydrogen check, N={N}, p_max={es.grid.p_max:g}, R_m={es.model.r_cutoff:g}",
             "# energy errors |E(nl) + 1/(2n^2)|",
             "L    dE(1)      dE(2)      dE(3)      dE(4)"]
    for l in range(dE.shape[0]):
        lines.append(f"{l}  " + " ".join(f"{v:10.3e}" for v in dE[l]))
    lines += ["# rms deviations of chi_nl", "L    dchi(1)    dchi(2)    dchi(3)    dchi(4)"]
    for l in range(dchi.shape[0]):
        lines.append(f"{l}  " + " ".join(f"{v:10.3e}" for v in dchi[l]))
    return "\n".join(lines) + "\n"


def cmd_validate(cfg, args):
    out = _outdir(cfg, args)
    if not cfg.model().is_hydrogenic:
        raise UnsupportedConfiguration("validate needs a hydrogenic potential (a1 = a3 = a5 = 0)")
    try:
        es = _load_matching_eigenset(cfg, out)
    except (StaleCache, FormatError):
        es = _solve(cfg)
    dE, dchi, _ = validation_tables(es)
    text = format_validation(es, dE, dchi)
    cfg.output_path("validation", out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_propagate(cfg, args):
    out = _outdir(cfg, args)
    es = _load_matching_eigenset(cfg, out)
    pulse = cfg.pulse()
    prop = cfg["propagation"]
    l_max = cfg.tdse_l_max
    wp0 = Wavepacket.from_state(es, l_max, l=prop["initial_l"], n=prop["initial_n"])
    n_steps, dt = step_count(pulse.duration, prop["dt"])
    ckpt_path = cfg.output_path("checkpoint", out)
    obs_path = cfg.output_path("observer", out)
    h = es.content_hash()

    resume = None
    if args.resume and ckpt_path.exists():
        header, resume = load_wavepacket(ckpt_path)
        if header["eigenset_hash"] != h:
            raise StaleCache(f"checkpoint {ckpt_path} belongs to another eigenset")
        log.info("resuming at step %d of %d", resume.step, resume.n_steps)
    mode = "a" if resume is not None else "w"
    with open(obs_path, mode) as obs:
        if resume is None:
            obs.write("# t norm ground_population bound_population\n")

        def observer(k, t, norm, ground, bound):
            obs.write(f"{t:.6f} {norm:.15e} {ground:.15e} {bound:.15e}\n")
            obs.flush()

        def checkpoint(state):
            save_wavepacket(ckpt_path, state.coeffs, state, h, pulse)

        result = propagate(wp0, es, pulse, dt, observer=observer,
                           observer_stride=prop["observer_stride"],
                           merge_halfsteps=prop["merge_halfsteps"], resume=resume,
                           checkpoint=checkpoint, checkpoint_stride=prop["checkpoint_stride"],
                           stop_after=args.stop_after)
    if isinstance(result, PropagationState):
        save_wavepacket(ckpt_path, result.coeffs, result, h, pulse)
        print(f"# stopped at step {result.step} of {result.n_steps}; checkpoint {ckpt_path}")
        return 0
    final = PropagationState(result.coeffs, n_steps, n_steps, dt, prop["merge_halfsteps"])
    final_path = cfg.output_path("final", out)
    save_wavepacket(final_path, result.coeffs, final, h, pulse)
    norm = result.norm2()
    overlap = np.sum(es.grid.quad_weights * np.conj(wp0.coeffs) * result.coeffs)
    fidelity = float(abs(overlap) ** 2 / (wp0.norm2() * norm))
    print(f"# {n_steps} steps of dt={dt:.6g}; final norm {norm:.15f}; "
          f"fidelity with initial state {fidelity:.15f}")
    print(f"# wrote {final_path} and {obs_path}")
    return 0


def cmd_spectra(cfg, args):
    out = _outdir(cfg, args)
    es = _load_matching_eigenset(cfg, out)
    path = Path(args.checkpoint) if args.checkpoint else cfg.output_path("final", out)
    if not path.exists():
        raise StaleCache(f"final wavepacket {path} not found; run 'pspace propagate' first")
    header, state = load_wavepacket(path)
    if header["eigenset_hash"] != es.content_hash():
        raise StaleCache(f"{path} was propagated with a different eigenset")
    if not state.finished:
        raise StaleCache(f"{path} holds an unfinished run (step {state.step} of {state.n_steps})")
    wp = Wavepacket(state.coeffs, es.grid)
    cp = project_out_bound(wp, es)
    P = ionization_probability(cp)
    o = cfg["output"]
    native = ati_spectrum(cp)
    if o["ati_points"]:
        e = np.linspace(0.0, o["ati_e_max"], o["ati_points"] + 1)[1:]
        spec = ati_spectrum(cp, e)
    else:
        spec = native
    write_ati(spec, cfg.output_path("ati", out))
    pd = pad(cp, o["pad_n_par"], o["pad_n_perp"], min(o["pad_p_limit"], es.grid.p_max))
    binary = cfg.output_path("pad_binary", out) if o["pad_binary"] else None
    write_pad(pd, cfg.output_path("pad", out), binary)
    print(f"ionization probability (direct sum)   {P:.12e}")
    print(f"ionization probability (ATI integral) {native.integral():.12e}")
    print(f"# wrote {cfg.output_path('ati', out)} and {cfg.output_path('pad', out)}")
    return 0


def cmd_pulse_dump(cfg, args):
    out = _outdir(cfg, args)
    pulse = cfg.pulse()
    t, E, A = pulse_table(pulse, cfg["propagation"]["dt"])
    path = cfg.output_path("pulse_table", out)
    np.savetxt(path, np.column_stack([t, E, A]), header="t_au E_au A_au")
    print(f"# wrote {path} ({t.size} rows, T = {pulse.duration:.6f} a.u.)")
    return 0


def cmd_convergence_scan(cfg, args):
    out = _outdir(cfg, args)
    values = [float(v) for v in args.values.split(",")]
    rows = []
    if args.param == "N":
        for v in values:
            cfg.values["grid"]["n_points"] = int(v)
            es = _solve(cfg)
            lowest = [float(lev.energies[0]) for lev in es.levels]
            rows.append((int(v), lowest))
            print(f"N={int(v)}  lowest levels per l: " + " ".join(f"{e:.12f}" for e in lowest))
    else:
        es = _load_matching_eigenset(cfg, out)
        pulse = cfg.pulse()
        for v in values:
            if args.param == "dt":
                dt, l_max = v, cfg.tdse_l_max
            else:
                dt, l_max = cfg["propagation"]["dt"], int(v)
                if l_max > es.l_max:
                    raise ConfigError(f"l_max={l_max} exceeds the eigenset's {es.l_max}")
            wp0 = Wavepacket.from_state(es, l_max)
            wp = propagate(wp0, es, pulse, dt, observer_stride=0)
            P = ionization_probability(project_out_bound(wp, es))
            rows.append((v, P))
            print(f"{args.param}={v:g}  P={P:.12e}  norm={wp.norm2():.15f}")
    path = out / f"scan_{args.param}.json"
    path.write_text(json.dumps(rows, indent=1))
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "validate": cmd_validate,
    "propagate": cmd_propagate,
    "spectra": cmd_spectra,
    "pulse-dump": cmd_pulse_dump,
    "convergence-scan": cmd_convergence_scan,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="pspace", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (INI sections)")
    common.add_argument("--preset", choices=sorted(PRESETS), help="start from a shipped preset")
    common.add_argument("--threads", type=int, default=None, help="numba worker threads")
    common.add_argument("--output-dir", default=None, help="override [output] dir")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "validate", "pulse-dump"):
        sub.add_parser(name, parents=[common])
    p = sub.add_parser("propagate", parents=[common])
    p.add_argument("--resume", action="store_true", help="continue from the checkpoint file")
    p.add_argument("--stop-after", type=int, default=None, help=argparse.SUPPRESS)
    s = sub.add_parser("spectra", parents=[common])
    s.add_argument("--checkpoint", default=None, help="final wavepacket file")
    c = sub.add_parser("convergence-scan", parents=[common])
    c.add_argument("--param", choices=("N", "dt", "lmax"), required=True)
    c.add_argument("--values", required=True, help="comma-separated values")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.preset)
        threads = args.threads if args.threads is not None else cfg["run"]["threads"]
        _accel.set_threads(threads)
        return COMMANDS[args.command](cfg, args)
    except PSpaceError as exc:
        print(f"pspace: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
