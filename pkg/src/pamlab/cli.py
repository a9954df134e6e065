"""Command-line front end.

Subcommands: rates (PSNR sweeps to TSV), optimize (input distributions and
subset searches), fer (Monte-Carlo frame error rates), info (code and
shaping parameter table). Every run writes a JSON manifest next to its
outputs holding the fully resolved configuration; re-running the
subcommand with the manifest's config text and seed reproduces every
output byte for byte.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .ccdm import composition_for, dm_input_length, rate_loss
from .channel import (
    FOLDED_OPTIMUM_AMPLITUDES,
    SimConfig,
    line_search_a,
    run_fer,
    write_fer_tsv,
)
from .constellations import (
    InputDistribution,
    cross_qam32,
    framed_cross_qam32,
    pam_constellation,
    read_constellation,
    write_constellation,
)
from .pas import overall_se, pas_config_at_se
from .rates import (
    METRIC_FUNCS,
    Quadrature,
    RateCurve,
    optimize_input_bmd,
    optimize_input_smd,
)
from .search import (
    default_search_psnr,
    search_subset_bmd_gray,
    search_subset_smd,
    write_search_report,
)

FER_NAMES = {
    "pam8_uniform": "8PAM",
    "pas_pam6": "6PAM_PAS",
    "pas_pam6_shaped": "6PAM_PAS_shaped",
    "cross_qam32": "32QAM_cross",
    "framed_cross_qam32": "32QAM_framed_cross",
}


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _psnr_grid(spec: str) -> tuple[float, ...]:
    spec = spec.strip()
    if ":" in spec:
        start, stop, step = (float(v) for v in spec.split(":"))
        n = int(round((stop - start) / step)) + 1
        grid = tuple(round(start + i * step, 9) for i in range(n) if start + i * step <= stop + 1e-9)
    else:
        grid = tuple(float(v) for v in spec.split())
    if not grid:
        raise ValueError(f"empty PSNR grid from {spec!r}")
    return grid


def _resolve_constellation(token: str, cache: dict):
    if token in cache:
        return cache[token]
    if token.endswith("pam"):
        c = pam_constellation(int(token[:-3]), "pas")
    elif token == "cross_32qam":
        c = cross_qam32()
    elif token == "framed_cross_32qam":
        c = framed_cross_qam32()
    elif token == "grid_32qam":
        if "_search_psnr" not in cache:
            cache["_search_psnr"] = default_search_psnr()
        c = search_subset_smd(cache["_search_psnr"]).constellation
    elif token.endswith(".txt"):
        c = read_constellation(token)
    else:
        raise ValueError(f"unknown constellation {token!r}")
    cache[token] = c
    return c


def _load_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise FileNotFoundError(f"config {path} not found")
    return cp


def _config_text(cp: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _rate_curve_point(args):
    token, metric, dist, psnr, nodes = args
    cache = {}
    c = _resolve_constellation(token, cache)
    q = Quadrature("gauss_hermite", nodes)
    if dist == "uniform":
        p = InputDistribution.uniform(c.size)
    elif dist == "shaped":
        if metric == "sd_smd":
            p = optimize_input_smd(c, psnr)
        elif metric == "sd_bmd":
            p = optimize_input_bmd(c, psnr, q)
        else:
            raise ValueError("shaped input supported for soft metrics only")
    else:
        raise ValueError(f"unknown distribution {dist!r}")
    return METRIC_FUNCS[metric](c, p, psnr, q)


def cmd_rates(cp: configparser.ConfigParser, out: Path, threads: int, seed: int) -> list[Path]:
    sec = cp["rates"]
    grid = _psnr_grid(sec["psnr_db"])
    nodes = sec.getint("quad_nodes", 128)
    curve_lines = [ln.split() for ln in sec["curves"].strip().splitlines() if ln.strip()]
    if not curve_lines:
        raise ValueError("no curves configured")
    outputs = []
    cache = {}
    for token, metric, dist in curve_lines:
        if metric not in METRIC_FUNCS:
            raise ValueError(f"unknown metric {metric!r}")
        _resolve_constellation(token, cache)  # fail fast on bad tokens
        jobs = [(token, metric, dist, p, nodes) for p in grid]
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                vals = list(pool.map(_rate_curve_point, jobs))
        else:
            vals = [_rate_curve_point(j) for j in jobs]
        curve = RateCurve(tuple(zip(grid, vals)), metric, token, dist)
        path = out / f"rates_{token}_{metric}_{dist}.txt"
        curve.write_tsv(path)
        outputs.append(path)
    return outputs


def cmd_optimize(cp: configparser.ConfigParser, out: Path, threads: int, seed: int) -> list[Path]:
    sec = cp["optimize"]
    task = sec["task"]
    outputs = []
    if task in ("input_smd", "input_bmd"):
        token = sec.get("constellation", "6pam")
        c = _resolve_constellation(token, {})
        psnr = sec.getfloat("psnr_db")
        if task == "input_smd":
            dist = optimize_input_smd(c, psnr)
            from .rates import rate_sd_smd

            value = rate_sd_smd(c, dist, psnr)
        else:
            dist = optimize_input_bmd(c, psnr)
            from .rates import rate_sd_bmd

            value = rate_sd_bmd(c, dist, psnr)
        report = out / f"optimize_{task}_{token}.txt"
        lines = [f"task {task}", f"constellation {token}", f"psnr_db {psnr:.6f}",
                 f"rate_bpcu {value:.9f}", "probs " + " ".join(f"{v:.6f}" for v in dist.probs)]
        _atomic_write(report, "\n".join(lines) + "\n")
        payload = {"task": task, "constellation": token, "psnr_db": psnr,
                   "rate_bpcu": value, "probs": list(dist.probs)}
        jpath = out / f"optimize_{task}_{token}.json"
        _atomic_write(jpath, json.dumps(payload, indent=2) + "\n")
        outputs += [report, jpath]
    elif task in ("subset_smd", "subset_bmd_gray"):
        psnr = sec.getfloat("psnr_db", fallback=None)
        res = search_subset_smd(psnr) if task == "subset_smd" else search_subset_bmd_gray(psnr)
        cpath = out / f"{res.constellation.name}.txt"
        write_constellation(res.constellation, cpath)
        rpath = out / f"{task}_report.txt"
        write_search_report(res, rpath)
        outputs += [cpath, rpath]
    else:
        raise ValueError(f"unknown optimizer task {task!r}")
    return outputs


def _fer_scheme_config(cp, scheme_token: str, seed: int) -> SimConfig:
    sec = cp["fer"]
    grid = _psnr_grid(cp["fer.grid"][scheme_token])
    base = scheme_token.removesuffix("_shaped")
    amp = FOLDED_OPTIMUM_AMPLITUDES if scheme_token.endswith("_shaped") else (1 / 3, 1 / 3, 1 / 3)
    return SimConfig(
        scheme=base,
        psnr_grid_db=grid,
        decoding=sec.get("decoding", "sd"),
        bp_iters=sec.getint("bp_iters", 0),
        min_frame_errors=sec.getint("min_frame_errors", 50),
        min_frame_errors_high=sec.getint("min_frame_errors_high", 100),
        max_frames=sec.getint("max_frames", 1_000_000),
        seed=seed,
        n_symbols=sec.getint("n_symbols", 3000),
        amplitude_target=amp,
        se_bpcu=sec.getfloat("se", 2.0),
    )


def cmd_fer(cp: configparser.ConfigParser, out: Path, threads: int, seed: int) -> list[Path]:
    sec = cp["fer"]
    schemes = sec["schemes"].split()
    if not schemes:
        raise ValueError("no schemes configured")
    outputs = []
    for token in schemes:
        if token not in FER_NAMES:
            raise ValueError(f"unknown scheme {token!r}")
        cfg = _fer_scheme_config(cp, token, seed)
        if cfg.decoding == "hd":
            if cp.has_section("fer.hd") and cp["fer.hd"].get(f"a.{token}", None):
                a = float(cp["fer.hd"][f"a.{token}"])
            else:
                hd = cp["fer.hd"] if cp.has_section("fer.hd") else {}
                ls_grid = [float(v) for v in hd.get("line_search_grid", "1 2 3 4 5 6 7 8 9 10 11 12").split()]
                pilot = float(hd.get(f"pilot_psnr.{token}", cfg.psnr_grid_db[len(cfg.psnr_grid_db) // 2]))
                frames = int(hd.get("pilot_frames", "192"))
                a = line_search_a(cfg, pilot, ls_grid, pilot_frames=frames)
            cfg = dataclasses.replace(cfg, hd_a=a)
        points = run_fer(cfg, threads=threads)
        prefix = "hd_fer" if cfg.decoding == "hd" else "fer"
        name = (
            f"{prefix}_LDPC_{FER_NAMES[token]}_n={cfg.n_symbols}"
            f"_R={cfg.se_bpcu:.2f}_it={cfg.iters}.txt"
        )
        path = out / name
        write_fer_tsv(points, path)
        outputs += [path, Path(str(path) + ".stats")]
    return outputs


def cmd_info(cp, out: Path | None, threads: int, seed: int) -> list[Path]:
    rows = []
    uniform = pas_config_at_se(6, 3000, (1 / 3, 1 / 3, 1 / 3), 2.0)
    rows.append(
        ("PAS PAM-6", uniform.code.n_bits, f"{uniform.code.k_bits}/{uniform.code.n_bits}",
         f"{uniform.code.rate:.6f}", uniform.gamma_n, f"{overall_se(uniform):.3f}")
    )
    from .ldpc import build_code

    pam8 = build_code(9000, 6000)
    rows.append(("PAM-8", pam8.n_bits, "2/3", f"{pam8.rate:.6f}", "", "2.000"))
    qam = build_code(7500, 6000)
    rows.append(("QAM-32/PAM-6", qam.n_bits, "0.8", f"{qam.rate:.6f}", "", "2.000"))
    comp = composition_for((1 / 3, 1 / 3, 1 / 3), 3000)
    lines = ["scenario code_length coderate rate_exact gamma_n overall_se"]
    for r in rows:
        lines.append(" ".join(str(v) for v in r))
    lines.append("")
    lines.append(
        f"ccdm n=3000 uniform composition: k={dm_input_length(comp)} "
        f"rate_loss={rate_loss(comp):.6f} bpcu"
    )
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out is not None:
        path = out / "info.txt"
        _atomic_write(path, text)
        return [path]
    return []


COMMANDS = {"rates": cmd_rates, "optimize": cmd_optimize, "fer": cmd_fer, "info": cmd_info}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="pamlab", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="INI configuration file (or a .manifest.json to replay)")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = 0 if args.seed is None else args.seed

    cp = configparser.ConfigParser()
    if args.command != "info":
        if not args.config:
            ap.error(f"{args.command} needs --config")
        if str(args.config).endswith(".json"):
            manifest = json.loads(Path(args.config).read_text())
            cp.read_string(manifest["config_text"])
            if args.seed is None:
                seed = int(manifest["seed"])
        else:
            cp = _load_config(args.config)
            if args.seed is None and cp.has_section("run"):
                seed = cp["run"].getint("seed", 0)

    t0 = time.time()
    outputs = COMMANDS[args.command](cp, out, args.threads, seed)
    manifest = {
        "command": args.command,
        "version": __version__,
        "seed": seed,
        "threads": args.threads,
        "config_text": _config_text(cp),
        "outputs": [str(p) for p in outputs],
        "wall_time_s": round(time.time() - t0, 3),
    }
    _atomic_write(out / f"{args.command}.manifest.json", json.dumps(manifest, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
