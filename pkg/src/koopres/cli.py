"""Command-line pipeline driver.

Subcommands: simulate | train | spectrum | pseudospec | modes | hankel |
dbi | plot.  Every command takes an optional JSON config file whose keys
mirror the flags; flags override the file and unknown config keys are
rejected.  Each output file gets a `<name>.meta.json` sidecar recording
the exact resolved configuration.  KOOPMAN_THREADS caps internal
parallelism (currently the pseudospectrum grid scan).

All CSV outputs use `.` decimals, `,` separators, and LF line endings.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dynamics
from .dictionaries import FixedDictionary, NeuralDictionary, evaluate_batch
from .edmd import eig, koopman_modes, read_spectrum_csv, solve_koopman, write_modes_csv, write_spectrum_csv
from .gram import compute_gram
from .hankel import build_hankel, hankel_dmd
from .preprocess import davies_bouldin
from .residual import (
    complex_grid,
    pseudospectrum,
    read_pseudospectrum_csv,
    residuals_for_spectrum,
    write_pseudospectrum_csv,
)
from .reskoopnet import TrainConfig, TrainingDivergedError, train, write_loss_csv
from .svgplot import render_pseudospectrum_svg, render_spectrum_svg


class ConfigError(ValueError):
    pass


def _resolve(args, allowed, defaults=None):
    """Merge config-file values under explicit flags; reject unknown keys."""
    merged = dict(defaults or {})
    if getattr(args, "config", None):
        with open(args.config) as fh:
            doc = json.load(fh)
        unknown = set(doc) - set(allowed)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(doc)
    for key in allowed:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    missing = [k for k in allowed if k not in merged]
    if missing:
        raise ConfigError(f"missing required settings: {missing}")
    return merged


def _write_sidecar(outpath, command, config):
    doc = {"command": command, "config": {k: config[k] for k in sorted(config)}}
    with open(str(outpath) + ".meta.json", "w", newline="\n") as fh:
        json.dump(doc, fh, indent=1, default=str)
        fh.write("\n")


def _parse_matrix(text):
    rows = [[float(v) for v in row.split(",")] for row in text.split(";")]
    M = np.array(rows, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"matrix {text!r} is not square")
    return M


def _load_dictionary(spec, data_x=None):
    """Dictionary from a spec string.

    * path to a .json file  -> trained NeuralDictionary
    * monomial:<max_degree>
    * fourier_hermite:<fourier_order>,<hermite_order>
    * rbf:<n_centers>,<bandwidth>,<seed>  (centers sampled from data rows)
    """
    if spec.endswith(".json"):
        return NeuralDictionary.load_json(spec)
    if ":" not in spec:
        raise ConfigError(f"bad dictionary spec {spec!r}")
    kind, rest = spec.split(":", 1)
    if data_x is None:
        raise ConfigError("fixed dictionaries need snapshot data for the state dimension")
    d = data_x.shape[1]
    if kind == "monomial":
        return FixedDictionary("monomial", d=d, max_degree=int(rest))
    if kind == "fourier_hermite":
        fo, ho = (int(v) for v in rest.split(","))
        return FixedDictionary("fourier_hermite", d=d, fourier_order=fo, hermite_order=ho)
    if kind == "rbf":
        n_c, bw, seed = rest.split(",")
        rng = np.random.default_rng(int(seed))
        idx = rng.choice(data_x.shape[0], size=int(n_c), replace=False)
        return FixedDictionary("rbf", d=d, centers=data_x[idx], bandwidth=float(bw))
    raise ConfigError(f"unknown dictionary kind {kind!r}")


def _edmd_spectrum(pairs, dictionary, sigma):
    psi_x = evaluate_batch(dictionary, pairs.X)
    psi_y = evaluate_batch(dictionary, pairs.Y)
    gram = compute_gram(psi_x, psi_y)
    koopman = solve_koopman(gram, sigma)
    spectrum = residuals_for_spectrum(eig(koopman, gram), gram)
    return psi_x, gram, koopman, spectrum


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    if args.system == "pendulum":
        allowed = ["n_init", "n_steps", "dt", "seed", "out", "format", "traj_out"]
        cfg = _resolve(args, allowed, defaults={"seed": 0, "format": "csv", "traj_out": None})
        pairs = dynamics.simulate_pendulum(cfg["n_init"], cfg["n_steps"], cfg["dt"], cfg["seed"])
        if cfg["traj_out"]:
            # first trajectory re-simulated for delay-embedding workflows
            single = dynamics.simulate_pendulum(1, cfg["n_steps"], cfg["dt"], cfg["seed"])
            states = np.vstack([single.X, single.Y[-1:]])
            dynamics.save_trajectory_csv(cfg["traj_out"], dynamics.Trajectory(states, cfg["dt"]))
            _write_sidecar(cfg["traj_out"], "simulate pendulum", cfg)
    elif args.system == "linear":
        allowed = ["matrix", "n_init", "n_steps", "seed", "out", "format", "traj_out"]
        cfg = _resolve(args, allowed, defaults={"seed": 0, "format": "csv", "traj_out": None})
        M = _parse_matrix(cfg["matrix"])
        pairs = dynamics.simulate_linear(M, cfg["n_init"], cfg["n_steps"], cfg["seed"])
        if cfg["traj_out"]:
            single = dynamics.simulate_linear(M, 1, cfg["n_steps"], cfg["seed"])
            states = np.vstack([single.X, single.Y[-1:]])
            dynamics.save_trajectory_csv(cfg["traj_out"], dynamics.Trajectory(states, 1.0))
            _write_sidecar(cfg["traj_out"], "simulate linear", cfg)
    else:  # multiregime
        allowed = ["n_regimes", "d", "n_trials", "n_steps", "noise", "seed", "out", "format", "trials_dir"]
        cfg = _resolve(args, allowed, defaults={"seed": 0, "format": "csv", "trials_dir": None})
        trajs, labels = dynamics.simulate_multiregime(
            cfg["n_regimes"], cfg["d"], cfg["n_trials"], cfg["n_steps"], cfg["noise"], cfg["seed"]
        )
        if cfg["trials_dir"]:
            tdir = Path(cfg["trials_dir"])
            tdir.mkdir(parents=True, exist_ok=True)
            with open(tdir / "labels.csv", "w", newline="\n") as fh:
                fh.write("trial,label\n")
                for i, lab in enumerate(labels):
                    fh.write(f"{i},{lab}\n")
            for i, traj in enumerate(trajs):
                dynamics.save_trajectory_csv(tdir / f"trial_{i:03d}.csv", traj)
            _write_sidecar(tdir / "labels.csv", "simulate multiregime", cfg)
        pairs = dynamics.pairs_from_trajectories(trajs)
    dynamics.save_snapshots(cfg["out"], pairs, fmt=cfg["format"])
    _write_sidecar(cfg["out"], f"simulate {args.system}", cfg)
    print(f"wrote {cfg['out']}: m={pairs.m} d={pairs.d}")
    return 0


def cmd_train(args):
    allowed = [
        "data", "out_dir", "hidden", "n_train", "dict_seed", "learning_rate", "sigma",
        "loss_threshold", "max_epochs", "batch_size", "seed", "k_update_period",
        "checkpoint_every",
    ]
    defaults = {
        "hidden": [64, 64, 64],
        "n_train": 16,
        "dict_seed": 0,
        "learning_rate": 1e-3,
        "sigma": 1e-6,
        "loss_threshold": 1e-8,
        "max_epochs": 200,
        "batch_size": "full",
        "seed": 0,
        "k_update_period": 1,
        "checkpoint_every": 0,
    }
    cfg = _resolve(args, allowed, defaults=defaults)
    pairs = dynamics.load_snapshots(cfg["data"])
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    ndict = NeuralDictionary(
        d=pairs.d, hidden=cfg["hidden"], n_train=cfg["n_train"], seed=cfg["dict_seed"]
    )
    batch_size = cfg["batch_size"]
    if isinstance(batch_size, str) and batch_size != "full":
        batch_size = int(batch_size)
    config = TrainConfig(
        learning_rate=float(cfg["learning_rate"]),
        sigma=float(cfg["sigma"]),
        loss_threshold=float(cfg["loss_threshold"]),
        max_epochs=int(cfg["max_epochs"]),
        batch_size=batch_size,
        seed=int(cfg["seed"]),
        k_update_period=int(cfg["k_update_period"]),
    )

    every = int(cfg["checkpoint_every"])
    history = []

    def checkpoint(epoch, nd, J):
        history.append((epoch, J))
        if every and epoch % every == 0:
            nd.save_json(out_dir / f"checkpoint_{epoch:05d}.json")
            write_loss_csv(out_dir / f"checkpoint_{epoch:05d}_loss.csv", history)

    try:
        ndict, spectrum, report = train(pairs, ndict, config, on_epoch=checkpoint)
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        write_loss_csv(out_dir / "loss.csv", exc.report.loss_history)
        return 2
    ndict.save_json(out_dir / "dictionary.json")
    write_spectrum_csv(out_dir / "spectrum.csv", spectrum)
    write_loss_csv(out_dir / "loss.csv", report.loss_history)
    for name in ("dictionary.json", "spectrum.csv", "loss.csv"):
        _write_sidecar(out_dir / name, "train", cfg)
    status = "converged" if report.converged else "max-epochs"
    print(
        f"train {status}: epochs={report.epochs_run} final_J={report.final_J:.6g} "
        f"initial_J={report.loss_history[0][1]:.6g}"
    )
    return 0


def cmd_spectrum(args):
    allowed = ["data", "dict", "sigma", "epsilon", "out"]
    cfg = _resolve(args, allowed, defaults={"sigma": None, "epsilon": None})
    pairs = dynamics.load_snapshots(cfg["data"])
    dictionary = _load_dictionary(cfg["dict"], pairs.X)
    sigma = None if cfg["sigma"] is None else float(cfg["sigma"])
    _, _, _, spectrum = _edmd_spectrum(pairs, dictionary, sigma)
    if cfg["epsilon"] is not None:
        from .residual import resdmd_filter

        spectrum = resdmd_filter(spectrum, float(cfg["epsilon"]))
    write_spectrum_csv(cfg["out"], spectrum)
    _write_sidecar(cfg["out"], "spectrum", cfg)
    print(f"wrote {cfg['out']}: {len(spectrum)} eigenpairs")
    return 0


def cmd_pseudospec(args):
    allowed = ["data", "dict", "grid", "epsilon", "sigma", "out"]
    cfg = _resolve(args, allowed, defaults={"sigma": 0.0})
    pairs = dynamics.load_snapshots(cfg["data"])
    dictionary = _load_dictionary(cfg["dict"], pairs.X)
    psi_x = evaluate_batch(dictionary, pairs.X)
    psi_y = evaluate_batch(dictionary, pairs.Y)
    gram = compute_gram(psi_x, psi_y)
    parts = [float(v) for v in str(cfg["grid"]).split(",")]
    if len(parts) != 6:
        raise ConfigError("grid must be re_min,re_max,im_min,im_max,n_re,n_im")
    grid = complex_grid(parts[0], parts[1], parts[2], parts[3], int(parts[4]), int(parts[5]))
    ps = pseudospectrum(gram, grid, epsilon=float(cfg["epsilon"]), sigma=float(cfg["sigma"]))
    write_pseudospectrum_csv(cfg["out"], ps)
    _write_sidecar(cfg["out"], "pseudospec", cfg)
    print(f"wrote {cfg['out']}: {ps.accepted.sum()}/{len(grid)} grid points accepted")
    return 0


def cmd_modes(args):
    allowed = ["data", "dict", "sigma", "out"]
    cfg = _resolve(args, allowed, defaults={"sigma": None})
    pairs = dynamics.load_snapshots(cfg["data"])
    dictionary = _load_dictionary(cfg["dict"], pairs.X)
    sigma = None if cfg["sigma"] is None else float(cfg["sigma"])
    psi_x, _, _, spectrum = _edmd_spectrum(pairs, dictionary, sigma)
    modes = koopman_modes(spectrum, psi_x, pairs.X)
    write_modes_csv(cfg["out"], modes)
    _write_sidecar(cfg["out"], "modes", cfg)
    print(f"wrote {cfg['out']}: {modes.shape[0]} modes x d={modes.shape[1]}")
    return 0


def cmd_hankel(args):
    allowed = ["traj", "delay", "rank", "out"]
    cfg = _resolve(args, allowed, defaults={"rank": "full"})
    traj = dynamics.load_trajectory_csv(cfg["traj"])
    hankel = build_hankel(traj, int(cfg["delay"]))
    rank = cfg["rank"]
    if rank != "full":
        rank = int(rank)
    spectrum = hankel_dmd(hankel, rank=rank)
    write_spectrum_csv(cfg["out"], spectrum)
    _write_sidecar(cfg["out"], "hankel", cfg)
    print(f"wrote {cfg['out']}: {len(spectrum)} eigenpairs from delay {cfg['delay']}")
    return 0


def cmd_dbi(args):
    allowed = ["features", "out"]
    cfg = _resolve(args, allowed)
    with open(cfg["features"]) as fh:
        first = fh.readline()
        skip = 1 if first.startswith("#") or first.lower().startswith("label") else 0
    data = np.loadtxt(cfg["features"], delimiter=",", skiprows=skip, ndmin=2)
    labels = data[:, 0].astype(int)
    feats = data[:, 1:]
    value = davies_bouldin(feats, labels)
    with open(cfg["out"], "w", newline="\n") as fh:
        json.dump({"dbi": value, "n_clusters": int(len(np.unique(labels)))}, fh, indent=1)
        fh.write("\n")
    _write_sidecar(cfg["out"], "dbi", cfg)
    print(f"dbi={value:.6g}")
    return 0


def cmd_plot(args):
    allowed = ["infile", "out"]
    cfg = _resolve(args, allowed)
    with open(cfg["infile"]) as fh:
        header = fh.readline().strip()
    if header.startswith("re_lambda"):
        lams, residuals = read_spectrum_csv(cfg["infile"])
        render_spectrum_svg(cfg["out"], lams, residuals)
    elif header.startswith("re_z"):
        ps = read_pseudospectrum_csv(cfg["infile"])
        render_pseudospectrum_svg(cfg["out"], ps)
    else:
        raise ConfigError(f"{cfg['infile']}: unrecognized CSV header {header!r}")
    _write_sidecar(cfg["out"], "plot", cfg)
    print(f"wrote {cfg['out']}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_config(p):
    p.add_argument("--config", help="JSON config file; flags override its keys")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="koopres",
        description="Koopman spectral analysis via residual minimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate snapshot data")
    psub = p.add_subparsers(dest="system", required=True)
    pp = psub.add_parser("pendulum")
    _add_config(pp)
    pp.add_argument("--n-init", dest="n_init", type=int)
    pp.add_argument("--n-steps", dest="n_steps", type=int)
    pp.add_argument("--dt", type=float)
    pp.add_argument("--seed", type=int)
    pp.add_argument("--out")
    pp.add_argument("--format", choices=["csv", "binary"])
    pp.add_argument("--traj-out", dest="traj_out")
    pp.set_defaults(func=cmd_simulate)
    pl = psub.add_parser("linear")
    _add_config(pl)
    pl.add_argument("--matrix", help='rows `;`-separated, e.g. "0.9,0;0,0.5"')
    pl.add_argument("--n-init", dest="n_init", type=int)
    pl.add_argument("--n-steps", dest="n_steps", type=int)
    pl.add_argument("--seed", type=int)
    pl.add_argument("--out")
    pl.add_argument("--format", choices=["csv", "binary"])
    pl.add_argument("--traj-out", dest="traj_out")
    pl.set_defaults(func=cmd_simulate)
    pm = psub.add_parser("multiregime")
    _add_config(pm)
    pm.add_argument("--n-regimes", dest="n_regimes", type=int)
    pm.add_argument("--d", type=int)
    pm.add_argument("--n-trials", dest="n_trials", type=int)
    pm.add_argument("--n-steps", dest="n_steps", type=int)
    pm.add_argument("--noise", type=float)
    pm.add_argument("--seed", type=int)
    pm.add_argument("--out")
    pm.add_argument("--format", choices=["csv", "binary"])
    pm.add_argument("--trials-dir", dest="trials_dir")
    pm.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a neural dictionary (ResKoopNet loop)")
    _add_config(p)
    p.add_argument("--data")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--n-train", dest="n_train", type=int)
    p.add_argument("--dict-seed", dest="dict_seed", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--loss-threshold", dest="loss_threshold", type=float)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size")
    p.add_argument("--seed", type=int)
    p.add_argument("--k-update-period", dest="k_update_period", type=int)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("spectrum", help="EDMD spectrum with residuals")
    _add_config(p)
    p.add_argument("--data")
    p.add_argument("--dict", help="monomial:<deg> | rbf:<n>,<bw>,<seed> | fourier_hermite:<fo>,<ho> | trained .json")
    p.add_argument("--sigma", type=float)
    p.add_argument("--epsilon", type=float, help="optional ResDMD filter threshold")
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("pseudospec", help="pseudospectrum grid scan")
    _add_config(p)
    p.add_argument("--data")
    p.add_argument("--dict")
    p.add_argument("--grid", help="re_min,re_max,im_min,im_max,n_re,n_im")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pseudospec)

    p = sub.add_parser("modes", help="Koopman modes of the full-state observable")
    _add_config(p)
    p.add_argument("--data")
    p.add_argument("--dict")
    p.add_argument("--sigma", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("hankel", help="Hankel-DMD of a trajectory CSV")
    _add_config(p)
    p.add_argument("--traj")
    p.add_argument("--delay", type=int)
    p.add_argument("--rank")
    p.add_argument("--out")
    p.set_defaults(func=cmd_hankel)

    p = sub.add_parser("dbi", help="Davies-Bouldin index of labeled features")
    _add_config(p)
    p.add_argument("--features", help="CSV rows: label,f_1,...,f_p")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dbi)

    p = sub.add_parser("plot", help="render a spectrum or pseudospectrum CSV to SVG")
    _add_config(p)
    p.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
