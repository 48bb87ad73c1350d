"""Experiment driver: JSON configs in, CSV / PGM / matrix artifacts out.

Commands cover the four experiment families (synthetic recovery,
identifiability sampling, patch learning, patch-wise denoising) plus a
phantom-image generator.  Heavy imports happen inside the command
functions so that --threads can cap the BLAS pool before numpy loads.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys

from .errors import AolError, ConfigError

log = logging.getLogger("aol")


def _sub_seed(seed, *keys):
    import numpy as np

    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def _load_config(path, required, optional=()):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(
            f"{path}:{err.lineno}:{err.colno}: invalid JSON ({err.msg})"
        ) from err
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    missing = [k for k in required if k not in cfg]
    if missing:
        raise ConfigError(f"{path}: missing required keys {missing}")
    unknown = [k for k in cfg if k not in required and k not in optional]
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    return cfg


def _write_csv(path, header, rows, schema):
    with open(path, "w", newline="") as fh:
        fh.write(f"# aol-csv {schema} v1\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _gamma_value(raw):
    if raw in ("inf", "Inf", "infinity"):
        return math.inf
    return float(raw)


def cmd_recover_synthetic(cfg_path, out_dir, seed_override=None):
    import numpy as np

    from .datagen import perturb_operator, random_untf, sample_cosparse
    from .imaging import row_recovery_rate
    from .learning import LearnConfig, operator_update
    from .operators import objective_l1

    cfg = _load_config(
        cfg_path,
        required=["a", "n", "l", "q_list", "gamma_list", "trials", "iters", "seed"],
        optional=["eta0", "rho", "eps"],
    )
    seed = int(cfg["seed"] if seed_override is None else seed_override)
    a, n, l = int(cfg["a"]), int(cfg["n"]), int(cfg["l"])
    gammas = [_gamma_value(g) for g in cfg["gamma_list"]]
    learn = LearnConfig(
        eta0=float(cfg.get("eta0", 0.1)),
        rho=float(cfg.get("rho", 0.9)),
        eps=float(cfg.get("eps", 1e-7)),
        k_max_inner=int(cfg["iters"]),
        noiseless=True,
        seed=seed,
    )
    rows = []
    for qi, q in enumerate(cfg["q_list"]):
        q = int(q)
        for trial in range(int(cfg["trials"])):
            op0 = random_untf(a, n, _sub_seed(seed, 0, qi, trial))
            X = sample_cosparse(op0, q, l, _sub_seed(seed, 1, qi, trial))
            for gi, gamma in enumerate(gammas):
                init = perturb_operator(op0, gamma, _sub_seed(seed, 2, qi, trial, gi))
                run_seed = _sub_seed(seed, 3, qi, trial, gi)
                sign_rng, row_rng = (
                    np.random.default_rng(s)
                    for s in np.random.SeedSequence(run_seed).spawn(2)
                )
                result = operator_update(
                    X, init, learn, sign_rng=sign_rng, row_rng=row_rng
                )
                rows.append(
                    (
                        q,
                        cfg["gamma_list"][gi],
                        trial,
                        f"{row_recovery_rate(result.operator, op0):.6f}",
                        f"{objective_l1(result.operator, X):.17g}",
                        result.iterations,
                    )
                )
    rows.sort(key=lambda r: (r[0], str(r[1]), r[2]))
    _write_csv(
        os.path.join(out_dir, "recovery.csv"),
        ["q", "gamma", "trial", "recovery_rate", "final_objective", "iters"],
        rows,
        "recover_synthetic",
    )


def cmd_identifiability(cfg_path, out_dir, seed_override=None):
    from .datagen import random_untf, sample_cosparse
    from .identifiability import identifiability_fraction

    cfg = _load_config(
        cfg_path,
        required=["a", "n", "l", "q_list", "samples", "operators", "seed"],
        optional=["zero_tol"],
    )
    seed = int(cfg["seed"] if seed_override is None else seed_override)
    a, n, l = int(cfg["a"]), int(cfg["n"]), int(cfg["l"])
    zero_tol = float(cfg.get("zero_tol", 1e-10))
    sample_rows = []
    summary = []
    for i in range(int(cfg["operators"])):
        op0 = random_untf(a, n, _sub_seed(seed, 0, i))
        for qi, q in enumerate(cfg["q_list"]):
            q = int(q)
            X = sample_cosparse(op0, q, l, _sub_seed(seed, 1, i, qi))
            report = identifiability_fraction(
                op0, X, int(cfg["samples"]), _sub_seed(seed, 2, i, qi), zero_tol
            )
            for s in range(report.n_samples):
                sample_rows.append(
                    (
                        i,
                        q,
                        s,
                        f"{report.lemma3_margins[s]:.17g}",
                        f"{report.theorem1_margins[s]:.17g}",
                        int(report.lemma3_margins[s] > 0),
                        int(report.theorem1_margins[s] > 0),
                    )
                )
            summary.append(
                {
                    "operator": i,
                    "q": q,
                    "lemma3_pct": 100.0 * report.lemma3_fraction,
                    "theorem1_pct": 100.0 * report.theorem1_fraction,
                    "cosupport_size": report.cosupport_size,
                    "kernel_dim": report.kernel_dim,
                }
            )
    _write_csv(
        os.path.join(out_dir, "samples.csv"),
        [
            "operator",
            "q",
            "sample_id",
            "lemma3_margin",
            "theorem1_margin",
            "lemma3_satisfied",
            "theorem1_satisfied",
        ],
        sample_rows,
        "identifiability",
    )
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _random_feasible(a, n, seed, null_space):
    import numpy as np

    from .datagen import random_untf
    from .operators import AnalysisOperator, untf_project

    if null_space is None:
        return random_untf(a, n, seed)
    rng = np.random.default_rng(seed)
    draw = AnalysisOperator(rng.standard_normal((a, n)))
    return untf_project(draw, ns=null_space, max_alt=1000, tol=1e-8, rng=rng)


def cmd_learn_patches(cfg_path, out_dir, seed_override=None):
    from . import io
    from .imaging import GrayImage, extract_patches, haar_operator
    from .learning import LearnConfig, aola
    from .operators import NullSpaceBasis, objective_l1

    cfg = _load_config(
        cfg_path,
        required=[
            "image",
            "p",
            "l",
            "a",
            "constraint",
            "lambda",
            "gamma",
            "outer_iters",
            "inner_iters",
            "seed",
        ],
        optional=["noiseless", "eta0", "rho", "eps", "drs_iters"],
    )
    seed = int(cfg["seed"] if seed_override is None else seed_override)
    p, l, a = int(cfg["p"]), int(cfg["l"]), int(cfg["a"])
    if cfg["constraint"] not in ("C", "C_N"):
        raise ConfigError(f"{cfg_path}: constraint must be 'C' or 'C_N'")
    if not os.path.exists(cfg["image"]):
        raise ConfigError(f"{cfg_path}: image file {cfg['image']} does not exist")
    ns = NullSpaceBasis.dc(p * p) if cfg["constraint"] == "C_N" else None
    img = GrayImage(io.load_pgm(cfg["image"]))
    patches = extract_patches(img, p, count=l, mean_remove=True, seed=_sub_seed(seed, 0))
    init = _random_feasible(a, p * p, _sub_seed(seed, 1), ns)
    learn = LearnConfig(
        lam=float(cfg["lambda"]),
        gamma=float(cfg["gamma"]),
        eta0=float(cfg.get("eta0", 0.1)),
        rho=float(cfg.get("rho", 0.9)),
        eps=float(cfg.get("eps", 1e-7)),
        k_max_inner=int(cfg["inner_iters"]),
        k_max_drs=int(cfg.get("drs_iters", 100)),
        outer_iters=int(cfg["outer_iters"]),
        null_space=ns,
        seed=_sub_seed(seed, 2),
        noiseless=bool(cfg.get("noiseless", True)),
    )
    state = aola(patches.signals, init, learn)
    io.save_operator(os.path.join(out_dir, "operator.txt"), state.operator)
    io.save_state(os.path.join(out_dir, "checkpoint"), state, learn)
    baseline = objective_l1(haar_operator(p), patches.signals)
    rows = [
        (step, f"{obj:.17g}", f"{baseline:.17g}")
        for step, obj in enumerate(state.objective_trace)
    ]
    _write_csv(
        os.path.join(out_dir, "trace.csv"),
        ["step", "objective", "baseline_objective"],
        rows,
        "learn_patches",
    )


def cmd_denoise(cfg_path, out_dir, seed_override=None):
    import numpy as np

    from . import io
    from .imaging import (
        GrayImage,
        denoise_patches,
        extract_patches,
        fd_operator,
        psnr,
        reconstruct_overlap,
    )

    cfg = _load_config(
        cfg_path,
        required=["image", "operator", "noise_sigma", "lambda", "gamma", "trials", "seed"],
        optional=["p", "drs_iters"],
    )
    seed = int(cfg["seed"] if seed_override is None else seed_override)
    p = int(cfg.get("p", 8))
    if not os.path.exists(cfg["image"]):
        raise ConfigError(f"{cfg_path}: image file {cfg['image']} does not exist")
    if cfg["operator"] == "fd":
        op = fd_operator(p)
    else:
        if not os.path.exists(cfg["operator"]):
            raise ConfigError(
                f"{cfg_path}: operator file {cfg['operator']} does not exist"
            )
        entries = io.load_matrix(cfg["operator"])
        from .operators import AnalysisOperator

        gram_res = np.linalg.norm(entries.T @ entries - np.eye(entries.shape[1]))
        op = AnalysisOperator(entries, tight=bool(gram_res <= 1e-4))
        p = int(math.isqrt(op.n))
    clean = GrayImage(io.load_pgm(cfg["image"]))
    sigma = float(cfg["noise_sigma"])
    rows = []
    for trial in range(int(cfg["trials"])):
        rng = np.random.default_rng(_sub_seed(seed, trial))
        noisy = GrayImage(clean.pixels + sigma * rng.standard_normal(clean.shape))
        patches = extract_patches(noisy, p, count=None, mean_remove=True)
        denoised_patches = denoise_patches(
            patches,
            op,
            float(cfg["lambda"]),
            float(cfg["gamma"]),
            iters=int(cfg.get("drs_iters", 100)),
        )
        denoised = reconstruct_overlap(denoised_patches)
        if trial == 0:
            io.save_pgm(os.path.join(out_dir, "denoised.pgm"), denoised.pixels)
        rows.append(
            (trial, f"{psnr(clean, noisy):.6f}", f"{psnr(clean, denoised):.6f}")
        )
    _write_csv(
        os.path.join(out_dir, "metrics.csv"),
        ["trial", "psnr_noisy", "psnr_denoised"],
        rows,
        "denoise",
    )


def cmd_phantom(cfg_path, out_dir, seed_override=None):
    from . import io
    from .imaging import shepp_logan

    cfg = _load_config(cfg_path, required=["size"], optional=["name"])
    img = shepp_logan(int(cfg["size"]))
    io.save_pgm(os.path.join(out_dir, cfg.get("name", "phantom.pgm")), img.pixels)


_COMMANDS = {
    "recover-synthetic": cmd_recover_synthetic,
    "identifiability": cmd_identifiability,
    "learn-patches": cmd_learn_patches,
    "denoise": cmd_denoise,
    "phantom": cmd_phantom,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="aol", description="analysis operator learning experiment driver"
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS threads")
    args = parser.parse_args(argv)

    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    logging.basicConfig(level=os.environ.get("AOL_LOG", "WARNING").upper())

    try:
        os.makedirs(args.out, exist_ok=True)
        _COMMANDS[args.command](args.config, args.out, args.seed)
    except ConfigError as err:
        print(f"aol: config error: {err}", file=sys.stderr)
        return 2
    except AolError as err:
        print(f"aol: numerical failure: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
