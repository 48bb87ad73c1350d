"""File formats: the shared plain-text matrix format, binary PGM images
and learning-state checkpoints."""

import json
import os

import numpy as np

from .errors import DimensionMismatch
from .operators import AnalysisOperator


def save_matrix(path, matrix):
    """Write a matrix as "a n" then a rows of n values, 17 significant
    digits (lossless double round trip)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    a, n = matrix.shape
    with open(path, "w") as fh:
        fh.write(f"{a} {n}\n")
        for row in matrix:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_matrix(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DimensionMismatch(f"{path}: bad matrix header {header!r}")
        a, n = int(header[0]), int(header[1])
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (a, n):
        raise DimensionMismatch(
            f"{path}: header says {a}x{n}, body is {data.shape[0]}x{data.shape[1]}"
        )
    return data


def save_operator(path, op):
    save_matrix(path, op.entries)


def load_operator(path, tight=True):
    return AnalysisOperator(load_matrix(path), tight=tight)


def save_pgm(path, pixels):
    """Write an 8-bit binary (P5) PGM; values are clipped and rounded."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise DimensionMismatch("PGM output requires a 2-d array")
    h, w = pixels.shape
    data = np.clip(np.rint(pixels), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def load_pgm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise DimensionMismatch(f"{path}: not a binary PGM")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise DimensionMismatch(f"{path}: only 8-bit PGM supported")
    pos += 1  # single whitespace after maxval
    data = np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos)
    return data.reshape(h, w).astype(float)


def save_state(directory, state, config):
    """Checkpoint a learning state: matrix files plus a JSON header."""
    os.makedirs(directory, exist_ok=True)
    save_matrix(os.path.join(directory, "omega.txt"), state.operator.entries)
    save_matrix(os.path.join(directory, "x.txt"), state.signals.entries)
    save_matrix(os.path.join(directory, "b.txt"), state.dual)
    save_matrix(os.path.join(directory, "z.txt"), state.analysis_codes)
    header = {
        "outer_iterations": state.outer_iterations,
        "inner_iterations": state.inner_iterations,
        "objective_trace": list(state.objective_trace),
        "config": config_to_dict(config),
    }
    with open(os.path.join(directory, "state.json"), "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_to_dict(cfg):
    return {
        "lam": cfg.lam,
        "gamma": cfg.gamma,
        "eta0": cfg.eta0,
        "rho": cfg.rho,
        "eps": cfg.eps,
        "k_max_inner": cfg.k_max_inner,
        "k_max_drs": cfg.k_max_drs,
        "outer_iters": cfg.outer_iters,
        "constraint": "C" if cfg.null_space is None else f"C_N(r={cfg.null_space.r})",
        "seed": cfg.seed,
        "noiseless": cfg.noiseless,
    }
