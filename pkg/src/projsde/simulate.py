"""Simulation of the observation sample: N paths observed at k/n, k = 0..n.

Paths are integrated on a fine grid of step 1/(n * substeps) and every
``substeps``-th point is stored.  Each path draws its Brownian increments from
its own stream keyed by (seed, path index).
"""

from dataclasses import dataclass
import io
import struct
from typing import Optional

import numpy as np

from . import rng
from .errors import PreconditionError, SimulationDiverged

_BATCH_ELEMENTS = 1 << 22


@dataclass
class PathSample:
    """N x (n + 1) observations on [0, 1] with step delta = 1/n."""

    values: np.ndarray
    n: int
    N: int
    delta: float
    seed: int
    substeps: int
    fine: Optional[np.ndarray] = None
    dW: Optional[np.ndarray] = None

    @property
    def has_fine_grid(self):
        return self.fine is not None and self.dW is not None

    def times(self):
        return np.arange(self.n + 1) * self.delta

    # --- serialization -------------------------------------------------
    # binary layout, little endian:
    #   magic b"PSMP", uint32 version=1, uint64 N, uint64 n, float64 delta,
    #   uint64 seed, uint64 substeps, then N*(n+1) float64 row-major values
    _MAGIC = b"PSMP"
    _HEADER = struct.Struct("<4sIQQdQQ")

    def to_bytes(self):
        head = self._HEADER.pack(self._MAGIC, 1, self.N, self.n, self.delta,
                                 self.seed % 2**64, self.substeps)
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data):
        magic, version, N, n, delta, seed, substeps = cls._HEADER.unpack_from(data, 0)
        if magic != cls._MAGIC or version != 1:
            raise ValueError("not a PathSample binary file")
        body = np.frombuffer(data, dtype="<f8", offset=cls._HEADER.size)
        if body.size != N * (n + 1):
            raise ValueError("PathSample binary file is truncated")
        return cls(values=body.reshape(N, n + 1).astype(float), n=n, N=N,
                   delta=delta, seed=seed, substeps=substeps)

    def to_csv(self):
        buf = io.StringIO()
        buf.write("N,n,delta,seed,substeps\n")
        buf.write(f"{self.N},{self.n},{self.delta!r},{self.seed},{self.substeps}\n")
        for row in self.values:
            buf.write(",".join(repr(float(v)) for v in row))
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        lines = text.strip().splitlines()
        if not lines or lines[0].strip() != "N,n,delta,seed,substeps":
            raise ValueError("not a PathSample CSV file")
        N, n, delta, seed, substeps = lines[1].split(",")
        values = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]], dtype=float)
        N, n = int(N), int(n)
        if values.shape != (N, n + 1):
            raise ValueError("PathSample CSV has the wrong shape")
        return cls(values=values, n=n, N=N, delta=float(delta), seed=int(seed),
                   substeps=int(substeps))

    def save(self, path):
        path = str(path)
        if path.endswith(".csv"):
            with open(path, "w", newline="") as fh:
                fh.write(self.to_csv())
        else:
            with open(path, "wb") as fh:
                fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        path = str(path)
        if path.endswith(".csv"):
            with open(path) as fh:
                return cls.from_csv(fh.read())
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def brownian_increments(seed, path_ids, steps, dt, purpose=rng.SAMPLE):
    """Row j holds the increments of path ``path_ids[j]``, from that path's own stream."""
    out = np.empty((len(path_ids), steps))
    sd = np.sqrt(dt)
    for row, j in enumerate(path_ids):
        out[row] = rng.stream(seed, purpose, j).standard_normal(steps) * sd
    return out


def integrate_paths(model, dW, dt, scheme="euler", keep_every=1, x0=0.0):
    """Integrate from ``x0`` with the given increments; returns every ``keep_every``-th point."""
    P, steps = dW.shape
    out = np.empty((P, steps // keep_every + 1))
    x = np.full(P, float(x0))
    out[:, 0] = x
    milstein = scheme == "milstein"
    if scheme not in ("euler", "milstein"):
        raise PreconditionError(f"unknown scheme {scheme!r}")
    for i in range(steps):
        w = dW[:, i]
        s = model.sigma(x)
        step = model.b(x) * dt + s * w
        if milstein:
            step = step + 0.5 * s * model.sigma_prime(x) * (w * w - dt)
        x = x + step
        if (i + 1) % keep_every == 0:
            out[:, (i + 1) // keep_every] = x
    if not np.all(np.isfinite(out)):
        raise SimulationDiverged("non-finite value in simulated path")
    return out


def simulate_sample(model, N, n, substeps=64, seed=0, keep_fine=False, scheme="euler",
                    path_ids=None, threads=1, purpose=rng.SAMPLE):
    """Simulate N independent paths on [0, 1] observed with step 1/n.

    ``path_ids`` selects which per-path streams to use (default 0..N-1), so a
    path's trajectory depends only on (seed, its id).
    """
    if N < 1 or n < 2 or substeps < 1:
        raise PreconditionError("need N >= 1, n >= 2, substeps >= 1")
    model = model.shifted()
    ids = np.arange(N) if path_ids is None else np.asarray(path_ids, dtype=np.int64)
    if ids.size != N:
        raise PreconditionError("path_ids must have N entries")
    steps = n * substeps
    dt = 1.0 / steps
    batch = max(1, _BATCH_ELEMENTS // steps)
    chunks = [ids[i:i + batch] for i in range(0, N, batch)]

    def run(chunk):
        dW = brownian_increments(seed, chunk, steps, dt, purpose)
        if keep_fine:
            fine = integrate_paths(model, dW, dt, scheme)
            return fine[:, ::substeps], fine, dW
        return integrate_paths(model, dW, dt, scheme, keep_every=substeps), None, None

    parts = rng.ordered_map(run, chunks, threads)
    values = np.concatenate([p[0] for p in parts])
    fine = np.concatenate([p[1] for p in parts]) if keep_fine else None
    dW = np.concatenate([p[2] for p in parts]) if keep_fine else None
    return PathSample(values=values, n=int(n), N=int(N), delta=1.0 / n, seed=int(seed),
                      substeps=int(substeps), fine=fine, dW=dW)


def iter_path_batches(model, paths, n, substeps, seed, purpose=rng.EVAL, batch=None):
    """Yield observation arrays for ``paths`` paths in fixed-size batches (constant memory)."""
    steps = n * substeps
    if batch is None:
        batch = max(1, _BATCH_ELEMENTS // steps)
    for start in range(0, paths, batch):
        ids = np.arange(start, min(paths, start + batch))
        yield simulate_sample(model, len(ids), n, substeps, seed, path_ids=ids,
                              purpose=purpose).values


@dataclass
class ErrorTable:
    steps: np.ndarray
    rms: np.ndarray
    se: np.ndarray
    slope: float
    reference_substeps: int

    def rows(self):
        return [
            {"step": float(h), "rms": float(r), "se": float(s)}
            for h, r, s in zip(self.steps, self.rms, self.se)
        ]


def strong_error_probe(model, n, substeps_list, replicates, seed=0, refine=16, scheme="euler"):
    """Strong error at t = 1 of coupled coarse solutions against a fine reference.

    All levels use the same Brownian path: coarse increments are sums of the
    reference increments.  Returns the RMS error per level and the fitted
    log-log slope of RMS error against step size.
    """
    substeps_list = [int(s) for s in substeps_list]
    if replicates < 100:
        raise PreconditionError("strong_error_probe needs replicates >= 100")
    if any(b <= a for a, b in zip(substeps_list, substeps_list[1:])):
        raise PreconditionError("substeps_list must be increasing")
    model = model.shifted()
    s_ref = substeps_list[-1] * int(refine)
    if any(s_ref % s for s in substeps_list):
        raise PreconditionError("substeps must divide the reference refinement")
    steps_ref = n * s_ref
    dW = brownian_increments(seed, np.arange(replicates), steps_ref, 1.0 / steps_ref)
    ref = integrate_paths(model, dW, 1.0 / steps_ref, scheme, keep_every=steps_ref)[:, -1]
    rms, se, hs = [], [], []
    for s in substeps_list:
        g = s_ref // s
        coarse = dW.reshape(replicates, n * s, g).sum(axis=2)
        xT = integrate_paths(model, coarse, 1.0 / (n * s), scheme, keep_every=n * s)[:, -1]
        e2 = (xT - ref) ** 2
        r = float(np.sqrt(e2.mean()))
        rms.append(r)
        # delta method: se(sqrt(m)) = se(m) / (2 sqrt(m))
        se.append(float(e2.std(ddof=1) / np.sqrt(replicates) / (2 * r)) if r > 0 else 0.0)
        hs.append(1.0 / (n * s))
    hs, rms, se = np.array(hs), np.array(rms), np.array(se)
    pos = rms > 0
    slope = float(np.polyfit(np.log(hs[pos]), np.log(rms[pos]), 1)[0]) if pos.sum() >= 2 else 0.0
    return ErrorTable(steps=hs, rms=rms, se=se, slope=slope, reference_substeps=s_ref)
