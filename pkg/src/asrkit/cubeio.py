"""Binary policy-cube container and plain-text export.

Layout: magic ``ASRQ1``, little-endian uint32 format version, uint64
header length, a canonical JSON header (generating parameters, grids and
diagnostics), then for each day n = 0..N and each row (tree column, or
S-knot in impact mode) three blocks in declared order: theta as float32,
target q-index as int32, exercise flags as a packed bitset.  Theta is
float64 in memory during solves and downcast on write; a write -> read ->
write cycle is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grids import GridSpec
from .model import ContractSpec, MarketParams, RiskParams
from .solver import CUBE_FORMAT_VERSION, PolicyCube, ValueSurface

__all__ = ["write_cube", "read_cube", "CubeFormatError", "cube_to_csv"]

MAGIC = b"ASRQ1"


class CubeFormatError(ValueError):
    """The file is not a well-formed policy-cube container."""


def _header_dict(cube: PolicyCube) -> dict:
    c, m, r, g = cube.contract, cube.market, cube.risk, cube.grid_spec
    return {
        "format_version": cube.version,
        "impact": cube.impact,
        "contract": {"F": c.F, "N": c.N, "dt": c.dt, "beta": c.beta,
                     "exercise_set": sorted(c.exercise_set)},
        "market": {"S0": m.S0, "sigma": m.sigma,
                   "volume": list(m.volume) if isinstance(m.volume, tuple) else m.volume,
                   "eta": m.eta, "phi": m.phi, "psi": m.psi, "k_perm": m.k_perm},
        "risk": {"gamma": r.gamma, "rho_lo": r.rho_lo, "rho_hi": r.rho_hi,
                 "rho_exec": r.rho_exec},
        "grid": {"n_q": g.n_q, "n_A": g.n_A, "q_max": g.q_max, "xi": g.xi, "n_S": g.n_S},
        "rows_per_day": "sgrid" if cube.impact else "tree",
        "diagnostics": cube.diagnostics,
    }


def _encode_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_cube(cube: PolicyCube, file: str | Path) -> None:
    """Serialise a policy cube; theta is stored as float32."""
    header = _encode_header(_header_dict(cube))
    with open(file, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(cube.version).tobytes())
        fh.write(np.uint64(len(header)).tobytes())
        fh.write(header)
        for surf in cube.surfaces:
            rows = surf.theta.shape[0]
            for z in range(rows):
                fh.write(np.ascontiguousarray(surf.theta[z], dtype=np.float32).tobytes())
                fh.write(np.ascontiguousarray(surf.target_idx[z], dtype=np.int32).tobytes())
                fh.write(np.packbits(surf.exercise[z].reshape(-1)).tobytes())


def read_cube(file: str | Path) -> PolicyCube:
    """Load a policy cube; surfaces come back exactly as stored (float32)."""
    with open(file, "rb") as fh:
        if fh.read(5) != MAGIC:
            raise CubeFormatError(f"{file}: bad magic, not a policy-cube container")
        version = int(np.frombuffer(fh.read(4), dtype=np.uint32)[0])
        if version != CUBE_FORMAT_VERSION:
            raise CubeFormatError(f"{file}: unsupported format version {version}")
        hlen = int(np.frombuffer(fh.read(8), dtype=np.uint64)[0])
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CubeFormatError(f"{file}: corrupt header: {exc}") from None

        hc, hm, hr, hg = header["contract"], header["market"], header["risk"], header["grid"]
        contract = ContractSpec(F=hc["F"], N=hc["N"], dt=hc["dt"], beta=hc["beta"],
                                exercise_set=frozenset(hc["exercise_set"]))
        vol = hm["volume"]
        market = MarketParams(S0=hm["S0"], sigma=hm["sigma"],
                              volume=tuple(vol) if isinstance(vol, list) else vol,
                              eta=hm["eta"], phi=hm["phi"], psi=hm["psi"],
                              k_perm=hm["k_perm"])
        risk = RiskParams(**hr)
        grid_spec = GridSpec(n_q=hg["n_q"], n_A=hg["n_A"], q_max=hg["q_max"],
                             xi=hg["xi"], n_S=hg["n_S"])
        impact = bool(header["impact"])
        from .grids import build_grids
        grids = build_grids(grid_spec, contract, market, risk)

        n_q, n_a = grid_spec.n_q, grid_spec.n_A
        cell = n_q * n_a
        bits = (cell + 7) // 8
        surfaces = []
        for n in range(contract.N + 1):
            rows = grid_spec.n_S if impact else 4 * n + 1
            theta = np.empty((rows, n_q, n_a), dtype=np.float32)
            target = np.empty((rows, n_q, n_a), dtype=np.int32)
            exercise = np.empty((rows, n_q, n_a), dtype=bool)
            for z in range(rows):
                buf = fh.read(cell * 4)
                if len(buf) != cell * 4:
                    raise CubeFormatError(f"{file}: truncated at day {n}, row {z}")
                theta[z] = np.frombuffer(buf, dtype=np.float32).reshape(n_q, n_a)
                target[z] = np.frombuffer(fh.read(cell * 4), dtype=np.int32).reshape(n_q, n_a)
                packed = np.frombuffer(fh.read(bits), dtype=np.uint8)
                exercise[z] = np.unpackbits(packed, count=cell).astype(bool).reshape(n_q, n_a)
            surfaces.append(ValueSurface(n=n, theta=theta, target_idx=target,
                                         exercise=exercise))
        if fh.read(1):
            raise CubeFormatError(f"{file}: trailing bytes after the last surface")

    return PolicyCube(contract=contract, market=market, risk=risk, grid_spec=grid_spec,
                      grids=grids, surfaces=surfaces, impact=impact, version=version,
                      diagnostics=header.get("diagnostics", {}))


def cube_to_csv(cube: PolicyCube, file: str | Path, days: list[int] | None = None) -> None:
    """Plain-text companion export for diffing: one row per grid node.

    Columns: n, zeta, S, q, A, theta, v_star, exercise.  `days` limits the
    export (the full reference cube is tens of millions of rows).
    """
    import csv
    import math

    c, m = cube.contract, cube.market
    s = m.sigma * math.sqrt(c.dt)
    q_grid, a_grid = cube.grids.q, cube.grids.A
    with open(file, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "zeta", "S", "q", "A", "theta", "v_star", "exercise"])
        for surf in cube.surfaces:
            if days is not None and surf.n not in days:
                continue
            rows = surf.theta.shape[0]
            for z in range(rows):
                S = cube.grids.S[z] if cube.impact else m.S0 + s * (z - 2 * surf.n)
                for i, qv in enumerate(q_grid):
                    for ai, av in enumerate(a_grid):
                        v_star = (q_grid[surf.target_idx[z, i, ai]] - qv) / c.dt
                        writer.writerow([surf.n, z, repr(float(S)), repr(float(qv)),
                                         repr(float(av)),
                                         repr(float(surf.theta[z, i, ai])),
                                         repr(float(v_star)),
                                         int(surf.exercise[z, i, ai])])
