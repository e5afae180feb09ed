"""Binary field files, ground-state metadata sidecars and spectrum CSV.

Field file format "BDG1": the magic bytes ``BDG1`` followed by a
little-endian header

    u32 dim, u32 N, f64 L, u32 ncomponents, u8 kind

with kind 0 for real and 1 for complex data, then ncomponents * N^dim
float64 values (real) or re/im pairs (complex), component-major with the
x coordinate varying fastest.  All values round-trip bit for bit.

Ground states are stored as a BDG1 field plus a UTF-8 ``key=value``
sidecar carrying the physics, the chemical potential(s) and the solver
diagnostics; floats are written with repr so the round trip is exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .groundstate import JJ, GroundState, PhysParams
from .spectral import SpectralGrid, make_grid

__all__ = [
    "write_field",
    "read_field",
    "write_ground_state",
    "read_ground_state",
    "write_spectrum_csv",
    "read_spectrum_csv",
]

MAGIC = b"BDG1"
_HEADER = struct.Struct("<IIdIB")


def write_field(path, grid: SpectralGrid, values: np.ndarray) -> None:
    """Write one field (any number of components) as a BDG1 file."""
    values = np.asarray(values)
    if values.shape[-grid.dim:] != grid.shape:
        raise ValueError(
            f"field shape {values.shape} does not match grid shape {grid.shape}"
        )
    lead = values.shape[: values.ndim - grid.dim]
    ncomp = int(np.prod(lead)) if lead else 1
    flat = np.ascontiguousarray(values.reshape((ncomp,) + grid.shape))
    kind = 1 if np.iscomplexobj(values) else 0
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(grid.dim, grid.points_per_dim, grid.half_width,
                              ncomp, kind))
        if kind:
            fh.write(flat.astype("<c16").tobytes())
        else:
            fh.write(flat.astype("<f8").tobytes())


def read_field(path):
    """Read a BDG1 file; returns (grid, values) with a leading component axis."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a BDG1 field file (magic {magic!r})")
        dim, n, half_width, ncomp, kind = _HEADER.unpack(fh.read(_HEADER.size))
        grid = make_grid(dim, half_width, n)
        count = ncomp * grid.total_points
        dtype = "<c16" if kind else "<f8"
        data = np.fromfile(fh, dtype=dtype, count=count)
    if data.size != count:
        raise ValueError(f"{path}: truncated field file")
    return grid, data.reshape((ncomp,) + grid.shape).astype(
        complex if kind else float
    )


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_ground_state(basepath, ground: GroundState) -> None:
    """Write ``<basepath>.bdg1`` (the field) and ``<basepath>.meta``."""
    base = Path(basepath)
    write_field(base.with_suffix(".bdg1"), ground.grid, ground.phi)
    p = ground.params
    lines = {
        "mode": ground.mode,
        "energy": float(ground.energy),
        "residual": float(ground.residual),
        "beta11": float(p.beta11),
        "beta12": float(p.beta12),
        "beta22": float(p.beta22),
        "omega_rabi": float(p.rabi),
        "delta": float(p.raman),
        "alpha": float(p.alpha),
        "gamma": ",".join(repr(g) for g in p.gamma),
        "L": float(ground.grid.half_width),
        "N": ground.grid.points_per_dim,
        "dim": ground.grid.dim,
    }
    if ground.mode == JJ:
        lines["mu"] = float(ground.mu)
    else:
        lines["mu1"] = float(ground.mu1)
        lines["mu2"] = float(ground.mu2)
    text = "".join(f"{k}={_format_value(v)}\n" for k, v in lines.items())
    base.with_suffix(".meta").write_text(text, encoding="utf-8")


def read_ground_state(basepath) -> GroundState:
    """Rebuild a GroundState from its field file and metadata sidecar."""
    base = Path(basepath)
    grid, values = read_field(base.with_suffix(".bdg1"))
    if values.shape[0] != 2:
        raise ValueError(f"{base}: ground state needs 2 components, found {values.shape[0]}")
    meta = {}
    for line in base.with_suffix(".meta").read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    params = PhysParams(
        beta11=float(meta["beta11"]),
        beta12=float(meta["beta12"]),
        beta22=float(meta["beta22"]),
        rabi=float(meta["omega_rabi"]),
        raman=float(meta["delta"]),
        gamma=tuple(float(g) for g in meta["gamma"].split(",")),
        alpha=float(meta["alpha"]),
    )
    mode = meta["mode"]
    phi = np.real(values)
    phi.setflags(write=False)
    common = dict(
        grid=grid, params=params, mode=mode, phi=phi,
        energy=float(meta["energy"]), residual=float(meta["residual"]),
    )
    if mode == JJ:
        return GroundState(mu=float(meta["mu"]), **common)
    return GroundState(mu1=float(meta["mu1"]), mu2=float(meta["mu2"]), **common)


def write_spectrum_csv(path, modes) -> None:
    """Spectrum table: index, omega, residual, biorth_defect (17 digits)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index,omega,residual,biorth_defect\n")
        for i, m in enumerate(modes):
            fh.write(f"{i},{m.omega:.17g},{m.residual:.17g},{m.biorth_defect:.17g}\n")


def read_spectrum_csv(path):
    """Read a spectrum CSV back into a list of row dicts."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != ["index", "omega", "residual", "biorth_defect"]:
            raise ValueError(f"{path}: unexpected spectrum CSV header {header}")
        for line in fh:
            if not line.strip():
                continue
            idx, omega, residual, defect = line.strip().split(",")
            rows.append({
                "index": int(idx),
                "omega": float(omega),
                "residual": float(residual),
                "biorth_defect": float(defect),
            })
    return rows
