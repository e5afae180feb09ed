"""Field file format, metadata sidecar and spectrum CSV round trips."""

import struct

import numpy as np
import pytest

from becbdg import eigensolver as es
from becbdg import fileio as io
from becbdg import groundstate as gs
from becbdg import spectral as sp
from conftest import jj_params


class TestFieldFormat:
    def test_real_roundtrip_bits(self, tmp_path):
        grid = sp.make_grid(2, 16, 16)
        rng = np.random.default_rng(0)
        values = rng.standard_normal((2,) + grid.shape)
        path = tmp_path / "field.bdg1"
        io.write_field(path, grid, values)
        grid2, back = io.read_field(path)
        assert (grid2.dim, grid2.points_per_dim, grid2.half_width) == (2, 16, 16.0)
        assert np.array_equal(back, values)

    def test_complex_roundtrip_bits(self, tmp_path):
        grid = sp.make_grid(1, 8, 32)
        rng = np.random.default_rng(1)
        values = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        path = tmp_path / "c.bdg1"
        io.write_field(path, grid, values)
        _, back = io.read_field(path)
        assert np.array_equal(back[0], values)

    def test_header_layout(self, tmp_path):
        grid = sp.make_grid(1, 16, 32)
        path = tmp_path / "h.bdg1"
        io.write_field(path, grid, np.zeros(32))
        raw = path.read_bytes()
        assert raw[:4] == b"BDG1"
        dim, n, half, ncomp, kind = struct.unpack("<IIdIB", raw[4:4 + 21])
        assert (dim, n, half, ncomp, kind) == (1, 32, 16.0, 1, 0)
        assert len(raw) == 4 + 21 + 32 * 8

    def test_x_fastest_order(self, tmp_path):
        # flattened data runs x fastest: value at (iy, ix) sits at iy*N + ix
        grid = sp.make_grid(2, 2, 4)
        values = np.arange(16.0).reshape(4, 4)  # [iy, ix]
        path = tmp_path / "o.bdg1"
        io.write_field(path, grid, values)
        raw = path.read_bytes()[4 + 21:]
        flat = np.frombuffer(raw, dtype="<f8")
        iy, ix = 2, 3
        assert flat[iy * 4 + ix] == values[iy, ix]

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bdg1"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(ValueError, match="magic"):
            io.read_field(path)

    def test_truncated_file(self, tmp_path):
        grid = sp.make_grid(1, 16, 32)
        path = tmp_path / "t.bdg1"
        io.write_field(path, grid, np.zeros(32))
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(ValueError, match="truncated"):
            io.read_field(path)


class TestGroundStateFiles:
    def test_roundtrip(self, tmp_path, jj1d_64):
        ground = jj1d_64[0]
        base = tmp_path / "ground"
        io.write_ground_state(base, ground)
        back = io.read_ground_state(base)
        assert np.array_equal(back.phi, ground.phi)
        assert back.energy == ground.energy
        assert back.residual == ground.residual
        assert back.mu == ground.mu
        assert back.params == ground.params
        assert back.mode == ground.mode

    def test_nojj_roundtrip(self, tmp_path):
        grid = sp.make_grid(1, 16, 32)
        params = gs.PhysParams(100, 94, 97, rabi=0.0, gamma=(1.0,), alpha=0.2)
        ground = gs.minimize_ground_state(grid, params, gs.NOJJ)
        base = tmp_path / "g2"
        io.write_ground_state(base, ground)
        back = io.read_ground_state(base)
        assert back.mu1 == ground.mu1
        assert back.mu2 == ground.mu2
        assert back.params.alpha == 0.2


class TestSpectrumCsv:
    def test_roundtrip_17_digits(self, tmp_path, jj1d_64):
        spectrum = jj1d_64[3]
        path = tmp_path / "spectrum.csv"
        io.write_spectrum_csv(path, spectrum.modes)
        rows = io.read_spectrum_csv(path)
        assert len(rows) == len(spectrum.modes)
        for row, mode in zip(rows, spectrum.modes):
            assert row["omega"] == mode.omega  # repr-exact round trip
            assert row["residual"] == mode.residual

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="header"):
            io.read_spectrum_csv(path)
