import io

import numpy as np
import pytest

from golayotdr.codes import correlate, generate_golay_set
from golayotdr.errors import InvalidArgumentError, UnsupportedSchemeError
from golayotdr.modulation import (
    QPSK_SCALE,
    Scheme,
    build_frame,
    build_pdm_bpsk_frame,
    build_pdm_qpsk_frame,
    read_frame_csv,
    write_frame_csv,
    zero_correlation_zone,
)

SET4 = generate_golay_set(4)
LENGTHS = [4, 8, 16, 64, 256, 1024, 4096]


class TestBPSK:
    def test_x_rail_is_concatenated_pair(self):
        f = build_pdm_bpsk_frame(SET4, n_sep=0)
        assert f.e_tx.real.tolist() == [1, -1, -1, -1, -1, 1, -1, -1]
        assert not f.e_tx.imag.any()

    def test_y_rail_is_concatenated_pair(self):
        f = build_pdm_bpsk_frame(SET4, n_sep=0)
        assert f.e_ty.real.tolist() == [-1, -1, 1, -1, 1, 1, 1, -1]

    def test_guard_length(self):
        f = build_pdm_bpsk_frame(SET4, n_sep=2)
        assert f.n == 12
        assert f.e_tx.real.tolist() == [1, -1, -1, -1, 0, 0, -1, 1, -1, -1, 0, 0]

    def test_full_duty_cycle_without_guard(self):
        assert build_pdm_bpsk_frame(generate_golay_set(64), 0).duty_cycle == 1.0
        assert build_pdm_bpsk_frame(generate_golay_set(64), 64).duty_cycle == 0.5

    def test_negative_guard_rejected(self):
        with pytest.raises(InvalidArgumentError):
            build_pdm_bpsk_frame(SET4, n_sep=-1)

    @pytest.mark.parametrize("n_g", LENGTHS)
    @pytest.mark.parametrize("n_sep", [0, 3])
    def test_periodic_delta_inside_zone(self, n_g, n_sep):
        f = build_pdm_bpsk_frame(generate_golay_set(n_g), n_sep)
        x = f.e_tx.real.astype(np.int64)
        y = f.e_ty.real.astype(np.int64)
        z = zero_correlation_zone(f)
        lags = np.r_[0 : z + 1, f.n - z : f.n]
        for a, b in ((x, x), (y, y)):
            r = correlate(a, b, mode="periodic").values
            expected = np.zeros(lags.size, dtype=np.int64)
            expected[0] = 2 * n_g
            assert np.array_equal(r[lags], expected)
        cross = correlate(x, y, mode="periodic").values
        assert not cross[lags].any()

    @pytest.mark.parametrize("n_g", [8, 64, 256])
    def test_zone_is_tight(self, n_g):
        f = build_pdm_bpsk_frame(generate_golay_set(n_g), 0)
        x = f.e_tx.real.astype(np.int64)
        r = correlate(x, x, mode="periodic").values
        assert r[zero_correlation_zone(f) + 1] != 0


class TestQPSK:
    def test_first_symbol(self):
        f = build_pdm_qpsk_frame(SET4)
        assert f.e_tx[0] == pytest.approx((1 - 1j) * np.sqrt(2) / 2)

    def test_period_equals_code_length(self):
        assert build_pdm_qpsk_frame(SET4).n == 4

    @pytest.mark.parametrize("n_g", [4, 64, 1024])
    def test_unit_magnitude(self, n_g):
        f = build_pdm_qpsk_frame(generate_golay_set(n_g))
        np.testing.assert_allclose(np.abs(f.e_tx), 1.0, rtol=0, atol=1e-15)
        np.testing.assert_allclose(np.abs(f.e_ty), 1.0, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("n_g", LENGTHS)
    def test_correlation_structure_exact(self, n_g):
        f = build_pdm_qpsk_frame(generate_golay_set(n_g))
        # undo the constellation scale so the rails are exact integers
        xi, xq = (np.rint(v / QPSK_SCALE).astype(np.int64) for v in (f.e_tx.real, f.e_tx.imag))
        yi, yq = (np.rint(v / QPSK_SCALE).astype(np.int64) for v in (f.e_ty.real, f.e_ty.imag))

        def pc(a, b):
            return correlate(a, b, mode="periodic").values

        lags = np.arange(n_g)
        g0x = pc(xi, xi) + pc(xq, xq)
        g1x = pc(xq, xi) - pc(xi, xq)
        g2x = pc(yi, xi) + pc(yq, xq)
        g3x = pc(yq, xi) - pc(yi, xq)
        delta = np.where(lags == 0, 2 * n_g, 0)
        assert np.array_equal(g0x, delta)
        assert not g2x.any()
        assert not g1x[lags % 2 == 0].any()
        assert not g3x[lags % 4 == 0].any()
        g0y = pc(yi, yi) + pc(yq, yq)
        g1y = pc(yq, yi) - pc(yi, yq)
        assert np.array_equal(g0y, delta)
        assert not g1y[lags % 2 == 0].any()

    def test_no_zone_for_qpsk(self):
        with pytest.raises(UnsupportedSchemeError):
            zero_correlation_zone(build_pdm_qpsk_frame(SET4))


@pytest.mark.parametrize(
    "n_g, n_sep, zone", [(4, 0, 2), (4, 3, 5), (512, 0, 256)]
)
def test_zone_width(n_g, n_sep, zone):
    assert zero_correlation_zone(build_pdm_bpsk_frame(generate_golay_set(n_g), n_sep)) == zone


def test_frame_timing():
    f = build_pdm_qpsk_frame(generate_golay_set(4096), f_s=200e6)
    assert f.t_code == pytest.approx(20.48e-6)
    assert f.f_max == pytest.approx(24414.0625)


def test_cyclic_indexing():
    f = build_pdm_bpsk_frame(SET4, 1)
    x, _ = f.symbols_at(np.array([0, f.n, 2 * f.n + 1, -1]))
    assert x.tolist() == [f.e_tx[0], f.e_tx[0], f.e_tx[1], f.e_tx[-1]]


def test_build_frame_dispatch():
    assert build_frame(SET4, "qpsk", 40e6).scheme is Scheme.PDM_QPSK
    assert build_frame(SET4, "PDM-BPSK", 40e6, 2).n == 12
    with pytest.raises(InvalidArgumentError):
        build_frame(SET4, "qpsk", 40e6, n_sep=2)
    with pytest.raises(InvalidArgumentError):
        build_frame(SET4, "16qam", 40e6)


def test_frame_csv_round_trip():
    f = build_pdm_qpsk_frame(generate_golay_set(8))
    buf = io.StringIO()
    write_frame_csv(f, buf)
    assert buf.getvalue().splitlines()[0] == "index,e_tx_re,e_tx_im,e_ty_re,e_ty_im"
    buf.seek(0)
    ex, ey = read_frame_csv(buf)
    assert np.array_equal(ex, f.e_tx) and np.array_equal(ey, f.e_ty)
