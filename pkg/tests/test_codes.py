import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from golayotdr.codes import (
    GolaySet,
    correlate,
    format_sequences,
    generate_golay_set,
    parse_sequences,
    qpsk_leakage_terms,
    verify_golay_set,
)
from golayotdr.errors import InvalidArgumentError

from oracles import brute_correlate

G4 = generate_golay_set(4)


class TestCorrelate:
    def test_single_sample(self):
        res = correlate([1], [1])
        assert res.values.tolist() == [1]
        assert res.lags.tolist() == [0]

    def test_base_pair_is_complementary(self):
        total = correlate(G4.g_a1, G4.g_a1) + correlate(G4.g_b1, G4.g_b1)
        assert total.values.tolist() == [0, 0, 0, 8, 0, 0, 0]
        assert total.lags.tolist() == [-3, -2, -1, 0, 1, 2, 3]

    def test_base_pairs_mutually_orthogonal(self):
        total = correlate(G4.g_a1, G4.g_a2) + correlate(G4.g_b1, G4.g_b2)
        assert total.values.tolist() == [0] * 7

    def test_matches_brute_force_hand_case(self):
        a = [1 + 2j, -1j, 3]
        b = [2, 1j]
        lags, expected = brute_correlate(a, b)
        res = correlate(a, b)
        assert res.lags.tolist() == lags.tolist()
        np.testing.assert_allclose(res.values, expected, rtol=0, atol=1e-12)

    def test_integer_inputs_stay_integer(self):
        res = correlate(np.array([1, -1, 1]), np.array([1, 1, -1]))
        assert np.issubdtype(res.values.dtype, np.integer)

    def test_integer_fft_path_is_exact(self):
        g = generate_golay_set(256)
        direct = correlate(g.g_a1, g.g_b2, method="direct")
        fast = correlate(g.g_a1, g.g_b2, method="fft")
        assert np.array_equal(direct.values, fast.values)
        assert np.array_equal(direct.lags, fast.lags)

    def test_periodic_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            correlate([1, 2, 3], [1, 2], mode="periodic")

    def test_empty_input(self):
        with pytest.raises(InvalidArgumentError):
            correlate([], [1])

    def test_periodic_has_l_lags(self):
        res = correlate(np.ones(8), np.ones(8), mode="periodic")
        assert len(res) == 8
        assert res.at(-1) == res.values[7]

    def test_aperiodic_has_2l_minus_1_lags(self):
        assert len(correlate(np.ones(8), np.ones(8))) == 15


complex_seq = st.lists(
    st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=1, max_size=40
)


@settings(max_examples=60, deadline=None)
@given(a=complex_seq, b=complex_seq, method=st.sampled_from(["direct", "fft"]))
def test_aperiodic_oracle_equivalence(a, b, method):
    lags, expected = brute_correlate(a, b)
    res = correlate(np.array(a), np.array(b), method=method)
    assert res.lags.tolist() == lags.tolist()
    scale = max(1.0, np.abs(expected).max())
    np.testing.assert_allclose(res.values, expected, rtol=0, atol=1e-12 * scale)


@settings(max_examples=60, deadline=None)
@given(data=st.data(), n=st.integers(1, 40), method=st.sampled_from(["direct", "fft"]))
def test_periodic_oracle_equivalence(data, n, method):
    elems = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)
    a = data.draw(st.lists(elems, min_size=n, max_size=n))
    b = data.draw(st.lists(elems, min_size=n, max_size=n))
    lags, expected = brute_correlate(a, b, periodic=True)
    res = correlate(np.array(a), np.array(b), mode="periodic", method=method)
    scale = max(1.0, np.abs(expected).max())
    np.testing.assert_allclose(res.values, expected, rtol=0, atol=1e-12 * scale)


class TestGenerate:
    def test_base_set(self):
        g = generate_golay_set(4)
        assert g.g_a1.tolist() == [1, -1, -1, -1]
        assert g.g_b1.tolist() == [-1, 1, -1, -1]
        assert g.g_a2.tolist() == [-1, -1, 1, -1]
        assert g.g_b2.tolist() == [1, 1, 1, -1]

    def test_one_doubling(self):
        g = generate_golay_set(8)
        assert g.g_a1.tolist() == [1, -1, -1, -1, -1, 1, -1, -1]
        assert g.g_b1.tolist() == [1, -1, -1, -1, 1, -1, 1, 1]

    @pytest.mark.parametrize("bad", [0, 1, 2, 3, 6, 12, -4, 4.0, True])
    def test_rejects_bad_lengths(self, bad):
        with pytest.raises(InvalidArgumentError):
            generate_golay_set(bad)

    @pytest.mark.parametrize("m", [4, 8, 64, 512])
    def test_halves_reproduce_shorter_set(self, m):
        big, small = generate_golay_set(2 * m), generate_golay_set(m)
        for a, b in (("g_a1", "g_b1"), ("g_a2", "g_b2")):
            assert np.array_equal(big.sequences()[a][:m], small.sequences()[a])
            assert np.array_equal(big.sequences()[b][:m], small.sequences()[a])
            assert np.array_equal(big.sequences()[a][m:], small.sequences()[b])
            assert np.array_equal(big.sequences()[b][m:], -small.sequences()[b])

    def test_sequences_are_read_only(self):
        with pytest.raises(ValueError):
            generate_golay_set(8).g_a1[0] = 5


class TestVerify:
    def test_base_set_valid(self):
        rep = verify_golay_set(G4)
        assert rep.ok and rep.max_sidelobe == 0

    def test_length_64_valid(self):
        rep = verify_golay_set(generate_golay_set(64))
        assert (rep.complementary_1, rep.complementary_2, rep.mutual_a, rep.mutual_b) == (True,) * 4
        assert rep.max_sidelobe == 0

    def test_one_flipped_sign_breaks_pair_1(self):
        g = generate_golay_set(64)
        a1 = g.g_a1.copy()
        a1[5] = -a1[5]
        bad = GolaySet(a1, g.g_b1, g.g_a2, g.g_b2)
        rep = verify_golay_set(bad)
        assert not rep.complementary_1
        assert rep.complementary_2
        # brute-force sidelobe after the mutation
        _, s1 = brute_correlate(a1, a1)
        _, s2 = brute_correlate(g.g_b1, g.g_b1)
        off = np.delete(np.abs(s1 + s2), 63)
        assert rep.max_sidelobe == int(off.max()) > 0

    def test_mismatched_lengths_rejected(self):
        g8 = generate_golay_set(8)
        with pytest.raises(InvalidArgumentError):
            GolaySet(G4.g_a1, G4.g_b1, G4.g_a2, g8.g_b2)

    def test_rejects_non_binary(self):
        with pytest.raises(InvalidArgumentError):
            GolaySet([1, 0, 1, 1], G4.g_b1, G4.g_a2, G4.g_b2)


@pytest.mark.parametrize("n_g", [4, 8, 16, 64, 256, 1024])
def test_qpsk_leakage_zero_pattern(n_g):
    g1, g3 = qpsk_leakage_terms(generate_golay_set(n_g))
    lags = np.arange(n_g)
    assert not g1.values[lags % 2 == 0].any()
    assert not g3.values[lags % 4 == 0].any()
    assert g1.values.any() and g3.values.any()


def test_dump_round_trip():
    g = generate_golay_set(16)
    text = format_sequences(g)
    lines = text.splitlines()
    assert lines[0] == "g_a1 16"
    assert lines[1].split()[:4] == ["+1", "-1", "-1", "-1"]
    back = parse_sequences(io.StringIO(text))
    for name, seq in g.sequences().items():
        assert np.array_equal(back.sequences()[name], seq)
