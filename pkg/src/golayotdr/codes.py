"""Complementary (Golay) sequences and exact correlation primitives.

Correlation convention throughout the package::

    correlate(a, b)[k] = sum_n a[n] * conj(b[n - k])

which is ``a * conj(b[-n])`` written as a convolution.  Integer inputs are
correlated in integer arithmetic so identities can be asserted with ``==``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Literal

import numpy as np
import scipy.fft as sfft
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidArgumentError

Mode = Literal["aperiodic", "periodic"]
Method = Literal["auto", "direct", "fft"]

#: Below this length the auto method sums directly instead of going through an FFT.
DIRECT_MAX_LENGTH = 64
#: Integer inputs up to this length are always correlated directly (exact, O(N^2)).
INTEGER_DIRECT_MAX_LENGTH = 8192

BASE_SET_4 = {
    "g_a1": (1, -1, -1, -1),
    "g_b1": (-1, 1, -1, -1),
    "g_a2": (-1, -1, 1, -1),
    "g_b2": (1, 1, 1, -1),
}
SEQUENCE_NAMES = ("g_a1", "g_b1", "g_a2", "g_b2")


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def check_binary_sequence(seq: ArrayLike) -> NDArray[np.int64]:
    """Return ``seq`` as a read-only int64 array after checking it is a valid binary code.

    Raises
    ------
    InvalidArgumentError
        If an element is not exactly +1 or -1, or the length is not a power
        of two >= 4.
    """
    arr = np.asarray(seq)
    if arr.ndim != 1:
        raise InvalidArgumentError("a binary sequence must be one-dimensional")
    if not np.all((arr == 1) | (arr == -1)):
        raise InvalidArgumentError("binary sequence elements must be exactly +1 or -1")
    if not (_is_power_of_two(arr.size) and arr.size >= 4):
        raise InvalidArgumentError(
            f"binary sequence length must be a power of two >= 4, got {arr.size}"
        )
    out = arr.astype(np.int64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GolaySet:
    """Two complementary pairs ``(g_a1, g_b1)`` and ``(g_a2, g_b2)`` of equal length.

    Construction only checks the element alphabet and lengths; use
    :func:`verify_golay_set` to check the correlation identities.
    """

    g_a1: NDArray[np.int64]
    g_b1: NDArray[np.int64]
    g_a2: NDArray[np.int64]
    g_b2: NDArray[np.int64]

    def __post_init__(self) -> None:
        for name in SEQUENCE_NAMES:
            object.__setattr__(self, name, check_binary_sequence(getattr(self, name)))
        lengths = {getattr(self, name).size for name in SEQUENCE_NAMES}
        if len(lengths) != 1:
            raise InvalidArgumentError(f"all four sequences must have equal length, got {sorted(lengths)}")

    @property
    def n_g(self) -> int:
        return int(self.g_a1.size)

    def sequences(self) -> dict[str, NDArray[np.int64]]:
        return {name: getattr(self, name) for name in SEQUENCE_NAMES}


@dataclass(frozen=True)
class CorrelationResult:
    """Correlation values indexed by lag.

    ``lags[i]`` is the lag of ``values[i]``.  Aperiodic results run from
    ``-(len(b) - 1)`` to ``len(a) - 1``; periodic results from 0 to ``L - 1``.
    """

    values: np.ndarray
    mode: str
    lags: NDArray[np.int64]

    def __len__(self) -> int:
        return int(self.values.size)

    def at(self, lag: int):
        if self.mode == "periodic":
            return self.values[lag % self.values.size]
        idx = lag - int(self.lags[0])
        if not 0 <= idx < self.values.size:
            return self.values.dtype.type(0)
        return self.values[idx]

    def __add__(self, other: "CorrelationResult") -> "CorrelationResult":
        if self.mode != other.mode or not np.array_equal(self.lags, other.lags):
            raise InvalidArgumentError("can only add correlations over the same lags and mode")
        return CorrelationResult(self.values + other.values, self.mode, self.lags)

    def __sub__(self, other: "CorrelationResult") -> "CorrelationResult":
        if self.mode != other.mode or not np.array_equal(self.lags, other.lags):
            raise InvalidArgumentError("can only subtract correlations over the same lags and mode")
        return CorrelationResult(self.values - other.values, self.mode, self.lags)


def _aperiodic_direct(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.correlate conjugates its second argument and orders lags -(len(b)-1)..len(a)-1
    return np.correlate(a, b, mode="full")


def _aperiodic_fft(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, m = a.size, b.size
    size = n + m - 1
    nfft = sfft.next_fast_len(size)
    c = sfft.ifft(sfft.fft(a, nfft) * np.conj(sfft.fft(b, nfft)))
    return np.concatenate([c[nfft - (m - 1):], c[:n]]) if m > 1 else c[:n]


def _periodic_from_aperiodic(full: np.ndarray, n: int) -> np.ndarray:
    out = full[n - 1:].copy()
    out[1:] += full[: n - 1]
    return out


def _periodic_fft(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return sfft.ifft(sfft.fft(a) * np.conj(sfft.fft(b)))


def correlate(a: ArrayLike, b: ArrayLike, mode: Mode = "aperiodic", method: Method = "auto") -> CorrelationResult:
    """Correlate ``a`` with ``b``: ``c[k] = sum_n a[n] * conj(b[n - k])``.

    Parameters
    ----------
    a, b
        Non-empty 1-D sequences (integer, real or complex).
    mode
        ``"aperiodic"`` (zero-padded, ``len(a) + len(b) - 1`` lags) or
        ``"periodic"`` (cyclic, equal lengths required, ``L`` lags).
    method
        ``"direct"`` sums explicitly; ``"fft"`` uses a transform;
        ``"auto"`` picks direct summation for short inputs and for integer
        inputs up to :data:`INTEGER_DIRECT_MAX_LENGTH`.

    Integer inputs give integer outputs.  On the FFT path they are rounded
    back to integers, which is exact while the correlation magnitudes stay
    well below 2**52.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 1 or b.ndim != 1 or a.size == 0 or b.size == 0:
        raise InvalidArgumentError("correlate needs two non-empty 1-D sequences")
    if mode not in ("aperiodic", "periodic"):
        raise InvalidArgumentError(f"unknown correlation mode {mode!r}")
    if mode == "periodic" and a.size != b.size:
        raise InvalidArgumentError(
            f"periodic correlation needs equal lengths, got {a.size} and {b.size}"
        )
    integer = np.issubdtype(a.dtype, np.integer) and np.issubdtype(b.dtype, np.integer)
    real = not (np.iscomplexobj(a) or np.iscomplexobj(b))
    if integer:
        a = a.astype(np.int64)
        b = b.astype(np.int64)

    longest = max(a.size, b.size)
    if method == "auto":
        limit = INTEGER_DIRECT_MAX_LENGTH if integer else DIRECT_MAX_LENGTH
        method = "direct" if longest < limit else "fft"
    elif method not in ("direct", "fft"):
        raise InvalidArgumentError(f"unknown correlation method {method!r}")

    if mode == "aperiodic":
        values = _aperiodic_direct(a, b) if method == "direct" else _aperiodic_fft(a, b)
        lags = np.arange(-(b.size - 1), a.size, dtype=np.int64)
    else:
        if method == "direct":
            values = _periodic_from_aperiodic(_aperiodic_direct(a, b), a.size)
        else:
            values = _periodic_fft(a, b)
        lags = np.arange(a.size, dtype=np.int64)

    if method == "fft":
        if integer:
            values = np.rint(values.real).astype(np.int64)
        elif real:
            values = values.real
    return CorrelationResult(values, mode, lags)


def generate_golay_set(n_g: int) -> GolaySet:
    """Build the mutually orthogonal Golay set of length ``n_g`` (a power of two >= 4).

    Starts from the length-4 base set and doubles with
    ``a' = [a, b]``, ``b' = [a, -b]`` applied to each pair.
    """
    if isinstance(n_g, bool) or not isinstance(n_g, (int, np.integer)):
        raise InvalidArgumentError(f"n_g must be an integer, got {n_g!r}")
    n_g = int(n_g)
    if not (_is_power_of_two(n_g) and n_g >= 4):
        raise InvalidArgumentError(f"n_g must be a power of two >= 4, got {n_g}")
    a1, b1, a2, b2 = (np.array(BASE_SET_4[name], dtype=np.int64) for name in SEQUENCE_NAMES)
    while a1.size < n_g:
        a1, b1 = np.concatenate([a1, b1]), np.concatenate([a1, -b1])
        a2, b2 = np.concatenate([a2, b2]), np.concatenate([a2, -b2])
    return GolaySet(a1, b1, a2, b2)


@dataclass(frozen=True)
class GolayVerification:
    complementary_1: bool
    complementary_2: bool
    mutual_a: bool
    mutual_b: bool
    max_sidelobe: int

    @property
    def ok(self) -> bool:
        return self.complementary_1 and self.complementary_2 and self.mutual_a and self.mutual_b


def _pair_sum(x1, y1, x2, y2) -> np.ndarray:
    return correlate(x1, y1, method="direct").values + correlate(x2, y2, method="direct").values


def verify_golay_set(golay: GolaySet) -> GolayVerification:
    """Check the complementary and mutual-orthogonality identities exactly, at every lag."""
    n = golay.n_g
    delta = np.zeros(2 * n - 1, dtype=np.int64)
    delta[n - 1] = 2 * n
    auto_1 = _pair_sum(golay.g_a1, golay.g_a1, golay.g_b1, golay.g_b1)
    auto_2 = _pair_sum(golay.g_a2, golay.g_a2, golay.g_b2, golay.g_b2)
    mutual_a = _pair_sum(golay.g_a1, golay.g_a2, golay.g_b1, golay.g_b2)
    mutual_b = _pair_sum(golay.g_a1, golay.g_b1, golay.g_a2, golay.g_b2)
    off_peak = np.concatenate([np.delete(auto_1, n - 1), np.delete(auto_2, n - 1)])
    return GolayVerification(
        complementary_1=bool(np.array_equal(auto_1, delta)),
        complementary_2=bool(np.array_equal(auto_2, delta)),
        mutual_a=not mutual_a.any(),
        mutual_b=not mutual_b.any(),
        max_sidelobe=int(np.abs(off_peak).max()) if off_peak.size else 0,
    )


def qpsk_leakage_terms(golay: GolaySet, mode: Mode = "periodic") -> tuple[CorrelationResult, CorrelationResult]:
    """Residual terms left by in-phase/quadrature mapping of the pairs.

    Returns ``(g1, g3)`` with ``g1 = b1 (x) a1 - a1 (x) b1`` and
    ``g3 = b2 (x) a1 - a1 (x) b2``.  In periodic mode ``g1`` vanishes at
    every even lag and ``g3`` at every lag divisible by four.
    """
    a1, b1, b2 = golay.g_a1, golay.g_b1, golay.g_b2
    g1 = correlate(b1, a1, mode, "direct") - correlate(a1, b1, mode, "direct")
    g3 = correlate(b2, a1, mode, "direct") - correlate(a1, b2, mode, "direct")
    return g1, g3


def format_sequences(golay: GolaySet) -> str:
    """Text dump: a ``name length`` header line followed by the symbols as ``+1``/``-1``."""
    lines = []
    for name, seq in golay.sequences().items():
        lines.append(f"{name} {seq.size}")
        lines.append(" ".join("+1" if s > 0 else "-1" for s in seq))
    return "\n".join(lines) + "\n"


def write_sequences(golay: GolaySet, fh: IO[str]) -> None:
    fh.write(format_sequences(golay))


def parse_sequences(lines: Iterable[str]) -> GolaySet:
    """Inverse of :func:`format_sequences`."""
    it = (ln.strip() for ln in lines)
    found: dict[str, np.ndarray] = {}
    for header in it:
        if not header:
            continue
        name, length = header.split()
        symbols = np.array([int(tok) for tok in next(it).split()], dtype=np.int64)
        if symbols.size != int(length):
            raise InvalidArgumentError(f"{name}: header says {length} symbols, found {symbols.size}")
        found[name] = symbols
    missing = set(SEQUENCE_NAMES) - set(found)
    if missing:
        raise InvalidArgumentError(f"missing sequences: {sorted(missing)}")
    return GolaySet(**{name: found[name] for name in SEQUENCE_NAMES})
