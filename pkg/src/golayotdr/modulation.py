"""Dual-polarization probing frames built from a Golay set."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import IO

import numpy as np
from numpy.typing import NDArray

from .codes import GolaySet
from .errors import InvalidArgumentError, UnsupportedSchemeError

#: Unit-energy QPSK constellation scale.
QPSK_SCALE = np.sqrt(2.0) / 2.0


class Scheme(str, enum.Enum):
    PDM_BPSK = "PDM_BPSK"
    PDM_QPSK = "PDM_QPSK"

    @classmethod
    def parse(cls, value: "str | Scheme") -> "Scheme":
        if isinstance(value, Scheme):
            return value
        key = str(value).strip().upper().replace("-", "_")
        aliases = {"BPSK": cls.PDM_BPSK, "QPSK": cls.PDM_QPSK}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise InvalidArgumentError(f"unknown modulation scheme {value!r}") from None


@dataclass(frozen=True)
class ProbeFrame:
    """One period of the probe, one complex symbol per polarization per slot.

    The probe repeats with period ``n``; index any absolute symbol time
    with ``t % n`` (see :meth:`symbols_at`).
    """

    e_tx: NDArray[np.complex128]
    e_ty: NDArray[np.complex128]
    n_g: int
    n_sep: int
    scheme: Scheme
    f_s: float

    def __post_init__(self) -> None:
        for name in ("e_tx", "e_ty"):
            arr = np.array(getattr(self, name), dtype=np.complex128)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.e_tx.shape != self.e_ty.shape or self.e_tx.ndim != 1:
            raise InvalidArgumentError("e_tx and e_ty must be 1-D and of equal length")
        if not self.f_s > 0:
            raise InvalidArgumentError(f"symbol rate must be positive, got {self.f_s}")

    @property
    def n(self) -> int:
        return int(self.e_tx.size)

    @property
    def t_s(self) -> float:
        return 1.0 / self.f_s

    @property
    def t_code(self) -> float:
        """Frame period in seconds."""
        return self.n / self.f_s

    @property
    def f_max(self) -> float:
        """Highest mechanical frequency resolvable with one estimate per frame."""
        return 1.0 / (2.0 * self.t_code)

    @property
    def energy(self) -> float:
        """Peak of each polarization's periodic autocorrelation, sum of ``|e|^2``."""
        return float(np.sum(np.abs(self.e_tx) ** 2))

    @property
    def duty_cycle(self) -> float:
        active = (np.abs(self.e_tx) > 0) | (np.abs(self.e_ty) > 0)
        return float(active.mean())

    def symbols_at(self, t) -> tuple[np.ndarray, np.ndarray]:
        idx = np.mod(t, self.n)
        return self.e_tx[idx], self.e_ty[idx]


def build_pdm_bpsk_frame(golay: GolaySet, n_sep: int = 0, f_s: float = 160e6) -> ProbeFrame:
    """Send each pair's two sequences one after the other, each followed by ``n_sep`` zeros.

    x carries ``[g_a1, 0.., g_b1, 0..]`` and y carries ``[g_a2, 0.., g_b2, 0..]``,
    so the period is ``2 * (n_g + n_sep)``.
    """
    if int(n_sep) != n_sep or n_sep < 0:
        raise InvalidArgumentError(f"n_sep must be a nonnegative integer, got {n_sep}")
    n_sep = int(n_sep)
    guard = np.zeros(n_sep)
    e_tx = np.concatenate([golay.g_a1, guard, golay.g_b1, guard])
    e_ty = np.concatenate([golay.g_a2, guard, golay.g_b2, guard])
    return ProbeFrame(e_tx, e_ty, golay.n_g, n_sep, Scheme.PDM_BPSK, float(f_s))


def build_pdm_qpsk_frame(golay: GolaySet, f_s: float = 160e6) -> ProbeFrame:
    """Carry each pair on the in-phase and quadrature rails of one polarization."""
    e_tx = QPSK_SCALE * (golay.g_a1 + 1j * golay.g_b1)
    e_ty = QPSK_SCALE * (golay.g_a2 + 1j * golay.g_b2)
    return ProbeFrame(e_tx, e_ty, golay.n_g, 0, Scheme.PDM_QPSK, float(f_s))


def build_frame(golay: GolaySet, scheme: "str | Scheme", f_s: float, n_sep: int = 0) -> ProbeFrame:
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.PDM_BPSK:
        return build_pdm_bpsk_frame(golay, n_sep, f_s)
    if n_sep:
        raise InvalidArgumentError("PDM-QPSK frames have no guard interval; n_sep must be 0")
    return build_pdm_qpsk_frame(golay, f_s)


def zero_correlation_zone(frame: ProbeFrame) -> int:
    """One-sided lag range over which the periodic frame autocorrelation is an exact delta.

    Lags ``|k| <= n_g / 2 + n_sep`` are clean for both the auto- and the
    cross-polarization correlation of a PDM-BPSK frame.
    """
    if frame.scheme is not Scheme.PDM_BPSK:
        raise UnsupportedSchemeError(
            "a zero-correlation zone is only defined for PDM-BPSK frames; "
            "PDM-QPSK needs tap spacings that are multiples of 4 symbols"
        )
    return frame.n_g // 2 + frame.n_sep


def write_frame_csv(frame: ProbeFrame, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["index", "e_tx_re", "e_tx_im", "e_ty_re", "e_ty_im"])
    for i, (x, y) in enumerate(zip(frame.e_tx, frame.e_ty)):
        w.writerow([i, repr(float(x.real)), repr(float(x.imag)), repr(float(y.real)), repr(float(y.imag))])


def read_frame_csv(fh: IO[str]) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.DictReader(fh))
    e_tx = np.array([float(r["e_tx_re"]) + 1j * float(r["e_tx_im"]) for r in rows])
    e_ty = np.array([float(r["e_ty_re"]) + 1j * float(r["e_ty_im"]) for r in rows])
    return e_tx, e_ty
