"""Discrete Fourier analysis of odd-length real vectors.

Analysis uses the kernel ``exp(+2 pi i k t / n)`` with a ``1/n`` factor and
synthesis uses ``exp(-2 pi i k t / n)``. Only the positive half of the
spectrum is stored; negative frequencies are complex conjugates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CutOutOfRangeError, EvenLengthError, NonFiniteInputError, SamfitError


@dataclass(frozen=True)
class Spectrum:
    """Half-spectrum of a real vector of odd length ``n``.

    ``coeffs[k-1]`` holds the coefficient at frequency ``k`` for
    ``k = 1 .. (n-1)/2``.
    """

    n: int
    mean_coeff: float
    coeffs: np.ndarray

    def __post_init__(self):
        if self.n % 2 == 0 or self.n < 3:
            raise EvenLengthError(f"EvenLength: spectrum length n={self.n} must be odd and >= 3")
        if len(self.coeffs) != (self.n - 1) // 2:
            raise SamfitError(
                f"spectrum of n={self.n} needs {(self.n - 1) // 2} coefficients, got {len(self.coeffs)}"
            )

    @property
    def half_length(self) -> int:
        return (self.n - 1) // 2

    @classmethod
    def from_coeffs(cls, n, coeffs, mean_coeff=0.0) -> "Spectrum":
        c = np.asarray(coeffs, dtype=complex).copy()
        c.setflags(write=False)
        return cls(int(n), float(mean_coeff), c)

    def truncated(self, k_cut: int) -> "Spectrum":
        """Copy with frequencies above ``k_cut`` and the mean coefficient zeroed."""
        c = np.array(self.coeffs)
        c[k_cut:] = 0
        return Spectrum.from_coeffs(self.n, c)

    def energy(self) -> float:
        """``(1/n) * sum(values**2)`` of the vector this spectrum represents."""
        return self.mean_coeff**2 + 2.0 * float(np.sum(np.abs(self.coeffs) ** 2))


def forward_dft(values) -> Spectrum:
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise SamfitError("forward_dft expects a 1-d vector")
    n = v.size
    if n % 2 == 0 or n < 3:
        raise EvenLengthError(f"EvenLength: length {n} must be odd and >= 3")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInputError("NonFiniteInput: values contain NaN or inf")
    # numpy's ifft is (1/n) sum v exp(+2 pi i k t / n), the analysis kernel here
    xi = np.fft.ifft(v)[: (n - 1) // 2 + 1]
    mean = xi[0]
    assert abs(mean.imag) <= 1e-12 * max(1.0, abs(mean.real))
    return Spectrum.from_coeffs(n, xi[1:], mean.real)


def inverse_dft(spectrum: Spectrum) -> np.ndarray:
    n = spectrum.n
    full = np.zeros(n, dtype=complex)
    full[0] = spectrum.mean_coeff
    K = spectrum.half_length
    full[1 : K + 1] = spectrum.coeffs
    full[K + 1 :] = np.conj(spectrum.coeffs[::-1])
    # numpy's fft is sum_k full[k] exp(-2 pi i k t / n), the synthesis kernel
    return np.fft.fft(full).real


def energy_tail(spectrum: Spectrum, k_cut: int) -> float:
    """Energy ``2 * sum_{k > k_cut} |xi_k|^2`` beyond the cut-point."""
    K = spectrum.half_length
    if not 0 <= k_cut <= K:
        raise CutOutOfRangeError(f"CutOutOfRange: k_cut={k_cut} outside 0..{K}")
    return 2.0 * float(np.sum(np.abs(spectrum.coeffs[k_cut:]) ** 2))
