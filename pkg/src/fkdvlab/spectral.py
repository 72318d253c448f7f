"""Periodic grid, spectral transforms and Fourier-multiplier operators.

The real line is modelled by a large periodic box [-L/2, L/2) with data
concentrated near the centre.  All operators (fractional derivatives,
Hilbert transform, Bessel potentials, smooth frequency projectors) are
diagonal in the discrete Fourier basis; multiplication by the box
coordinate is pointwise.

Transform convention: the forward transform approximates
``u_hat(k) = integral u(x) exp(-i k x) dx``, so Plancherel reads
``sum |u_j|^2 dx = (1/L) sum |u_hat_m|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, NumericError

#: relative mean tolerance for negative-order derivatives
MEAN_TOL = 1e-8


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with its wavenumber set.

    Attributes
    ----------
    n : int
        Even number of samples.
    length : float
        Box size L; nodes are x_j = -L/2 + j L/n.
    """

    n: int
    length: float
    x: np.ndarray = field(repr=False, compare=False, default=None)
    k: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.n % 2 != 0 or self.n < 8:
            raise ConfigurationError(f"sample count must be even and >= 8, got {self.n}")
        if not (self.length > 0):
            raise ConfigurationError(f"box length must be positive, got {self.length}")
        dx = self.length / self.n
        object.__setattr__(self, "x", -0.5 * self.length + dx * np.arange(self.n))
        object.__setattr__(self, "k", 2.0 * np.pi * np.fft.fftfreq(self.n, d=dx))
        self.x.setflags(write=False)
        self.k.setflags(write=False)

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def nyquist_index(self) -> int:
        return self.n // 2

    def mode_numbers(self) -> np.ndarray:
        """Signed integer mode numbers in FFT storage order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)


def make_grid(n: int, length: float) -> Grid:
    """Construct a periodic grid with n samples on a box of the given length."""
    return Grid(int(n), float(length))


@dataclass(frozen=True)
class Field:
    """Real-valued state sampled on a grid."""

    grid: Grid
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.shape != (self.grid.n,):
            raise ConfigurationError(
                f"samples shape {arr.shape} does not match grid size {self.grid.n}")
        if not np.all(np.isfinite(arr)):
            raise NumericError("field contains non-finite samples")
        object.__setattr__(self, "samples", arr)
        arr.setflags(write=False)

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.samples + other.samples)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.samples - other.samples)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.samples * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Spectrum:
    """Physically normalised Fourier coefficients of a field.

    ``coefficients[m]`` approximates the line integral
    ``integral u(x) exp(-i k_m x) dx`` at the grid wavenumber ``k_m``
    (FFT storage order).
    """

    grid: Grid
    coefficients: np.ndarray


def _node_phase(grid: Grid) -> np.ndarray:
    # exp(+i k_m L/2) = (-1)^m accounts for node 0 sitting at -L/2
    m = grid.mode_numbers()
    return np.where(m % 2 == 0, 1.0, -1.0)


def transform(f: Field) -> Spectrum:
    """Forward transform with line-integral normalisation."""
    raw = np.fft.fft(f.samples)
    return Spectrum(f.grid, f.grid.dx * _node_phase(f.grid) * raw)


def inverse(spec: Spectrum) -> Field:
    """Inverse of :func:`transform`; imaginary round-off is discarded."""
    raw = spec.coefficients * _node_phase(spec.grid) / spec.grid.dx
    return Field(spec.grid, np.fft.ifft(raw).real)


def integrate(f: Field) -> float:
    """Box integral by the rectangle rule (spectrally accurate here)."""
    return float(np.sum(f.samples) * f.grid.dx)


def l2_norm(f: Field) -> float:
    return float(np.sqrt(np.sum(f.samples ** 2) * f.grid.dx))


def mean_coefficient(f: Field) -> float:
    """u_hat(0) = integral of u over the box."""
    return integrate(f)


@dataclass(frozen=True)
class MultiplierSymbol:
    """Fourier multiplier m(k) with an explicit zero-mode convention.

    ``evaluator`` must be finite for every nonzero grid wavenumber; the
    value at k = 0 is never inferred from it.
    """

    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    zero_mode_value: complex = 0.0

    def on_grid(self, grid: Grid) -> np.ndarray:
        k = grid.k
        vals = np.asarray(self.evaluator(k), dtype=complex)
        if vals.shape != k.shape:
            vals = np.broadcast_to(vals, k.shape).astype(complex)
        vals = vals.copy()
        vals[0] = complex(self.zero_mode_value)
        if not np.all(np.isfinite(vals)):
            bad = k[~np.isfinite(vals)][:3]
            raise NumericError(f"symbol '{self.name}' non-finite at wavenumbers {bad}")
        return vals


def _is_hermitian(vals: np.ndarray, grid: Grid) -> bool:
    # paired modes m and -m; the Nyquist mode has no partner
    n = grid.n
    v_pos = vals[1:n // 2]
    v_neg = vals[-1:n // 2:-1]
    scale = np.max(np.abs(vals)) or 1.0
    return bool(np.all(np.abs(v_neg - np.conj(v_pos)) <= 1e-12 * scale))


def apply_multiplier(f: Field, sym: MultiplierSymbol) -> Field:
    """Apply a Fourier multiplier and return the real field.

    The symbol must satisfy m(-k) = conj(m(k)) on paired modes so the
    output of a real input is real.  The unpaired Nyquist mode keeps only
    the real part of the symbol, the standard choice for odd symbols.
    """
    vals = sym.on_grid(f.grid)
    if not _is_hermitian(vals, f.grid):
        raise DomainError(
            f"symbol '{sym.name}' is not Hermitian-symmetric; real output undefined")
    vals = vals.copy()
    ny = f.grid.nyquist_index
    vals[ny] = vals[ny].real
    out = np.fft.ifft(vals * np.fft.fft(f.samples)).real
    return Field(f.grid, out)


def apply_multiplier_complex(samples_hat: np.ndarray, grid: Grid,
                             sym: MultiplierSymbol) -> np.ndarray:
    """Raw-spectrum multiplier application for internal complex pipelines."""
    return sym.on_grid(grid) * samples_hat


# ---------------------------------------------------------------------------
# symbol constructors


def identity_symbol() -> MultiplierSymbol:
    return MultiplierSymbol("identity", lambda k: np.ones_like(k), 1.0)


def frac_deriv_symbol(s: float) -> MultiplierSymbol:
    """|k|^s with zero mode mapped to 0 for s != 0 and to 1 for s = 0."""
    def ev(k):
        out = np.zeros(k.shape, dtype=complex)
        nz = k != 0
        out[nz] = np.abs(k[nz]) ** s
        return out
    return MultiplierSymbol(f"|k|^{s:g}", ev, 1.0 if s == 0 else 0.0)


def hilbert_symbol() -> MultiplierSymbol:
    """-i sign(k), with sign(0) = 0."""
    return MultiplierSymbol("-i*sign(k)", lambda k: -1j * np.sign(k), 0.0)


def bessel_symbol(s: float) -> MultiplierSymbol:
    """(1 + k^2)^(s/2); zero mode is 1."""
    return MultiplierSymbol(f"<k>^{s:g}", lambda k: (1.0 + k ** 2) ** (s / 2.0), 1.0)


def dispersion_symbol(alpha: float) -> MultiplierSymbol:
    """i k |k|^alpha, the generator of the linear flow; zero mode 0."""
    def ev(k):
        out = np.zeros(k.shape, dtype=complex)
        nz = k != 0
        out[nz] = 1j * k[nz] * np.abs(k[nz]) ** alpha
        return out
    return MultiplierSymbol(f"i*k|k|^{alpha:g}", ev, 0.0)


def derivative_symbol() -> MultiplierSymbol:
    return MultiplierSymbol("i*k", lambda k: 1j * k, 0.0)


def smoothstep(r: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for r <= 0, 1 for r >= 1, strictly monotone between."""
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(r > 0, np.exp(-1.0 / np.maximum(r, 1e-300)), 0.0)
        b = np.where(r < 1, np.exp(-1.0 / np.maximum(1.0 - r, 1e-300)), 0.0)
    return a / (a + b)


def flat_top_bump(xi: np.ndarray, a: float) -> np.ndarray:
    """Smooth bump equal to 1 on |xi| <= a and 0 on |xi| >= 2a."""
    return 1.0 - smoothstep((np.abs(xi) - a) / a)


@dataclass(frozen=True)
class CutoffSpec:
    """Low-pass cutoff: profile is 1 on |k| <= a and 0 on |k| >= 2a."""

    a: float

    def __post_init__(self):
        if not (self.a > 0):
            raise ConfigurationError(f"cutoff scale must be positive, got {self.a}")


def lowpass_symbol(cut: CutoffSpec) -> MultiplierSymbol:
    return MultiplierSymbol(f"lowpass(a={cut.a:g})",
                            lambda k: flat_top_bump(k, cut.a) + 0j, 1.0)


# ---------------------------------------------------------------------------
# named operations


def frac_deriv(f: Field, s: float) -> Field:
    """Homogeneous derivative of order s.

    Negative orders act on the zero-mean class only; the zero mode is
    always mapped to 0 for s != 0.
    """
    if s < 0:
        mean = mean_coefficient(f)
        norm = l2_norm(f)
        if abs(mean) > MEAN_TOL * max(norm, 1e-300):
            raise DomainError(
                f"negative-order derivative (s={s:g}) needs zero mean; "
                f"u_hat(0) = {mean:.3e} exceeds {MEAN_TOL:g} * ||u||")
    return apply_multiplier(f, frac_deriv_symbol(s))


def hilbert(f: Field) -> Field:
    """Hilbert transform: H sin(kx) = -cos(kx) for k > 0."""
    return apply_multiplier(f, hilbert_symbol())


def bessel(f: Field, s: float) -> Field:
    return apply_multiplier(f, bessel_symbol(s))


def projector_low(f: Field, cut: CutoffSpec) -> Field:
    """Smooth low-pass projector; identity on spectra supported in |k| <= a."""
    k_nyq = abs(f.grid.k[f.grid.nyquist_index])
    if cut.a > k_nyq:
        raise ConfigurationError(
            f"cutoff a={cut.a:g} exceeds the Nyquist wavenumber {k_nyq:g}")
    return apply_multiplier(f, lowpass_symbol(cut))


def coordinate_multiply(f: Field) -> Field:
    """Pointwise product with the box coordinate x."""
    return Field(f.grid, f.grid.x * f.samples)


def truncated_weight(grid: Grid, n_w: float, theta: float) -> np.ndarray:
    """Smooth bounded weight equal to (1+x^2)^(theta/2) for |x| <= N.

    Constant (2N)^theta beyond 3N.  The bridge is a smooth minimum
    (sharp logsumexp) of the two closed forms: its derivative is a
    convex combination of theirs, so the weight is non-decreasing with
    slope at most theta <= 1 by construction, and its higher derivatives
    stay bounded uniformly in N.  The flat outer region makes the
    periodic continuation smooth.
    """
    if not (0 < theta <= 1):
        raise ConfigurationError(f"weight exponent must lie in (0, 1], got {theta}")
    if not (3.0 * n_w < grid.length / 2):
        raise ConfigurationError(
            f"flat region 3N = {3 * n_w:g} must fit inside the half box "
            f"{grid.length / 2:g}")
    ax = np.abs(grid.x)
    inner = (1.0 + ax ** 2) ** (theta / 2.0)
    outer = (2.0 * n_w) ** theta
    # sharpness scaled so both closed forms are attained to round-off at
    # |x| = N and 3N while the transition curvature stays O(1) in N
    sharp = 8.0 * (2.0 * n_w) ** (2.0 - 2.0 * theta)
    lo = np.minimum(inner, outer)
    w = lo - np.log(np.exp(-sharp * (inner - lo)) + np.exp(-sharp * (outer - lo))) / sharp
    return w
