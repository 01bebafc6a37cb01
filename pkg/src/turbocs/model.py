"""Signal model and sensing operators.

The measurement model is y = A x + n with x a sparse complex signal,
n complex circular AWGN and A either a row-subsampled unitary DFT
(applied via FFT, never materialized) or a dense IID complex Gaussian
matrix with per-entry variance 1/N (column norm^2 = M/N for both, which
is the normalization every algorithm and state-evolution recursion in
this package assumes).
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BernoulliGaussianPrior",
    "PartialDftOperator",
    "IidGaussianOperator",
    "ProblemInstance",
    "dft",
    "idft",
    "sample_signal",
    "sample_rows",
    "generate_instance",
]


def dft(x):
    """Unitary DFT (entries of magnitude 1/sqrt(N), negative exponent)."""
    return np.fft.fft(x, norm="ortho")


def idft(z):
    """Adjoint (= inverse) of the unitary DFT."""
    return np.fft.ifft(z, norm="ortho")


def _readonly(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BernoulliGaussianPrior:
    """Spike-and-slab law: 0 w.p. 1-sparsity, else CN(0, 1/sparsity).

    The active variance is tied to 1/sparsity so each entry has unit
    second moment regardless of the sparsity level.
    """

    sparsity: float

    def __post_init__(self):
        if not (0.0 < self.sparsity <= 1.0):
            raise ValueError(f"sparsity must be in (0, 1], got {self.sparsity}")

    @property
    def active_variance(self):
        return 1.0 / self.sparsity

    @property
    def second_moment(self):
        return self.sparsity * self.active_variance  # = 1 by construction


def sample_signal(prior, n, seed):
    """Draw n i.i.d. Bernoulli-Gaussian entries, deterministic given seed.

    seed may be anything np.random.default_rng accepts (int, SeedSequence,
    or an existing Generator, which is used as-is).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    active = rng.random(n) < prior.sparsity
    scale = np.sqrt(prior.active_variance / 2.0)
    gauss = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return np.where(active, gauss, 0.0 + 0.0j)


def sample_rows(n, m, seed):
    """m distinct row indices drawn uniformly without replacement from [0, n)."""
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=m, replace=False))


@dataclass(frozen=True)
class PartialDftOperator:
    """M rows of the unitary N-point DFT, applied via FFT.

    Forward is O(N log N): full DFT then row selection. The adjoint
    zero-pads into the selected rows before the inverse transform, so
    forward/adjoint form an exact adjoint pair. Each column of the
    implied M x N matrix has squared norm M/N.
    """

    n: int
    selected_rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.selected_rows, dtype=np.intp)
        # m = n is permitted (full unitary observation); only m > n is not.
        if rows.ndim != 1 or not (0 < rows.size <= self.n):
            raise ValueError(f"need 1..{self.n} selected rows, got shape {rows.shape}")
        if rows.min() < 0 or rows.max() >= self.n:
            raise ValueError("row indices out of range")
        if np.unique(rows).size != rows.size:
            raise ValueError("row indices must be distinct")
        object.__setattr__(self, "selected_rows", _readonly(rows))

    @property
    def m(self):
        return int(self.selected_rows.size)

    @property
    def shape(self):
        return (self.m, self.n)

    def forward(self, x):
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ValueError(f"expected length-{self.n} input, got {x.shape}")
        return dft(x)[self.selected_rows]

    def adjoint(self, u):
        u = np.asarray(u)
        if u.shape != (self.m,):
            raise ValueError(f"expected length-{self.m} input, got {u.shape}")
        z = np.zeros(self.n, dtype=complex)
        z[self.selected_rows] = u
        return idft(z)


@dataclass(frozen=True)
class IidGaussianOperator:
    """Dense M x N matrix with i.i.d. CN(0, 1/N) entries.

    Per-entry variance is 1/N (not 1/M), matching the partial-DFT column
    normalization so the two operator families are directly comparable.
    """

    m: int
    n: int
    seed: int
    matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("dimensions must be positive")
        rng = np.random.default_rng(self.seed)
        scale = np.sqrt(1.0 / (2.0 * self.n))
        a = scale * (
            rng.standard_normal((self.m, self.n))
            + 1j * rng.standard_normal((self.m, self.n))
        )
        object.__setattr__(self, "matrix", _readonly(a))

    @property
    def shape(self):
        return (self.m, self.n)

    def forward(self, x):
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ValueError(f"expected length-{self.n} input, got {x.shape}")
        return self.matrix @ x

    def adjoint(self, u):
        u = np.asarray(u)
        if u.shape != (self.m,):
            raise ValueError(f"expected length-{self.m} input, got {u.shape}")
        return self.matrix.conj().T @ u


@dataclass(frozen=True)
class ProblemInstance:
    """One realization of y = A x_true + n with noise variance sigma2."""

    x_true: np.ndarray
    y: np.ndarray
    sigma2: float
    operator: object
    seed: object = None

    def __post_init__(self):
        object.__setattr__(self, "x_true", _readonly(self.x_true))
        object.__setattr__(self, "y", _readonly(self.y))


def sample_noise(m, sigma2, seed):
    """Complex circular AWGN with per-entry variance sigma2."""
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    if sigma2 == 0:
        return np.zeros(m, dtype=complex)
    rng = np.random.default_rng(seed)
    return np.sqrt(sigma2 / 2.0) * (rng.standard_normal(m) + 1j * rng.standard_normal(m))


def generate_instance(prior, operator, sigma2, seed):
    """Draw a signal from the prior and measure it through the operator.

    The signal and the noise are drawn from a single stream in a fixed
    order, so the instance is bit-reproducible given (seed, parameters).
    """
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    rng = np.random.default_rng(seed)
    m, n = operator.shape
    x = sample_signal(prior, n, rng)
    noise = sample_noise(m, sigma2, rng)
    y = operator.forward(x) + noise
    return ProblemInstance(x_true=x, y=y, sigma2=float(sigma2), operator=operator, seed=seed)
