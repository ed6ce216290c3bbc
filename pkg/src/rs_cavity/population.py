"""Synthetic population generator: random covariances, covariates, scalars.

A population is a symmetric positive-definite covariance A0 with random
uniform spectrum and Haar-random eigenbasis, rescaled by a common factor so
the signal strength S = sqrt(beta0 . A0 beta0) hits a target.  The true
coefficient vector is the first basis vector.  Three scalars summarize the
population for the asymptotic theory: S, S0 = ||beta0|| and
alpha2 = tr(A0^{-1}) / p.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

DEFAULT_EIG_SUPPORT = (0.1, 10.0)


@dataclass
class PopulationSpec:
    p: int
    a0: np.ndarray = field(repr=False)
    beta0: np.ndarray = field(repr=False)
    s: float
    s0: float
    alpha2: float
    eigenvalues: np.ndarray = field(default=None, repr=False)
    rescale: float = 1.0
    _sqrt_a0: np.ndarray = field(default=None, repr=False, compare=False)

    @classmethod
    def from_matrix(cls, a0, beta0):
        a0 = np.asarray(a0, dtype=float)
        beta0 = np.asarray(beta0, dtype=float)
        p = a0.shape[0]
        if a0.shape != (p, p) or beta0.shape != (p,):
            raise ValueError("dimension mismatch between a0 and beta0")
        sym_err = np.max(np.abs(a0 - a0.T)) / max(1.0, np.max(np.abs(a0)))
        if sym_err > 1e-12:
            raise ValueError(f"a0 not symmetric (relative asymmetry {sym_err:.2e})")
        eigvals = np.linalg.eigvalsh(a0)
        if eigvals.min() <= 0:
            raise ValueError("a0 must be positive definite")
        return cls(
            p=p,
            a0=a0,
            beta0=beta0,
            s=float(np.sqrt(beta0 @ a0 @ beta0)),
            s0=float(np.linalg.norm(beta0)),
            alpha2=alpha_squared(a0),
            eigenvalues=eigvals,
        )

    @property
    def sqrt_a0(self):
        """Symmetric square root of a0 (cached)."""
        if self._sqrt_a0 is None:
            lam, vecs = np.linalg.eigh(self.a0)
            self._sqrt_a0 = (vecs * np.sqrt(lam)) @ vecs.T
        return self._sqrt_a0

    def to_dict(self, include_matrix=True):
        out = {
            "p": self.p,
            "eigenvalues": np.sort(self.eigenvalues).tolist(),
            "beta0": self.beta0.tolist(),
            "S": self.s,
            "S0": self.s0,
            "alpha2": self.alpha2,
            "rescale": self.rescale,
        }
        if include_matrix:
            out["a0"] = self.a0.tolist()
        return out

    @classmethod
    def from_dict(cls, d):
        spec = cls.from_matrix(np.asarray(d["a0"], dtype=float),
                               np.asarray(d["beta0"], dtype=float))
        spec.rescale = d.get("rescale", 1.0)
        return spec


def sample_haar_orthogonal(p, rng):
    """Haar-distributed random orthogonal p x p matrix.

    QR factorization of a standard Gaussian matrix with the sign of the R
    diagonal absorbed into Q, which makes the distribution exactly Haar.
    """
    if p < 1:
        raise ValueError("dimension must be >= 1")
    g = rng.standard_normal((p, p))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


def build_population(p, rng, eig_support=DEFAULT_EIG_SUPPORT, s_target=1.0):
    """Random population covariance with spectrum uniform on ``eig_support``,
    rescaled by a common factor so that beta0 . A0 beta0 = s_target**2 with
    beta0 the first basis vector."""
    if p < 1:
        raise ValueError("dimension must be >= 1")
    lo, hi = eig_support
    if not (0 < lo <= hi):
        raise ValueError(f"eigenvalue support must satisfy 0 < lo <= hi, got {eig_support}")
    if s_target <= 0:
        raise ValueError("s_target must be positive")
    o = sample_haar_orthogonal(p, rng)
    lam = rng.uniform(lo, hi, size=p)
    a0 = (o * lam) @ o.T
    a0 = 0.5 * (a0 + a0.T)
    beta0 = np.zeros(p)
    beta0[0] = 1.0
    c = s_target**2 / float(a0[0, 0])  # beta0 . A0 beta0 = A0[0, 0]
    a0 *= c
    a0[0, 0] = s_target**2  # exact, kills the last rounding ulp
    spec = PopulationSpec(
        p=p,
        a0=a0,
        beta0=beta0,
        s=float(np.sqrt(a0[0, 0])),
        s0=1.0,
        alpha2=alpha_squared(a0),
        eigenvalues=lam * c,
        rescale=c,
    )
    return spec


def alpha_squared(a0):
    """tr(A0^{-1}) / p via Cholesky: tr(A0^{-1}) = ||L^{-1}||_F^2."""
    a0 = np.asarray(a0, dtype=float)
    p = a0.shape[0]
    try:
        chol = np.linalg.cholesky(a0)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"covariance matrix is singular: {exc}") from exc
    linv = solve_triangular(chol, np.eye(p), lower=True)
    return float(np.sum(linv**2) / p)


def sample_covariates(n, spec, rng):
    """n i.i.d. rows from N(0, A0)."""
    if n < 1:
        raise ValueError("need at least one row")
    z = rng.standard_normal((n, spec.p))
    return z @ spec.sqrt_a0
