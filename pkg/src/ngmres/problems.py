"""Test systems: the convection-diffusion family, cyclic shifts, random matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import as_csr, check_finite, matvec, to_dense

SYMMETRY_CLASSES = ("general", "symmetric", "shifted_skew_symmetric", "skew_symmetric")
SYMMETRY_RTOL = 1e-12


def _norm(A) -> float:
    if sp.issparse(A):
        return float(sp.linalg.norm(A))
    return float(np.linalg.norm(A))


def _identity_like(A):
    n = A.shape[0]
    return sp.identity(n, format="csr") if sp.issparse(A) else np.eye(n)


def symmetry_defect(A, symmetry_class: str) -> float:
    """Relative size of the part of ``A`` that violates ``symmetry_class``."""
    scale = max(_norm(A), np.finfo(float).tiny)
    if symmetry_class == "general":
        return 0.0
    if symmetry_class == "symmetric":
        return _norm(A - A.T) / scale
    if symmetry_class == "skew_symmetric":
        return _norm(A + A.T) / scale
    if symmetry_class == "shifted_skew_symmetric":
        alpha = shift_of(A)
        S = A - alpha * _identity_like(A)
        return _norm(S + S.T) / scale
    raise ValueError(f"unknown symmetry class {symmetry_class!r}")


def shift_of(A) -> float:
    """The ``alpha`` of ``A = alpha I + S``: the mean of the diagonal."""
    return float(np.mean(A.diagonal()))


def classify(A) -> str:
    """Most specific symmetry class ``A`` satisfies."""
    for cls in ("skew_symmetric", "symmetric", "shifted_skew_symmetric"):
        if symmetry_defect(A, cls) <= SYMMETRY_RTOL:
            return cls
    return "general"


@dataclass(frozen=True, eq=False)
class Problem:
    """A square system ``A x = b`` with a verified symmetry class."""

    A: object
    b: np.ndarray
    symmetry_class: str = "general"
    label: str = ""
    x_star: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        A = self.A
        if sp.issparse(A):
            A = as_csr(A)
        else:
            A = np.array(A, dtype=float)
            check_finite(A, name="matrix")
        object.__setattr__(self, "A", A)
        b = np.array(self.b, dtype=float)
        object.__setattr__(self, "b", b)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got shape {A.shape}")
        if b.shape != (A.shape[0],):
            raise ValueError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
        check_finite(b, name="right-hand side")
        if self.symmetry_class not in SYMMETRY_CLASSES:
            raise ValueError(f"unknown symmetry class {self.symmetry_class!r}")
        defect = symmetry_defect(A, self.symmetry_class)
        if defect > SYMMETRY_RTOL:
            raise ValueError(
                f"matrix is not {self.symmetry_class} (relative defect {defect:.3e})"
            )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def matvec(self, x) -> np.ndarray:
        return matvec(self.A, x)

    def residual(self, x) -> np.ndarray:
        """``A x - b`` (sign convention used throughout the package)."""
        return self.matvec(x) - self.b

    def dense(self) -> np.ndarray:
        return to_dense(self.A)


def with_ones_solution(A, symmetry_class: str, label: str) -> Problem:
    ones = np.ones(A.shape[0])
    return Problem(A, matvec(A, ones), symmetry_class, label, x_star=ones)


def build_convection_diffusion(n: int, sigma: float, tau: float, normalized: bool = False) -> Problem:
    """Centered five-point discretization of ``-Lap u + sigma u_x + tau u_y``.

    Unit square, homogeneous Dirichlet data, ``h = 1/(n+1)``, unknowns ordered
    lexicographically with x fastest. The stencil is ``4/h^2`` at the center
    and ``-1/h^2 -+ sigma/(2h)`` west/east, ``-1/h^2 -+ tau/(2h)`` south/north.
    ``normalized=True`` multiplies every entry by ``h^2`` (center 4, neighbours
    ``-1 -+ gamma``), the usual mesh-Reynolds-number form. ``b`` makes the
    all-ones vector exact.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if normalized:
        diag_w, conv = 1.0, 1.0 / (2.0 * (n + 1))
    else:
        diag_w, conv = float((n + 1) ** 2), (n + 1) / 2.0

    def one_dim(c):
        lower = np.full(n - 1, -diag_w - c * conv)
        upper = np.full(n - 1, -diag_w + c * conv)
        return sp.diags_array([lower, np.full(n, 2 * diag_w), upper], offsets=[-1, 0, 1])

    eye = sp.identity(n, format="csr")
    K = as_csr(sp.kron(eye, one_dim(sigma)) + sp.kron(one_dim(tau), eye))
    cls = "symmetric" if sigma == 0 and tau == 0 else "general"
    tag = ", normalized" if normalized else ""
    return with_ones_solution(K, cls, f"conv_diffusion(n={n}, sigma={sigma:g}, tau={tau:g}{tag})")


def convection_diffusion_from_reynolds(
    n: int, gamma1: float, gamma2: float | None = None, normalized: bool = False
) -> Problem:
    """Same as :func:`build_convection_diffusion`, parametrized by ``gamma = sigma h / 2``."""
    if gamma2 is None:
        gamma2 = gamma1
    h = 1.0 / (n + 1)
    return build_convection_diffusion(n, 2.0 * gamma1 / h, 2.0 * gamma2 / h, normalized)


def to_shifted_skew(K) -> Problem:
    """``A = I - (K - K^T)/2``, whose symmetric part is exactly the identity."""
    if isinstance(K, Problem):
        K = K.A
    if K.shape[0] != K.shape[1]:
        raise ValueError("matrix must be square")
    skew = (K - K.T) / 2
    A = _identity_like(K) - skew
    if sp.issparse(A):
        A = as_csr(A)
    return with_ones_solution(A, "shifted_skew_symmetric", "shifted_skew")


def build_cyclic_shift(n: int) -> Problem:
    """Cyclic downshift permutation with ``b = e_1``; the solution is ``e_n``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    A = np.zeros((n, n))
    A[0, n - 1] = 1.0
    A[np.arange(1, n), np.arange(n - 1)] = 1.0
    b = np.zeros(n)
    b[0] = 1.0
    x_star = np.zeros(n)
    x_star[-1] = 1.0
    return Problem(A, b, "general", f"cyclic_shift(n={n})", x_star=x_star)


def build_identity(n: int) -> Problem:
    return with_ones_solution(np.eye(n), "symmetric", f"identity(n={n})")


def random_problem(n: int, kind: str, rng: np.random.Generator, *, mu: float = 0.1) -> Problem:
    """Seeded dense random system of a given symmetry class.

    ``kind`` is one of the symmetry classes or ``"positive_real"``, which
    shifts a general Gaussian matrix so ``lambda_min((A + A^T)/2) == mu``.
    """
    G = rng.standard_normal((n, n)) / np.sqrt(n)
    if kind == "general":
        A, cls = G + 2.0 * np.eye(n) * rng.uniform(-1, 1), "general"
    elif kind == "positive_real":
        sym = (G + G.T) / 2
        lam = np.linalg.eigvalsh(sym)[0]
        A, cls = G + (mu - lam) * np.eye(n), "general"
    elif kind == "symmetric":
        A, cls = (G + G.T) / 2 + rng.uniform(0.5, 2.0) * np.eye(n), "symmetric"
    elif kind == "shifted_skew_symmetric":
        A, cls = (G - G.T) / 2 + rng.uniform(0.2, 2.0) * np.eye(n), "shifted_skew_symmetric"
    elif kind == "skew_symmetric":
        A, cls = (G - G.T) / 2, "skew_symmetric"
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if cls == "symmetric":
        A = (A + A.T) / 2
    x_star = rng.standard_normal(n)
    return Problem(A, A @ x_star, cls, f"random_{kind}(n={n})", x_star=x_star)


def initial_guess(spec: str, n: int, seed: int | None = None) -> np.ndarray:
    """``zeros``, ``ones`` or ``random`` (seeded uniform on (-1, 1))."""
    if spec == "zeros":
        return np.zeros(n)
    if spec == "ones":
        return np.ones(n)
    if spec == "random":
        return np.random.default_rng(seed).uniform(-1.0, 1.0, n)
    raise ValueError(f"unknown initial guess {spec!r}")
