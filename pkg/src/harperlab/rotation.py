"""Clock-and-shift representations of the rotation algebra at rational flux.

At alpha = p/q the algebra generated by unitaries u, v with
u v = exp(2 pi i alpha) v u has q x q representations parameterized by two
phases.  We take u diagonal (clock) and v a cyclic shift; the trace state
is the normalized matrix trace averaged over the phase torus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rationals import RationalFrequency, pi_fraction_trig

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform tensor grid {(2 pi j/n1, 2 pi k/n2)} on the phase torus.

    Trapezoid averaging over this grid integrates any trigonometric
    polynomial with harmonic degrees < (n1, n2) exactly, and is
    exponentially accurate for resolvent-type families.
    """

    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("grid sizes must be >= 1")

    @classmethod
    def for_window(cls, window: int, q: int) -> "PhaseGrid":
        """Default grid for a coefficient window at denominator q.

        Aliases land on harmonics of lcm(q, n), so a size coprime to q
        pushes the first alias past 2n and the quadrature is exact to
        roundoff for the whole window.
        """
        import math
        n = 4 * (window + q)
        while math.gcd(n, q) != 1:
            n += 1
        return cls(n, n)

    def nodes(self):
        t1 = TWO_PI * np.arange(self.n1) / self.n1
        t2 = TWO_PI * np.arange(self.n2) / self.n2
        return t1, t2


@dataclass(frozen=True)
class RotationRep:
    """A q x q unitary pair (u, v) at phases (theta1, theta2)."""

    freq: RationalFrequency
    theta1: float
    theta2: float
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    @property
    def q(self) -> int:
        return self.freq.q


@dataclass(frozen=True)
class AlgebraElement:
    rep: RotationRep
    matrix: np.ndarray = field(repr=False)

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(self.rep, self.matrix.conj().T)

    def __add__(self, other):
        return AlgebraElement(self.rep, self.matrix + _mat(other))

    def __sub__(self, other):
        return AlgebraElement(self.rep, self.matrix - _mat(other))

    def __matmul__(self, other):
        return AlgebraElement(self.rep, self.matrix @ _mat(other))

    def __rmul__(self, scalar):
        return AlgebraElement(self.rep, scalar * self.matrix)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.matrix)))


def _mat(x):
    return x.matrix if isinstance(x, AlgebraElement) else x


def max_norm(a, b=None) -> float:
    """Entrywise max norm of a (or of a - b)."""
    m = _mat(a) if b is None else _mat(a) - _mat(b)
    return float(np.max(np.abs(m)))


def build_rep(freq: RationalFrequency, theta1: float = 0.0, theta2: float = 0.0) -> RotationRep:
    """Clock/shift pair with u v = exp(2 pi i p/q) v u exactly.

    u = exp(i theta1) diag(omega^j) with omega = exp(2 pi i p/q), and
    v = exp(i theta2) S with (S x)_j = x_{j-1} cyclically.
    """
    q = freq.q
    j = np.arange(q)
    diag = np.exp(1j * (theta1 + TWO_PI * ((j * freq.p) % q) / q))
    u = np.diag(diag)
    shift = np.zeros((q, q), dtype=complex)
    shift[j, (j - 1) % q] = 1.0
    v = np.exp(1j * theta2) * shift
    return RotationRep(freq, float(theta1), float(theta2), u, v)


def monomial(rep: RotationRep, p: int, qe: int) -> AlgebraElement:
    """Standardized monomial exp(-i pi alpha p qe) u^p v^qe.

    The balancing phase makes the family self-adjoint under index negation,
    w(p, qe)* = w(-p, -qe), and each w unitary.  Negative exponents are the
    corresponding adjoint powers.
    """
    freq = rep.freq
    q = freq.q
    j = np.arange(q)
    # u^p is diagonal; v^qe is the shifted permutation. Build both directly
    # so large |p|, |qe| cost O(q^2) and lose no phase accuracy.
    updiag = np.exp(1j * (p * rep.theta1 + TWO_PI * ((j * freq.p * p) % q) / q))
    mat = np.zeros((q, q), dtype=complex)
    mat[j, (j - qe) % q] = updiag
    c, s = pi_fraction_trig(-p * qe * freq.p, q)
    return AlgebraElement(rep, complex(c, s) * np.exp(1j * qe * rep.theta2) * mat)


def trace_tau(family, grid: PhaseGrid):
    """Phase-averaged normalized trace of a representation-valued family.

    `family` maps (theta1, theta2) to an AlgebraElement or matrix.  Raises
    on non-finite entries (e.g. a resolvent evaluated inside the spectrum).
    """
    t1s, t2s = grid.nodes()
    total = 0.0 + 0.0j
    count = 0
    for a in t1s:
        for b in t2s:
            m = _mat(family(a, b))
            if not np.all(np.isfinite(m)):
                raise ValueError(f"family has non-finite entries at phases ({a}, {b})")
            total += np.trace(m) / m.shape[0]
            count += 1
    return total / count


def hamiltonian(rep: RotationRep, beta: float) -> AlgebraElement:
    """u + u* + beta (v + v*); self-adjoint with norm at most 2 + 2 beta."""
    if beta <= 0:
        raise ValueError(f"coupling must be positive, got beta={beta}")
    u, v = rep.u, rep.v
    return AlgebraElement(rep, u + u.conj().T + beta * (v + v.conj().T))


def build_uv(rep: RotationRep, beta: float):
    """The ladder pair (U, V) generating the scaled copy of the algebra.

    U = beta^{-1/2} u + beta^{1/2} v and V is the standardized monomial
    w(1, -1).  They satisfy, with lam = exp(i pi alpha) and
    gamma = beta + 1/beta,

        U V  = lam^{-2} V U,        U* V = lam^{2} V U*,
        U* U = lam V + lam^{-1} V* + gamma,

    and sqrt(beta) (U + U*) recovers the Hamiltonian.
    """
    if beta <= 0:
        raise ValueError(f"coupling must be positive, got beta={beta}")
    U = AlgebraElement(rep, beta ** -0.5 * rep.u + beta ** 0.5 * rep.v)
    V = monomial(rep, 1, -1)
    return U, V


def lam_phase(freq: RationalFrequency) -> complex:
    """exp(i pi alpha) with the angle reduced exactly."""
    c, s = pi_fraction_trig(freq.p, freq.q)
    return complex(c, s)


def rho_images(rep: RotationRep, beta: float, cond_limit: float = 1e12):
    """Images of (u, v) under the linear twist automorphism.

    rho(u) = v u v (u v + beta)^{-1} (v* u* + beta)
    rho(v) = v (u v + beta)^{-1} (v* u* + beta)

    so that rho(u + beta v) = u* + beta v.
    """
    u, v = rep.u, rep.v
    eye = np.eye(rep.q)
    a = u @ v + beta * eye
    _check_cond(a, beta, cond_limit)
    b = v.conj().T @ u.conj().T + beta * eye
    core = np.linalg.solve(a, b)
    return AlgebraElement(rep, v @ u @ v @ core), AlgebraElement(rep, v @ core)


def sigma_images(rep: RotationRep, beta: float, cond_limit: float = 1e12):
    """Images of (u, v) under the conjugate-linear symmetry.

    sigma(u) = v u* v (u* v + beta)^{-1} (v* u + beta)
    sigma(v) = v (u* v + beta)^{-1} (v* u + beta)

    The map extends conjugate-linearly (sigma(c a) = conj(c) sigma(a)), so
    its defining identities reduce to plain matrix identities on the images:
    sigma(u) + beta sigma(v) = u + beta v (it fixes the ladder generator U)
    and lam^{-1} sigma(u) sigma(v)* = V* (it conjugates the twist V).
    """
    if not 0 < beta < 1:
        raise ValueError(f"symmetry images need 0 < beta < 1, got beta={beta}")
    u, v = rep.u, rep.v
    eye = np.eye(rep.q)
    a = u.conj().T @ v + beta * eye
    _check_cond(a, beta, cond_limit)
    b = v.conj().T @ u + beta * eye
    core = np.linalg.solve(a, b)
    return AlgebraElement(rep, v @ u.conj().T @ v @ core), AlgebraElement(rep, v @ core)


def _check_cond(a, beta, cond_limit):
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > cond_limit:
        raise np.linalg.LinAlgError(
            f"u*v + beta nearly singular at beta={beta} (cond={cond:.3e}); "
            "-beta approaches an eigenvalue of the unitary"
        )


@dataclass(frozen=True)
class NeumannExpansion:
    element: AlgebraElement
    errors: tuple
    observed_ratio: float


def neumann_inverse(rep: RotationRep, beta: float, n_terms: int) -> NeumannExpansion:
    """Partial geometric series for (u* v + beta)^{-1}.

    The series sum_n (-beta)^n (v* u)^{n+1} converges for beta < 1 with
    ratio exactly beta; the returned record carries the error of each
    partial sum against the direct inverse and the fitted ratio.
    """
    if not 0 < beta < 1:
        raise ValueError(f"series requires 0 < beta < 1, got beta={beta}")
    if n_terms < 0:
        raise ValueError("n_terms must be >= 0")
    u, v = rep.u, rep.v
    eye = np.eye(rep.q)
    target = np.linalg.inv(u.conj().T @ v + beta * eye)
    t = v.conj().T @ u
    partial = np.zeros_like(target)
    term = t.copy()
    errors = []
    for n in range(n_terms + 1):
        partial = partial + (-beta) ** n * term
        term = term @ t
        errors.append(float(np.max(np.abs(partial - target))))
    if len(errors) >= 2 and errors[-1] > 0 and errors[0] > 0:
        k = len(errors) - 1
        ratio = (errors[-1] / errors[0]) ** (1.0 / k)
    else:
        ratio = 0.0
    return NeumannExpansion(AlgebraElement(rep, partial), tuple(errors), ratio)
