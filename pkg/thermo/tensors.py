"""
Symmetric 3x3 tensor algebra and the isotropic elasticity operator.

Tensors are stored as six components in the order (xx, yy, zz, yz, xz, xy).
Off-diagonal entries are stored once and counted twice in the Frobenius
product. The array helpers act on trailing axes of shape (..., 6) so the
quadrature loops stay vectorised; SymTensor3 wraps a single tensor for the
scalar API.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterError

COMPONENT_NAMES = ("xx", "yy", "zz", "yz", "xz", "xy")
INDEX_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))

# Frobenius weights of the stored components
METRIC = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])
IDENTITY = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
DEVIATORIC_PROJECTOR = np.eye(6) - np.outer(IDENTITY, IDENTITY) / 3.0


def trace(a):
    a = np.asarray(a, dtype=float)
    return a[..., 0] + a[..., 1] + a[..., 2]


def deviator(a):
    a = np.asarray(a, dtype=float)
    return a - (trace(a) / 3.0)[..., None] * IDENTITY


def double_dot(a, b):
    """A:B over the trailing component axis."""
    return np.sum(METRIC * np.asarray(a, dtype=float) * np.asarray(b, dtype=float), axis=-1)


def frobenius_norm(a):
    return np.sqrt(double_dot(a, a))


def to_matrix(a):
    a = np.asarray(a, dtype=float)
    matrix = np.empty(a.shape[:-1] + (3, 3))
    for k, (i, j) in enumerate(INDEX_PAIRS):
        matrix[..., i, j] = a[..., k]
        matrix[..., j, i] = a[..., k]
    return matrix


def from_matrix(matrix):
    """Six stored components of the symmetric part of `matrix`."""
    matrix = np.asarray(matrix, dtype=float)
    sym = 0.5 * (matrix + np.swapaxes(matrix, -1, -2))
    return np.stack([sym[..., i, j] for i, j in INDEX_PAIRS], axis=-1)


@dataclass(frozen=True)
class ElasticModuli:
    """Isotropic Lame moduli (Pa)."""

    mu: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.mu) or not np.isfinite(self.lam):
            raise ParameterError("Lame moduli must be finite")
        if not self.mu > 0:
            raise ParameterError(f"shear modulus mu must be positive, got {self.mu}")
        if not 3.0 * self.lam + 2.0 * self.mu > 0:
            raise ParameterError(
                f"3*lambda + 2*mu must be positive, got lambda={self.lam}, mu={self.mu}"
            )

    @property
    def bulk_modulus(self):
        return self.lam + 2.0 * self.mu / 3.0

    @property
    def compliance_coefficient(self):
        # volumetric correction in C^-1 T = T/(2 mu) - c tr(T) Id
        return self.lam / (2.0 * self.mu * (2.0 * self.mu + 3.0 * self.lam))

    def stiffness_matrix(self):
        """C in the storage basis: stress components = C @ strain components."""
        return 2.0 * self.mu * np.eye(6) + self.lam * np.outer(IDENTITY, IDENTITY)

    def compliance_matrix(self):
        return np.eye(6) / (2.0 * self.mu) - self.compliance_coefficient * np.outer(IDENTITY, IDENTITY)


def hooke(moduli, strain):
    strain = np.asarray(strain, dtype=float)
    return 2.0 * moduli.mu * strain + (moduli.lam * trace(strain))[..., None] * IDENTITY


def hooke_inverse(moduli, stress):
    stress = np.asarray(stress, dtype=float)
    return stress / (2.0 * moduli.mu) - (moduli.compliance_coefficient * trace(stress))[..., None] * IDENTITY


class SymTensor3:
    """A single symmetric 3x3 tensor."""

    __slots__ = ("components",)

    def __init__(self, components):
        components = np.array(components, dtype=float).reshape(6)
        components.setflags(write=False)
        self.components = components

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (3, 3):
            raise ParameterError(f"expected a 3x3 matrix, got shape {matrix.shape}")
        return cls(from_matrix(matrix))

    @classmethod
    def zero(cls):
        return cls(np.zeros(6))

    @classmethod
    def identity(cls):
        return cls(IDENTITY)

    @classmethod
    def diag(cls, a, b, c):
        return cls([a, b, c, 0.0, 0.0, 0.0])

    @property
    def matrix(self):
        return to_matrix(self.components)

    @property
    def trace(self):
        return float(trace(self.components))

    def deviator(self):
        return SymTensor3(deviator(self.components))

    def norm(self):
        return float(frobenius_norm(self.components))

    def dot(self, other):
        return float(double_dot(self.components, other.components))

    def allclose(self, other, atol=1e-12, rtol=0.0):
        return bool(np.allclose(self.components, other.components, atol=atol, rtol=rtol))

    def __add__(self, other):
        return SymTensor3(self.components + other.components)

    def __sub__(self, other):
        return SymTensor3(self.components - other.components)

    def __neg__(self):
        return SymTensor3(-self.components)

    def __mul__(self, scalar):
        return SymTensor3(self.components * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SymTensor3(self.components / float(scalar))

    def __eq__(self, other):
        if not isinstance(other, SymTensor3):
            return NotImplemented
        return bool(np.array_equal(self.components, other.components))

    __hash__ = None

    def __repr__(self):
        values = ", ".join(f"{name}={value:.6g}" for name, value in zip(COMPONENT_NAMES, self.components))
        return f"SymTensor3({values})"


def dev_vol_split(S):
    """
    Split S into its deviator and trace.
    S = deviator + (volumetric / 3) Id.
    """
    return S.deviator(), S.trace


def hooke_apply(moduli, E):
    return SymTensor3(hooke(moduli, E.components))


def hooke_inverse_apply(moduli, T):
    return SymTensor3(hooke_inverse(moduli, T.components))


def energy_inner(moduli, A, B, inverse=False):
    """(C A):B, or (C^-1 A):B when `inverse` is set."""
    operator = hooke_inverse if inverse else hooke
    return float(double_dot(operator(moduli, A.components), B.components))


def compliance_split(moduli, A, B):
    """
    Volumetric and deviatoric parts of (C^-1 A):B.

    Returns (tr A tr B / (3 (3 lambda + 2 mu)), dev A : dev B / (2 mu)); their sum is
    energy_inner(moduli, A, B, inverse=True). Accepts SymTensor3 or (..., 6) arrays.
    """
    a = A.components if isinstance(A, SymTensor3) else np.asarray(A, dtype=float)
    b = B.components if isinstance(B, SymTensor3) else np.asarray(B, dtype=float)
    volumetric = trace(a) * trace(b) / (3.0 * (3.0 * moduli.lam + 2.0 * moduli.mu))
    deviatoric = double_dot(deviator(a), deviator(b)) / (2.0 * moduli.mu)
    return volumetric, deviatoric
