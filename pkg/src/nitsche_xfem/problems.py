"""Model interface problems with known exact solutions.

Each problem carries, per subdomain, the diffusion coefficient, the source
term, the exact solution and its gradient.  Exact solutions are analytic on
the whole square, so they can be evaluated on fictitious parts of a cut
element as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .geometry import LevelSetInterface

CENTER = (0.5, 0.5)
#: Squared circle radius; r0 = sqrt(2) - 1 reproduces the reference mesh counts.
RADIUS2 = 3.0 - 2.0 * np.sqrt(2.0)
LINEAR_OFFSET = 1.0 / np.sqrt(2.0)

Scalar = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemCoefficients:
    """Piecewise data of ``-div(alpha grad u) = f`` on the subdomains."""

    name: str
    interfaces: list
    alpha: tuple
    source: tuple
    exact: tuple | None = None
    exact_grad: tuple | None = None
    load_degree: int = 2
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.interfaces) + 1
        if len(self.alpha) != n or len(self.source) != n:
            raise ConfigurationError(f"{self.name}: need data for {n} subdomains")
        if min(self.alpha) <= 0.0:
            raise ConfigurationError("coefficients must be positive")

    @property
    def n_subdomains(self) -> int:
        return len(self.alpha)

    def boundary_values(self, x, y, subdomain) -> np.ndarray:
        """Dirichlet data: each dof takes its own subdomain's exact solution."""
        out = np.empty(np.shape(x))
        for i, u in enumerate(self.exact):
            sel = subdomain == i
            out[sel] = u(x[sel], y[sel])
        return out


def _const(c: float) -> Scalar:
    return lambda x, y: np.full(np.shape(x), c, dtype=float)


# Example 1: product of sharp Gaussian ridges with a radial factor.
#   u = A(x) B(x) C(y) D(x, y),  A = exp(-500 (x-1/3)^2) - 1,  B = exp(-500 (x-2/3)^2) - 1,
#   C = exp(-500 (y-1/2)^2) - 1,  D = (1 - 3 r)^2,  r = (x-1/2)^2 + (y-1/2)^2.
# Second derivatives follow from the product rule; the load is f = -(u_xx + u_yy).

def _ridge(z, z0):
    e = np.exp(-500.0 * (z - z0) ** 2)
    return e - 1.0, -1000.0 * (z - z0) * e, (-1000.0 + 1.0e6 * (z - z0) ** 2) * e


def _example1_parts(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A, Ax, Axx = _ridge(x, 1.0 / 3.0)
    B, Bx, Bxx = _ridge(x, 2.0 / 3.0)
    C, Cy, Cyy = _ridge(y, 0.5)
    r = (x - 0.5) ** 2 + (y - 0.5) ** 2
    w = 1.0 - 3.0 * r
    D = w**2
    Dx = -12.0 * (x - 0.5) * w
    Dy = -12.0 * (y - 0.5) * w
    Dxx = -12.0 * w + 72.0 * (x - 0.5) ** 2
    Dyy = -12.0 * w + 72.0 * (y - 0.5) ** 2
    P, Px, Pxx = A * B, Ax * B + A * Bx, Axx * B + 2.0 * Ax * Bx + A * Bxx
    return P, Px, Pxx, C, Cy, Cyy, D, Dx, Dy, Dxx, Dyy


def example1_exact(x, y):
    P, _, _, C, _, _, D, *_ = _example1_parts(x, y)
    return P * C * D


def example1_grad(x, y):
    P, Px, _, C, Cy, _, D, Dx, Dy, _, _ = _example1_parts(x, y)
    return C * (Px * D + P * Dx), P * (Cy * D + C * Dy)


def example1_source(x, y):
    P, Px, Pxx, C, Cy, Cyy, D, Dx, Dy, Dxx, Dyy = _example1_parts(x, y)
    uxx = C * (Pxx * D + 2.0 * Px * Dx + P * Dxx)
    uyy = P * (Cyy * D + 2.0 * Cy * Dy + C * Dyy)
    return -(uxx + uyy)


def _r2(x, y):
    return (np.asarray(x) - CENTER[0]) ** 2 + (np.asarray(y) - CENTER[1]) ** 2


def _radial_grad(scale: float):
    return lambda x, y: (2.0 * scale * (np.asarray(x) - CENTER[0]), 2.0 * scale * (np.asarray(y) - CENTER[1]))


def circle() -> LevelSetInterface:
    return LevelSetInterface.circular(CENTER, RADIUS2)


def example1(interfaces: Sequence[LevelSetInterface] | None = None) -> ProblemCoefficients:
    """Continuous coefficients, straight interface(s); sharp-ridge exact solution."""
    if interfaces is None:
        interfaces = [LevelSetInterface.linear(LINEAR_OFFSET)]
    interfaces = sorted(interfaces, key=lambda itf: itf.offset)
    n = len(interfaces) + 1
    return ProblemCoefficients(
        name="example1",
        interfaces=list(interfaces),
        alpha=(1.0,) * n,
        source=(example1_source,) * n,
        exact=(example1_exact,) * n,
        exact_grad=(example1_grad,) * n,
        load_degree=5,
    )


def example2(alpha1: float, alpha2: float = 1.0) -> ProblemCoefficients:
    """Circular interface, ``f = -4 alpha1 alpha2``."""
    r02 = RADIUS2
    return ProblemCoefficients(
        name="example2",
        interfaces=[circle()],
        alpha=(alpha1, alpha2),
        source=(_const(-4.0 * alpha1 * alpha2),) * 2,
        exact=(
            lambda x, y: alpha2 * (_r2(x, y) - r02),
            lambda x, y: alpha1 * (_r2(x, y) - r02),
        ),
        exact_grad=(_radial_grad(alpha2), _radial_grad(alpha1)),
    )


def example3(alpha2: float, alpha1: float = 1.0) -> ProblemCoefficients:
    """Circular interface, ``f = -4``; the solution is continuous across the circle."""
    r02 = RADIUS2
    return ProblemCoefficients(
        name="example3",
        interfaces=[circle()],
        alpha=(alpha1, alpha2),
        source=(_const(-4.0),) * 2,
        exact=(
            lambda x, y: _r2(x, y) / alpha1,
            lambda x, y: (_r2(x, y) - r02) / alpha2 + r02 / alpha1,
        ),
        exact_grad=(_radial_grad(1.0 / alpha1), _radial_grad(1.0 / alpha2)),
    )


def multi_interface_offsets(count: int) -> list[float]:
    """Offsets of the first ``count`` parallel lines of the interface-robustness study."""
    if not 1 <= count <= 10:
        raise ConfigurationError("interface count must be between 1 and 10")
    s = 1.0 / np.sqrt(2.0)
    offs = []
    for i in range(1, count + 1):
        offs.append(0.1 * (s + i - 1) if i <= 5 else -0.1 * (s - i))
    return offs


def multi_interface(count: int) -> ProblemCoefficients:
    """Example 1 data with ``count`` parallel straight interfaces."""
    return example1([LevelSetInterface.linear(c) for c in multi_interface_offsets(count)])


def fitted() -> ProblemCoefficients:
    """Example 1 without any interface (plain P1 FEM on the background mesh)."""
    return example1([])
