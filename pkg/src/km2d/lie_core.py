"""Compact Lie algebras in real antisymmetric matrix representations.

Provides the structure constants f^{ab}_c, the generator matrices M_a and the
trace normalization C_M > 0 defined by Tr(M_a M_b) = -C_M delta_{ab}.  The
built-in family is so(n) in its adjoint representation, which has exact
integer matrix entries, so downstream anticommutator and commutator tests can
be exact rather than tolerance-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LieAlgebraRep:
    """A compact Lie algebra with real antisymmetric generators.

    dim_g: number of generators.
    d:     representation dimension (number of fermion flavours).
    f:     structure constants, f[a, b, c] = f^{ab}_c.
    M:     generator matrices, M[a] of shape (d, d), integer-valued here.
    C_M:   positive normalization, Tr(M_a M_b) = -C_M delta_{ab}.
    """

    name: str
    dim_g: int
    d: int
    f: np.ndarray
    M: np.ndarray
    C_M: float

    def __post_init__(self):
        self.f.setflags(write=False)
        self.M.setflags(write=False)


@dataclass
class RepValidation:
    antisymmetry: float
    commutation: float
    jacobi: float
    trace_norm: float
    structural_errors: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.antisymmetry, self.commutation, self.jacobi,
                   self.trace_norm)

    @property
    def passed(self) -> bool:
        return not self.structural_errors and self.max_residual <= 1e-12


def _so_defining_basis(n: int) -> list[np.ndarray]:
    """Basis E_ab - E_ba, a < b, of n x n antisymmetric matrices."""
    basis = []
    for a in range(n):
        for b in range(a + 1, n):
            m = np.zeros((n, n), dtype=np.int64)
            m[a, b] = 1
            m[b, a] = -1
            basis.append(m)
    return basis


def _levi_civita3() -> np.ndarray:
    eps = np.zeros((3, 3, 3), dtype=np.int64)
    for (a, b, c), s in (((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
                         ((0, 2, 1), -1), ((2, 1, 0), -1), ((1, 0, 2), -1)):
        eps[a, b, c] = s
    return eps


def build_so_adjoint(n: int) -> LieAlgebraRep:
    """Adjoint representation of so(n), n >= 3.

    For n = 3 the generators are (M_a)_{ij} = -eps_{aij}, dim_g = d = 3 and
    C_M = 2. All entries are exact integers.
    """
    if n < 3:
        raise ValueError(f"so({n}) adjoint not supported, need n >= 3")
    if n == 3:
        eps = _levi_civita3()
        f = eps.copy()
        M = -eps.copy()
        rep = LieAlgebraRep(name="so3-adjoint", dim_g=3, d=3, f=f, M=M, C_M=2.0)
    else:
        defining = _so_defining_basis(n)
        g = len(defining)
        # f^{ab}_c from [A_a, A_b] = f^{ab}_c A_c; the defining basis is
        # trace-orthogonal with Tr(A_a A_b) = -2 delta_ab.
        f = np.zeros((g, g, g), dtype=np.int64)
        for a in range(g):
            for b in range(g):
                comm = defining[a] @ defining[b] - defining[b] @ defining[a]
                for c in range(g):
                    f[a, b, c] = -np.trace(comm @ defining[c]) // 2
        M = np.zeros((g, g, g), dtype=np.int64)
        for a in range(g):
            M[a] = f[a].T          # (M_a)_{cb} = f^{ab}_c
        cm = int(np.sum(M[0] * M[0]))   # -Tr(M M) for antisymmetric M
        rep = LieAlgebraRep(name=f"so{n}-adjoint", dim_g=g, d=g, f=f, M=M,
                            C_M=float(cm))
    check = validate_rep(rep)
    if not check.passed:
        raise AssertionError(f"so({n}) adjoint construction failed: {check}")
    return rep


def validate_rep(rep: LieAlgebraRep) -> RepValidation:
    """Residuals of the four defining invariants of a LieAlgebraRep."""
    errors = []
    f = np.asarray(rep.f, dtype=float)
    M = np.asarray(rep.M, dtype=float)
    if f.shape != (rep.dim_g,) * 3:
        errors.append(f"f has shape {f.shape}, expected {(rep.dim_g,) * 3}")
    if M.shape != (rep.dim_g, rep.d, rep.d):
        errors.append(
            f"M has shape {M.shape}, expected {(rep.dim_g, rep.d, rep.d)}")
    if errors:
        return RepValidation(np.inf, np.inf, np.inf, np.inf, errors)

    antisym = max(float(np.abs(M[a] + M[a].T).max()) for a in range(rep.dim_g))

    comm = 0.0
    for a in range(rep.dim_g):
        for b in range(rep.dim_g):
            lhs = M[a] @ M[b] - M[b] @ M[a]
            rhs = np.tensordot(f[a, b], M, axes=(0, 0))
            comm = max(comm, float(np.linalg.norm(lhs - rhs)))

    jac = float(np.abs(f + np.swapaxes(f, 0, 1)).max())
    # Jacobi: f^{ab}_e f^{ec}_d + f^{bc}_e f^{ea}_d + f^{ca}_e f^{eb}_d = 0
    j = (np.einsum("abe,ecd->abcd", f, f)
         + np.einsum("bce,ead->abcd", f, f)
         + np.einsum("cae,ebd->abcd", f, f))
    jac = max(jac, float(np.abs(j).max()))

    gram = -np.einsum("aij,bji->ab", M, M)
    trace = float(np.abs(gram - rep.C_M * np.eye(rep.dim_g)).max())

    return RepValidation(antisym, comm, jac, trace, errors)


_REGISTRY: dict[str, LieAlgebraRep] = {}


def get_rep(name: str) -> LieAlgebraRep:
    """Look up a representation by CLI name, e.g. 'so3-adjoint'."""
    if name not in _REGISTRY:
        if name.startswith("so") and name.endswith("-adjoint"):
            try:
                n = int(name[2:-len("-adjoint")])
            except ValueError:
                raise KeyError(f"unknown representation {name!r}") from None
            _REGISTRY[name] = build_so_adjoint(n)
        else:
            raise KeyError(f"unknown representation {name!r}")
    return _REGISTRY[name]
