"""Dense 3-way Tucker decomposition and angular principal components.

A view stack is an (X, Y, V) tensor with high redundancy along the view
axis. Decomposing it as ``core x1 U1 x2 U2 x3 U3`` with orthonormal
factors and re-expanding only the spatial modes yields V angular
components ordered by energy; the first one is a dimensionality-reduced
image that carries the stack's shared texture.

Modes are 1-based throughout; unfoldings flatten the remaining axes with
the smaller mode varying fastest.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 50


def unfold(tensor, mode):
    """Mode-k unfolding of a 3-way tensor into a (K_mode, rest) matrix."""
    t = np.asarray(tensor)
    if t.ndim != 3:
        raise ValueError(f"expected a 3-way tensor, got ndim={t.ndim}")
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    k = mode - 1
    return np.reshape(np.moveaxis(t, k, 0), (t.shape[k], -1), order="F")


def fold(matrix, mode, shape):
    """Inverse of :func:`unfold` for a tensor of the given shape."""
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    k = mode - 1
    rest = tuple(shape[i] for i in range(3) if i != k)
    t = np.reshape(np.asarray(matrix), (shape[k],) + rest, order="F")
    return np.moveaxis(t, 0, k)


def mode_product(tensor, matrix, mode):
    """Mode-k product: contracts ``matrix`` columns with the k-th axis."""
    t = np.asarray(tensor)
    m = np.asarray(matrix)
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    k = mode - 1
    if m.ndim != 2 or m.shape[1] != t.shape[k]:
        raise ValueError(
            f"matrix shape {m.shape} does not match tensor axis {t.shape[k]} (mode {mode})"
        )
    return np.moveaxis(np.tensordot(m, t, axes=(1, k)), 0, k)


@dataclass(frozen=True)
class TuckerFactors:
    """Orthonormal factor matrices, the core tensor, and the fit per sweep."""

    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    core: np.ndarray
    fit_history: tuple[float, ...] = ()

    @property
    def factors(self):
        return self.u1, self.u2, self.u3


def reconstruct(factors: TuckerFactors):
    t = mode_product(factors.core, factors.u1, 1)
    t = mode_product(t, factors.u2, 2)
    return mode_product(t, factors.u3, 3)


def _leading_singular_vectors(matrix, rank):
    u, _, _ = np.linalg.svd(matrix, full_matrices=False)
    return u[:, :rank]


def tucker_als(tensor, ranks, max_iters=DEFAULT_MAX_ITERS, tol=DEFAULT_TOL) -> TuckerFactors:
    """Tucker decomposition by HOSVD initialization plus HOOI sweeps.

    Stops when the relative fit 1 - ||t - t_hat||_F / ||t||_F improves by
    less than ``tol`` or after ``max_iters`` sweeps; the fit sequence is
    non-decreasing. A zero tensor yields a zero core with truncated
    identity factors.
    """
    t = np.asarray(tensor, dtype=float)
    if t.ndim != 3:
        raise ValueError(f"expected a 3-way tensor, got ndim={t.ndim}")
    dims = t.shape
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != 3 or any(r < 1 or r > d for r, d in zip(ranks, dims)):
        raise ValueError(f"ranks {ranks} out of range for dims {dims}")

    norm_t = np.linalg.norm(t)
    if norm_t == 0.0:
        factors = [np.eye(d)[:, :r] for d, r in zip(dims, ranks)]
        return TuckerFactors(*factors, core=np.zeros(ranks), fit_history=(1.0,))

    factors = [_leading_singular_vectors(unfold(t, k), ranks[k - 1]) for k in (1, 2, 3)]
    fits = []
    prev_fit = -np.inf
    for _ in range(max_iters):
        for k in (1, 2, 3):
            y = t
            for m in (1, 2, 3):
                if m != k:
                    y = mode_product(y, factors[m - 1].T, m)
            factors[k - 1] = _leading_singular_vectors(unfold(y, k), ranks[k - 1])
        core = t
        for m in (1, 2, 3):
            core = mode_product(core, factors[m - 1].T, m)
        # with orthonormal factors, ||t - t_hat||^2 = ||t||^2 - ||core||^2
        err_sq = max(norm_t**2 - np.linalg.norm(core) ** 2, 0.0)
        fit = 1.0 - np.sqrt(err_sq) / norm_t
        fits.append(fit)
        if fit - prev_fit < tol:
            break
        prev_fit = fit
    return TuckerFactors(*factors, core=core, fit_history=tuple(fits))


@dataclass(frozen=True)
class ComponentStack:
    """Angular decomposition components of one view stack.

    ``components[:, :, j]`` is the j-th component, ordered by descending
    energy (squared Frobenius norm, in ``energies``); ``angular_factor``
    holds the matching view-axis factor columns, each sign-fixed to a
    nonnegative entry sum so the leading component acts like a weighted
    view average.
    """

    components: np.ndarray
    energies: np.ndarray
    angular_factor: np.ndarray

    @property
    def energy_fractions(self):
        total = self.energies.sum()
        if total == 0.0:
            return np.zeros_like(self.energies)
        return self.energies / total


def _order_and_sign(components, angular_factor):
    energies = np.sum(components**2, axis=(0, 1))
    order = np.argsort(-energies, kind="stable")
    components = components[:, :, order]
    angular_factor = angular_factor[:, order]
    flip = angular_factor.sum(axis=0) < 0
    angular_factor = np.where(flip[None, :], -angular_factor, angular_factor)
    components = np.where(flip[None, None, :], -components, components)
    return ComponentStack(
        components=components,
        energies=energies[order],
        angular_factor=angular_factor,
    )


def angular_components(stack, method="fast") -> ComponentStack:
    """Full-rank angular decomposition of a view stack.

    The fast path projects the stack onto the eigenvectors of the V x V
    view Gram matrix; at full rank with orthonormal factors this equals
    expanding the Tucker core over both spatial modes (the "general"
    method, kept for cross-checking) to numerical precision.
    """
    data = np.asarray(getattr(stack, "data", stack), dtype=float)
    if data.ndim != 3:
        raise ValueError(f"expected an (X, Y, V) stack, got ndim={data.ndim}")
    nx, ny, nv = data.shape
    if method == "fast":
        flat = data.reshape(nx * ny, nv)
        gram = flat.T @ flat
        _, vecs = np.linalg.eigh(gram)
        vecs = vecs[:, ::-1]
        components = (flat @ vecs).reshape(nx, ny, nv)
        return _order_and_sign(components, vecs)
    if method == "general":
        factors = tucker_als(data, data.shape)
        comps = mode_product(mode_product(factors.core, factors.u1, 1), factors.u2, 2)
        return _order_and_sign(comps, factors.u3)
    raise ValueError(f"unknown method {method!r}")


def first_principal_component(stack):
    """Highest-energy angular component; for V=1 this is the view itself."""
    return angular_components(stack).components[:, :, 0]
