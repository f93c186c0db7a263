"""Spatial-quality statistics of angular principal components.

Four ingredients, computed on the first principal component of each
oriented view stack and concatenated into a 38-value block:

* MSCN coefficients: local mean-subtracted, contrast-normalized residuals
  whose distribution indexes naturalness.
* An asymmetric generalized Gaussian (AGGD) fit to the MSCN coefficients
  of each channel (shape, left/right scales, and the mean offset eta).
* A multivariate generalized Gaussian (MGGD) fit to the joint per-pixel
  MSCN triples of the three channels (shape, scale, scatter coupling).
* Block-DCT AC entropies: whole-block plus three radial frequency bands
  and three angular sectors, averaged over 8x8 blocks.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.ndimage
from scipy.special import gamma as gamma_fn
from scipy.special import gammaln

log = logging.getLogger(__name__)

MSCN_HALFSIZE = 3
MSCN_SIGMA = 7.0 / 6.0  # 7x7 support spans +/- 3 standard deviations

DCT_BLOCK = 8

_ALPHA_GRID = np.arange(0.2, 10.0 + 1e-9, 0.001)
# r(alpha) = gamma(2/a)^2 / (gamma(1/a) gamma(3/a)); increasing in alpha
_RATIO_GRID = gamma_fn(2.0 / _ALPHA_GRID) ** 2 / (
    gamma_fn(1.0 / _ALPHA_GRID) * gamma_fn(3.0 / _ALPHA_GRID)
)


@dataclass(frozen=True)
class MscnField:
    coeffs: np.ndarray
    window_halfsize: tuple[int, int] = (MSCN_HALFSIZE, MSCN_HALFSIZE)
    window_sigma: float = MSCN_SIGMA


@dataclass(frozen=True)
class AggdParams:
    """Zero-mode asymmetric generalized Gaussian fit.

    ``eta`` is the distribution-mean statistic (beta_r - beta_l) *
    gamma(2/alpha) / gamma(1/alpha), recomputable from the other fields.
    """

    alpha: float
    sigma_l: float
    sigma_r: float
    eta: float


@dataclass(frozen=True)
class MggdParams:
    """Elliptical multivariate generalized Gaussian fit.

    ``scatter`` is symmetric positive definite and trace-normalized to the
    dimension; ``regularized`` marks a singular sample covariance that
    needed a ridge, ``converged`` is False when the fixed-point iteration
    hit its cap.
    """

    scatter: np.ndarray
    gamma: float
    phi: float
    n_dim: int
    regularized: bool = False
    converged: bool = True


@dataclass(frozen=True)
class DctEntropyFeatures:
    whole: float
    bands: np.ndarray
    orients: np.ndarray

    @property
    def values(self):
        return np.concatenate([[self.whole], self.bands, self.orients])


def _gaussian_window(halfsize, sigma):
    ax = np.arange(-halfsize, halfsize + 1, dtype=float)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma**2))
    return g / g.sum()


_MSCN_WINDOW = _gaussian_window(MSCN_HALFSIZE, MSCN_SIGMA)


def mscn(image) -> MscnField:
    """Mean-subtracted contrast-normalized coefficients.

    Local mean and standard deviation come from a 7x7 circular Gaussian
    window (unit volume) with symmetric border reflection; the
    denominator carries a +1 stabilizer, so constant images map to zero
    and the statistic is insensitive to smooth intensity rescaling only
    when local contrast is large against that stabilizer.
    """
    img = np.asarray(image, dtype=float)
    size = 2 * MSCN_HALFSIZE + 1
    if img.ndim != 2 or img.shape[0] < size or img.shape[1] < size:
        raise ValueError(f"image must be 2D and at least {size}x{size}, got {img.shape}")
    mu = scipy.ndimage.correlate(img, _MSCN_WINDOW, mode="reflect")
    ex2 = scipy.ndimage.correlate(img * img, _MSCN_WINDOW, mode="reflect")
    sigma = np.sqrt(np.maximum(ex2 - mu * mu, 0.0))
    coeffs = (img - mu) / (sigma + 1.0)
    mean = coeffs.mean()
    if not -0.5 <= mean <= 0.5:
        log.warning("MSCN coefficient mean %.3f outside [-0.5, 0.5]", mean)
    return MscnField(coeffs=coeffs)


def _invert_ggd_ratio(rhat):
    idx = np.searchsorted(_RATIO_GRID, rhat)
    if idx <= 0:
        return float(_ALPHA_GRID[0])
    if idx >= _RATIO_GRID.size:
        return float(_ALPHA_GRID[-1])
    if rhat - _RATIO_GRID[idx - 1] <= _RATIO_GRID[idx] - rhat:
        idx -= 1
    return float(_ALPHA_GRID[idx])


def fit_aggd(samples) -> AggdParams:
    """Moment-matching AGGD fit.

    The shape comes from inverting the generalized Gaussian moment ratio
    over a precomputed grid (alpha in [0.2, 10], step 1e-3); scales are
    the one-sided root mean squares. Degenerate input falls back to the
    grid edge with zero scales: all-zero samples give (0.2, 0, 0, 0), a
    one-sided sample keeps the empty side's scale at 0.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise ValueError(f"need at least 100 samples, got {x.size}")
    left = x[x < 0]
    right = x[x > 0]
    sigma_l = float(np.sqrt(np.mean(left * left))) if left.size else 0.0
    sigma_r = float(np.sqrt(np.mean(right * right))) if right.size else 0.0
    hi = max(sigma_l, sigma_r)
    if hi == 0.0:
        return AggdParams(alpha=float(_ALPHA_GRID[0]), sigma_l=0.0, sigma_r=0.0, eta=0.0)
    # the asymmetry correction is invariant under swapping sides; using
    # the canonical ratio makes fitting -x flip the fit exactly
    ratio = min(sigma_l, sigma_r) / hi
    m_abs = np.mean(np.abs(x))
    m_sq = np.mean(x * x)
    rhat = (m_abs * m_abs / m_sq) * (ratio**3 + 1.0) * (ratio + 1.0) / (ratio**2 + 1.0) ** 2
    alpha = _invert_ggd_ratio(rhat)
    beta_scale = np.sqrt(gamma_fn(1.0 / alpha) / gamma_fn(3.0 / alpha))
    eta = (sigma_r - sigma_l) * beta_scale * (gamma_fn(2.0 / alpha) / gamma_fn(1.0 / alpha))
    return AggdParams(alpha=alpha, sigma_l=sigma_l, sigma_r=sigma_r, eta=float(eta))


def _mggd_quadform(x, scatter):
    w = np.linalg.solve(scatter, x.T).T
    return np.einsum("ij,ij->i", x, w)


def _mggd_profile_nll(phi, u, n_dim):
    # negative profile log-likelihood per sample, phi-dependent terms only
    a = n_dim / (2.0 * phi)
    s = np.mean(u**phi)
    return -(np.log(phi) - a * np.log(2.0) - gammaln(a) - a * np.log(phi * s / n_dim) - a)


def _estimate_shape(u, n_dim, bounds=(0.1, 5.0)):
    # coarse log-spaced scan, then golden-section refinement; rescaling u
    # shifts the profile likelihood by a constant, so normalize to keep
    # u**phi well inside the float range
    u = u / u.mean()
    grid = np.geomspace(bounds[0], bounds[1], 25)
    values = [_mggd_profile_nll(p, u, n_dim) for p in grid]
    best = int(np.argmin(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc = _mggd_profile_nll(c, u, n_dim)
    fd = _mggd_profile_nll(d, u, n_dim)
    for _ in range(18):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = _mggd_profile_nll(c, u, n_dim)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = _mggd_profile_nll(d, u, n_dim)
    return float((lo + hi) / 2.0)


def fit_mggd(vectors, tol=1e-6, max_iters=100, shape_bounds=(0.1, 5.0)) -> MggdParams:
    """Fit scatter, scale and shape of a zero-mean MGGD.

    Alternates the maximum-likelihood fixed-point update of the
    trace-normalized scatter with a profile-likelihood search for the
    shape, then recovers the scale from the second moment of the
    quadratic form. Exact-zero vectors are dropped (they carry no
    direction and are poles of the weight for shapes below 1). A singular
    sample covariance gets a 1e-8 ridge and is flagged; hitting the
    iteration cap flags ``converged=False``.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected (n, N) vectors, got shape {x.shape}")
    n_dim = x.shape[1]
    if x.shape[0] < 10 * n_dim * n_dim:
        raise ValueError(f"need at least {10 * n_dim * n_dim} vectors, got {x.shape[0]}")
    x = x[np.any(x != 0.0, axis=1)]
    if x.shape[0] < 10 * n_dim * n_dim:
        return MggdParams(
            scatter=np.eye(n_dim), gamma=0.0, phi=1.0, n_dim=n_dim,
            regularized=True, converged=True,
        )

    cov = x.T @ x / x.shape[0]
    regularized = False
    eigvals = np.linalg.eigvalsh(cov)
    if eigvals[0] <= 1e-12 * max(eigvals[-1], 1.0):
        cov = cov + 1e-8 * np.eye(n_dim)
        regularized = True
        log.warning("singular sample covariance; adding 1e-8 ridge")

    scatter = n_dim * cov / np.trace(cov)
    phi = 1.0
    iters = 0
    converged = False
    while iters < max_iters:
        delta = np.inf
        while iters < max_iters:
            u = np.maximum(_mggd_quadform(x, scatter), 1e-300)
            weights = u ** (phi - 1.0)
            nxt = (x * weights[:, None]).T @ x
            nxt = (nxt + nxt.T) / 2.0
            if regularized:
                # degenerate samples collapse the update back to singular
                nxt += 1e-8 * np.trace(nxt) * np.eye(n_dim)
            nxt *= n_dim / np.trace(nxt)
            delta = np.linalg.norm(nxt - scatter)
            scatter = nxt
            iters += 1
            if delta < tol:
                break
        u = np.maximum(_mggd_quadform(x, scatter), 1e-300)
        new_phi = _estimate_shape(u, n_dim, shape_bounds)
        shape_moved = abs(new_phi - phi) > 1e-3
        phi = new_phi
        if delta < tol and not shape_moved:
            converged = True
            break
    if not converged:
        log.warning("MGGD fixed point did not converge within %d iterations", max_iters)
    scale = np.mean(u) / (
        2.0 ** (1.0 / phi)
        * np.exp(gammaln((n_dim + 2.0) / (2.0 * phi)) - gammaln(n_dim / (2.0 * phi)))
    )
    return MggdParams(
        scatter=scatter, gamma=float(scale), phi=phi, n_dim=n_dim,
        regularized=regularized, converged=converged,
    )


def _dct_partitions(block):
    """AC index masks: 3 radial bands and 3 angular sectors, 21 cells each."""
    rows, cols = np.indices((block, block))
    ac = ~((rows == 0) & (cols == 0))
    positions = np.argwhere(ac)
    radius = np.hypot(positions[:, 0], positions[:, 1])
    angle = np.arctan2(positions[:, 0], positions[:, 1])
    count = positions.shape[0]
    edges = [0, count // 3, 2 * count // 3, count]
    bands, orients = [], []
    by_radius = np.lexsort((positions[:, 1], positions[:, 0], radius))
    by_angle = np.lexsort((positions[:, 1], positions[:, 0], angle))
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = np.zeros((block, block), dtype=bool)
        for r, c in positions[by_radius[lo:hi]]:
            m[r, c] = True
        bands.append(m)
        m = np.zeros((block, block), dtype=bool)
        for r, c in positions[by_angle[lo:hi]]:
            m[r, c] = True
        orients.append(m)
    return ac, bands, orients


_DCT_AC, _DCT_BANDS, _DCT_ORIENTS = _dct_partitions(DCT_BLOCK)


def _masked_entropy(p, mask):
    # entropy of the AC magnitude distribution restricted to the mask,
    # renormalized within it; zero-mass blocks contribute 0
    q = p[:, mask.ravel()[_DCT_AC.ravel()]]
    total = q.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        qn = np.where(total > 0, q / total, 0.0)
        terms = np.where(qn > 0, qn * np.log(qn), 0.0)
    return -terms.sum(axis=1)


def dct_entropy(image, block=DCT_BLOCK) -> DctEntropyFeatures:
    """Average per-block entropy of normalized DCT AC magnitudes.

    The image is tiled into non-overlapping ``block`` x ``block`` cells
    (orthonormal type-II DCT, remainder rows/columns dropped); each
    block's 63 AC magnitudes are normalized to a distribution whose
    entropy is taken whole and restricted to the precomputed radial and
    angular partitions. Blocks with no AC energy contribute 0.
    """
    if block != DCT_BLOCK:
        raise ValueError("block size is fixed to 8")
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.shape[0] < block or img.shape[1] < block:
        raise ValueError(f"image must be 2D and at least {block}x{block}, got {img.shape}")
    nbx = img.shape[0] // block
    nby = img.shape[1] // block
    tiles = img[: nbx * block, : nby * block]
    tiles = tiles.reshape(nbx, block, nby, block).transpose(0, 2, 1, 3).reshape(-1, block, block)
    coeffs = scipy.fft.dctn(tiles, axes=(1, 2), norm="ortho")
    mags = np.abs(coeffs.reshape(-1, block * block)[:, _DCT_AC.ravel()])
    whole = _masked_entropy(mags, _DCT_AC)
    bands = np.stack([_masked_entropy(mags, m) for m in _DCT_BANDS], axis=1)
    orients = np.stack([_masked_entropy(mags, m) for m in _DCT_ORIENTS], axis=1)
    return DctEntropyFeatures(
        whole=float(whole.mean()),
        bands=bands.mean(axis=0),
        orients=orients.mean(axis=0),
    )


PCSC_SIZE = 38


def pcsc_features(pcs) -> np.ndarray:
    """38-value spatial block for one stack's three channel components.

    Layout: per channel [AGGD alpha, sigma_l, sigma_r, eta, DCT whole,
    3 bands, 3 sectors] (11 values), then the joint MGGD over per-pixel
    MSCN triples [phi, gamma, scatter 01, 02, 12] (5 values).
    """
    if len(pcs) != 3:
        raise ValueError("expected the principal components of 3 channels")
    shapes = {np.asarray(pc).shape for pc in pcs}
    if len(shapes) != 1:
        raise ValueError(f"channel components differ in size: {shapes}")
    fields = [mscn(pc).coeffs for pc in pcs]
    feats = []
    for pc, coeffs in zip(pcs, fields):
        ag = fit_aggd(coeffs.ravel())
        de = dct_entropy(pc)
        feats.extend([ag.alpha, ag.sigma_l, ag.sigma_r, ag.eta])
        feats.extend(de.values)
    triples = np.stack([f.ravel() for f in fields], axis=1)
    mg = fit_mggd(triples)
    feats.extend(
        [mg.phi, mg.gamma, mg.scatter[0, 1], mg.scatter[0, 2], mg.scatter[1, 2]]
    )
    out = np.asarray(feats, dtype=float)
    assert out.size == PCSC_SIZE
    return out
