"""Independent brute-force evaluators used as test oracles.

These deliberately avoid the library's vectorized code paths: plain loops,
stable argsort for neighbor search, and numpy's eigensolver instead of the
closed-form 3x3 routine.
"""

import numpy as np


def brute_knn(positions, k):
    """All-pairs k nearest neighbors, ties resolved to the lower index."""
    pts = np.asarray(positions, dtype=np.float64)
    n = len(pts)
    m = min(k, n - 1)
    out = np.empty((n, m), dtype=np.int64)
    for i in range(n):
        d2 = ((pts - pts[i]) ** 2).sum(axis=1)
        order = np.argsort(d2, kind="stable")
        order = order[order != i]
        out[i] = order[:m]
    return out


def brute_region_entropy(probs, regions):
    """Region means of per-point Shannon entropy by explicit loops."""
    probs = np.asarray(probs, dtype=np.float64)
    out = []
    for pts in regions:
        total = 0.0
        for i in pts:
            h = 0.0
            for p in probs[i]:
                if p > 0.0:
                    h -= p * np.log(p)
            total += h
        out.append(total / len(pts))
    return np.asarray(out)


def brute_region_color(positions, colors, regions, k):
    """Double-sum color discontinuity: 1/(k*|R|) sum_i sum_j |I_i - I_j|_1."""
    colors = np.asarray(colors, dtype=np.float64)
    nn = brute_knn(positions, k)
    kk = nn.shape[1]
    out = []
    for pts in regions:
        total = 0.0
        for i in pts:
            for j in nn[i]:
                total += np.abs(colors[i] - colors[j]).sum()
        out.append(total / (kk * len(pts)))
    return np.asarray(out)


def brute_surface_variation(positions, k):
    """Per-point eigenvalue ratio via numpy's symmetric eigensolver."""
    pts = np.asarray(positions, dtype=np.float64)
    nn = brute_knn(positions, k)
    out = np.zeros(len(pts))
    for i in range(len(pts)):
        patch = np.vstack([pts[i][None, :], pts[nn[i]]])
        centered = patch - patch.mean(axis=0)
        cov = centered.T @ centered / patch.shape[0]
        lam = np.linalg.eigvalsh(cov)
        lam = np.maximum(lam, 0.0)
        total = lam.sum()
        if total >= 1e-12:
            out[i] = lam[0] / total
    return out


def brute_region_struct(positions, regions, k):
    sv = brute_surface_variation(positions, k)
    return np.asarray([sv[pts].mean() for pts in regions])


def naive_penalize(phi, labels, eta):
    """Occurrence-count penalization: the j-th appearance of a cluster in
    rank order is scaled by a weight built from j successive multiplications
    by eta (bitwise-identical accumulation to the single-pass algorithm)."""
    phi = np.asarray(phi, dtype=np.float64)
    labels = list(labels)
    out = np.empty_like(phi)
    for i in range(len(phi)):
        occurrences = 0
        for j in range(i):
            if labels[j] == labels[i]:
                occurrences += 1
        w = 1.0
        for _ in range(occurrences):
            w *= eta
        out[i] = phi[i] * w
    return out


def exhaustive_two_partition(points):
    """Optimal 2-cluster assignment by trying every bipartition (n <= 12)."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    best_cost = np.inf
    best_mask = None
    for bits in range(1, 2 ** n - 1):
        mask = np.asarray([(bits >> i) & 1 for i in range(n)], dtype=bool)
        cost = 0.0
        for part in (mask, ~mask):
            centroid = pts[part].mean(axis=0)
            cost += ((pts[part] - centroid) ** 2).sum()
        if cost < best_cost:
            best_cost = cost
            best_mask = mask
    return best_mask, best_cost


_OCTAHEDRAL_ROTATIONS = None


def octahedral_rotations():
    """The 24 rotation matrices of the cube (signed permutations, det +1)."""
    global _OCTAHEDRAL_ROTATIONS
    if _OCTAHEDRAL_ROTATIONS is None:
        import itertools
        mats = []
        for perm in itertools.permutations(range(3)):
            for signs in itertools.product([1, -1], repeat=3):
                m = np.zeros((3, 3))
                for r, (c, s) in enumerate(zip(perm, signs)):
                    m[r, c] = s
                if np.linalg.det(m) > 0.5:
                    mats.append(m)
        _OCTAHEDRAL_ROTATIONS = mats
    return _OCTAHEDRAL_ROTATIONS


def isotropic_gaussian_blob(seed, n_samples=100):
    """Gaussian blob symmetrized to exactly isotropic empirical moments.

    Each sample is replicated under the octahedral rotation group, whose
    orbit average of x x^T is (|x|^2 / 3) I exactly, so the center point's
    neighborhood covariance is isotropic up to the partially included
    boundary orbit.  Point 0 is the center.
    """
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(n_samples, 3))
    pts = np.concatenate([base @ m.T for m in octahedral_rotations()], axis=0)
    return np.vstack([np.zeros(3), pts])


def confusion_iou(confusion):
    """Per-class IoU from an explicit confusion matrix (rows = truth)."""
    confusion = np.asarray(confusion, dtype=np.float64)
    n = confusion.shape[0]
    ious = []
    for c in range(n):
        tp = confusion[c, c]
        fp = confusion[:, c].sum() - tp
        fn = confusion[c, :].sum() - tp
        denom = tp + fp + fn
        ious.append(np.nan if denom == 0 else tp / denom)
    return np.asarray(ious)
