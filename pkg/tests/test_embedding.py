import numpy as np
import pytest

from covar.embedding import (EmbeddingError, diffusion_maps, embed, fix_signs, neighbor_bandwidth,
                             pairwise_sq_dists, pca, transition_matrix)
from covar.evaluate import circular_correlation, recovered_angle
from covar.numeric import RngStream


def circle(n=64):
    theta = 2 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(theta), np.sin(theta)]), theta


def test_pca_rank_one_line():
    t = RngStream(0).gaussian(40)
    pts = np.outer(t, [1.0, -2.0, 0.5]) + [3.0, 1.0, -1.0]
    res = pca(pts, 3)
    assert res.eigenvalues[0] > 0
    assert np.all(res.eigenvalues[1:] <= 1e-12)


def test_pca_centred_and_full_rank_reconstruction():
    x = RngStream(1).gaussian((50, 5)) @ RngStream(2).gaussian((5, 5))
    res = pca(x, 5)
    assert np.abs(res.coordinates.mean(axis=0)).max() <= 1e-12
    centred = x - x.mean(axis=0)
    # coordinates are projections on an orthonormal basis: solve back for it
    basis = np.linalg.lstsq(res.coordinates, centred, rcond=None)[0]
    np.testing.assert_allclose(res.coordinates @ basis, centred, atol=1e-9)
    assert np.all(np.diff(res.eigenvalues) <= 0)
    np.testing.assert_allclose(res.eigenvalues, np.sort(np.linalg.eigvalsh(np.cov(x.T)))[::-1], rtol=1e-10)


def test_pca_k_range():
    with pytest.raises(EmbeddingError):
        pca(np.zeros((5, 2)), 3)
    with pytest.raises(EmbeddingError):
        pca(np.zeros((1, 2)), 1)


def test_transition_rows_sum_to_one():
    pts = RngStream(3).gaussian((30, 4))
    p, w, deg, eps = transition_matrix(pts)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert eps > 0


def test_top_eigenvalue_is_one_with_constant_vector():
    pts = RngStream(4).gaussian((25, 3))
    p, *_ = transition_matrix(pts)
    vals, vecs = np.linalg.eig(p)
    top = np.argmax(vals.real)
    assert abs(vals[top] - 1.0) < 1e-12
    v = vecs[:, top].real
    np.testing.assert_allclose(v / v[0], 1.0, atol=1e-10)


def test_symmetric_conjugate_spectrum_in_unit_interval():
    pts = RngStream(5).gaussian((40, 3))
    _, w, deg, _ = transition_matrix(pts)
    sym = w / np.sqrt(np.outer(deg, deg))
    vals = np.linalg.eigvalsh(sym)
    assert vals.min() >= -1 - 1e-9 and vals.max() <= 1 + 1e-9


def test_nearly_identical_points_have_vanishing_spectrum():
    # at a bandwidth far above the spread every kernel entry is ~1
    pts = np.ones((3, 2)) + 1e-12 * RngStream(6).gaussian((3, 2))
    res = diffusion_maps(pts, 2, bandwidth=1.0)
    assert np.all(np.abs(res.eigenvalues) <= 1e-6)


def test_identical_points_rejected():
    with pytest.raises(EmbeddingError):
        diffusion_maps(np.ones((5, 2)), 2)


def test_diffusion_argument_checks():
    with pytest.raises(EmbeddingError):
        diffusion_maps(np.zeros((2, 2)), 1)
    with pytest.raises(EmbeddingError):
        diffusion_maps(RngStream(0).gaussian((5, 2)), 5)
    with pytest.raises(EmbeddingError):
        embed(np.zeros((5, 2)), "tsne", 2)


def dense_oracle_coordinates(points, k):
    """Diffusion coordinates from a general eigensolver on the explicit P."""
    p, *_ = transition_matrix(points)
    vals, vecs = np.linalg.eig(p)
    order = np.argsort(-vals.real)[1:k + 1]
    return vecs[:, order].real * vals[order].real


def test_circle_recovers_angle_against_dense_oracle():
    pts, theta = circle(64)
    res = diffusion_maps(pts, 2)
    ours = recovered_angle(res.coordinates)
    oracle = recovered_angle(dense_oracle_coordinates(pts, 2))
    assert circular_correlation(ours, oracle) >= 0.99
    assert circular_correlation(ours, theta) >= 0.99
    assert res.eigenvalues[0] >= res.eigenvalues[1]


def test_diffusion_eigenvalues_match_oracle():
    pts = RngStream(7).gaussian((30, 3))
    res = diffusion_maps(pts, 4)
    p, *_ = transition_matrix(pts)
    vals = np.sort(np.linalg.eigvals(p).real)[::-1]
    np.testing.assert_allclose(res.eigenvalues, vals[1:5], atol=1e-10)


def test_diffusion_permutation_equivariance():
    pts = RngStream(8).gaussian((30, 3))
    perm = RngStream(9).permutation(30)
    base = diffusion_maps(pts, 2).coordinates
    moved = diffusion_maps(pts[perm], 2).coordinates
    back = np.empty_like(moved)
    back[perm] = moved
    for j in range(2):
        col, ref = back[:, j], base[:, j]
        assert min(np.abs(col - ref).max(), np.abs(col + ref).max()) < 1e-9


def test_fix_signs_makes_largest_entry_positive():
    v = np.array([[0.1, -3.0], [-2.0, 1.0]])
    out = fix_signs(v)
    np.testing.assert_array_equal(out, [[-0.1, 3.0], [2.0, -1.0]])


def test_embed_dispatch():
    pts = RngStream(10).gaussian((20, 3))
    assert embed(pts, "pca", 2).method == "pca"
    res = embed(pts, "diffusion", 2, bandwidth=1.5)
    assert res.method == "diffusion" and res.bandwidth == 1.5
    assert res.coordinates.shape == (20, 2)


def test_neighbor_bandwidth_matches_brute_force():
    pts = RngStream(11).gaussian((25, 3))
    d2 = pairwise_sq_dists(pts)
    for k in (1, 4, 24):
        kth = [sorted(np.sum((pts - p) ** 2, axis=1))[k] for p in pts]
        assert abs(neighbor_bandwidth(d2, k) - np.median(kth)) < 1e-10
    with pytest.raises(EmbeddingError):
        neighbor_bandwidth(d2, 25)


def test_bandwidth_precedence():
    pts = RngStream(12).gaussian((30, 2))
    d2 = pairwise_sq_dists(pts)
    assert transition_matrix(pts, neighbors=5)[3] == neighbor_bandwidth(d2, 5)
    assert transition_matrix(pts, bandwidth=0.7, neighbors=5)[3] == 0.7
    assert embed(pts, "diffusion", 2, neighbors=5).bandwidth == neighbor_bandwidth(d2, 5)


def test_neighbor_scale_follows_a_nearly_self_crossing_loop():
    # figure-eight lifted slightly out of the plane: the loop never crosses,
    # but at the median scale the two lobes merge at the waist
    theta = 2 * np.pi * np.arange(400) / 400
    pts = np.column_stack([np.sin(theta), np.sin(2 * theta), 0.2 * np.cos(theta)])
    wide = recovered_angle(diffusion_maps(pts, 2).coordinates)
    local = recovered_angle(diffusion_maps(pts, 2, neighbors=10).coordinates)
    assert circular_correlation(wide, theta) < 0.6
    assert circular_correlation(local, theta) >= 0.95
