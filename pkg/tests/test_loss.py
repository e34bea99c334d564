import numpy as np
import pytest

from ellipose.conic import BBox, Ellipse, ellipse_iou
from ellipose.loss import (CropFrame, EmbeddingVariant, SamplingGrid,
                           denormalize_from_crop, embed,
                           fit_by_gradient_descent, loss, loss_gradient,
                           loss_gradient_fd, normalize_to_crop)

GRID = SamplingGrid()


def random_unit_ellipse(rng, min_axis=0.05):
    beta = rng.uniform(min_axis, 0.3)
    alpha = min(beta * rng.uniform(1.0, 3.0), 0.45)
    return Ellipse(rng.uniform(0.25, 0.75, 2), [max(alpha, beta), min(alpha, beta)],
                   rng.uniform(-np.pi / 2, np.pi / 2))


def test_grid_points_inside_domain():
    pts = GRID.points()
    assert pts.shape == (625, 2)
    assert (pts > 0.0).all() and (pts < 1.0).all()
    # regular spacing
    xs = np.unique(pts[:, 0])
    assert np.allclose(np.diff(xs), 1.0 / 25)


def test_embed_center_zero_and_boundary():
    circle = Ellipse([0.0, 0.0], [1.0, 1.0], 0.0)
    assert embed(circle, [0.0, 0.0], EmbeddingVariant.LINEAR) == 0.0
    for p in ([1.0, 0.0], [0.0, 1.0], [np.sqrt(0.5), np.sqrt(0.5)]):
        assert abs(embed(circle, p, EmbeddingVariant.INVERSE_SQUARE) - 1.0) < 1e-12


def test_embed_direct_matrix_value():
    e = Ellipse([0.0, 0.0], [2.0, 1.0], 0.0)
    assert abs(embed(e, [1.0, 0.0], EmbeddingVariant.LINEAR) - 2.0) < 1e-12


def test_embed_radially_increasing():
    rng = np.random.default_rng(0)
    for variant in EmbeddingVariant:
        e = random_unit_ellipse(rng)
        direction = rng.normal(size=2)
        direction /= np.linalg.norm(direction)
        radii = np.linspace(0.01, 0.5, 20)
        vals = [embed(e, e.center + r * direction, variant) for r in radii]
        assert all(a < b for a, b in zip(vals, vals[1:]))


def test_loss_zero_iff_equal_fields():
    rng = np.random.default_rng(1)
    for variant in EmbeddingVariant:
        e = random_unit_ellipse(rng)
        assert loss(e, e, GRID, variant) == 0.0
        other = random_unit_ellipse(rng)
        assert loss(e, other, GRID, variant) > 0.0


def test_loss_symmetric_nonnegative():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a, b = random_unit_ellipse(rng), random_unit_ellipse(rng)
        la, lb = loss(a, b, GRID), loss(b, a, GRID)
        assert la >= 0.0
        assert abs(la - lb) < 1e-12 * max(1.0, la)


def test_circle_angle_irrelevant():
    a = Ellipse([0.5, 0.5], [0.2, 0.2], 0.9)
    b = Ellipse([0.5, 0.5], [0.2, 0.2], -1.2)
    assert loss(a, b, GRID) == 0.0


def test_angular_wraparound_cheap():
    dense = SamplingGrid(rows=500, cols=500)
    axes = [0.3, 0.1]
    near_pos = Ellipse([0.5, 0.5], axes, np.pi / 2 - 0.01)
    near_neg = Ellipse([0.5, 0.5], axes, -np.pi / 2 + 0.01)
    flat = Ellipse([0.5, 0.5], axes, 0.0)
    wrap = loss(near_pos, near_neg, dense)
    quarter = loss(near_pos, flat, dense)
    assert wrap < 1e-2 * quarter


def test_grid_refinement_convergence():
    rng = np.random.default_rng(3)
    dense = SamplingGrid(rows=500, cols=500)
    for _ in range(20):
        a = random_unit_ellipse(rng, min_axis=0.18)
        b = random_unit_ellipse(rng, min_axis=0.18)
        coarse_val = loss(a, b, GRID) * GRID.cell_area
        dense_val = loss(a, b, dense) * dense.cell_area
        assert abs(coarse_val - dense_val) <= 0.05 * dense_val


def test_gradient_zero_at_minimum():
    rng = np.random.default_rng(4)
    e = random_unit_ellipse(rng)
    _, g = loss_gradient(e, e, GRID)
    assert np.abs(g).max() == 0.0


def test_gradient_matches_finite_differences_all_variants():
    rng = np.random.default_rng(5)
    for variant in EmbeddingVariant:
        for _ in range(100):
            pred = random_unit_ellipse(rng)
            gt = random_unit_ellipse(rng)
            _, g = loss_gradient(pred, gt, GRID, variant)
            g_fd = loss_gradient_fd(pred, gt, GRID, variant)
            rel = np.linalg.norm(g - g_fd) / max(np.linalg.norm(g_fd), 1e-9)
            assert rel < 1e-5, (variant, rel)


def test_gradient_circle_gt_theta_term():
    # gt with alpha == beta: prediction theta gradient still finite-diff exact
    rng = np.random.default_rng(6)
    gt = Ellipse([0.5, 0.5], [0.2, 0.2], 0.0)
    pred = random_unit_ellipse(rng)
    _, g = loss_gradient(pred, gt, GRID)
    g_fd = loss_gradient_fd(pred, gt, GRID)
    assert np.linalg.norm(g - g_fd) / max(np.linalg.norm(g_fd), 1e-9) < 1e-5


def test_inverse_square_gradient_blowup():
    # d(1/a^2)/da = -2/a^3: shrinking the axes inflates the gradient ~ a^-3
    gt = Ellipse([0.5, 0.5], [0.3, 0.25], 0.0)
    mags = []
    for a in (0.2, 0.02, 0.002):
        pred = Ellipse([0.5, 0.5], [a, a * 0.8], 0.0)
        _, g = loss_gradient(pred, gt, GRID, EmbeddingVariant.INVERSE_SQUARE)
        mags.append(abs(g[2]))
    assert mags[1] > 1e2 * mags[0]
    assert mags[2] > 1e2 * mags[1]


def test_variant_ranking_linear_beats_inverse_square():
    rng = np.random.default_rng(7)
    wins = {EmbeddingVariant.LINEAR: 0, EmbeddingVariant.INVERSE_SQUARE: 0}
    trials = 40
    for _ in range(trials):
        target = random_unit_ellipse(rng, min_axis=0.08)
        init = random_unit_ellipse(rng, min_axis=0.08)
        for variant in wins:
            fitted = fit_by_gradient_descent(init, target, GRID, variant)
            if ellipse_iou(fitted, target) > 0.8:
                wins[variant] += 1
    assert wins[EmbeddingVariant.LINEAR] > wins[EmbeddingVariant.INVERSE_SQUARE]
    assert wins[EmbeddingVariant.LINEAR] >= int(0.3 * trials)  # non-trivial rate


def test_normalize_to_crop():
    frame = CropFrame(BBox([0.0, 0.0], [256.0, 256.0]))
    e = Ellipse([128.0, 64.0], [64.0, 32.0], 0.4)
    n = normalize_to_crop(e, frame)
    assert np.allclose(n.center, [0.5, 0.25])
    assert np.allclose(n.semi_axes, [0.25, 0.125])
    assert n.theta == e.theta

    frame = CropFrame(BBox([100.0, 100.0], [356.0, 356.0]))
    e = Ellipse([228.0, 228.0], [50.0, 25.0], -0.3)
    n = normalize_to_crop(e, frame)
    assert np.allclose(n.center, [0.5, 0.5])


def test_crop_round_trip_exact():
    rng = np.random.default_rng(8)
    for _ in range(200):
        corner = rng.uniform(0, 500, 2)
        side = rng.uniform(50, 400)
        frame = CropFrame(BBox(corner, corner + side))
        e = Ellipse(corner + rng.uniform(0.2, 0.8, 2) * side,
                    np.sort(rng.uniform(5, side / 3, 2))[::-1],
                    rng.uniform(-np.pi / 2, np.pi / 2))
        back = denormalize_from_crop(normalize_to_crop(e, frame), frame)
        assert np.abs(back.center - e.center).max() < 1e-12 * max(1.0, side)
        assert np.abs(back.semi_axes - e.semi_axes).max() < 1e-12 * side
        assert back.theta == e.theta


def test_crop_frame_requires_square():
    with pytest.raises(ValueError):
        CropFrame(BBox([0.0, 0.0], [100.0, 50.0]))
