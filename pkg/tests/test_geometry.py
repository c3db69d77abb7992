"""Isotropy, isometry, and relational-similarity contracts."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.stats import pearsonr

from synthetic import random_orthogonal, unit_rows
from synthetic import paired_anisotropic_spaces
from ctxmap.errors import ValidationError
from ctxmap.geometry import (
    geometry_report,
    isometry_defect,
    isotropy,
    relational_similarity,
)
from ctxmap.normalize import iterative_normalize, unit_normalize_rows

# ---------------------------------------------------------------------------
# isotropy
# ---------------------------------------------------------------------------


def test_isotropy_of_identical_rows_is_one():
    v = np.tile(np.array([[0.6, 0.8]]), (10, 1))
    assert isotropy(v, r=10) == pytest.approx(1.0, abs=1e-12)


def test_isotropy_of_orthonormal_basis_is_zero_exactly():
    assert isotropy(np.eye(16), r=16) == 0.0


def test_isotropy_matches_brute_force_pair_mean(rng):
    vectors = unit_rows(40, 8, rng)
    got = isotropy(vectors, r=40, seed=0)
    pair_cosines = [
        float(vectors[i] @ vectors[j])
        for i in range(40)
        for j in range(i + 1, 40)
    ]
    expected = math.fsum(pair_cosines) / len(pair_cosines)
    assert got == pytest.approx(expected, abs=1e-12)


def test_isotropy_subsample_is_seed_deterministic(rng):
    vectors = unit_rows(200, 8, rng)
    assert isotropy(vectors, r=50, seed=3) == isotropy(vectors, r=50, seed=3)
    assert isotropy(vectors, r=50, seed=3) != isotropy(vectors, r=50, seed=4)


def test_isotropy_rejects_oversized_sample(rng):
    vectors = unit_rows(10, 4, rng)
    with pytest.raises(ValidationError, match=r"r=11.*N=10"):
        isotropy(vectors, r=11)


def test_isotropy_rejects_unnormalized_rows():
    with pytest.raises(ValidationError, match="unit-normalized"):
        isotropy(np.array([[3.0, 4.0], [1.0, 0.0]]), r=2)


# ---------------------------------------------------------------------------
# isometry defect
# ---------------------------------------------------------------------------


def test_isometry_defect_of_identical_spaces_is_zero(rng):
    x = unit_rows(50, 8, rng)
    assert isometry_defect(x, x, r=50) == 0.0


def test_isometry_defect_invariant_under_orthogonal_map(rng):
    x = unit_rows(120, 16, rng)
    q = random_orthogonal(16, rng)
    assert isometry_defect(x, x @ q.T, r=120) <= 1e-9


def test_isometry_defect_dual_formula_oracle(rng):
    # mean |d_x - d_y| over pairs must equal mean 2|x_i.x_j - y_i.y_j|
    # for unit rows (squared distances vs Gram entries)
    for trial in range(50):
        n = 200
        x = unit_rows(n, 16, rng)
        y = unit_rows(n, 16, rng)
        got = isometry_defect(x, y, r=n, seed=trial)
        gx = x @ x.T
        gy = y @ y.T
        iu = np.triu_indices(n, k=1)
        expected = float(np.mean(2.0 * np.abs(gx[iu] - gy[iu])))
        assert got == pytest.approx(expected, abs=1e-9)


def test_isometry_defect_is_symmetric(rng):
    x = unit_rows(60, 8, rng)
    y = unit_rows(60, 8, rng)
    assert isometry_defect(x, y, r=60) == pytest.approx(
        isometry_defect(y, x, r=60), abs=1e-15
    )


def test_isometry_defect_rejects_misaligned_matrices(rng):
    with pytest.raises(ValidationError, match="equal row counts"):
        isometry_defect(unit_rows(5, 4, rng), unit_rows(6, 4, rng), r=5)


def test_isometry_defect_allows_different_dimensions(rng):
    x = unit_rows(30, 4, rng)
    y = unit_rows(30, 9, rng)
    assert isometry_defect(x, y, r=30) >= 0.0


# ---------------------------------------------------------------------------
# relational similarity
# ---------------------------------------------------------------------------


def test_relational_similarity_of_identity_is_one(rng):
    x = unit_rows(50, 8, rng)
    assert relational_similarity(x, x, pair_count=50) == pytest.approx(1.0, abs=1e-12)


def test_relational_similarity_invariant_under_rotation(rng):
    x = unit_rows(80, 12, rng)
    q = random_orthogonal(12, rng)
    rs = relational_similarity(x, x @ q.T, pair_count=80)
    assert rs == pytest.approx(1.0, abs=1e-9)


def test_relational_similarity_matches_pearson_oracle(rng):
    x = unit_rows(40, 6, rng)
    y = unit_rows(40, 6, rng)
    got = relational_similarity(x, y, pair_count=40)
    ax, ay = [], []
    for i in range(40):
        for j in range(i + 1, 40):
            ax.append(float(x[i] @ x[j]))
            ay.append(float(y[i] @ y[j]))
    expected = pearsonr(ax, ay).statistic
    assert got == pytest.approx(expected, abs=1e-12)


def test_relational_similarity_uses_leading_prefix(rng):
    x = unit_rows(60, 8, rng)
    y = unit_rows(60, 8, rng)
    y[:20] = x[:20]  # identical prefix
    assert relational_similarity(x, y, pair_count=20) == pytest.approx(1.0, abs=1e-12)


def test_relational_similarity_zero_variance_is_error():
    x = np.tile(np.array([[1.0, 0.0]]), (10, 1))  # all cosines equal 1
    y = np.random.default_rng(0).normal(size=(10, 2))
    with pytest.raises(ValidationError, match="zero variance"):
        relational_similarity(x, y, pair_count=10)


def test_relational_similarity_rejects_oversized_prefix(rng):
    x = unit_rows(10, 4, rng)
    with pytest.raises(ValidationError, match="M=11"):
        relational_similarity(x, x, pair_count=11)


def test_relational_similarity_is_scale_invariant(rng):
    x = unit_rows(30, 5, rng)
    y = unit_rows(30, 5, rng)
    a = relational_similarity(x, y, pair_count=30)
    b = relational_similarity(3.7 * x, 0.2 * y, pair_count=30)
    assert a == pytest.approx(b, abs=1e-12)


# ---------------------------------------------------------------------------
# joint report and normalization trend
# ---------------------------------------------------------------------------


def test_iterative_normalization_improves_geometry():
    x, y = paired_anisotropic_spaces(seed=1)
    before = geometry_report(x, y, r=600, pair_count=600, seed=0)
    x_in, _ = iterative_normalize(x)
    y_in, _ = iterative_normalize(y)
    after = geometry_report(x_in, y_in, r=600, pair_count=600, seed=0)
    assert after.isometry_defect < before.isometry_defect
    assert after.relational_similarity > before.relational_similarity
    assert abs(after.isotropy_source) < abs(before.isotropy_source)
    assert abs(after.isotropy_target) < abs(before.isotropy_target)


def test_geometry_report_is_seed_deterministic(rng):
    x = unit_rows(300, 16, rng)
    y = unit_rows(300, 16, rng)
    a = geometry_report(x, y, r=100, pair_count=150, seed=9)
    b = geometry_report(x, y, r=100, pair_count=150, seed=9)
    assert a == b


def test_geometry_report_accepts_unnormalized_input(rng):
    x = 5.0 * unit_rows(50, 8, rng)
    y = 0.3 * unit_rows(50, 8, rng)
    report = geometry_report(x, y, r=50, pair_count=50, seed=0)
    assert -1.0 <= report.relational_similarity <= 1.0
    assert report.isometry_defect >= 0.0
    assert report.table_row()
