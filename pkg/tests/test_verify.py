import math
from fractions import Fraction
from itertools import combinations

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from models.errors import InvalidInputError
from models.schemas import AngleMode, Ball, EuclideanPointSet, LatticePointSet, Verdict, real_context
from services import bounds
from services.oracle import candidate_set, regular_simplex, simplex_in_dimension
from services.verify import (
    check_min_max_ratio,
    diameter,
    distance_stats,
    max_angle,
    parse_alpha,
    project_to_sphere,
    smallest_enclosing_ball,
    violating_triples,
)


# -------------------------
# Thresholds
# -------------------------


@pytest.mark.parametrize(
    "spec,signed_square",
    [
        ("pi/3", Fraction(1, 4)),
        ("60deg", Fraction(1, 4)),
        ("pi/2", Fraction(0)),
        ("90deg", Fraction(0)),
        ("2pi/3", Fraction(-1, 4)),
        ("120deg", Fraction(-1, 4)),
        ("pi", Fraction(-1)),
        ("180deg", Fraction(-1)),
        ("pi/4", Fraction(1, 2)),
    ],
)
def test_rational_cosines_are_exact(spec, signed_square):
    assert parse_alpha(spec).cos_signed_square == signed_square


def test_slack_form():
    threshold = parse_alpha("pi/3+0.01")
    assert threshold.c == Fraction(1, 100)
    assert threshold.cos_signed_square is None
    assert abs(threshold.radians - (mpmath.pi / 3 + mpmath.mpf("0.01"))) < 1e-15


def test_radian_and_degree_forms():
    assert abs(parse_alpha("1.5").radians - 1.5) < 1e-30
    assert abs(parse_alpha("1.5rad").radians - 1.5) < 1e-30
    assert abs(parse_alpha("70deg").radians - 70 * math.pi / 180) < 1e-15


@pytest.mark.parametrize("spec", ["abc", "4", "0deg", "pi/0", "pi/3+x", "-1"])
def test_bad_thresholds_are_rejected(spec):
    with pytest.raises(InvalidInputError):
        parse_alpha(spec)


# -------------------------
# Angle certificates
# -------------------------


def test_tetrahedron_passes_with_exact_max_angle(tetrahedron):
    certificate = max_angle(tetrahedron, "pi/3+0.01", AngleMode.STRICT)
    assert certificate.verdict == Verdict.PASS
    assert abs(certificate.max_angle - mpmath.pi / 3) < 1e-15
    assert certificate.borderline_count == 0
    assert certificate.n == 4


def test_collinear_triple_fails(collinear):
    certificate = max_angle(collinear, "3.0", AngleMode.STRICT)
    assert certificate.verdict == Verdict.FAIL
    assert certificate.argmax_triple[1] == 1
    assert abs(certificate.max_angle - mpmath.pi) < 1e-15


def test_right_angles_weak_versus_strict(unit_square):
    weak = max_angle(unit_square, "pi/2", AngleMode.WEAK)
    strict = max_angle(unit_square, "pi/2", AngleMode.STRICT)
    assert weak.verdict == Verdict.PASS
    assert strict.verdict == Verdict.FAIL
    assert strict.violation_count == 4
    assert weak.borderline_count == 4
    assert abs(weak.max_angle - mpmath.pi / 2) < 1e-15


def test_simplex_pins_strict_against_weak():
    simplex = regular_simplex(5)
    assert max_angle(simplex, "pi/3", AngleMode.WEAK).verdict == Verdict.PASS
    assert max_angle(simplex, "pi/3", AngleMode.STRICT).verdict == Verdict.FAIL


def test_irrational_threshold_on_lattice_points():
    points = LatticePointSet(d=2, points=[(0, 0), (3, 0), (1, 2)])
    # 63.43 and 45 degrees at the base, about 71.57 at (1, 2)
    largest = math.pi - math.atan2(2, 1) - math.pi / 4
    assert max_angle(points, f"{largest + 1e-6}", AngleMode.STRICT).verdict == Verdict.PASS
    assert max_angle(points, f"{largest - 1e-6}", AngleMode.STRICT).verdict == Verdict.FAIL


def test_thin_obtuse_triangle_with_large_coordinates():
    # A.C = -1, so the angle at the origin is just above pi/2
    points = LatticePointSet(d=2, points=[(0, 0), (22374724931480345, 18656964085731206), (-311275785, 373303504)])
    certificate = max_angle(points, "pi/2", AngleMode.STRICT)
    assert certificate.verdict == Verdict.FAIL
    assert certificate.violation_count == 1
    assert certificate.argmax_triple[1] == 0
    assert violating_triples(points, "pi/2") == [(0, 1, 2)]
    assert violating_triples(points, "pi/2", AngleMode.WEAK) == [(0, 1, 2)]


def test_exact_right_angle_with_large_coordinates():
    points = LatticePointSet(d=2, points=[(0, 0), (10**12, 0), (0, 7095)])
    weak = max_angle(points, "pi/2", AngleMode.WEAK)
    assert weak.verdict == Verdict.PASS
    assert weak.violation_count == 0
    strict = max_angle(points, "pi/2", AngleMode.STRICT)
    assert strict.verdict == Verdict.FAIL
    assert strict.violation_count == 1
    assert violating_triples(points, "pi/2", AngleMode.WEAK) == []
    assert violating_triples(points, "pi/2", AngleMode.STRICT) == [(0, 1, 2)]


def test_real_coordinates_break_near_ties_exactly():
    ctx = real_context(128)
    # apex lifted by 2^-110 above the equilateral position: base angles exceed pi/3
    apex = ctx.sqrt(3) + ctx.mpf(2) ** -110
    points = EuclideanPointSet(d=2, points=[("-1", "0"), ("1", "0"), ("0", apex)], precision=128)
    certificate = max_angle(points, "pi/3", AngleMode.WEAK, prec=128)
    assert certificate.verdict == Verdict.FAIL
    assert certificate.violation_count == 2
    assert violating_triples(points, "pi/3", AngleMode.WEAK, prec=128) == [(0, 1, 2)]


def test_preconditions():
    with pytest.raises(InvalidInputError):
        max_angle(LatticePointSet(d=1, points=[(0,), (1,)]), "pi/2")
    with pytest.raises(InvalidInputError, match="coincide"):
        max_angle(LatticePointSet(d=1, points=[(0,), (1,), (1,)]), "pi/2")


@st.composite
def lattice_sets(draw):
    d = draw(st.integers(min_value=1, max_value=3))
    coords = st.tuples(*[st.integers(min_value=-3, max_value=3)] * d)
    points = draw(st.lists(coords, min_size=3, max_size=7, unique=True))
    return LatticePointSet(d=d, points=points)


ALPHAS = st.sampled_from(["pi/3+0.05", "pi/2", "2pi/3", "1.3", "100deg"])


@settings(max_examples=40, deadline=None)
@given(lattice_sets(), ALPHAS, st.randoms(use_true_random=False))
def test_permutation_and_translation_invariance(points, alpha, rnd):
    base = max_angle(points, alpha)
    shuffled = list(points.points)
    rnd.shuffle(shuffled)
    shift = [rnd.randint(-5, 5) for _ in range(points.d)]
    moved = LatticePointSet(d=points.d, points=[tuple(x + s for x, s in zip(p, shift)) for p in shuffled])
    other = max_angle(moved, alpha)
    assert other.verdict == base.verdict
    assert other.violation_count == base.violation_count
    assert abs(other.max_angle - base.max_angle) < 1e-30


@settings(max_examples=40, deadline=None)
@given(lattice_sets(), ALPHAS)
def test_strict_pass_implies_weak_pass(points, alpha):
    if max_angle(points, alpha, AngleMode.STRICT).verdict == Verdict.PASS:
        assert max_angle(points, alpha, AngleMode.WEAK).verdict == Verdict.PASS


@settings(max_examples=25, deadline=None)
@given(lattice_sets(), ALPHAS)
def test_certificate_agrees_with_conflict_triples(points, alpha):
    certificate = max_angle(points, alpha)
    triples = violating_triples(points, alpha)
    assert (certificate.verdict == Verdict.PASS) == (not triples)


def test_parallel_scan_matches_sequential():
    points = candidate_set("weight:2:12")
    one = max_angle(points, "pi/2", AngleMode.WEAK, threads=1)
    two = max_angle(points, "pi/2", AngleMode.WEAK, threads=2)
    assert one == two


# -------------------------
# Distances
# -------------------------


def test_distance_stats_two_points():
    stats = distance_stats(LatticePointSet(d=4, points=[(1, 1, 0, 0), (0, 0, 1, 1)]))
    assert stats.min_sq == stats.max_sq == 4
    assert stats.ratio == 1


def test_distance_stats_equidistant(tetrahedron):
    stats = distance_stats(tetrahedron)
    assert stats.min_sq == stats.max_sq == 2
    assert stats.ratio == 1
    assert abs(diameter(tetrahedron) - mpmath.sqrt(2)) < 1e-15


def test_distance_stats_rejects_duplicates():
    with pytest.raises(InvalidInputError):
        distance_stats(LatticePointSet(d=2, points=[(0, 0), (0, 0)]))


def test_min_max_ratio(tetrahedron):
    assert check_min_max_ratio(tetrahedron, "0.02").verdict == Verdict.PASS
    thin = LatticePointSet(d=2, points=[(0, 0), (10, 0), (5, 1)])
    check = check_min_max_ratio(thin, "0.02")
    assert check.verdict == Verdict.FAIL
    assert check.margin < 0


# -------------------------
# Enclosing ball and projection
# -------------------------


def test_ball_of_two_points():
    ball = smallest_enclosing_ball(LatticePointSet(d=2, points=[(0, 0), (1, 0)]))
    assert ball.center == pytest.approx((0.5, 0.0))
    assert ball.radius == pytest.approx(0.5)


def test_ball_of_one_point():
    ball = smallest_enclosing_ball(LatticePointSet(d=3, points=[(1, 2, 3)]))
    assert ball.radius == 0
    assert ball.center == pytest.approx((1.0, 2.0, 3.0))


@pytest.mark.parametrize("d", range(2, 31))
def test_jung_bound_is_tight_on_the_simplex(d):
    ball = smallest_enclosing_ball(simplex_in_dimension(d))
    assert abs(ball.radius - float(bounds.jung_radius(d))) < 1e-9


def test_random_sets_respect_jung():
    rng = np.random.default_rng(3)
    for trial in range(20):
        d = int(rng.integers(2, 5))
        n = int(rng.integers(2, 12))
        coords = rng.normal(size=(n, d))
        points = EuclideanPointSet(d=d, points=coords.tolist())
        ball = smallest_enclosing_ball(points, seed=trial)
        dist = np.linalg.norm(coords - np.array(ball.center), axis=1)
        assert np.all(dist <= ball.radius * (1 + 1e-9) + 1e-12)
        diam = max(np.linalg.norm(a - b) for a in coords for b in coords)
        assert ball.radius <= float(bounds.jung_radius(d)) * diam + 1e-9


def _enumerated_radius(coords):
    """Smallest enclosing circumball over every subset, each solved in its affine hull."""
    best = math.inf
    for size in range(1, len(coords) + 1):
        for subset in combinations(range(len(coords)), size):
            base, diffs = coords[subset[0]], coords[list(subset[1:])] - coords[subset[0]]
            center = base
            if size > 1:
                try:
                    weights = np.linalg.solve(diffs @ diffs.T, 0.5 * np.einsum("ij,ij->i", diffs, diffs))
                except np.linalg.LinAlgError:
                    continue
                center = base + weights @ diffs
            radius = np.linalg.norm(base - center)
            if np.all(np.linalg.norm(coords - center, axis=1) <= radius * (1 + 1e-9) + 1e-12):
                best = min(best, radius)
    return best


def test_ball_is_minimal_on_small_sets():
    rng = np.random.default_rng(17)
    for trial in range(200):
        d = int(rng.integers(2, 4))
        n = int(rng.integers(1, 5))
        coords = rng.normal(size=(n, d))
        ball = smallest_enclosing_ball(EuclideanPointSet(d=d, points=coords.tolist()), seed=trial)
        assert ball.radius == pytest.approx(_enumerated_radius(coords), rel=1e-8, abs=1e-12)


def test_projection_fixes_sphere_points():
    ball = Ball(center=(0.0, 0.0), radius=1.0)
    points = EuclideanPointSet(d=2, points=[("1", "0"), ("0", "-1")])
    image = project_to_sphere(points, ball)
    assert [[float(x) for x in p] for p in image.points] == [[1.0, 0.0], [0.0, -1.0]]


def test_projection_of_antipodal_points():
    ball = Ball(center=(0.0, 0.0), radius=1.0)
    points = EuclideanPointSet(d=2, points=[("-0.5", "0"), ("0.25", "0")])
    image = project_to_sphere(points, ball)
    assert float(image.points[0][0]) == pytest.approx(-1.0)
    assert float(image.points[1][0]) == pytest.approx(1.0)


def test_projection_increases_long_distances():
    rng = np.random.default_rng(9)
    for _ in range(100):
        angles = np.arange(4) * (math.pi / 2) + rng.uniform(-0.1, 0.1, 4)
        norms = rng.uniform(0.9, 1.0, 4)
        coords = np.stack([norms * np.cos(angles), norms * np.sin(angles)], axis=1)
        points = EuclideanPointSet(d=2, points=coords.tolist())
        image = project_to_sphere(points, Ball(center=(0.0, 0.0), radius=1.0))
        projected = np.array([[float(x) for x in p] for p in image.points])
        for i in range(4):
            for j in range(i + 1, 4):
                before = np.linalg.norm(coords[i] - coords[j])
                if before > 1.0:
                    assert np.linalg.norm(projected[i] - projected[j]) > before


def test_projection_rejects_centre_and_outside_points():
    ball = Ball(center=(0.0, 0.0), radius=1.0)
    with pytest.raises(InvalidInputError):
        project_to_sphere(EuclideanPointSet(d=2, points=[("0", "0"), ("1", "0")]), ball)
    with pytest.raises(InvalidInputError):
        project_to_sphere(EuclideanPointSet(d=2, points=[("2", "0")]), ball)
