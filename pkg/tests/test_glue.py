import numpy as np
import pytest

from torus_atlas.action_angle import ChartSpec, integrable_embedding
from torus_atlas.diophantine import label_value
from torus_atlas.errors import CoverageGap, DomainError, OverlapMismatch
from torus_atlas.geometry import HamiltonianSpec
from torus_atlas.glue import (
    GlobalConjugacy,
    TransitionMap,
    build_partition,
    bump,
    glue,
    hausdorff_distance,
    invert_embedding,
    overlap_translation,
    verify_global_conjugacy,
)
from torus_atlas.diophantine import DiophantineParams
from torus_atlas.kam import KamConfig, LocalConjugacy

SPEC = HamiltonianSpec(1e-3, 1)
OVERLAP_V = (0.3013, 0.4987)


def make_glue(charts, spec, params):
    return glue([LocalConjugacy(c, spec, params, KamConfig(), None) for c in charts],
                build_partition(charts))


@pytest.fixture(scope="module")
def pair(reference_chart, neighbour_chart, params):
    charts = [reference_chart, neighbour_chart]
    return glue([LocalConjugacy(c, SPEC, params, KamConfig(), None) for c in charts],
                build_partition(charts))


def test_bump():
    s = np.linspace(-1.5, 1.5, 301)
    b = bump(s)
    assert np.all(b >= 0) and np.all(b <= np.exp(-1))
    assert np.all(b[np.abs(s) >= 1] == 0)
    assert np.all(b[np.abs(s) < 1] > 0)


def test_partition_properties(reference_chart, neighbour_chart):
    pu = build_partition([reference_chart, neighbour_chart])
    rng = np.random.default_rng(0)
    lo, hi = pu.supports[:, :, 0].min(axis=0), pu.supports[:, :, 1].max(axis=0)
    pts = rng.uniform(lo, hi, size=(10_000, 2))
    b = pu.bumps(pts)
    assert np.any(b.sum(axis=1) == 0)  # the raw bumps underflow near edges
    inside = np.isfinite(pu.log_bumps(pts).max(axis=1))
    pts = pts[inside]
    xi = pu(pts)
    assert np.all((xi >= 0) & (xi <= 1))
    assert np.max(np.abs(xi.sum(axis=1) - 1.0)) <= 1e-12
    # compact support inside each window
    for j, c in enumerate(pu.charts):
        outside = ~np.array([c.contains(p, margin=1e-12) for p in pts])
        assert np.all(xi[outside, j] == 0)


def test_partition_is_constant_on_fibres(reference_chart):
    from torus_atlas.freqverify import turning_point
    pu = build_partition([reference_chart, ChartSpec(2, (0.25, 0.45), (0.3, 0.7))])
    K = integrable_embedding((0.31, 0.52), 32)
    xs = K.evaluate(np.random.default_rng(1).uniform(0, 6.3, (5, 2)))
    w = [pu.at_point(x) for x in xs] + [pu.at_point(turning_point((0.31, 0.52)))]
    for d in w[1:]:
        assert all(abs(d[k] - w[0][k]) < 1e-12 for k in d)


def test_single_chart_partition(reference_chart):
    pu = build_partition([reference_chart])
    pts = np.random.default_rng(2).uniform(pu.supports[0, :, 0], pu.supports[0, :, 1],
                                           size=(1000, 2))
    assert np.all(pu(pts) == 1.0)


def test_coverage_gap_has_witness(reference_chart):
    far = ChartSpec(3, (0.6, 0.8), (0.3, 0.7))
    with pytest.raises(CoverageGap) as exc:
        build_partition([reference_chart, far], region=((0.2, 0.75), (0.35, 0.65)))
    I, E = exc.value.witness
    assert 0.34 <= I <= 0.61


def test_transition_map_unimodular():
    TransitionMap(1, 2, (0.0, 0.0), S=((1, 1), (0, 1)))
    with pytest.raises(ValueError):
        TransitionMap(1, 2, (0.0, 0.0), S=((2, 0), (0, 1)))


def test_overlap_translation_recovers_synthetic_shift():
    K = integrable_embedding((0.3, 0.5), 32)
    c_true = np.array([2e-4, -7e-5])
    c, dev = overlap_translation(K, K.translate(c_true))
    assert np.allclose(c, c_true, atol=1e-12)
    assert dev < 1e-10
    assert np.array_equal(overlap_translation(K, K, i=1, j=1)[0], np.zeros(2))
    other = integrable_embedding((0.31, 0.5), 32)
    with pytest.raises(OverlapMismatch):
        overlap_translation(K, other)
    assert hausdorff_distance(K, K.translate((0.5, 0.5))) < 1e-12
    assert hausdorff_distance(K, other) > 1e-3


def test_invert_embedding():
    K = integrable_embedding((0.3, 0.5), 32)
    beta = np.array([[0.5, 1.0], [2.0, 4.0]])
    got, miss = invert_embedding(K, K.evaluate(beta), beta + 0.01)
    assert np.allclose(got, beta, atol=1e-12)
    assert miss < 1e-13


def test_identity_at_zero_perturbation(reference_chart, neighbour_chart, params):
    gc = make_glue([reference_chart, neighbour_chart], HamiltonianSpec(), params)
    gt = gc.torus(OVERLAP_V)
    th = np.random.default_rng(3).uniform(0, 2 * np.pi, (20, 2))
    assert np.max(np.abs(gt(th) - gt.integrable(th))) < 1e-12
    for tm in gc.transitions(OVERLAP_V):
        assert np.allclose(tm.c, 0.0, atol=1e-12)
        assert tm.deviation <= 1e-9


def test_single_chart_glue_is_local(reference_chart, params, pair):
    gc = glue([pair.locals[1]], build_partition([reference_chart]))
    v = (0.2413, 0.5077)
    gt = gc.torus(v)
    th = np.random.default_rng(4).uniform(0, 2 * np.pi, (20, 2))
    assert np.array_equal(gt(th), pair.locals[1].solve(v).K.evaluate(th))


def test_overlap_glue_agrees_with_each_chart(pair):
    gt = pair.torus(OVERLAP_V)
    assert set(gt.weights) == {1, 2}
    th = np.random.default_rng(5).uniform(0, 2 * np.pi, (20, 2))
    for j, Kj in gt.canonical.items():
        c = np.max(np.abs(gt.translations[j]))
        assert c <= 1e-4
        d = np.max(np.abs(gt(th) - Kj.evaluate(th + gt.translations[j] - gt.c_bar)))
        assert d < 1e-9
    for tm in pair.transitions(OVERLAP_V):
        assert tm.deviation <= 1e-6


def test_weighted_translation_average(pair):
    """Feed a known shift into chart 2 and check c_bar = sum_j xi^j c_j."""
    c_true = np.array([3e-5, -4e-5])

    class Shifted(GlobalConjugacy):
        def canonical_torus(self, j, v):
            st, K = super().canonical_torus(j, v)
            return (st, K.translate(c_true)) if j == 2 else (st, K)

    gc = Shifted(list(pair.locals.values()), pair.partition)
    gt = gc.torus(OVERLAP_V)
    other = 3 - gt.reference
    c_other = c_true if gt.reference == 1 else -c_true
    assert np.allclose(gt.translations[other], c_other, atol=1e-12)
    assert np.allclose(gt.c_bar, gt.weights[other] * c_other, atol=1e-12)


def test_smooth_across_weight_transition(pair, params):
    ref_chart = pair.locals[1].chart
    Is = np.linspace(0.27, 0.33, 13)
    vals = [(float(I), 0.4987) for I in Is]
    assert all(label_value(ref_chart, v, params)[0] for v in vals)
    th = np.array([[0.7, 2.1]])
    x = np.array([pair(v, th)[0] for v in vals])
    d2 = np.abs(x[2:] - 2 * x[1:-1] + x[:-2])
    h = Is[1] - Is[0]
    assert np.max(d2) / h**2 < 50.0


def test_off_diophantine_value_rejected(reference_chart):
    gc = make_glue([reference_chart], SPEC, DiophantineParams(0.5))
    with pytest.raises(DomainError):
        gc.torus((0.25, 0.5))


def test_end_to_end_defect(pair):
    rep = verify_global_conjugacy(pair, SPEC, [OVERLAP_V, (0.2213, 0.4471)], n_points=2,
                                  t_end=50.0)
    assert rep.defect <= 1e-5
    assert rep.identity_distance < 1e-2
