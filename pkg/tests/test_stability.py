import numpy as np
import pytest

from geoflow.algebra import KrausSet
from geoflow.errors import AmbiguousSpectrumError, CertificationError, InvariantError
from geoflow.fields import GKLSModel, PolyField, evaluate, gkls_decomposition, gkls_field, gradient_field
from geoflow.flow import exact_affine_flow, lindblad_matrix_oracle, spectral_abscissa
from geoflow.stability import (
    SemigroupFamily,
    build_generator,
    closed_form_lie_derivative,
    commutant_basis,
    commutant_dimension,
    commutant_dimension_kernel,
    fixed_points,
    gaussian_angle_formula,
    lasalle_certify,
    poisson_angle_formula,
    purity_lie_derivative,
    s_infinity_probe,
)
from geoflow.statespace import CoherencePoint, coordinate_purity, sample_states, to_matrix

from conftest import S0, S1, S2, S3, haar, herm, rand_state


def qubit_point(rho, b):
    return CoherencePoint([np.trace(rho @ e).real for e in b.elements[1:]], 2)


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


def test_family_validation():
    with pytest.raises(InvariantError):
        SemigroupFamily.poisson(2 * S3)
    with pytest.raises(InvariantError):
        SemigroupFamily.gaussian(S1 + 1j * S2)
    with pytest.raises(InvariantError):
        SemigroupFamily.random_unitary([0.5], [S3 / np.sqrt(2)], 0.5, [0.5, 0.6], [S1, S2])
    with pytest.raises(InvariantError):
        SemigroupFamily.random_unitary([-0.1], [S3 / np.sqrt(2)], 0.0, [], [])
    with pytest.raises(InvariantError):
        SemigroupFamily.random_unitary([0.1, 0.1], [S3, S1], 0.0, [], [])  # not normalized
    with pytest.raises(InvariantError):
        SemigroupFamily.weighted_poisson([1, 2], [S1], None)


def test_poisson_has_only_kraus_part(ctx):
    b, sc = ctx(3)
    U = haar(3, np.random.default_rng(0))
    dec = gkls_decomposition(build_generator(SemigroupFamily.poisson(U)), b, sc)
    assert dec.hamiltonian.max_abs_diff(PolyField.zero(8)) < 1e-15
    assert dec.gradient.max_abs_diff(PolyField.zero(8)) < 1e-14


def test_gaussian_reproduces_phase_damping(ctx):
    b, sc = ctx(2)
    f1 = gkls_field(build_generator(SemigroupFamily.gaussian(S3)), b, sc)
    f2 = gkls_field(GKLSModel.build(None, [S3]), b, sc)
    assert f1.max_abs_diff(f2) < 1e-15


def test_random_unitary_generator_against_formula():
    rng = np.random.default_rng(1)
    es = [np.diag([1, -1, 0]) / np.sqrt(2), np.diag([1, 1, -2]) / np.sqrt(6)]
    Us = [haar(3, rng), haar(3, rng)]
    H = herm(3, rng)
    alphas, beta, p = [0.4, 0.9], 0.7, [0.3, 0.7]
    fam = SemigroupFamily.random_unitary(alphas, es, beta, p, Us, H)
    m = build_generator(fam)
    rho = rand_state(3, rng)

    def L(r):
        out = -1j * (H @ r - r @ H)
        for a, e in zip(alphas, es):
            out += a * (e @ r @ e - 0.5 * (e @ e @ r + r @ e @ e))
        for pj, u in zip(p, Us):
            out += beta * pj * (u @ r @ u.conj().T - r)
        return out

    np.testing.assert_allclose(m.generator(rho), L(rho), atol=1e-12)


def test_random_unitary_beta_zero_is_weighted_gaussian(ctx):
    b, sc = ctx(3)
    es = [np.diag([1, -1, 0]) / np.sqrt(2), np.diag([1, 1, -2]) / np.sqrt(6)]
    H = herm(3, np.random.default_rng(2))
    ru = SemigroupFamily.random_unitary([0.25, 0.64], es, 0.0, [1.0], [np.eye(3)], H)
    wg = SemigroupFamily.weighted_gaussian([0.5, 0.8], es, H)
    assert gkls_field(build_generator(ru), b, sc).max_abs_diff(gkls_field(build_generator(wg), b, sc)) < 1e-14


def test_weighted_families_use_modulus_squared(ctx):
    b, sc = ctx(2)
    f1 = gkls_field(build_generator(SemigroupFamily.weighted_poisson([0.6j], [S3])), b, sc)
    f2 = gkls_field(build_generator(SemigroupFamily.weighted_poisson([0.6], [S3])), b, sc)
    assert f1.max_abs_diff(f2) < 1e-15


# ---------------------------------------------------------------------------
# Fixed points
# ---------------------------------------------------------------------------


def test_fixed_points_phase_damping(ctx):
    from geoflow.fields import to_pauli_convention

    b, sc = ctx(2)
    G = to_pauli_convention(gkls_field(GKLSModel.build(None, [S3]), b, sc))
    fp = fixed_points(G)
    np.testing.assert_allclose(fp.particular.x, 0, atol=1e-15)
    assert fp.dimension == 1
    np.testing.assert_allclose(np.abs(fp.null_basis[0]), [0, 0, 1], atol=1e-15)


def test_fixed_points_energy_damping(ctx):
    from geoflow.fields import to_pauli_convention

    b, sc = ctx(2)
    G = to_pauli_convention(gkls_field(GKLSModel.build(None, [S1 + 1j * S2]), b, sc))
    fp = fixed_points(G)
    np.testing.assert_allclose(fp.particular.x, [0, 0, 1], atol=1e-14)
    assert fp.dimension == 0 and fp.residual < 1e-12


def test_fixed_points_zero_and_errors(ctx):
    fp = fixed_points(PolyField.zero(8))
    assert fp.dimension == 8
    np.testing.assert_allclose(np.abs(fp.null_basis @ fp.null_basis.T), np.eye(8), atol=1e-14)
    b, sc = ctx(2)
    with pytest.raises(InvariantError):
        fixed_points(gradient_field(S3, b, sc))
    # inconsistent affine system
    assert fixed_points(PolyField(np.ones(3))).empty


@pytest.mark.parametrize("n", [2, 3])
def test_fixed_point_residual_random(n, ctx):
    b, sc = ctx(n)
    rng = np.random.default_rng(3 + n)
    for _ in range(10):
        G = gkls_field(GKLSModel.build(herm(n, rng), [rng.normal(size=(n, n)) for _ in range(2)]), b, sc)
        fp = fixed_points(G)
        pts = [fp.particular.x] + [fp.particular.x + rng.normal() * v for v in fp.null_basis]
        for x in pts:
            assert np.linalg.norm(evaluate(G, x)) < 1e-9


def test_maximally_mixed_fixed_for_semigroup_families(ctx):
    b, sc = ctx(3)
    rng = np.random.default_rng(4)
    fams = [SemigroupFamily.poisson(haar(3, rng)),
            SemigroupFamily.weighted_gaussian([1.0, 0.3], [herm(3, rng), herm(3, rng)], herm(3, rng))]
    for fam in fams:
        np.testing.assert_allclose(evaluate(gkls_field(build_generator(fam), b, sc), np.zeros(8)), 0, atol=1e-14)
    # not a general GKLS property: energy damping does not fix I/2
    b2, sc2 = ctx(2)
    ed = gkls_field(GKLSModel.build(None, [S1 + 1j * S2]), b2, sc2)
    assert np.linalg.norm(evaluate(ed, np.zeros(3))) > 1


# ---------------------------------------------------------------------------
# Purity Lie derivative and the angle formulas
# ---------------------------------------------------------------------------


def test_purity_derivative_matches_finite_difference(ctx):
    b, sc = ctx(3)
    rng = np.random.default_rng(5)
    G = gkls_field(GKLSModel.build(herm(3, rng), [rng.normal(size=(3, 3))]), b, sc)
    x = sample_states(3, 1, 6, b)[0]
    h = 1e-6
    F = lambda y: 0.5 * coordinate_purity(y, 3)  # noqa: E731
    fd = (F(exact_affine_flow(G, x, h).x) - F(exact_affine_flow(G, x, -h).x)) / (2 * h)
    assert purity_lie_derivative(G, x) == pytest.approx(fd, abs=1e-8)


def test_purity_derivative_examples(ctx):
    from geoflow.fields import hamiltonian_field, to_pauli_convention

    b, sc = ctx(2)
    G = gkls_field(GKLSModel.build(None, [S3]), b, sc)
    assert purity_lie_derivative(G, np.zeros(3)) == 0
    X = hamiltonian_field(herm(2, np.random.default_rng(7)), b, sc)
    assert abs(purity_lie_derivative(X, np.array([0.3, -0.2, 0.5]))) < 1e-12
    GP = to_pauli_convention(G)
    x = np.array([0.3, -0.2, 0.5])
    assert purity_lie_derivative(GP, x) == pytest.approx(-2 * (x[0] ** 2 + x[1] ** 2), abs=1e-14)


def test_poisson_angle_examples(ctx):
    b, sc = ctx(2)
    rho = 0.5 * (S0 + S1)
    p = qubit_point(rho, b)
    # ρ̃ = σ1/2, σ3 ρ̃ σ3 = −ρ̃: |ρ̃|² (cos π − 1) = (1/2)(−2)
    assert poisson_angle_formula(S3, p, b) == pytest.approx(-1.0, abs=1e-14)
    G = gkls_field(build_generator(SemigroupFamily.poisson(S3)), b, sc)
    assert purity_lie_derivative(G, p) == pytest.approx(-1.0, abs=1e-14)
    assert poisson_angle_formula(S3, qubit_point(0.5 * (S0 + S3), b), b) == pytest.approx(0.0, abs=1e-15)
    assert poisson_angle_formula(S3, CoherencePoint.maximally_mixed(2), b) == 0.0


def test_gaussian_angle_examples(ctx):
    b, sc = ctx(2)
    p = qubit_point(0.5 * (S0 + S1), b)
    val = gaussian_angle_formula(S3, p, b)
    G = gkls_field(build_generator(SemigroupFamily.gaussian(S3)), b, sc)
    assert val < 0
    assert val == pytest.approx(purity_lie_derivative(G, p), abs=1e-12)
    assert gaussian_angle_formula(S3, qubit_point(0.5 * (S0 + S3), b), b) == pytest.approx(0.0, abs=1e-15)
    assert gaussian_angle_formula(S3, CoherencePoint.maximally_mixed(2), b) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_angle_formulas_random(n, ctx):
    b, sc = ctx(n)
    rng = np.random.default_rng(8 + n)
    U, v = haar(n, rng), herm(n, rng)
    Gp = gkls_field(build_generator(SemigroupFamily.poisson(U)), b, sc)
    Gg = gkls_field(build_generator(SemigroupFamily.gaussian(v)), b, sc)
    for x in sample_states(n, 30, rng, b):
        lp, lg = poisson_angle_formula(U, x, b), gaussian_angle_formula(v, x, b)
        assert lp == pytest.approx(purity_lie_derivative(Gp, x), abs=1e-10) and lp <= 1e-14
        assert lg == pytest.approx(purity_lie_derivative(Gg, x), abs=1e-10) and lg <= 1e-14
        rho = to_matrix(x, b)
        # Gaussian closed form also equals Tr(vρvρ) − Tr(v²ρ²)
        assert lg == pytest.approx(np.trace(v @ rho @ v @ rho).real - np.trace(v @ v @ rho @ rho).real, abs=1e-12)


def test_closed_form_for_mixed_family(ctx):
    b, sc = ctx(3)
    rng = np.random.default_rng(11)
    es = [np.diag([1, -1, 0]) / np.sqrt(2)]
    fam = SemigroupFamily.random_unitary([0.8], es, 0.5, [0.5, 0.5], [haar(3, rng), haar(3, rng)], herm(3, rng))
    G = gkls_field(build_generator(fam), b, sc)
    for x in sample_states(3, 10, rng, b):
        assert closed_form_lie_derivative(fam, x, b) == pytest.approx(purity_lie_derivative(G, x), abs=1e-10)


# ---------------------------------------------------------------------------
# Commutants
# ---------------------------------------------------------------------------


def test_commutant_examples():
    assert commutant_dimension(np.eye(2)) == 4
    assert commutant_dimension(S3) == 2
    U = np.diag(np.exp(1j * np.array([0.1, 1.3, 2.9])))
    assert commutant_dimension(U) == 3 == commutant_dimension_kernel(U)
    assert commutant_dimension(np.diag([1, 1, -1])) == 5


@pytest.mark.parametrize("n", [2, 3, 4])
def test_commutant_methods_agree(n):
    rng = np.random.default_rng(12 + n)
    for _ in range(30):
        # random unitaries with forced degeneracies
        lam = np.exp(1j * rng.uniform(0, 2 * np.pi, size=n))
        k = rng.integers(0, n)
        lam[:k] = lam[0]
        W = haar(n, rng)
        U = W @ np.diag(lam) @ W.conj().T
        assert commutant_dimension(U) == commutant_dimension_kernel(U)


def test_commutant_ambiguity():
    U = np.diag([1.0, np.exp(1.5e-8j)])
    with pytest.raises(AmbiguousSpectrumError):
        commutant_dimension(U, tol=1e-8)
    with pytest.raises(InvariantError):
        commutant_dimension(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_commutant_basis_orthonormal():
    cb = commutant_basis([S3])
    g = np.einsum("aij,bij->ab", cb.conj(), cb)
    np.testing.assert_allclose(g, np.eye(2), atol=1e-12)
    for x in cb:
        np.testing.assert_allclose(x @ S3, S3 @ x, atol=1e-12)


# ---------------------------------------------------------------------------
# LaSalle certification and S_inf
# ---------------------------------------------------------------------------


def test_lasalle_phase_damping():
    rep = lasalle_certify(SemigroupFamily.gaussian(S3), sample_count=300)
    assert rep.certified and rep.max_lie_derivative <= 1e-12
    assert rep.closed_form_max_deviation < 1e-10
    assert rep.E_description["commutant_dimension"] == 2
    assert rep.s_infinity_classification == "all-of-E-fixed"


def test_lasalle_random_unitary_qutrit():
    rng = np.random.default_rng(13)
    es = [np.diag([1, -1, 0]) / np.sqrt(2), np.diag([1, 1, -2]) / np.sqrt(6)]
    fam = SemigroupFamily.random_unitary([0.3, 0.6], es, 0.9, [0.4, 0.6], [haar(3, rng), haar(3, rng)])
    rep = lasalle_certify(fam, sample_count=1000, probe=False)
    assert rep.max_lie_derivative <= 1e-12 and rep.closed_form_max_deviation < 1e-10
    assert rep.s_infinity_classification is None


def test_lasalle_maximally_mixed_only(ctx):
    b, sc = ctx(3)
    fam = SemigroupFamily.poisson(haar(3, np.random.default_rng(14)))
    G = gkls_field(build_generator(fam), b, sc)
    assert purity_lie_derivative(G, np.zeros(8)) == 0.0


def test_lasalle_failure_reports_sample(monkeypatch):
    import geoflow.stability as S

    monkeypatch.setattr(S, "purity_lie_derivative", lambda f, xs: np.full(len(xs), 1e-6))
    with pytest.raises(CertificationError) as err:
        S.lasalle_certify(SemigroupFamily.gaussian(S3), sample_count=10, probe=False)
    assert err.value.sample is not None and err.value.value == pytest.approx(1e-6)


def test_s_infinity_examples():
    pd = SemigroupFamily.gaussian(S3)
    assert s_infinity_probe(pd).classification == "all-of-E-fixed"
    rev2 = SemigroupFamily.weighted_poisson([1.0], [S3], S1)
    res = s_infinity_probe(rev2)
    assert res.classification == "singleton-maximally-mixed"
    assert res.min_exit > 1e-4
    h3 = SemigroupFamily.weighted_poisson([1.0], [S3], 0.7 * S3)
    assert s_infinity_probe(h3).classification == "all-of-E-fixed"
    with pytest.raises(ValueError):
        s_infinity_probe(pd, horizon=0)


def test_invariant_but_moving_E_is_proper_subset():
    # diagonal H commutes with U, so E is invariant while its coherences rotate
    U = np.diag([1.0, 1.0, -1.0]).astype(complex)
    fam = SemigroupFamily.weighted_poisson([1.0], [U], np.diag([1.0, -1.0, 0.0]))
    res = s_infinity_probe(fam)
    assert res.classification == "proper-subset"
    assert res.max_exit < 1e-10 and res.max_movement > 1e-2


def test_two_pauli_unitaries_force_singleton():
    fam = SemigroupFamily.weighted_poisson([1.0, 1.0], [S1, S3])
    rep = lasalle_certify(fam, sample_count=200)
    assert rep.E_description["commutant_dimension"] == 1
    assert rep.s_infinity_classification == "singleton-maximally-mixed"


def test_poisson_sigma3_drive_convergence_rate(ctx):
    b, sc = ctx(2)
    G = gkls_field(build_generator(SemigroupFamily.weighted_poisson([1.0], [S3], S1)), b, sc)
    alpha = spectral_abscissa(G)
    assert alpha == pytest.approx(-1.0, abs=1e-12)
    rng = np.random.default_rng(15)
    taus = np.linspace(0, 12, 61)
    for x0 in sample_states(2, 100, rng, b):
        norms = np.array([np.linalg.norm(exact_affine_flow(G, x0, t).x) for t in taus])
        bound = np.linalg.norm(x0) * np.exp(alpha * taus / 2)
        # eventually below the bound, and decaying towards the origin
        assert np.all(norms[taus >= 6] <= bound[taus >= 6])
        assert norms[-1] < 1e-4


def test_probe_matches_oracle_on_E():
    # sampled E states under phase damping stay put under the matrix oracle too
    m = build_generator(SemigroupFamily.gaussian(S3))
    rho = np.diag([0.8, 0.2]).astype(complex)
    np.testing.assert_allclose(lindblad_matrix_oracle(m, rho, 3.0), rho, atol=1e-14)
    assert isinstance(m.kraus, KrausSet)
