import numpy as np
import pytest
import scipy.linalg as spla
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import exact_rank_snapshots, random_orthonormal_complex
from rsmor.exceptions import (DimensionError, RankDeficiencyError, SymplecticityError,
                              ValidationError)
from rsmor.hamsys import SnapshotMatrix
from rsmor.matkit import SketchSpec, poisson_apply, poisson_matrix
from rsmor.sympbasis import (CSVD_TAGS, METHOD_TAGS, SymplecticBasis, complexify,
                             compute_sketch_range, csvd_basis, defect_tolerance,
                             embed_complex_basis, form_K, generate_basis, load_basis,
                             rcsvd_basis, rsvd_like_basis, save_basis, sketch_widths,
                             svd_like_basis, symplectic_inverse, symplecticity_defect)

SVDLIKE_VARIANTS = ('K', 'Xs', 'KXs')


def complex_part(basis):
    N, k = basis.half_dim, basis.half_rank
    return basis.V[:N, :k] + 1j * basis.V[N:, :k]


def max_principal_angle(A, B):
    return float(np.max(spla.subspace_angles(A, B)))


def projection_error(basis, Xs):
    return np.linalg.norm(Xs - basis.V @ (basis.symplectic_inverse() @ Xs))


# --- complexify / embedding --------------------------------------------------

def test_complexify_examples():
    np.testing.assert_array_equal(complexify(np.array([[1.0], [2.0]])), [[1 + 2j]])
    q = np.array([[1.0, 2.0], [3.0, 4.0]])
    Xc = complexify(np.vstack([q, np.zeros((2, 2))]))
    np.testing.assert_array_equal(Xc, q)
    Xs = np.random.default_rng(0).standard_normal((6, 4))
    Xc = complexify(SnapshotMatrix(Xs))
    np.testing.assert_array_equal(np.vstack([Xc.real, Xc.imag]), Xs)
    with pytest.raises(DimensionError):
        complexify(np.ones((3, 2)))


def test_embed_units():
    np.testing.assert_array_equal(embed_complex_basis(np.array([[1.0]])).V, np.eye(2))
    V = embed_complex_basis(np.array([[1j]])).V
    J2 = poisson_matrix(1)
    np.testing.assert_array_equal(V, [[0, -1], [1, 0]])
    np.testing.assert_array_equal(V, J2.T)
    np.testing.assert_array_equal(V.T @ J2 @ V, J2)


def test_embed_random_is_orthosymplectic():
    b = embed_complex_basis(random_orthonormal_complex(6, 2, 0))
    assert b.V.shape == (12, 4)
    assert b.defect() <= 1e-12
    assert np.linalg.norm(b.V.T @ b.V - np.eye(4)) <= 1e-12


def test_embed_rejects_non_orthonormal():
    with pytest.raises(SymplecticityError) as exc:
        embed_complex_basis(np.array([[1.0], [1.0]]))
    assert exc.value.defect == pytest.approx(1.0)


# --- symplectic inverse ------------------------------------------------------

def test_symplectic_inverse_identity_and_J():
    np.testing.assert_array_equal(symplectic_inverse(np.eye(6)), np.eye(6))
    J = poisson_matrix(3)
    Vp = symplectic_inverse(J)
    np.testing.assert_array_equal(Vp, -J)
    np.testing.assert_array_equal(Vp @ J, np.eye(6))


def test_symplectic_inverse_matches_formula():
    V = embed_complex_basis(random_orthonormal_complex(5, 2, 3)).V
    formula = poisson_matrix(2) @ V.T @ poisson_matrix(5).T
    np.testing.assert_allclose(symplectic_inverse(V), formula, atol=1e-15)


def test_symplectic_inverse_rejects_non_symplectic():
    with pytest.raises(SymplecticityError) as exc:
        symplectic_inverse(2 * np.eye(4))
    assert exc.value.defect > 1


def test_basis_shape_check():
    with pytest.raises(DimensionError):
        SymplecticBasis(np.ones((4, 3)))


# --- cSVD family -------------------------------------------------------------

@pytest.mark.parametrize('variant', ['Full', 'Partial', 'Eig'])
def test_csvd_exact_rank_recovery(variant):
    _, Xs = exact_rank_snapshots(10, 2, 8, seed=4)
    b = csvd_basis(Xs, 2, variant)
    Xc = complexify(Xs)
    U = complex_part(b)
    assert np.linalg.norm(Xc - U @ (U.conj().T @ Xc)) <= 1e-8 * np.linalg.norm(Xc)
    assert b.method_tag == 'cSVD' + variant


def test_csvd_diagonal():
    Xc = np.zeros((5, 4), dtype=complex)
    Xc[:3, :3] = np.diag([3, 2, 1])
    Xs = np.vstack([Xc.real, Xc.imag])
    for variant in ('Full', 'Partial', 'Eig'):
        U = complex_part(csvd_basis(Xs, 2, variant))
        np.testing.assert_allclose(np.linalg.norm(U.conj().T @ Xc, axis=1), [3, 2], rtol=1e-12)


def test_csvd_variants_agree_on_wave(small_snapshots):
    Xc = complexify(small_snapshots)
    sig = {}
    for variant in ('Full', 'Partial', 'Eig'):
        U = complex_part(csvd_basis(small_snapshots, 10, variant))
        sig[variant] = np.linalg.norm(U.conj().T @ Xc, axis=1)
    s = np.linalg.svd(Xc, compute_uv=False)
    np.testing.assert_allclose(sig['Full'], s[:10], rtol=1e-12)
    np.testing.assert_allclose(sig['Eig'], sig['Full'], rtol=1e-9)
    np.testing.assert_allclose(sig['Partial'], sig['Full'], rtol=1e-9)


def test_csvd_variants_share_span_with_gap():
    rng = np.random.default_rng(11)
    U = random_orthonormal_complex(30, 8, 11)
    W = np.linalg.qr(rng.standard_normal((20, 8)) + 1j * rng.standard_normal((20, 8)))[0]
    s = np.array([100, 80, 60, 50, 1, 0.5, 0.2, 0.1])
    Xc = (U * s) @ W.conj().T
    Xs = np.vstack([Xc.real, Xc.imag])
    bases = [complex_part(csvd_basis(Xs, 4, v)) for v in ('Full', 'Partial', 'Eig')]
    for B in bases[1:]:
        assert max_principal_angle(bases[0], B) <= 1e-6


def test_csvd_errors():
    Xs = np.random.default_rng(0).standard_normal((8, 5))
    with pytest.raises(ValidationError):
        csvd_basis(Xs, 5)
    with pytest.raises(ValidationError):
        csvd_basis(Xs, 4, 'Partial')
    with pytest.raises(ValidationError):
        csvd_basis(Xs, 2, 'Lanczos')
    _, low = exact_rank_snapshots(6, 1, 4, seed=0)
    with pytest.raises(RankDeficiencyError) as exc:
        csvd_basis(low, 3, 'Eig')
    assert exc.value.achieved_rank == 1


# --- rcSVD -------------------------------------------------------------------

@pytest.mark.parametrize('kind', ['srft', 'gaussian'])
def test_rcsvd_exact_rank(kind):
    _, Xs = exact_rank_snapshots(20, 3, 12, seed=1)
    b = rcsvd_basis(Xs, 3, SketchSpec(3, 0, 0, kind, seed=5))
    Xc = complexify(Xs)
    U = complex_part(b)
    assert np.linalg.norm(Xc - U @ (U.conj().T @ Xc)) <= 1e-8 * np.linalg.norm(Xc)
    assert b.defect() <= 1e-8 * 3
    assert b.sketch.kind == kind


def test_rcsvd_deterministic(small_snapshots):
    spec = SketchSpec(6, 4, 1, seed=123)
    a = rcsvd_basis(small_snapshots, 6, spec).V
    b = rcsvd_basis(small_snapshots, 6, spec).V
    assert a.tobytes() == b.tobytes()


def test_rcsvd_inverse_is_transpose(small_snapshots):
    b = rcsvd_basis(small_snapshots, 8, SketchSpec(8, 5, 0, seed=2))
    assert np.linalg.norm(b.symplectic_inverse() - b.V.T) <= 1e-8


def test_rcsvd_projection_error_on_desk(desk_snapshots):
    Xc = complexify(desk_snapshots)

    def err(U):
        return np.linalg.norm(Xc - U @ (U.conj().T @ Xc))
    ref = err(complex_part(csvd_basis(desk_snapshots, 20)))
    errs = [err(complex_part(rcsvd_basis(desk_snapshots, 20, SketchSpec(20, 10, 1, seed=s))))
            for s in range(5)]
    assert np.mean(errs) <= 3 * ref


def test_rcsvd_errors():
    _, Xs = exact_rank_snapshots(6, 1, 5, seed=2)
    with pytest.raises(ValidationError):
        rcsvd_basis(Xs, 3, SketchSpec(2))
    with pytest.raises(ValidationError):
        rcsvd_basis(Xs, 3, SketchSpec(3, 3))
    with pytest.raises(RankDeficiencyError) as exc:
        rcsvd_basis(Xs, 3, SketchSpec(3, 0, 0, 'gaussian'))
    assert exc.value.achieved_rank == 1


# --- sketch ranges -----------------------------------------------------------

def test_sketch_widths():
    assert sketch_widths(5) == (3, 2)
    assert sketch_widths(4) == (2, 2)
    assert sketch_widths(1) == (1, 0)


def test_K_sketch_lies_in_range_of_K():
    _, Xs = exact_rank_snapshots(12, 2, 10, seed=3)
    K = form_K(Xs)
    assert np.linalg.matrix_rank(K) == 4
    Q = compute_sketch_range('K', Xs, 2, 2, 0, seed=1)
    UK = spla.orth(K)
    assert np.linalg.norm(Q - UK @ (UK.T @ Q)) <= 1e-10


def test_K_is_skew(desk_snapshots):
    K = form_K(desk_snapshots)
    assert np.linalg.norm(K + K.T) <= 1e-12 * np.linalg.norm(K)


@pytest.mark.parametrize('variant', SVDLIKE_VARIANTS)
def test_sketch_range_is_orthonormal_and_deterministic(variant, small_snapshots):
    Q = compute_sketch_range(variant, small_snapshots, 7, 3, 1, seed=9)
    assert Q.shape == (100, 10)
    assert np.linalg.norm(Q.T @ Q - np.eye(10)) <= 1e-12
    np.testing.assert_array_equal(Q, compute_sketch_range(variant, small_snapshots, 7, 3, 1, seed=9))


def test_sketch_range_errors(small_snapshots):
    with pytest.raises(ValidationError):
        compute_sketch_range('K', small_snapshots, 90, 11)
    with pytest.raises(ValidationError):
        compute_sketch_range('Z', small_snapshots, 4)
    with pytest.raises(ValidationError):
        compute_sketch_range('K', small_snapshots, 4, q_pow=-1)


# --- SVD-like ----------------------------------------------------------------

def test_svd_like_canonical_pair():
    N, sigma = 3, 2.0
    Xs = np.zeros((2 * N, 2))
    Xs[0, 0] = sigma
    Xs[N, 1] = sigma
    np.testing.assert_allclose(form_K(Xs), [[0, 4], [-4, 0]])
    b, f = svd_like_basis(Xs, 1)
    np.testing.assert_allclose(f.sigmas, [2.0])
    assert f.p == 1
    E = np.zeros((2 * N, 2))
    E[0, 0] = E[N, 1] = 1
    np.testing.assert_allclose(np.abs(b.V), E, atol=1e-15)
    assert b.defect() <= 1e-14


def test_svd_like_rotated_pair():
    # a rotated Lagrangian-complement pair scaled by 3
    e = np.array([1.0, 1.0]) / np.sqrt(2)
    Xs = 3 * np.array([[*e, 0, 0], [0, 0, *e]]).T
    _, f = svd_like_basis(Xs, 1)
    np.testing.assert_allclose(f.sigmas, [3.0])


def test_svd_like_desk_defect(desk_snapshots):
    b, f = svd_like_basis(desk_snapshots, 10)
    assert b.defect() <= 1e-8
    assert np.all(np.diff(f.sigmas) < 0)
    assert f.P_cols.shape == (400, 20)


def test_svd_like_sigmas_against_eigenvalues():
    Xs = np.random.default_rng(2).standard_normal((8, 6))
    _, f = svd_like_basis(Xs, 2)
    ev = np.linalg.eigvals(form_K(Xs)).imag
    np.testing.assert_allclose(f.sigmas, np.sqrt(np.sort(ev[ev > 1e-9])[::-1]), rtol=1e-10)


def test_svd_like_rank_deficiency():
    _, Xs = exact_rank_snapshots(10, 2, 9, seed=5)
    with pytest.raises(RankDeficiencyError) as exc:
        svd_like_basis(Xs, 3)
    assert exc.value.achieved_rank == 2


def test_svd_like_exact_recovery():
    S, Xs = exact_rank_snapshots(15, 3, 10, seed=6)
    b, _ = svd_like_basis(Xs, 3)
    assert max_principal_angle(b.V, S) <= 1e-6
    assert projection_error(b, Xs) <= 1e-6 * np.linalg.norm(Xs)


# --- randomized SVD-like -----------------------------------------------------

@pytest.mark.parametrize('variant', SVDLIKE_VARIANTS)
@pytest.mark.parametrize('p_ovs', [0, 3])
def test_rsvd_like_exact_rank(variant, p_ovs):
    S, Xs = exact_rank_snapshots(15, 3, 12, seed=8)
    b, f = rsvd_like_basis(Xs, 3, p_ovs, 0, variant, seed=4)
    ref, fref = svd_like_basis(Xs, 3)
    np.testing.assert_allclose(f.sigmas[:3], fref.sigmas, rtol=1e-8)
    assert max_principal_angle(b.V, ref.V) <= 1e-6
    assert max_principal_angle(b.V, S) <= 1e-6
    assert b.defect() <= defect_tolerance(b.method_tag, 3)
    assert b.method_tag == 'rSVDLike' + variant


def test_rsvd_like_deterministic(small_snapshots):
    a = rsvd_like_basis(small_snapshots, 5, 4, 1, 'KXs', seed=17)[0].V
    b = rsvd_like_basis(small_snapshots, 5, 4, 1, 'KXs', seed=17)[0].V
    assert a.tobytes() == b.tobytes()


def test_rsvd_like_rank_deficiency():
    _, Xs = exact_rank_snapshots(12, 2, 11, seed=9)
    with pytest.raises(RankDeficiencyError):
        rsvd_like_basis(Xs, 3, 2, 0, 'K', seed=0)


# --- properties across all methods -------------------------------------------

@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.sampled_from(METHOD_TAGS), st.integers(1, 20), st.integers(0, 20),
       st.integers(0, 2), st.integers(0, 2**32 - 1))
def test_every_basis_is_symplectic(small_snapshots, tag, k, p_ovs, q_pow, seed):
    b = generate_basis(tag, small_snapshots, k, p_ovs, q_pow, seed)
    assert b.V.shape == (200, 2 * k)
    assert b.defect() <= defect_tolerance(tag, k)
    Vp = b.symplectic_inverse()
    assert np.linalg.norm(Vp @ b.V - np.eye(2 * k)) <= 1e-8 * k
    P = b.V @ Vp
    assert np.linalg.norm(P @ P - P) <= 1e-6
    if tag in CSVD_TAGS:
        assert np.linalg.norm(b.V.T @ b.V - np.eye(2 * k)) <= 1e-8 * k
        assert np.linalg.norm(Vp - b.V.T) <= 1e-8 * k


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(METHOD_TAGS), st.integers(1, 3), st.integers(0, 2**16))
def test_exact_rank_recovery_all_methods(tag, r, seed):
    _, Xs = exact_rank_snapshots(12, r, 10, seed)
    b = generate_basis(tag, Xs, r, 2, 0, seed)
    assert projection_error(b, Xs) <= 1e-6 * np.linalg.norm(Xs)


@pytest.mark.parametrize('tag', ['cSVDFull', 'SVDLike'])
def test_projection_error_monotone_in_k(desk_snapshots, tag):
    errs = [projection_error(generate_basis(tag, desk_snapshots, k), desk_snapshots)
            for k in (5, 10, 20, 40, 80)]
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_generate_basis_unknown_tag(small_snapshots):
    with pytest.raises(ValidationError):
        generate_basis('POD', small_snapshots, 2)


# --- file format -------------------------------------------------------------

def test_basis_round_trip(tmp_path, small_snapshots):
    b = generate_basis('rcSVD', small_snapshots, 4, 2, 1, seed=2**63 + 5)
    path = tmp_path / 'basis.txt'
    save_basis(path, b)
    assert path.read_text().splitlines()[0] == \
        f'# rsmor-basis rows=200 cols=8 method=rcSVD seed={2**63 + 5}'
    loaded, seed = load_basis(path)
    np.testing.assert_array_equal(loaded.V, b.V)
    assert (loaded.method_tag, seed) == ('rcSVD', 2**63 + 5)

    c = generate_basis('SVDLike', small_snapshots, 2)
    save_basis(path, c)
    loaded, seed = load_basis(path)
    assert seed is None and loaded.method_tag == 'SVDLike'
    np.testing.assert_array_equal(loaded.V, c.V)


def test_load_rejects_other_files(tmp_path):
    path = tmp_path / 'x.txt'
    path.write_text('1 2\n3 4\n')
    with pytest.raises(ValidationError):
        load_basis(path)
    path.write_text('# rsmor-basis rows=4 cols=2 method=custom seed=none\n1 2\n')
    with pytest.raises(DimensionError):
        load_basis(path)


def test_symplecticity_defect_of_J_columns():
    V = poisson_apply(np.eye(6))[:, [0, 3]]
    assert symplecticity_defect(V) == pytest.approx(0.0)
