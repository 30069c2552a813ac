import math

import numpy as np
import pytest

from ifbm_persistence.errors import NonPositiveDefinite, PrecisionExhausted, ValidationError
from ifbm_persistence.model import lamperti_correlation, make_grid
from ifbm_persistence.toeplitz import (
    CoeffTable,
    CorrSamples,
    cholesky_oracle,
    correlation_samples,
    load_table,
    save_table,
    schur_coefficients,
    stability_diagnostic,
)


def lamperti_corr(H, n0=50, L=None, eps_L=1e-4):
    g = make_grid(H, n0, eps_L)
    corr = correlation_samples(g)
    if L is not None:
        corr = CorrSamples(corr.values[: L + 1], corr.delta, H)
    return corr


# -- CorrSamples ----------------------------------------------------------

def test_corr_samples_validation():
    with pytest.raises(ValidationError):
        CorrSamples([0.9, 0.5], 0.1)
    with pytest.raises(ValidationError):
        CorrSamples([1.0, 1.5], 0.1)
    with pytest.raises(ValidationError):
        CorrSamples([], 0.1)
    c = CorrSamples([1.0, 0.5, 0.25], 0.1)
    assert c.L == 2
    np.testing.assert_array_equal(c.toeplitz(), [[1, .5, .25], [.5, 1, .5], [.25, .5, 1]])


# -- factorization examples ----------------------------------------------

@pytest.mark.parametrize("mode", ["standard", "extended"])
def test_white_noise_identity(mode):
    corr = CorrSamples(np.r_[1.0, np.zeros(20)], 0.1)
    t = schur_coefficients(corr, mode)
    np.testing.assert_array_equal(t.a, np.eye(21))
    np.testing.assert_array_equal(cholesky_oracle(corr).a, np.eye(21))
    rep = stability_diagnostic(t, tail_band_start=1.0)
    assert rep.ok and rep.oscillation_score == 0.0


@pytest.mark.parametrize("mode", ["standard", "extended"])
def test_ar1_matches_cholesky(mode):
    corr = CorrSamples(0.5 ** np.arange(9), 1.0)
    t = schur_coefficients(corr, mode)
    np.testing.assert_allclose(t.a, cholesky_oracle(corr).a, atol=1e-12, rtol=0)
    assert t.a[0, 0] == 1.0


def test_two_by_two():
    rho = 0.37
    corr = CorrSamples([1.0, rho], 1.0)
    for t in (schur_coefficients(corr), cholesky_oracle(corr)):
        assert t.a[0, 0] == pytest.approx(1.0)
        np.testing.assert_allclose(t.row(1), [rho, math.sqrt(1 - rho * rho)], rtol=1e-15)


@pytest.mark.parametrize("H", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_oracle_equivalence(H):
    corr = lamperti_corr(H, L=512)
    s = schur_coefficients(corr)
    c = cholesky_oracle(corr)
    assert np.abs(s.a - c.a).max() < 1e-8


def test_extended_agrees_with_standard():
    corr_s = lamperti_corr(0.7, n0=20)
    corr_e = correlation_samples(make_grid(0.7, 20, 1e-4), "extended")
    np.testing.assert_allclose(corr_e.values, corr_s.values, atol=1e-15)
    s = schur_coefficients(corr_s)
    e = schur_coefficients(corr_e, "extended")
    assert e.precision_mode == "extended" and e.a_lo is not None
    assert np.abs(s.a - e.a).max() < 1e-10


@pytest.mark.parametrize("H", [0.2, 0.5, 0.8])
def test_row_normalization_and_reconstruction(H, rng):
    corr = lamperti_corr(H)
    t = schur_coefficients(corr)
    np.testing.assert_allclose((t.a ** 2).sum(axis=1), 1.0, atol=1e-8)
    j = rng.integers(0, t.L + 1, 1000)
    k = rng.integers(0, t.L + 1, 1000)
    np.testing.assert_allclose(t.covariance(j, k), corr.values[np.abs(j - k)], atol=1e-6)


def test_positive_definite_for_all_H():
    for H in np.round(np.arange(0.1, 1.0, 0.1), 1):
        corr = lamperti_corr(H, L=256)
        t = schur_coefficients(corr)
        assert np.all(np.diag(t.a) > 0)


def test_non_positive_definite_detected():
    corr = CorrSamples([1.0, 0.9, 0.0], 1.0)
    for fn in (schur_coefficients, cholesky_oracle):
        with pytest.raises(NonPositiveDefinite) as exc:
            fn(corr)
        assert exc.value.step == 2
    with pytest.raises(NonPositiveDefinite) as exc:
        schur_coefficients(corr, "extended")
    assert exc.value.step == 2
    # a singular matrix is rejected rather than clamped
    with pytest.raises(NonPositiveDefinite):
        schur_coefficients(CorrSamples([1.0, 1.0], 1.0))


def test_deterministic():
    corr = lamperti_corr(0.3, L=300)
    assert np.array_equal(schur_coefficients(corr).a, schur_coefficients(corr).a)


def test_operation_count_quadratic():
    counts = []
    for L in (200, 400, 800):
        counts.append(schur_coefficients(lamperti_corr(0.5, n0=200, L=L)).op_count)
    for L, c in zip((200, 400, 800), counts):
        assert c <= 1.1 * (L + 1) ** 2
    assert counts[2] / counts[1] == pytest.approx(4.0, rel=0.02)


def test_oracle_size_guard():
    corr = CorrSamples(np.r_[1.0, np.zeros(4097)], 1.0)
    with pytest.raises(ValidationError):
        cholesky_oracle(corr)


# -- stability diagnostic -----------------------------------------------

def test_injected_oscillation_flagged():
    g = make_grid(0.7, 50, 1e-6)
    t = schur_coefficients(correlation_samples(g))
    assert t.horizon > 60
    a = np.array(t.a)
    i0 = int(math.ceil(40 / t.delta)) + 1
    noise = 1e-3 * (-1.0) ** np.arange(a.shape[0])
    rows = np.arange(a.shape[0]) >= i0
    for k in np.flatnonzero(rows):
        a[k, i0 : k + 1] += noise[i0 : k + 1]
    bad = CoeffTable(a, t.delta, H=0.7)
    rep = stability_diagnostic(bad, 40.0)
    assert not rep.ok
    assert rep.flagged_rows == frozenset(range(i0, a.shape[0]))
    assert rep.oscillation_score > rep.threshold
    assert "UNSTABLE" in rep.summary()


def test_lamperti_h07_report():
    g = make_grid(0.7, 50, 1e-4)
    t = schur_coefficients(correlation_samples(g))
    rep = t.diagnostics
    assert t.horizon == pytest.approx(-math.log(1e-4) / 0.21, abs=t.delta)
    assert all(k * t.delta >= 40 for k in rep.flagged_rows)
    assert np.all(np.isnan(rep.max_tail_coefficient[: int(40 / t.delta)]))
    assert rep.ok


def test_precision_exhausted_in_standard_mode():
    corr = lamperti_corr(0.7, L=700)
    with pytest.raises(PrecisionExhausted) as exc:
        schur_coefficients(corr, hard_limit=-1.0)
    assert "extended" in str(exc.value)


# -- cache ----------------------------------------------------------------

@pytest.mark.parametrize("mode", ["standard", "extended"])
def test_cache_roundtrip(tmp_path, mode):
    g = make_grid(0.6, 15, 1e-3)
    t = schur_coefficients(correlation_samples(g, mode), mode)
    p = save_table(tmp_path / "t.bin", t)
    u = load_table(p)
    assert np.array_equal(t.a, u.a)
    assert u.delta == t.delta and u.H == t.H and u.precision_mode == mode
    if mode == "extended":
        assert np.array_equal(t.a_lo, u.a_lo)
    n = t.L + 1
    expected = 8 + 4 + 4 + 8 + 8 + 8 + 8 + 8 * n * (n + 1) // 2 * (2 if mode == "extended" else 1) + 32
    assert p.stat().st_size == expected


def test_cache_corruption_detected(tmp_path):
    t = schur_coefficients(CorrSamples(0.5 ** np.arange(5), 1.0))
    p = save_table(tmp_path / "t.bin", t)
    raw = bytearray(p.read_bytes())
    raw[60] ^= 1
    p.write_bytes(bytes(raw))
    with pytest.raises(ValidationError, match="checksum"):
        load_table(p)
    p.write_bytes(b"junk")
    with pytest.raises(ValidationError):
        load_table(p)
