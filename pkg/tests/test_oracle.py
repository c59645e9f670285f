import math

import numpy as np
import pytest

from pinning.errors import CapBias, TooLarge
from pinning.excursion import renewal_hits, solve_tilt, two_point_law
from pinning.oracle import (EnumerationSpec, enumerate_partition, exact_first_excursion, expected_local_time,
                            identity_suite, verify_ldp_identity, verify_ratio_bound)
from pinning.pathkit import make_config
from pinning.quenched import ModelParams, forward_recursion, sample_disorder, site_potential


def test_spec_limits():
    with pytest.raises(TooLarge):
        EnumerationSpec(21)
    with pytest.raises(ValueError):
        EnumerationSpec(0)


def test_two_site_hand_formula():
    a = 0.3
    law = two_point_law(a)
    p = ModelParams(0.8, 0.2, 2)
    V = np.array([0.4, -1.1, 0.7])
    w = np.exp(site_potential(p, V))
    got = enumerate_partition(law, p, V, EnumerationSpec(2))
    assert math.exp(got) == pytest.approx(w[2] * (a * a * w[0] * w[1] + (1 - a) * w[0]), rel=1e-12)


def test_zero_potential_free(small_laws):
    p = ModelParams(1.0, 0.0, 12)
    got = enumerate_partition(small_laws[1.5], p, np.full(13, 0.5), EnumerationSpec(12, False))
    assert abs(got) <= 1e-12


@pytest.mark.parametrize("constrained", [True, False])
def test_recursion_matches_enumeration(small_laws, constrained):
    rng = np.random.default_rng(17)
    for j in range(30):
        c = (1.5, 1.8, 2.0, 2.5)[j % 4]
        N = int(rng.integers(1, 15))
        p = ModelParams(float(rng.uniform(0.2, 2)), float(rng.uniform(0, 1)), N)
        V = rng.standard_normal(N + 1)
        tab = forward_recursion(small_laws[c], p, V)
        ref = enumerate_partition(small_laws[c], p, V, EnumerationSpec(N, constrained))
        got = tab.logZ0[-1] if constrained else tab.logZfree
        assert abs(got - ref) <= 1e-9


def test_contact_profile_matches_enumeration(small_laws):
    # P(x_n = 0) = Z(zero forced at n) / Z: force it by a huge site weight and read off the derivative
    law = small_laws[1.8]
    N = 10
    p = ModelParams(0.7, 0.2, N)
    V = sample_disorder(3, 0, N).values
    from pinning.quenched import contact_profile
    prof = contact_profile(forward_recursion(law, p, V))
    base = enumerate_partition(law, p, V, EnumerationSpec(N, False))
    h = 1e-6
    for n in range(N + 1):
        W = V.copy()
        W[n] += h / p.beta
        d = (enumerate_partition(law, p, W, EnumerationSpec(N, False)) - base) / h
        assert prof[n] == pytest.approx(d, abs=1e-5)


def test_truncated_enumeration(small_laws):
    # forbidding gaps above R equals the recursion on the law with p(k) = 0 beyond R
    law = small_laws[2.0]
    N, R = 12, 3
    p = ModelParams(1.0, 0.3, N)
    V = sample_disorder(0, 5, N).values
    got = enumerate_partition(law, p, V, EnumerationSpec(N, True, R))
    from pinning.quenched import tables_from_potential
    with pytest.warns(CapBias):
        cut = tables_from_potential(law, site_potential(p, V), R)
    assert got == pytest.approx(cut.logZ0[-1], abs=1e-12)


@pytest.mark.parametrize("n,R,bchi", [(10, 3, 0.1), (14, 5, 1.0), (12, 8, 0.5)])
def test_ldp_identity_cells(small_laws, n, R, bchi):
    lhs, rhs = verify_ldp_identity(small_laws[1.8], 1.0, bchi, n, R)
    assert abs(lhs - rhs) <= 1e-10


def test_ldp_identity_both_conventions(small_laws):
    law = small_laws[2.5]
    a = verify_ldp_identity(law, 2.0, 0.2, 11, 4, count_origin=True)
    b = verify_ldp_identity(law, 2.0, 0.2, 11, 4, count_origin=False)
    assert abs(a[0] - a[1]) <= 1e-12 and abs(b[0] - b[1]) <= 1e-12
    assert a[0] == pytest.approx(b[0] * math.exp(-0.4), rel=1e-12)


def test_ldp_r1_single_path(small_laws):
    # only the path with returns at every site survives: L_n = n + 1
    n, bchi = 9, 0.3
    lhs, rhs = verify_ldp_identity(small_laws[1.8], 1.0, bchi, n, 1)
    assert lhs == pytest.approx(math.exp(-bchi * (n + 1)), rel=1e-13)
    assert rhs == pytest.approx(lhs, rel=1e-13)


def test_ldp_small_chi(small_laws):
    lhs, rhs = verify_ldp_identity(small_laws[1.8], 1.0, 1e-10, 12, 5, count_origin=False)
    assert lhs == pytest.approx(1.0, abs=1e-8)
    assert rhs == pytest.approx(1.0, abs=1e-8)


def test_ldp_limits(small_laws):
    with pytest.raises(TooLarge):
        verify_ldp_identity(small_laws[1.8], 1.0, 0.1, 19, 3)
    with pytest.raises(ValueError):
        verify_ldp_identity(small_laws[1.8], 1.0, 0.1, 8, 9)


def test_expected_local_time():
    pmf = np.array([0.0, 1.0])
    assert expected_local_time(pmf, (0, 9)) == 10.0
    pmf = np.array([0.0, 0.0, 1.0])
    assert expected_local_time(pmf, (1, 8)) == 4.0


def test_ratio_bound(laws):
    law = laws[1.8]
    cfg = make_config(200, 0.2, 0.02, 0.06)
    assert verify_ratio_bound(law, 1e-9, cfg, cfg.l0) <= 1 + 1e-9
    alphas = np.linspace(1e-4, 2 / cfg.R, 5)
    ratios = [verify_ratio_bound(law, a, cfg, i) for a in alphas for i in range(cfg.l0, cfg.l1 + 1, 7)]
    assert all(np.isfinite(ratios))
    assert max(ratios) < 10
    # first interval: nu is stochastically larger, so its local time is smaller
    for a in alphas:
        assert verify_ratio_bound(law, a, cfg, cfg.l0) <= 1 + 1e-9


def test_exact_first_excursion(small_laws):
    law = small_laws[2.0]
    q = exact_first_excursion(law, 12)
    assert q.sum() == pytest.approx(1.0, abs=1e-14)
    u = renewal_hits(law.pmf[:13], 12)
    assert q[12] == pytest.approx(law.pmf[12] / u[12], rel=1e-14)


def test_identity_suite_passes():
    rows = identity_suite(seed=3, cases=12)
    assert rows and all(r["ok"] for r in rows)
