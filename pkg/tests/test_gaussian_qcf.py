import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from qbmsim import (build_propagator_bundle, coherent_state, moments,
                    propagate_full, propagate_secular, propagate_series,
                    secular_observable_check, synthetic_table, thermal_state,
                    vacuum_state)
from qbmsim.errors import CapabilityError, DomainError, RangeError
from qbmsim.gaussian_qcf import (QCF_CSV_HEADER, GaussianQcfState,
                                 series_to_csv)

W0_SYN = 1.3


def _syn_delta(s):
    return 0.3 * (1.0 - np.exp(-2.0 * s))


def _syn_gamma(s):
    return 0.05 * (1.0 - np.exp(-s)) + 0.02 * np.sin(s)


def _syn_pi(s):
    return 0.1 * np.sin(2.0 * s)


def _syn_big_gamma(t):
    # 2 int_0^t gamma, elementary
    return 2.0 * (0.05 * (t - (1.0 - np.exp(-t)))
                  + 0.02 * (1.0 - np.cos(t)))


@pytest.fixture(scope="module")
def syn_bundle():
    grid = np.linspace(0.0, 6.0, 1201)
    tab = synthetic_table(grid, delta=_syn_delta, gamma=_syn_gamma,
                          pi=_syn_pi)
    return build_propagator_bundle(tab, omega0=W0_SYN)


@pytest.fixture(scope="module")
def bundle_scaled(table_scaled):
    return build_propagator_bundle(table_scaled)


class TestExponentMatrix:
    @pytest.mark.parametrize("t", [0.37, 1.9, 5.73])
    def test_against_quadrature_oracle(self, syn_bundle, t):
        # A solves dA/dt = M + w0 (S A + A S^T) - 2 gamma A, A(0) = 0,
        # hence A(t) = int_0^t e^{G(s)-G(t)} R(w0 (t-s)) M(s) R^T ds
        big_t = _syn_big_gamma(t)

        def entry(i, j):
            def f(s):
                th = W0_SYN * (t - s)
                c, sn = np.cos(th), np.sin(th)
                rot = np.array([[c, sn], [-sn, c]])
                m = np.array([[_syn_delta(s), -0.5 * _syn_pi(s)],
                              [-0.5 * _syn_pi(s), 0.0]])
                return np.exp(_syn_big_gamma(s) - big_t) \
                    * (rot @ m @ rot.T)[i, j]
            return quad(f, 0.0, t, limit=400, epsabs=1e-12)[0]

        want = np.array([[entry(0, 0), entry(0, 1)],
                         [entry(0, 1), entry(1, 1)]])
        got = syn_bundle.a_matrix(t)
        assert np.max(np.abs(got - want)) < 2e-6

    @pytest.mark.parametrize("t", [0.8, 3.1])
    def test_differential_identity(self, syn_bundle, t):
        hd = 1e-4
        da = (syn_bundle.a_matrix(t + hd)
              - syn_bundle.a_matrix(t - hd)) / (2.0 * hd)
        a = syn_bundle.a_matrix(t)
        s_mat = np.array([[0.0, 1.0], [-1.0, 0.0]])
        m = np.array([[_syn_delta(t), -0.5 * _syn_pi(t)],
                      [-0.5 * _syn_pi(t), 0.0]])
        want = m + W0_SYN * (s_mat @ a + a @ s_mat.T) \
            - 2.0 * _syn_gamma(t) * a
        assert np.max(np.abs(da - want)) < 5e-6

    def test_constant_drive_closed_form(self):
        # delta = d0, gamma = pi = 0, w0 = 1: the oscillating channels are
        # p = (d0/2) sin 2t and q = (d0/2)(1 - cos 2t)
        d0 = 0.4
        grid = np.linspace(0.0, 4.0 * np.pi, 3201)
        tab = synthetic_table(grid, delta=d0)
        bundle = build_propagator_bundle(tab, omega0=1.0)
        for t in (0.3, 1.7, 9.2):
            p = 0.5 * d0 * np.sin(2.0 * t)
            q = 0.5 * d0 * (1.0 - np.cos(2.0 * t))
            c2, s2 = np.cos(2.0 * t), np.sin(2.0 * t)
            a3 = 0.5 * (c2 * p + s2 * q)
            a1 = 0.5 * (c2 * q - s2 * p)
            iso = 0.5 * d0 * t
            want = np.array([[iso + a3, a1], [a1, iso - a3]])
            assert np.max(np.abs(bundle.a_matrix(t) - want)) < 1e-8

    def test_trace_carries_the_isotropic_channel(self, bundle_scaled):
        tab = bundle_scaled.table
        for t in (0.5, 2.0, 3.9):
            want = float(tab.values_at(t)["delta_gamma_int"])
            assert np.trace(bundle_scaled.a_matrix(t)) \
                == pytest.approx(want, rel=1e-12)

    def test_refine_validation(self, table_scaled):
        with pytest.raises(DomainError):
            build_propagator_bundle(table_scaled, refine=3)

    def test_specless_table_needs_omega0(self):
        tab = synthetic_table(np.linspace(0.0, 1.0, 11))
        with pytest.raises(DomainError):
            build_propagator_bundle(tab)


class TestEnergyIdentity:
    def test_exact_for_both_variants(self, bundle_scaled):
        tab = bundle_scaled.table
        tg = np.linspace(0.0, tab.t_max, 50)
        vals = tab.values_at(tg)
        for state0 in (vacuum_state(), coherent_state(1.0, -0.5),
                       thermal_state(2.4)):
            n0 = state0.n_mean
            want = np.exp(-vals["big_gamma"]) * (n0 + 0.5) \
                + vals["delta_gamma_int"] - 0.5
            for secular in (False, True):
                series = propagate_series(state0, bundle_scaled, tg,
                                          secular=secular)
                got = np.array([s.n_mean for s in series])
                assert np.max(np.abs(got - want)) \
                    <= 1e-12 * max(1.0, np.max(np.abs(want)))

    def test_thermal_fixed_point(self):
        # constant rates with d0 = 2 g0 (nbar + 1/2) hold the thermal
        # state exactly
        nbar, g0 = 1.7, 0.1
        d0 = 2.0 * g0 * (nbar + 0.5)
        tab = synthetic_table(np.linspace(0.0, 30.0, 1501),
                              delta=d0, gamma=g0)
        state0 = thermal_state(nbar)
        for t in (3.0, 14.0, 30.0):
            out = propagate_secular(state0, tab, t, omega0=1.0)
            assert abs(out.n_mean - nbar) < 1e-8
            assert np.max(np.abs(out.cov - state0.cov)) < 1e-8


class TestSecularComparison:
    def test_occupation_agrees_anisotropy_does_not(self, bundle_scaled):
        state0 = GaussianQcfState(mean=np.array([1.0, 0.0]),
                                  cov=np.diag([1.25, 0.2]))
        tg = np.linspace(0.0, 4.0, 81)
        cmp = secular_observable_check(state0, bundle_scaled, tg)
        assert cmp.n_mean < 1e-12
        assert cmp.anisotropy > 0.01

    def test_series_flag_matches_direct_calls(self, bundle_scaled):
        state0 = coherent_state(0.7, 0.7)
        tg = np.array([0.5, 1.5, 3.5])
        sec = propagate_series(state0, bundle_scaled, tg, secular=True)
        for s, t in zip(sec, tg):
            direct = propagate_secular(state0, bundle_scaled.table, t)
            assert np.array_equal(s.cov, direct.cov)
            assert np.array_equal(s.mean, direct.mean)


class TestMoments:
    def test_coherent_closed_forms(self):
        state = coherent_state(1.0, 2.0)
        got = moments(state, [(1, 0), (2, 0), (4, 0), (2, 2), (0, 0)])
        # <X^4> = m^4 + 6 m^2 s2 + 3 s2^2; X and P are uncorrelated here
        want = [1.0, 1.5, 1.0 + 3.0 + 0.75, 1.5 * 4.5, 1.0]
        assert np.allclose(got, want, rtol=1e-13)
        assert state.n_mean == pytest.approx(2.5, rel=1e-13)

    def test_thermal_closed_forms(self):
        state = thermal_state(3.2)
        s2 = 3.7
        got = moments(state, [(2, 0), (0, 2), (4, 0), (1, 1)])
        assert np.allclose(got, [s2, s2, 3.0 * s2**2, 0.0], rtol=1e-13)

    def test_order_cap(self):
        with pytest.raises(CapabilityError):
            moments(vacuum_state(), [(3, 2)])
        with pytest.raises(CapabilityError):
            moments(vacuum_state(), [(-1, 0)])


class TestStateValidation:
    def test_asymmetric_covariance(self):
        with pytest.raises(DomainError):
            GaussianQcfState(mean=np.zeros(2),
                             cov=np.array([[1.0, 0.2], [0.1, 1.0]]))

    def test_indefinite_covariance(self):
        with pytest.raises(DomainError):
            GaussianQcfState(mean=np.zeros(2), cov=np.diag([1.0, -0.3]))

    def test_uncertainty_floor(self):
        with pytest.raises(DomainError):
            GaussianQcfState(mean=np.zeros(2), cov=0.2 * np.eye(2))

    def test_negative_thermal_occupation(self):
        with pytest.raises(DomainError):
            thermal_state(-0.1)

    def test_propagation_requires_preparation_time(self, bundle_scaled):
        late = propagate_full(vacuum_state(), bundle_scaled, 1.0)
        with pytest.raises(DomainError):
            propagate_full(late, bundle_scaled, 2.0)

    def test_horizon_enforced(self, bundle_scaled):
        with pytest.raises(RangeError):
            propagate_full(vacuum_state(), bundle_scaled,
                           bundle_scaled.table.t_max + 1.0)


class TestSeriesCsv:
    def test_header_and_roundtrip(self, tmp_path, bundle_scaled):
        tg = np.linspace(0.0, 2.0, 9)
        series = propagate_series(coherent_state(1.0, 0.0), bundle_scaled,
                                  tg)
        path = tmp_path / "qcf.csv"
        series_to_csv(series, path)
        text = path.read_text().splitlines()
        assert text[0] == QCF_CSV_HEADER
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert data.shape == (9, 7)
        assert np.allclose(data[:, 0], tg, rtol=0, atol=0)
        assert np.allclose(data[:, 6], [s.n_mean for s in series],
                           rtol=1e-15)


class TestPropagatedStatesStayPhysical:
    @given(mx=st.floats(-3.0, 3.0), mp=st.floats(-3.0, 3.0),
           nbar=st.floats(0.0, 5.0), frac=st.floats(0.0, 1.0))
    def test_full_map_preserves_constructibility(self, bundle_scaled, mx,
                                                 mp, nbar, frac):
        # construction re-runs the symmetry / positivity / uncertainty
        # audit, so surviving it is the assertion
        state0 = GaussianQcfState(mean=np.array([mx, mp]),
                                  cov=(nbar + 0.5) * np.eye(2))
        t = frac * bundle_scaled.table.t_max
        out = propagate_full(state0, bundle_scaled, t)
        assert out.t == t
        assert np.trace(out.cov) >= 1.0 - 1e-9
