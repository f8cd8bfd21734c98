import numpy as np
import pytest
from numpy.testing import assert_allclose

from chanlearn import serialize
from chanlearn._rng import stream
from chanlearn.channels import (
    ChannelRep,
    ErrorRateVector,
    identity_channel,
    pauli_channel,
    random_channel,
    random_density,
    random_effect,
    random_error_rates,
    random_isometry,
    random_pure_state,
)
from chanlearn.combs import (
    CombOperator,
    CombStep,
    check_comb,
    check_costrategy,
    comb_from_channels,
    comb_from_obj,
    comb_to_obj,
    compose_channels_choi,
    link_product,
    simulate_sequential_tester,
    tester_product,
    tester_sequential,
    tester_value,
    time_local_twirl,
    time_local_twirl_sample,
    twirled_comb,
)


def random_memory_step(d_mem_in, d_a, d_mem_out, d_b, rng, env=2):
    v = random_isometry(d_mem_in * d_a, d_mem_out * d_b * env, rng)
    kraus = [v[e::env, :] for e in range(env)]
    return CombStep(kraus, d_mem_in, d_a, d_mem_out, d_b)


class TestCombConstruction:
    def test_single_channel_is_choi(self):
        ch = random_channel(1, stream(30, "c1"))
        comb = comb_from_channels([ch])
        assert_allclose(comb.op, ch.choi_matrix(), atol=1e-12)
        assert comb.validity()["ok"]

    def test_two_independent_channels_tensor(self):
        rng = stream(31, "c2")
        a, b = random_channel(1, rng), random_channel(1, rng)
        comb = comb_from_channels([a, b])
        assert_allclose(comb.op, np.kron(a.choi_matrix(), b.choi_matrix()), atol=1e-11)
        assert comb.validity()["ok"]

    def test_memory_comb_passes_ladder(self):
        rng = stream(32, "mem")
        for r in (2, 3):
            steps = [random_memory_step(1, 2, 2, 2, rng)]
            steps += [random_memory_step(2, 2, 2, 2, rng) for _ in range(r - 2)]
            steps += [random_memory_step(2, 2, 1, 2, rng)]
            comb = comb_from_channels(steps)
            rep = comb.validity()
            assert rep["ok"] and max(rep["levels"]) <= 1e-9

    def test_memory_dim_mismatch_rejected(self):
        rng = stream(33, "mm")
        s1 = random_memory_step(1, 2, 2, 2, rng)
        s2 = random_memory_step(4, 2, 1, 2, rng)
        with pytest.raises(ValueError):
            comb_from_channels([s1, s2])


class TestCheckComb:
    def test_random_psd_generically_fails(self):
        rng = stream(34, "psd")
        g = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        op = g @ g.conj().T
        op *= 8 / np.trace(op).real      # right trace for a 2-step qubit comb
        rep = check_comb(op, [2, 2], [2, 2])
        assert not rep["ok"]

    def test_scaled_comb_fails_by_scaling(self):
        comb = comb_from_channels([identity_channel(1)])
        rep = check_comb(1.1 * comb.op, [2], [2])
        # Tr_B of the scaled Choi is 1.1 * identity: Frobenius gap 0.1 * sqrt(d_A)
        assert abs(rep["levels"][0] - 0.1 * np.sqrt(2)) < 1e-12
        assert not rep["ok"]

    def test_report_shape(self):
        rng = stream(35, "rep")
        comb = comb_from_channels([random_channel(1, rng), random_channel(1, rng)])
        rep = comb.validity()
        assert len(rep["levels"]) == 2 and rep["psd_min"] >= -1e-8


class TestLinkProduct:
    def test_link_with_identity_channel(self):
        ch = random_channel(1, stream(36, "li"))
        left = compose_channels_choi(comb_from_channels([ch]), comb_from_channels([identity_channel(1)]))
        assert_allclose(left.op, ch.choi_matrix(), atol=1e-12)

    def test_link_equals_composition(self):
        rng = stream(37, "lc")
        for _ in range(5):
            m, n = random_channel(1, rng), random_channel(1, rng)
            linked = compose_channels_choi(comb_from_channels([m]), comb_from_channels([n]))
            comp = ChannelRep(1, 1, kraus=[k2 @ k1 for k1 in m.kraus_list() for k2 in n.kraus_list()])
            assert np.linalg.norm(linked.op - comp.choi_matrix()) <= 1e-10
            assert linked.validity()["ok"]

    def test_associativity(self):
        rng = stream(38, "assoc")
        a, b, c = (comb_from_channels([random_channel(1, rng)]) for _ in range(3))
        left = compose_channels_choi(compose_channels_choi(a, b), c)
        right = compose_channels_choi(a, compose_channels_choi(b, c))
        assert np.linalg.norm(left.op - right.op) <= 1e-10

    def test_incompatible_wiring(self):
        one = comb_from_channels([random_channel(1, stream(39, "iw"))])
        two = comb_from_channels([random_channel(2, stream(39, "iw2"))])
        with pytest.raises(ValueError):
            link_product(one, two, wiring={"B1": "A1"})


class TestTimeLocalTwirl:
    def test_identity_comb_point_mass(self):
        comb = comb_from_channels([identity_channel(1), identity_channel(1)])
        q = time_local_twirl(comb)
        assert q[0] == pytest.approx(1.0, abs=1e-12)
        assert np.abs(q[1:]).max() <= 1e-12
        samples, _ = time_local_twirl_sample(comb, stream(40, "tid"), k=100)
        assert (samples == 0).all()

    def test_product_of_pauli_channels(self):
        rng = stream(41, "tp")
        p, q = random_error_rates(1, rng), random_error_rates(1, rng)
        comb = comb_from_channels([pauli_channel(p), pauli_channel(q)])
        joint = time_local_twirl(comb)
        assert np.abs(joint - np.kron(p.p, q.p)).max() <= 1e-10

    def test_sampled_frequencies_converge(self):
        rng = stream(42, "freq")
        p, q = random_error_rates(1, rng), random_error_rates(1, rng)
        comb = comb_from_channels([pauli_channel(p), pauli_channel(q)])
        samples, exact = time_local_twirl_sample(comb, rng, k=100_000)
        emp = np.bincount(samples, minlength=16) / samples.size
        assert 0.5 * np.abs(emp - exact).sum() <= 0.02

    def test_exact_vector_sums_to_one(self):
        rng = stream(43, "sum1")
        comb = comb_from_channels([random_channel(1, rng), random_channel(1, rng)])
        assert abs(time_local_twirl(comb).sum() - 1.0) <= 1e-9

    def test_non_square_rejected(self):
        k0 = np.array([[1, 0, 0, 0], [0, 0, 1, 0]], dtype=complex)
        k1 = np.array([[0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
        comb = comb_from_channels([ChannelRep(2, 1, kraus=[k0, k1])])
        with pytest.raises(ValueError):
            time_local_twirl(comb)

    def test_twirled_comb_is_fixed_point(self):
        rng = stream(44, "tf")
        comb = comb_from_channels([random_channel(1, rng), random_channel(1, rng)])
        tw = twirled_comb(comb)
        assert tw.validity()["ok"]
        assert np.linalg.norm(twirled_comb(tw).op - tw.op) <= 1e-10


class TestTesters:
    def test_product_tester_value(self):
        rng = stream(45, "pt")
        p, q = random_error_rates(1, rng), random_error_rates(1, rng)
        comb = comb_from_channels([pauli_channel(p), pauli_channel(q)])
        states = [random_pure_state(2, rng) for _ in range(2)]
        effects = [random_effect(2, rng) for _ in range(2)]
        tester = tester_product(states, effects)
        from chanlearn.channels import born_value, product_test

        expected = born_value(product_test(states[0], effects[0]), pauli_channel(p))
        expected *= born_value(product_test(states[1], effects[1]), pauli_channel(q))
        assert abs(tester_value(tester, comb) - expected) <= 1e-10

    def test_product_tester_certificate(self):
        rng = stream(46, "cert")
        tester = tester_product([random_density(2, rng)] * 2, [random_effect(2, rng)] * 2)
        rep = check_costrategy(tester.certificate, tester.in_dims, tester.out_dims)
        assert rep["ok"]

    def test_sequential_tester_matches_simulation(self):
        rng = stream(47, "seq")
        for _ in range(5):
            s1 = random_memory_step(1, 2, 2, 2, rng)
            s2 = random_memory_step(2, 2, 1, 2, rng)
            comb = comb_from_channels([s1, s2])
            dims = {"mem": [2, 2], "in": [2, 2], "out": [2, 2]}
            rho = random_density(4, rng)
            fk = [random_channel(2, rng).kraus_list()]
            effect = random_effect(4, rng)
            tester = tester_sequential(rho, fk, effect, dims)
            sim = simulate_sequential_tester(rho, fk, effect, dims, [s1, s2])
            assert abs(tester_value(tester, comb) - sim) <= 1e-10

    def test_sequential_tester_certificate(self):
        rng = stream(48, "seqc")
        dims = {"mem": [2, 2], "in": [2, 2], "out": [2, 2]}
        tester = tester_sequential(random_density(4, rng), [random_channel(2, rng).kraus_list()],
                                   random_effect(4, rng), dims)
        rep = check_costrategy(tester.certificate, tester.in_dims, tester.out_dims)
        assert rep["ok"]


class TestStrategyNormSmoke:
    def test_l1_subadditivity_on_tensor_differences(self):
        rng = stream(49, "sub")
        for _ in range(50):
            p, pp = random_error_rates(1, rng).p, random_error_rates(1, rng).p
            q, qq = random_error_rates(1, rng).p, random_error_rates(1, rng).p
            lhs = np.abs(np.kron(p, pp) - np.kron(q, qq)).sum()
            rhs = np.abs(p - q).sum() + np.abs(pp - qq).sum()
            assert lhs <= rhs + 1e-12


class TestCombSerialization:
    def test_roundtrip(self, tmp_path):
        rng = stream(50, "ser")
        comb = comb_from_channels([random_channel(1, rng), random_channel(1, rng)])
        path = tmp_path / "comb.json"
        serialize.dump(comb_to_obj(comb), path)
        back = comb_from_obj(serialize.load(path))
        assert back.in_dims == comb.in_dims and back.out_dims == comb.out_dims
        assert np.linalg.norm(back.op - comb.op) < 1e-12
