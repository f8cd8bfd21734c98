import numpy as np
import pytest
from numpy.testing import assert_allclose

from chanlearn._rng import stream
from chanlearn.adversaries import (
    BudgetExhausted,
    MediatedChallenge,
    RealizableMixtureAdversary,
    RealizablePauliAdversary,
    UniformQueryLearner,
    all_zeros_game,
    certificate_realization,
    function_embedding_adversary,
    pauli_embedding_channel,
    pauli_lower_bound_challenges,
)
from chanlearn.channels import (
    ErrorRateVector,
    born_value,
    challenge_vector,
    gamma_stack,
    pauli_twirl,
    random_channel,
    random_error_rates,
)
from chanlearn.learners import MixtureBasis


class TestRealizable:
    def test_identity_channel_pure_probe(self):
        # hidden identity: any (psi, psi-projector) test passes with value 1
        rates = ErrorRateVector(1, [1.0, 0, 0, 0])
        adv = RealizablePauliAdversary(rates, epsilon=0.3, seed=5)
        for t in (1, 2, 3):
            e, truth, b = adv.challenge(t)
            assert abs(b - truth) <= 0.1 + 1e-12

    def test_feedback_band(self):
        rng = stream(80, "band")
        rates = random_error_rates(2, rng)
        adv = RealizablePauliAdversary(rates, epsilon=0.21, seed=81)
        for t in range(1, 600):
            _, truth, b = adv.challenge(t)
            assert abs(b - truth) <= 0.07 + 1e-12

    def test_deterministic_replay(self):
        rates = random_error_rates(1, stream(82, "rep"))
        a = RealizablePauliAdversary(rates, 0.3, seed=9)
        b = RealizablePauliAdversary(rates, 0.3, seed=9)
        for t in (1, 100, 513, 1025):
            ea, ta, fa = a.challenge(t)
            eb, tb, fb = b.challenge(t)
            assert_allclose(ea, eb)
            assert ta == tb and fa == fb

    def test_different_seeds_differ(self):
        rates = random_error_rates(1, stream(83, "df"))
        a = RealizablePauliAdversary(rates, 0.3, seed=1)
        b = RealizablePauliAdversary(rates, 0.3, seed=2)
        assert not np.allclose(a.challenge(1)[0], b.challenge(1)[0])

    def test_mixture_adversary_band_and_validity(self):
        rng = stream(84, "mix")
        basis = MixtureBasis.from_channels([random_channel(1, rng) for _ in range(3)])
        w = rng.dirichlet(np.ones(3))
        adv = RealizableMixtureAdversary(basis, w, epsilon=0.3, seed=85)
        for e, b, truth in adv.rounds(20):
            assert abs(b - truth) <= 0.1 + 1e-12
            assert e.min() >= -1e-10 and e.max() <= 1 + 1e-10


class TestPauliLowerBound:
    def test_all_zero_function(self):
        ch = pauli_embedding_channel(np.zeros(3, dtype=int))
        for test in pauli_lower_bound_challenges(3):
            assert born_value(test, ch) <= 1e-12

    def test_all_one_single_qubit(self):
        ch = pauli_embedding_channel(np.array([1]))
        (test,) = pauli_lower_bound_challenges(1)
        assert abs(born_value(test, ch) - 1.0) <= 1e-12

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_exact_readout_all_functions(self, n):
        tests = pauli_lower_bound_challenges(n)
        for fbits in range(2**n):
            f = np.array([(fbits >> (n - 1 - i)) & 1 for i in range(n)])
            ch = pauli_embedding_channel(f)
            for t, test in enumerate(tests):
                assert abs(born_value(test, ch) - f[t]) <= 1e-12

    def test_uniform_learner_mistake_frequency(self):
        # random f forces a mistake w.p. 1/2 per round against rounded uniform predictions
        n = 2
        rng = stream(86, "mc")
        tests = pauli_lower_bound_challenges(n)
        evec = [challenge_vector(t) for t in tests]
        uniform = np.full(4**n, 1 / 4**n)
        mistakes = trials = 0
        for _ in range(1000):
            f = rng.integers(0, 2, size=n)
            for t in range(n):
                pred = 1 if evec[t] @ uniform >= 0.5 else 0
                mistakes += int(pred != f[t])
                trials += 1
        assert abs(mistakes / trials - 0.5) <= 0.05


class TestFunctionEmbeddings:
    def test_parity_two_bits(self):
        parity = np.array([0, 1, 1, 0])
        for kind in ("unitary", "channel"):
            ch, rows = function_embedding_adversary(kind, parity)
            for x, test, val in rows:
                assert val == parity[x]
                assert abs(born_value(test, ch) - val) <= 1e-12

    def test_bit_flip_consistency(self):
        # measuring the oracle output at |f(x)> must give probability 1
        f = np.array([1, 0])
        ch, _ = function_embedding_adversary("unitary", f)
        d = 8
        for x in range(2):
            rho = np.zeros(d, dtype=complex)
            rho[x << 1] = 1.0
            meas = np.zeros(d, dtype=complex)
            meas[(x << 1) | int(f[x])] = 1.0
            from chanlearn.channels import product_test

            val = born_value(product_test(np.outer(rho, rho.conj()), np.outer(meas, meas.conj())), ch)
            assert abs(val - 1.0) <= 1e-12

    def test_embedded_channel_valid(self):
        f = np.array([1, 0, 1, 1])
        for kind in ("unitary", "channel"):
            ch, _ = function_embedding_adversary(kind, f)
            tp = sum(k.conj().T @ k for k in ch.kraus)
            assert np.linalg.norm(tp - np.eye(ch.d_in)) <= 1e-10

    def test_too_many_bits_rejected(self):
        with pytest.raises(ValueError):
            function_embedding_adversary("unitary", np.zeros(16, dtype=int))


class TestAllZerosGame:
    def test_forces_mistake_every_round(self):
        learner = UniformQueryLearner(16, 3, seed=1)
        mistakes, logs, cert = all_zeros_game(2, learner, rounds=5)
        assert mistakes == 5
        assert cert.verify()

    def test_certificate_vanishes_on_reads_exactly(self):
        learner = UniformQueryLearner(16, 3, seed=2)
        _, logs, cert = all_zeros_game(2, learner, rounds=5)
        for t, (bit, reads) in enumerate(cert.claims):
            v = cert.claimed_vector(t)
            assert all(v[i] == 0.0 for i in reads)
            assert float(cert.p_star @ v) == float(bit)
            assert np.count_nonzero(v) <= 1
        assert cert.p_star.sum() == 1.0 and cert.p_star.min() >= 0.0

    def test_budget_exhaustion(self):
        learner = UniformQueryLearner(16, 3, seed=3)
        with pytest.raises(BudgetExhausted):
            all_zeros_game(2, learner, rounds=6)   # 6*3 = 18 > 15 distinct reads

    def test_realization_is_indicator(self):
        learner = UniformQueryLearner(16, 3, seed=4)
        _, _, cert = all_zeros_game(2, learner, rounds=4)
        e_op = certificate_realization(cert, 2)
        got = np.real(np.einsum("ab,wba->w", e_op, gamma_stack(2)))
        want = np.zeros(16)
        want[cert.hidden_index] = 1.0
        assert_allclose(got, want, atol=1e-12)

    def test_mediated_challenge_logs_reads(self):
        ch = MediatedChallenge(np.zeros(7))
        ch.read(3)
        ch.read(3)
        ch.read(5)
        assert ch.reads == {3, 5}
        with pytest.raises(IndexError):
            ch.read(7)
