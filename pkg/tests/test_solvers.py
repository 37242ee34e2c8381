import math

import numpy as np
import pytest

from pimi_lab.core import (
    ConfigError,
    IsingInstance,
    Schedule,
    ScheduleKind,
    energy,
)
from pimi_lab.instances import Family, GeneratorSpec, gen_maxcut, gen_sk1
from pimi_lab.solvers import (
    NoiseDist,
    NoiseSource,
    Quantization,
    SolverKind,
    default_noise_distribution,
    default_schedule_params,
    derive_trial_seed,
    make_schedule,
    run_batch,
    run_trial,
    schedule_for_solver,
    step_conv_parallel,
    step_conv_sequential,
    step_pimi,
    trial_setup,
)


def ferromagnet2():
    return IsingInstance(2, np.array([[0.0, 1.0], [1.0, 0.0]]), np.zeros(2), "ferro2")


def antiferromagnet2():
    return IsingInstance(2, np.array([[0.0, -1.0], [-1.0, 0.0]]), np.zeros(2), "anti2")


def k3():
    a = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=float)
    return IsingInstance(3, -a, np.zeros(3), "k3", field_scale=2.0 / math.sqrt(3))


def const_schedule(beta, eta, xi, t_steps, kind=ScheduleKind.CUSTOM):
    return Schedule(kind, np.full(t_steps, float(beta)),
                    np.full(t_steps, float(eta)), xi, t_steps)


def noiseless(seed=0, dist=NoiseDist.STD_NORMAL):
    return NoiseSource(seed, dist)


class TestSteps:
    def test_sequential_aligns_with_field(self):
        # beta -> inf limit: tanh saturates, spin follows its field sign
        inst = ferromagnet2()
        sched = const_schedule(1e6, 0.0, 0.0, 2)
        s = np.array([1.0, -1.0])
        out = step_conv_sequential(inst, s, 1, sched, noiseless())
        assert np.array_equal(out, [1.0, 1.0])  # only spin 1 changed

    def test_sequential_only_moves_one_spin(self):
        inst = k3()
        sched = const_schedule(0.5, 0.0, 0.0, 3)
        s = np.array([1.0, 1.0, 1.0])
        out = step_conv_sequential(inst, s, 2, sched, noiseless())
        changed = np.nonzero(out != s)[0]
        assert set(changed) <= {2}

    def test_sign_zero_is_plus_one(self):
        # eta = 0 and zero field: sign(tanh(0)) must resolve to +1
        inst = IsingInstance(2, np.zeros((2, 2)), np.zeros(2))
        sched = const_schedule(1.0, 0.0, 0.0, 2)
        s = np.array([-1.0, -1.0])
        out = step_conv_sequential(inst, s, 0, sched, noiseless())
        assert out[0] == 1.0
        out_par = step_conv_parallel(inst, s, 0, sched, noiseless())
        assert np.array_equal(out_par, [1.0, 1.0])

    def test_parallel_antiferromagnet_stable(self):
        inst = antiferromagnet2()
        sched = const_schedule(1e6, 0.0, 0.0, 1)
        s = np.array([1.0, -1.0])
        out = step_conv_parallel(inst, s, 0, sched, noiseless())
        assert np.array_equal(out, s)

    def test_parallel_ferromagnet_oscillates(self):
        # both spins chase each other: the coupled-oscillation pathology
        inst = ferromagnet2()
        sched = const_schedule(1e6, 0.0, 0.0, 1)
        s = np.array([1.0, -1.0])
        out = step_conv_parallel(inst, s, 0, sched, noiseless())
        assert np.array_equal(out, [-1.0, 1.0])

    def test_pimi_large_xi_freezes(self):
        inst = ferromagnet2()
        sched = const_schedule(5.0, 0.0, 2.0, 1)
        for s in ([1.0, -1.0], [-1.0, -1.0], [1.0, 1.0]):
            out = step_pimi(inst, np.array(s), 0, sched, noiseless())
            assert np.array_equal(out, s)

    def test_pimi_half_xi_two_spin(self):
        # xi = 0.5 does not freeze the 2-spin flip: direct evaluation gives (-1, +1)
        inst = ferromagnet2()
        sched = const_schedule(1e6, 0.0, 0.5, 1)
        out = step_pimi(inst, np.array([1.0, -1.0]), 0, sched, noiseless())
        assert np.array_equal(out, [-1.0, 1.0])

    def test_parallel_reads_pre_step_state(self):
        # double-buffered reference: fields must come from the old state only
        rng = np.random.default_rng(0)
        inst = gen_sk1(GeneratorSpec(Family.SK_ONE, 9, 3))
        sched = const_schedule(0.8, 0.0, 0.3, 1)
        s = rng.integers(0, 2, 9) * 2.0 - 1.0
        out = step_pimi(inst, s, 0, sched, noiseless())
        expected = np.empty(9)
        for i in range(9):
            field = inst.field_scale * (inst.j[i] @ s) + inst.h[i]
            z = math.tanh(sched.beta[0] * field) + sched.xi * s[i]
            expected[i] = 1.0 if z >= 0 else -1.0
        assert np.array_equal(out, expected)


class TestOscillationWitness:
    def test_period_two_versus_fixed_point(self):
        inst = ferromagnet2()
        sched = const_schedule(1e6, 0.0, 0.0, 6)
        s = np.array([1.0, -1.0])
        seen = [s]
        for t in range(6):
            s = step_conv_parallel(inst, s, t, sched, noiseless())
            seen.append(s.copy())
        for k in range(len(seen) - 2):
            assert np.array_equal(seen[k], seen[k + 2])
            assert not np.array_equal(seen[k], seen[k + 1])

        sched_i = const_schedule(1e6, 0.0, 1.0, 6)
        s = np.array([1.0, -1.0])
        s1 = step_pimi(inst, s, 0, sched_i, noiseless())
        s2 = step_pimi(inst, s1, 1, sched_i, noiseless())
        assert np.array_equal(s1, s2)  # fixed point within one step


class TestRunTrial:
    def test_deterministic(self):
        inst = k3()
        sched = make_schedule(ScheduleKind.PIMI_BENCH,
                              default_schedule_params(ScheduleKind.PIMI_BENCH, "maxcut", 3),
                              50)
        init, _ = trial_setup(3, 7, NoiseDist.STD_NORMAL)
        a = run_trial(inst, SolverKind.PIMI, sched, init, NoiseSource(9), record_trajectory=True)
        b = run_trial(inst, SolverKind.PIMI, sched, init, NoiseSource(9), record_trajectory=True)
        assert a.best_energy == b.best_energy
        assert a.best_step == b.best_step
        assert np.array_equal(a.final_spins, b.final_spins)
        assert np.array_equal(a.energy_trajectory, b.energy_trajectory)
        assert a.improvements == b.improvements

    def test_single_step_is_one_sweep(self):
        inst = ferromagnet2()
        sched = const_schedule(1e6, 0.0, 0.0, 1)
        rec = run_trial(inst, SolverKind.CONV_PARALLEL, sched,
                        np.array([1.0, -1.0]), noiseless(), record_states=True)
        assert rec.state_trajectory.shape == (2, 2)
        assert rec.best_step == 0

    def test_trajectory_semantics(self):
        inst = k3()
        sched = const_schedule(0.7, 0.2, 0.5, 40)
        init, ns = trial_setup(3, 11, NoiseDist.STD_NORMAL)
        rec = run_trial(inst, SolverKind.PIMI, sched, init, ns,
                        record_trajectory=True, record_states=True)
        # trajectory[k] is the energy of the state after update step k
        for k in range(sched.t_steps):
            assert rec.energy_trajectory[k] == pytest.approx(
                energy(inst, rec.state_trajectory[k + 1].astype(float)), abs=1e-9)
        assert rec.best_energy == rec.energy_trajectory.min()
        assert rec.best_step == int(np.argmin(rec.energy_trajectory))
        assert rec.best_step < sched.t_steps
        assert np.array_equal(rec.final_spins, rec.state_trajectory[-1].astype(float))

    def test_sequential_sweep_accounting(self):
        # after N sequential steps each index was touched exactly once, in order
        inst = gen_sk1(GeneratorSpec(Family.SK_ONE, 6, 1))
        sched = const_schedule(0.4, 0.5, 0.0, 6)
        init, ns = trial_setup(6, 3, NoiseDist.UNIFORM_PM1)
        rec = run_trial(inst, SolverKind.CONV_SEQUENTIAL, sched, init, ns,
                        record_states=True)
        states = rec.state_trajectory.astype(float)
        for t in range(6):
            changed = np.nonzero(states[t + 1] != states[t])[0]
            assert set(changed) <= {t % 6}

    def test_xi_dominance_freeze(self):
        # xi just above 1 with eta = 0: |tanh| <= 1 can never flip any spin
        rng = np.random.default_rng(5)
        for seed in range(3):
            inst = gen_sk1(GeneratorSpec(Family.SK_ONE, 12, seed))
            sched = const_schedule(2.0, 0.0, 1.01, 1000)
            init = rng.integers(0, 2, 12) * 2.0 - 1.0
            rec = run_trial(inst, SolverKind.PIMI, sched, init, noiseless(seed),
                            record_states=True)
            assert np.all(rec.state_trajectory == rec.state_trajectory[0])

    def test_pimi_xi0_uniform_degenerates_to_conv_parallel(self):
        inst = gen_sk1(GeneratorSpec(Family.SK_ONE, 10, 2))
        sched = const_schedule(0.6, 0.8, 0.0, 120)
        init, _ = trial_setup(10, 21, NoiseDist.UNIFORM_PM1)
        a = run_trial(inst, SolverKind.PIMI, sched, init,
                      NoiseSource(33, NoiseDist.UNIFORM_PM1), record_states=True)
        b = run_trial(inst, SolverKind.CONV_PARALLEL, sched, init,
                      NoiseSource(33, NoiseDist.UNIFORM_PM1), record_states=True)
        assert np.array_equal(a.state_trajectory, b.state_trajectory)

    def test_k3_pimi_reaches_ground(self):
        inst = k3()
        params = default_schedule_params(ScheduleKind.PIMI_BENCH, "maxcut", 3)
        sched = make_schedule(ScheduleKind.PIMI_BENCH, params, 300)
        hits = 0
        for trial in range(256):
            seed = derive_trial_seed(100, 0, trial)
            init, ns = trial_setup(3, seed, NoiseDist.STD_NORMAL)
            rec = run_trial(inst, SolverKind.PIMI, sched, init, ns, seed=seed)
            hits += rec.best_energy <= -1.0
        assert hits >= 250

    def test_default_noise_distributions(self):
        assert default_noise_distribution(SolverKind.PIMI) is NoiseDist.STD_NORMAL
        assert default_noise_distribution(SolverKind.CONV_SEQUENTIAL) is NoiseDist.UNIFORM_PM1
        assert default_noise_distribution(SolverKind.CONV_PARALLEL) is NoiseDist.UNIFORM_PM1


class TestNoiseSource:
    def test_same_seed_same_stream(self):
        a = NoiseSource(5).block((100,))
        b = NoiseSource(5).block((100,))
        assert np.array_equal(a, b)

    def test_pregenerated_cycles(self):
        ns = NoiseSource(5, NoiseDist.STD_NORMAL, table_len=16)
        first = ns.block((16,))
        again = ns.block((16,))
        assert np.array_equal(first, again)

    def test_pregenerated_same_seed_same_stream(self):
        a = NoiseSource(5, NoiseDist.UNIFORM_PM1, table_len=32).block((50,))
        b = NoiseSource(5, NoiseDist.UNIFORM_PM1, table_len=32).block((50,))
        assert np.array_equal(a, b)

    def test_uniform_range(self):
        draws = NoiseSource(1, NoiseDist.UNIFORM_PM1).block((2000,))
        assert draws.min() >= -1.0 and draws.max() <= 1.0
        assert abs(draws.mean()) < 0.1

    def test_pregenerated_mode_through_batch(self):
        # the table mode mirrors pre-loaded hardware noise: deterministic,
        # and generally a different stream than on-the-fly draws
        inst = gen_sk1(GeneratorSpec(Family.SK_ONE, 8, 3))
        sched = schedule_for_solver(SolverKind.PIMI, "sk1", 8, 50)
        a = run_batch([inst], SolverKind.PIMI, sched, 4, base_seed=2,
                      noise_table_len=64)[0]
        b = run_batch([inst], SolverKind.PIMI, sched, 4, base_seed=2,
                      noise_table_len=64)[0]
        for x, y in zip(a, b):
            assert np.array_equal(x.final_spins, y.final_spins)
            assert x.improvements == y.improvements


class TestSchedules:
    def test_conv_mimo_eta_example(self):
        sched = make_schedule(ScheduleKind.CONV_MIMO, {"beta_scale": 1.0}, 10)
        assert sched.eta[4] == pytest.approx(1.0)
        assert sched.beta[0] == 1.0
        assert sched.xi == 0.0

    def test_pimi_bench_beta_monotone(self):
        params = {"beta_scale": 2.0, "beta_init": 0.1, "delta_beta": 0.01, "xi": 0.7}
        sched = make_schedule(ScheduleKind.PIMI_BENCH, params, 500)
        assert np.all(np.diff(sched.beta) >= 0)
        assert np.allclose(sched.eta, np.sqrt(sched.beta / 5.0))

    def test_pimi_mimo_degenerate_ramp(self):
        params = {"beta_scale": 1.0, "gamma_init": 1.5, "gamma_final": 1.5, "xi": 2.0}
        sched = make_schedule(ScheduleKind.PIMI_MIMO, params, 8)
        assert np.all(sched.eta == sched.eta[0])
        assert sched.eta[0] == pytest.approx(math.sqrt(1.0 / 7.5))

    def test_missing_and_invalid_params_rejected(self):
        with pytest.raises(ConfigError):
            make_schedule(ScheduleKind.PIMI_BENCH, {"beta_scale": 2.0}, 10)
        with pytest.raises(ConfigError):
            make_schedule(ScheduleKind.CONV_BENCH,
                          {"beta_scale": -1.0, "eta_scale": 1.0, "eta_floor": 0.0}, 10)
        with pytest.raises(ConfigError):
            make_schedule(ScheduleKind.PIMI_MIMO,
                          {"beta_scale": 1.0, "gamma_init": 0.0, "gamma_final": 1.0,
                           "xi": 2.0}, 10)

    def test_schedule_for_solver_families(self):
        s = schedule_for_solver(SolverKind.PIMI, "sk1", 20, 100)
        assert s.kind is ScheduleKind.PIMI_BENCH
        assert s.xi == 0.5
        s = schedule_for_solver(SolverKind.PIMI, "maxcut", 20, 100)
        assert s.xi == 0.7
        s = schedule_for_solver(SolverKind.CONV_SEQUENTIAL, "maxcut", 20, 100)
        assert s.kind is ScheduleKind.CONV_BENCH
        assert s.beta[0] == pytest.approx(0.2)
        s = schedule_for_solver(SolverKind.PIMI, "mimo", 32, 32)
        assert s.kind is ScheduleKind.PIMI_MIMO
        assert s.xi == 2.0
        s = schedule_for_solver(SolverKind.CONV_PARALLEL, "mimo", 32, 32)
        assert s.kind is ScheduleKind.CONV_MIMO


class TestRunBatch:
    def test_workers_equivalence(self):
        instances = [gen_sk1(GeneratorSpec(Family.SK_ONE, 8, s)) for s in range(3)]
        sched = schedule_for_solver(SolverKind.PIMI, "sk1", 8, 60)
        one = run_batch(instances, SolverKind.PIMI, sched, 10, base_seed=4, workers=1)
        eight = run_batch(instances, SolverKind.PIMI, sched, 10, base_seed=4, workers=8)
        assert len(one) == len(eight) == 3
        for recs1, recs8 in zip(one, eight):
            for a, b in zip(recs1, recs8):
                assert a.best_energy == b.best_energy
                assert a.seed == b.seed
                assert np.array_equal(a.final_spins, b.final_spins)
                assert a.improvements == b.improvements

    def test_empty_instances(self):
        sched = const_schedule(1.0, 0.1, 0.0, 5)
        assert run_batch([], SolverKind.PIMI, sched, 4, base_seed=0) == []

    def test_result_ordering_and_seeds(self):
        instances = [gen_sk1(GeneratorSpec(Family.SK_ONE, 6, s)) for s in range(2)]
        sched = schedule_for_solver(SolverKind.CONV_SEQUENTIAL, "sk1", 6, 30)
        out = run_batch(instances, SolverKind.CONV_SEQUENTIAL, sched, 5, base_seed=9)
        for i_idx, recs in enumerate(out):
            assert len(recs) == 5
            for t_idx, rec in enumerate(recs):
                assert rec.seed == derive_trial_seed(9, i_idx, t_idx)

    @pytest.mark.parametrize("kind", [SolverKind.PIMI, SolverKind.CONV_PARALLEL,
                                      SolverKind.CONV_SEQUENTIAL])
    def test_block_engine_matches_reference_on_integer_couplings(self, kind):
        # integer-valued benchmark couplings make every field accumulation
        # exact, so the grouped engine must agree with the per-trial engine
        # bit for bit even in full precision
        from pimi_lab.solvers import default_noise_distribution
        inst = gen_sk1(GeneratorSpec(Family.SK_ONE, 11, 6))
        sched = schedule_for_solver(kind, "sk1", 11, 150)
        batch = run_batch([inst], kind, sched, 10, base_seed=8,
                          record_trajectory=True)[0]
        for t_idx, rec in enumerate(batch):
            seed = derive_trial_seed(8, 0, t_idx)
            init, ns = trial_setup(11, seed, default_noise_distribution(kind))
            ref = run_trial(inst, kind, sched, init, ns,
                            record_trajectory=True, seed=seed)
            assert np.array_equal(rec.final_spins, ref.final_spins)
            assert np.array_equal(rec.energy_trajectory, ref.energy_trajectory)
            assert rec.improvements == ref.improvements

    @pytest.mark.parametrize("kind", [SolverKind.PIMI, SolverKind.CONV_PARALLEL,
                                      SolverKind.CONV_SEQUENTIAL])
    def test_block_engine_matches_reference_quantized(self, kind):
        # quantized arithmetic is exact on the fixed-point grid, so the
        # grouped engine must agree bit-for-bit with the per-trial engine
        from pimi_lab.solvers import default_noise_distribution
        inst = gen_sk1(GeneratorSpec(Family.SK_ONE, 7, 5))
        sched = schedule_for_solver(kind, "sk1", 7, 40)
        quant = Quantization.parse("q16.4", 4)
        batch = run_batch([inst], kind, sched, 6, base_seed=2,
                          quantization=quant, record_trajectory=True)[0]
        for t_idx, rec in enumerate(batch):
            seed = derive_trial_seed(2, 0, t_idx)
            init, ns = trial_setup(7, seed, default_noise_distribution(kind))
            ref = run_trial(inst, kind, sched, init, ns,
                            record_trajectory=True, quantization=quant, seed=seed)
            assert np.array_equal(rec.final_spins, ref.final_spins)
            assert np.array_equal(rec.energy_trajectory, ref.energy_trajectory)

    def test_worker_error_propagates(self):
        inst = gen_sk1(GeneratorSpec(Family.SK_ONE, 6, 0))
        sched = const_schedule(1.0, 0.1, 0.0, 5)
        with pytest.raises(ConfigError):
            run_batch([inst], SolverKind.PIMI, sched, 0, base_seed=1)


# ---------------------------------------------------------------------------
# Independent straight-line interpreter of the quantized inertial update,
# written against the documented datapath only (scalar arithmetic, its own
# quantizer and LUT search).


def _sl_quant(x, total_bits, int_bits):
    step = 2.0 ** -(total_bits - int_bits)
    k = math.floor(abs(x) / step)
    v = math.copysign(k * step, x)
    lo = -(2.0 ** (int_bits - 1))
    hi = 2.0 ** (int_bits - 1) - step
    return min(max(v, lo), hi)


def _sl_lut_tanh(x, levels):
    outs = np.linspace(-1.0, 1.0, levels)
    breaks = np.linspace(-1.0, 1.0, levels + 1)
    if x < -1.0:
        return -1.0
    if x > 1.0:
        return 1.0
    for k in range(levels):
        if breaks[k] <= x < breaks[k + 1]:
            return float(outs[k])
    return float(outs[-1])


def straightline_pimi_quantized(inst, sched, init, draws, total_bits, int_bits, levels):
    """Scalar transcription of the parallel inertial update, fully quantized."""
    def q(x):
        return _sl_quant(x, total_bits, int_bits)

    n = inst.n
    jq = [[q(inst.j[i, k]) for k in range(n)] for i in range(n)]
    hq = [q(v) for v in inst.h]
    scale_q = q(inst.field_scale)
    beta_q = [q(v) for v in sched.beta]
    eta_q = [q(v) for v in sched.eta]
    xi_q = q(sched.xi)
    use_scale = inst.field_scale != 1.0
    use_bias = any(v != 0.0 for v in inst.h)

    s = [float(v) for v in init]
    states = [list(s)]
    for t in range(sched.t_steps):
        new = [0.0] * n
        for i in range(n):
            acc = 0.0
            for k in range(n):
                acc += q(jq[i][k] * s[k])
            f = q(acc)
            if use_scale:
                f = q(scale_q * f)
            if use_bias:
                f = q(f + hq[i])
            a = q(beta_q[t] * f)
            u = q(_sl_lut_tanh(a, levels))
            drive = q(u + q(xi_q * s[i]))
            w = q(eta_q[t] * q(float(draws[t, i])))
            z = q(drive + w)
            new[i] = 1.0 if z >= 0.0 else -1.0
        s = new
        states.append(list(s))
    return np.array(states)


class TestQuantizedTrace:
    def test_matches_straightline_interpreter(self):
        inst = gen_sk1(GeneratorSpec(Family.SK_ONE, 6, 8))
        sched = schedule_for_solver(SolverKind.PIMI, "sk1", 6, 30)
        quant = Quantization.parse("q4.2", 4)
        seed = derive_trial_seed(3, 0, 0)
        init, ns = trial_setup(6, seed, NoiseDist.STD_NORMAL)
        probe_init, probe_ns = trial_setup(6, seed, NoiseDist.STD_NORMAL)
        draws = probe_ns.block((30, 6))

        rec = run_trial(inst, SolverKind.PIMI, sched, init, ns,
                        record_states=True, quantization=quant)
        ref_states = straightline_pimi_quantized(inst, sched, probe_init, draws, 4, 2, 4)
        assert np.array_equal(rec.state_trajectory.astype(float), ref_states)

    def test_matches_straightline_q164(self):
        inst, _ = gen_maxcut(GeneratorSpec(Family.MAXCUT_ER, 8, 2))
        sched = schedule_for_solver(SolverKind.PIMI, "maxcut", 8, 25)
        quant = Quantization.parse("q16.4", 4)
        seed = derive_trial_seed(5, 0, 1)
        init, ns = trial_setup(8, seed, NoiseDist.STD_NORMAL)
        probe_init, probe_ns = trial_setup(8, seed, NoiseDist.STD_NORMAL)
        draws = probe_ns.block((25, 8))

        rec = run_trial(inst, SolverKind.PIMI, sched, init, ns,
                        record_states=True, quantization=quant)
        ref_states = straightline_pimi_quantized(inst, sched, probe_init, draws, 16, 4, 4)
        assert np.array_equal(rec.state_trajectory.astype(float), ref_states)
