import dataclasses

import numpy as np
import pytest
import torch

from memreservoir import (
    DiagnosticError,
    DynamicsScalars,
    EsnConfig,
    MarsConfig,
    MfEsnConfig,
    StructuralError,
    TimeSeriesBatch,
    esn_forward,
    filter_cascade,
    init_esn,
    init_mars,
    init_mf_esn,
    mars_forward,
    mars_forward_full,
    mars_forward_reference,
    mf_esn_forward,
    poison_padding,
    spectral_radius_estimate,
    synth_random_uniform,
    temporal_conv,
    zero_recurrence,
)


def max_rel(x, y, floor=1e-300):
    return float(((x - y).abs() / y.abs().clamp(min=floor)).max())


def ragged_batch(seed=0, batch=5, steps=40, channels=2, min_len=1):
    gen = np.random.default_rng(seed)
    values = torch.from_numpy(gen.uniform(0, 1, size=(batch, steps, channels)))
    raw = [steps, 1, steps // 2, steps - 3, 7][:batch]
    lengths = torch.tensor([max(v, min_len) for v in raw])
    for row in range(batch):
        values[row, lengths[row]:] = 0.0
    return TimeSeriesBatch(values=values, lengths=lengths)


class TestInit:
    def test_same_seed_bitwise_identical(self):
        cfg = MarsConfig(input_dim=3, hidden_dim=16, num_layers=2, seed=42)
        m1, m2 = init_mars(cfg), init_mars(cfg)
        assert torch.equal(m1.encoder.w_enc, m2.encoder.w_enc)
        for b1, b2 in zip(m1.blocks, m2.blocks):
            assert torch.equal(b1.w_in, b2.w_in)
            assert torch.equal(b1.bias, b2.bias)

    def test_adding_layers_preserves_earlier_streams(self):
        shallow = init_mars(MarsConfig(input_dim=3, hidden_dim=16, num_layers=2, seed=7))
        deep = init_mars(MarsConfig(input_dim=3, hidden_dim=16, num_layers=5, seed=7))
        assert torch.equal(shallow.encoder.w_enc, deep.encoder.w_enc)
        for b1, b2 in zip(shallow.blocks, deep.blocks):
            assert torch.equal(b1.w_in, b2.w_in)
            assert torch.equal(b1.bias, b2.bias)

    def test_zero_input_scaling_leaves_only_bias_response(self):
        cfg = MarsConfig(input_dim=2, hidden_dim=8, num_layers=1, input_scaling=0.0,
                         bias_scaling=0.3, seed=1)
        model = init_mars(cfg)
        assert torch.all(model.encoder.w_enc == 0)
        assert torch.all(model.blocks[0].w_in == 0)
        b1 = synth_random_uniform(3, 30, 2, seed=2)
        b2 = synth_random_uniform(3, 30, 2, seed=3)
        assert torch.equal(mars_forward(model, b1), mars_forward(model, b2))

    def test_coffee_row_config(self):
        # the tuned configuration used for the spectrographic two-class task
        cfg = MarsConfig(input_dim=1, hidden_dim=400, num_layers=3, input_scaling=0.1,
                         bias_scaling=0.1, gamma=1.0, delta=0.1, steepness=5.0, seed=0)
        model = init_mars(cfg)
        assert float(model.encoder.w_enc.abs().max()) <= 0.1
        assert float(model.blocks[0].bias.abs().max()) <= 0.1
        assert model.scalars == DynamicsScalars(gamma=1.0, delta=0.1)
        assert model.bounds.steepness == 5.0

    def test_invalid_dims_rejected(self):
        with pytest.raises(StructuralError):
            MarsConfig(input_dim=0, hidden_dim=4)
        with pytest.raises(StructuralError):
            MarsConfig(input_dim=1, hidden_dim=4, num_layers=0)
        with pytest.raises(StructuralError):
            MarsConfig(input_dim=1, hidden_dim=4, gamma=1.5)


class TestPipelineEquivalence:
    # the module's central oracle: the parallel pipeline must match the strict
    # per-step evaluation, layer by layer

    @pytest.mark.parametrize(
        "row",
        [
            dict(input_scaling=0.1, bias_scaling=0.1, gamma=1.0, delta=0.05, steepness=5.0),
            dict(input_scaling=0.1, bias_scaling=0.5, gamma=1.0, delta=0.1, steepness=6.0),
            dict(input_scaling=0.1, bias_scaling=0.2, gamma=1.0, delta=0.08, steepness=6.0),
            dict(input_scaling=0.1, bias_scaling=0.1, gamma=1.0, delta=0.5, steepness=1.0),
            dict(input_scaling=0.1, bias_scaling=0.1, gamma=1.0, delta=0.05, steepness=14.0),
        ],
    )
    def test_layerwise_match(self, row):
        cfg = MarsConfig(input_dim=3, hidden_dim=20, num_layers=3, seed=11, **row)
        model = init_mars(cfg)
        batch = synth_random_uniform(4, 70, 3, seed=5)
        fast = mars_forward_full(model, batch)
        slow = mars_forward_reference(model, batch)
        for left, right in zip(fast.layer_states, slow.layer_states):
            assert max_rel(left, right) < 1e-6
        assert fast.clamp_counts == slow.clamp_counts
        assert max_rel(fast.features, slow.features) < 1e-6

    def test_clamp_regime_still_matches(self):
        # saturating activations with a large step leave the positive regime;
        # both paths must apply the identical floor
        cfg = MarsConfig(input_dim=2, hidden_dim=12, num_layers=2, input_scaling=2.0,
                         bias_scaling=0.5, delta=0.5, steepness=6.0, seed=3)
        model = init_mars(cfg)
        batch = synth_random_uniform(3, 50, 2, seed=4)
        fast = mars_forward_full(model, batch)
        slow = mars_forward_reference(model, batch)
        assert fast.clamp_counts == slow.clamp_counts
        assert fast.clamp_counts[0] > 0
        for left, right in zip(fast.layer_states, slow.layer_states):
            assert max_rel(left, right) < 1e-6

    def test_single_layer_features_are_scan_last_state(self):
        cfg = MarsConfig(input_dim=2, hidden_dim=8, num_layers=1, seed=9)
        model = init_mars(cfg)
        batch = synth_random_uniform(3, 25, 2, seed=9)
        info = mars_forward_full(model, batch)
        assert torch.equal(info.features, info.layer_states[0][:, -1])


class TestForwardProperties:
    def test_constant_input_converges_to_rate_balance(self):
        from memreservoir import fixed_point, rescale

        cfg = MarsConfig(input_dim=1, hidden_dim=12, num_layers=1, gamma=1.0, delta=0.05,
                         steepness=5.0, seed=2)
        model = init_mars(cfg)
        steps = 4000
        batch = TimeSeriesBatch(
            values=torch.full((1, steps, 1), 0.8, dtype=torch.float64),
            lengths=torch.tensor([steps]),
        )
        features = mars_forward(model, batch)
        u = model.encoder.w_enc * 0.8
        z = rescale(model.blocks[0].w_in @ u + model.blocks[0].bias.unsqueeze(-1),
                    model.bounds).squeeze(-1)
        target = fixed_point(z)
        assert float((features[0] - target).abs().max()) < 1e-6

    def test_delta_zero_skip_identity(self):
        # a block with delta=0 contributes nothing: h = 0 and the carried
        # signal passes through unchanged, so features depend only on layer 1
        base = MarsConfig(input_dim=2, hidden_dim=8, num_layers=1, delta=0.0, seed=4)
        model = init_mars(base)
        batch = synth_random_uniform(3, 30, 2, seed=6)
        info = mars_forward_full(model, batch)
        assert torch.all(info.layer_states[0] == 0)
        deep = init_mars(dataclasses.replace(base, num_layers=4))
        deep_info = mars_forward_full(deep, batch)
        assert torch.all(deep_info.features == 0)
        assert all(int((s != 0).sum()) == 0 for s in deep_info.layer_states)

    def test_batch_permutation_equivariance(self):
        cfg = MarsConfig(input_dim=3, hidden_dim=10, num_layers=2, seed=8)
        model = init_mars(cfg)
        batch = ragged_batch(seed=3, batch=5, steps=30, channels=3)
        perm = torch.tensor([4, 2, 0, 3, 1])
        permuted = TimeSeriesBatch(values=batch.values[perm], lengths=batch.lengths[perm])
        f1 = mars_forward(model, batch)
        f2 = mars_forward(model, permuted)
        assert torch.equal(f1[perm], f2)

    def test_hidden_state_range_in_positive_regime(self):
        cfg = MarsConfig(input_dim=2, hidden_dim=16, num_layers=3, gamma=1.0, delta=0.05,
                         steepness=5.0, seed=5)
        model = init_mars(cfg)
        batch = synth_random_uniform(4, 60, 2, seed=7)
        info = mars_forward_full(model, batch)
        assert sum(info.clamp_counts) == 0
        for state in info.layer_states:
            assert float(state.min()) >= 0.0
            assert float(state.max()) <= 1.0

    def test_determinism_across_runs(self):
        cfg = MarsConfig(input_dim=2, hidden_dim=8, num_layers=2, seed=12)
        batch = synth_random_uniform(3, 40, 2, seed=13)
        f1 = mars_forward(init_mars(cfg), batch)
        f2 = mars_forward(init_mars(cfg), batch)
        assert torch.equal(f1, f2)

    def test_padding_never_read(self):
        cfg = MarsConfig(input_dim=2, hidden_dim=8, num_layers=3, seed=14)
        model = init_mars(cfg)
        batch = ragged_batch(seed=8, batch=5, steps=40, channels=2)
        clean = mars_forward(model, batch)
        poisoned = poison_padding(batch)
        dirty = mars_forward(model, poisoned)
        assert not bool(torch.isnan(dirty).any())
        assert torch.equal(clean, dirty)

    def test_nan_in_valid_region_raises_named_layer(self):
        cfg = MarsConfig(input_dim=1, hidden_dim=4, num_layers=2, seed=15)
        model = init_mars(cfg)
        values = torch.zeros(1, 10, 1, dtype=torch.float64)
        values[0, 3, 0] = torch.nan
        batch = TimeSeriesBatch(values=values, lengths=torch.tensor([10]), validate=False)
        with pytest.raises(DiagnosticError, match="block 0"):
            mars_forward(model, batch)

    def test_channel_mismatch_rejected(self):
        cfg = MarsConfig(input_dim=3, hidden_dim=8, seed=0)
        model = init_mars(cfg)
        with pytest.raises(StructuralError):
            mars_forward(model, synth_random_uniform(2, 10, 2, seed=0))


class TestTemporalConv:
    def _front(self, kernels):
        from memreservoir import EncoderParams

        return EncoderParams(w_enc=torch.zeros(1, 1), tc_kernels=kernels)

    def test_delta_kernel_is_identity(self):
        kernels = torch.zeros(1, 1, 7, dtype=torch.float64)
        kernels[0, 0, 3] = 1.0
        batch = synth_random_uniform(2, 20, 1, seed=1)
        out = temporal_conv(self._front(kernels), batch)
        assert torch.allclose(out.values, batch.values)

    def test_all_ones_kernel_on_constant_input(self):
        kernels = torch.ones(1, 1, 5, dtype=torch.float64)
        batch = TimeSeriesBatch(
            values=torch.ones(1, 12, 1, dtype=torch.float64), lengths=torch.tensor([12])
        )
        out = temporal_conv(self._front(kernels), batch).values[0, :, 0]
        assert torch.all(out[2:-2] == 5.0)  # interior: constant * kernel size
        assert out[0] == 3.0 and out[1] == 4.0  # zero padding at the edges
        assert out[-1] == 3.0 and out[-2] == 4.0

    def test_twenty_channels_regardless_of_input_dim(self):
        for channels in (1, 3, 12):
            cfg = MarsConfig(input_dim=channels, hidden_dim=8, num_layers=1,
                             tc_enabled=True, seed=2)
            model = init_mars(cfg)
            batch = synth_random_uniform(2, 30, channels, seed=3)
            out = temporal_conv(model.encoder, batch)
            assert out.channels == 20
            assert out.max_time == 30
            # the full pipeline accepts the same batch
            assert mars_forward(model, batch).shape == (2, 8)

    def test_kernel_longer_than_sequence_rejected(self):
        kernels = torch.zeros(1, 1, 9, dtype=torch.float64)
        kernels[0, 0, 4] = 1.0
        batch = TimeSeriesBatch(
            values=torch.ones(1, 5, 1, dtype=torch.float64), lengths=torch.tensor([5])
        )
        with pytest.raises(StructuralError):
            temporal_conv(self._front(kernels), batch)

    def test_tc_padding_stays_zero(self):
        cfg = MarsConfig(input_dim=2, hidden_dim=8, num_layers=1, tc_enabled=True, seed=4)
        model = init_mars(cfg)
        batch = ragged_batch(seed=9, batch=5, steps=40, channels=2, min_len=8)
        out = temporal_conv(model.encoder, batch)
        for row in range(out.batch_size):
            assert torch.all(out.values[row, int(out.lengths[row]):] == 0)

    def test_tc_pipeline_matches_sequential_reference(self):
        cfg = MarsConfig(input_dim=2, hidden_dim=10, num_layers=2, tc_enabled=True, seed=5)
        model = init_mars(cfg)
        batch = synth_random_uniform(3, 40, 2, seed=6)
        fast = mars_forward_full(model, batch)
        slow = mars_forward_reference(model, batch)
        for left, right in zip(fast.layer_states, slow.layer_states):
            assert max_rel(left, right) < 1e-6


class TestMfEsn:
    def test_zero_recurrence_matches_single_block_pipeline(self):
        cfg = MarsConfig(input_dim=3, hidden_dim=16, num_layers=1, delta=0.1,
                         steepness=6.0, seed=5)
        mars = init_mars(cfg)
        base = init_mf_esn(MfEsnConfig(input_dim=3, hidden_dim=16, delta=0.1,
                                       steepness=6.0, seed=5))
        # composed input map reproduces encoder followed by the block's affine map
        model = dataclasses.replace(
            zero_recurrence(base),
            w_x=mars.blocks[0].w_in @ mars.encoder.w_enc,
            bias=mars.blocks[0].bias,
        )
        batch = synth_random_uniform(4, 80, 3, seed=11)
        feats, seq = mf_esn_forward(model, batch, collect=True)
        info = mars_forward_full(mars, batch)
        assert max_rel(seq, info.layer_states[0]) < 1e-6
        assert max_rel(feats, info.features) < 1e-6

    def test_delta_zero_keeps_state_at_origin(self):
        model = init_mf_esn(MfEsnConfig(input_dim=2, hidden_dim=8, delta=0.0, seed=1))
        batch = synth_random_uniform(2, 15, 2, seed=2)
        feats = mf_esn_forward(model, batch)
        assert torch.all(feats == 0)

    def test_one_step_from_origin_is_delta_kp(self):
        from memreservoir import potentiation_rate, rescale

        model = init_mf_esn(MfEsnConfig(input_dim=2, hidden_dim=8, delta=0.07, seed=3))
        values = torch.from_numpy(np.random.default_rng(4).uniform(0, 1, size=(2, 1, 2)))
        batch = TimeSeriesBatch(values=values, lengths=torch.tensor([1, 1]))
        feats = mf_esn_forward(model, batch)
        z = rescale(values[:, 0] @ model.w_x.T + model.bias, model.bounds)
        expected = 0.07 * potentiation_rate(z)
        assert torch.allclose(feats, expected)

    def test_recurrent_matrix_changes_dynamics(self):
        config = MfEsnConfig(input_dim=2, hidden_dim=8, spectral_radius=0.8, seed=6)
        full = init_mf_esn(config)
        batch = synth_random_uniform(2, 30, 2, seed=7)
        with_rec = mf_esn_forward(full, batch)
        without = mf_esn_forward(zero_recurrence(full), batch)
        assert not torch.allclose(with_rec, without)


class TestEsn:
    def test_memoryless_when_leak_one_and_no_recurrence(self):
        model = init_esn(EsnConfig(input_dim=2, hidden_dim=8, leak=1.0, bias_scaling=0.0,
                                   spectral_radius=0.9, seed=1))
        model = dataclasses.replace(model, w_h=torch.zeros_like(model.w_h),
                                    bias=torch.zeros_like(model.bias))
        batch = ragged_batch(seed=2, batch=4, steps=20, channels=2)
        feats = esn_forward(model, batch)
        for row in range(4):
            t = int(batch.lengths[row]) - 1
            expected = torch.tanh(batch.values[row, t] @ model.w_x.T)
            assert torch.allclose(feats[row], expected)

    def test_zero_input_zero_bias_stays_at_origin(self):
        model = init_esn(EsnConfig(input_dim=2, hidden_dim=8, bias_scaling=0.0, seed=3))
        batch = TimeSeriesBatch(
            values=torch.zeros(2, 25, 2, dtype=torch.float64),
            lengths=torch.tensor([25, 25]),
        )
        assert torch.all(esn_forward(model, batch) == 0)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_scaled_radius_within_one_percent_of_eigvals(self, seed):
        model = init_esn(EsnConfig(input_dim=2, hidden_dim=64, spectral_radius=0.87, seed=seed))
        # independent oracle: dense eigenvalue solve
        eig = float(np.abs(np.linalg.eigvals(model.w_h.numpy())).max())
        assert abs(eig - 0.87) / 0.87 < 0.01

    def test_estimator_against_known_spectrum(self):
        gen = np.random.default_rng(5)
        q, _ = np.linalg.qr(gen.normal(size=(12, 12)))
        eigs = np.linspace(0.1, 1.7, 12)
        w = torch.from_numpy(q @ np.diag(eigs) @ q.T)
        assert spectral_radius_estimate(w) == pytest.approx(1.7, rel=1e-6)

    def test_config_accepted_directly(self):
        batch = synth_random_uniform(2, 10, 2, seed=6)
        feats = esn_forward(EsnConfig(input_dim=2, hidden_dim=8, seed=7), batch)
        assert feats.shape == (2, 8)


class TestConcurrency:
    def test_forward_passes_safe_across_threads(self):
        from concurrent.futures import ThreadPoolExecutor

        cfg = MarsConfig(input_dim=2, hidden_dim=12, num_layers=2, seed=21)
        model = init_mars(cfg)
        batch = synth_random_uniform(4, 50, 2, seed=22)
        reference = mars_forward(model, batch)
        with ThreadPoolExecutor(max_workers=4) as pool:
            results = list(pool.map(lambda _: mars_forward(model, batch), range(8)))
        for out in results:
            assert torch.equal(out, reference)


class TestFilterCascade:
    def test_output_lengths_and_shapes(self):
        signal = torch.sin(torch.linspace(0, 12.0, 256, dtype=torch.float64))
        carried, hiddens = filter_cascade(signal, 3, DynamicsScalars(gamma=1.0, delta=0.05))
        assert len(carried) == 4 and len(hiddens) == 3
        assert all(c.shape == signal.shape for c in carried)

    def test_single_layer_output_is_input_minus_hidden(self):
        signal = torch.sin(torch.linspace(0, 12.0, 128, dtype=torch.float64))
        carried, hiddens = filter_cascade(signal, 1, DynamicsScalars(gamma=1.0, delta=0.05))
        assert torch.allclose(carried[1], signal - hiddens[0])
