import math

import numpy as np
import pytest

from models.group_sparse import GenModelParams, generate_batch
from models.relu import (
    BuilderLimits,
    PwlFunction,
    ReluNetwork,
    build_double_triangle_deep,
    build_f,
    build_from_pwl,
    build_g,
    build_sawtooth,
    build_tent,
    build_trapezoid_shaper,
    build_zigzag,
    compose,
    deep_compositions,
    double_triangle_pwl,
    fanout,
    forward,
    from_json,
    pad_to_depth,
    parallel,
    stats,
    sum_networks,
    to_json,
    to_linear_final,
    with_input_affine,
)
from utils.validation import InvalidInputError


def abs_net():
    W1 = np.array([[1.0], [-1.0]])
    W2 = np.array([[1.0, 1.0]])
    return ReluNetwork(((W1, np.zeros(2)), (W2, np.zeros(1))))


class TestForward:
    def test_identity_relu_layer(self):
        net = ReluNetwork(((np.eye(2), np.zeros(2)),), final_layer_linear=False)
        assert np.array_equal(forward(net, [1.0, -1.0]), [1.0, 0.0])

    def test_absolute_value_gadget(self):
        assert forward(abs_net(), [-3.0]) == pytest.approx([3.0])

    def test_tent_peak(self):
        assert forward(build_sawtooth(1), [0.5]) == pytest.approx([1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            forward(abs_net(), [1.0, 2.0])

    def test_layer_chain_is_validated(self):
        with pytest.raises(InvalidInputError):
            ReluNetwork(((np.ones((2, 1)), np.zeros(2)), (np.ones((1, 3)), np.zeros(1))))

    def test_weights_are_read_only(self):
        net = abs_net()
        with pytest.raises(ValueError):
            net.layers[0][0][0, 0] = 5.0


class TestPwl:
    def test_identity(self):
        f = PwlFunction((0.0, 1.0), (0.0, 1.0))
        net = build_from_pwl(f)
        xs = np.linspace(0.0, 1.0, 1000)
        assert net.layers[0][0].shape[0] <= 2
        assert np.max(np.abs(net.forward_batch(xs[:, None])[:, 0] - xs)) <= 1e-12

    def test_five_pieces(self):
        f = PwlFunction((0.0, 0.1, 0.4, 0.5, 0.8, 1.0), (0.0, 2.0, -1.0, 0.5, 0.5, 3.0))
        net = build_from_pwl(f)
        info = stats(net)
        assert f.pieces == 5
        assert info.depth == 2
        assert net.layers[0][0].shape[0] <= f.pieces + 1
        xs = np.linspace(-0.5, 1.5, 10000)
        err = np.abs(net.forward_batch(xs[:, None])[:, 0] - f(xs))
        assert np.max(err) <= 1e-9 * 3.0

    def test_linear_extensions(self):
        f = PwlFunction((0.0, 1.0, 2.0), (0.0, 1.0, 3.0), constant_left=False, constant_right=False)
        net = build_from_pwl(f)
        xs = np.array([-2.0, -0.5, 0.5, 1.5, 4.0])
        assert np.allclose(net.forward_batch(xs[:, None])[:, 0], f(xs))
        assert f(np.array([-1.0]))[0] == pytest.approx(-1.0)

    def test_double_triangle_matches_generator_on_one_interval(self):
        params = GenModelParams(n=8, k=1, r=1.0, x_max=1.0)
        h = params.interval_len
        f = double_triangle_pwl(h / 2, 1.0, center=params.interval_mid(2))
        net = build_from_pwl(f)
        zs = np.linspace(params.interval_start(2), params.interval_start(3), 257)
        direct = generate_batch(params, zs[:, None])[:, 2]
        assert np.max(np.abs(net.forward_batch(zs[:, None])[:, 0] - direct)) <= 1e-9

    @pytest.mark.parametrize("breakpoints", [(0.0,), (0.0, np.inf), (1.0, 0.0)])
    def test_rejects_bad_breakpoints(self, breakpoints):
        with pytest.raises(InvalidInputError):
            PwlFunction(breakpoints, tuple(0.0 for _ in breakpoints))


class TestPrimitives:
    def test_g_values(self):
        g = build_g(1.0)
        assert forward(g, [0.0]) == pytest.approx([0.0])
        assert forward(g, [0.75]) == pytest.approx([1.0])
        assert forward(g, [-0.8]) == pytest.approx([-1.0])

    def test_g_composed_twice_saturates(self):
        gg = compose(build_g(1.0), build_g(1.0))
        assert forward(gg, [0.25]) == pytest.approx([1.0])
        assert forward(gg, [0.1]) == pytest.approx([0.4])

    def test_f_after_doubling_vanishes_at_ends(self):
        chain = compose(build_f(1.0), compose(build_g(1.0), build_g(1.0)))
        assert forward(chain, [1.0]) == pytest.approx([0.0], abs=1e-12)
        assert forward(chain, [-1.0]) == pytest.approx([0.0], abs=1e-12)

    def test_primitive_weights_are_bounded(self):
        for net in (build_f(1.0), build_g(1.0)):
            assert net.max_weight <= 2.0
            assert net.max_offset <= 2.0


class TestCombinators:
    def test_parallel_doubles_width(self):
        net = abs_net()
        both = parallel([net, net])
        assert both.depth == net.depth
        assert both.width == 2 * net.width
        assert np.allclose(forward(both, [-2.0, 3.0]), [2.0, 3.0])

    def test_compose_matches_nested_forward(self, rng):
        outer = build_from_pwl(PwlFunction((-1.0, 0.0, 2.0), (1.0, -1.0, 0.5)))
        inner = build_g(1.0)
        net = compose(outer, inner)
        assert net.depth == outer.depth + inner.depth
        for z in rng.uniform(-2.0, 2.0, size=100):
            assert forward(net, [z]) == pytest.approx(forward(outer, forward(inner, [z])), abs=1e-12)

    def test_identity_padding(self):
        net = abs_net()
        padded = pad_to_depth(net, 6)
        assert padded.depth == 6
        xs = np.linspace(-3.0, 3.0, 61)[:, None]
        assert np.allclose(padded.forward_batch(xs), net.forward_batch(xs))

    def test_padding_signed_output(self):
        g = build_g(1.0)
        padded = pad_to_depth(g, 5)
        xs = np.linspace(-1.0, 1.0, 41)[:, None]
        assert padded.depth == 5
        assert np.allclose(padded.forward_batch(xs), g.forward_batch(xs))

    def test_cannot_pad_down(self):
        with pytest.raises(InvalidInputError):
            pad_to_depth(build_sawtooth(4), 2)

    def test_sum_and_fanout(self):
        a, b = build_g(1.0), abs_net()
        total = sum_networks([a, b])
        both = fanout([a, b])
        for z in (-0.9, -0.2, 0.3, 0.8):
            ga, gb = forward(a, [z])[0], forward(b, [z])[0]
            assert forward(total, [z])[0] == pytest.approx(ga + gb)
            assert np.allclose(forward(both, [z]), [ga, gb])

    def test_mixed_final_conventions(self):
        relu_final = ReluNetwork(((np.ones((1, 1)), np.zeros(1)),), final_layer_linear=False)
        combined = parallel([relu_final, build_g(1.0)])
        assert combined.final_layer_linear
        assert np.allclose(forward(combined, [-0.5, -0.2]), [0.0, -0.4])
        assert forward(to_linear_final(relu_final), [-1.0]) == pytest.approx([0.0])

    def test_input_affine(self):
        shifted = with_input_affine(build_g(1.0), [[2.0]], [0.5])
        assert forward(shifted, [0.0]) == pytest.approx([1.0])
        assert shifted.depth == 2

    def test_compose_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            compose(build_g(1.0), parallel([abs_net(), abs_net()]))


class TestDoubleTriangleDeep:
    @pytest.mark.parametrize("n,k,r", [(8, 2, 1.0), (32, 4, 1.0), (64, 4, 2.0)])
    def test_matches_direct_generator(self, n, k, r):
        params = GenModelParams(n=n, k=k, r=r, x_max=1.0)
        net = build_double_triangle_deep(params)
        h = params.interval_len
        axis = np.concatenate([
            -r + j * h + np.arange(64) * h / 64 for j in range(params.block_len)
        ] + [[r]])
        Z = np.stack([axis, axis[::-1]] + [axis] * (k - 2), axis=1)
        assert np.max(np.abs(net.forward_batch(Z) - generate_batch(params, Z))) <= 1e-9
        assert net.max_weight <= 4.0 + 1e-12
        assert net.max_offset <= 4.0 * r + 1e-12

    def test_depth_for_small_case(self):
        params = GenModelParams(n=8, k=2, r=1.0, x_max=1.0)
        assert deep_compositions(params) == 1
        net = build_double_triangle_deep(params)
        assert net.depth == 4
        assert stats(net).depth == 4

    def test_quarter_point(self):
        params = GenModelParams(n=8, k=2, r=1.0, x_max=1.0)
        net = build_double_triangle_deep(params)
        out = forward(net, [-0.875, -1.0])
        assert out[0] == pytest.approx(1.0, abs=1e-12)

    def test_depth_grows_logarithmically(self):
        depths = [build_double_triangle_deep(GenModelParams(n=2 ** e, k=1, r=1.0, x_max=1.0)).depth for e in (2, 4, 6)]
        assert depths == [4, 8, 12]

    def test_rejects_too_few_outputs(self):
        with pytest.raises(InvalidInputError):
            build_double_triangle_deep(GenModelParams(n=2, k=2, r=2.0, x_max=1.0))

    def test_rejects_large_amplitude(self):
        with pytest.raises(InvalidInputError):
            build_double_triangle_deep(GenModelParams(n=8, k=2, r=1.0, x_max=2.0))

    def test_caps_are_configurable(self):
        limits = BuilderLimits(x_max_cap=1.0, weight_cap=1.0, offset_cap=4.0)
        with pytest.raises(InvalidInputError):
            build_double_triangle_deep(GenModelParams(n=8, k=2, r=1.0, x_max=1.0), limits)


class TestSawtooth:
    @pytest.mark.parametrize("R", [1, 2, 4, 8, 16])
    def test_accounting(self, R):
        net = build_sawtooth(R)
        info = stats(net)
        assert info.breakpoints == (2 * R + 1,)
        assert info.pieces == (2 * R,)
        assert info.width <= 3
        assert info.depth <= 2 * math.log2(R) + 2

    def test_composition_law(self):
        for R in (1, 2, 4, 8):
            small = stats(build_sawtooth(R)).breakpoints[0]
            large = stats(build_sawtooth(2 * R)).breakpoints[0]
            assert large == 2 * small - 1

    def test_teeth_positions(self):
        net = build_sawtooth(16)
        peaks = (np.arange(16) + 0.5) / 16
        valleys = np.arange(17) / 16
        assert np.allclose(net.forward_batch(peaks[:, None])[:, 0], 1.0)
        assert np.allclose(net.forward_batch(valleys[:, None])[:, 0], 0.0, atol=1e-12)

    @pytest.mark.parametrize("R", [0, 3, 6, 2.5])
    def test_rejects_non_power_of_two(self, R):
        with pytest.raises(InvalidInputError):
            build_sawtooth(R)

    def test_zigzag(self):
        net = build_zigzag(3)
        assert stats(net).breakpoints == (7,)
        assert forward(net, [1.0 / 6.0]) == pytest.approx([1.0])


class TestTrapezoid:
    def test_plateau_and_floor(self):
        shaper = build_trapezoid_shaper(1.0, 0.5, 0.7)
        assert forward(shaper, [1.0]) == pytest.approx([0.7])
        assert forward(shaper, [0.0]) == pytest.approx([0.0])

    def test_four_pulses_after_sawtooth(self):
        net = compose(build_trapezoid_shaper(1.0, 0.5, 1.0), build_sawtooth(4))
        xs = np.linspace(0.0, 1.0, 4097)
        ys = net.forward_batch(xs[:, None])[:, 0]
        rising = np.count_nonzero((ys[1:] > 0.5) & (ys[:-1] <= 0.5))
        assert rising == 4
        assert stats(net).breakpoints[0] == 13

    @pytest.mark.parametrize("plateau", [0.0, 1.0, 1.5])
    def test_rejects_degenerate(self, plateau):
        with pytest.raises(InvalidInputError):
            build_trapezoid_shaper(1.0, plateau, 1.0)


class TestSerialization:
    def test_json_round_trip_is_bit_exact(self):
        net = build_double_triangle_deep(GenModelParams(n=8, k=2, r=1.0, x_max=1.0 / 3.0))
        again = from_json(to_json(net))
        assert again.final_layer_linear == net.final_layer_linear
        for (W1, b1), (W2, b2) in zip(net.layers, again.layers):
            assert np.array_equal(W1, W2)
            assert np.array_equal(b1, b2)

    def test_rejects_foreign_format(self):
        with pytest.raises(InvalidInputError):
            from_json('{"format": "other", "layers": [], "final_layer_linear": true}')

    def test_rejects_garbage(self):
        with pytest.raises(InvalidInputError):
            from_json('{"format": "relu-network/v1"}')

    def test_stats_needs_one_dimensional_input(self):
        with pytest.raises(InvalidInputError):
            stats(parallel([abs_net(), abs_net()]), count_pieces=True)

    def test_tent_structure(self):
        tent = build_tent()
        assert tent.depth == 2
        assert tent.width == 3
