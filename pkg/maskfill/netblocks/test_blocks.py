import pytest
import torch
import torch.nn as nn

from . import (
    generator_specs,
    discriminator_specs,
    build_generator,
    build_discriminator,
    build_upscaler,
    Cascade,
    ConvLayer,
    ResidualBlock,
)
from ..datapipe import RESOLUTIONS
from ..errors import ShapeError


def seeded(seed=0):
    return torch.Generator().manual_seed(seed)


def names(specs, kind):
    return [s.name for s in specs if s.kind == kind]


class TestGeneratorAudit:
    @pytest.mark.parametrize(
        "resolution, ladder",
        [
            (8, [128, 1024]),
            (16, [128, 512, 1024]),
            (32, [128, 256, 512, 1024]),
            (64, [128, 128, 256, 512, 1024]),
            (128, [128, 64, 128, 256, 512, 1024]),
        ],
    )
    def test_encoder_channel_ladder(self, resolution, ladder):
        specs = generator_specs(resolution)
        encoder = [
            s for s in specs if s.name.startswith("encoder.") and s.kind != "residual_block"
        ]
        assert [s.out_channels for s in encoder] == ladder
        assert [s.stride for s in encoder] == [1] + [2] * (len(ladder) - 1)

    def test_first_conv_is_atrous(self):
        for r in RESOLUTIONS:
            first = generator_specs(r)[0]
            assert (first.kind, first.kernel, first.stride, first.dilation) == (
                "atrous_conv", 3, 1, 2,
            )
            assert first.out_channels == 128

    def test_every_strided_conv_is_followed_by_a_residual_block(self):
        for r in RESOLUTIONS:
            specs = generator_specs(r)
            for i, spec in enumerate(specs):
                if spec.kind == "conv" and spec.stride == 2:
                    assert specs[i + 1].kind == "residual_block"
                    assert specs[i + 1].out_channels == spec.out_channels

    def test_bottleneck(self):
        for r in RESOLUTIONS:
            specs = {s.name: s for s in generator_specs(r)}
            assert specs["bottleneck.fc1"].in_channels == 4 * 4 * 1024
            assert specs["bottleneck.fc1"].out_channels == 512
            assert specs["bottleneck.fc2"].out_channels == 16384

    def test_decoder(self):
        for depth, r in enumerate(RESOLUTIONS, start=1):
            specs = generator_specs(r)
            shuffles = [s for s in specs if s.kind == "pixel_shuffle"]
            assert len(shuffles) == depth
            for shuffle in shuffles:
                conv = next(s for s in specs if s.name == shuffle.name.replace("shuffle", "conv"))
                assert conv.out_channels == 4 * shuffle.out_channels
            output = specs[-1]
            assert (output.kernel, output.out_channels, output.activation) == (5, 3, "tanh")

    def test_block_8_has_one_shuffle_stage(self):
        assert names(generator_specs(8), "pixel_shuffle") == ["decoder.stages.1.shuffle"]

    def test_each_halving_drops_one_residual_and_one_shuffle(self):
        for low, high in zip(RESOLUTIONS, RESOLUTIONS[1:]):
            small, large = generator_specs(low), generator_specs(high)
            for kind in ("residual_block", "pixel_shuffle"):
                assert len(names(large, kind)) == len(names(small, kind)) + 1

    def test_hidden_activations(self):
        for spec in generator_specs(128)[:-1]:
            assert spec.activation in ("leaky_relu(0.1)", "none")

    def test_skips_join_equal_shapes(self):
        fuses = names(generator_specs(128), "conv")
        assert [n for n in fuses if n.endswith("fuse")] == [
            f"decoder.stages.{d}.fuse" for d in (1, 2, 3, 4)
        ]
        assert not [n for n in names(generator_specs(8), "conv") if n.endswith("fuse")]

    def test_parameter_count_grows_with_resolution(self):
        counts = [sum(s.parameter_count for s in generator_specs(r)) for r in RESOLUTIONS]
        assert all(a < b for a, b in zip(counts, counts[1:]))

    @pytest.mark.parametrize("resolution", [8, 128])
    def test_modules_follow_specs(self, resolution):
        with torch.device("meta"):
            block = build_generator(resolution)
        assert sum(p.numel() for p in block.parameters()) == block.parameter_count
        for spec in block.specs:
            layer = block.layer(spec.name)
            if isinstance(layer, ConvLayer):
                conv = layer.conv
                assert conv.weight.shape == (
                    spec.out_channels, spec.in_channels, spec.kernel, spec.kernel,
                )
                assert conv.stride == (spec.stride, spec.stride)
                assert conv.dilation == (spec.dilation, spec.dilation)
            elif isinstance(layer, ResidualBlock):
                assert layer.conv1.weight.shape[0] == spec.out_channels

    def test_invalid_resolution(self):
        with pytest.raises(ShapeError):
            generator_specs(24)


class TestGeneratorForward:
    def test_shape_and_range(self, tiny_scale):
        block = build_generator(32, tiny_scale, seeded())
        out = block(torch.rand(2, 3, 32, 32))
        assert out.shape == (2, 3, 32, 32)
        assert out.min() >= 0.0 and out.max() <= 1.0

    @pytest.mark.parametrize("resolution", RESOLUTIONS)
    def test_every_block_keeps_the_shape(self, resolution, tiny_scale):
        block = build_generator(resolution, tiny_scale, seeded())
        x = torch.rand(1, 3, resolution, resolution)
        assert block(x).shape == x.shape

    def test_wrong_resolution(self, tiny_scale):
        block = build_generator(16, tiny_scale, seeded())
        with pytest.raises(ShapeError):
            block(torch.rand(1, 3, 32, 32))

    def test_deterministic(self, tiny_scale):
        block = build_generator(16, tiny_scale, seeded()).eval()
        x = torch.rand(2, 3, 16, 16)
        assert torch.equal(block(x), block(x))

    def test_same_seed_same_weights(self, tiny_scale):
        a = build_generator(8, tiny_scale, seeded(3)).state_dict()
        b = build_generator(8, tiny_scale, seeded(3)).state_dict()
        assert all(torch.equal(a[k], b[k]) for k in a)

    @pytest.mark.parametrize("layer", ["decoder.output", "encoder.input"])
    def test_gradient_matches_finite_difference(self, layer, tiny_scale):
        block = build_generator(8, tiny_scale, seeded()).double()
        x = torch.rand(2, 3, 8, 8, dtype=torch.float64, generator=seeded(1))
        weight = block.layer(layer).conv.weight
        block(x).mean().backward()

        picks = torch.randint(0, weight.numel(), (20,), generator=seeded(2))
        eps = 1e-6
        flat = weight.data.view(-1)
        for i in picks.tolist():
            analytic = weight.grad.view(-1)[i].item()
            with torch.no_grad():
                original = flat[i].item()
                flat[i] = original + eps
                plus = block(x).mean().item()
                flat[i] = original - eps
                minus = block(x).mean().item()
                flat[i] = original
            numeric = (plus - minus) / (2 * eps)
            assert abs(analytic - numeric) <= 1e-4 * max(abs(analytic), abs(numeric)) + 1e-9


class TestDiscriminator:
    def test_scores_each_image(self, tiny_scale):
        for r in RESOLUTIONS:
            disc = build_discriminator(r, tiny_scale, seeded())
            scores = disc(torch.rand(10, 3, r, r))
            assert scores.shape == (10,)
            assert ((scores > 0) & (scores < 1)).all()

    def test_no_pooling_or_dense_layers(self):
        with torch.device("meta"):
            disc = build_discriminator(128)
        for module in disc.modules():
            assert not isinstance(
                module, (nn.Linear, nn.MaxPool2d, nn.AvgPool2d, nn.AdaptiveAvgPool2d)
            )
        assert all(s.kind == "conv" for s in disc.specs)

    def test_batch_norm_everywhere_but_first(self):
        specs = discriminator_specs(128)
        hidden = [s for s in specs if s.name.startswith("features.")]
        assert not hidden[0].batch_norm
        assert all(s.batch_norm for s in hidden[1:])
        assert all(s.activation == "leaky_relu(0.2)" for s in hidden)

    @pytest.mark.parametrize("resolution, convs", [(8, 6), (16, 8), (32, 10), (128, 10)])
    def test_depth_leaves_at_least_two_by_two(self, resolution, convs):
        hidden = [s for s in discriminator_specs(resolution) if s.name != "head"]
        assert len(hidden) == convs
        side = resolution
        for spec in hidden:
            side //= spec.stride
        assert side >= 2


class TestUpscaler:
    def test_doubles(self):
        up = build_upscaler(seeded())
        assert up(torch.rand(2, 3, 8, 8)).shape == (2, 3, 16, 16)

    def test_identity_keeps_constants(self):
        up = build_upscaler(identity=True)
        out = up(torch.full((1, 3, 8, 8), 0.3))
        torch.testing.assert_close(out, torch.full((1, 3, 16, 16), 0.3))

    def test_identity_is_nearest_neighbour(self):
        up = build_upscaler(identity=True)
        x = torch.rand(1, 3, 4, 4)
        expected = x.repeat_interleave(2, dim=2).repeat_interleave(2, dim=3)
        torch.testing.assert_close(up(x), expected)

    def test_gradient_reaches_weights(self):
        up = build_upscaler(seeded(2))
        up(torch.rand(2, 3, 8, 8)).sum().backward()
        assert up.layer("stages.1.conv").conv.weight.grad.abs().sum() > 0


class TestCascade:
    def test_levels_chain(self, tiny_scale):
        cascade = Cascade(channel_scale=tiny_scale, generator=seeded())
        for low, high in zip(RESOLUTIONS, RESOLUTIONS[1:]):
            out = cascade.generator(low)(torch.rand(1, 3, low, low))
            assert cascade.upscaler(low)(out).shape == (1, 3, high, high)

    def test_parameter_count_sums_the_parts(self, tiny_scale):
        cascade = Cascade(channel_scale=tiny_scale, generator=seeded())
        expected = sum(cascade.generator(r).parameter_count for r in RESOLUTIONS)
        expected += sum(cascade.upscaler(r).parameter_count for r in RESOLUTIONS[:-1])
        assert cascade.generator_parameter_count() == expected

    def test_single_stage(self, tiny_scale):
        cascade = Cascade((32,), channel_scale=tiny_scale)
        assert len(cascade.upscalers) == 0
        assert cascade.top_resolution == 32

    def test_levels_must_double(self, tiny_scale):
        with pytest.raises(ShapeError):
            Cascade((8, 32), channel_scale=tiny_scale)
