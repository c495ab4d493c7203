import pytest
import torch
from torch.autograd import gradcheck

from . import (
    LossWeights,
    LossTerms,
    PerceptualMetric,
    FeatureExtractor,
    RandomConvExtractor,
    RandomFeatureMetric,
    mask_compose,
    pixel_loss,
    perceptual_loss,
    adversarial_loss_g,
    discriminator_loss,
    identity_loss,
    tv_loss,
    total_loss,
)
from ..errors import ConfigError, ShapeError


def rand(*shape, seed=0):
    return torch.rand(*shape, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)


class FixedFeatures(FeatureExtractor):
    """Returns the first two pixels of the red channel as features."""

    input_size = 2
    dim = 2

    def embed(self, images):
        return images[:, 0, 0, :]


class TableMetric(PerceptualMetric):
    """Scores each pair with a preset value."""

    min_resolution = 4

    def __init__(self, scores):
        super().__init__()
        self.scores = torch.tensor(scores, dtype=torch.float64)

    def distance(self, a, b):
        return self.scores


class TestMaskCompose:
    def test_all_ones_mask_keeps_the_input(self):
        gen, masked = rand(2, 3, 8, 8), rand(2, 3, 8, 8, seed=1)
        assert torch.equal(mask_compose(gen, masked, torch.ones(2, 1, 8, 8)), masked)

    def test_all_zeros_mask_keeps_the_output(self):
        gen, masked = rand(2, 3, 8, 8), rand(2, 3, 8, 8, seed=1)
        assert torch.equal(mask_compose(gen, masked, torch.zeros(2, 1, 8, 8)), gen)

    def test_face_pixels_are_exact(self):
        gen, masked = rand(2, 3, 8, 8), rand(2, 3, 8, 8, seed=1)
        mask = (rand(2, 1, 8, 8, seed=2) > 0.5).double()
        out = mask_compose(gen, masked, mask)
        assert torch.equal(out * mask, masked * mask)

    def test_accepts_plain_masks(self):
        gen, masked = rand(2, 3, 8, 8), rand(2, 3, 8, 8, seed=1)
        mask = (rand(8, 8, seed=2) > 0.5).double()
        assert torch.equal(
            mask_compose(gen, masked, mask), mask_compose(gen, masked, mask.expand(2, 1, 8, 8))
        )

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mask_compose(rand(1, 3, 8, 8), rand(1, 3, 4, 4), torch.ones(1, 1, 8, 8))

    def test_no_pixel_gradient_inside_the_mask(self):
        gen = rand(1, 3, 8, 8).requires_grad_()
        masked, gt = rand(1, 3, 8, 8, seed=1), rand(1, 3, 8, 8, seed=3)
        mask = (rand(1, 1, 8, 8, seed=2) > 0.5).double()
        pixel_loss(gt, mask_compose(gen, masked, mask)).backward()
        assert not (gen.grad * mask).any()
        assert (gen.grad * (1 - mask)).abs().sum() > 0


class TestPixelLoss:
    def test_identity(self):
        x = rand(2, 3, 4, 4)
        assert pixel_loss(x, x).item() == 0.0

    def test_single_value(self):
        gt = torch.full((1, 1, 1, 1), 0.2, dtype=torch.float64)
        gen = torch.full((1, 1, 1, 1), 0.5, dtype=torch.float64)
        assert pixel_loss(gt, gen).item() == pytest.approx(0.3, abs=1e-12)

    def test_symmetric(self):
        a, b = rand(2, 3, 4, 4), rand(2, 3, 4, 4, seed=1)
        assert pixel_loss(a, b).item() == pixel_loss(b, a).item()

    def test_l2_variant(self):
        gt = torch.zeros(1, 1, 1, 2, dtype=torch.float64)
        gen = torch.tensor([[[[0.5, 1.0]]]], dtype=torch.float64)
        assert pixel_loss(gt, gen, l2=True).item() == pytest.approx(0.625, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            pixel_loss(rand(1, 3, 4, 4), rand(1, 3, 4, 5))


class TestPerceptualLoss:
    def test_identity(self):
        x = rand(2, 3, 32, 32)
        assert perceptual_loss(x, x, RandomFeatureMetric().double()).item() == 0.0

    def test_absent_below_minimum(self):
        metric = RandomFeatureMetric()
        assert perceptual_loss(rand(2, 3, 16, 16), rand(2, 3, 16, 16, seed=1), metric) is None

    def test_batch_mean(self):
        loss = perceptual_loss(rand(2, 3, 4, 4), rand(2, 3, 4, 4, seed=1), TableMetric([0.2, 0.6]))
        assert loss.item() == pytest.approx(0.4, abs=1e-12)


class TestAdversarialLoss:
    def test_real_scores(self):
        assert adversarial_loss_g(torch.ones(4)).item() == 0.0

    def test_half_scores(self):
        assert adversarial_loss_g(torch.tensor([0.5, 0.5], dtype=torch.float64)).item() == 0.25

    def test_monotone(self):
        values = [adversarial_loss_g(torch.tensor([s, 0.3])).item() for s in (0.1, 0.5, 0.9)]
        assert values[0] > values[1] > values[2]


class TestDiscriminatorLoss:
    def test_perfect_discriminator(self):
        loss = discriminator_loss(torch.full((3,), 0.9), torch.zeros(3), real_label=0.9)
        assert loss.item() == pytest.approx(0.0, abs=1e-12)

    def test_fooled_discriminator(self):
        loss = discriminator_loss(
            torch.tensor([1.0], dtype=torch.float64),
            torch.tensor([1.0], dtype=torch.float64),
            real_label=0.9,
        )
        assert loss.item() == pytest.approx(1.01, abs=1e-12)

    def test_fake_gradient(self):
        d_fake = rand(5).requires_grad_()
        discriminator_loss(rand(5, seed=1), d_fake).backward()
        torch.testing.assert_close(d_fake.grad, 2 * d_fake.detach() / 5)

    def test_label_range(self):
        with pytest.raises(ConfigError):
            discriminator_loss(torch.ones(1), torch.ones(1), real_label=0.0)


class TestIdentityLoss:
    def test_identity(self):
        x = rand(2, 3, 16, 16)
        assert identity_loss(x, x, RandomConvExtractor().double()).item() == 0.0

    def test_two_features(self):
        gt = torch.zeros(1, 3, 2, 2, dtype=torch.float64)
        gen = torch.ones(1, 3, 2, 2, dtype=torch.float64)
        assert identity_loss(gen, gt, FixedFeatures()).item() == pytest.approx(1.0, abs=1e-12)

    def test_batch_duplication(self):
        gen, gt = rand(1, 3, 2, 2), rand(1, 3, 2, 2, seed=1)
        single = identity_loss(gen, gt, FixedFeatures())
        double = identity_loss(gen.repeat(2, 1, 1, 1), gt.repeat(2, 1, 1, 1), FixedFeatures())
        assert single.item() == pytest.approx(double.item(), abs=1e-15)


class TestTotalVariation:
    def test_constant(self):
        assert tv_loss(torch.full((2, 3, 5, 5), 0.4)).item() == 0.0

    def test_single_difference(self):
        assert tv_loss(torch.tensor([[[0.0, 1.0]]], dtype=torch.float64)).item() == 1.0

    def test_checkerboard(self):
        image = torch.tensor([[[0.0, 1.0], [1.0, 0.0]]], dtype=torch.float64)
        assert tv_loss(image).item() == 4.0

    def test_batch_mean(self):
        a = torch.tensor([[[0.0, 1.0], [1.0, 0.0]]], dtype=torch.float64)
        batch = torch.stack([a, torch.zeros_like(a)])
        assert tv_loss(batch).item() == 2.0


class TestTotalLoss:
    def test_defaults(self):
        weights = LossWeights()
        assert (weights.perceptual, weights.adversarial, weights.identity) == (1.0, 0.1, 10.0)
        assert weights.total_variation == 1e-6

    def test_weighted_sum(self):
        terms = LossTerms(0.1, 0.2, 0.25, 1.0, 100.0)
        assert total_loss(terms, LossWeights()) == pytest.approx(10.3251, abs=1e-12)

    def test_zero_weights_leave_the_pixel_term(self):
        terms = LossTerms(0.1, 0.2, 0.25, 1.0, 100.0)
        assert total_loss(terms, LossWeights(0, 0, 0, 0)) == 0.1

    def test_absent_perceptual_term(self):
        terms = LossTerms(0.1, None, 0.0, 0.0, 0.0)
        assert total_loss(terms, LossWeights()) == 0.1

    def test_linear_in_each_weight(self):
        terms = LossTerms(0.1, 0.2, 0.25, 1.0, 100.0)
        base = total_loss(terms, LossWeights(identity=1.0))
        doubled = total_loss(terms, LossWeights(identity=2.0))
        assert doubled - base == pytest.approx(1.0, abs=1e-12)

    def test_ablation_flags(self):
        weights = LossWeights.from_train_config({"disable_id": True, "disable_pc": True})
        assert weights.identity == 0.0 and weights.perceptual == 0.0
        assert weights.adversarial == 0.1

    def test_negative_weight(self):
        with pytest.raises(ConfigError):
            LossWeights(identity=-1.0)

    def test_row(self):
        row = LossTerms(torch.tensor(0.5), None).as_row()
        assert row == {"l_pixel": 0.5, "l_pc": 0.0, "l_adv": 0.0, "l_id": 0.0, "l_tv": 0.0}


class TestGradients:
    """Analytic gradients against central finite differences, in double precision."""

    def check(self, fn, *inputs):
        assert gradcheck(fn, inputs, eps=1e-6, atol=1e-9, rtol=1e-4)

    def test_pixel(self):
        self.check(lambda gen: pixel_loss(rand(2, 3, 4, 4, seed=1), gen), rand(2, 3, 4, 4).requires_grad_())

    def test_composed_pixel(self):
        masked, gt = rand(1, 3, 4, 4, seed=1), rand(1, 3, 4, 4, seed=2)
        mask = (rand(1, 1, 4, 4, seed=3) > 0.5).double()
        self.check(
            lambda gen: pixel_loss(gt, mask_compose(gen, masked, mask)),
            rand(1, 3, 4, 4).requires_grad_(),
        )

    def test_tv(self):
        self.check(tv_loss, rand(2, 3, 5, 5).requires_grad_())

    def test_adversarial(self):
        self.check(adversarial_loss_g, rand(20).requires_grad_())

    def test_discriminator(self):
        self.check(discriminator_loss, rand(10).requires_grad_(), rand(10, seed=1).requires_grad_())

    def test_identity(self):
        extractor = RandomConvExtractor(dim=32, input_size=16, width=4).double()
        gt = rand(1, 3, 8, 8, seed=1)
        self.check(lambda gen: identity_loss(gen, gt, extractor), rand(1, 3, 8, 8).requires_grad_())

    def test_perceptual(self):
        metric = RandomFeatureMetric(width=4).double()
        gt = rand(1, 3, 32, 32, seed=1)
        self.check(
            lambda gen: perceptual_loss(gen, gt, metric), rand(1, 3, 32, 32).requires_grad_()
        )
