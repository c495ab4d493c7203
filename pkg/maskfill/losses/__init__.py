from .extractors import (
    FeatureExtractor,
    PerceptualMetric,
    RandomConvExtractor,
    RandomFeatureMetric,
    register_extractor,
    save_extractor,
    load_extractor,
    default_extractors,
)
from .terms import (
    LossWeights,
    LossTerms,
    mask_compose,
    pixel_loss,
    perceptual_loss,
    adversarial_loss_g,
    discriminator_loss,
    discriminator_real_loss,
    discriminator_fake_loss,
    identity_loss,
    tv_loss,
    total_loss,
)
