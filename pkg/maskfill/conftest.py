import logging
import pytest
import torch

from .datapipe import synth_face, write_image, write_landmarks, synth_pyramids

# Channel multiplier that keeps every network tiny on a CPU.
TINY_SCALE = 1 / 32


@pytest.fixture(autouse=True)
def _quiet_torch():
    torch.set_num_threads(1)
    yield


@pytest.fixture
def tiny_scale():
    return TINY_SCALE


@pytest.fixture(scope="session")
def pyramids():
    """Eight synthetic training pyramids."""
    return synth_pyramids(8)


@pytest.fixture
def face_dir(tmp_path):
    """
    Four synthetic images of two subjects plus their landmark files, laid
    out as `images/<subject>/<n>.png` and `landmarks/<subject>/<n>.json`.
    """
    images = tmp_path / "images"
    landmarks = tmp_path / "landmarks"
    for seed in range(4):
        subject = f"subject{seed % 2}"
        image, points = synth_face(seed, subject=seed % 2)
        write_image(images / subject / f"{seed}.png", image)
        (landmarks / subject).mkdir(parents=True, exist_ok=True)
        write_landmarks(landmarks / subject / f"{seed}.json", points)
    return images, landmarks


@pytest.fixture
def light_extractors():
    """Small stand-ins for the identity and perceptual networks."""
    from .losses import RandomConvExtractor, RandomFeatureMetric

    return {
        "identity": RandomConvExtractor(dim=32, input_size=16, width=4, seed=1),
        "perceptual": RandomFeatureMetric(width=4, depth=2, seed=2),
        "recognition": RandomConvExtractor(dim=32, input_size=16, width=4, seed=3),
    }
