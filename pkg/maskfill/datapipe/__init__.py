from .types import (
    LandmarkSet,
    FaceSample,
    ImagePyramid,
    RESOLUTIONS,
    FULL_RESOLUTION,
)
from .align import align_face, similarity_transform, canonical_eyes, CANONICAL_EYES
from .mask import compute_face_mask, hull_mask
from .pyramid import build_pyramid, augment_mirror, downsample
from .synth import synth_face
from .dataset import (
    load_dataset,
    preprocess,
    read_image,
    write_image,
    read_landmarks,
    write_landmarks,
    list_images,
    find_landmark_file,
    subject_of,
    save_archive,
    load_archive,
    archive_digest,
    to_tensor,
    to_image,
    PyramidBatch,
    iterate_batches,
)


def synth_pyramids(count: int, subjects: int = 0, start: int = 0):
    """
    `count` preprocessed synthetic pyramids; with `subjects` > 0 the seeds
    cycle through that many identities.
    """
    pyramids = []
    for seed in range(start, start + count):
        subject = seed % subjects if subjects else seed
        image, landmarks = synth_face(seed, subject=subject)
        sample = preprocess(image, landmarks, subject_id=f"subject{subject:03d}")
        pyramids.append(build_pyramid(sample))
    return pyramids
