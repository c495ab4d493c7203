from .masks import foreground_mask, salient_contour_interior, read_mask, write_mask
from .blend import (
    DEFAULT_LEVELS,
    max_levels,
    gaussian_pyramid,
    laplacian_pyramid,
    collapse,
    laplacian_blend,
    replace_background,
)
