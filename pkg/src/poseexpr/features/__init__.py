from .geom import GEOM_DIM, geometric_feature
from .image import GrayImage, image_gradients
from .lbp import (
    CODE_BINS,
    TplbpParams,
    landmark_face_regions,
    lbp_code,
    tplbp_code,
    tplbp_grid_feature,
    tplbp_region_feature,
)
from .matrixio import load_feature_matrix, save_feature_matrix
from .reduce import (
    PcaReducer,
    load_reducer,
    pca_reduce_apply,
    pca_reduce_fit,
    save_reducer,
)
from .sift import (
    FACE_SIFT_DIM,
    SIFT_DIM,
    SiftParams,
    default_patch_radius,
    sift_descriptor_at,
    sift_face_feature,
)
from .vector import FAMILIES, FeatureVector, combine_features, normalize_feature

__all__ = [
    "CODE_BINS", "FACE_SIFT_DIM", "FAMILIES", "GEOM_DIM", "SIFT_DIM",
    "FeatureVector", "GrayImage", "PcaReducer", "SiftParams", "TplbpParams",
    "combine_features", "default_patch_radius", "geometric_feature",
    "image_gradients", "landmark_face_regions", "lbp_code",
    "load_feature_matrix", "load_reducer", "normalize_feature",
    "pca_reduce_apply", "pca_reduce_fit", "save_feature_matrix",
    "save_reducer", "sift_descriptor_at", "sift_face_feature", "tplbp_code",
    "tplbp_grid_feature", "tplbp_region_feature",
]
