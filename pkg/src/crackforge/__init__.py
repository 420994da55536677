"""crackforge: semi-synthetic crack images and scale-invariant segmentation
for 3D CT volumes of concrete."""

__version__ = "0.1.0"

from .volume import (BinaryMask, VoxelVolume, load_mask, load_volume,
                     normalize_gray, save_mask, save_volume)
from .resample import (Pyramid, build_pyramid, downsample, rescale,
                       upsample_mask_to, upsample_to)
from .patches import augment, extract_mask_patches, extract_patches, patch_grid
from .fbm import (FbmParams, combine_cracks, gen_fbm_height_field,
                  gen_fbm_profile, rasterize_height_field,
                  rasterize_height_profile)
from .voronoi import (Facet, Tessellation, VoronoiParams, build_from_params,
                      build_voronoi, sample_poisson_points)
from .surface import (SurfaceChain, boundary_cycle, chain_boundary,
                      min_weight_surface, rasterize_surface)
from .dilation import (DilationProfile, adaptive_dilate, dilate_fixed_width,
                       sample_dilation_profile)
from .embed import PoreGvd, embed_crack, estimate_pore_gvd, partial_volume_smooth
from .riesz import riesz_transform
from .network import (NetworkConfig, RieszLayer, RieszNetwork, TrainConfig,
                      TrainResult, count_params, load_model, predict,
                      riesz_layer_forward, save_model, train,
                      weighted_bce_loss)
from .multiscale import FusionConfig, segment_multiscale
from .metrics import EvalReport, class_weight, score, summarize
from .errors import (ConfigError, CrackforgeError, CycleAnchorError,
                     EmptyTessellationError, NoSpanningChainError,
                     SolverTimeoutError, TrainingDivergedError, VolumeError)
