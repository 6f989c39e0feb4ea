"""Crater dataset generation, tiling and segmentation metrics (C++ core)."""

from ._core import (
    ConfigError,
    RuntimeFailure,
    compute_metrics,
    confusion,
    corrupt_pseudo_real,
    craters_in_tile,
    default_scene_spec,
    derive_seed,
    evaluate_masks,
    generate_scene,
    load_crater_db,
    normalize_lon,
    project_to_pixel,
    rasterize_craters,
    reassemble,
    reference_comparison,
    slice_raster,
    tile_footprint_km2,
    tile_starts,
    truncated_power_law_cdf,
    Tile,
)

__all__ = [name for name in dir() if not name.startswith("_")]
