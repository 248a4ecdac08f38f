"""Intermediate scalar curvature of warped and multiply warped metrics."""

__version__ = "0.1.0"

from .constructions import (
    assemble_boot,
    boot_cross_sphere,
    build_bend,
    build_toe,
    build_torpedo,
    build_torpedo_cylinder,
    search_bend_Lambda,
)
from .concordance import build_concordance, find_C, product_path, round_path
from .curvature import pair_curvatures, s_pn
from .geometry import (
    GridSpec,
    ModelPoint,
    MultiplyWarpedLine,
    PlaneComplement,
    ProductOfSpheres,
    SphereProduct,
    TwoDWarp,
    WarpedLine,
)
from .oracle import crosscheck
from .positivity import certify, min_over_grassmann

__all__ = [
    "assemble_boot",
    "boot_cross_sphere",
    "build_bend",
    "build_toe",
    "build_torpedo",
    "build_torpedo_cylinder",
    "search_bend_Lambda",
    "build_concordance",
    "find_C",
    "product_path",
    "round_path",
    "pair_curvatures",
    "s_pn",
    "GridSpec",
    "ModelPoint",
    "MultiplyWarpedLine",
    "PlaneComplement",
    "ProductOfSpheres",
    "SphereProduct",
    "TwoDWarp",
    "WarpedLine",
    "crosscheck",
    "certify",
    "min_over_grassmann",
]
