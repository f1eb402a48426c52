"""msikit: fisheye VR rig footage to 6-DoF multi-sphere image bundles."""

from .geometry import (
    ErpGrid,
    FisheyeIntrinsics,
    Pose,
    dir_to_erp_pixel,
    dir_to_fisheye_pixel,
    erp_pixel_to_dir,
    fisheye_pixel_to_dir,
    ray_sphere_intersect,
)
from .msi import (
    Msi,
    PinholeSpec,
    ViewRequest,
    assemble_msi,
    composite_center,
    export_msi,
    import_msi,
    render_grad_alpha,
    render_loss_l1,
    render_view,
)
from .wssv import (
    FisheyeView,
    SweepRadii,
    Wssv,
    build_wssv,
    fuse_layer,
    sweep_radii,
    warp_to_sphere,
)
from .alpha import (
    NetSpec,
    WeightStore,
    alpha_activation,
    forward,
    net_spec_table1,
    photoconsistency_alpha,
    shape_check,
)
from .dataset import DatasetManifest, gen_dataset, gt_alpha_from_depth, load_manifest
from .metrics import QualityReport, psnr, ssim
from .rig import RigConfig, default_rig
from .scene import Scene, render_erp_direct, render_fisheye, render_pinhole, trace_rays

__version__ = "0.1.0"
