"""Per-nodule quantification of surrounding structures.

For each nodule and structure class this computes the nodule-to-structure
surface distance over the whole volume, and, inside the spherical VOI, the
number of centerline branches and the structure volume normalized by the
non-nodule VOI volume. Two variants are produced: counting everything in
the VOI, and counting only branches that are attached to the nodule, run
within a near distance of its surface, or approach within a far distance
while projecting toward its centroid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import Mask, SphereVOI
from .morphology import Branch, DistanceField, SkeletonGraph, edt


class StructureClass(str, enum.Enum):
    PLEURA = "pleura"
    AIRWAY = "airway"
    VESSEL = "vessel"
    ARTERY = "artery"
    VEIN = "vein"

    @property
    def has_branches(self) -> bool:
        """Pleura carries only the distance feature; tubular classes get all three."""
        return self is not StructureClass.PLEURA


@dataclass(frozen=True)
class FilterRule:
    """Branch admission rule: attached, near the surface, or projecting at it."""

    attach: bool = True
    d_near_mm: float = 3.0
    d_far_mm: float = 5.0
    max_angle_deg: float = 15.0

    def __post_init__(self):
        if not self.d_near_mm < self.d_far_mm:
            raise ValueError(f"d_near must be < d_far, got {self.d_near_mm} >= {self.d_far_mm}")
        if not 0.0 < self.max_angle_deg < 90.0:
            raise ValueError(f"max angle must be in (0, 90) degrees, got {self.max_angle_deg}")


@dataclass(frozen=True)
class StructureFeatures:
    """One (nodule, structure-class) feature row. ``None`` marks a missing feature."""

    nodule_id: str
    structure: StructureClass
    distance_mm: float | None
    count_c1: int | None = None
    count_c2: int | None = None
    nvol_c1_pct: float | None = None
    nvol_c2_pct: float | None = None
    n_i: int | None = None
    n_ii: int | None = None
    n_iii: int | None = None


def surface_distance(nodule: Mask, structure: Mask,
                     nodule_edt: DistanceField | None = None) -> float:
    """Distance (mm) from the nodule to the nearest structure voxel.

    Computed over the whole volume, not the VOI; 0 when the masks overlap.
    Raises on an empty nodule or structure mask so callers can report the
    feature as missing instead of zero.
    """
    if not nodule.data.any():
        raise ValueError("empty nodule mask")
    if not structure.data.any():
        raise ValueError("empty structure mask")
    if nodule.shape != structure.shape:
        raise ValueError(f"grid mismatch: {nodule.shape} vs {structure.shape}")
    if nodule_edt is None:
        nodule_edt = edt(nodule)
    return float(nodule_edt.data[structure.data].min())


def projection_angle(branch: Branch, centroid) -> float:
    """Angle (degrees) between the branch trajectory at its nearer end and
    the segment from that end to the centroid.

    The trajectory is estimated from the last min(5, len-1) skeleton steps
    into the endpoint. Undefined for single-point branches.
    """
    pts = branch.polyline
    if len(pts) < 2:
        raise ValueError("projection angle undefined for a single-point branch")
    c = np.asarray(centroid, dtype=float)
    d_first = np.linalg.norm(pts[0] - c)
    d_last = np.linalg.norm(pts[-1] - c)
    k = min(5, len(pts) - 1)
    if d_first <= d_last:
        end, back = pts[0], pts[k]
    else:
        end, back = pts[-1], pts[-1 - k]
    traj = end - back
    to_centroid = c - end
    nt = np.linalg.norm(traj)
    nc = np.linalg.norm(to_centroid)
    if nt == 0 or nc == 0:
        return 0.0
    cosang = float(np.dot(traj, to_centroid) / (nt * nc))
    return math.degrees(math.acos(max(-1.0, min(1.0, cosang))))


def _attach_zone(nodule: Mask) -> np.ndarray:
    """Nodule voxels plus their 26-neighbors."""
    return ndimage.binary_dilation(nodule.data,
                                   structure=ndimage.generate_binary_structure(3, 3))


def branch_passes_filter(branch: Branch, nodule: Mask, nodule_centroid, rule: FilterRule,
                         nodule_surface_edt: DistanceField,
                         attach_zone: np.ndarray | None = None) -> tuple[bool, str | None]:
    """Test the admission conditions in order; returns (passes, matched condition).

    Conditions: "i" the centerline is directly attached to the nodule
    (inside or 26-adjacent); "ii" its minimum distance to the nodule surface
    is <= d_near; "iii" that minimum is <= d_far and the branch end nearer
    the centroid projects toward it within the angle limit.
    """
    if len(branch) == 0:
        return False, None
    vox = branch.voxels
    if rule.attach:
        zone = _attach_zone(nodule) if attach_zone is None else attach_zone
        if zone[vox[:, 0], vox[:, 1], vox[:, 2]].any():
            return True, "i"
    dmin = float(nodule_surface_edt.data[vox[:, 0], vox[:, 1], vox[:, 2]].min())
    if dmin <= rule.d_near_mm:
        return True, "ii"
    if dmin <= rule.d_far_mm and len(branch) >= 2:
        if projection_angle(branch, nodule_centroid) <= rule.max_angle_deg:
            return True, "iii"
    return False, None


def _branch_in_voi(branch: Branch, voi: SphereVOI) -> bool:
    d2 = ((branch.polyline - np.asarray(voi.center)) ** 2).sum(axis=1)
    return bool((d2 <= voi.radius ** 2).any())


def _voi_regions(nodule: Mask, structure: Mask, voi: SphereVOI) -> tuple[np.ndarray, np.ndarray]:
    from .grid import voi_membership

    if nodule.shape != structure.shape:
        raise ValueError(f"grid mismatch: {nodule.shape} vs {structure.shape}")
    voi_mask = voi_membership(voi, nodule).data
    if not voi_mask.any():
        raise ValueError("VOI lies entirely outside the grid")
    denom_region = voi_mask & ~nodule.data
    return denom_region, voi_mask


def quantify_choice1(nodule: Mask, structure: Mask, branches: SkeletonGraph,
                     voi: SphereVOI) -> tuple[int, float]:
    """Count every branch entering the VOI; volume % of structure in VOI\\nodule."""
    denom_region, _ = _voi_regions(nodule, structure, voi)
    count = sum(1 for b in branches.branches if _branch_in_voi(b, voi))
    denom = int(denom_region.sum())
    num = int((structure.data & denom_region).sum())
    nvol = 100.0 * num / denom if denom > 0 else 0.0
    return count, nvol


def quantify_choice2(nodule: Mask, structure: Mask, branches: SkeletonGraph,
                     voi: SphereVOI, rule: FilterRule, nodule_centroid=None,
                     nodule_surface_edt: DistanceField | None = None,
                     ) -> tuple[int, float, dict[str, int]]:
    """Like choice 1 but restricted to branches passing the admission rule.

    The volume keeps only structure components claimed by a passing branch.
    Returns (count, normalized volume %, histogram of matched conditions
    over the counted branches).
    """
    denom_region, _ = _voi_regions(nodule, structure, voi)
    if nodule_centroid is None:
        nodule_centroid = nodule.index_to_mm(np.argwhere(nodule.data)).mean(axis=0)
    if nodule_surface_edt is None:
        nodule_surface_edt = edt(nodule)
    zone = _attach_zone(nodule) if rule.attach else None

    verdicts = [branch_passes_filter(b, nodule, nodule_centroid, rule,
                                     nodule_surface_edt, attach_zone=zone)
                for b in branches.branches]

    hist = {"i": 0, "ii": 0, "iii": 0}
    count = 0
    for b, (ok, cond) in zip(branches.branches, verdicts):
        if ok and _branch_in_voi(b, voi):
            count += 1
            hist[cond] += 1

    # volume: keep structure components touched by any passing branch
    labels, nlab = ndimage.label(structure.data,
                                 structure=ndimage.generate_binary_structure(3, 3))
    claimed = np.zeros(nlab + 1, bool)
    for b, (ok, _) in zip(branches.branches, verdicts):
        if ok:
            vox = b.voxels
            claimed[labels[vox[:, 0], vox[:, 1], vox[:, 2]]] = True
    claimed[0] = False
    keep = claimed[labels]
    denom = int(denom_region.sum())
    num = int((keep & denom_region).sum())
    nvol = 100.0 * num / denom if denom > 0 else 0.0
    return count, nvol, hist


def quantify_structure(nodule_id: str, structure_class: StructureClass,
                       nodule: Mask, structure: Mask | None,
                       branches: SkeletonGraph | None, voi: SphereVOI,
                       rule: FilterRule, nodule_centroid=None,
                       nodule_surface_edt: DistanceField | None = None,
                       ) -> StructureFeatures:
    """Full feature row for one (nodule, structure class) pair.

    A missing or empty structure mask yields a missing distance; counts and
    volumes are 0 for tubular classes and absent for the pleura.
    """
    if nodule_surface_edt is None:
        nodule_surface_edt = edt(nodule)
    present = structure is not None and structure.data.any()
    dist = surface_distance(nodule, structure, nodule_edt=nodule_surface_edt) if present else None

    if not structure_class.has_branches:
        return StructureFeatures(nodule_id=nodule_id, structure=structure_class,
                                 distance_mm=dist)
    if not present:
        return StructureFeatures(nodule_id=nodule_id, structure=structure_class,
                                 distance_mm=None, count_c1=0, count_c2=0,
                                 nvol_c1_pct=0.0, nvol_c2_pct=0.0, n_i=0, n_ii=0, n_iii=0)
    assert branches is not None
    c1, v1 = quantify_choice1(nodule, structure, branches, voi)
    c2, v2, hist = quantify_choice2(nodule, structure, branches, voi, rule,
                                    nodule_centroid=nodule_centroid,
                                    nodule_surface_edt=nodule_surface_edt)
    return StructureFeatures(nodule_id=nodule_id, structure=structure_class,
                             distance_mm=dist, count_c1=c1, count_c2=c2,
                             nvol_c1_pct=v1, nvol_c2_pct=v2,
                             n_i=hist["i"], n_ii=hist["ii"], n_iii=hist["iii"])
