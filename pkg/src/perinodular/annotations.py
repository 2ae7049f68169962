"""Reader-annotation ingestion: parse LIDC-style XML, rasterize contours,
group per-reader marks into physical nodules and fuse them into records
with consensus masks, averaged scores and proxy labels.
"""

from __future__ import annotations

import csv
import enum
import math
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .grid import Mask, Volume


class AnnotationError(ValueError):
    pass


class ProxyLabel(str, enum.Enum):
    BENIGN = "benign"
    MALIGNANT = "malignant"
    UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class SliceContour:
    z_mm: float
    points: tuple[tuple[int, int], ...]  # pixel (x, y) boundary chain


@dataclass(frozen=True)
class NoduleMark:
    """One reader's mark, as written in the XML."""

    reader_id: str
    mark_id: str
    malignancy: int | None
    texture: int | None
    contours: tuple[SliceContour, ...]
    excluded: bool = False
    exclusion_reason: str | None = None


@dataclass(frozen=True)
class ReadingSession:
    reader_id: str
    marks: tuple[NoduleMark, ...]


@dataclass(frozen=True)
class RadiologistRead:
    """A rasterized, eligible mark: filled voxels plus the reader's scores."""

    reader_id: str
    malignancy_score: int
    voxels: frozenset[tuple[int, int, int]]
    centroid_mm: tuple[float, float, float]
    texture_score: int | None = None

    def __post_init__(self):
        if not 1 <= self.malignancy_score <= 5:
            raise AnnotationError(f"malignancy score {self.malignancy_score} outside 1..5")
        if not self.voxels:
            raise AnnotationError("read with no voxels")


@dataclass(frozen=True)
class NoduleRecord:
    nodule_id: str
    patient_id: str
    reads: tuple[RadiologistRead, ...]
    fused_mask: Mask
    centroid_mm: tuple[float, float, float]
    eq_diameter_mm: float
    mean_score: float
    proxy_label: ProxyLabel
    n_readers: int
    mean_pairwise_diff: float
    mean_texture: float | None = None


@dataclass(frozen=True)
class PatientDiagnosis:
    patient_id: str
    category: int  # 1 benign, 2 primary malignant, 3 metastatic
    method: str

    def __post_init__(self):
        if self.category not in (1, 2, 3):
            raise AnnotationError(f"diagnosis category must be 1, 2 or 3, got {self.category}")

    @property
    def is_malignant(self) -> bool:
        return self.category in (2, 3)


# ---------------------------------------------------------------------------
# XML parsing


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _find(node, name):
    for child in node:
        if _local(child.tag) == name:
            return child
    return None


def _findall(node, name):
    return [child for child in node if _local(child.tag) == name]


def _int_score(node, name, low=1, high=5) -> int | None:
    el = _find(node, name)
    if el is None or el.text is None:
        return None
    value = int(el.text.strip())
    if not low <= value <= high:
        raise AnnotationError(f"{name} score {value} outside {low}..{high}")
    return value


def parse_annotation_xml(document: str) -> list[ReadingSession]:
    """Parse one annotation file into per-reader nodule marks.

    Centroid-only marks (single edge point per slice, i.e. sub-3 mm nodules)
    and non-nodule marks are returned flagged as excluded rather than
    dropped, so ingest summaries can account for them.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise AnnotationError(f"malformed annotation XML: {exc}") from exc

    sessions = []
    for si, session in enumerate(_findall(root, "readingSession")):
        rid_el = _find(session, "servicingRadiologistID")
        reader_id = (rid_el.text.strip() if rid_el is not None and rid_el.text
                     else f"session-{si + 1}")
        marks = []
        for mi, nodule in enumerate(_findall(session, "unblindedReadNodule")):
            id_el = _find(nodule, "noduleID")
            mark_id = (id_el.text.strip() if id_el is not None and id_el.text
                       else f"mark-{mi + 1}")
            characteristics = _find(nodule, "characteristics")
            malignancy = texture = None
            if characteristics is not None:
                malignancy = _int_score(characteristics, "malignancy")
                texture = _int_score(characteristics, "texture")
            contours = []
            centroid_only = True
            for roi in _findall(nodule, "roi"):
                z_el = _find(roi, "imageZposition")
                if z_el is None or z_el.text is None:
                    raise AnnotationError(f"roi without imageZposition in mark {mark_id}")
                points = []
                for em in _findall(roi, "edgeMap"):
                    x_el, y_el = _find(em, "xCoord"), _find(em, "yCoord")
                    if x_el is None or y_el is None:
                        raise AnnotationError(f"edgeMap without coordinates in mark {mark_id}")
                    points.append((int(x_el.text), int(y_el.text)))
                if not points:
                    raise AnnotationError(f"roi without edge points in mark {mark_id}")
                if len(points) == 2:
                    raise AnnotationError(
                        f"region with fewer than 3 boundary points in mark {mark_id}")
                if len(points) > 1:
                    centroid_only = False
                contours.append(SliceContour(z_mm=float(z_el.text), points=tuple(points)))
            excluded, reason = False, None
            if not contours:
                excluded, reason = True, "no regions"
            elif centroid_only:
                excluded, reason = True, "centroid-only mark (diameter < 3 mm)"
            elif malignancy is None:
                excluded, reason = True, "no malignancy score"
            marks.append(NoduleMark(reader_id=reader_id, mark_id=mark_id,
                                    malignancy=malignancy, texture=texture,
                                    contours=tuple(contours),
                                    excluded=excluded, exclusion_reason=reason))
        for ni, nonnod in enumerate(_findall(session, "nonNodule")):
            id_el = _find(nonnod, "nonNoduleID")
            mark_id = (id_el.text.strip() if id_el is not None and id_el.text
                       else f"non-nodule-{ni + 1}")
            marks.append(NoduleMark(reader_id=reader_id, mark_id=mark_id,
                                    malignancy=None, texture=None, contours=(),
                                    excluded=True, exclusion_reason="non-nodule mark"))
        sessions.append(ReadingSession(reader_id=reader_id, marks=tuple(marks)))
    return sessions


# ---------------------------------------------------------------------------
# Rasterization


def _fill_polygon(points) -> set[tuple[int, int]]:
    """Pixels covered by a closed integer contour: boundary plus even-odd interior."""
    pts = list(points)
    filled = set(pts)
    n = len(pts)
    if n < 3:
        return filled
    ys = [p[1] for p in pts]
    for y in range(min(ys), max(ys) + 1):
        crossings = []
        for i in range(n):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % n]
            if y1 == y2:
                continue
            if (y1 <= y < y2) or (y2 <= y < y1):
                crossings.append(x1 + (y - y1) * (x2 - x1) / (y2 - y1))
        crossings.sort()
        for xa, xb in zip(crossings[::2], crossings[1::2]):
            for x in range(math.ceil(xa), math.floor(xb) + 1):
                filled.add((x, y))
    return filled


def rasterize_mark(mark: NoduleMark, grid: Volume) -> frozenset[tuple[int, int, int]]:
    """Filled voxel indices of a mark's contours on the given grid."""
    nx, ny, nz = grid.shape
    sz = grid.spacing.sz
    oz = grid.origin[2]
    voxels: set[tuple[int, int, int]] = set()
    for contour in mark.contours:
        zf = (contour.z_mm - oz) / sz
        z = int(round(zf))
        # allow float jitter up to a quarter slice, reject anything between slices
        if abs(zf - z) > 0.25 or not 0 <= z < nz:
            raise AnnotationError(
                f"contour z={contour.z_mm} mm does not match a slice of the grid")
        for x, y in _fill_polygon(contour.points):
            if 0 <= x < nx and 0 <= y < ny:
                voxels.add((x, y, z))
    return frozenset(voxels)


def make_read(mark: NoduleMark, grid: Volume) -> RadiologistRead:
    if mark.excluded:
        raise AnnotationError(f"mark {mark.mark_id} is excluded: {mark.exclusion_reason}")
    voxels = rasterize_mark(mark, grid)
    centers = grid.index_to_mm(np.array(sorted(voxels)))
    centroid = tuple(float(v) for v in centers.mean(axis=0))
    return RadiologistRead(reader_id=mark.reader_id, malignancy_score=mark.malignancy,
                           voxels=voxels, centroid_mm=centroid, texture_score=mark.texture)


# ---------------------------------------------------------------------------
# Grouping and fusion


def group_reads(reads, max_centroid_gap_mm: float = 5.0) -> list[list[RadiologistRead]]:
    """Cluster reads into physical nodules.

    Two reads belong together when their filled regions share a voxel or
    their centroids are within ``max_centroid_gap_mm``; the relation is
    closed transitively.
    """
    reads = list(reads)
    parent = list(range(len(reads)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(reads)):
        for j in range(i + 1, len(reads)):
            gap = math.dist(reads[i].centroid_mm, reads[j].centroid_mm)
            if gap <= max_centroid_gap_mm or reads[i].voxels & reads[j].voxels:
                parent[find(i)] = find(j)
    clusters: dict[int, list[RadiologistRead]] = {}
    for i, read in enumerate(reads):
        clusters.setdefault(find(i), []).append(read)
    return [clusters[k] for k in sorted(clusters)]


def pairwise_score_difference(scores) -> float:
    """Mean absolute score difference over all unordered pairs; 0 for < 2 scores."""
    scores = list(scores)
    if len(scores) < 2:
        return 0.0
    diffs = [abs(a - b) for i, a in enumerate(scores) for b in scores[i + 1:]]
    return sum(diffs) / len(diffs)


def equivalent_diameter(volume_mm3: float) -> float:
    """Diameter (mm) of the sphere with the given volume."""
    if volume_mm3 <= 0:
        raise ValueError(f"volume must be positive, got {volume_mm3}")
    return (6.0 * volume_mm3 / math.pi) ** (1.0 / 3.0)


def proxy_label_from_scores(scores) -> ProxyLabel:
    # compare the integer sum against 3n so a mean of exactly 3 is exact
    total, n = sum(scores), len(scores)
    if total < 3 * n:
        return ProxyLabel.BENIGN
    if total > 3 * n:
        return ProxyLabel.MALIGNANT
    return ProxyLabel.UNCERTAIN


def fuse_cluster(cluster, grid: Volume, nodule_id: str, patient_id: str) -> NoduleRecord:
    """Fuse one cluster of reads into a record.

    The fused mask keeps voxels marked by at least half of the readers,
    falling back to the union when that consensus is empty.
    """
    cluster = list(cluster)
    if not cluster:
        raise AnnotationError("cannot fuse an empty cluster")
    n = len(cluster)
    counts = Counter()
    for read in cluster:
        counts.update(read.voxels)
    consensus = {v for v, c in counts.items() if 2 * c >= n}
    if not consensus:
        consensus = set(counts)
    mask_arr = np.zeros(grid.shape, bool)
    idx = np.array(sorted(consensus))
    mask_arr[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    fused = Mask(mask_arr, spacing=grid.spacing, origin=grid.origin)

    centroid = tuple(float(v) for v in grid.index_to_mm(idx).mean(axis=0))
    eqd = equivalent_diameter(fused.physical_volume())
    scores = [r.malignancy_score for r in cluster]
    textures = [r.texture_score for r in cluster if r.texture_score is not None]
    return NoduleRecord(
        nodule_id=nodule_id,
        patient_id=patient_id,
        reads=tuple(cluster),
        fused_mask=fused,
        centroid_mm=centroid,
        eq_diameter_mm=eqd,
        mean_score=sum(scores) / n,
        proxy_label=proxy_label_from_scores(scores),
        n_readers=n,
        mean_pairwise_diff=pairwise_score_difference(scores),
        mean_texture=sum(textures) / len(textures) if textures else None,
    )


# ---------------------------------------------------------------------------
# Manifest and diagnosis files

MANIFEST_COLUMNS = [
    "nodule_id", "patient_id", "n_readers", "mean_score", "proxy_label",
    "eq_diameter_mm", "centroid_x_mm", "centroid_y_mm", "centroid_z_mm",
    "mean_pairwise_diff", "mean_texture",
]


@dataclass(frozen=True)
class ManifestRow:
    nodule_id: str
    patient_id: str
    n_readers: int
    mean_score: float
    proxy_label: ProxyLabel
    eq_diameter_mm: float
    centroid_mm: tuple[float, float, float]
    mean_pairwise_diff: float
    mean_texture: float | None

    @classmethod
    def from_record(cls, rec: NoduleRecord) -> "ManifestRow":
        return cls(nodule_id=rec.nodule_id, patient_id=rec.patient_id,
                   n_readers=rec.n_readers, mean_score=rec.mean_score,
                   proxy_label=rec.proxy_label, eq_diameter_mm=rec.eq_diameter_mm,
                   centroid_mm=rec.centroid_mm,
                   mean_pairwise_diff=rec.mean_pairwise_diff,
                   mean_texture=rec.mean_texture)


def write_manifest(path: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MANIFEST_COLUMNS)
        for r in rows:
            w.writerow([
                r.nodule_id, r.patient_id, r.n_readers, f"{r.mean_score:.6g}",
                r.proxy_label.value, f"{r.eq_diameter_mm:.6g}",
                f"{r.centroid_mm[0]:.6g}", f"{r.centroid_mm[1]:.6g}",
                f"{r.centroid_mm[2]:.6g}", f"{r.mean_pairwise_diff:.6g}",
                "" if r.mean_texture is None else f"{r.mean_texture:.6g}",
            ])


def read_manifest(path: str) -> list[ManifestRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ManifestRow(
                nodule_id=rec["nodule_id"],
                patient_id=rec["patient_id"],
                n_readers=int(rec["n_readers"]),
                mean_score=float(rec["mean_score"]),
                proxy_label=ProxyLabel(rec["proxy_label"]),
                eq_diameter_mm=float(rec["eq_diameter_mm"]),
                centroid_mm=(float(rec["centroid_x_mm"]), float(rec["centroid_y_mm"]),
                             float(rec["centroid_z_mm"])),
                mean_pairwise_diff=float(rec["mean_pairwise_diff"]),
                mean_texture=float(rec["mean_texture"]) if rec.get("mean_texture") else None,
            ))
    return rows


def read_diagnoses(path: str) -> dict[str, PatientDiagnosis]:
    """Load the patient diagnosis list (patient_id, category, method)."""
    out: dict[str, PatientDiagnosis] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            diag = PatientDiagnosis(patient_id=rec["patient_id"],
                                    category=int(rec["category"]),
                                    method=rec.get("method", ""))
            out[diag.patient_id] = diag
    return out
