"""contactforge: human-object contact maps from 3D proximity, 2D annotation
tooling, a part-attention detection head, and segmentation-style evaluation."""

from .annotations import (
    AnnotationRecord,
    Contact,
    DatasetStats,
    agreement,
    dataset_stats,
    lift_to_3d,
    parse_annotations,
    rasterize_polygons,
    rescale_record,
    save_annotations,
    split_dataset,
)
from .bvh import SpatialIndex, build_index, closest_point_query
from .checkpoint import load_checkpoint, save_checkpoint
from .contact import (
    ContactThresholds,
    ContactVertexSet,
    classify_contact,
    contact_triangles,
)
from .head import (
    HeadConfig,
    HeadParams,
    LossConfig,
    forward,
    gradient_check,
    gradients,
    init_params,
    loss,
    part_attend,
    predict,
    softmax_channels,
    train_toy,
)
from .maps import ContactMap
from .mesh import (
    BodyMesh,
    SceneMesh,
    compute_vertex_normals,
    part_vertex_indices,
    validate,
)
from .metrics import EvalReport, evaluate, evaluate_corpus
from .parts import NUM_PARTS, PART_NAMES, PartLabel
from .render import PinholeCamera, project, rasterize_contact

__version__ = "0.1.0"
